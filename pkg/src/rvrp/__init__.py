"""Rich vehicle routing: model, scoring, timeline scheduling and two-stage metaheuristics."""

from .distance import TravelMatrix, build_euclidean, load_matrix, matrix_for
from .model import (Instance, Order, Solution, StopVisit, Vehicle, load_instance, dump_instance,
                    validate_instance)
from .score import Score, compare, evaluate
from .timeline import schedule_tour

__version__ = "0.1.0"

__all__ = ["Instance", "Order", "Score", "Solution", "StopVisit", "TravelMatrix", "Vehicle",
           "build_euclidean", "compare", "dump_instance", "evaluate", "load_instance",
           "load_matrix", "matrix_for", "schedule_tour", "validate_instance"]

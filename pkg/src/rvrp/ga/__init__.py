"""Two-stage genetic algorithm."""

from .select import SELECTIONS, select_parents
from .tsp import (TSP_CROSSOVERS, TSP_MUTATORS, TspParams, run_tsp_ga, tsp_crossover,
                  tsp_mutate, tsp_population_size)
from .vrp import (VRP_CROSSOVERS, VRP_MUTATORS, GaParams, Individual, default_population_size,
                  initial_individual, population_formula, run_vrp_ga, vrp_crossover, vrp_mutate)

__all__ = [
    "SELECTIONS", "select_parents", "TSP_CROSSOVERS", "TSP_MUTATORS", "TspParams", "run_tsp_ga",
    "tsp_crossover", "tsp_mutate", "tsp_population_size", "VRP_CROSSOVERS", "VRP_MUTATORS",
    "GaParams", "Individual", "default_population_size", "initial_individual",
    "population_formula", "run_vrp_ga", "vrp_crossover", "vrp_mutate",
]

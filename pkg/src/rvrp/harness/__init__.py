"""Instance generation, experiment runs, statistics and export."""

from .export import export_results
from .generator import SHAPES, generate_instance
from .runner import ExperimentPlan, RunRecord, run_experiment, solve
from .stats import WilcoxonResult, wilcoxon_signed_rank

__all__ = ["SHAPES", "ExperimentPlan", "RunRecord", "WilcoxonResult", "export_results",
           "generate_instance", "run_experiment", "solve", "wilcoxon_signed_rank"]

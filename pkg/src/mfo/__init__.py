"""Multi-fidelity hyperparameter search with recurring learning-rate schedules."""

from .runner import ConfigError, ExperimentConfig, confidence_halfwidth, resume, run_experiment
from .samplers import RandomSampler, TPESampler
from .schedulers import RoundPlan, hyperband_plan, plan_cost, solve_n, top_k
from .schedules import SCHEDULES, make_schedule, round_boundaries, schedule_trace
from .search import HyperbandSearch, MORLSearch, RandomSearch, SuccessiveHalvingSearch
from .search_space import Config, IntUniform, LogUniform, SearchSpace, Uniform, UnitCubeTransformer, default_space
from .trainers import SurrogateTask, SurrogateTrainer, ToySGDTrainer

__version__ = "0.1.0"

__all__ = [
    "Config", "ConfigError", "ExperimentConfig", "HyperbandSearch", "IntUniform", "LogUniform",
    "MORLSearch", "RandomSampler", "RandomSearch", "RoundPlan", "SCHEDULES", "SearchSpace",
    "SuccessiveHalvingSearch", "SurrogateTask", "SurrogateTrainer", "TPESampler", "ToySGDTrainer",
    "Uniform", "UnitCubeTransformer", "confidence_halfwidth", "default_space", "hyperband_plan",
    "make_schedule", "plan_cost", "resume", "round_boundaries", "run_experiment", "schedule_trace",
    "solve_n", "top_k",
]

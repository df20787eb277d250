"""Logistics configuration: facts in, derived transport options, configurations out."""
from .ground import Variant, derive, derive_candidates, ground_stats
from .kb import FactSet, kg_to_facts, load_facts, parse_fact_file, read_kg
from .solve import Model, SolveConfig, build_problem, check_model, enumerate_models, optimize
from .verify import brute_force_solve, run_assertions

__version__ = "0.1.0"

__all__ = [
    "FactSet",
    "Model",
    "SolveConfig",
    "Variant",
    "brute_force_solve",
    "build_problem",
    "check_model",
    "derive",
    "derive_candidates",
    "enumerate_models",
    "ground_stats",
    "kg_to_facts",
    "load_facts",
    "optimize",
    "parse_fact_file",
    "read_kg",
    "run_assertions",
]

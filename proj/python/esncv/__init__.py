"""Echo state networks with time-series validation schemes and fast cross-validation."""

from ._esncv import (
    ConfigError,
    ContractError,
    EsncvError,
    LoadError,
    NumericalError,
    PlanningError,
    ReservoirConfig,
    SchemeSpec,
    SplitPlan,
    TaskData,
    backend_equivalence,
    cross_validate,
    evaluate,
    generate_weights,
    grid_search,
    harvest,
    load_japanese_vowels,
    load_univariate_csv,
    make_classification_task,
    make_generative_task,
    make_output_task,
    nrmse,
    plan_splits,
    run_bench,
    run_experiment,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "EsncvError",
    "LoadError",
    "NumericalError",
    "PlanningError",
    "ReservoirConfig",
    "SchemeSpec",
    "SplitPlan",
    "TaskData",
    "backend_equivalence",
    "cross_validate",
    "evaluate",
    "generate_weights",
    "grid_search",
    "harvest",
    "load_japanese_vowels",
    "load_univariate_csv",
    "make_classification_task",
    "make_generative_task",
    "make_output_task",
    "nrmse",
    "plan_splits",
    "run_bench",
    "run_experiment",
]

"""Distance-correlation forward selection for additive models over mixed
covariates (scalar, vector, categorical, functional)."""

from .additive import (
    AdditiveModel,
    ModelComparison,
    TermSpec,
    choose_contribution,
    compare_models,
    fit_additive,
)
from .data_model import (
    Covariate,
    Dataset,
    Metrics,
    StructuralError,
    categorical_covariate,
    functional_covariate,
    pairwise_distance,
    rmspe,
    scalar_covariate,
    vector_covariate,
)
from .dcor import (
    BlockPlan,
    CenteringStats,
    DCorResult,
    MemoryBudgetError,
    centering_stats,
    dcor_blockwise,
    dcor_direct,
    independence_test,
    screen_candidates,
)
from .fpca import FpcaBasis, fpca
from .scenarios import BenchResult, ScenarioSpec, generate, run_benchmark, scenario
from .selector import SelectionState, SelectorConfig, diagnose_saturation, run_selection

__all__ = [
    "AdditiveModel",
    "BenchResult",
    "BlockPlan",
    "CenteringStats",
    "Covariate",
    "DCorResult",
    "Dataset",
    "FpcaBasis",
    "Metrics",
    "ModelComparison",
    "MemoryBudgetError",
    "ScenarioSpec",
    "SelectionState",
    "SelectorConfig",
    "StructuralError",
    "TermSpec",
    "categorical_covariate",
    "centering_stats",
    "choose_contribution",
    "compare_models",
    "dcor_blockwise",
    "dcor_direct",
    "diagnose_saturation",
    "fit_additive",
    "fpca",
    "functional_covariate",
    "generate",
    "independence_test",
    "pairwise_distance",
    "rmspe",
    "run_benchmark",
    "run_selection",
    "scalar_covariate",
    "scenario",
    "screen_candidates",
    "vector_covariate",
]

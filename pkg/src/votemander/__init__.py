"""Votemandering: campaign spending plus redistricting under an efficiency-gap test."""

__version__ = "0.1.0"

from .fairness import (  # noqa: E402
    CASE_STUDY_WINDOW,
    DEFAULT_WINDOW,
    FairnessWindow,
    efficiency_gap,
    eg_value,
    morans_i,
    votemander_bonus,
)
from .fairness_step import solve_fairness_step  # noqa: E402
from .heuristic import votemander  # noqa: E402
from .local import run_local  # noqa: E402
from .instances import generate_grid_instance  # noqa: E402
from .model import (  # noqa: E402
    CampaignScenario,
    DistrictPlan,
    PlanConstraints,
    UnitGraph,
    apply_campaign,
    elect,
    validate_plan,
)
from .recom import ChainConfig, recursive_tree_partition, sample_pool  # noqa: E402

__all__ = [
    "CASE_STUDY_WINDOW", "DEFAULT_WINDOW", "CampaignScenario", "ChainConfig", "DistrictPlan",
    "FairnessWindow", "PlanConstraints", "UnitGraph", "apply_campaign", "efficiency_gap",
    "eg_value", "elect", "generate_grid_instance", "morans_i", "recursive_tree_partition",
    "run_local", "sample_pool", "solve_fairness_step", "validate_plan", "votemander",
    "votemander_bonus",
]

"""Request bodies shared by the HTTP API and the CLI.

Graphs, plans and scenarios travel as the same JSON documents the CLI reads
from disk; they are parsed and validated by :mod:`votemander.instances`.
"""
from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Window(_Body):
    lo: Optional[float] = -0.08
    hi: Optional[float] = 0.08

    @field_validator("hi")
    @classmethod
    def _ordered(cls, hi, info):
        lo = info.data.get("lo")
        if lo is not None and hi is not None and lo > hi:
            raise ValueError("window lo must not exceed hi")
        return hi


class Scenario(_Body):
    alpha: float = Field(0.5, ge=0.0, le=1.0)
    budgetA: float = Field(0.0, ge=0.0)
    budgetB: float = Field(0.0, ge=0.0)
    allocB: list[float] | Literal["proportional"] = "proportional"


class GenerateRequest(_Body):
    rows: int = Field(20, ge=1)
    cols: int = Field(20, ge=1)
    seed: int = 0
    pop_range: tuple[int, int] = (350, 400)
    share_range: tuple[float, float] = (0.2, 0.8)
    morans_i: Optional[float] = None


class SampleRequest(_Body):
    graph: dict[str, Any]
    plan: Optional[dict[str, Any]] = None
    n_districts: int = Field(10, ge=1)
    steps: int = Field(400, ge=1)
    interval: int = Field(1, ge=1)
    seed: int = 0
    pop_deviation: float = Field(0.01, gt=0.0)
    cut_bound: Optional[int] = None
    pool_size: Optional[int] = Field(None, ge=1)


class ScoreRequest(_Body):
    graph: dict[str, Any]
    plan: dict[str, Any]
    scenario: Optional[Scenario] = None
    allocation: Optional[list[float]] = None
    pop_deviation: float = Field(0.01, gt=0.0)
    cut_bound: Optional[int] = None


class FairnessStepRequest(_Body):
    graph: dict[str, Any]
    initial_plan: dict[str, Any]
    target_plan: dict[str, Any]
    scenario: Scenario
    window: Window = Window()


class VotemanderRequest(_Body):
    graph: dict[str, Any]
    plan: dict[str, Any]
    pool: list[dict[str, Any]]
    scenario: Scenario
    window: Window = Window()
    weight: int = Field(1, ge=0)
    exhaustive: bool = False


class LocalRequest(_Body):
    graph: dict[str, Any]
    plan: dict[str, Any]
    scenario: Scenario
    window: Window = Window()
    submap_pool_size: int = Field(20, ge=1)
    seed: int = 0
    pop_deviation: float = Field(0.01, gt=0.0)


class SweepRequest(_Body):
    config: dict[str, Any]


class IngestRequest(_Body):
    graph: dict[str, Any]
    plan: Optional[dict[str, Any]] = None

"""Parameter schedules, the TSP mutual-information estimate and the thresholded test."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .infostat import tree_node_counts
from .partition import Dataset, TspTree, grow_full_tree
from .pruner import EmbeddedFamily, LeafSet, embedded_family, select_regularized

__all__ = [
    "Schedule",
    "ScheduleValues",
    "TestDecision",
    "TspFit",
    "schedule_at",
    "fit_tsp",
    "estimate_mi",
    "decide_independence",
]

log = logging.getLogger(__name__)

B_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class Schedule:
    """Sequences driving growth, penalty and decision at sample size n.

    ``b_n = w * n**-l``, ``delta_n = exp(-n**delta_exp)`` and
    ``a_n = a_scale * n**-a_exp``.  ``threshold_unit`` says whether ``a_n`` is
    read in nats (default) or bits.
    """

    w: float = 0.1
    l: float = 0.001
    alpha: float = 1e-4
    delta_exp: float = 1.0 / 3.0
    a_scale: float = 0.5
    a_exp: float = 1.0
    report_base: float = 2.0
    threshold_unit: str = "nats"

    def __post_init__(self):
        if self.w <= 0:
            raise ValueError(f"w must be positive, got {self.w}")
        if not 0 < self.l < 1 / 3:
            raise ValueError(f"l must lie in (0, 1/3), got {self.l}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.delta_exp <= 0 or self.a_scale <= 0:
            raise ValueError("delta_exp and a_scale must be positive")
        if self.report_base <= 1:
            raise ValueError("report_base must exceed 1")
        if self.threshold_unit not in ("nats", "bits"):
            raise ValueError("threshold_unit must be 'nats' or 'bits'")

    def with_alpha(self, alpha: float) -> "Schedule":
        return Schedule(**{**asdict(self), "alpha": alpha})

    def to_dict(self) -> dict:
        return asdict(self)


class ScheduleValues(NamedTuple):
    b: float
    delta: float
    a: float


def schedule_at(s: Schedule, n: int) -> ScheduleValues:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    b = s.w * n ** (-s.l)
    if b >= B_CLAMP:
        log.warning("b_n = %.6g >= 1 for w=%g, l=%g, n=%d; clamped to %.10f", b, s.w, s.l, n, B_CLAMP)
        b = B_CLAMP
    delta = math.exp(-(n**s.delta_exp))
    a = s.a_scale * n ** (-s.a_exp)
    if s.threshold_unit == "bits":
        a *= math.log(2.0)
    return ScheduleValues(b, delta, a)


@dataclass(frozen=True)
class TestDecision:
    """Outcome of one test run; ``statistic_nats`` is the selected partition's divergence."""

    __test__ = False  # keep pytest from collecting this class

    decision: int
    statistic_nats: float
    mi_reported: float
    threshold: float
    leaf_count: int
    full_leaf_count: int
    b_n: float
    delta_n: float
    n: int
    p: int
    q: int
    schedule: Schedule = field(repr=False)

    def to_record(self) -> dict:
        s = self.schedule
        return {
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "w": s.w,
            "l": s.l,
            "alpha": s.alpha,
            "b_n": self.b_n,
            "delta_n": self.delta_n,
            "a_n": self.threshold,
            "statistic_nats": self.statistic_nats,
            "mi_reported": self.mi_reported,
            "report_base": s.report_base,
            "leaf_count": self.leaf_count,
            "full_leaf_count": self.full_leaf_count,
            "decision": self.decision,
        }


@dataclass(eq=False)
class TspFit:
    """Grown tree and its greedy family; selections for many alphas reuse both."""

    data: Dataset
    schedule: Schedule
    values: ScheduleValues
    tree: TspTree
    family: EmbeddedFamily

    def select(self, alpha: float | None = None) -> tuple[LeafSet, float]:
        a = self.schedule.alpha if alpha is None else alpha
        return select_regularized(self.family, self.data.n, self.values.b, self.values.delta, a)

    def selected_sizes(self, alphas: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Selected leaf count and divergence for each alpha, vectorised over alphas."""
        pens, _ = self.family.objectives(self.data.n, self.values.b, self.values.delta, 0.0)
        obj = self.family.divergences[None, :] - np.asarray(alphas, dtype=float)[:, None] * pens[None, :]
        k = np.argmax(obj, axis=1)
        return k + 1, self.family.divergences[k]


def fit_tsp(data: Dataset, s: Schedule) -> TspFit:
    if data.n < 2:
        raise ValueError("need at least 2 samples")
    vals = schedule_at(s, data.n)
    tree = grow_full_tree(data, vals.b)
    family = embedded_family(data, tree, tree_node_counts(data, tree))
    return TspFit(data, s, vals, tree, family)


def estimate_mi(data: Dataset, s: Schedule) -> tuple[float, LeafSet]:
    """Divergence of the selected partition, converted to ``s.report_base``."""
    fit = fit_tsp(data, s)
    leafset, _ = fit.select()
    return max(leafset.divergence, 0.0) / math.log(s.report_base), leafset


def decide_independence(data: Dataset, s: Schedule) -> TestDecision:
    """Reject independence (decision 1) iff the statistic reaches ``a_n``."""
    fit = fit_tsp(data, s)
    leafset, _ = fit.select()
    stat = max(leafset.divergence, 0.0)
    decision = int(leafset.size > 1 and stat >= fit.values.a)
    return TestDecision(
        decision=decision,
        statistic_nats=stat,
        mi_reported=stat / math.log(s.report_base),
        threshold=fit.values.a,
        leaf_count=leafset.size,
        full_leaf_count=fit.tree.leaf_count,
        b_n=fit.values.b,
        delta_n=fit.values.delta,
        n=data.n,
        p=data.p,
        q=data.q,
        schedule=s,
    )

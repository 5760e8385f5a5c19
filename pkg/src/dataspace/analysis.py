"""Quantities derived from an assignment: restriction differences, local
k-bounded inconsistency, neighborhood extrema and rankings.

Every search runs over the materialized open sets only. Ties are broken by
larger cardinality, then by smaller open-set id.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataspaceError, RestrictionError
from .presheaf import Assignment
from .topology import EMPTY_ID, FULL_ID, OpenSet, Topology

DEFAULT_K = 20


@dataclass(frozen=True)
class InconsistencyResult:
    u: int
    k: int
    value: float
    witness_v: int
    candidates_examined: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NeighborhoodExtrema:
    item_index: int
    a_max: float
    argmax: int
    a_min: float
    argmin: int
    neighborhood_count: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RankedSlice:
    os_id: int
    expr: str
    cardinality: int
    value: float
    rank: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NeighborhoodReport:
    item_index: int
    bottom: tuple
    top: tuple


def _abs_differences(assign: Assignment, t: Topology, u: int, vs: np.ndarray) -> np.ndarray:
    """``|res_{U,V}(a_U) - a_V|`` for each ``V`` in ``vs`` (all assumed ⊆ U)."""
    spec = assign.presheaf
    v_empty = t.cardinalities[vs] == 0
    if assign.is_exact:
        num_u = np.full(vs.shape, assign.numerators[u])
        den_u = assign.denominators[u]
        restricted = spec.restrict(num_u, v_empty)
        num_v, den_v = assign.numerators[vs], assign.denominators[vs]
        # one division of exact integers: correctly rounded
        return np.abs(restricted * den_v - num_v * den_u) / (den_u * den_v)
    restricted = spec.restrict(np.full(vs.shape, assign.values[u]), v_empty)
    return np.abs(restricted - assign.values[vs])


def _pick(ids: np.ndarray, scores: np.ndarray, cards: np.ndarray, largest: bool) -> int:
    """Index into ``ids`` of the best score, ties to larger cardinality then smaller id."""
    primary = -scores if largest else scores
    order = np.lexsort((ids, -cards, primary))
    return int(order[0])


def restriction_difference(assign: Assignment, t: Topology, u: int, v: int) -> float:
    """Signed ``res_{U,V}(a_U) - a_V`` for ``V ⊆ U``."""
    if not t.is_subset(v, u):
        raise RestrictionError(f"open set {v} is not a subset of {u}; restriction undefined")
    restricted = assign.presheaf.restrict(assign.exact(u), bool(t.cardinalities[v] == 0))
    return float(restricted - assign.exact(v))


def local_inconsistency(assign: Assignment, t: Topology, u: int, k: int = DEFAULT_K) -> InconsistencyResult:
    """Largest restriction difference from ``U`` into an open subset missing at most ``k`` items."""
    if k < 0:
        raise DataspaceError(f"k must be non-negative, got {k}")
    vs = t.subsets_of(u, max_removed=k)
    diffs = _abs_differences(assign, t, u, vs)
    cards = t.cardinalities[vs]
    best = _pick(vs, diffs, cards, largest=True)
    return InconsistencyResult(int(u), int(k), float(diffs[best]), int(vs[best]), int(vs.size))


def local_inconsistency_all(assign: Assignment, t: Topology, k: int = DEFAULT_K) -> list:
    return [local_inconsistency(assign, t, os.os_id, k) for os in t if os.os_id != EMPTY_ID]


def neighborhood_extrema(assign: Assignment, t: Topology, item_index: int) -> NeighborhoodExtrema:
    nbrs = t.neighborhoods_of(item_index)
    values = assign.values[nbrs]
    cards = t.cardinalities[nbrs]
    hi = _pick(nbrs, values, cards, largest=True)
    lo = _pick(nbrs, values, cards, largest=False)
    return NeighborhoodExtrema(
        int(item_index), float(values[hi]), int(nbrs[hi]), float(values[lo]), int(nbrs[lo]), int(nbrs.size)
    )


def rank_open_sets(
    assign: Assignment,
    t: Topology,
    direction: str = "top",
    n: int = 10,
    where: Optional[Callable[[OpenSet], bool]] = None,
    among: Optional[Sequence[int]] = None,
) -> list:
    """The ``n`` best (``top``) or worst (``bottom``) nonempty open sets.

    ``where`` filters open sets before ranking; ``among`` restricts the
    candidates to the given ids.
    """
    if direction not in ("top", "bottom"):
        raise DataspaceError(f"direction must be 'top' or 'bottom', got {direction!r}")
    if n < 1:
        raise DataspaceError("n must be at least 1")
    ids = np.arange(len(t)) if among is None else np.asarray(among, dtype=np.int64)
    ids = ids[t.cardinalities[ids] > 0]
    if where is not None:
        ids = np.array([i for i in ids.tolist() if where(t[i])], dtype=np.int64)
    if ids.size == 0:
        return []
    values = assign.values[ids]
    primary = -values if direction == "top" else values
    order = np.lexsort((ids, -t.cardinalities[ids], primary))[:n]
    return [
        RankedSlice(int(ids[j]), t.expr_text(int(ids[j])), int(t.cardinalities[ids[j]]), float(values[j]), rank)
        for rank, j in enumerate(order.tolist(), start=1)
    ]


def neighborhood_report(assign: Assignment, t: Topology, item_index: int, n: int = 3) -> NeighborhoodReport:
    nbrs = t.neighborhoods_of(item_index)
    return NeighborhoodReport(
        int(item_index),
        tuple(rank_open_sets(assign, t, "bottom", n, among=nbrs)),
        tuple(rank_open_sets(assign, t, "top", n, among=nbrs)),
    )


def count_at(assign: Assignment, t: Topology, value: float) -> int:
    """Number of nonempty open sets whose value equals ``value`` exactly."""
    nonempty = t.cardinalities > 0
    return int(np.sum(nonempty & (assign.values == value)))


def global_value(assign: Assignment) -> float:
    return float(assign.values[FULL_ID])

"""Statistic-valued presheaves over a topology, and their assignments.

Every supported statistic uses the same restriction rule: the identity into a
nonempty subset and the zero map into the empty set. Section spaces are
``[0, 1]`` for rate statistics and ``[0, inf)`` for mean loss on nonempty
sets, and the one-point space ``{0}`` on the empty set.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _bits
from .data import EvaluationContext
from .errors import RestrictionError, StatisticError
from .topology import EMPTY_ID, OpenSet, Topology


class StatKind(str, enum.Enum):
    ACCURACY = "accuracy"
    PRECISION_MACRO = "precision_macro"
    RECALL_MACRO = "recall_macro"
    F1_MACRO = "f1_macro"
    MEAN_LOSS = "mean_loss"

    @property
    def is_rate(self) -> bool:
        return self is not StatKind.MEAN_LOSS

    @property
    def title(self) -> str:
        return {
            StatKind.ACCURACY: "Accuracy",
            StatKind.PRECISION_MACRO: "Precision (macro)",
            StatKind.RECALL_MACRO: "Recall (macro)",
            StatKind.F1_MACRO: "F1 (macro)",
            StatKind.MEAN_LOSS: "Mean loss",
        }[self]


@dataclass(frozen=True)
class Interval:
    low: float
    high: float

    def __contains__(self, value) -> bool:
        return self.low <= value <= self.high


POINT_ZERO = Interval(0.0, 0.0)


@dataclass(frozen=True)
class PresheafSpec:
    statistic: StatKind

    def section_space(self, cardinality: int) -> Interval:
        if cardinality == 0:
            return POINT_ZERO
        return Interval(0.0, 1.0) if self.statistic.is_rate else Interval(0.0, math.inf)

    def restrict(self, value_at_u, v_is_empty):
        """Image of a section over ``U`` in the sections over ``V ⊆ U``.

        Works elementwise on arrays, and on exact values such as ``Fraction``.
        """
        if isinstance(v_is_empty, np.ndarray):
            return np.where(v_is_empty, 0, value_at_u)
        return 0 * value_at_u if v_is_empty else value_at_u


def accuracy_presheaf() -> PresheafSpec:
    return PresheafSpec(StatKind.ACCURACY)


def restrict(spec: PresheafSpec, t: Topology, u: int, v: int, value_at_u):
    if not t.is_subset(v, u):
        raise RestrictionError(f"open set {v} is not a subset of {u}; restriction undefined")
    return spec.restrict(value_at_u, t.cardinalities[v] == 0)


@dataclass(frozen=True)
class Assignment:
    """One statistic value per open set.

    Count-ratio statistics (accuracy) also carry exact integer numerators and
    denominators so that differences between values can be formed exactly.
    """

    presheaf: PresheafSpec
    values: np.ndarray = field(repr=False)
    source_tag: str = ""
    numerators: Optional[np.ndarray] = field(default=None, repr=False)
    denominators: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.values, self.numerators, self.denominators):
            if arr is not None:
                arr.setflags(write=False)
        if self.values[EMPTY_ID] != 0:
            raise StatisticError("an assignment must be 0 on the empty set")

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, os_id: int) -> float:
        return float(self.values[os_id])

    @property
    def statistic(self) -> StatKind:
        return self.presheaf.statistic

    @property
    def is_exact(self) -> bool:
        return self.numerators is not None

    def exact(self, os_id: int):
        if self.numerators is None:
            return float(self.values[os_id])
        return Fraction(int(self.numerators[os_id]), int(self.denominators[os_id]))

    def rows(self, topology: Topology):
        for os in topology:
            yield os.os_id, topology.expr_text(os.os_id), os.cardinality, float(self.values[os.os_id])

    def to_csv(self, topology: Topology) -> str:
        buf = io.StringIO(newline="")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["os_id", "expr", "cardinality", "value"])
        for os_id, expr, card, value in self.rows(topology):
            writer.writerow([os_id, expr, card, f"{value:.6f}"])
        return buf.getvalue()

    def to_json(self, topology: Topology) -> dict:
        return {
            "statistic": self.statistic.value,
            "source_tag": self.source_tag,
            "values": [
                {"os_id": os_id, "expr": expr, "cardinality": card, "value": round(value, 6)}
                for os_id, expr, card, value in self.rows(topology)
            ],
        }


# ------------------------------------------------------------ single set


def _macro(stat: StatKind, true, pred) -> float:
    terms = []
    for label in sorted(set(true.tolist())):
        is_true = true == label
        is_pred = pred == label
        tp = int(np.sum(is_true & is_pred))
        n_true, n_pred = int(is_true.sum()), int(is_pred.sum())
        if stat is StatKind.PRECISION_MACRO:
            if n_pred:
                terms.append(tp / n_pred)
        elif stat is StatKind.RECALL_MACRO:
            terms.append(tp / n_true)
        else:
            terms.append(2 * tp / (n_true + n_pred))
    return sum(terms) / len(terms) if terms else 0.0


def section_value(stat, u: OpenSet, ctx: EvaluationContext) -> float:
    """The statistic of the model's outputs restricted to the items of ``u``."""
    stat = StatKind(stat)
    members = u.members
    if members.size == 0:
        return 0.0
    if stat is StatKind.ACCURACY:
        return int(ctx.correct[members].sum()) / members.size
    if stat is StatKind.MEAN_LOSS:
        losses = ctx.losses[members]
        if np.isnan(losses).any():
            raise StatisticError(f"mean_loss needs a loss for every item of open set {u.os_id}")
        return float(losses.mean())
    return _macro(stat, ctx.true_index[members], ctx.pred_index[members])


# ------------------------------------------------------------- all sets

_CHUNK_CELLS = 1 << 23


def _chunked_counts(topology: Topology, columns: np.ndarray) -> np.ndarray:
    """``membership @ columns`` computed in row chunks of the unpacked bit matrix."""
    n = topology.n_items
    m = len(topology)
    out = np.empty((m, columns.shape[1]), dtype=np.float64)
    step = max(1, _CHUNK_CELLS // max(n, 1))
    for start in range(0, m, step):
        block = _bits.unpack(topology.bits[start:start + step], n).astype(np.float64)
        out[start:start + step] = block @ columns
    return out


def _macro_values(stat: StatKind, topology: Topology, ctx: EvaluationContext) -> np.ndarray:
    n_labels = len(ctx.dataset.label_space)
    eye = np.eye(n_labels)
    true_hot = eye[ctx.true_index]
    pred_hot = eye[ctx.pred_index]
    tp_hot = true_hot * ctx.correct[:, None]
    counts = np.rint(_chunked_counts(topology, np.hstack([true_hot, pred_hot, tp_hot])))
    n_true, n_pred, tp = np.split(counts, 3, axis=1)
    present = n_true > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        if stat is StatKind.PRECISION_MACRO:
            defined = present & (n_pred > 0)
            per_label = tp / n_pred
        elif stat is StatKind.RECALL_MACRO:
            defined = present
            per_label = tp / n_true
        else:
            defined = present
            per_label = 2 * tp / (n_true + n_pred)
    n_terms = defined.sum(axis=1)
    total = np.where(defined, per_label, 0.0).sum(axis=1)
    return np.divide(total, n_terms, out=np.zeros(len(topology)), where=n_terms > 0)


def compute_assignment(topology: Topology, stat, ctx: EvaluationContext) -> Assignment:
    """Evaluate ``stat`` on every open set of ``topology``."""
    stat = StatKind(stat)
    if ctx.n_items != topology.n_items or tuple(ctx.dataset.ids) != topology.item_ids:
        raise StatisticError("topology and evaluation context come from different datasets")
    spec = PresheafSpec(stat)
    tag = ctx.predictions.source_tag
    cards = np.asarray(topology.cardinalities, dtype=np.int64)

    if stat is StatKind.ACCURACY:
        correct_bits = _bits.pack(ctx.correct)
        numerators = _bits.popcount(topology.bits & correct_bits)
        denominators = np.where(cards == 0, 1, cards)
        values = numerators / denominators
        return Assignment(spec, values, tag, numerators, denominators)

    if stat is StatKind.MEAN_LOSS:
        missing = _bits.pack(np.isnan(ctx.losses))
        lacking = np.flatnonzero(np.any(topology.bits & missing, axis=1))
        if lacking.size:
            raise StatisticError(
                f"mean_loss needs a loss for every item; open set {int(lacking[0])} has items without one"
            )
        sums = _chunked_counts(topology, np.nan_to_num(ctx.losses)[:, None])[:, 0]
        values = np.divide(sums, cards, out=np.zeros(len(topology)), where=cards > 0)
        return Assignment(spec, values, tag)

    values = _macro_values(stat, topology, ctx)
    values[EMPTY_ID] = 0.0
    return Assignment(spec, values, tag)

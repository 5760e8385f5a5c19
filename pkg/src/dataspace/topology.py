"""Subbasis construction and bounded generation of a finite topology.

Open sets are identified by their member set. Generation materializes the
empty set, the full set, the subbasis elements, then intersections and unions
of up to a configured number of distinct subbasis elements, in a fixed order.
Duplicate member sets are merged into the first open set that produced them,
whose expression stays canonical; later expressions are kept as provenance.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _bits
from .data import AttributeValue, Dataset
from .errors import TopologyError

INTERSECTION_SIGN = " ∩ "
UNION_SIGN = " ∪ "
EMPTY_TEXT = "∅"
FULL_TEXT = "X"
EMPTY_ID = 0
FULL_ID = 1


class ElementKind(str, enum.Enum):
    LABEL = "label"
    ATTRIBUTE = "attribute"
    SCALAR_GE = "scalar_ge"
    SCALAR_LE = "scalar_le"
    ALL = "all"


@dataclass(frozen=True)
class SubbasisElement:
    sb_index: int
    name: str
    kind: ElementKind
    bits: np.ndarray = field(repr=False, compare=False)
    n_items: int = field(repr=False, default=0)

    @property
    def members(self) -> np.ndarray:
        return _bits.indices(self.bits, self.n_items)

    @property
    def cardinality(self) -> int:
        return int(_bits.popcount(self.bits))


@dataclass(frozen=True)
class SubbasisSpec:
    """Which subsets of the dataset seed the topology.

    ``attributes=None`` selects every attribute; an empty sequence selects
    none. Thresholds are ``(scalar_name, ">=" | "<=", value)`` triples.
    """

    labels: bool = True
    attributes: Optional[Sequence[str]] = None
    thresholds: Sequence[tuple] = ()
    waive_coverage: bool = False


class Subbasis:
    def __init__(self, elements: Sequence[SubbasisElement], item_ids: Sequence[str]):
        self.elements = tuple(elements)
        self.item_ids = tuple(item_ids)
        self.n_items = len(self.item_ids)
        names = [e.name for e in self.elements]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise TopologyError(f"subbasis element name {dup!r} is not unique")
        if not self.elements:
            raise TopologyError("subbasis has no elements")
        for i, e in enumerate(self.elements):
            if e.sb_index != i:
                raise TopologyError("subbasis indices must be 0..s-1 in order")
        self.bits = np.vstack([e.bits for e in self.elements])
        self.bits.setflags(write=False)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i) -> SubbasisElement:
        return self.elements[i]

    @cached_property
    def _by_name(self) -> dict:
        return {e.name: e.sb_index for e in self.elements}

    def index_of(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise TopologyError(f"unknown subbasis element {name!r}") from None

    def covers(self) -> bool:
        union = np.bitwise_or.reduce(self.bits, axis=0)
        return int(_bits.popcount(union)) == self.n_items


def _threshold_name(scalar: str, direction: str, value: float) -> str:
    return f"scalar:{scalar}{direction}{value:g}"


def build_subbasis(dataset: Dataset, spec: SubbasisSpec = SubbasisSpec()) -> Subbasis:
    """Label, attribute and scalar-threshold subsets of ``dataset``.

    Elements are ordered labels first, then attributes, then thresholds. Only
    a present attribute grants membership; absent and missing both exclude.
    """
    n = dataset.n_items
    masks = []  # (name, kind, bool mask)

    if spec.labels:
        labels = dataset.label_indices
        for li, label in enumerate(dataset.label_space):
            masks.append((f"label:{label}", ElementKind.LABEL, labels == li))

    attribute_names = dataset.attribute_names if spec.attributes is None else spec.attributes
    codes = dataset.attribute_codes
    for name in attribute_names:
        try:
            col = dataset.attribute_names.index(name)
        except ValueError:
            raise TopologyError(f"unknown attribute {name!r}") from None
        masks.append((f"attr:{name}", ElementKind.ATTRIBUTE, codes[:, col] == AttributeValue.PRESENT))

    scalars = dataset.scalar_matrix
    for scalar, direction, value in spec.thresholds:
        try:
            col = dataset.scalar_names.index(scalar)
        except ValueError:
            raise TopologyError(f"unknown scalar {scalar!r}") from None
        column = scalars[:, col]
        defined = ~np.isnan(column)
        value = float(value)
        if direction in (">=", "ge"):
            kind, direction = ElementKind.SCALAR_GE, ">="
            mask = defined & (np.where(defined, column, -np.inf) >= value)
        elif direction in ("<=", "le"):
            kind, direction = ElementKind.SCALAR_LE, "<="
            mask = defined & (np.where(defined, column, np.inf) <= value)
        else:
            raise TopologyError(f"threshold direction must be '>=' or '<=', got {direction!r}")
        masks.append((_threshold_name(scalar, direction, value), kind, mask))

    if not masks:
        raise TopologyError("subbasis specification selects zero elements")

    elements = [
        SubbasisElement(i, name, kind, _bits.pack(mask), n) for i, (name, kind, mask) in enumerate(masks)
    ]
    subbasis = Subbasis(elements, dataset.ids)
    if not subbasis.covers():
        if not spec.waive_coverage:
            union = np.bitwise_or.reduce(subbasis.bits, axis=0)
            uncovered = np.flatnonzero(~_bits.unpack(union, n))
            raise TopologyError(
                f"subbasis does not cover the dataset: {uncovered.size} item(s) uncovered, "
                f"e.g. {dataset.ids[uncovered[0]]!r}"
            )
        everything = SubbasisElement(len(elements), "all", ElementKind.ALL, _bits.pack(np.ones(n, bool)), n)
        subbasis = Subbasis([*elements, everything], dataset.ids)
    return subbasis


@dataclass(frozen=True)
class SetExpression:
    """Provenance of an open set: ``op`` applied to subbasis indices ``terms``.

    ``op`` is one of ``empty``, ``full``, ``element``, ``intersection`` or
    ``union``; ``terms`` is strictly increasing.
    """

    op: str
    terms: tuple = ()

    def text(self, subbasis: Subbasis) -> str:
        if self.op == "empty":
            return EMPTY_TEXT
        if self.op == "full":
            return FULL_TEXT
        names = [subbasis[i].name for i in self.terms]
        sign = UNION_SIGN if self.op == "union" else INTERSECTION_SIGN
        return sign.join(names)

    @property
    def arity(self) -> int:
        return len(self.terms)

    def to_json(self) -> dict:
        return {"op": self.op, "terms": list(self.terms)}

    @classmethod
    def from_json(cls, data: dict) -> "SetExpression":
        return cls(data["op"], tuple(data["terms"]))


EMPTY = SetExpression("empty")
FULL = SetExpression("full")


@dataclass(frozen=True)
class GenerationConfig:
    max_intersection_arity: int = 2
    max_union_arity: int = 1
    min_cardinality: int = 20
    max_open_sets: int = 1_000_000
    keep_empty_intersections: bool = False

    def validate(self):
        if self.max_intersection_arity < 1 or self.max_union_arity < 1:
            raise TopologyError("intersection and union arity must be at least 1")
        if self.min_cardinality < 0:
            raise TopologyError("min_cardinality must be non-negative")
        if self.max_open_sets < 2:
            raise TopologyError("max_open_sets must allow at least the empty and full sets")


@dataclass(frozen=True)
class OpenSet:
    os_id: int
    canonical_expr: SetExpression
    all_exprs: tuple
    cardinality: int
    bits: np.ndarray = field(repr=False, compare=False)
    n_items: int = field(repr=False, default=0)

    @property
    def members(self) -> np.ndarray:
        return _bits.indices(self.bits, self.n_items)

    def member_set(self) -> frozenset:
        return frozenset(int(i) for i in self.members)

    def __contains__(self, item_index: int) -> bool:
        return bool(_bits.contains(self.bits, item_index))


class _Builder:
    """Accumulates deduplicated member sets in generation order."""

    def __init__(self, n_items: int, config: GenerationConfig):
        self.n_items = n_items
        self.config = config
        self.rows = []
        self.exprs = []
        self.cards = []
        self._by_hash = {}

    def _find(self, row, h) -> Optional[int]:
        for os_id in self._by_hash.get(h, ()):
            if np.array_equal(self.rows[os_id], row):
                return os_id
        return None

    def _new(self, row, h, card, expr):
        if len(self.rows) >= self.config.max_open_sets:
            raise TopologyError(
                f"open-set count would exceed max_open_sets={self.config.max_open_sets}"
            )
        os_id = len(self.rows)
        self.rows.append(np.array(row))
        self.exprs.append([expr])
        self.cards.append(card)
        self._by_hash.setdefault(h, []).append(os_id)

    def seed(self, row, expr):
        h = int(_bits.row_hashes(row)[0])
        card = int(_bits.popcount(row))
        found = self._find(row, h)
        if found is None:
            self._new(row, h, card, expr)
        else:
            self.exprs[found].append(expr)

    def offer(self, rows: np.ndarray, exprs: Iterable[SetExpression]):
        rows = np.atleast_2d(rows)
        cards = _bits.popcount(rows)
        min_card = self.config.min_cardinality
        full_card = self.cards[FULL_ID]
        # only EMPTY and FULL may sit below the cardinality floor
        keep = (cards >= min_card) | (cards == 0) | (cards == full_card)
        hashes = _bits.row_hashes(rows)
        for row, card, h, k, expr in zip(rows, cards.tolist(), hashes.tolist(), keep, exprs):
            if not k:
                continue
            if card == 0:
                if expr.op != "intersection" or self.config.keep_empty_intersections:
                    self.exprs[EMPTY_ID].append(expr)
                continue
            found = self._find(row, h)
            if found is not None:
                self.exprs[found].append(expr)
            elif card >= min_card:
                self._new(row, h, card, expr)


def generate_topology(subbasis: Subbasis, config: GenerationConfig = GenerationConfig()) -> "Topology":
    """Materialize the bounded topology generated by ``subbasis``.

    Order: EMPTY, FULL, each subbasis element, intersections of ``t`` distinct
    elements for ``t = 2..max_intersection_arity``, then unions likewise, each
    family in lexicographic index order. Candidates below ``min_cardinality``
    survive only by equalling an already materialized set.
    """
    config.validate()
    n = subbasis.n_items
    sb = subbasis.bits
    s = len(subbasis)
    builder = _Builder(n, config)
    builder.seed(np.zeros(sb.shape[1], dtype=_bits.WORD_DTYPE), EMPTY)
    builder.seed(np.bitwise_or.reduce(sb, axis=0), FULL)
    builder.offer(sb, (SetExpression("element", (i,)) for i in range(s)))

    for op, reduce in (("intersection", np.bitwise_and), ("union", np.bitwise_or)):
        max_arity = config.max_intersection_arity if op == "intersection" else config.max_union_arity
        for t in range(2, min(max_arity, s) + 1):
            for prefix in itertools.combinations(range(s - 1), t - 1):
                first = prefix[-1] + 1
                acc = reduce.reduce(sb[list(prefix)], axis=0)
                if (
                    op == "intersection"
                    and not config.keep_empty_intersections
                    and not acc.any()
                ):
                    continue
                rows = reduce(acc, sb[first:])
                builder.offer(rows, (SetExpression(op, prefix + (j,)) for j in range(first, s)))

    bits = np.vstack(builder.rows)
    return Topology(subbasis, config, bits, [tuple(e) for e in builder.exprs])


class Topology:
    """An immutable family of materialized open sets with containment queries."""

    def __init__(self, subbasis: Subbasis, config: GenerationConfig, bits: np.ndarray, exprs):
        self.subbasis = subbasis
        self.config = config
        self.n_items = subbasis.n_items
        self.bits = np.ascontiguousarray(bits, dtype=_bits.WORD_DTYPE)
        self.bits.setflags(write=False)
        self.cardinalities = _bits.popcount(self.bits)
        self.cardinalities.setflags(write=False)
        if self.cardinalities[EMPTY_ID] != 0:
            raise TopologyError("open set 0 must be the empty set")
        self.open_sets = tuple(
            OpenSet(i, e[0], tuple(e), int(c), self.bits[i], self.n_items)
            for i, (e, c) in enumerate(zip(exprs, self.cardinalities.tolist()))
        )
        self._by_card = np.argsort(self.cardinalities, kind="stable")
        self._sorted_cards = self.cardinalities[self._by_card]

    def __len__(self) -> int:
        return len(self.open_sets)

    def __getitem__(self, os_id: int) -> OpenSet:
        return self.open_sets[self._check(os_id)]

    def __iter__(self):
        return iter(self.open_sets)

    @property
    def item_ids(self) -> tuple:
        return self.subbasis.item_ids

    def _check(self, os_id) -> int:
        if isinstance(os_id, (bool, np.bool_)) or not 0 <= int(os_id) < len(self.open_sets):
            raise TopologyError(f"unknown open set id {os_id!r}")
        return int(os_id)

    def _check_item(self, item_index) -> int:
        if not 0 <= int(item_index) < self.n_items:
            raise TopologyError(f"item index {item_index} out of range [0, {self.n_items})")
        return int(item_index)

    def expr_text(self, os_id: int) -> str:
        return self[os_id].canonical_expr.text(self.subbasis)

    def member_set(self, os_id: int) -> frozenset:
        return self[os_id].member_set()

    def is_subset(self, v: int, u: int) -> bool:
        v, u = self._check(v), self._check(u)
        return bool(_bits.subset_of(self.bits[v], self.bits[u]))

    def subsets_of(self, u: int, max_removed: Optional[int] = None) -> np.ndarray:
        """Ids of every open set ``V ⊆ U`` with ``|U \\ V| <= max_removed``, ascending."""
        u = self._check(u)
        card = int(self.cardinalities[u])
        lo = 0 if max_removed is None else np.searchsorted(self._sorted_cards, card - max_removed, "left")
        hi = np.searchsorted(self._sorted_cards, card, "right")
        cand = self._by_card[lo:hi]
        mask = _bits.subset_of(self.bits[cand], self.bits[u])
        return np.sort(cand[mask])

    def neighborhoods_of(self, item_index: int) -> np.ndarray:
        """Ids of every open set containing the item, in id order."""
        item_index = self._check_item(item_index)
        return np.flatnonzero(_bits.contains(self.bits, item_index))

    @cached_property
    def _by_text(self) -> dict:
        out = {}
        for os in self.open_sets:
            for expr in os.all_exprs:
                out.setdefault(expr.text(self.subbasis), os.os_id)
        return out

    def find(self, text: str) -> int:
        """Look up an open set by expression text, e.g. ``"label:A ∩ attr:red"``.

        ``&``/``|`` are accepted for ``∩``/``∪``, operands may come in any
        order, and ``EMPTY``/``FULL`` name the two trivial sets.
        """
        stripped = text.strip()
        if stripped in ("EMPTY", EMPTY_TEXT):
            return EMPTY_ID
        if stripped in ("FULL", FULL_TEXT):
            return FULL_ID
        if stripped in self._by_text:
            return self._by_text[stripped]
        normalized = stripped.replace(" & ", INTERSECTION_SIGN).replace(" | ", UNION_SIGN)
        for sign, op in ((UNION_SIGN, "union"), (INTERSECTION_SIGN, "intersection")):
            if sign in normalized:
                parts = normalized.split(sign)
                break
        else:
            op, parts = "element", [normalized]
        try:
            terms = tuple(sorted(self.subbasis.index_of(p.strip()) for p in parts))
        except TopologyError:
            raise TopologyError(f"unknown named open set {text!r}") from None
        canonical = SetExpression(op, terms).text(self.subbasis)
        if canonical in self._by_text:
            return self._by_text[canonical]
        raise TopologyError(f"open set {text!r} was not materialized")

    # -------------------------------------------------------------- export

    def to_json(self) -> dict:
        ids = self.item_ids

        def member_ids(row):
            return sorted(ids[i] for i in _bits.indices(row, self.n_items))

        return {
            "format": "dataspace-topology",
            "version": 1,
            "item_ids": list(ids),
            "config": asdict(self.config),
            "subbasis": [
                {
                    "sb_index": e.sb_index,
                    "name": e.name,
                    "kind": e.kind.value,
                    "member_ids": member_ids(e.bits),
                }
                for e in self.subbasis
            ],
            "open_sets": [
                {
                    "os_id": os.os_id,
                    "expr": os.canonical_expr.text(self.subbasis),
                    "provenance": [x.to_json() for x in os.all_exprs],
                    "member_ids": member_ids(os.bits),
                    "cardinality": os.cardinality,
                }
                for os in self.open_sets
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=1) + "\n"

    @classmethod
    def from_json(cls, data: dict) -> "Topology":
        if data.get("format") != "dataspace-topology":
            raise TopologyError("not a topology export")
        item_ids = data["item_ids"]
        n = len(item_ids)
        index = {item_id: i for i, item_id in enumerate(item_ids)}

        def row(ids):
            try:
                return _bits.from_indices((index[i] for i in ids), n)
            except KeyError as exc:
                raise TopologyError(f"export references unknown item {exc.args[0]!r}") from None

        elements = [
            SubbasisElement(e["sb_index"], e["name"], ElementKind(e["kind"]), row(e["member_ids"]), n)
            for e in data["subbasis"]
        ]
        subbasis = Subbasis(elements, item_ids)
        config = GenerationConfig(**data["config"])
        rows, exprs = [], []
        for expected_id, os in enumerate(data["open_sets"]):
            if os["os_id"] != expected_id:
                raise TopologyError("open set ids must be 0..m-1 in order")
            rows.append(row(os["member_ids"]))
            if len(os["member_ids"]) != os["cardinality"]:
                raise TopologyError(f"open set {expected_id}: cardinality does not match members")
            exprs.append(tuple(SetExpression.from_json(x) for x in os["provenance"]))
        return cls(subbasis, config, np.vstack(rows), exprs)

    @classmethod
    def loads(cls, text: str) -> "Topology":
        return cls.from_json(json.loads(text))


def is_subset(t: Topology, v: int, u: int) -> bool:
    return t.is_subset(v, u)


def neighborhoods_of(t: Topology, item_index: int) -> list:
    return t.neighborhoods_of(item_index).tolist()

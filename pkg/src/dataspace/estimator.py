"""scikit-learn style front end.

:class:`OpenSetTopology` fits a topology on an attribute matrix (plus optional
class labels) and transforms samples into open-set membership indicators, so
the slices can be fed to anything that consumes a feature matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .data import AttributeValue, Dataset, Item, LabelSpace, PredictionEntry, PredictionTable, join_validate
from .presheaf import Assignment, compute_assignment
from .topology import GenerationConfig, SubbasisSpec, Topology, build_subbasis, generate_topology


def _attribute_codes(X: np.ndarray) -> np.ndarray:
    missing = np.isnan(X)
    filled = np.where(missing, 0, X)
    if not np.isin(filled, (0, 1)).all():
        raise ValueError("attribute values must be 1 (present), 0 (absent) or NaN (missing)")
    codes = filled.astype(np.int8)
    codes[missing] = AttributeValue.MISSING
    return codes


class OpenSetTopology(TransformerMixin, BaseEstimator):
    """Metadata-induced topology as a transformer.

    ``fit(X, y)`` treats each column of ``X`` as an attribute (1 present, 0
    absent, NaN missing) and ``y`` as class labels. ``transform(X, y)`` returns
    a boolean ``(n_samples, n_open_sets)`` membership matrix; ``y`` is needed
    whenever label sets are part of the subbasis.

    Parameters
    ----------
    max_intersection_arity, max_union_arity, min_cardinality, max_open_sets,
    keep_empty_intersections
        Generation bounds, see :class:`~dataspace.topology.GenerationConfig`.
    include_labels : bool
        Add one subbasis element per class when ``y`` is given to ``fit``.
    waive_coverage : bool
        Append a synthetic all-items element when the subbasis does not cover
        every training sample.
    """

    def __init__(
        self,
        max_intersection_arity=2,
        max_union_arity=1,
        min_cardinality=20,
        max_open_sets=1_000_000,
        keep_empty_intersections=False,
        include_labels=True,
        waive_coverage=False,
    ):
        self.max_intersection_arity = max_intersection_arity
        self.max_union_arity = max_union_arity
        self.min_cardinality = min_cardinality
        self.max_open_sets = max_open_sets
        self.keep_empty_intersections = keep_empty_intersections
        self.include_labels = include_labels
        self.waive_coverage = waive_coverage

    def _config(self) -> GenerationConfig:
        return GenerationConfig(
            max_intersection_arity=self.max_intersection_arity,
            max_union_arity=self.max_union_arity,
            min_cardinality=self.min_cardinality,
            max_open_sets=self.max_open_sets,
            keep_empty_intersections=self.keep_empty_intersections,
        )

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_all_finite="allow-nan")
        codes = _attribute_codes(X)
        names = (
            [str(c) for c in self.feature_names_in_]
            if hasattr(self, "feature_names_in_")
            else [f"x{j}" for j in range(X.shape[1])]
        )
        use_labels = self.include_labels and y is not None
        if y is not None:
            y = np.asarray(y)
            if y.shape != (X.shape[0],):
                raise ValueError(f"y must have shape ({X.shape[0]},), got {y.shape}")
            self.classes_ = np.unique(y)
            labels = [str(v) for v in y]
            space = LabelSpace(tuple(str(c) for c in self.classes_))
        else:
            labels = ["_"] * X.shape[0]
            space = LabelSpace(("_",))
        items = [
            Item(str(i), labels[i], tuple(AttributeValue(int(c)) for c in codes[i]), ())
            for i in range(X.shape[0])
        ]
        self.dataset_ = Dataset(tuple(items), space, tuple(names), ())
        spec = SubbasisSpec(labels=use_labels, waive_coverage=self.waive_coverage)
        self.subbasis_ = build_subbasis(self.dataset_, spec)
        self.topology_ = generate_topology(self.subbasis_, self._config())
        self.n_open_sets_ = len(self.topology_)
        return self

    def _element_membership(self, X, y) -> np.ndarray:
        t: Topology = self.topology_
        out = np.zeros((X.shape[0], len(t.subbasis)), dtype=bool)
        codes = _attribute_codes(X)
        names = list(self.dataset_.attribute_names)
        for e in t.subbasis:
            kind, _, name = e.name.partition(":")
            if e.kind.value == "label":
                if y is None:
                    raise ValueError("y is required to place samples in label sets")
                out[:, e.sb_index] = np.asarray([str(v) for v in y]) == name
            elif e.kind.value == "attribute":
                out[:, e.sb_index] = codes[:, names.index(name)] == AttributeValue.PRESENT
            else:
                out[:, e.sb_index] = True
        return out

    def transform(self, X, y=None):
        check_is_fitted(self, "topology_")
        X = validate_data(self, X, dtype=np.float64, ensure_all_finite="allow-nan", reset=False)
        elem = self._element_membership(X, y)
        out = np.zeros((X.shape[0], self.n_open_sets_), dtype=bool)
        for os in self.topology_:
            expr = os.canonical_expr
            if expr.op == "full":
                out[:, os.os_id] = True
            elif expr.op == "empty":
                continue
            elif expr.op == "union":
                out[:, os.os_id] = elem[:, list(expr.terms)].any(axis=1)
            else:
                out[:, os.os_id] = elem[:, list(expr.terms)].all(axis=1)
        return out

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y, **fit_params).transform(X, y)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "topology_")
        return np.asarray([self.topology_.expr_text(i) for i in range(self.n_open_sets_)], dtype=object)

    def assignment(self, y_pred, statistic="accuracy", loss=None, source_tag="") -> Assignment:
        """Per-open-set statistic of predictions ``y_pred`` on the training samples."""
        check_is_fitted(self, "topology_")
        y_pred = np.asarray(y_pred)
        if y_pred.shape != (self.dataset_.n_items,):
            raise ValueError(f"y_pred must have shape ({self.dataset_.n_items},)")
        losses = [None] * len(y_pred) if loss is None else [float(v) for v in loss]
        entries = {
            str(i): PredictionEntry(str(p), lv) for i, (p, lv) in enumerate(zip(y_pred.tolist(), losses))
        }
        ctx = join_validate(self.dataset_, PredictionTable(entries, source_tag))
        return compute_assignment(self.topology_, statistic, ctx)

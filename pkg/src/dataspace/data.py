"""Dataset and prediction model, plus ingestion from CSV / JSON-lines."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import IO, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import IngestError, JoinError

Source = Union[bytes, str, os.PathLike, IO[bytes]]


class AttributeValue(enum.IntEnum):
    ABSENT = 0
    PRESENT = 1
    MISSING = 2


@dataclass(frozen=True)
class LabelSpace:
    labels: tuple

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise IngestError("label space is empty")
        if len(set(labels)) != len(labels):
            raise IngestError("label space contains duplicate labels")

    def __contains__(self, label) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    @cached_property
    def _index(self) -> dict:
        return {label: i for i, label in enumerate(self.labels)}

    def index(self, label: str) -> int:
        return self._index[label]


@dataclass(frozen=True)
class Item:
    id: str
    true_label: str
    attributes: tuple = ()
    scalars: tuple = ()


@dataclass(frozen=True)
class Dataset:
    items: tuple
    label_space: LabelSpace
    attribute_names: tuple = ()
    scalar_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        object.__setattr__(self, "scalar_names", tuple(self.scalar_names))
        seen = set()
        for item in self.items:
            if not item.id:
                raise IngestError("item identifier is empty")
            if item.id in seen:
                raise IngestError(f"duplicate item id {item.id!r}")
            seen.add(item.id)
            if item.true_label not in self.label_space:
                raise IngestError(
                    f"item {item.id!r} has label {item.true_label!r} outside the label space"
                )
            if len(item.attributes) != len(self.attribute_names):
                raise IngestError(f"item {item.id!r} has the wrong number of attribute values")
            if len(item.scalars) != len(self.scalar_names):
                raise IngestError(f"item {item.id!r} has the wrong number of scalar values")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @cached_property
    def ids(self) -> tuple:
        return tuple(item.id for item in self.items)

    @cached_property
    def _id_index(self) -> dict:
        return {item_id: i for i, item_id in enumerate(self.ids)}

    def index_of(self, item_id: str) -> int:
        try:
            return self._id_index[item_id]
        except KeyError:
            hint = ", ".join(repr(i) for i in self.ids[:5])
            more = ", ..." if len(self.ids) > 5 else ""
            raise KeyError(f"unknown item id {item_id!r}; valid ids include {hint}{more}") from None

    @cached_property
    def label_indices(self) -> np.ndarray:
        out = np.array([self.label_space.index(it.true_label) for it in self.items], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def attribute_codes(self) -> np.ndarray:
        """``(n_items, n_attributes)`` int8 matrix of :class:`AttributeValue` codes."""
        out = np.array(
            [[int(v) for v in it.attributes] for it in self.items], dtype=np.int8
        ).reshape(len(self.items), len(self.attribute_names))
        out.setflags(write=False)
        return out

    @cached_property
    def scalar_matrix(self) -> np.ndarray:
        """``(n_items, n_scalars)`` float matrix; NaN marks an undefined value."""
        out = np.array(
            [[np.nan if v is None else v for v in it.scalars] for it in self.items], dtype=float
        ).reshape(len(self.items), len(self.scalar_names))
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class Schema:
    """Column roles for a tabular dataset file.

    ``labels`` optionally fixes the label space (and its order); otherwise the
    space is the distinct true labels in order of first appearance.
    """

    id: str
    label: str
    attributes: tuple = ()
    scalars: tuple = ()
    missing_sentinel: str = ""
    labels: Optional[tuple] = None
    format: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "scalars", tuple(self.scalars))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        if self.format not in (None, "csv", "jsonl"):
            raise IngestError(f"unsupported dataset format {self.format!r}")
        roles = [self.id, self.label, *self.attributes, *self.scalars]
        if len(set(roles)) != len(roles):
            raise IngestError("schema assigns more than one role to a column")

    @classmethod
    def from_dict(cls, data: Mapping) -> "Schema":
        known = {"id", "label", "attributes", "scalars", "missing_sentinel", "labels", "format"}
        unknown = set(data) - known
        if unknown:
            raise IngestError(f"unknown schema keys: {sorted(unknown)}")
        for key in ("id", "label"):
            if key not in data:
                raise IngestError(f"schema is missing the {key!r} column")
        return cls(
            id=data["id"],
            label=data["label"],
            attributes=tuple(data.get("attributes", ())),
            scalars=tuple(data.get("scalars", ())),
            missing_sentinel=str(data.get("missing_sentinel", "")),
            labels=data.get("labels"),
            format=data.get("format"),
        )

    @classmethod
    def load(cls, source: Source) -> "Schema":
        name, raw = _read_source(source)
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise IngestError(f"schema is not valid JSON ({exc.msg})", name, exc.lineno) from None
        if not isinstance(data, dict):
            raise IngestError("schema must be a JSON object", name)
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "label": self.label,
            "attributes": list(self.attributes),
            "scalars": list(self.scalars),
            "missing_sentinel": self.missing_sentinel,
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.format is not None:
            out["format"] = self.format
        return out


@dataclass(frozen=True)
class PredictionEntry:
    predicted_label: str
    loss: Optional[float] = None

    def __post_init__(self):
        if self.loss is not None and not (math.isfinite(self.loss) and self.loss >= 0):
            raise IngestError(f"loss must be finite and non-negative, got {self.loss!r}")


@dataclass(frozen=True)
class PredictionTable:
    entries: Mapping
    source_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, item_id: str) -> PredictionEntry:
        return self.entries[item_id]


@dataclass(frozen=True)
class EvaluationContext:
    """A dataset joined with the model's predictions, one row per item."""

    dataset: Dataset
    predictions: PredictionTable
    correct: np.ndarray = field(repr=False)
    true_index: np.ndarray = field(repr=False)
    pred_index: np.ndarray = field(repr=False)
    losses: np.ndarray = field(repr=False)

    @property
    def n_items(self) -> int:
        return self.dataset.n_items

    @property
    def has_all_losses(self) -> bool:
        return not np.isnan(self.losses).any()


# --------------------------------------------------------------------------- io


def _read_source(source: Source):
    if isinstance(source, bytes):
        return None, source
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        try:
            with open(path, "rb") as fh:
                return path, fh.read()
        except OSError as exc:
            raise IngestError(f"cannot read file ({exc.strerror})", path) from None
    data = source.read()
    if isinstance(data, str):
        data = data.encode("utf-8")
    return getattr(source, "name", None), data


def _decode(raw: bytes, name) -> str:
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise IngestError(f"not valid UTF-8 ({exc.reason})", name) from None


def _csv_rows(text: str, name):
    """Yield ``(line_number, row_dict)``; the first tuple element is the header."""
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames is None:
        raise IngestError("file is empty", name)
    yield 1, reader.fieldnames
    for row in reader:
        if None in row:
            raise IngestError("row has more cells than the header", name, reader.line_num)
        yield reader.line_num, row


def _jsonl_rows(text: str, name):
    header = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"invalid JSON ({exc.msg})", name, lineno) from None
        if not isinstance(row, dict):
            raise IngestError("each line must be a JSON object", name, lineno)
        if header is None:
            header = list(row)
            yield 0, header
        yield lineno, row
    if header is None:
        raise IngestError("file is empty", name)


def _looks_like_jsonl(text: str) -> bool:
    return text.lstrip().startswith("{")


def _attribute_value(cell, sentinel: str) -> AttributeValue:
    if cell is None:
        return AttributeValue.MISSING
    if isinstance(cell, bool):
        return AttributeValue.PRESENT if cell else AttributeValue.ABSENT
    if isinstance(cell, int):
        cell = str(cell)
    if not isinstance(cell, str):
        raise ValueError(cell)
    if cell == "" or cell == sentinel:
        return AttributeValue.MISSING
    if cell == "1":
        return AttributeValue.PRESENT
    if cell == "0":
        return AttributeValue.ABSENT
    raise ValueError(cell)


def _scalar_value(cell, sentinel: str) -> Optional[float]:
    if cell is None or cell == "" or cell == sentinel:
        return None
    if isinstance(cell, bool):
        raise ValueError(cell)
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(cell)
    return value


def parse_dataset(schema: Schema, source: Source) -> Dataset:
    """Read a CSV or JSON-lines dataset whose columns are assigned roles by ``schema``.

    Row order becomes item index order. Attribute cells ``"1"``/``"0"`` map to
    present/absent; an empty cell or the schema's sentinel maps to missing.
    """
    name, raw = _read_source(source)
    text = _decode(raw, name)
    fmt = schema.format or ("jsonl" if _looks_like_jsonl(text) else "csv")
    rows = _jsonl_rows(text, name) if fmt == "jsonl" else _csv_rows(text, name)

    _, header = next(rows)
    header = set(header)
    for role, column in (("id", schema.id), ("label", schema.label)):
        if fmt == "csv" and column not in header:
            raise IngestError(f"unknown {role} column {column!r}", name, 1)
    for role, columns in (("attribute", schema.attributes), ("scalar", schema.scalars)):
        for column in columns:
            if fmt == "csv" and column not in header:
                raise IngestError(f"unknown {role} column {column!r}", name, 1)

    sentinel = schema.missing_sentinel
    items = []
    seen = set()
    first_seen_labels = []
    for lineno, row in rows:
        item_id = row.get(schema.id)
        if item_id is None or str(item_id) == "":
            raise IngestError("empty item id", name, lineno)
        item_id = str(item_id)
        if item_id in seen:
            raise IngestError(f"duplicate id {item_id!r}", name, lineno)
        seen.add(item_id)

        label = row.get(schema.label)
        if label is None or str(label) == "":
            raise IngestError(f"item {item_id!r} has no label", name, lineno)
        label = str(label)
        if label not in first_seen_labels:
            first_seen_labels.append(label)

        attrs = []
        for column in schema.attributes:
            cell = row.get(column)
            try:
                attrs.append(_attribute_value(cell, sentinel))
            except ValueError:
                raise IngestError(
                    f"malformed attribute cell {cell!r} in column {column!r}", name, lineno
                ) from None
        scalars = []
        for column in schema.scalars:
            cell = row.get(column)
            try:
                scalars.append(_scalar_value(cell, sentinel))
            except (TypeError, ValueError):
                raise IngestError(
                    f"non-numeric scalar cell {cell!r} in column {column!r}", name, lineno
                ) from None
        items.append(Item(item_id, label, tuple(attrs), tuple(scalars)))

    if schema.labels is not None:
        unknown = [lab for lab in first_seen_labels if lab not in schema.labels]
        if unknown:
            raise IngestError(f"labels {unknown} are not in the schema's label list", name)
        label_space = LabelSpace(schema.labels)
    else:
        if not items:
            raise IngestError("dataset has no rows", name)
        label_space = LabelSpace(tuple(first_seen_labels))
    return Dataset(tuple(items), label_space, schema.attributes, schema.scalars)


def serialize_dataset(dataset: Dataset, schema: Schema, fmt: str = "csv") -> bytes:
    """Inverse of :func:`parse_dataset` for the given schema."""
    sentinel = schema.missing_sentinel
    attr_cell = {AttributeValue.PRESENT: "1", AttributeValue.ABSENT: "0", AttributeValue.MISSING: sentinel}

    def scalar_cell(v):
        return sentinel if v is None else repr(float(v))

    columns = [schema.id, schema.label, *schema.attributes, *schema.scalars]
    records = []
    for item in dataset.items:
        record = {schema.id: item.id, schema.label: item.true_label}
        record.update(zip(schema.attributes, (attr_cell[v] for v in item.attributes)))
        record.update(zip(schema.scalars, (scalar_cell(v) for v in item.scalars)))
        records.append(record)

    if fmt == "jsonl":
        lines = [json.dumps(r, ensure_ascii=False) for r in records]
        return ("\n".join(lines) + "\n").encode("utf-8")
    buf = io.StringIO(newline="")
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    return buf.getvalue().encode("utf-8")


def parse_predictions(source: Source, source_tag: Optional[str] = None) -> PredictionTable:
    """Read a predictions CSV with header ``item_id,predicted_label[,loss]``."""
    name, raw = _read_source(source)
    text = _decode(raw, name)
    rows = _csv_rows(text, name)
    _, header = next(rows)
    for column in ("item_id", "predicted_label"):
        if column not in header:
            raise IngestError(f"predictions file lacks the {column!r} column", name, 1)
    has_loss = "loss" in header

    entries = {}
    for lineno, row in rows:
        item_id = row["item_id"]
        if not item_id:
            raise IngestError("empty item_id", name, lineno)
        if item_id in entries:
            raise IngestError(f"duplicate id {item_id!r}", name, lineno)
        predicted = row["predicted_label"]
        if not predicted:
            raise IngestError(f"item {item_id!r} has no predicted label", name, lineno)
        loss = None
        if has_loss and row["loss"] != "":
            try:
                loss = float(row["loss"])
            except ValueError:
                raise IngestError(f"non-numeric loss {row['loss']!r}", name, lineno) from None
            if not math.isfinite(loss) or loss < 0:
                raise IngestError(
                    f"loss must be finite and non-negative, got {row['loss']!r}", name, lineno
                )
        entries[item_id] = PredictionEntry(predicted, loss)
    if source_tag is None:
        source_tag = os.path.basename(name) if name else ""
    return PredictionTable(entries, source_tag)


def join_validate(dataset: Dataset, preds: PredictionTable) -> EvaluationContext:
    """Pair every dataset item with its prediction and flag correctness."""
    missing = [i for i in dataset.ids if i not in preds.entries]
    if missing:
        raise JoinError(f"missing prediction for {len(missing)} item(s), e.g. {missing[0]!r}")
    ids = set(dataset.ids)
    extra = [i for i in preds.entries if i not in ids]
    if extra:
        raise JoinError(f"prediction for unknown item {extra[0]!r}")

    space = dataset.label_space
    pred_index = np.empty(dataset.n_items, dtype=np.int64)
    losses = np.full(dataset.n_items, np.nan)
    for i, item_id in enumerate(dataset.ids):
        entry = preds.entries[item_id]
        if entry.predicted_label not in space:
            raise JoinError(
                f"item {item_id!r}: predicted label {entry.predicted_label!r} is outside the label space"
            )
        pred_index[i] = space.index(entry.predicted_label)
        if entry.loss is not None:
            losses[i] = entry.loss
    true_index = np.array(dataset.label_indices)
    correct = pred_index == true_index
    for arr in (correct, true_index, pred_index, losses):
        arr.setflags(write=False)
    return EvaluationContext(dataset, preds, correct, true_index, pred_index, losses)

import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dataspace.data import (
    AttributeValue,
    Dataset,
    Item,
    LabelSpace,
    PredictionEntry,
    PredictionTable,
    Schema,
    join_validate,
    parse_dataset,
    parse_predictions,
    serialize_dataset,
)
from dataspace.errors import IngestError, JoinError

SCHEMA = Schema(id="id", label="species", attributes=("red", "big"), scalars=("wingspan",))
P, A, M = AttributeValue.PRESENT, AttributeValue.ABSENT, AttributeValue.MISSING


def test_toy6_parses(toy6):
    assert len(toy6) == 6
    assert toy6.label_space.labels == ("A", "B")
    assert toy6.attribute_names == ("red", "big")
    assert [it.attributes for it in toy6.items] == [(P, A), (P, P), (M, P), (P, A), (P, P), (A, P)]
    assert toy6.items[3].scalars == (None,)
    assert toy6.items[2].scalars == (31.25,)


def test_toy6_round_trip(toy6, toy6_paths):
    schema = Schema.load(toy6_paths["schema"])
    again = parse_dataset(schema, serialize_dataset(toy6, schema))
    assert again == toy6


def test_empty_attribute_cell_is_missing(toy6):
    # row 3 of the fixture leaves the "red" cell blank
    assert toy6.items[2].attributes[0] is AttributeValue.MISSING


def test_duplicate_id_rejected():
    src = b"id,species,red,big,wingspan\na,A,1,0,1\na,B,0,1,2\n"
    with pytest.raises(IngestError, match="duplicate id 'a'") as err:
        parse_dataset(SCHEMA, src)
    assert err.value.line == 3


def test_unknown_label_column():
    src = b"id,kind,red,big,wingspan\na,A,1,0,1\n"
    with pytest.raises(IngestError, match="unknown label column"):
        parse_dataset(SCHEMA, src)


@pytest.mark.parametrize("cell", ["2", "yes", "1.0", "-1"])
def test_malformed_attribute_cell(cell):
    src = f"id,species,red,big,wingspan\na,A,{cell},0,1\n".encode()
    with pytest.raises(IngestError, match="malformed attribute cell"):
        parse_dataset(SCHEMA, src)


@pytest.mark.parametrize("cell", ["abc", "nan", "inf"])
def test_non_numeric_scalar(cell):
    src = f"id,species,red,big,wingspan\na,A,1,0,{cell}\n".encode()
    with pytest.raises(IngestError, match="non-numeric scalar"):
        parse_dataset(SCHEMA, src)


def test_custom_sentinel():
    schema = Schema(id="id", label="y", attributes=("a",), scalars=("s",), missing_sentinel="NA")
    ds = parse_dataset(schema, b"id,y,a,s\n1,A,NA,NA\n2,A,,3\n")
    assert ds.items[0].attributes == (M,) and ds.items[0].scalars == (None,)
    assert ds.items[1].attributes == (M,) and ds.items[1].scalars == (3.0,)


def test_jsonl_dataset():
    src = (
        b'{"id": "a", "species": "A", "red": 1, "big": "0", "wingspan": 3.5}\n'
        b'{"id": "b", "species": "B", "red": null, "big": true, "wingspan": null}\n'
    )
    ds = parse_dataset(SCHEMA, src)
    assert [it.attributes for it in ds.items] == [(P, A), (M, P)]
    assert [it.scalars for it in ds.items] == [(3.5,), (None,)]


def test_schema_label_list_fixes_space():
    schema = Schema(id="id", label="y", labels=("A", "B", "C"))
    ds = parse_dataset(schema, b"id,y\n1,B\n2,A\n")
    assert ds.label_space.labels == ("A", "B", "C")
    with pytest.raises(IngestError, match="not in the schema's label list"):
        parse_dataset(schema, b"id,y\n1,D\n")


def test_schema_rejects_unknown_keys():
    with pytest.raises(IngestError, match="unknown schema keys"):
        Schema.from_dict({"id": "id", "label": "y", "colour": []})


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(IngestError, match="nope.json"):
        Schema.load(missing)


# ----------------------------------------------------------------- predictions


def test_toy6_predictions(toy6_paths):
    table = parse_predictions(toy6_paths["predictions"])
    assert len(table) == 6
    assert table["3"] == PredictionEntry("B", 1.5)
    assert table.source_tag == "toy6-preds.csv"


def test_negative_loss_rejected():
    with pytest.raises(IngestError, match="non-negative"):
        parse_predictions(b"item_id,predicted_label,loss\n1,A,-0.2\n")


def test_non_finite_loss_rejected():
    with pytest.raises(IngestError, match="finite"):
        parse_predictions(b"item_id,predicted_label,loss\n1,A,inf\n")


def test_loss_column_absent():
    table = parse_predictions(b"item_id,predicted_label\n1,A\n")
    assert table["1"].loss is None


def test_duplicate_prediction_rejected():
    with pytest.raises(IngestError, match="duplicate id"):
        parse_predictions(b"item_id,predicted_label\n1,A\n1,B\n")


# ----------------------------------------------------------------------- join


def test_join_correctness_flags(toy6_ctx):
    assert toy6_ctx.correct.tolist() == [True, True, False, True, False, True]


def test_join_missing_item(toy6):
    preds = parse_predictions(b"item_id,predicted_label\n1,A\n2,A\n3,A\n4,B\n5,B\n")
    with pytest.raises(JoinError, match="missing prediction"):
        join_validate(toy6, preds)


def test_join_unknown_label(toy6):
    rows = "".join(f"{i},{'C' if i == 1 else 'A'}\n" for i in range(1, 7))
    with pytest.raises(JoinError, match="outside the label space"):
        join_validate(toy6, parse_predictions(("item_id,predicted_label\n" + rows).encode()))


def test_join_unknown_item(toy6):
    rows = "".join(f"{i},A\n" for i in range(1, 8))
    with pytest.raises(JoinError, match="unknown item '7'"):
        join_validate(toy6, parse_predictions(("item_id,predicted_label\n" + rows).encode()))


def test_context_is_read_only(toy6_ctx):
    with pytest.raises(ValueError):
        toy6_ctx.correct[0] = False


# ------------------------------------------------------------------ properties

ids = st.lists(st.text("abcxyz0123", min_size=1, max_size=4), min_size=1, max_size=8, unique=True)


@st.composite
def datasets(draw):
    item_ids = draw(ids)
    labels = draw(st.lists(st.sampled_from(["A", "B", "C d", "e,f"]), min_size=len(item_ids), max_size=len(item_ids)))
    n_attr = draw(st.integers(0, 3))
    n_scalar = draw(st.integers(0, 2))
    scalar = st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False))
    items = tuple(
        Item(
            i,
            lab,
            tuple(draw(st.lists(st.sampled_from(list(AttributeValue)), min_size=n_attr, max_size=n_attr))),
            tuple(draw(st.lists(scalar, min_size=n_scalar, max_size=n_scalar))),
        )
        for i, lab in zip(item_ids, labels)
    )
    space = LabelSpace(tuple(dict.fromkeys(labels)))
    ds = Dataset(items, space, tuple(f"a{j}" for j in range(n_attr)), tuple(f"s{j}" for j in range(n_scalar)))
    schema = Schema(id="id", label="label", attributes=ds.attribute_names, scalars=ds.scalar_names)
    return ds, schema


@given(datasets(), st.sampled_from(["csv", "jsonl"]))
@settings(max_examples=150, deadline=None)
def test_round_trip_property(case, fmt):
    ds, schema = case
    raw = serialize_dataset(ds, schema, fmt)
    again = parse_dataset(schema, io.BytesIO(raw))
    assert again == ds
    for a, b in zip(again.items, ds.items):
        for x, y in zip(a.scalars, b.scalars):
            assert x == y or (x is None and y is None)
            if x is not None:
                assert math.copysign(1, x) == math.copysign(1, y)


@given(datasets(), st.data())
@settings(max_examples=100, deadline=None)
def test_join_succeeds_iff_keys_and_labels_match(case, data):
    ds, _ = case
    labels = list(ds.label_space) + ["ZZ"]
    keys = data.draw(st.sets(st.sampled_from(list(ds.ids) + ["extra"])))
    entries = {k: PredictionEntry(data.draw(st.sampled_from(labels))) for k in keys}
    table = PredictionTable(entries)
    ok = keys == set(ds.ids) and all(e.predicted_label in ds.label_space for e in entries.values())
    if ok:
        ctx = join_validate(ds, table)
        expected = [entries[it.id].predicted_label == it.true_label for it in ds.items]
        assert ctx.correct.tolist() == expected
    else:
        with pytest.raises(JoinError):
            join_validate(ds, table)

import csv
import io
import json
import random
import re

import numpy as np
import pytest

from dataspace.analysis import RankedSlice
from dataspace.presheaf import Assignment, PresheafSpec, StatKind
from dataspace.report import build_report, format_value, render_csv, render_json, render_markdown, render_table

X, U_A, U_B, RED, BIG, A_RED = range(1, 7)


@pytest.fixture
def toy6_report(toy6_topology, toy6_assignment):
    return build_report(toy6_assignment, toy6_topology, top=1, bottom=1, k=2, sets=[RED, X], items=["5"], neighborhood_n=2)


def test_report_contents(toy6_report):
    r = toy6_report
    assert r.global_value == pytest.approx(2 / 3)
    assert [(s.os_id, s.value) for s in r.top] == [(A_RED, 1.0)]
    assert r.bottom[0].value == 0.5
    assert (r.count_one, r.count_zero) == (1, 0)
    assert [(e, w, res.value) for e, w, res in r.inconsistency] == [
        ("attr:red", "label:A ∩ attr:red", 0.25),
        ("X", "attr:big", 1 / 6),
    ]
    (sec,) = r.neighborhoods
    assert (sec.argmax_expr, sec.argmin_expr) == ("attr:red", "attr:big")


def test_unknown_item_lists_valid_ids(toy6_topology, toy6_assignment):
    with pytest.raises(KeyError, match="valid ids include '1', '2'"):
        build_report(toy6_assignment, toy6_topology, items=["zz"])


def test_json_rendering(toy6_report):
    doc = json.loads(render_json(toy6_report))
    assert doc["global_value"] == 0.666667
    assert doc["top"][0] == {"rank": 1, "os_id": A_RED, "expr": "label:A ∩ attr:red", "cardinality": 2, "value": 1.0}
    assert doc["inconsistency"]["sets"][1]["value"] == 0.166667
    assert doc["neighborhoods"][0]["a_max"] == 0.75


def test_csv_rendering(toy6_report):
    rows = list(csv.DictReader(io.StringIO(render_csv(toy6_report))))
    assert rows[0]["section"] == "global" and rows[0]["value"] == "0.666667"
    top = [r for r in rows if r["section"] == "top"]
    assert top[0]["value"] == "1.000000"
    incon = [r for r in rows if r["section"] == "inconsistency_k2"]
    assert [(r["expr"], r["value"], r["witness_os_id"]) for r in incon] == [
        ("attr:red", "0.250000", str(A_RED)),
        ("X", "0.166667", str(BIG)),
    ]


def test_markdown_rendering(toy6_report):
    md = render_markdown(toy6_report)
    assert "| label:A ∩ attr:red | 100.00 |" in md
    assert "| attr:big | 50.00 |" in md
    assert "- sets at 1.000: 1 of 10 nonempty" in md
    assert "- a_max: 75.00 (attr:red)" in md


def test_table_one_shape():
    # 9/23, 13/30, 29/63 as two-decimal percents
    rows = [("a ∩ b", 9 / 23), ("c", 13 / 30), ("d ∩ e", 29 / 63)]
    slices = [RankedSlice(i, e, 10, v, i + 1) for i, (e, v) in enumerate(rows)]
    md = render_table(slices, StatKind.ACCURACY)
    assert md.splitlines() == [
        "| Open set | Accuracy |",
        "|---|---:|",
        "| a ∩ b | 39.13 |",
        "| c | 43.33 |",
        "| d ∩ e | 46.03 |",
    ]


def test_table_escapes_pipes():
    md = render_table([RankedSlice(2, "attr:a|b", 3, 0.5, 1)], StatKind.ACCURACY)
    assert "| attr:a\\|b | 50.00 |" in md


def test_format_value():
    assert format_value(0.571, StatKind.ACCURACY) == "57.10"
    assert format_value(1.0, StatKind.F1_MACRO) == "100.00"
    assert format_value(0.25, StatKind.MEAN_LOSS) == "0.2500"


def test_markdown_any_assignment_shape(toy6_topology):
    rng = np.random.default_rng(4)
    for _ in range(20):
        values = rng.random(len(toy6_topology))
        values[0] = 0
        a = Assignment(PresheafSpec(StatKind.ACCURACY), values)
        md = render_markdown(build_report(a, toy6_topology, top=3, bottom=3, sets=[]))
        table_rows = [ln for ln in md.splitlines() if ln.startswith("| ") and not ln.startswith("| Open set")]
        assert len(table_rows) == 6
        for ln in table_rows:
            assert re.fullmatch(r"\| .+ \| \d{1,3}\.\d{2} \|", ln)

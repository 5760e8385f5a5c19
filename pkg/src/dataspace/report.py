"""Assemble analysis results into a report and render it as JSON, CSV or Markdown.

Machine formats carry raw values with 6 decimals; Markdown tables print rate
statistics as percentages with 2 decimals.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import analysis
from .analysis import InconsistencyResult, NeighborhoodExtrema, RankedSlice
from .presheaf import Assignment, StatKind
from .topology import EMPTY_ID, Topology


@dataclass(frozen=True)
class NeighborhoodSection:
    item_id: str
    extrema: NeighborhoodExtrema
    argmax_expr: str
    argmin_expr: str
    bottom: tuple
    top: tuple


@dataclass(frozen=True)
class AnalysisReport:
    statistic: StatKind
    source_tag: str
    n_open_sets: int
    n_nonempty: int
    global_value: float
    top: tuple = ()
    bottom: tuple = ()
    count_one: int = 0
    count_zero: int = 0
    k: int = analysis.DEFAULT_K
    inconsistency: tuple = ()  # (expr, witness_expr, InconsistencyResult)
    neighborhoods: tuple = field(default=())


def build_report(
    assign: Assignment,
    t: Topology,
    top: int = 10,
    bottom: int = 10,
    k: int = analysis.DEFAULT_K,
    sets: Optional[Sequence[int]] = None,
    items: Sequence[str] = (),
    neighborhood_n: int = 3,
) -> AnalysisReport:
    """Run every analysis the report needs.

    ``sets=None`` computes the inconsistency of every nonempty open set.
    ``items`` are item ids whose neighborhoods get their own section.
    """
    if sets is None:
        sets = [os.os_id for os in t if os.os_id != EMPTY_ID]
    incon = []
    for u in sets:
        res = analysis.local_inconsistency(assign, t, u, k)
        incon.append((t.expr_text(u), t.expr_text(res.witness_v), res))

    id_index = {item_id: i for i, item_id in enumerate(t.item_ids)}
    sections = []
    for item_id in items:
        if item_id not in id_index:
            hint = ", ".join(repr(i) for i in t.item_ids[:5])
            more = ", ..." if len(t.item_ids) > 5 else ""
            raise KeyError(f"unknown item id {item_id!r}; valid ids include {hint}{more}")
        i = id_index[item_id]
        ext = analysis.neighborhood_extrema(assign, t, i)
        rep = analysis.neighborhood_report(assign, t, i, neighborhood_n)
        sections.append(
            NeighborhoodSection(item_id, ext, t.expr_text(ext.argmax), t.expr_text(ext.argmin), rep.bottom, rep.top)
        )

    return AnalysisReport(
        statistic=assign.statistic,
        source_tag=assign.source_tag,
        n_open_sets=len(t),
        n_nonempty=int((t.cardinalities > 0).sum()),
        global_value=analysis.global_value(assign),
        top=tuple(analysis.rank_open_sets(assign, t, "top", top)) if top else (),
        bottom=tuple(analysis.rank_open_sets(assign, t, "bottom", bottom)) if bottom else (),
        count_one=analysis.count_at(assign, t, 1.0),
        count_zero=analysis.count_at(assign, t, 0.0),
        k=k,
        inconsistency=tuple(incon),
        neighborhoods=tuple(sections),
    )


# ------------------------------------------------------------------ json


def _r6(x: float) -> float:
    return round(float(x), 6)


def _slice_json(s: RankedSlice) -> dict:
    return {"rank": s.rank, "os_id": s.os_id, "expr": s.expr, "cardinality": s.cardinality, "value": _r6(s.value)}


def report_to_json(report: AnalysisReport) -> dict:
    return {
        "statistic": report.statistic.value,
        "source_tag": report.source_tag,
        "open_sets": report.n_open_sets,
        "global_value": _r6(report.global_value),
        "count_at_1": report.count_one,
        "count_at_0": report.count_zero,
        "top": [_slice_json(s) for s in report.top],
        "bottom": [_slice_json(s) for s in report.bottom],
        "inconsistency": {
            "k": report.k,
            "sets": [
                {
                    "os_id": r.u,
                    "expr": expr,
                    "value": _r6(r.value),
                    "witness_os_id": r.witness_v,
                    "witness_expr": witness,
                    "candidates_examined": r.candidates_examined,
                }
                for expr, witness, r in report.inconsistency
            ],
        },
        "neighborhoods": [neighborhood_to_json(sec) for sec in report.neighborhoods],
    }


def neighborhood_to_json(sec: NeighborhoodSection) -> dict:
    ext = sec.extrema
    return {
        "item_id": sec.item_id,
        "item_index": ext.item_index,
        "a_max": _r6(ext.a_max),
        "argmax": ext.argmax,
        "argmax_expr": sec.argmax_expr,
        "a_min": _r6(ext.a_min),
        "argmin": ext.argmin,
        "argmin_expr": sec.argmin_expr,
        "neighborhood_count": ext.neighborhood_count,
        "bottom": [_slice_json(s) for s in sec.bottom],
        "top": [_slice_json(s) for s in sec.top],
    }


def render_json(report: AnalysisReport) -> str:
    return json.dumps(report_to_json(report), ensure_ascii=False, indent=2) + "\n"


# ------------------------------------------------------------------- csv

CSV_HEADER = ["section", "item_id", "rank", "os_id", "expr", "cardinality", "value", "witness_os_id"]


def render_csv(report: AnalysisReport) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)

    def f6(x):
        return f"{x:.6f}"

    w.writerow(["global", "", "", 1, "X", "", f6(report.global_value), ""])
    w.writerow(["count_at_1", "", "", "", "", "", report.count_one, ""])
    w.writerow(["count_at_0", "", "", "", "", "", report.count_zero, ""])
    for name, slices in (("top", report.top), ("bottom", report.bottom)):
        for s in slices:
            w.writerow([name, "", s.rank, s.os_id, s.expr, s.cardinality, f6(s.value), ""])
    for expr, _, r in report.inconsistency:
        w.writerow([f"inconsistency_k{r.k}", "", "", r.u, expr, "", f6(r.value), r.witness_v])
    for sec in report.neighborhoods:
        ext = sec.extrema
        w.writerow(["a_max", sec.item_id, "", ext.argmax, sec.argmax_expr, "", f6(ext.a_max), ""])
        w.writerow(["a_min", sec.item_id, "", ext.argmin, sec.argmin_expr, "", f6(ext.a_min), ""])
        for name, slices in (("neighborhood_bottom", sec.bottom), ("neighborhood_top", sec.top)):
            for s in slices:
                w.writerow([name, sec.item_id, s.rank, s.os_id, s.expr, s.cardinality, f6(s.value), ""])
    return buf.getvalue()


# -------------------------------------------------------------- markdown


def format_value(value: float, statistic: StatKind) -> str:
    if statistic.is_rate:
        return f"{100 * value:.2f}"
    return f"{value:.4f}"


def _cell(text: str) -> str:
    return text.replace("|", "\\|")


def render_table(slices: Sequence[RankedSlice], statistic: StatKind) -> str:
    """Two-column ``Open set | <statistic>`` table, one row per slice."""
    lines = [f"| Open set | {statistic.title} |", "|---|---:|"]
    lines += [f"| {_cell(s.expr)} | {format_value(s.value, statistic)} |" for s in slices]
    return "\n".join(lines) + "\n"


def render_neighborhood_markdown(sec: NeighborhoodSection, statistic: StatKind) -> str:
    ext = sec.extrema
    fmt = lambda v: format_value(v, statistic)  # noqa: E731
    out = [
        f"## Neighborhoods of item {sec.item_id}",
        "",
        f"- a_max: {fmt(ext.a_max)} ({sec.argmax_expr})",
        f"- a_min: {fmt(ext.a_min)} ({sec.argmin_expr})",
        f"- neighborhoods scanned: {ext.neighborhood_count}",
        "",
        f"Lowest {len(sec.bottom)}:",
        "",
        render_table(sec.bottom, statistic),
        f"Highest {len(sec.top)}:",
        "",
        render_table(sec.top, statistic),
    ]
    return "\n".join(out)


def render_markdown(report: AnalysisReport) -> str:
    stat = report.statistic
    lines = [
        f"# Open-set report: {stat.value}",
        "",
        f"- model run: {report.source_tag}",
        f"- open sets: {report.n_open_sets}",
        f"- {stat.value} on X: {format_value(report.global_value, stat)}",
        f"- sets at 1.000: {report.count_one} of {report.n_nonempty} nonempty",
        f"- sets at 0.000: {report.count_zero}",
        "",
    ]
    if report.top:
        lines += [f"## Highest {stat.value} (top {len(report.top)})", "", render_table(report.top, stat)]
    if report.bottom:
        lines += [f"## Lowest {stat.value} (bottom {len(report.bottom)})", "", render_table(report.bottom, stat)]
    if report.inconsistency:
        lines += [
            f"## Local inconsistency (k = {report.k})",
            "",
            "| Open set | Inconsistency | Witness |",
            "|---|---:|---|",
        ]
        lines += [f"| {_cell(e)} | {r.value:.3f} | {_cell(w)} |" for e, w, r in report.inconsistency]
        lines.append("")
    for sec in report.neighborhoods:
        lines.append(render_neighborhood_markdown(sec, stat))
    return "\n".join(lines).rstrip("\n") + "\n"


RENDERERS = {"json": render_json, "csv": render_csv, "md": render_markdown}


def render_neighborhoods(sections: Sequence[NeighborhoodSection], statistic: StatKind, fmt: str) -> str:
    """Render only neighborhood sections, as the ``inspect`` command prints them."""
    if fmt == "json":
        data = {"statistic": statistic.value, "items": [neighborhood_to_json(s) for s in sections]}
        return json.dumps(data, ensure_ascii=False, indent=2) + "\n"
    if fmt == "csv":
        report = AnalysisReport(statistic, "", 0, 0, 0.0, neighborhoods=tuple(sections))
        lines = render_csv(report).splitlines(keepends=True)
        # drop the global and count rows, which are meaningless here
        return "".join([lines[0], *lines[4:]])
    return "\n".join(render_neighborhood_markdown(s, statistic) for s in sections).rstrip("\n") + "\n"

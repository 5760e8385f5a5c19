"""``dataspace`` command line: build, report, inspect."""

from __future__ import annotations

import hashlib
import json
import re
import time
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

import click

from . import __version__
from .analysis import DEFAULT_K
from .data import Schema, join_validate, parse_dataset, parse_predictions
from .errors import DataspaceError
from .presheaf import StatKind, compute_assignment
from .report import RENDERERS, build_report, render_neighborhoods
from .topology import GenerationConfig, SubbasisSpec, Topology, build_subbasis, generate_topology

_THRESHOLD = re.compile(r"^(?P<name>.+?)(?P<dir>>=|<=)(?P<value>[^<>=]+)$")


class _Run:
    """Collects input digests, config echo and per-stage timings for the manifest."""

    def __init__(self, command: str):
        self.command = command
        self.inputs = {}
        self.config = {}
        self.timings = {}
        self.open_sets = None

    def digest(self, role: str, path):
        if path is None:
            return
        data = Path(path).read_bytes()
        self.inputs[role] = {"path": str(path), "sha256": hashlib.sha256(data).hexdigest()}

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        yield
        self.timings[name] = round(time.perf_counter() - start, 6)

    def manifest(self) -> dict:
        return {
            "tool": "dataspace",
            "version": __version__,
            "command": self.command,
            "inputs": self.inputs,
            "config": self.config,
            "open_sets": self.open_sets,
            "timings": self.timings,
        }


def _parse_threshold(text: str):
    m = _THRESHOLD.match(text.strip())
    if not m:
        raise click.BadParameter(f"expected NAME>=VALUE or NAME<=VALUE, got {text!r}", param_hint="--threshold")
    try:
        value = float(m["value"])
    except ValueError:
        raise click.BadParameter(f"threshold value {m['value']!r} is not a number", param_hint="--threshold")
    return m["name"].strip(), m["dir"], value


def _input_options(f):
    options = [
        click.option("--dataset", type=click.Path(exists=True, dir_okay=False), help="Dataset CSV or JSON-lines file."),
        click.option("--schema", type=click.Path(exists=True, dir_okay=False), help="JSON schema sidecar."),
        click.option("--max-intersection-arity", type=int, default=2, show_default=True),
        click.option("--max-union-arity", type=int, default=1, show_default=True),
        click.option("--min-cardinality", type=int, default=20, show_default=True),
        click.option("--max-open-sets", type=int, default=1_000_000, show_default=True),
        click.option("--keep-empty-intersections", is_flag=True),
        click.option("--no-labels", is_flag=True, help="Leave label sets out of the subbasis."),
        click.option("--threshold", "thresholds", multiple=True, help="Scalar threshold set, e.g. 'wingspan>=30'."),
        click.option("--waive-coverage", is_flag=True, help="Append an 'all' element if the subbasis does not cover."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _output_options(f):
    f = click.option("--manifest", type=click.Path(dir_okay=False), help="Manifest path [default: OUT.manifest.json].")(f)
    f = click.option("--out", type=click.Path(dir_okay=False), help="Output file [default: stdout].")(f)
    return f


def _build_topology(run: _Run, opts: dict):
    if not opts["dataset"] or not opts["schema"]:
        raise click.UsageError("--dataset and --schema are required")
    run.digest("dataset", opts["dataset"])
    run.digest("schema", opts["schema"])
    config = GenerationConfig(
        max_intersection_arity=opts["max_intersection_arity"],
        max_union_arity=opts["max_union_arity"],
        min_cardinality=opts["min_cardinality"],
        max_open_sets=opts["max_open_sets"],
        keep_empty_intersections=opts["keep_empty_intersections"],
    )
    spec = SubbasisSpec(
        labels=not opts["no_labels"],
        thresholds=tuple(_parse_threshold(t) for t in opts["thresholds"]),
        waive_coverage=opts["waive_coverage"],
    )
    run.config["generation"] = asdict(config)
    run.config["subbasis"] = {
        "labels": spec.labels,
        "thresholds": [list(t) for t in spec.thresholds],
        "waive_coverage": spec.waive_coverage,
    }
    with run.stage("ingest"):
        schema = Schema.load(opts["schema"])
        dataset = parse_dataset(schema, opts["dataset"])
    with run.stage("build"):
        subbasis = build_subbasis(dataset, spec)
        topology = generate_topology(subbasis, config)
    run.open_sets = len(topology)
    return dataset, topology


def _load_context(run: _Run, opts: dict, topology_path):
    if not opts.get("predictions"):
        raise click.UsageError("--predictions is required")
    if topology_path:
        if not opts["dataset"] or not opts["schema"]:
            raise click.UsageError("--dataset and --schema are required")
        run.digest("dataset", opts["dataset"])
        run.digest("schema", opts["schema"])
        run.digest("topology", topology_path)
        with run.stage("ingest"):
            dataset = parse_dataset(Schema.load(opts["schema"]), opts["dataset"])
            topology = Topology.loads(Path(topology_path).read_text(encoding="utf-8"))
        run.config["generation"] = asdict(topology.config)
        run.open_sets = len(topology)
    else:
        dataset, topology = _build_topology(run, opts)
    run.digest("predictions", opts["predictions"])
    with run.stage("ingest_predictions"):
        preds = parse_predictions(opts["predictions"])
        ctx = join_validate(dataset, preds)
    return dataset, topology, ctx


def _emit(run: _Run, text: str, out, manifest):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    payload = json.dumps(run.manifest(), indent=2, sort_keys=True) + "\n"
    if manifest or out:
        Path(manifest or f"{out}.manifest.json").write_text(payload, encoding="utf-8")
    else:
        click.echo(payload, err=True, nl=False)


class _Group(click.Group):
    """Turns library errors into one-line messages with exit status 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except KeyError as exc:
            raise click.ClickException(str(exc.args[0]) if exc.args else "unknown key") from exc
        except (DataspaceError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="dataspace")
def main():
    """Evaluate a model on the open sets of a metadata-induced topology."""


@main.command("build")
@_input_options
@_output_options
def cmd_build(out, manifest, **opts):
    """Build the topology and write its JSON export."""
    run = _Run("build")
    _, topology = _build_topology(run, opts)
    run.config["output"] = {"format": "json"}
    with run.stage("render"):
        text = topology.dumps()
    _emit(run, text, out, manifest)
    click.echo(f"{len(topology)} open sets", err=not out)


@main.command("report")
@_input_options
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), help="Predictions CSV.")
@click.option("--topology", "topology_path", type=click.Path(exists=True, dir_okay=False),
              help="Reuse a topology export instead of building one.")
@click.option("--statistic", type=click.Choice([s.value for s in StatKind]), default="accuracy", show_default=True)
@click.option("--k", "k", type=click.IntRange(min=0), default=DEFAULT_K, show_default=True)
@click.option("--top", type=click.IntRange(min=0), default=10, show_default=True)
@click.option("--bottom", type=click.IntRange(min=0), default=10, show_default=True)
@click.option("--item", "items", multiple=True, help="Item id to report neighborhoods for (repeatable).")
@click.option("--set", "sets", multiple=True, help="Open set expression to compute inconsistency for (repeatable).")
@click.option("--n", "neighborhood_n", type=click.IntRange(min=1), default=3, show_default=True,
              help="Rows per neighborhood table.")
@click.option("--format", "fmt", type=click.Choice(sorted(RENDERERS)), default="md", show_default=True)
@_output_options
def cmd_report(out, manifest, topology_path, statistic, k, top, bottom, items, sets, neighborhood_n, fmt, **opts):
    """Rank open sets, count extremes, compute inconsistency and neighborhood tables."""
    run = _Run("report")
    _, topology, ctx = _load_context(run, opts, topology_path)
    run.config["analysis"] = {
        "statistic": statistic, "k": k, "top": top, "bottom": bottom,
        "items": list(items), "sets": list(sets), "n": neighborhood_n, "format": fmt,
    }
    with run.stage("assign"):
        assign = compute_assignment(topology, statistic, ctx)
    with run.stage("analyze"):
        set_ids = [topology.find(s) for s in sets] if sets else None
        rep = build_report(assign, topology, top, bottom, k, set_ids, items, neighborhood_n)
    with run.stage("render"):
        text = RENDERERS[fmt](rep)
    _emit(run, text, out, manifest)


@main.command("inspect")
@_input_options
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), help="Predictions CSV.")
@click.option("--topology", "topology_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--statistic", type=click.Choice([s.value for s in StatKind]), default="accuracy", show_default=True)
@click.option("--item", "items", multiple=True, required=True, help="Item id (repeatable).")
@click.option("--n", "neighborhood_n", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--format", "fmt", type=click.Choice(sorted(RENDERERS)), default="md", show_default=True)
@_output_options
def cmd_inspect(out, manifest, topology_path, statistic, items, neighborhood_n, fmt, **opts):
    """Best and worst neighborhoods of individual items."""
    run = _Run("inspect")
    _, topology, ctx = _load_context(run, opts, topology_path)
    run.config["analysis"] = {"statistic": statistic, "items": list(items), "n": neighborhood_n, "format": fmt}
    with run.stage("assign"):
        assign = compute_assignment(topology, statistic, ctx)
    with run.stage("analyze"):
        rep = build_report(assign, topology, 0, 0, DEFAULT_K, [], items, neighborhood_n)
    with run.stage("render"):
        text = render_neighborhoods(rep.neighborhoods, assign.statistic, fmt)
    _emit(run, text, out, manifest)


if __name__ == "__main__":
    main()

from pathlib import Path

import pytest

from dataspace.data import Schema, join_validate, parse_dataset, parse_predictions
from dataspace.presheaf import compute_assignment
from dataspace.topology import GenerationConfig, build_subbasis, generate_topology

DATA = Path(__file__).parent / "data"

# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy6_paths():
    return {
        "dataset": DATA / "toy6.csv",
        "schema": DATA / "toy6.schema.json",
        "predictions": DATA / "toy6-preds.csv",
    }


@pytest.fixture(scope="session")
def toy6(toy6_paths):
    return parse_dataset(Schema.load(toy6_paths["schema"]), toy6_paths["dataset"])


@pytest.fixture(scope="session")
def toy6_ctx(toy6, toy6_paths):
    return join_validate(toy6, parse_predictions(toy6_paths["predictions"]))


@pytest.fixture(scope="session")
def toy6_topology(toy6):
    return generate_topology(build_subbasis(toy6), GenerationConfig(min_cardinality=1))


@pytest.fixture(scope="session")
def toy6_assignment(toy6_topology, toy6_ctx):
    return compute_assignment(toy6_topology, "accuracy", toy6_ctx)

import os
from pathlib import Path

import numpy as np
import pytest

from pfgc.graph import AttributedGraph
from pfgc.synthetic import attributed_sbm

REPO = Path(__file__).resolve().parents[1]
ACCEPTANCE_LINES = []


def data_dir() -> Path:
    return Path(os.environ.get("PFGC_DATA_DIR", REPO / "data"))


def random_graph(n, p, rng, d=6):
    A = np.triu(rng.random((n, n)) < p, 1).astype(float)
    A = A + A.T
    X = rng.standard_normal((n, d))
    return AttributedGraph(X, A)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_graph():
    return attributed_sbm(n_nodes=60, n_clusters=3, p_in=0.15, p_out=0.03, n_features=30, seed=7)


@pytest.fixture(scope="session")
def hetero_graph():
    return attributed_sbm(n_nodes=150, n_clusters=3, p_in=0.02, p_out=0.06, n_features=100, seed=1)


@pytest.fixture(scope="session")
def probe_graph():
    return attributed_sbm(n_nodes=20, n_clusters=2, p_in=0.3, p_out=0.1, n_features=8, seed=3)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

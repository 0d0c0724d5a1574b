import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from lrkernel.dataset import SbmConfig, generate_sbm, make_dataset

settings.register_profile("ci", deadline=None, max_examples=50)
settings.load_profile("ci")

DATA_ROOT = Path(os.environ.get("LRKERNEL_DATA", Path(__file__).parents[1] / "data"))


def random_graph(n, p=0.3, directed=False, d=7, C=3, seed=0, name="rand"):
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    edges = np.stack([src, dst], axis=1)
    labels = np.arange(n) % C
    return make_dataset(name, rng.standard_normal((n, d)), labels, edges,
                        directed=directed, C=C)


def two_cliques(size=50, seed=0):
    """Two disjoint cliques with one-hot block features."""
    ds = generate_sbm(SbmConfig([size, size], 1.0, 0.0, seed=seed))
    X = np.eye(2)[ds.labels]
    return make_dataset("cliques", X, ds.labels, ds.edges, directed=False, C=2)


def benchmark_path(name):
    path = DATA_ROOT / name
    if not (path / "meta.json").exists():
        pytest.skip(f"benchmark dataset {name!r} not found under {DATA_ROOT}")
    return path


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            for key, label in getattr(rep, "user_properties", ()):
                if key == "acceptance":
                    lines.append((label, {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]))
    if lines:
        terminalreporter.section("acceptance criteria")
        for label, outcome in sorted(lines):
            terminalreporter.write_line(f"{outcome:5s} {label}")

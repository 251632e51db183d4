import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from mmconc.core import explicit_space


def random_metric_table(rng: np.random.Generator, n: int) -> np.ndarray:
    """Shortest-path closure of random positive weights: always a metric."""
    w = rng.uniform(0.1, 1.0, size=(n, n))
    d = np.minimum(w, w.T)
    np.fill_diagonal(d, 0.0)
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def random_space(seed: int, n: int, uniform: bool = False):
    rng = np.random.default_rng(seed)
    d = random_metric_table(rng, n)
    mu = None if uniform else rng.dirichlet(np.ones(n))
    return explicit_space(d, mu, label=f"rand{seed}_{n}")


small_spaces = st.builds(random_space, st.integers(0, 10_000), st.integers(2, 7), st.booleans())


@pytest.fixture
def two_point():
    return explicit_space([[0.0, 1.0], [1.0, 0.0]], label="two")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])

"""Shared test fixtures and instance factories."""

import numpy as np
import pytest

from huberagg import Dataset


def make_instance(n, d, seed, outliers=False, signal=5):
    """Gaussian design with a sparse signal; optional gross outliers in y."""
    r = np.random.default_rng(seed)
    x = r.standard_normal((n, d))
    k = min(signal, d)
    y = x[:, :k] @ (2 * r.standard_normal(k)) + r.standard_normal(n)
    if outliers:
        y = y + np.where(r.random(n) < 0.25, 12 * r.standard_normal(n), 0.0)
    return Dataset(x, y)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)

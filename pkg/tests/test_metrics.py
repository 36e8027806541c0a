import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tcpwindow.metrics import (
    EmpiricalDistribution,
    NonLipschitzError,
    bootstrap_mean_stderr,
    bootstrap_w1_stderr,
    deviation_frequency,
    w1_dual_check,
    w1_to_dirac,
    wasserstein_p,
    wasserstein_p_bruteforce,
)

clouds = st.integers(1, 6).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-100, 100), min_size=n, max_size=n),
        st.lists(st.floats(-100, 100), min_size=n, max_size=n),
    )
)


@settings(max_examples=200, deadline=None)
@given(clouds, st.sampled_from([1.0, 2.0, 3.0]))
def test_sorted_matches_bruteforce(ab, p):
    a, b = ab
    assert wasserstein_p(a, b, p) == pytest.approx(wasserstein_p_bruteforce(a, b, p), rel=1e-12, abs=1e-12)


def test_w1_examples():
    assert wasserstein_p([0, 1], [1, 2]) == 1.0
    assert wasserstein_p([0, 0], [0, 0]) == 0.0
    # shifts are exact
    x = np.random.default_rng(1).random(100)
    assert wasserstein_p(x, x + 3.0) == pytest.approx(3.0)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20), st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_metric_axioms(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    assert wasserstein_p(a, b) == pytest.approx(wasserstein_p(b, a))
    assert wasserstein_p(a, a) == 0.0
    assert wasserstein_p(a, b, 1) <= wasserstein_p(a, b, 2) + 1e-9


def test_unequal_sizes():
    with pytest.raises(ValueError, match="subsample_seed"):
        wasserstein_p([0, 1, 2], [0, 1])
    v = wasserstein_p([5, 5, 5], [0, 1], subsample_seed=0)
    assert v == pytest.approx(4.5)


def test_empirical_distribution_is_sorted_and_frozen():
    d = EmpiricalDistribution.from_samples([3.0, 1.0, 2.0])
    assert list(d.samples) == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        d.samples[0] = 0.0
    assert d.mean() == 2.0
    assert d.quantile(0.0) == 1.0 and d.quantile(1.0) == 3.0


def test_w1_to_dirac():
    assert w1_to_dirac(1.0, [0.0, 2.0, 4.0]) == pytest.approx(5.0 / 3.0)


def test_dual_check_below_w1():
    g = np.random.default_rng(2)
    a, b = g.normal(size=500), g.normal(0.3, 1.2, size=500)
    fs = [lambda v: v, abs, np.sin, lambda v: min(v, 0.5)]
    assert w1_dual_check(a, b, fs) <= wasserstein_p(a, b) + 1e-12


def test_dual_check_rejects_steep_function():
    with pytest.raises(NonLipschitzError):
        w1_dual_check([0.0, 1.0], [0.5, 2.0], [lambda v: 2 * v])


def test_deviation_frequency():
    runs = [0.0, 0.1, 0.2, 0.5]
    assert deviation_frequency(runs, 0.0, 0.05, [0.0, 0.1, 1.0]) == [0.75, 0.5, 0.0]


def test_bootstrap_stderr_scale():
    g = np.random.default_rng(3)
    x = g.normal(size=4000)
    se = bootstrap_mean_stderr(x, n_boot=400, seed=1)[0]
    assert se == pytest.approx(x.std() / np.sqrt(x.size), rel=0.15)
    a, b = g.normal(size=2000), g.normal(1.0, size=2000)
    s = bootstrap_w1_stderr(a, b, n_boot=100, seed=0)
    assert 0.005 < s < 0.1
    assert bootstrap_w1_stderr(a, b, n_boot=100, seed=0) == s

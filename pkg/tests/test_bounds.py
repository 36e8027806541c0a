import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from tcpwindow.bounds import (
    BoundReport,
    DegenerateSpectrum,
    concentration_bound,
    constant_rate_decay,
    continuous_decay_bound,
    embedded_contraction_bound,
    gross_constants,
    mean_bound,
    moments_constant_rate,
    real_tcp_bound,
    riccati_solution,
    strong_ergodicity_bound,
    theta,
)
from tcpwindow.laws import Dirac, DiscreteMixture, Uniform01


def test_embedded_contraction_bound():
    assert embedded_contraction_bound(1, 3, Dirac(0.5), 1.0) == 0.125
    assert embedded_contraction_bound(2, 4, Uniform01(), 2.0) == pytest.approx((1 / 3) ** 2 * 2.0)
    assert embedded_contraction_bound(1, 0, Dirac(0.5), 1.5) == 1.5


def test_decay_bounds():
    assert continuous_decay_bound(1.0, 0.5, 2.0, 1.0) == pytest.approx(math.exp(-1))
    assert real_tcp_bound(0.5, 1.0, 10.0) == pytest.approx(1 / 16)
    assert real_tcp_bound(0.5, 0.0, 3.0) == 0.0
    assert constant_rate_decay(1.0, 1, Dirac(0.5), 4.0, 1.0) == pytest.approx(math.exp(-2))
    assert constant_rate_decay(1.0, 2, Dirac(0.5), 4.0, 1.0) == pytest.approx(math.exp(-0.75 * 2))


def test_strong_bound_value():
    d = math.sqrt(0.5)
    expect = 2 * math.exp(0.5) / (d * math.tanh(d)) * math.exp(-1.0)
    assert strong_ergodicity_bound(1.0, 0.5, 1.0, 2.0) == pytest.approx(expect)
    with pytest.raises(ValueError):
        strong_ergodicity_bound(1.0, 0.5, 2.0, 1.0)


@given(st.floats(0, 100), st.floats(0.01, 0.99), st.floats(0.01, 10))
def test_riccati_solution_solves_ode_and_sits_below_mean_bound(x, k1, t):
    b = riccati_solution(x, k1, t)
    assert b <= mean_bound(k1, t) * (1 + 1e-12)
    h = 1e-6 * max(t, 1)
    deriv = (riccati_solution(x, k1, t + h) - riccati_solution(x, k1, t - min(h, t / 2))) / (h + min(h, t / 2))
    assert deriv == pytest.approx(1 - k1 * b * b, rel=1e-3, abs=1e-4)


def test_mean_bound_is_the_infinite_start_limit():
    assert riccati_solution(1e12, 0.5, 1.3) == pytest.approx(mean_bound(0.5, 1.3), rel=1e-9)
    with pytest.raises(ValueError):
        mean_bound(0.5, 0.0)


def test_theta():
    assert theta(0, 1.0, Dirac(0.5)) == 0.0
    assert theta(1, 2.0, Dirac(0.5)) == 1.0
    assert theta(2, 1.0, Uniform01()) == pytest.approx(2 / 3)


@pytest.mark.parametrize("law", [Dirac(0.5), Uniform01(), DiscreteMixture((0.2, 0.7), (0.4, 0.6))])
@pytest.mark.parametrize("x", [0.0, 1.3])
def test_moments_match_moment_hierarchy(law, x):
    # m_n' = n m_{n-1} - theta_n m_n, m_n(0) = x^n
    lam, n_max = 1.5, 4
    th = [theta(k, lam, law) for k in range(n_max + 1)]

    def rhs(t, m):
        out = np.empty_like(m)
        out[0] = 0.0
        for k in range(1, n_max + 1):
            out[k] = k * m[k - 1] - th[k] * m[k]
        return out

    m0 = [x**k for k in range(n_max + 1)]
    ts = [0.5, 2.0, 6.0]
    sol = integrate.solve_ivp(rhs, (0, 6.0), m0, t_eval=ts, rtol=1e-12, atol=1e-13)
    for k in range(1, n_max + 1):
        for j, t in enumerate(ts):
            assert moments_constant_rate(k, x, lam, law, t) == pytest.approx(sol.y[k, j], rel=1e-8, abs=1e-10)
        assert moments_constant_rate(k, x, lam, law, 0.0) == pytest.approx(x**k, abs=1e-11)


def test_first_moment_closed_form():
    for t in (0.5, 1.0, 5.0, 20.0):
        assert abs(moments_constant_rate(1, 0.0, 1.0, Dirac(0.5), t) - 2 * (1 - math.exp(-t / 2))) < 1e-12


def test_degenerate_spectrum():
    with pytest.raises(DegenerateSpectrum):
        moments_constant_rate(2, 0.0, 1.0, Dirac(0.0), 1.0)


def test_gross_constants():
    kn, nu = gross_constants(0.5, 1)
    assert kn == pytest.approx(0.5) and nu == pytest.approx(2 / 3)
    assert gross_constants(0.5, 50)[0] == pytest.approx(nu)
    assert gross_constants(0.0, 3) == (0.0, 0.0)


def test_concentration_bound():
    assert concentration_bound(0.5, 10_000, 0.0) == 1.0
    assert concentration_bound(0.5, 10_000, 0.02) == pytest.approx(2 * math.exp(-10_000 * 0.75 * 4e-4 / 0.5))
    with pytest.raises(ValueError):
        concentration_bound(0.5, 10, -1.0)


def test_bound_report_relations():
    assert BoundReport("u", {}, 1.0, 1.02, 0.01).satisfied
    assert not BoundReport("u", {}, 1.0, 1.04, 0.01).satisfied
    assert BoundReport("l", {}, 1.0, 0.98, 0.01, relation="lower").satisfied
    assert not BoundReport("m", {}, 1.0, 0.9, 0.01, relation="match").satisfied
    assert BoundReport("m", {}, 1.0, 1.0 + 1e-10, 0.0, relation="match", tolerance=1e-9).satisfied
    with pytest.raises(ValueError):
        BoundReport("x", {}, 1.0, 1.0, 0.0, relation="sideways")
    with pytest.raises(ValueError):
        BoundReport("x", {}, 1.0, 1.0, -1.0)


def test_bound_report_serialization():
    r = BoundReport("real-tcp", {"t": 1.0}, 0.4, np.float64(0.3), 0.001)
    d = r.to_dict()
    assert d["satisfied"] is True and d["theoretical_value"] == 0.4
    assert '"mc_estimate": 0.3' in r.to_json()
    assert r.line().startswith("[PASS] real-tcp")

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from tcpwindow.coupling import (
    CoupledState,
    EventKind,
    coupled_constant_rate,
    coupled_embedded_step,
    coupled_grid,
    coupled_jump_event,
    constant_rate_grid,
    embedded_distance_grid,
    in_cone,
    simulate_coupled,
)
from tcpwindow.laws import Dirac, Uniform01
from tcpwindow.pdmp import jump_time
from tcpwindow.rng import stream


def test_state_normalization():
    s = CoupledState.from_xy(1.0, 3.0)
    assert (s.upper, s.lower, s.x_is_upper) == (3.0, 1.0, False)
    assert (s.x, s.y, s.distance) == (1.0, 3.0, 2.0)
    with pytest.raises(ValueError):
        CoupledState.from_xy(-1.0, 0.0)


def test_event_follows_draw_order():
    st0 = CoupledState.from_xy(2.0, 1.0)
    s1, s2 = stream(1), stream(1)
    nxt, kind, rec = coupled_jump_event(st0, 0.0, Dirac(0.5), s1)
    e = s2.next_exponential()
    coin = float(s2.uniforms())
    t = jump_time(2.0, 0.0, e)
    assert rec.time == pytest.approx(t)
    assert rec.upper_pre == pytest.approx(2.0 + t) and rec.lower_pre == pytest.approx(1.0 + t)
    expect_joint = coin < (1.0 + t) / (2.0 + t)
    assert (kind is EventKind.JOINT) == expect_joint
    assert rec.upper_post == pytest.approx(0.5 * rec.upper_pre)
    assert nxt.upper >= nxt.lower


def test_joint_probability_matches_integral():
    # P(Joint) for the first event from (2, 1) with a = 0
    p = integrate.quad(lambda e: math.exp(-e) * (1 + jump_time(1.0 * 2, 0, e)) / (2 + jump_time(2.0, 0, e)), 0, 60)[0]
    s = stream(2)
    st0 = CoupledState.from_xy(2.0, 1.0)
    n = 20_000
    joint = sum(coupled_jump_event(st0, 0.0, Dirac(0.5), s)[1] is EventKind.JOINT for _ in range(n))
    assert abs(joint / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_equal_positions_stay_together():
    path = simulate_coupled(1.5, 1.5, 0.0, Uniform01(), 10.0, stream(3))
    assert all(ev.kind is EventKind.JOINT for ev in path.events)
    assert np.all(path.distance_at(np.linspace(0, 10, 50)) == 0.0)


def test_components_are_consistent():
    path = simulate_coupled(2.0, 1.0, 0.5, Uniform01(), 8.0, stream(4))
    ts = np.linspace(0, 8, 101)
    x, y = path.x_path.positions_at(ts), path.y_path.positions_at(ts)
    assert np.allclose(np.abs(x - y), path.distance_at(ts))
    assert x[0] == 2.0 and y[0] == 1.0


def test_lower_never_jumps_alone():
    path = simulate_coupled(3.0, 1.0, 0.0, Dirac(0.3), 20.0, stream(5), check_cone=False)
    for ev in path.events:
        assert ev.upper_post == pytest.approx(ev.factor * ev.upper_pre)
        if ev.kind is EventKind.UPPER_ONLY:
            assert ev.lower_post == ev.lower_pre


def test_cone_is_invariant():
    # starting inside {h y <= x <= y/h}: check_cone raises RegionExit on any exit
    s = stream(6)
    for _ in range(200):
        simulate_coupled(2.0, 1.0, 0.0, Dirac(0.5), 10.0, s, check_cone=True)
    g = coupled_grid(2.0, 1.0, 0.0, Dirac(0.5), [1.0, 5.0], 5000, root_seed=1, check_cone=True)
    assert np.all(in_cone(np.maximum(g.x, g.y), np.minimum(g.x, g.y), 0.5))


def test_outside_cone_start_is_allowed():
    simulate_coupled(10.0, 1.0, 0.0, Dirac(0.5), 10.0, stream(7), check_cone=True)


def test_grid_and_event_simulators_agree():
    times = [0.5, 2.0]
    g = coupled_grid(2.0, 1.0, 1.0, Dirac(0.5), times, 40_000, root_seed=2)
    s = stream(8)
    ev = np.array([simulate_coupled(2.0, 1.0, 1.0, Dirac(0.5), 2.0, s).distance_at(times) for _ in range(5000)])
    for j in range(2):
        se = math.hypot(g.distance[:, j].std() / 200, ev[:, j].std() / math.sqrt(5000))
        assert abs(g.distance[:, j].mean() - ev[:, j].mean()) < 4 * se


def test_grid_distance_matches_components():
    g = coupled_grid(2.0, 1.0, 0.0, Uniform01(), np.linspace(0, 3, 7), 2000, root_seed=3)
    assert np.allclose(g.distance, np.abs(g.x - g.y), atol=1e-12)
    assert np.all(g.distance[:, 0] == 1.0)


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0, 20), st.floats(0, 0.999))
def test_embedded_coupling_contracts(x, y, e, q):
    x2, y2 = coupled_embedded_step(x, y, e, q)
    assert abs(x2 - y2) <= q * abs(x - y) * (1 + 1e-12) + 1e-300


def test_embedded_distance_grid_shape():
    d = embedded_distance_grid(2.0, 1.0, 5, Dirac(0.5), 100, root_seed=4)
    assert d.shape == (100, 6)
    assert np.all(d[:, 0] == 1.0)
    assert np.all(np.diff(d, axis=1) <= 0)


def test_constant_rate_coupling_is_product_of_factors():
    dp = coupled_constant_rate(3.0, 1.0, 1.0, Dirac(0.5), 10.0, stream(9))
    k = np.arange(1, dp.values.size + 1)
    assert np.allclose(dp.values, 2.0 * 0.5**k)
    assert dp.at(0.0) == 2.0


def test_constant_rate_mean_distance():
    d = constant_rate_grid(1.0, 0.0, 1.0, Dirac(0.5), [2.0], 100_000, root_seed=5)[:, 0]
    assert abs(d.mean() - math.exp(-1.0)) < 4 * d.std() / math.sqrt(d.size)


def test_event_csv(tmp_path):
    path = simulate_coupled(2.0, 1.0, 0.0, Dirac(0.5), 5.0, stream(10))
    path.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "event_index,time,upper_pre,lower_pre,upper_post,lower_post,event_kind"
    assert len(lines) == len(path.events) + 1
    assert lines[1].split(",")[-1] in ("Joint", "UpperOnly")

"""Couplings of two window-size processes that pull the components together.

The main coupling lets the upper component jump on its own clock (rate
``upper + a``) and makes the lower one follow with probability
``(lower + a) / (upper + a)`` at the jump time, using the same factor. The
lower component therefore never jumps alone, and each marginal is again a
rate-``x + a`` process. Between events the distance is constant; a joint
jump multiplies it by ``Q``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import NamedTuple

import numpy as np

from .io import write_csv
from .laws import Dirac, MultiplicativeLaw
from .pdmp import PathSample, _fill_between, jump_time
from .rng import DEFAULT_BLOCK_SIZE, Stream, map_blocks

_COALESCE_REL = 1e-15


class EventKind(str, Enum):
    JOINT = "Joint"
    UPPER_ONLY = "UpperOnly"


class RegionExit(AssertionError):
    """A coupled path left the invariant cone ``{h y <= x <= y / h}``."""


@dataclass(frozen=True)
class CoupledState:
    """Ordered pair ``upper >= lower``; ``x_is_upper`` records which one is X."""

    upper: float
    lower: float
    time: float = 0.0
    x_is_upper: bool = True

    @classmethod
    def from_xy(cls, x: float, y: float, time: float = 0.0) -> "CoupledState":
        if x < 0 or y < 0:
            raise ValueError("coupled positions must be nonnegative")
        if x >= y:
            return cls(float(x), float(y), time, True)
        return cls(float(y), float(x), time, False)

    @property
    def x(self) -> float:
        return self.upper if self.x_is_upper else self.lower

    @property
    def y(self) -> float:
        return self.lower if self.x_is_upper else self.upper

    @property
    def distance(self) -> float:
        return self.upper - self.lower


def _normalize(upper: float, lower: float, time: float, x_is_upper: bool) -> CoupledState:
    if lower > upper:
        upper, lower, x_is_upper = lower, upper, not x_is_upper
    if upper - lower < _COALESCE_REL * max(upper, lower, 1.0):
        lower = upper
    return CoupledState(upper, lower, time, x_is_upper)


def in_cone(upper, lower, h: float, rel: float = 1e-12):
    """``h * upper <= lower`` up to rounding: the pair lies in the invariant cone."""
    return h * np.asarray(upper) <= np.asarray(lower) * (1.0 + rel) + 1e-300


class EventRecord(NamedTuple):
    time: float
    upper_pre: float
    lower_pre: float
    upper_post: float
    lower_post: float
    kind: EventKind
    x_was_upper: bool
    x_is_upper: bool
    factor: float


def coupled_jump_event(
    state: CoupledState, a: float, law: MultiplicativeLaw, stream: Stream
) -> tuple[CoupledState, EventKind, EventRecord]:
    """Advance to the next jump of the upper component.

    Draw order is fixed: the exponential clock, then the joint/alone coin,
    then the factor.
    """
    if state.upper < state.lower:
        raise ValueError("state must be normalized (upper >= lower)")
    e = stream.next_exponential()
    t = jump_time(state.upper, a, e)
    u_pre, l_pre = state.upper + t, state.lower + t
    coin = float(stream.uniforms())
    q = stream.next_factor(law)
    if state.upper == state.lower or coin < (l_pre + a) / (u_pre + a):
        kind = EventKind.JOINT
        u_post, l_post = q * u_pre, q * l_pre
    else:
        kind = EventKind.UPPER_ONLY
        u_post, l_post = q * u_pre, l_pre
    nxt = _normalize(u_post, l_post, state.time + t, state.x_is_upper)
    rec = EventRecord(state.time + t, u_pre, l_pre, u_post, l_post, kind, state.x_is_upper, nxt.x_is_upper, q)
    return nxt, kind, rec


@dataclass(frozen=True, eq=False)
class CoupledPath:
    x0: float
    y0: float
    a: float
    horizon: float
    events: tuple[EventRecord, ...]

    @property
    def event_times(self) -> np.ndarray:
        return np.array([ev.time for ev in self.events])

    def _component(self, which: str) -> PathSample:
        times, pre, post = [], [], []
        for ev in self.events:
            mine_upper = ev.x_was_upper if which == "x" else not ev.x_was_upper
            p_pre = ev.upper_pre if mine_upper else ev.lower_pre
            p_post = ev.upper_post if mine_upper else ev.lower_post
            if mine_upper or ev.kind is EventKind.JOINT:
                times.append(ev.time)
                pre.append(p_pre)
                post.append(p_post)
        start = self.x0 if which == "x" else self.y0
        return PathSample(start, np.array(times), np.array(pre), np.array(post), self.horizon)

    @property
    def x_path(self) -> PathSample:
        return self._component("x")

    @property
    def y_path(self) -> PathSample:
        return self._component("y")

    def distance_at(self, t) -> np.ndarray | float:
        """``|X_t - Y_t|``, piecewise constant and right-continuous between events."""
        ts = np.asarray(t, dtype=float)
        if np.any(ts < 0) or np.any(ts > self.horizon):
            raise ValueError(f"query outside [0, {self.horizon}]")
        # post-event distances after normalization and the coalescence clamp
        values = np.array(
            [abs(self.x0 - self.y0)]
            + [_normalize(ev.upper_post, ev.lower_post, 0.0, True).distance for ev in self.events]
        )
        idx = np.searchsorted(self.event_times, ts, side="right")
        out = values[idx]
        return float(out) if ts.ndim == 0 else out

    def rows(self):
        for i, ev in enumerate(self.events, 1):
            yield (i, ev.time, ev.upper_pre, ev.lower_pre, ev.upper_post, ev.lower_post, ev.kind.value)

    def to_csv(self, path) -> None:
        write_csv(
            path,
            ["event_index", "time", "upper_pre", "lower_pre", "upper_post", "lower_post", "event_kind"],
            self.rows(),
        )


def simulate_coupled(
    x0: float,
    y0: float,
    a: float,
    law: MultiplicativeLaw,
    horizon: float,
    stream: Stream,
    check_cone: bool = True,
) -> CoupledPath:
    """Full coupled trajectory on ``[0, horizon]``.

    With a Dirac(h) factor the cone ``{h y <= x <= y / h}`` is invariant:
    once the pair is inside it never leaves. ``check_cone`` asserts this
    along the path and raises :class:`RegionExit` otherwise.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if a < 0:
        raise ValueError("a must be nonnegative")
    state = CoupledState.from_xy(x0, y0)
    h = law.delta if isinstance(law, Dirac) and law.delta > 0 else None
    inside = h is not None and bool(in_cone(state.upper, state.lower, h))
    events = []
    while True:
        nxt, _, rec = coupled_jump_event(state, a, law, stream)
        if rec.time > horizon:
            break
        events.append(rec)
        state = nxt
        if check_cone and h is not None:
            now = bool(in_cone(state.upper, state.lower, h))
            if inside and not now:
                raise RegionExit(f"left the cone at t={state.time}: ({state.upper}, {state.lower})")
            inside = inside or now
    return CoupledPath(float(x0), float(y0), float(a), float(horizon), tuple(events))


class CoupledGrid(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    distance: np.ndarray


def simulate_coupled_grid(
    x0, y0, a: float, law: MultiplicativeLaw, times, stream: Stream, count: int,
    check_cone: bool = False,
) -> CoupledGrid:
    """``count`` coupled replicas observed on a sorted time grid (vectorized)."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be a non-empty sorted array of nonnegative reals")
    xs = np.broadcast_to(np.asarray(x0, dtype=float), (count,))
    ys = np.broadcast_to(np.asarray(y0, dtype=float), (count,))
    upper = np.maximum(xs, ys)
    lower = np.minimum(xs, ys)
    x_up = xs >= ys
    m = times.size
    up_out = np.empty((count, m))
    lo_out = np.empty((count, m))
    xup_out = np.empty((count, m), dtype=bool)
    dist = np.empty((count, m))
    t = np.zeros(count)
    idx = np.arange(count)
    horizon = times[-1]
    h = law.delta if isinstance(law, Dirac) and law.delta > 0 else None
    inside = in_cone(upper, lower, h) if (check_cone and h is not None) else None
    while idx.size:
        e = stream.exponentials(idx.size)
        gap = jump_time(upper, a, e)
        t_next = t + gap
        _fill_between(up_out, idx, times, t, t_next, upper)
        _fill_between(lo_out, idx, times, t, t_next, lower)
        _fill_between(dist, idx, times, t, t_next, upper - lower, drift=False)
        _fill_between(xup_out, idx, times, t, t_next, x_up, drift=False)
        u_pre = upper + gap
        l_pre = lower + gap
        coin = stream.uniforms(idx.size)
        q = stream.factors(law, idx.size)
        joint = (upper == lower) | (coin < (l_pre + a) / (u_pre + a))
        u_new = q * u_pre
        l_new = np.where(joint, q * l_pre, l_pre)
        swap = l_new > u_new
        upper = np.where(swap, l_new, u_new)
        lower = np.where(swap, u_new, l_new)
        x_up = np.where(swap, ~x_up, x_up)
        close = (upper - lower) < _COALESCE_REL * np.maximum(upper, 1.0)
        lower = np.where(close, upper, lower)
        keep = t_next <= horizon
        if inside is not None:
            now = in_cone(upper, lower, h)
            if np.any(inside & ~now & keep):
                raise RegionExit("a coupled replica left the invariant cone")
            inside = (inside | now)[keep]
        upper, lower, x_up = upper[keep], lower[keep], x_up[keep]
        t = t_next[keep]
        idx = idx[keep]
    x = np.where(xup_out, up_out, lo_out)
    y = np.where(xup_out, lo_out, up_out)
    return CoupledGrid(x, y, dist)


def _coupled_block(x0, y0, a, law, times, check_cone, stream: Stream, count: int) -> np.ndarray:
    g = simulate_coupled_grid(x0, y0, a, law, times, stream, count, check_cone)
    return np.stack([g.x, g.y, g.distance], axis=1)


def coupled_grid(
    x0: float, y0: float, a: float, law: MultiplicativeLaw, times, n_replicas: int, root_seed: int,
    stream_offset: int = 0, block_size: int = DEFAULT_BLOCK_SIZE, workers: int = 1,
    check_cone: bool = False,
) -> CoupledGrid:
    """Block-parallel :func:`simulate_coupled_grid` over ``n_replicas`` replicas."""
    fn = partial(_coupled_block, float(x0), float(y0), float(a), law, np.asarray(times, dtype=float), check_cone)
    arr = map_blocks(fn, n_replicas, root_seed, stream_offset, block_size, workers)
    return CoupledGrid(arr[:, 0, :], arr[:, 1, :], arr[:, 2, :])


def coupled_embedded_step(x, y, e, q):
    """Both chains driven by the same ``(E, Q)``; broadcasts over arrays."""
    x2 = np.asarray(q) * np.sqrt(np.square(x) + 2.0 * np.asarray(e))
    y2 = np.asarray(q) * np.sqrt(np.square(y) + 2.0 * np.asarray(e))
    if np.ndim(x2) == 0:
        return float(x2), float(y2)
    return x2, y2


def coupled_embedded_distances(
    x0: float, y0: float, n_steps: int, law: MultiplicativeLaw, stream: Stream, count: int
) -> np.ndarray:
    """``|X_k - Y_k|`` for ``k = 0..n_steps`` under shared noise, shape ``(count, n_steps + 1)``."""
    out = np.empty((count, n_steps + 1))
    x = np.full(count, float(x0))
    y = np.full(count, float(y0))
    out[:, 0] = np.abs(x - y)
    for k in range(1, n_steps + 1):
        e = stream.exponentials(count)
        q = stream.factors(law, count)
        x, y = coupled_embedded_step(x, y, e, q)
        out[:, k] = np.abs(x - y)
    return out


def _embedded_block(x0, y0, n_steps, law, stream: Stream, count: int) -> np.ndarray:
    return coupled_embedded_distances(x0, y0, n_steps, law, stream, count)


def embedded_distance_grid(
    x0: float, y0: float, n_steps: int, law: MultiplicativeLaw, n_replicas: int, root_seed: int,
    stream_offset: int = 0, block_size: int = DEFAULT_BLOCK_SIZE, workers: int = 1,
) -> np.ndarray:
    fn = partial(_embedded_block, float(x0), float(y0), int(n_steps), law)
    return map_blocks(fn, n_replicas, root_seed, stream_offset, block_size, workers)


@dataclass(frozen=True, eq=False)
class DistanceProcess:
    """Piecewise-constant distance recorded at its jump times."""

    initial: float
    times: np.ndarray
    values: np.ndarray
    horizon: float

    def at(self, t):
        ts = np.asarray(t, dtype=float)
        if np.any(ts < 0) or np.any(ts > self.horizon):
            raise ValueError(f"query outside [0, {self.horizon}]")
        vals = np.concatenate(([self.initial], self.values))
        out = vals[np.searchsorted(self.times, ts, side="right")]
        return float(out) if ts.ndim == 0 else out


def coupled_constant_rate(
    x: float, y: float, lam: float, law: MultiplicativeLaw, horizon: float, stream: Stream
) -> DistanceProcess:
    """Both components share one Poisson(``lam``) clock and one factor sequence.

    Between jumps the distance is constant; at the k-th jump it is multiplied
    by ``Q_k``, so ``|X_t - Y_t| = |x - y| prod_{k <= N_t} Q_k``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    d = abs(float(x) - float(y))
    times, values = [], []
    t = 0.0
    while True:
        t += stream.next_exponential() / lam
        if t > horizon:
            break
        d *= stream.next_factor(law)
        times.append(t)
        values.append(d)
    return DistanceProcess(abs(float(x) - float(y)), np.array(times), np.array(values), float(horizon))


def constant_rate_distance_grid(
    x: float, y: float, lam: float, law: MultiplicativeLaw, times, stream: Stream, count: int
) -> np.ndarray:
    """Vectorized :func:`coupled_constant_rate` observed on a sorted time grid."""
    times = np.asarray(times, dtype=float)
    out = np.empty((count, times.size))
    d = np.full(count, abs(float(x) - float(y)))
    t = np.zeros(count)
    idx = np.arange(count)
    while idx.size:
        t_next = t + stream.exponentials(idx.size) / lam
        _fill_between(out, idx, times, t, t_next, d, drift=False)
        q = stream.factors(law, idx.size)
        keep = t_next <= times[-1]
        d = (d * q)[keep]
        t = t_next[keep]
        idx = idx[keep]
    return out


def _constant_block(x, y, lam, law, times, stream: Stream, count: int) -> np.ndarray:
    return constant_rate_distance_grid(x, y, lam, law, times, stream, count)


def constant_rate_grid(
    x: float, y: float, lam: float, law: MultiplicativeLaw, times, n_replicas: int, root_seed: int,
    stream_offset: int = 0, block_size: int = DEFAULT_BLOCK_SIZE, workers: int = 1,
) -> np.ndarray:
    fn = partial(_constant_block, float(x), float(y), float(lam), law, np.asarray(times, dtype=float))
    return map_blocks(fn, n_replicas, root_seed, stream_offset, block_size, workers)

"""Exact event-driven simulation of the AIMD window-size process.

Three jump mechanisms share the same slope-one flow between jumps:

* :class:`Linear` -- jump rate ``x`` (the TCP window process),
* :class:`Shifted` -- jump rate ``x + a`` with ``a > 0``,
* :class:`Constant` -- jump rate ``lam`` independent of position.

At a jump the position is multiplied by an independent factor ``Q ~ H``.
With a position-dependent rate the clock is inverted in closed form, so no
time discretization is involved anywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Sequence, Union

import numpy as np

from .io import write_csv
from .laws import MultiplicativeLaw, kappa1, law_from_dict
from .metrics import EmpiricalDistribution
from .rng import DEFAULT_BLOCK_SIZE, Stream, map_blocks


@dataclass(frozen=True)
class Linear:
    @property
    def shift(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Shifted:
    a: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError(f"Shifted rate needs a > 0, got {self.a}")

    @property
    def shift(self) -> float:
        return float(self.a)


@dataclass(frozen=True)
class Constant:
    lam: float

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError(f"Constant rate needs lambda > 0, got {self.lam}")


RateModel = Union[Linear, Shifted, Constant]


@dataclass(frozen=True)
class ProcessSpec:
    rate_model: RateModel
    jump_law: MultiplicativeLaw

    @property
    def kappa1(self) -> float:
        return kappa1(self.jump_law)

    @property
    def position_dependent(self) -> bool:
        return not isinstance(self.rate_model, Constant)

    def to_dict(self) -> dict[str, Any]:
        rm = self.rate_model
        if isinstance(rm, Linear):
            rate = {"kind": "linear"}
        elif isinstance(rm, Shifted):
            rate = {"kind": "shifted", "a": rm.a}
        else:
            rate = {"kind": "constant", "lambda": rm.lam}
        return {"rate_model": rate, "jump_law": self.jump_law.to_dict()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProcessSpec":
        rate = data["rate_model"]
        kind = rate.get("kind")
        if kind == "linear":
            rm: RateModel = Linear()
        elif kind == "shifted":
            rm = Shifted(float(rate["a"]))
        elif kind == "constant":
            rm = Constant(float(rate["lambda"]))
        else:
            raise ValueError(f"unknown rate_model kind {kind!r}")
        return cls(rm, law_from_dict(data["jump_law"]))


def jump_time(x, a, e):
    """Time ``T`` with ``int_0^T (x + a + s) ds = e``.

    Solving the quadratic gives ``sqrt((x+a)^2 + 2e) - (x+a)``; it is computed
    as ``2e / (sqrt((x+a)^2 + 2e) + (x+a))``, which avoids cancellation when
    ``x + a`` dominates ``sqrt(e)``. Works elementwise on arrays.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(np.isnan(x)) or np.any(np.isnan(a)) or np.any(np.isnan(e)):
        raise ValueError("jump_time got NaN input")
    if np.any(x < 0) or np.any(a < 0) or np.any(e < 0):
        raise ValueError("jump_time needs x >= 0, a >= 0, e >= 0")
    s = x + a
    root = np.sqrt(s * s + 2.0 * e)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(root + s > 0, 2.0 * e / (root + s), 0.0)
    return float(t) if t.ndim == 0 else t


def _next_gap(spec: ProcessSpec, x, e):
    rm = spec.rate_model
    if isinstance(rm, Constant):
        return e / rm.lam
    return jump_time(x, rm.shift, e)


@dataclass(frozen=True, eq=False)
class PathSample:
    """One trajectory: jump times with the positions just before and after."""

    initial: float
    jump_times: np.ndarray
    pre_jump: np.ndarray
    post_jump: np.ndarray
    horizon: float
    consumed_exponentials: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def __post_init__(self) -> None:
        for name in ("jump_times", "pre_jump", "post_jump", "consumed_exponentials"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size

    def position_at(self, t: float) -> float:
        return position_at(self, t)

    def positions_at(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < 0) or np.any(ts > self.horizon):
            raise ValueError(f"query outside [0, {self.horizon}]")
        # index of the last jump time <= t; 0 means "before the first jump"
        n = np.searchsorted(self.jump_times, ts, side="right")
        base_t = np.concatenate(([0.0], self.jump_times))[n]
        base_x = np.concatenate(([self.initial], self.post_jump))[n]
        return base_x + ts - base_t

    def rows(self):
        for n, (t, pre, post) in enumerate(zip(self.jump_times, self.pre_jump, self.post_jump), 1):
            yield (n, t, pre, post)

    def to_csv(self, path) -> None:
        write_csv(path, ["n", "T_n", "X_pre", "X_post"], self.rows())


def position_at(path: PathSample, t: float) -> float:
    """Right-continuous position ``X_{T_n} + t - T_n`` for ``T_n <= t < T_{n+1}``."""
    if not (0.0 <= t <= path.horizon):
        raise ValueError(f"t={t} outside [0, {path.horizon}]")
    return float(path.positions_at(np.asarray([t]))[0])


def simulate_path(spec: ProcessSpec, x0: float, horizon: float, stream: Stream) -> PathSample:
    """Simulate one trajectory on ``[0, horizon]``, keeping every jump with ``T_n <= horizon``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if x0 < 0:
        raise ValueError("initial position must be nonnegative")
    times, pre, post, used = [], [], [], []
    t, x = 0.0, float(x0)
    while True:
        e = stream.next_exponential()
        gap = float(_next_gap(spec, x, e))
        if t + gap > horizon:
            break
        t += gap
        x_minus = x + gap
        q = stream.next_factor(spec.jump_law)
        x = q * x_minus
        times.append(t)
        pre.append(x_minus)
        post.append(x)
        used.append(e)
    return PathSample(float(x0), np.array(times), np.array(pre), np.array(post), float(horizon), np.array(used))


def _as_initial(initial_law, stream: Stream, count: int) -> np.ndarray:
    if callable(initial_law):
        return np.asarray(initial_law(stream.generator, count), dtype=float)
    return np.full(count, float(initial_law))


def simulate_grid(spec: ProcessSpec, x0, times: Sequence[float], stream: Stream) -> np.ndarray:
    """Positions of ``len(x0)`` independent replicas at every time of ``times``.

    Replicas advance jump by jump in lockstep; the returned array has shape
    ``(len(x0), len(times))``. ``times`` must be sorted and nonnegative.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be a non-empty sorted array of nonnegative reals")
    x = np.array(x0, dtype=float, copy=True)
    n = x.size
    out = np.empty((n, times.size))
    t = np.zeros(n)
    idx = np.arange(n)
    horizon = times[-1]
    while idx.size:
        e = stream.exponentials(idx.size)
        t_next = t + _next_gap(spec, x, e)
        _fill_between(out, idx, times, t, t_next, x)
        q = stream.factors(spec.jump_law, idx.size)
        keep = t_next <= horizon
        x = (q * (x + (t_next - t)))[keep]
        t = t_next[keep]
        idx = idx[keep]
    return out


def _fill_between(out, idx, times, t, t_next, base, drift: bool = True) -> None:
    """Write ``base + (s - t)`` (or ``base`` if not ``drift``) into ``out`` for grid times ``s`` in ``[t, t_next)``."""
    lo = np.searchsorted(times, t, side="left")
    hi = np.searchsorted(times, t_next, side="left")
    width = hi - lo
    if width.size == 0 or width.max() == 0:
        return
    for k in range(int(width.max())):
        j = lo + k
        ok = j < hi
        jj = j[ok]
        out[idx[ok], jj] = base[ok] + times[jj] - t[ok] if drift else base[ok]


def _grid_block(spec, initial_law, times, stream: Stream, count: int) -> np.ndarray:
    x0 = _as_initial(initial_law, stream, count)
    return simulate_grid(spec, x0, times, stream)


def marginal_grid(
    spec: ProcessSpec,
    initial_law: Union[float, Callable],
    times: Sequence[float],
    n_replicas: int,
    root_seed: int,
    stream_offset: int = 0,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> np.ndarray:
    """``(n_replicas, len(times))`` array of i.i.d. trajectories sampled on a time grid.

    ``initial_law`` is a starting point or a callable ``(generator, size) -> array``.
    """
    fn = partial(_grid_block, spec, initial_law, np.asarray(times, dtype=float))
    return map_blocks(fn, n_replicas, root_seed, stream_offset, block_size, workers)


def marginal_sample(
    spec: ProcessSpec,
    initial_law: Union[float, Callable],
    t: float,
    n_replicas: int,
    root_seed: int,
    stream_offset: int = 0,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> EmpiricalDistribution:
    """``n_replicas`` i.i.d. draws of ``X_t``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        fn = partial(_initial_block, initial_law)
        return EmpiricalDistribution(map_blocks(fn, n_replicas, root_seed, stream_offset, block_size, workers))
    grid = marginal_grid(spec, initial_law, [t], n_replicas, root_seed, stream_offset, block_size, workers)
    return EmpiricalDistribution(grid[:, 0])


def _initial_block(initial_law, stream: Stream, count: int) -> np.ndarray:
    return _as_initial(initial_law, stream, count)


def count_jumps(spec: ProcessSpec, x0: float, horizon: float, n_replicas: int, root_seed: int) -> np.ndarray:
    """Number of jumps in ``[0, horizon]`` for each of ``n_replicas`` paths."""
    fn = partial(_count_block, spec, float(x0), float(horizon))
    return map_blocks(fn, n_replicas, root_seed)


def _count_block(spec, x0, horizon, stream: Stream, count: int) -> np.ndarray:
    x = np.full(count, x0)
    t = np.zeros(count)
    jumps = np.zeros(count, dtype=np.int64)
    idx = np.arange(count)
    while idx.size:
        e = stream.exponentials(idx.size)
        t_next = t + _next_gap(spec, x, e)
        q = stream.factors(spec.jump_law, idx.size)
        keep = t_next <= horizon
        jumps[idx[keep]] += 1
        x = (q * (x + (t_next - t)))[keep]
        t = t_next[keep]
        idx = idx[keep]
    return jumps


def embedded_from_paths(paths: Sequence[PathSample], k: int) -> np.ndarray:
    """``X_{T_k}`` from every path having at least ``k`` jumps (``k = 0`` gives the start)."""
    if k == 0:
        return np.array([p.initial for p in paths])
    return np.array([p.post_jump[k - 1] for p in paths if p.n_jumps >= k])

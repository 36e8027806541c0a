"""Empirical Wasserstein distances on the line and deviation frequencies."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .io import write_csv


class NonLipschitzError(ValueError):
    """A test function violates the 1-Lipschitz requirement on the sample range."""


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Uniformly weighted sample cloud, stored sorted ascending."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if arr.size == 0:
            raise ValueError("empirical distribution needs at least one sample")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_samples(cls, samples: Iterable[float]) -> "EmpiricalDistribution":
        return cls(np.asarray(list(samples), dtype=float))

    def __len__(self) -> int:
        return self.samples.size

    def quantile(self, u):
        """Left-continuous generalized inverse of the empirical CDF."""
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.ceil(u * len(self)).astype(int) - 1, 0, len(self) - 1)
        return self.samples[idx]

    def mean(self) -> float:
        return float(self.samples.mean())

    def stderr(self) -> float:
        n = len(self)
        return float(self.samples.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0

    def expect(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.mean(f(self.samples)))


def _as_cloud(x) -> EmpiricalDistribution:
    return x if isinstance(x, EmpiricalDistribution) else EmpiricalDistribution(np.asarray(x))


def _sorted_distance(a: np.ndarray, b: np.ndarray, p: float) -> float:
    diff = np.abs(a - b)
    if p == 1:
        return float(diff.mean())
    return float(np.mean(diff**p) ** (1.0 / p))


def wasserstein_p(
    A, B, p: float = 1.0, subsample_seed: int | None = None
) -> float:
    """Exact W_p between two uniformly weighted clouds on the real line.

    In one dimension the comonotone (order-statistic) pairing is optimal, so
    this is ``(mean |A_(i) - B_(i)|^p)^(1/p)``. Clouds of different sizes are
    refused unless ``subsample_seed`` is given, in which case the larger cloud
    is subsampled without replacement down to the smaller size.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    A, B = _as_cloud(A), _as_cloud(B)
    a, b = A.samples, B.samples
    if a.size != b.size:
        if subsample_seed is None:
            raise ValueError(
                f"cloud sizes differ ({a.size} vs {b.size}); pass subsample_seed to subsample"
            )
        gen = np.random.default_rng(subsample_seed)
        if a.size > b.size:
            a = np.sort(gen.choice(a, size=b.size, replace=False))
        else:
            b = np.sort(gen.choice(b, size=a.size, replace=False))
    return _sorted_distance(a, b, p)


def wasserstein_p_bruteforce(a: Sequence[float], b: Sequence[float], p: float = 1.0) -> float:
    """Minimum transport cost over every permutation coupling (tiny clouds only)."""
    a = list(map(float, a))
    b = list(map(float, b))
    if len(a) != len(b) or not a:
        raise ValueError("brute force needs two non-empty clouds of equal size")
    if len(a) > 8:
        raise ValueError("brute force is factorial; use at most 8 points")
    best = min(
        sum(abs(x - b[j]) ** p for x, j in zip(a, perm))
        for perm in itertools.permutations(range(len(b)))
    )
    return (best / len(a)) ** (1.0 / p)


def w1_to_dirac(x: float, cloud) -> float:
    """W_1(delta_x, mu) = E|x - Y| for Y ~ mu; no coupling is involved."""
    return float(np.mean(np.abs(_as_cloud(cloud).samples - x)))


def _check_lipschitz(f, lo: float, hi: float, n_grid: int = 2001) -> None:
    if hi <= lo:
        return
    grid = np.linspace(lo, hi, n_grid)
    vals = np.asarray([f(v) for v in grid], dtype=float)
    slopes = np.abs(np.diff(vals)) / np.diff(grid)
    if np.max(slopes) > 1.0 + 1e-9:
        raise NonLipschitzError(f"finite-difference slope {np.max(slopes):.6g} exceeds 1")


def w1_dual_check(A, B, test_functions: Sequence[Callable[[float], float]]) -> float:
    """Largest ``|int f dA - int f dB|`` over 1-Lipschitz test functions.

    By Kantorovich duality the result never exceeds ``wasserstein_p(A, B, 1)``.
    Each function is screened by finite differences over the pooled range.
    """
    A, B = _as_cloud(A), _as_cloud(B)
    lo = min(A.samples[0], B.samples[0])
    hi = max(A.samples[-1], B.samples[-1])
    gap = 0.0
    for f in test_functions:
        _check_lipschitz(f, lo, hi)
        fa = np.mean([f(v) for v in A.samples])
        fb = np.mean([f(v) for v in B.samples])
        gap = max(gap, abs(float(fa - fb)))
    return gap


def deviation_frequency(
    runs: Sequence[float], center: float, offset: float, u_grid: Sequence[float]
) -> list[float]:
    """Fraction of runs with ``|average - center| >= u + offset`` for each ``u``."""
    dev = np.abs(np.asarray(runs, dtype=float) - center)
    return [float(np.mean(dev >= u + offset)) for u in u_grid]


def bootstrap_w1_stderr(
    A, B, n_boot: int = 200, seed: int = 0, p: float = 1.0
) -> float:
    """Nonparametric bootstrap standard error of the empirical W_p.

    Both clouds are resampled independently. Resampling a sorted cloud via
    per-point counts keeps it sorted, so no re-sort is needed.
    """
    A, B = _as_cloud(A), _as_cloud(B)
    gen = np.random.default_rng(seed)
    n, m = len(A), len(B)
    stats = np.empty(n_boot)
    for i in range(n_boot):
        ca = np.bincount(gen.integers(0, n, n), minlength=n)
        cb = np.bincount(gen.integers(0, m, m), minlength=m)
        stats[i] = _sorted_distance(np.repeat(A.samples, ca), np.repeat(B.samples, cb), p)
    return float(stats.std(ddof=1))


def bootstrap_mean_stderr(values: np.ndarray, n_boot: int = 200, seed: int = 0) -> np.ndarray:
    """Bootstrap standard error of column means of an (n_replicas, k) array."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    gen = np.random.default_rng(seed)
    pvals = np.full(n, 1.0 / n)
    boot = np.empty((n_boot, values.shape[1]))
    for start in range(0, n_boot, 16):
        stop = min(start + 16, n_boot)
        weights = gen.multinomial(n, pvals, size=stop - start) / n
        boot[start:stop] = weights @ values
    return boot.std(axis=0, ddof=1)


def write_curve_csv(path, t, w1_hat, stderr) -> None:
    write_csv(path, ["t", "W1_hat", "stderr"], zip(t, w1_hat, stderr))

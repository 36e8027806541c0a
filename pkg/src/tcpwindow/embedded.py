"""The embedded chain of post-jump positions and its invariant law.

The chain obeys ``X_{n+1} = Q_{n+1} sqrt(X_n^2 + 2 E_{n+1})``: the square root
of an autoregressive process with random coefficient ``Q^2`` and innovation
``2 Q^2 E``. Its invariant law is the law of
``sqrt(2 sum_n Q_1^2 ... Q_n^2 E_n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, partial
from typing import Callable

import numpy as np
from scipy import integrate, interpolate

from .io import write_csv
from .laws import Dirac, MultiplicativeLaw
from .rng import DEFAULT_BLOCK_SIZE, Stream, map_blocks

_TAIL_TOL = 5e-13
_EPS = np.finfo(float).eps
# the computed sum is noise once it falls below this many ulps of sum(|terms|)
_CANCEL_ULPS = 64.0


class DivergentMGF(ValueError):
    """``E exp(s X^2)`` is infinite (``2 s q^2 >= 1``)."""


class NonConvergent(ArithmeticError):
    """The density series cannot be evaluated to tolerance at this point."""


@dataclass(frozen=True)
class ChainState:
    value: float
    step: int = 0

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("chain state must be nonnegative")


def chain_step(x, e, q):
    """One transition ``q * sqrt(x^2 + 2e)``; broadcasts over arrays."""
    r = np.asarray(q) * np.sqrt(np.square(x) + 2.0 * np.asarray(e))
    return float(r) if np.ndim(r) == 0 else r


def default_depth(q: float) -> int:
    """Smallest ``N`` with ``q^(2(N+1)) / (1 - q^2) < 5e-13``."""
    if q >= 1.0:
        raise ValueError("no geometric tail when ess sup Q = 1; set truncation_depth explicitly")
    if q == 0.0:
        return 1
    q2 = q * q
    n = math.ceil(math.log(_TAIL_TOL * (1.0 - q2)) / math.log(q2)) - 1
    n = max(n, 1)
    while q2 ** (n + 1) / (1.0 - q2) >= _TAIL_TOL:
        n += 1
    return n


@dataclass(frozen=True)
class InvariantLawSpec:
    jump_law: MultiplicativeLaw
    truncation_depth: int | None = None
    density_terms: int | None = None

    def __post_init__(self) -> None:
        if self.truncation_depth is None:
            object.__setattr__(self, "truncation_depth", default_depth(self.jump_law.essential_sup))
        if self.truncation_depth < 1:
            raise ValueError("truncation_depth must be >= 1")
        if self.density_terms is not None and self.density_terms < 1:
            raise ValueError("density_terms must be >= 1")

    @property
    def tail_mean(self) -> float:
        """Mean of the neglected tail ``2 sum_{n>N} q^{2n} E_n`` (an upper bound)."""
        q2 = self.jump_law.essential_sup ** 2
        if q2 >= 1.0:
            return math.inf
        return 2.0 * q2 ** (self.truncation_depth + 1) / (1.0 - q2)


def sample_invariant_many(spec: InvariantLawSpec, n: int, stream: Stream) -> np.ndarray:
    """``n`` draws of ``sqrt(2 sum_{k<=N} Q_1^2...Q_k^2 E_k)``."""
    acc = np.zeros(n)
    prod = np.ones(n)
    for _ in range(spec.truncation_depth):
        q = stream.factors(spec.jump_law, n)
        e = stream.exponentials(n)
        prod = prod * q * q
        acc += prod * e
    return np.sqrt(2.0 * acc)


def sample_invariant(spec: InvariantLawSpec, stream: Stream) -> float:
    return float(sample_invariant_many(spec, 1, stream)[0])


def _invariant_block(spec, stream: Stream, count: int) -> np.ndarray:
    return sample_invariant_many(spec, count, stream)


def invariant_draws(
    spec: InvariantLawSpec,
    n: int,
    root_seed: int,
    stream_offset: int = 0,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> np.ndarray:
    return map_blocks(partial(_invariant_block, spec), n, root_seed, stream_offset, block_size, workers)


def kernel_expectation(
    f: Callable[[np.ndarray], np.ndarray],
    x: float,
    law: MultiplicativeLaw,
    n_mc: int,
    stream: Stream,
) -> tuple[float, float]:
    """Monte Carlo ``(Kf)(x) = E f(Q sqrt(x^2 + 2E))`` and its standard error.

    ``f`` is applied to an array of draws.
    """
    e = stream.exponentials(n_mc)
    q = stream.factors(law, n_mc)
    vals = np.asarray(f(chain_step(x, e, q)), dtype=float) * np.ones(n_mc)
    se = float(vals.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    return float(vals.mean()), se


def mgf_invariant(
    s: float,
    law: MultiplicativeLaw,
    n_mc: int = 100_000,
    depth: int = 200,
    stream: Stream | None = None,
) -> tuple[float, float]:
    """``E exp(s X^2)`` under the invariant law via the product identity.

    The value is ``E prod_n (1 - 2 s Q_1^2...Q_n^2)^(-1)``, truncated at
    ``depth``. For a Dirac law the product is deterministic and the returned
    standard error is 0; otherwise the expectation is estimated by Monte Carlo
    over ``n_mc`` factor sequences from ``stream``.
    """
    q = law.essential_sup
    if 2.0 * s * q * q >= 1.0:
        raise DivergentMGF(f"2 s q^2 = {2.0 * s * q * q:g} >= 1: the moment generating function is infinite")
    if s == 0.0:
        return 1.0, 0.0
    if isinstance(law, Dirac):
        d2 = law.delta**2
        log_val = 0.0
        p = 1.0
        for _ in range(depth):
            p *= d2
            if p == 0.0:
                break
            log_val -= math.log1p(-2.0 * s * p)
        return math.exp(log_val), 0.0
    if stream is None:
        raise ValueError("a stream is needed for non-Dirac laws")
    log_val = np.zeros(n_mc)
    p = np.ones(n_mc)
    for _ in range(depth):
        qq = stream.factors(law, n_mc)
        p = p * qq * qq
        log_val -= np.log1p(-2.0 * s * p)
    vals = np.exp(log_val)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_mc))


@lru_cache(maxsize=64)
def _density_series(delta: float, max_terms: int = 400) -> tuple[np.ndarray, np.ndarray, float]:
    """Coefficients ``c_n``, Gaussian rates ``a_n = delta^(-2n)`` and normalizer."""
    coef, rate = [], []
    prod = 1.0
    for n in range(1, max_terms + 1):
        a_n = delta ** (-2 * n)
        c_n = (-1) ** (n - 1) * a_n / prod
        if not (math.isfinite(a_n) and math.isfinite(c_n)) or c_n == 0.0:
            break
        coef.append(c_n)
        rate.append(a_n)
        prod *= abs(1.0 - a_n)
        if not math.isfinite(prod):
            break
    norm = 1.0
    k = 1
    while True:
        factor = 1.0 - delta ** (2 * k)
        norm *= factor
        if 1.0 - factor < 1e-18:
            break
        k += 1
    return np.asarray(coef), np.asarray(rate), norm


def invariant_density(x, delta: float, M: int | None = None, strict: bool = True):
    """Density of the invariant law for a Dirac(``delta``) factor.

    Evaluates the alternating series
    ``sum_n (-1)^(n-1) delta^(-2n) / prod_{k<n} |1 - delta^(-2k)| * x exp(-delta^(-2n) x^2 / 2)``
    divided by ``prod_n (1 - delta^(2n))``, adding terms in increasing ``n``
    with compensated summation. With ``M=None`` terms are added until the
    next one is below ``1e-14`` of the running sum.

    The terms cancel heavily near ``x = 0`` (and for ``delta`` near 1). Where
    the sum is swamped by rounding, ``strict=True`` raises
    :class:`NonConvergent`; ``strict=False`` returns 0 there, which is within
    the rounding floor of the true (nonnegative) value.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise ValueError("density is defined on x >= 0")
    coef, rate, norm = _density_series(float(delta))
    # terms past coef.size underflow to exactly zero
    n_terms = coef.size if M is None else min(M, coef.size)
    total = np.zeros_like(xs)
    comp = np.zeros_like(xs)
    mass = np.zeros_like(xs)
    converged = np.zeros(xs.shape, dtype=bool) if M is None else np.ones(xs.shape, dtype=bool)
    half_sq = 0.5 * xs * xs
    for n in range(n_terms):
        term = coef[n] * xs * np.exp(-rate[n] * half_sq)
        if M is None:
            newly = (~converged) & (np.abs(term) < 1e-14 * np.abs(total)) & (n > 0)
            converged |= newly
            term = np.where(converged, 0.0, term)
        # Neumaier-compensated accumulation
        s = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - s) + term, (term - s) + total)
        total = s
        mass += np.abs(term)
    value = (total + comp) / norm
    noisy = (np.abs(total + comp) <= _CANCEL_ULPS * _EPS * mass) & (xs > 0)
    if np.any(noisy):
        if strict:
            bad = xs[noisy]
            raise NonConvergent(
                f"series cancellation swamps the density at x={bad.min():.6g}"
                + (f"..{bad.max():.6g}" if bad.size > 1 else "")
            )
        value = np.where(noisy, 0.0, value)
    return float(value[0]) if np.ndim(x) == 0 else value


def invariant_cdf_closed_form(x, delta: float):
    """CDF from the exact antiderivative of each series term.

    Kept separate from :func:`invariant_cdf` so the two can check each other.
    """
    coef, rate, norm = _density_series(float(delta))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    parts = (coef / rate)[None, :] * -np.expm1(-0.5 * rate[None, :] * (xs * xs)[:, None])
    out = parts.sum(axis=1) / norm
    return float(out[0]) if np.ndim(x) == 0 else out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def invariant_cdf(x, delta: float, step: float = 0.002):
    """CDF of the invariant law from the series density.

    The density is integrated by 12-point Gauss-Legendre on a uniform grid of
    spacing ``step`` and the cumulative values are joined by a cubic Hermite
    spline whose slopes are the density itself. Cost is independent of the
    number of query points beyond one spline evaluation.
    """
    xs = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xs).ravel()
    if np.any(flat < 0):
        raise ValueError("CDF queried at negative x")
    top = float(flat.max()) if flat.size else 0.0
    grid = np.arange(0.0, top + 2 * step, step)
    lo, hi = grid[:-1], grid[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    dens = invariant_density(nodes.ravel(), delta, strict=False).reshape(nodes.shape)
    cum = np.concatenate(([0.0], np.cumsum(half * (dens @ _GL_WEIGHTS))))
    slope = invariant_density(grid, delta, strict=False)
    out = interpolate.CubicHermiteSpline(grid, cum, slope)(flat)
    return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)


def invariant_expectation(f: Callable[[float], float], delta: float) -> float:
    """``int f dnu`` by adaptive quadrature against the series density."""
    upper = 12.0 / delta
    val, _ = integrate.quad(
        lambda v: f(v) * invariant_density(v, delta, strict=False), 0.0, upper, limit=400,
        epsabs=1e-13, epsrel=1e-12,
    )
    return float(val)


def density_integral(delta: float) -> float:
    """Total mass of the series density by adaptive quadrature."""
    return invariant_expectation(lambda v: 1.0, delta)


def ergodic_averages(
    f: Callable[[np.ndarray], np.ndarray],
    x0: float,
    n: int,
    law: MultiplicativeLaw,
    stream: Stream,
    n_runs: int = 1,
) -> np.ndarray:
    """``(1/n) sum_{k=1}^n f(X_k)`` for ``n_runs`` chains started at ``x0``.

    ``f`` must accept arrays. Chains advance together, one step per draw of
    ``(E, Q)`` vectors.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.full(n_runs, float(x0))
    acc = np.zeros(n_runs)
    comp = np.zeros(n_runs)
    for _ in range(n):
        e = stream.exponentials(n_runs)
        q = stream.factors(law, n_runs)
        x = q * np.sqrt(x * x + 2.0 * e)
        # Kahan summation keeps long averages of constants exact
        y = np.asarray(f(x), dtype=float) - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc / n


def ergodic_average(
    f: Callable[[np.ndarray], np.ndarray], x0: float, n: int, law: MultiplicativeLaw, stream: Stream
) -> float:
    return float(ergodic_averages(f, x0, n, law, stream, 1)[0])


def _ergodic_block(f, x0, n, law, stream: Stream, count: int) -> np.ndarray:
    return ergodic_averages(f, x0, n, law, stream, count)


def ergodic_runs(
    f, x0: float, n: int, law: MultiplicativeLaw, n_runs: int, root_seed: int,
    stream_offset: int = 0, block_size: int = DEFAULT_BLOCK_SIZE, workers: int = 1,
) -> np.ndarray:
    """Independent ergodic averages, one per run, reproducible by run index."""
    fn = partial(_ergodic_block, f, float(x0), int(n), law)
    return map_blocks(fn, n_runs, root_seed, stream_offset, block_size, workers)


def chain_trajectories(x0, n_steps: int, law: MultiplicativeLaw, stream: Stream, n_chains: int) -> np.ndarray:
    """``(n_chains, n_steps + 1)`` array of embedded-chain states starting from ``x0``."""
    out = np.empty((n_chains, n_steps + 1))
    x = np.broadcast_to(np.asarray(x0, dtype=float), (n_chains,)).copy()
    out[:, 0] = x
    for k in range(1, n_steps + 1):
        e = stream.exponentials(n_chains)
        q = stream.factors(law, n_chains)
        x = q * np.sqrt(x * x + 2.0 * e)
        out[:, k] = x
    return out


def write_invariant_table(path, xs, delta: float) -> None:
    xs = np.asarray(xs, dtype=float)
    dens = invariant_density(xs, delta, strict=False)
    cdf = invariant_cdf(xs, delta)
    write_csv(path, ["x", "density", "cdf"], zip(xs, dens, cdf))

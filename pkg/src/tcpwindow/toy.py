"""A Markov chain on {2^-i} that mimics the coupled distance process.

From state ``x`` the chain moves to 1 with probability ``x/2`` and to ``x/2``
otherwise. Distributions are propagated exactly: after ``n`` steps every
probability is an integer over ``2^(n(n+1)/2)``, so moment identities can be
checked with no rounding or Monte Carlo error at all.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .io import write_csv


@dataclass(frozen=True)
class DyadicDistribution:
    """Probabilities ``numerators[i] / 2^log2_denominator`` of state ``2^-i``."""

    numerators: tuple[int, ...]
    log2_denominator: int

    @property
    def probs(self) -> dict[int, Fraction]:
        den = 1 << self.log2_denominator
        return {i: Fraction(p, den) for i, p in enumerate(self.numerators) if p}

    def total(self) -> Fraction:
        return Fraction(sum(self.numerators), 1 << self.log2_denominator)

    def moment(self, k: int) -> Fraction:
        """``E X^k`` with ``X = 2^-i``."""
        top = len(self.numerators) - 1
        num = sum(p << (k * (top - i)) for i, p in enumerate(self.numerators))
        return Fraction(num, 1 << (self.log2_denominator + k * top))


def dirac(i: int = 0) -> DyadicDistribution:
    return DyadicDistribution(tuple([0] * i + [1]), 0)


def toy_step(d: DyadicDistribution) -> DyadicDistribution:
    """Exact one-step pushforward.

    Mass at ``2^-i`` sends ``2^-(i+1)`` of itself to state 1 and the rest to
    ``2^-(i+1)``. Everything is rescaled to the common denominator
    ``2^(D + m)`` where ``m`` is the new top exponent.
    """
    m = len(d.numerators)
    out = [0] * (m + 1)
    for i, p in enumerate(d.numerators):
        if not p:
            continue
        scale = m - (i + 1)
        out[0] += p << scale
        out[i + 1] += (p * ((1 << (i + 1)) - 1)) << scale
    return DyadicDistribution(tuple(out), d.log2_denominator + m)


# most recently computed (n, law); probabilities grow like n^3 bits in total
_LAST: list = [0, dirac(0)]


def distribution_after(n: int) -> DyadicDistribution:
    """Law of ``X_n`` given ``X_0 = 1``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    k, d = _LAST if _LAST[0] <= n else (0, dirac(0))
    while k < n:
        d = toy_step(d)
        k += 1
    _LAST[:] = [k, d]
    return d


# exact (E X_n, E X_n^2) for n = 0, 1, ...; extended on demand
_MOMENTS: list[tuple[Fraction, Fraction]] = []


def toy_moment_exact(n: int, k: int) -> Fraction:
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if n < 0:
        raise ValueError("n must be >= 0")
    while len(_MOMENTS) <= n:
        d = distribution_after(len(_MOMENTS))
        _MOMENTS.append((d.moment(1), d.moment(2)))
    return _MOMENTS[n][k - 1]


def toy_moments(n: int, k: int) -> float:
    """``E(X_n^k | X_0 = 1)`` for ``k`` in {1, 2}."""
    return float(toy_moment_exact(n, k))


def recursion_residual(n: int) -> Fraction:
    """``E X_{n+1} - (E X_n - E X_n^2 / 4)``; identically zero."""
    return toy_moment_exact(n + 1, 1) - (toy_moment_exact(n, 1) - toy_moment_exact(n, 2) / 4)


def decay_bound(n: int) -> Fraction:
    """``(6/7)(7/8)^n``."""
    return Fraction(6, 7) * Fraction(7, 8) ** n


def toy_escape_probability(depth: int) -> float:
    """``prod_{i=1}^{depth} (1 - 2^-i)``: probability of halving ``depth`` times in a row from 1."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    p = 1.0
    for i in range(1, depth + 1):
        p *= 1.0 - 2.0**-i
    return p


def moment_table(n_max: int) -> list[tuple[int, float, float, float]]:
    return [
        (n, toy_moments(n, 1), toy_moments(n, 2), float(decay_bound(n)))
        for n in range(n_max + 1)
    ]


def write_moment_table(path, n_max: int) -> None:
    write_csv(path, ["n", "E_Xn", "E_Xn2", "bound_(6/7)(7/8)^n"], moment_table(n_max))

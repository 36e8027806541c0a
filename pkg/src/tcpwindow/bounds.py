"""Closed-form values of the convergence and concentration bounds.

Evaluators return raw theoretical numbers. Comparison against Monte Carlo
estimates, with the uniform three-standard-error rule, happens only in
:class:`BoundReport`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

from .io import canonical_json
from .laws import MultiplicativeLaw

#: Number of standard errors allowed between estimate and bound, everywhere.
N_SIGMA = 3.0

_DEGENERATE_GAP = 1e-9


class DegenerateSpectrum(ArithmeticError):
    """Two decay rates theta_i, theta_j coincide; the moment formula breaks down."""


def embedded_contraction_bound(p: float, n: int, law: MultiplicativeLaw, w0: float) -> float:
    """``E(Q^p)^(n/p) * w0``: W_p after ``n`` embedded-chain steps."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return float(w0)
    return law.moment(p) ** (n / p) * w0


def _exp_decay(rate: float, t: float, w0: float) -> float:
    return w0 * math.exp(-rate * t)


def continuous_decay_bound(a: float, kappa1: float, t: float, w0: float) -> float:
    """``exp(-a kappa1 t) * w0`` for the shifted-rate process."""
    return _exp_decay(a * kappa1, t, w0)


def mean_bound(kappa1: float, t: float) -> float:
    """Uniform bound ``1 / (d tanh(d t))``, ``d = sqrt(kappa1)``, on ``E(X_t | X_0 = x)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    d = math.sqrt(kappa1)
    return 1.0 / (d * math.tanh(d * t))


def riccati_solution(x: float, kappa1: float, t: float) -> float:
    """Solution of ``b' = 1 - kappa1 b^2``, ``b(0) = x``, which dominates the mean."""
    d = math.sqrt(kappa1)
    ch, sh = math.cosh(d * t), math.sinh(d * t)
    return (d * x * ch + sh) / (d * (d * x * sh + ch))


def strong_ergodicity_bound(a: float, kappa1: float, s: float, t: float) -> float:
    """``2 exp(a kappa1 s) / (d tanh(d s)) * exp(-a kappa1 t)``, uniform in the initial laws."""
    if not (0 < s < t):
        raise ValueError("need 0 < s < t")
    return 2.0 * math.exp(a * kappa1 * s) * mean_bound(kappa1, s) * math.exp(-a * kappa1 * t)


def real_tcp_bound(h: float, d0: float, t: float) -> float:
    """``d0 / (1 + (1 + h) d0 t)`` for rate ``x`` and a Dirac(h) factor."""
    if not (0 < h < 1):
        raise ValueError("h must lie in (0, 1)")
    if d0 < 0:
        raise ValueError("d0 must be nonnegative")
    return d0 / (1.0 + (1.0 + h) * d0 * t)


def theta(p: float, lam: float, law: MultiplicativeLaw) -> float:
    """``lam (1 - E Q^p)``, with ``theta_0 = 0``."""
    if p == 0:
        return 0.0
    return lam * (1.0 - law.moment(p))


def constant_rate_decay(lam: float, p: float, law: MultiplicativeLaw, t: float, w0: float) -> float:
    """``w0 exp(-theta_p t / p)``: W_p decay under a constant jump rate."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return _exp_decay(theta(p, lam, law) / p, t, w0)


def moments_constant_rate(n: int, x: float, lam: float, law: MultiplicativeLaw, t: float) -> float:
    """Exact ``E(X_t^n | X_0 = x)`` for the constant-rate process.

    ``n!/prod_k theta_k + n! sum_m (sum_{k<=m} x^k/k! prod_{j=k..n, j!=m} 1/(theta_j - theta_m)) exp(-theta_m t)``
    with ``theta_0 = 0``. Raises :class:`DegenerateSpectrum` when two of
    ``theta_0..theta_n`` are closer than 1e-9.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1.0
    th = [theta(k, lam, law) for k in range(n + 1)]
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            if abs(th[i] - th[j]) < _DEGENERATE_GAP:
                raise DegenerateSpectrum(f"theta_{i} = {th[i]!r} and theta_{j} = {th[j]!r} coincide")
    fact = math.factorial(n)
    total = fact / math.prod(th[1:])
    for m in range(1, n + 1):
        inner = 0.0
        for k in range(m + 1):
            prod = 1.0
            for j in range(k, n + 1):
                if j != m:
                    prod /= th[j] - th[m]
            inner += x**k / math.factorial(k) * prod
        total += fact * inner * math.exp(-th[m] * t)
    return total


def gross_constants(delta: float, n: int) -> tuple[float, float]:
    """Log-Sobolev constants of the n-step kernel and of the invariant law (Dirac(delta) factor)."""
    if not (0 <= delta < 1):
        raise ValueError("delta must lie in [0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    d2 = delta * delta
    kernel_n = 2.0 * d2 * (1.0 - d2**n) / (1.0 - d2)
    invariant = 2.0 * d2 / (1.0 - d2)
    return kernel_n, invariant


def concentration_bound(delta: float, n: int, u: float) -> float:
    """``min(1, 2 exp(-n (1 - delta^2) u^2 / (2 delta^2)))``."""
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    if u < 0:
        raise ValueError("u must be nonnegative")
    return min(1.0, 2.0 * math.exp(-n * (1.0 - delta * delta) * u * u / (2.0 * delta * delta)))


@dataclass(frozen=True)
class BoundReport:
    """A theoretical value next to a Monte Carlo estimate.

    ``relation`` is ``"upper"`` (estimate must not exceed the bound),
    ``"lower"`` (estimate must not fall below it) or ``"match"`` (two-sided
    agreement), each with a slack of ``N_SIGMA * mc_stderr``. Deterministic
    comparisons set ``tolerance`` instead; the slack is the larger of the two.
    """

    name: str
    parameters: dict[str, Any]
    theoretical_value: float
    mc_estimate: float
    mc_stderr: float
    relation: str = "upper"
    tolerance: float = 0.0
    satisfied: bool = field(init=False)

    def __post_init__(self) -> None:
        if not self.mc_stderr >= 0:
            raise ValueError("mc_stderr must be nonnegative")
        if not self.tolerance >= 0:
            raise ValueError("tolerance must be nonnegative")
        slack = max(N_SIGMA * self.mc_stderr, self.tolerance)
        if self.relation == "upper":
            ok = self.mc_estimate <= self.theoretical_value + slack
        elif self.relation == "lower":
            ok = self.mc_estimate >= self.theoretical_value - slack
        elif self.relation == "match":
            ok = abs(self.mc_estimate - self.theoretical_value) <= slack
        else:
            raise ValueError(f"unknown relation {self.relation!r}")
        object.__setattr__(self, "satisfied", bool(ok))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def line(self) -> str:
        tag = "PASS" if self.satisfied else "FAIL"
        return (
            f"[{tag}] {self.name} {self.parameters}: mc={self.mc_estimate:.6g} "
            f"+/- {self.mc_stderr:.3g} vs {self.relation} {self.theoretical_value:.6g}"
        )

"""Laws of the multiplicative jump factor Q, supported in [0, 1)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

import numpy as np

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Dirac:
    """Deterministic factor: every jump multiplies the window by ``delta``."""

    delta: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.delta < 1.0):
            raise ValueError(f"Dirac factor must lie in [0, 1), got {self.delta}")

    def sample(self, generator: np.random.Generator, size: int | None = None):
        if size is None:
            return float(self.delta)
        return np.full(size, float(self.delta))

    def moment(self, p: float) -> float:
        return float(self.delta) ** p

    @property
    def essential_sup(self) -> float:
        return float(self.delta)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "dirac", "delta": self.delta}


@dataclass(frozen=True)
class Uniform01:
    """Uniform factor on [0, 1)."""

    def sample(self, generator: np.random.Generator, size: int | None = None):
        return generator.random(size) if size is not None else float(generator.random())

    def moment(self, p: float) -> float:
        return 1.0 / (p + 1.0)

    @property
    def essential_sup(self) -> float:
        return 1.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "uniform"}


@dataclass(frozen=True)
class DiscreteMixture:
    """Finitely many atoms in [0, 1) with nonnegative weights summing to one."""

    atoms: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", tuple(float(a) for a in self.atoms))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.atoms) == 0 or len(self.atoms) != len(self.weights):
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if any(not (0.0 <= a < 1.0) for a in self.atoms):
            raise ValueError(f"atoms must lie in [0, 1), got {self.atoms}")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {sum(self.weights)!r}, expected 1")

    def sample(self, generator: np.random.Generator, size: int | None = None):
        atoms = np.asarray(self.atoms)
        idx = generator.choice(len(atoms), size=size, p=np.asarray(self.weights))
        return atoms[idx] if size is not None else float(atoms[idx])

    def moment(self, p: float) -> float:
        return float(sum(w * a**p for a, w in zip(self.atoms, self.weights)))

    @property
    def essential_sup(self) -> float:
        return max(a for a, w in zip(self.atoms, self.weights) if w > 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "mixture", "atoms": list(self.atoms), "weights": list(self.weights)}


MultiplicativeLaw = Union[Dirac, Uniform01, DiscreteMixture]


def kappa1(law: MultiplicativeLaw) -> float:
    """Mean contraction per jump, ``1 - E(Q)``."""
    return 1.0 - law.moment(1.0)


def law_from_dict(data: dict[str, Any]) -> MultiplicativeLaw:
    kind = data.get("kind")
    extra = set(data) - {"kind", "delta", "atoms", "weights"}
    if extra:
        raise ValueError(f"unknown jump_law keys: {sorted(extra)}")
    if kind == "dirac":
        return Dirac(float(data["delta"]))
    if kind == "uniform":
        return Uniform01()
    if kind == "mixture":
        return DiscreteMixture(tuple(data["atoms"]), tuple(data["weights"]))
    raise ValueError(f"unknown jump_law kind {kind!r}")

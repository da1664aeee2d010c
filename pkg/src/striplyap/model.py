"""Strip model: disorder sampling and symplectic transfer matrices.

The wire is the lattice Z x {1..L} with periodic transverse boundary.  One
disorder slice is a diagonal potential column v(1..L); the transfer matrix
propagating (psi(n+1), psi(n)) across a slice is

    T = [[ D_L + lam*V - E ,  -1 ],
         [       1         ,   0 ]]

with D_L the transverse hopping matrix (-S - S^t for L >= 3, the special
small-width conventions below otherwise).  T is symplectic for the standard
form J = [[0, -1], [1, 0]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class DisorderLaw:
    """Centered unit-variance i.i.d. on-site disorder.

    kind: "rademacher" (+-1), "uniform" (on [-sqrt(3), sqrt(3)]) or
    "gaussian".  Gaussian variates are produced by applying the inverse
    normal CDF to uniform draws, so a fixed bit stream maps to the same
    values on every platform (up to libm rounding in ``ndtri``).
    """

    kind: str = "rademacher"

    def __post_init__(self):
        if self.kind not in ("rademacher", "uniform", "gaussian"):
            raise ValueError(f"unknown disorder kind: {self.kind!r}")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "rademacher":
            return rng.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0
        if self.kind == "uniform":
            return (rng.random(size=size) * 2.0 - 1.0) * _SQRT3
        u = rng.random(size=size)
        # rng.random() can return exactly 0.0; keep ndtri finite.
        return ndtri(np.maximum(u, 1e-300))


@dataclass(frozen=True)
class StripModel:
    """Problem definition: width, energy, coupling, disorder law, seed."""

    width: int
    energy: float
    coupling: float
    disorder: DisorderLaw = field(default_factory=DisorderLaw)
    seed: int = 0

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if not (math.isfinite(self.energy) and math.isfinite(self.coupling)):
            raise ValueError("energy and coupling must be finite")

    def rng(self, stream: int = 0) -> np.random.Generator:
        return substream(self.seed, stream)


def substream(seed: int, stream: int) -> np.random.Generator:
    """Counter-based Philox generator for trajectory `stream` of `seed`.

    Philox is keyed by the 128-bit pair (seed, stream), so substreams are
    independent and reproducible without any jump-ahead bookkeeping.
    """
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF,
                                                     stream & 0xFFFFFFFFFFFFFFFF]))


def laplacian(L: int) -> np.ndarray:
    """Transverse hopping matrix D_L.

    -S - S^t with periodic boundary for L >= 3; the width-1 and width-2
    conventions are D_1 = 0 and D_2 = -S (single bond, not doubled).
    """
    if L == 1:
        return np.zeros((1, 1))
    if L == 2:
        return np.array([[0.0, -1.0], [-1.0, 0.0]])
    S = np.roll(np.eye(L), 1, axis=0)
    return -S - S.T


def laplacian_eigenvalues(L: int) -> np.ndarray:
    """Eigenvalues of D_L on the Fourier modes phi_1..phi_L (in that order)."""
    if L == 1:
        return np.zeros(1)
    ll = np.arange(1, L + 1)
    if L == 2:
        return -np.cos(np.pi * ll)
    return -2.0 * np.cos(2.0 * np.pi * ll / L)


def symplectic_form(L: int) -> np.ndarray:
    """Standard symplectic form J = [[0, -1], [1, 0]] on R^(2L)."""
    J = np.zeros((2 * L, 2 * L))
    J[:L, L:] = -np.eye(L)
    J[L:, :L] = np.eye(L)
    return J


def sample_column(model: StripModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one potential column v(1..L); advances the stream by L draws."""
    return model.disorder.sample(rng, model.width)


def build_transfer(model: StripModel, column: np.ndarray) -> np.ndarray:
    """Transfer matrix of one slice with potential `column`."""
    L = model.width
    column = np.asarray(column, dtype=np.float64)
    if column.shape != (L,):
        raise ValueError(f"column must have length {L}")
    T = np.zeros((2 * L, 2 * L))
    T[:L, :L] = laplacian(L) - model.energy * np.eye(L)
    T[:L, :L] += model.coupling * np.diag(column)
    T[:L, L:] = -np.eye(L)
    T[L:, :L] = np.eye(L)
    return T


def symplectic_residual(T: np.ndarray) -> float:
    """max |T^t J T - J|, scaled check quantity for symplecticity."""
    L = T.shape[0] // 2
    J = symplectic_form(L)
    return float(np.abs(T.T @ J @ T - J).max())

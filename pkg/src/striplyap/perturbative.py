"""Weak-disorder formulas for the exponents and the mean-field weights.

All second-order expressions take measured channel-weight moments (or the
closed mean-field weights) and the channel data; they carry an O(lam^3)
model error on top of the statistical error of the moments (O(lam^4) for
disorder with vanishing third moment).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HyperbolicPresent, MissingMoments, OutsideSpectrum
from .frames import WeightStats
from .spectral import ChannelData, free_spectrum_interval


def _h2(channels: ChannelData) -> np.ndarray:
    return np.array([c.h ** 2 for c in channels.channels])


def _nu(channels: ChannelData) -> np.ndarray:
    return np.array([float(c.nu) for c in channels.channels])


def _weight_matrix(channels: ChannelData) -> np.ndarray:
    """h_j^2 h_k^2 (2 - delta_jk), the quadratic-form kernel of the formulas."""
    h2 = _h2(channels)
    C = h2.shape[0]
    return np.outer(h2, h2) * (2.0 - np.eye(C))


def _require_bottom(channels: ChannelData, stats: WeightStats):
    if stats.p != channels.width:
        raise MissingMoments(
            f"bottom-slot moments need a full {channels.width}-frame, got p={stats.p}")


def gamma_bottom_formula(channels: ChannelData, stats: WeightStats,
                         lam: float) -> float:
    """Bottom exponent from last-slot second moments:

        (lam^2 / 8L) sum_{j,k} h_j^2 h_k^2 (2 - delta_jk) <rho_{L,j} rho_{L,k}>.
    """
    _require_bottom(channels, stats)
    K = _weight_matrix(channels)
    return float(lam ** 2 / (8.0 * channels.width)
                 * np.sum(K * stats.mean_second_bottom))


def gamma_sum_formula(channels: ChannelData, lam: float) -> float:
    """Sum of the non-negative exponents, elliptic spectra only:

        L lam^2 / 8 * (h_av^2)^2.
    """
    if not channels.all_elliptic:
        raise HyperbolicPresent(
            f"hyperbolic channels {channels.hyperbolic_indices} present")
    return float(channels.width * lam ** 2 / 8.0 * channels.h_av_sq ** 2)


def gamma_top_formula(channels: ChannelData, stats: WeightStats,
                      lam: float) -> float:
    """Top exponent from first-slot moments:

        (lam^2/4) [ sum_j h_av^2 h_j^2 <rho_{1,j}>
                    - (1/2L) sum_jk h_j^2 h_k^2 (2-delta_jk) <rho_{1,j} rho_{1,k}> ].
    """
    h2 = _h2(channels)
    rho1 = stats.mean_total[0]
    K = _weight_matrix(channels)
    sec = stats.mean_second_top
    return float(lam ** 2 / 4.0 * (channels.h_av_sq * np.dot(h2, rho1)
                 - np.sum(K * sec) / (2.0 * channels.width)))


def gamma_bottom_bounds(channels: ChannelData, lam: float,
                        band_edge: float | None = None
                        ) -> tuple[float, float | None]:
    """Lower bounds on the bottom exponent: lam^2/(8L) in the bulk, and the
    1/|eps| enhancement lam^2/(8L|eps|) at distance eps = E - E_b inside the
    band when a band edge is supplied."""
    L, E = channels.width, channels.energy
    lo, hi = free_spectrum_interval(L)
    if not (lo <= E <= hi):
        raise OutsideSpectrum(f"E={E} outside [{lo}, {hi}] for L={L}")
    bulk = lam ** 2 / (8.0 * L)
    edge = None
    if band_edge is not None:
        eps = E - band_edge
        if eps == 0.0:
            raise OutsideSpectrum("E coincides with the band edge")
        edge = lam ** 2 / (8.0 * L * abs(eps))
    return bulk, edge


@dataclass(frozen=True)
class MeanFieldWeights:
    """Closed solution of the factorized stationarity equations:
    <rho_{1,k}> = 1 / (1 + Z sin eta_k) with Z >= 0 fixing normalization."""

    rho1: np.ndarray
    Z: float

    def residual(self) -> float:
        return abs(float(self.rho1.sum()) - 1.0)


def meanfield_weights(channels: ChannelData, tol: float = 1e-12) -> MeanFieldWeights:
    """Solve sum_k 1/(1 + Z sin eta_k) = 1 for Z by bracketing plus Newton.

    The left side is strictly decreasing in Z, so the solution is unique;
    a single channel gives rho = 1, Z = 0.
    """
    if not channels.all_elliptic:
        raise HyperbolicPresent(
            f"hyperbolic channels {channels.hyperbolic_indices} present")
    sins = np.array([math.sin(c.eta) for c in channels.channels])
    C = sins.shape[0]
    if C == 1:
        return MeanFieldWeights(np.ones(1), 0.0)

    def f(Z):
        return float(np.sum(1.0 / (1.0 + Z * sins))) - 1.0

    z_hi = 1.0
    while f(z_hi) > 0.0:
        z_hi *= 2.0
    z_lo = 0.0
    for _ in range(200):
        z_mid = 0.5 * (z_lo + z_hi)
        if f(z_mid) > 0.0:
            z_lo = z_mid
        else:
            z_hi = z_mid
        if z_hi - z_lo < 1e-9 * max(1.0, z_hi):
            break
    Z = 0.5 * (z_lo + z_hi)
    for _ in range(100):
        r = f(Z)
        if abs(r) < tol:
            break
        fp = -float(np.sum(sins / (1.0 + Z * sins) ** 2))
        Z -= r / fp
        Z = max(Z, 0.0)
    if abs(f(Z)) > tol:
        raise ArithmeticError(f"normalization residual {f(Z)} above {tol}")
    return MeanFieldWeights(1.0 / (1.0 + Z * sins), Z)


def meanfield_stats(channels: ChannelData, mf: MeanFieldWeights) -> WeightStats:
    """First-slot statistics with factorized moments <rho rho> = <rho><rho>,
    for plugging the mean-field solution into the exponent formulas."""
    C = mf.rho1.shape[0]
    first = np.zeros((1, C, 2))
    first[0, :, 0] = mf.rho1 / 2.0
    first[0, :, 1] = mf.rho1 / 2.0
    sec = np.outer(mf.rho1, mf.rho1)
    third = mf.rho1[:, None, None] * mf.rho1[None, :, None] * mf.rho1[None, None, :]
    return WeightStats.from_moments(_nu(channels), first, sec, sec, third)


def meanfield_residual(channels: ChannelData, stats: WeightStats) -> np.ndarray:
    """Stationarity defect of the first-slot weight hierarchy, per channel k:

        (1/2L) [ nu_k h_k^2 sum_l h_l^2 <rho_l>
                 - (sum_m nu_m h_m^2) sum_l h_l^2 <rho_l rho_k>
                 + sum_{l,m} h_l^2 h_m^2 (2-delta_lm) <rho_l rho_m rho_k>
                 - h_k^2 sum_l h_l^2 (2-delta_kl) <rho_l rho_k> ]

    Expected O(lam) + statistics on measured weights; a diagnostic, not a
    certified identity (the closed solution drops O(1/L) terms).
    """
    if stats.third_top_sum is None:
        raise MissingMoments("stationarity residual needs third moments")
    h2 = _h2(channels)
    nu = _nu(channels)
    L = channels.width
    rho = stats.mean_total[0]
    sec = stats.mean_second_top
    third = stats.mean_third_top
    C = h2.shape[0]
    term1 = nu * h2 * np.dot(h2, rho)
    term2 = float(np.dot(nu, h2)) * (h2 @ sec)
    K = np.outer(h2, h2) * (2.0 - np.eye(C))
    term3 = np.einsum("lm,lmk->k", K, third)
    term4 = h2 * (2.0 * (h2 @ sec) - h2 * np.diag(sec))
    return (term1 - term2 + term3 - term4) / (2.0 * L)

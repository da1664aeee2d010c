"""Symplectic normal form of the free transfer matrix and the perturbation.

The clean transfer matrix A = [[D_L - E, -1], [1, 0]] is conjugated by an
explicit real basis change M into a direct sum R of 2x2 blocks acting on
components (l, l+L): rotations R_e(eta) on elliptic modes and
[[mu/2, s], [s, mu/2]] with s = sqrt(mu^2/4 - 1) on hyperbolic ones, whose
eigenvalue pair is (kappa, 1/kappa), kappa = mu/2 + s.  For mu < -2 that
pair is negative, so the expanding eigenvector carries the '-' label of the
privileged basis below; channels record which label expands.

With disorder, M^-1 T M = R (1 - lam P) where P has a single non-zero block

    P = [[0, 0], [B, 0]],     B = g^2 h d* Vhat d h,

Vhat the Toeplitz matrix of the mode-space potential.  In the orthonormal
basis W (columns w+_1..w+_L, w-_1..w-_L of R-eigenvectors) the matrix
elements are exactly

    <w^tau_l | P | w^sigma_k> = tau * (i/2) * g_l * h_l h_k * vhat(sigma*k - tau*l).

M is symplectic for the standard form J when all channels are elliptic.
With hyperbolic channels present, M^t J M equals the channel-signed form
J_g = [[0, -g^2], [g^2, 0]] instead, and R(1 - lam P) preserves J_g exactly.
J_g-isotropic frames are the correct state space of the normal-form
dynamics; they map to standard J-isotropic frames under the orthogonal
relabeling diag(1, g^2), which only swaps the +- labels of hyperbolic
channels and leaves every total channel weight and expansion rate unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCase, NumericalDegeneracy
from .model import laplacian, symplectic_form
from .spectral import ChannelData

DEGENERACY_TOL = 1e-8


def fourier_matrix(L: int) -> np.ndarray:
    """Columns phi_1..phi_L, phi_l(k) = exp(2 pi i l k / L)/sqrt(L)."""
    k = np.arange(1, L + 1)
    return np.exp(2j * np.pi * np.outer(k, k) / L) / math.sqrt(L)


def real_eigenvector_matrix(L: int) -> np.ndarray:
    """Real orthogonal eigenbasis of D_L: sine/cosine combinations of phi."""
    k = np.arange(1, L + 1)
    m = np.zeros((L, L))
    m[:, L - 1] = 1.0 / math.sqrt(L)
    if L % 2 == 0 and L >= 2:
        m[:, L // 2 - 1] = np.cos(np.pi * k) / math.sqrt(L)
    for a in range(1, (L + 1) // 2):
        if 2 * a == L:
            continue
        m[:, a - 1] = math.sqrt(2.0 / L) * np.sin(2.0 * np.pi * a * k / L)
        m[:, L - a - 1] = math.sqrt(2.0 / L) * np.cos(2.0 * np.pi * a * k / L)
    return m


def reflection_matrix(L: int) -> np.ndarray:
    """Mode reflection S: e_l -> e_{L-l} (modes L and L/2 are fixed)."""
    S = np.zeros((L, L))
    for l in range(1, L + 1):
        tgt = (L - l) if l != L else L
        S[tgt - 1, l - 1] = 1.0
    return S


@dataclass(frozen=True)
class FourierPotential:
    """Mode-space potential: vhat(k) = (1/L) sum_l v(l) e^{2 pi i l k / L}."""

    vhat: np.ndarray   # length L, position k holds vhat(k), k = 0..L-1
    Vhat: np.ndarray   # L x L Hermitian Toeplitz, entry (a, b) = vhat(b - a)


def fourier_potential(column: np.ndarray) -> FourierPotential:
    v = np.asarray(column, dtype=np.float64)
    L = v.shape[0]
    # v is stored with v(l) at position l-1; the mode sum runs l = 1..L
    vhat = np.fft.ifft(np.roll(v, 1))
    idx = (np.arange(L)[None, :] - np.arange(L)[:, None]) % L
    return FourierPotential(vhat, vhat[idx])


@dataclass(frozen=True)
class NormalFormData:
    channels: ChannelData
    M: np.ndarray
    M_inv: np.ndarray
    R: np.ndarray
    W: np.ndarray                  # complex 2L x 2L
    pairing: np.ndarray            # M^t J M (= J when all channels elliptic)
    eta_hat: np.ndarray            # per frame slot expansion exponent
    slot_channels: tuple[int, ...]  # channel occupying each hyperbolic slot
    m: np.ndarray                  # real orthogonal mode basis
    d: np.ndarray                  # unitary with m = f d
    # per-Fourier-mode diagonals (position l-1 holds mode l)
    mu_f: np.ndarray
    eta_f: np.ndarray
    h_f: np.ndarray
    g_f: np.ndarray                # complex, 1 or i
    g2_f: np.ndarray               # real, +-1
    kappa_f: np.ndarray            # complex block eigenvalues

    @property
    def width(self) -> int:
        return self.channels.width

    def projection(self, j: int, sign: int) -> np.ndarray:
        """Channel projection pi_j^+- as a dense complex matrix."""
        cols = self.projection_columns(j, sign)
        Wc = self.W[:, cols]
        return Wc @ Wc.conj().T

    def projection_columns(self, j: int, sign: int) -> list[int]:
        """Indices of the W columns spanning the range of pi_j^+-."""
        L = self.width
        ch = self.channels.channels[j]
        off = 0 if sign > 0 else L
        return [off + l - 1 for l in ch.fourier_indices]

    def expanding_columns(self, j: int) -> list[int]:
        """W columns of the expanding eigendirections of hyperbolic channel j."""
        ch = self.channels.channels[j]
        if ch.elliptic:
            raise ValueError(f"channel {j} is elliptic")
        return self.projection_columns(j, ch.expanding_sign)


def build_normal_form(channels: ChannelData) -> NormalFormData:
    """Construct M, M^-1, R, W and the channel bookkeeping for `channels`.

    M is assembled from the explicit closed-form blocks (not as a product of
    intermediate factors); all exact identities are re-verified to 1e-8 and
    a NumericalDegeneracy is raised on failure.
    """
    L, E = channels.width, channels.energy
    f = fourier_matrix(L)
    m = real_eigenvector_matrix(L)
    d = f.conj().T @ m

    mu_f = channels.fourier_mu()
    four_to_ch = channels.fourier_channel_map()
    by_ch = {c.index: c for c in channels.channels}
    eta_f = np.array([by_ch[j].eta for j in four_to_ch])
    h_f = np.array([by_ch[j].h for j in four_to_ch])
    g_f = np.array([by_ch[j].g for j in four_to_ch], dtype=np.complex128)
    kappa_f = np.array([by_ch[j].kappa for j in four_to_ch], dtype=np.complex128)
    g2_f = (g_f ** 2).real

    H = np.diag(h_f)
    Hinv = np.diag(1.0 / h_f)
    G2 = np.diag(g2_f)
    Mu = np.diag(mu_f)
    Z = np.zeros((L, L))
    M = np.block([[m @ H, Z], [m @ (Mu / 2.0) @ H, m @ Hinv @ G2]])
    M_inv = np.block([[Hinv @ m.T, Z], [-0.5 * G2 @ Mu @ H @ m.T, G2 @ H @ m.T]])

    R = np.zeros((2 * L, 2 * L))
    for i in range(L):
        if abs(mu_f[i]) < 2.0:
            c, s = math.cos(eta_f[i]), math.sin(eta_f[i])
            blk = ((c, -s), (s, c))
        else:
            s = math.sqrt(mu_f[i] * mu_f[i] / 4.0 - 1.0)
            blk = ((mu_f[i] / 2.0, s), (s, mu_f[i] / 2.0))
        R[i, i], R[i, i + L] = blk[0]
        R[i + L, i], R[i + L, i + L] = blk[1]

    g = np.diag(g_f)
    W = np.block([[d.conj().T, d.T],
                  [-1j * g @ d.conj().T, 1j * g @ d.T]]) / math.sqrt(2.0)

    pairing = np.block([[Z, -G2], [G2, Z]])

    # hyperbolic frame slots, most expansive first
    hyp = sorted((c for c in channels.channels if not c.elliptic),
                 key=lambda c: -c.eta)
    eta_hat = np.zeros(L)
    slot_channels = []
    pos = 0
    for c in hyp:
        for _ in range(c.nu):
            eta_hat[pos] = c.eta
            slot_channels.append(c.index)
            pos += 1

    nf = NormalFormData(channels, M, M_inv, R, W, pairing, eta_hat,
                        tuple(slot_channels), m, d, mu_f, eta_f, h_f, g_f,
                        g2_f, kappa_f)

    A = np.zeros((2 * L, 2 * L))
    A[:L, :L] = laplacian(L) - E * np.eye(L)
    A[:L, L:] = -np.eye(L)
    A[L:, :L] = np.eye(L)
    J = symplectic_form(L)
    checks = {
        "M M_inv": np.abs(M @ M_inv - np.eye(2 * L)).max(),
        "conjugation": np.abs(M_inv @ A @ M - R).max(),
        "pairing": np.abs(M.T @ J @ M - pairing).max(),
        "W unitarity": np.abs(W.conj().T @ W - np.eye(2 * L)).max(),
    }
    worst = max(checks.values())
    if worst > DEGENERACY_TOL:
        raise NumericalDegeneracy(f"normal form residuals {checks}")
    return nf


@dataclass(frozen=True)
class PerturbationMatrix:
    P: np.ndarray        # real 2L x 2L, lower-left block only
    Ptilde: np.ndarray   # P + P^t

    @property
    def B(self) -> np.ndarray:
        L = self.P.shape[0] // 2
        return self.P[L:, :L]


def build_P(nf: NormalFormData, column: np.ndarray,
            lam: float | None = None) -> PerturbationMatrix:
    """Perturbation P = M^-1 [[0,0],[V,0]] M for one potential column.

    When `lam` is given, the factorization M^-1 T M = R(1 - lam P) is
    re-verified against the assembled transfer matrix and a
    NumericalDegeneracy is raised above 1e-8.
    """
    L = nf.width
    v = np.asarray(column, dtype=np.float64)
    if v.shape != (L,):
        raise ValueError(f"column must have length {L}")
    # B = g^2 h m^t V m h, computed in the real mode basis
    B = (nf.g2_f * nf.h_f)[:, None] * (nf.m.T @ (v[:, None] * nf.m)) * nf.h_f[None, :]
    P = np.zeros((2 * L, 2 * L))
    P[L:, :L] = B
    if lam is not None:
        from .model import StripModel, build_transfer
        model = StripModel(L, nf.channels.energy, lam)
        T = build_transfer(model, v)
        resid = np.abs(nf.M_inv @ T @ nf.M - nf.R @ (np.eye(2 * L) - lam * P)).max()
        if resid > DEGENERACY_TOL:
            raise NumericalDegeneracy(f"normal-form factorization residual {resid}")
    return PerturbationMatrix(P, P + P.T)


def perturbation_elements(nf: NormalFormData, column: np.ndarray) -> np.ndarray:
    """Closed-form W* P W: entry ((tau l),(sigma k)) is
    tau (i/2) g_l h_l h_k vhat(sigma k - tau l)."""
    L = nf.width
    vhat = fourier_potential(column).vhat
    out = np.empty((2 * L, 2 * L), dtype=np.complex128)
    ll = np.arange(1, L + 1)
    for ti, tau in ((0, 1), (1, -1)):
        for si, sig in ((0, 1), (1, -1)):
            arg = (sig * ll[None, :] - tau * ll[:, None]) % L
            out[ti * L:(ti + 1) * L, si * L:(si + 1) * L] = (
                tau * 0.5j * nf.g_f[:, None] * nf.h_f[:, None]
                * nf.h_f[None, :] * vhat[arg])
    return out


def moment_targets(channels: ChannelData, item: str, l: int, k: int | None = None,
                   tau: int = 1, sigma: int = 1):
    """Closed-form disorder expectations of basis matrix elements.

    item "ii":  E <w_l^tau|P|w_k^sigma><w_k^sigma|P|w_l^tau>
                = -tau sigma (1/4L) g_l g_k h_l^2 h_k^2
    item "iii": E <w_l^tau|P*|w_k^sigma><w_k^sigma|P|w_l^tau>
                = (1/4L) h_l^2 h_k^2
    item "iv":  elliptic l, k:
                E <w_l^s|Pt|w_k^-s><w_k^-s|Pt|w_l^s> = (1/L) h_l^2 h_k^2
    item "v":   E <w_l^s| |RP|^2 |w_l^s> = (1/2) h_av^2 h_l^2

    Items ii/iii exclude the diagonal case k = l with sigma = tau, where the
    product is not a plain second moment.  They also exclude k = l on
    doubly degenerate channels: there the mode-argument collisions make the
    expectation depend on how the unit vector splits over the two degenerate
    modes (for split (a, b) it carries a factor |a|^4 + 4|a|^2|b|^2 + |b|^4),
    so no choice-free closed form exists.  Item iv excludes the same
    degenerate diagonal.
    """
    by_ch = {c.index: c for c in channels.channels}
    L = channels.width
    cl = by_ch[l]
    if item == "v":
        return 0.5 * channels.h_av_sq * cl.h ** 2
    if k is None:
        raise InvalidCase("items ii-iv need a second channel index")
    ck = by_ch[k]
    if item in ("ii", "iii"):
        if l == k and tau == sigma:
            raise InvalidCase("diagonal case l=k, tau=sigma is excluded")
        if l == k and cl.nu == 2:
            raise InvalidCase(
                "degenerate diagonal l=k, nu=2: expectation depends on the "
                "split over the two degenerate modes")
        if item == "ii":
            return -tau * sigma * (1.0 / (4 * L)) * cl.g * ck.g * cl.h ** 2 * ck.h ** 2
        return (1.0 / (4 * L)) * cl.h ** 2 * ck.h ** 2
    if item == "iv":
        if not (cl.elliptic and ck.elliptic):
            raise InvalidCase("item iv holds for elliptic channels only")
        if l == k and cl.nu == 2:
            raise InvalidCase(
                "degenerate diagonal l=k, nu=2: expectation depends on the "
                "split over the two degenerate modes")
        return (1.0 / L) * cl.h ** 2 * ck.h ** 2
    raise InvalidCase(f"unknown item {item!r}")

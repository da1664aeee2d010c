"""Channel spectral data of the clean strip and the non-resonance check.

The free transfer matrix decomposes into 2x2 blocks over the transverse
Fourier modes, one per eigenvalue mu_l = eig_l(D_L) - E.  A mode is elliptic
for |mu| < 2 (rotation by eta, cos eta = mu/2), hyperbolic for |mu| > 2
(expansion rate eta, cosh eta = |mu|/2) and excluded as parabolic on the
boundary.  Modes l and L-l are degenerate by reflection and are grouped into
channels indexed j = 0..floor(L/2), channel 0 being the fundamental mode L.

Channels never assume a sign convention for hyperbolic mu: each hyperbolic
channel records the eigenvalue pair (kappa, 1/kappa) of its block, where
kappa = mu/2 + sqrt(mu^2/4 - 1) is negative for mu < -2.  The label of the
expanding basis vector (see normalform) is '+' for mu > 2 and '-' for
mu < -2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParabolicChannel
from .model import laplacian_eigenvalues

PARABOLIC_TOL = 1e-9


@dataclass(frozen=True)
class Channel:
    index: int                      # channel label j = 0..floor(L/2)
    fourier_indices: tuple[int, ...]  # mode numbers in 1..L (fundamental = L)
    mu: float
    kind: str                       # "elliptic" | "hyperbolic"
    eta: float                      # rotation angle in (0,pi) / expansion rate > 0
    g: complex                      # 1 (elliptic) or 1j (hyperbolic)
    h: float                        # sin(eta)^-1/2 or sinh(eta)^-1/2
    nu: int                         # degeneracy, 1 or 2
    kappa: complex                  # block eigenvalue: e^{i eta} or sign(mu) e^{sign(mu) eta}
    expanding_sign: int = 1         # hyperbolic only: +1 (mu>2) or -1 (mu<-2)

    @property
    def elliptic(self) -> bool:
        return self.kind == "elliptic"


@dataclass(frozen=True)
class ChannelData:
    """Full channel decomposition for one (L, E)."""

    width: int
    energy: float
    channels: tuple[Channel, ...]
    h_av_sq: float = field(default=0.0)

    @property
    def L_c(self) -> int:
        return self.width // 2

    @property
    def hyperbolic_indices(self) -> tuple[int, ...]:
        return tuple(c.index for c in self.channels if not c.elliptic)

    @property
    def L_h(self) -> int:
        """Hyperbolic channel count minus one (-1 when all elliptic)."""
        return len(self.hyperbolic_indices) - 1

    @property
    def all_elliptic(self) -> bool:
        return len(self.hyperbolic_indices) == 0

    @property
    def elliptic_channels(self) -> tuple[Channel, ...]:
        return tuple(c for c in self.channels if c.elliptic)

    def fourier_mu(self) -> np.ndarray:
        """mu per Fourier mode 1..L (array position l-1)."""
        mu = np.empty(self.width)
        for c in self.channels:
            for l in c.fourier_indices:
                mu[l - 1] = c.mu
        return mu

    def fourier_channel_map(self) -> np.ndarray:
        """Channel index per Fourier mode position."""
        m = np.empty(self.width, dtype=np.int64)
        for c in self.channels:
            for l in c.fourier_indices:
                m[l - 1] = c.index
        return m


def _elliptic_eta(mu: float) -> float:
    # e^{i eta} = (mu + i sqrt(4 - mu^2))/2, principal angle in (0, pi)
    return math.atan2(math.sqrt(max(4.0 - mu * mu, 0.0)), mu)


def _hyperbolic_eta(mu: float) -> float:
    # arccosh(|mu|/2) via log1p, accurate near the |mu| = 2 boundary
    delta = abs(mu) / 2.0 - 1.0
    return math.log1p(delta + math.sqrt(delta * (2.0 + delta)))


def channel_spectrum(L: int, E: float, parabolic_tol: float = PARABOLIC_TOL) -> ChannelData:
    """Classify the transverse modes of width L at energy E into channels.

    Raises ParabolicChannel when some |mu| is within 2*parabolic_tol of 2,
    where the phase/size eta degenerates.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    eigs = laplacian_eigenvalues(L)          # position l-1 holds mode l
    channels = []
    # channel j=0 is the fundamental mode L; then pairs {j, L-j}; mode L/2 alone
    groups: list[tuple[int, tuple[int, ...]]] = [(0, (L,))]
    for j in range(1, L // 2 + 1):
        if 2 * j == L:
            groups.append((j, (j,)))
        else:
            groups.append((j, (j, L - j)))
    for j, fidx in groups:
        mu = float(eigs[fidx[0] - 1] - E)
        if abs(abs(mu) - 2.0) <= 2.0 * parabolic_tol:
            raise ParabolicChannel(
                f"channel {j} of width {L} at E={E}: |mu|={abs(mu)} is parabolic")
        if abs(mu) < 2.0:
            eta = _elliptic_eta(mu)
            ch = Channel(j, fidx, mu, "elliptic", eta, 1.0 + 0.0j,
                         math.sin(eta) ** -0.5, len(fidx),
                         complex(math.cos(eta), math.sin(eta)))
        else:
            eta = _hyperbolic_eta(mu)
            sgn = 1 if mu > 0 else -1
            kappa = mu / 2.0 + math.sqrt(mu * mu / 4.0 - 1.0)
            ch = Channel(j, fidx, mu, "hyperbolic", eta, 1.0j,
                         math.sinh(eta) ** -0.5, len(fidx),
                         complex(kappa), expanding_sign=sgn)
        channels.append(ch)
    data = ChannelData(L, E, tuple(channels))
    return ChannelData(L, E, tuple(channels), h_av_squared(data))


def h_av_squared(channels: ChannelData) -> float:
    """Degeneracy-weighted average (1/L) sum nu_k h_k^2 cosh((1-g_k^2) eta_k).

    The cosh factor is 1 on elliptic channels and cosh(2 eta) on hyperbolic
    ones.
    """
    total = 0.0
    for c in channels.channels:
        factor = 1.0 if c.elliptic else math.cosh(2.0 * c.eta)
        total += c.nu * c.h ** 2 * factor
    return total / channels.width


def free_spectrum_interval(L: int) -> tuple[float, float]:
    """Spectrum of the clean operator: the set of E with a non-hyperbolic mode.

    [-4, 4] for even L > 2 and [-4, 2 + 2cos(pi/L)] for odd L > 1; the small
    widths follow their own hopping conventions: [-2, 2] for L = 1 and
    [-3, 3] for L = 2.
    """
    if L == 1:
        return (-2.0, 2.0)
    if L == 2:
        return (-3.0, 3.0)
    if L % 2 == 0:
        return (-4.0, 4.0)
    return (-4.0, 2.0 + 2.0 * math.cos(math.pi / L))


@dataclass(frozen=True)
class Violation:
    relation: str                   # "pair" | "quad"
    indices: tuple[int, ...]        # channel labels (k, j) or (k, l, m, j)
    sigma: int
    residual: float                 # |e^{i theta} - 1|


@dataclass(frozen=True)
class HypothesisReport:
    satisfied: bool
    violations: tuple[Violation, ...]
    warnings: tuple[Violation, ...]   # near-misses below the warning level
    tol: float

    def __post_init__(self):
        assert self.satisfied == (len(self.violations) == 0)


def check_main_hypothesis(channels: ChannelData, tol: float = 1e-6,
                          warn_tol: float = 1e-3) -> HypothesisReport:
    """Non-resonance of elliptic rotation phases.

    Over the elliptic channel phases eta, require |e^{i(eta_k + s*eta_j)} - 1|
    and |e^{i(eta_k + eta_l + s*(eta_m + eta_j))} - 1| to stay >= tol for
    s = +-1, excluding exactly the identically-resonant cases s=-1, j=k and
    s=-1, {k,l}={m,j}.  Only elliptic channels carry phases; hyperbolic rates
    never enter oscillatory sums.  Residuals below `warn_tol` are reported as
    warnings (the weak-disorder error grows near resonances).
    """
    ell = channels.elliptic_channels
    idx = np.array([c.index for c in ell], dtype=np.int64)
    eta = np.array([c.eta for c in ell])
    violations: list[Violation] = []
    warnings: list[Violation] = []
    n = len(ell)
    if n == 0:
        return HypothesisReport(True, (), (), tol)

    def _record(relation, indices, sigma, residual):
        if residual < tol:
            violations.append(Violation(relation, indices, sigma, residual))
        elif residual < warn_tol:
            warnings.append(Violation(relation, indices, sigma, residual))

    for sigma in (1, -1):
        # pairs: theta = eta_k + sigma*eta_j
        theta = eta[:, None] + sigma * eta[None, :]
        res = np.abs(np.exp(1j * theta) - 1.0)
        for a in range(n):
            for b in range(n):
                if sigma == -1 and a == b:
                    continue
                _record("pair", (int(idx[a]), int(idx[b])), sigma, float(res[a, b]))
        # quadruples: theta = eta_k + eta_l + sigma*(eta_m + eta_j)
        pairsum = eta[:, None] + eta[None, :]
        theta4 = pairsum[:, :, None, None] + sigma * pairsum[None, None, :, :]
        res4 = np.abs(np.exp(1j * theta4) - 1.0)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for d in range(n):
                        if sigma == -1 and {a, b} == {c, d}:
                            continue
                        _record("quad",
                                (int(idx[a]), int(idx[b]), int(idx[c]), int(idx[d])),
                                sigma, float(res4[a, b, c, d]))
    return HypothesisReport(len(violations) == 0, tuple(violations),
                            tuple(warnings), tol)

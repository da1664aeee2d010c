"""Symplectic frames, the orthonormalizing group action, and channel weights.

A p-frame is an orthonormal set u_1..u_p of real 2L-vectors whose pairwise
pairings <u_l|Jg|u_k> vanish, where Jg is the pairing preserved by the
normal-form dynamics (the standard J unless hyperbolic channels are
present, see normalform).  A symplectic matrix acts by mapping the columns
and re-orthonormalizing; the logged normalization factors are the per-slot
expansion rates whose time averages are the Lyapunov exponents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import MissingMoments, RankCollapse
from .model import StripModel, symplectic_form
from .normalform import NormalFormData


@dataclass(frozen=True)
class SymplecticFrame:
    """Column frame plus the pairing it is isotropic for."""

    columns: np.ndarray          # (2L, p)
    pairing: np.ndarray          # (2L, 2L) antisymmetric

    @property
    def p(self) -> int:
        return self.columns.shape[1]

    def residuals(self) -> tuple[float, float]:
        """(orthonormality defect, pairing defect), both max-norm."""
        u = self.columns
        ortho = float(np.abs(u.T @ u - np.eye(self.p)).max())
        iso = float(np.abs(u.T @ self.pairing @ u).max())
        return ortho, iso


def random_frame(rng: np.random.Generator, L: int, p: int,
                 pairing: np.ndarray | None = None) -> SymplecticFrame:
    """Random frame with full support: Gram-Schmidt of i.i.d. gaussians,
    orthogonalizing against the previous columns and their pairing partners.

    Near-degenerate draws are redrawn column by column.
    """
    if not 1 <= p <= L:
        raise ValueError("need 1 <= p <= L")
    J = symplectic_form(L) if pairing is None else pairing
    u = np.zeros((2 * L, p))
    for q in range(p):
        for _attempt in range(100):
            w = rng.standard_normal(2 * L)
            for _ in range(2):
                for r in range(q):
                    w -= (u[:, r] @ w) * u[:, r]
                    jr = J @ u[:, r]
                    w -= (jr @ w) * jr
            nrm = np.linalg.norm(w)
            if nrm > 1e-6:
                u[:, q] = w / nrm
                break
        else:
            raise RankCollapse("could not draw a non-degenerate frame")
    return SymplecticFrame(u, J)


@dataclass(frozen=True)
class StepResult:
    frame: SymplecticFrame
    log_expansions: np.ndarray   # entry q: log growth of the q-th slot


def frame_action(T: np.ndarray, frame: SymplecticFrame) -> StepResult:
    """Apply T to the frame columns and re-orthonormalize.

    Sequential orthonormalization with a positive diagonal realizes the
    action on each nested q-plane: the partial sums of `log_expansions`
    equal the log volume growth of the leading q-columns.
    """
    X = T @ frame.columns
    logexp = np.zeros(frame.p)
    _kernels._gram_schmidt_cols(X, logexp)
    return StepResult(SymplecticFrame(X, frame.pairing), logexp)


def channel_weights(frame: SymplecticFrame, nf: NormalFormData) -> np.ndarray:
    """Weight table rho[q, j, +-] = <u_q| pi_j^+- |u_q>.

    Per slot the weights resolve unity; over a full L-frame each channel
    column sums to its degeneracy nu_j.
    """
    a = nf.W.conj().T @ frame.columns           # (2L, p)
    absq = a.real ** 2 + a.imag ** 2
    L = nf.width
    C = len(nf.channels.channels)
    rho = np.zeros((frame.p, C, 2))
    four_to_ch = nf.channels.fourier_channel_map()
    for l in range(L):
        j = four_to_ch[l]
        rho[:, j, 0] += absq[l]
        rho[:, j, 1] += absq[L + l]
    return rho


@dataclass
class WeightStats:
    """Mergeable running moments of channel weights.

    Stores plain sums over retained steps; means are exposed as properties.
    Second moments are kept for the first and last frame slots (the ones the
    exponent formulas consume); `second_all` holds the full per-slot tables
    when requested.  Third moments of the first slot back the mean-field
    stationarity diagnostic.
    """

    n_samples: int
    p: int
    nu: np.ndarray
    first_sum: np.ndarray                 # (p, C, 2)
    second_bottom_sum: np.ndarray         # (C, C), last slot
    second_top_sum: np.ndarray            # (C, C), first slot
    third_top_sum: np.ndarray | None = None    # (C, C, C)
    second_all_sum: np.ndarray | None = None   # (p, C, C)

    @property
    def n_channels(self) -> int:
        return self.first_sum.shape[1]

    @property
    def mean_first(self) -> np.ndarray:
        return self.first_sum / self.n_samples

    @property
    def mean_total(self) -> np.ndarray:
        """<rho_{q,j}> = <rho^+> + <rho^->, shape (p, C)."""
        return self.mean_first.sum(axis=2)

    @property
    def mean_second_bottom(self) -> np.ndarray:
        return self.second_bottom_sum / self.n_samples

    @property
    def mean_second_top(self) -> np.ndarray:
        return self.second_top_sum / self.n_samples

    @property
    def mean_third_top(self) -> np.ndarray:
        if self.third_top_sum is None:
            raise MissingMoments("third moments were not accumulated")
        return self.third_top_sum / self.n_samples

    def merge(self, other: "WeightStats") -> "WeightStats":
        if self.p != other.p or self.n_channels != other.n_channels:
            raise ValueError("incompatible weight statistics")
        third = None
        if self.third_top_sum is not None and other.third_top_sum is not None:
            third = self.third_top_sum + other.third_top_sum
        sec_all = None
        if self.second_all_sum is not None and other.second_all_sum is not None:
            sec_all = self.second_all_sum + other.second_all_sum
        return WeightStats(self.n_samples + other.n_samples, self.p, self.nu,
                           self.first_sum + other.first_sum,
                           self.second_bottom_sum + other.second_bottom_sum,
                           self.second_top_sum + other.second_top_sum,
                           third, sec_all)

    @classmethod
    def from_moments(cls, nu: np.ndarray, first: np.ndarray,
                     second_bottom: np.ndarray, second_top: np.ndarray,
                     third_top: np.ndarray | None = None) -> "WeightStats":
        """Wrap externally supplied moment tables (n_samples = 1)."""
        return cls(1, first.shape[0], np.asarray(nu, dtype=float),
                   np.array(first, dtype=float),
                   np.array(second_bottom, dtype=float),
                   np.array(second_top, dtype=float),
                   None if third_top is None else np.array(third_top, dtype=float))


@dataclass
class TrajectoryResult:
    """One trajectory's statistics: weight moments plus expansion records."""

    stats: WeightStats
    logexp_sum: np.ndarray        # (p,) summed log expansions after burn-in
    n_steps: int                  # retained steps
    batch_logexp: np.ndarray      # (n_batches, p) per-batch sums
    batch_first: np.ndarray       # (n_batches, p, C, 2)
    batch_second_bottom: np.ndarray   # (n_batches, C, C)
    batch_second_top: np.ndarray      # (n_batches, C, C)
    batch_align: np.ndarray       # (n_batches, n_align) expanding-overlap sums
    align_channels: np.ndarray    # channel label per alignment entry
    max_rowsum_dev: float         # max |sum_j rho_{q,j} - 1| over retained steps
    max_colsum_dev: float         # max |sum_q rho_{q,j} - nu_j| (full frames)
    batch_size: int

    @property
    def align_mean(self) -> np.ndarray:
        """Time-averaged squared overlap with each expanding direction."""
        if self.n_steps == 0:
            return np.full(self.batch_align.shape[1], np.nan)
        return self.batch_align.sum(axis=0) / self.n_steps


def default_burn_in(coupling: float) -> int:
    """max(1e3, 10/lam^2): hyperbolic alignment plus invariant-measure mixing."""
    if coupling == 0.0:
        return 1000
    return max(1000, int(np.ceil(10.0 / coupling ** 2)))


def run_trajectory(model: StripModel, nf: NormalFormData, steps: int,
                   burn_in: int | None = None,
                   rng: np.random.Generator | None = None,
                   p: int | None = None, collect_third: bool = False,
                   batch: int = 1000, reproject_every: int = 1000,
                   stream: int = 0) -> TrajectoryResult:
    """Evolve a random frame under R(1 - lam P(n)) and accumulate statistics.

    The first `burn_in` steps are discarded from every table.  Retained steps
    are truncated to whole batches of `batch` steps (batch means provide the
    error bars).  The pairing defect is re-projected every `reproject_every`
    steps; in exact arithmetic the dynamics preserves it, so this only damps
    rounding drift.
    """
    L = model.width
    lam = model.coupling
    if p is None:
        p = L
    if burn_in is None:
        burn_in = default_burn_in(lam)
    if rng is None:
        rng = model.rng(stream)
    pack = _kernels.make_pack(nf)
    C = pack.n_channels
    n_align = pack.align_sign.shape[0]
    frame = random_frame(rng, L, p, pairing=nf.pairing)
    u = np.ascontiguousarray(frame.columns)

    acc = _kernels.ChunkAccum.zeros(p, C, n_align)
    check_colsum = (p == L)

    done = 0
    while done < burn_in:
        n = min(batch, burn_in - done)
        v_chunk = model.disorder.sample(rng, (n, L))
        _kernels.run_traj_chunk(pack, u, v_chunk, lam, acc, accumulate=False,
                                do_reproject=True)
        done += n
    acc.reset()

    n_batches = max(1, steps // batch)
    bsize = min(batch, steps)
    b_logexp = np.empty((n_batches, p))
    b_first = np.empty((n_batches, p, C, 2))
    b_sec_bot = np.empty((n_batches, C, C))
    b_sec_top = np.empty((n_batches, C, C))
    b_align = np.empty((n_batches, n_align))
    first = np.zeros((p, C, 2))
    sec_bot = np.zeros((C, C))
    sec_top = np.zeros((C, C))
    third = np.zeros((C, C, C)) if collect_third else None
    logexp = np.zeros(p)
    maxdev = np.zeros(2)

    steps_per_reproj = max(1, reproject_every // bsize)
    for b in range(n_batches):
        acc.reset()
        v_chunk = model.disorder.sample(rng, (bsize, L))
        _kernels.run_traj_chunk(pack, u, v_chunk, lam, acc, accumulate=True,
                                collect_third=collect_third,
                                check_colsum=check_colsum,
                                do_reproject=(b % steps_per_reproj == 0))
        b_logexp[b] = acc.logexp
        b_first[b] = acc.first
        b_sec_bot[b] = acc.sec_bot
        b_sec_top[b] = acc.sec_top
        b_align[b] = acc.align
        logexp += acc.logexp
        first += acc.first
        sec_bot += acc.sec_bot
        sec_top += acc.sec_top
        if collect_third:
            third += acc.third
        maxdev = np.maximum(maxdev, acc.maxdev)

    n_ret = n_batches * bsize
    stats = WeightStats(n_ret, p, pack.nu.copy(), first, sec_bot, sec_top, third)
    return TrajectoryResult(stats, logexp, n_ret, b_logexp, b_first,
                            b_sec_bot, b_sec_top, b_align,
                            pack.align_channels.copy(),
                            float(maxdev[0]), float(maxdev[1]), bsize)

"""Monte-Carlo estimation of the Lyapunov spectrum with batch-means errors.

gamma_p is the time average of the p-th slot's log expansion factor under
the frame dynamics; partial sums over leading slots equal the log volume
growth of p-frames.  Error bars come from batch means over 1000-step
batches, pooled across independent trajectories (Philox substreams of the
model seed).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .frames import (TrajectoryResult, WeightStats, default_burn_in,
                     random_frame, run_trajectory)
from .model import StripModel, symplectic_form
from .normalform import build_normal_form
from .spectral import channel_spectrum

DEFAULT_STEPS = 1_000_000
DEFAULT_TRAJECTORIES = 8
BATCH = 1000


def max_workers_allowed() -> int:
    cap = os.environ.get("STRIPLYAP_THREADS", "")
    n = os.cpu_count() or 1
    if cap.strip():
        n = min(n, max(1, int(cap)))
    return n


@dataclass
class LyapunovEstimate:
    """Non-negative half of the spectrum with batch-means standard errors."""

    gammas: np.ndarray
    stderrs: np.ndarray
    n_steps: int                  # retained steps per trajectory
    burn_in: int
    n_batches: int                # pooled over trajectories
    seed: int
    model: StripModel
    n_trajectories: int
    weight_stats: WeightStats | None = None
    batch_logexp: np.ndarray | None = None        # (n_batches, p) sums
    batch_second_bottom: np.ndarray | None = None  # (n_batches, C, C) sums
    batch_second_top: np.ndarray | None = None
    batch_size: int = BATCH
    max_rowsum_dev: float = 0.0
    max_colsum_dev: float = 0.0
    align_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    align_channels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def p(self) -> int:
        return self.gammas.shape[0]

    def partial_sum(self, p: int) -> tuple[float, float]:
        """(sum of the leading p exponents, its batch-means stderr)."""
        sums = self.batch_logexp[:, :p].sum(axis=1) / self.batch_size
        nb = sums.shape[0]
        return float(self.gammas[:p].sum()), float(sums.std(ddof=1) / np.sqrt(nb))


def _traj_args(model, steps, burn_in, p, collect_third, stream):
    return (model, steps, burn_in, p, collect_third, stream)


def _run_one(args) -> TrajectoryResult:
    model, steps, burn_in, p, collect_third, stream = args
    channels = channel_spectrum(model.width, model.energy)
    nf = build_normal_form(channels)
    return run_trajectory(model, nf, steps, burn_in=burn_in,
                          rng=model.rng(stream), p=p,
                          collect_third=collect_third, batch=BATCH,
                          stream=stream)


def estimate_spectrum(model: StripModel, steps: int = DEFAULT_STEPS,
                      burn_in: int | None = None,
                      n_trajectories: int = DEFAULT_TRAJECTORIES,
                      seed: int | None = None, p: int | None = None,
                      collect_third: bool = False,
                      max_workers: int | None = None) -> LyapunovEstimate:
    """Estimate the leading p exponents (default: all L) from
    `n_trajectories` independent runs of `steps` retained steps each."""
    if seed is not None and seed != model.seed:
        model = StripModel(model.width, model.energy, model.coupling,
                           model.disorder, seed)
    if burn_in is None:
        burn_in = default_burn_in(model.coupling)
    if p is None:
        p = model.width
    args = [_traj_args(model, steps, burn_in, p, collect_third, s)
            for s in range(n_trajectories)]
    workers = min(n_trajectories, max_workers_allowed()
                  if max_workers is None else max_workers)
    if workers > 1 and n_trajectories > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, args))
    else:
        results = [_run_one(a) for a in args]

    stats = results[0].stats
    for r in results[1:]:
        stats = stats.merge(r.stats)
    logexp = np.sum([r.logexp_sum for r in results], axis=0)
    n_total = sum(r.n_steps for r in results)
    b_logexp = np.concatenate([r.batch_logexp for r in results], axis=0)
    b_sec_bot = np.concatenate([r.batch_second_bottom for r in results], axis=0)
    b_sec_top = np.concatenate([r.batch_second_top for r in results], axis=0)
    b_align = np.concatenate([r.batch_align for r in results], axis=0)
    bsize = results[0].batch_size
    nb = b_logexp.shape[0]
    gammas = logexp / n_total
    means = b_logexp / bsize
    stderrs = means.std(axis=0, ddof=1) / np.sqrt(nb) if nb > 1 else np.zeros(p)
    align_mean = (b_align.sum(axis=0) / n_total
                  if n_total else np.full(b_align.shape[1], np.nan))
    return LyapunovEstimate(
        gammas, stderrs, steps, burn_in, nb, model.seed, model,
        n_trajectories, stats, b_logexp, b_sec_bot, b_sec_top, bsize,
        max(r.max_rowsum_dev for r in results),
        max(r.max_colsum_dev for r in results),
        align_mean, results[0].align_channels)


def estimate_partial_sum(model: StripModel, p: int, steps: int = DEFAULT_STEPS,
                         burn_in: int | None = None,
                         seed: int | None = None) -> tuple[float, float]:
    """sum_{l<=p} gamma_l from the total log volume growth of one p-frame."""
    if seed is not None and seed != model.seed:
        model = StripModel(model.width, model.energy, model.coupling,
                           model.disorder, seed)
    channels = channel_spectrum(model.width, model.energy)
    nf = build_normal_form(channels)
    res = run_trajectory(model, nf, steps, burn_in=burn_in,
                         rng=model.rng(0), p=p, batch=BATCH)
    total = float(res.logexp_sum.sum() / res.n_steps)
    sums = res.batch_logexp.sum(axis=1) / res.batch_size
    nb = sums.shape[0]
    stderr = float(sums.std(ddof=1) / np.sqrt(nb)) if nb > 1 else 0.0
    return total, stderr


def estimate_spectrum_raw(model: StripModel, steps: int = DEFAULT_STEPS,
                          burn_in: int | None = None, seed: int | None = None,
                          p: int | None = None) -> LyapunovEstimate:
    """Cross-check estimator evolving raw transfer matrices T(n).

    Runs in the original coordinates on standard-J-isotropic frames; the
    basis change only contributes boundary terms, so the exponents agree
    with the normal-form estimator within statistics.  No channel weights
    are available in this mode.
    """
    if seed is not None and seed != model.seed:
        model = StripModel(model.width, model.energy, model.coupling,
                           model.disorder, seed)
    L = model.width
    if p is None:
        p = L
    if burn_in is None:
        burn_in = default_burn_in(model.coupling)
    channels = channel_spectrum(model.width, model.energy)
    nf = build_normal_form(channels)
    pack = _kernels.make_pack(nf)
    rng = model.rng(0)
    u = np.ascontiguousarray(
        random_frame(rng, L, p, pairing=symplectic_form(L)).columns)
    logexp = np.zeros(p)
    done = 0
    while done < burn_in:
        n = min(BATCH, burn_in - done)
        _kernels.run_raw_chunk(pack, u, model.disorder.sample(rng, (n, L)),
                               model.coupling, logexp)
        done += n
    logexp[:] = 0.0
    n_batches = max(1, steps // BATCH)
    bsize = min(BATCH, steps)
    b_logexp = np.empty((n_batches, p))
    for b in range(n_batches):
        chunk_log = np.zeros(p)
        _kernels.run_raw_chunk(pack, u, model.disorder.sample(rng, (bsize, L)),
                               model.coupling, chunk_log)
        b_logexp[b] = chunk_log
        logexp += chunk_log
    n_total = n_batches * bsize
    gammas = logexp / n_total
    means = b_logexp / bsize
    stderrs = (means.std(axis=0, ddof=1) / np.sqrt(n_batches)
               if n_batches > 1 else np.zeros(p))
    return LyapunovEstimate(gammas, stderrs, steps, burn_in, n_batches,
                            model.seed, model, 1, None, b_logexp, None, None,
                            bsize)

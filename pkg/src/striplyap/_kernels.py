"""Hot trajectory-stepping kernels.

One step of the frame dynamics applies R(1 - lam P(n)) to the frame columns,
re-orthonormalizes (modified Gram-Schmidt, two passes, positive diagonal),
logs the per-slot expansion factors, and accumulates channel-weight moments.

The default path is a numba @njit kernel; `STRIPLYAP_NO_NUMBA=1` selects a
vectorized pure-numpy twin with identical semantics (results agree to
rounding, not bit-for-bit, since summation orders differ).
`benchmarks/bench_kernels.py` times both paths on the same inputs.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import RankCollapse

_INVSQRT2 = 1.0 / math.sqrt(2.0)

_DISABLE = os.environ.get("STRIPLYAP_NO_NUMBA", "") not in ("", "0")
if not _DISABLE:
    try:
        from numba import njit
        NUMBA_AVAILABLE = True
    except ImportError:        # pragma: no cover - numba is a declared dep
        NUMBA_AVAILABLE = False
else:
    NUMBA_AVAILABLE = False


@dataclass
class KernelPack:
    """Precomputed static arrays for the stepping kernels."""

    L: int
    n_channels: int
    mh: np.ndarray            # m @ diag(h)
    bl: np.ndarray            # diag(g^2 h) @ m^t
    Rc: np.ndarray            # R[l, l]
    Rst: np.ndarray           # R[l, l+L]
    Rsb: np.ndarray           # R[l+L, l]
    g2: np.ndarray            # +-1 per mode; pairing J_g = [[0,-g2],[g2,0]]
    dcol_idx: np.ndarray      # (L, 2) nonzero rows of column l of d
    dcol_coef: np.ndarray
    drow_idx: np.ndarray      # (L, 2) nonzero columns of row l of d (conjugated)
    drow_coef: np.ndarray
    gc: np.ndarray            # conj(g) per mode
    four_to_ch: np.ndarray    # channel index per mode
    nu: np.ndarray            # degeneracy per channel
    ind: np.ndarray           # (C, L) channel indicator (numpy path)
    WH: np.ndarray            # W^dagger (numpy path)
    align_sign: np.ndarray    # per tracked hyperbolic channel: 0 -> '+', 1 -> '-'
    align_cols: np.ndarray    # (n, 2) mode positions, second -1 for nu = 1
    align_slots: np.ndarray   # (n, 2) frame slots
    align_channels: np.ndarray  # channel label per alignment entry
    DmE: np.ndarray           # laplacian - E (raw-transfer kernel)


def make_pack(nf) -> KernelPack:
    L = nf.width
    channels = nf.channels.channels
    C = len(channels)
    ar = np.arange(L)
    mh = nf.m * nf.h_f[None, :]
    bl = (nf.g2_f * nf.h_f)[:, None] * nf.m.T
    Rc = nf.R[ar, ar].copy()
    Rst = nf.R[ar, L + ar].copy()
    Rsb = nf.R[L + ar, ar].copy()

    dcol_idx = np.full((L, 2), -1, dtype=np.int64)
    dcol_coef = np.zeros((L, 2), dtype=np.complex128)
    drow_idx = np.full((L, 2), -1, dtype=np.int64)
    drow_coef = np.zeros((L, 2), dtype=np.complex128)
    for l in range(L):
        nz = np.nonzero(np.abs(nf.d[:, l]) > 1e-14)[0]
        for z, m_ in enumerate(nz[:2]):
            dcol_idx[l, z] = m_
            dcol_coef[l, z] = nf.d[m_, l]
        nz = np.nonzero(np.abs(nf.d[l, :]) > 1e-14)[0]
        for z, m_ in enumerate(nz[:2]):
            drow_idx[l, z] = m_
            drow_coef[l, z] = np.conj(nf.d[l, m_])

    four_to_ch = nf.channels.fourier_channel_map()
    nu = np.array([c.nu for c in channels], dtype=np.float64)
    ind = np.zeros((C, L))
    ind[four_to_ch, ar] = 1.0

    # expanding-direction overlap bookkeeping, one entry per hyperbolic channel
    a_sign, a_cols, a_slots, a_ch = [], [], [], []
    slot = 0
    seen = []
    for j in nf.slot_channels:
        if j in seen:
            continue
        seen.append(j)
        ch = channels[j]
        a_sign.append(0 if ch.expanding_sign > 0 else 1)
        cols = [l - 1 for l in ch.fourier_indices]
        a_cols.append(cols + [-1] * (2 - len(cols)))
        a_slots.append([slot, slot + 1 if ch.nu == 2 else -1])
        a_ch.append(j)
        slot += ch.nu

    from .model import laplacian
    DmE = laplacian(L) - nf.channels.energy * np.eye(L)

    return KernelPack(L, C, mh, bl, Rc, Rst, Rsb, nf.g2_f.copy(),
                      dcol_idx, dcol_coef, drow_idx, drow_coef,
                      np.conj(nf.g_f), four_to_ch, nu, ind,
                      nf.W.conj().T.copy(),
                      np.array(a_sign, dtype=np.int64),
                      np.array(a_cols, dtype=np.int64).reshape(-1, 2),
                      np.array(a_slots, dtype=np.int64).reshape(-1, 2),
                      np.array(a_ch, dtype=np.int64),
                      DmE)


@dataclass
class ChunkAccum:
    """Per-chunk accumulators (zeroed by the caller before each chunk)."""

    logexp: np.ndarray       # (p,)
    first: np.ndarray        # (p, C, 2)
    sec_bot: np.ndarray      # (C, C) weights of the last slot
    sec_top: np.ndarray      # (C, C) weights of the first slot
    third: np.ndarray        # (C, C, C) first-slot third moments
    align: np.ndarray        # (n_align,)
    maxdev: np.ndarray       # (2,) sum-rule deviations (rows, columns)

    @classmethod
    def zeros(cls, p: int, C: int, n_align: int) -> "ChunkAccum":
        return cls(np.zeros(p), np.zeros((p, C, 2)), np.zeros((C, C)),
                   np.zeros((C, C)), np.zeros((C, C, C)), np.zeros(n_align),
                   np.zeros(2))

    def reset(self):
        for a in (self.logexp, self.first, self.sec_bot, self.sec_top,
                  self.third, self.align, self.maxdev):
            a[:] = 0.0


def _traj_chunk_core(u, v_chunk, lam, mh, bl, Rc, Rst, Rsb, g2,
                     dcol_idx, dcol_coef, drow_idx, drow_coef, gc,
                     four_to_ch, nu, accumulate, collect_third, check_colsum,
                     do_reproject, align_sign, align_cols, align_slots,
                     logexp, first, sec_bot, sec_top, third, align_out, maxdev):
    twoL, p = u.shape
    L = twoL // 2
    nC = nu.shape[0]
    nsteps = v_chunk.shape[0]
    X = np.empty((twoL, p))
    aplus = np.empty((L, p), np.complex128)
    aminus = np.empty((L, p), np.complex128)
    rho = np.empty((p, nC, 2))
    tot = np.empty((p, nC))

    for t in range(nsteps):
        v = v_chunk[t]
        if lam != 0.0:
            y3 = np.dot(bl, np.dot(mh, u[:L]) * v.reshape(L, 1))
            for i in range(L):
                for q in range(p):
                    xt = u[i, q]
                    xb = u[L + i, q] - lam * y3[i, q]
                    X[i, q] = Rc[i] * xt + Rst[i] * xb
                    X[L + i, q] = Rsb[i] * xt + Rc[i] * xb
        else:
            for i in range(L):
                for q in range(p):
                    xt = u[i, q]
                    xb = u[L + i, q]
                    X[i, q] = Rc[i] * xt + Rst[i] * xb
                    X[L + i, q] = Rsb[i] * xt + Rc[i] * xb

        for q in range(p):
            for _ in range(2):
                for r in range(q):
                    s = 0.0
                    for i in range(twoL):
                        s += X[i, r] * X[i, q]
                    for i in range(twoL):
                        X[i, q] -= s * X[i, r]
            nrm2 = 0.0
            for i in range(twoL):
                nrm2 += X[i, q] * X[i, q]
            if nrm2 < 1e-280:
                return 1
            nrm = math.sqrt(nrm2)
            logexp[q] += math.log(nrm)
            inv = 1.0 / nrm
            for i in range(twoL):
                X[i, q] *= inv
                u[i, q] = X[i, q]

        if accumulate:
            for l in range(L):
                for q in range(p):
                    ct = 0.0 + 0.0j
                    st = 0.0 + 0.0j
                    cr = 0.0 + 0.0j
                    sr = 0.0 + 0.0j
                    for z in range(2):
                        mm = dcol_idx[l, z]
                        if mm >= 0:
                            co = dcol_coef[l, z]
                            ct += co * u[mm, q]
                            st += co * u[L + mm, q]
                        mm = drow_idx[l, z]
                        if mm >= 0:
                            co = drow_coef[l, z]
                            cr += co * u[mm, q]
                            sr += co * u[L + mm, q]
                    aplus[l, q] = (ct + 1j * gc[l] * st) * _INVSQRT2
                    aminus[l, q] = (cr - 1j * gc[l] * sr) * _INVSQRT2
            for q in range(p):
                for j in range(nC):
                    rho[q, j, 0] = 0.0
                    rho[q, j, 1] = 0.0
            for l in range(L):
                ch = four_to_ch[l]
                for q in range(p):
                    ap = aplus[l, q]
                    am = aminus[l, q]
                    rho[q, ch, 0] += ap.real * ap.real + ap.imag * ap.imag
                    rho[q, ch, 1] += am.real * am.real + am.imag * am.imag
            for q in range(p):
                for j in range(nC):
                    tot[q, j] = rho[q, j, 0] + rho[q, j, 1]
                    first[q, j, 0] += rho[q, j, 0]
                    first[q, j, 1] += rho[q, j, 1]
            for j in range(nC):
                for k in range(nC):
                    sec_top[j, k] += tot[0, j] * tot[0, k]
                    sec_bot[j, k] += tot[p - 1, j] * tot[p - 1, k]
            if collect_third:
                for j in range(nC):
                    for m_ in range(nC):
                        for k in range(nC):
                            third[j, m_, k] += tot[0, j] * tot[0, m_] * tot[0, k]
            for q in range(p):
                s = 0.0
                for j in range(nC):
                    s += tot[q, j]
                dev = abs(s - 1.0)
                if dev > maxdev[0]:
                    maxdev[0] = dev
            if check_colsum:
                for j in range(nC):
                    s = 0.0
                    for q in range(p):
                        s += tot[q, j]
                    dev = abs(s - nu[j])
                    if dev > maxdev[1]:
                        maxdev[1] = dev
            for e in range(align_sign.shape[0]):
                c1 = align_cols[e, 0]
                c2 = align_cols[e, 1]
                s1 = align_slots[e, 0]
                s2 = align_slots[e, 1]
                if s1 >= p or s2 >= p:
                    continue
                if align_sign[e] == 0:
                    if c2 < 0:
                        z = aplus[c1, s1]
                        val = z.real * z.real + z.imag * z.imag
                    else:
                        det = aplus[c1, s1] * aplus[c2, s2] \
                            - aplus[c1, s2] * aplus[c2, s1]
                        val = det.real * det.real + det.imag * det.imag
                else:
                    if c2 < 0:
                        z = aminus[c1, s1]
                        val = z.real * z.real + z.imag * z.imag
                    else:
                        det = aminus[c1, s1] * aminus[c2, s2] \
                            - aminus[c1, s2] * aminus[c2, s1]
                        val = det.real * det.real + det.imag * det.imag
                align_out[e] += val

    if do_reproject:
        # rounding-level symplectic cleanup: orthogonalize against the
        # J_g-partners of the earlier columns as well (no volume is logged;
        # the removed components are O(eps), so the norm shift is O(eps^2))
        for q in range(p):
            for r in range(q):
                s = 0.0
                for i in range(twoL):
                    s += u[i, r] * u[i, q]
                for i in range(twoL):
                    u[i, q] -= s * u[i, r]
                s = 0.0
                for i in range(L):
                    s += (-g2[i] * u[L + i, r]) * u[i, q] \
                        + (g2[i] * u[i, r]) * u[L + i, q]
                for i in range(L):
                    u[i, q] -= s * (-g2[i] * u[L + i, r])
                    u[L + i, q] -= s * (g2[i] * u[i, r])
            nrm2 = 0.0
            for i in range(twoL):
                nrm2 += u[i, q] * u[i, q]
            inv = 1.0 / math.sqrt(nrm2)
            for i in range(twoL):
                u[i, q] *= inv
    return 0


def _raw_chunk_core(u, v_chunk, lam, DmE, logexp):
    """Same stepping with the raw transfer matrix T(n) (no weights)."""
    twoL, p = u.shape
    L = twoL // 2
    nsteps = v_chunk.shape[0]
    X = np.empty((twoL, p))
    for t in range(nsteps):
        v = v_chunk[t]
        top = np.dot(DmE, u[:L])
        for i in range(L):
            for q in range(p):
                X[i, q] = top[i, q] + lam * v[i] * u[i, q] - u[L + i, q]
                X[L + i, q] = u[i, q]
        for q in range(p):
            for _ in range(2):
                for r in range(q):
                    s = 0.0
                    for i in range(twoL):
                        s += X[i, r] * X[i, q]
                    for i in range(twoL):
                        X[i, q] -= s * X[i, r]
            nrm2 = 0.0
            for i in range(twoL):
                nrm2 += X[i, q] * X[i, q]
            if nrm2 < 1e-280:
                return 1
            nrm = math.sqrt(nrm2)
            logexp[q] += math.log(nrm)
            inv = 1.0 / nrm
            for i in range(twoL):
                X[i, q] *= inv
                u[i, q] = X[i, q]
    return 0


if NUMBA_AVAILABLE:
    _traj_chunk_numba = njit(cache=True)(_traj_chunk_core)
    _raw_chunk_numba = njit(cache=True)(_raw_chunk_core)


def _gram_schmidt_cols(X, logexp=None):
    """Two-pass column orthonormalization, positive diagonal; logs norms."""
    twoL, p = X.shape
    for q in range(p):
        w = X[:, q]
        for _ in range(2):
            if q:
                w = w - X[:, :q] @ (X[:, :q].T @ w)
        nrm = float(np.linalg.norm(w))
        if nrm < 1e-140:
            raise RankCollapse(f"column {q} collapsed during orthonormalization")
        if logexp is not None:
            logexp[q] += math.log(nrm)
        X[:, q] = w / nrm
    return X


def _traj_chunk_numpy(u, v_chunk, lam, pack: KernelPack, accumulate,
                      collect_third, check_colsum, do_reproject,
                      acc: ChunkAccum):
    twoL, p = u.shape
    L = pack.L
    nC = pack.n_channels
    for t in range(v_chunk.shape[0]):
        v = v_chunk[t]
        xt = u[:L]
        xb = u[L:]
        if lam != 0.0:
            xb = xb - lam * (pack.bl @ (v[:, None] * (pack.mh @ xt)))
        X = np.empty_like(u)
        X[:L] = pack.Rc[:, None] * xt + pack.Rst[:, None] * xb
        X[L:] = pack.Rsb[:, None] * xt + pack.Rc[:, None] * xb
        _gram_schmidt_cols(X, acc.logexp)
        u[:] = X

        if accumulate:
            a = pack.WH @ u
            absq = a.real ** 2 + a.imag ** 2
            rho_p = pack.ind @ absq[:L]       # (C, p)
            rho_m = pack.ind @ absq[L:]
            acc.first[:, :, 0] += rho_p.T
            acc.first[:, :, 1] += rho_m.T
            tot = rho_p + rho_m               # (C, p)
            acc.sec_top += np.outer(tot[:, 0], tot[:, 0])
            acc.sec_bot += np.outer(tot[:, -1], tot[:, -1])
            if collect_third:
                t0 = tot[:, 0]
                acc.third += t0[:, None, None] * t0[None, :, None] * t0[None, None, :]
            acc.maxdev[0] = max(acc.maxdev[0], float(np.abs(tot.sum(0) - 1.0).max()))
            if check_colsum:
                acc.maxdev[1] = max(acc.maxdev[1],
                                    float(np.abs(tot.sum(1) - pack.nu).max()))
            for e in range(pack.align_sign.shape[0]):
                c1, c2 = pack.align_cols[e]
                s1, s2 = pack.align_slots[e]
                if s1 >= p or s2 >= p:
                    continue
                off = 0 if pack.align_sign[e] == 0 else L
                if c2 < 0:
                    acc.align[e] += absq[off + c1, s1]
                else:
                    det = a[off + c1, s1] * a[off + c2, s2] \
                        - a[off + c1, s2] * a[off + c2, s1]
                    acc.align[e] += abs(det) ** 2
    if do_reproject:
        resymplectify(u, pack.g2)
    return 0


def resymplectify(u: np.ndarray, g2: np.ndarray):
    """Project frame columns back onto the J_g-isotropic set (in place)."""
    twoL, p = u.shape
    L = twoL // 2
    for q in range(p):
        w = u[:, q]
        for r in range(q):
            ur = u[:, r]
            w = w - (ur @ w) * ur
            jr = np.concatenate((-g2 * ur[L:], g2 * ur[:L]))
            w = w - (jr @ w) * jr
        u[:, q] = w / np.linalg.norm(w)


def run_traj_chunk(pack: KernelPack, u: np.ndarray, v_chunk: np.ndarray,
                   lam: float, acc: ChunkAccum, accumulate: bool,
                   collect_third: bool = False, check_colsum: bool = True,
                   do_reproject: bool = False):
    if NUMBA_AVAILABLE:
        status = _traj_chunk_numba(
            u, v_chunk, lam, pack.mh, pack.bl, pack.Rc, pack.Rst, pack.Rsb,
            pack.g2, pack.dcol_idx, pack.dcol_coef, pack.drow_idx,
            pack.drow_coef, pack.gc, pack.four_to_ch, pack.nu,
            accumulate, collect_third, check_colsum, do_reproject,
            pack.align_sign, pack.align_cols, pack.align_slots,
            acc.logexp, acc.first, acc.sec_bot, acc.sec_top, acc.third,
            acc.align, acc.maxdev)
    else:
        status = _traj_chunk_numpy(u, v_chunk, lam, pack, accumulate,
                                   collect_third, check_colsum, do_reproject,
                                   acc)
    if status != 0:
        raise RankCollapse("frame column collapsed during trajectory")


def run_raw_chunk(pack: KernelPack, u: np.ndarray, v_chunk: np.ndarray,
                  lam: float, logexp: np.ndarray):
    if NUMBA_AVAILABLE:
        status = _raw_chunk_numba(u, v_chunk, lam, pack.DmE, logexp)
        if status != 0:
            raise RankCollapse("frame column collapsed during trajectory")
        return
    twoL, p = u.shape
    L = pack.L
    for t in range(v_chunk.shape[0]):
        v = v_chunk[t]
        X = np.empty_like(u)
        X[:L] = pack.DmE @ u[:L] + lam * v[:, None] * u[:L] - u[L:]
        X[L:] = u[:L]
        _gram_schmidt_cols(X, logexp)
        u[:] = X

"""Numerical verification suite: exact identities, disorder moments, dynamics.

Every closed-form identity of the channel formalism is checked as a residual
(threshold 1e-8 unless stated); disorder expectations are checked as
Monte-Carlo z-scores (threshold 5); trajectory-level structure (sum rules,
hyperbolic alignment and its lam^2 scaling, +- weight balance) is checked on
actual runs.  All checks are deterministic given the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ParabolicChannel
from .frames import frame_action, random_frame, run_trajectory
from .model import StripModel, build_transfer, sample_column, symplectic_form
from .normalform import (build_normal_form, build_P, fourier_potential,
                         moment_targets, perturbation_elements,
                         reflection_matrix)
from .spectral import channel_spectrum

RESIDUAL_TOL = 1e-8
Z_TOL = 5.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    kind: str            # "residual" | "zscore" | "status"
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def row(self) -> str:
        mark = "pass" if self.passed else "FAIL"
        return f"[{mark}] {self.name:<44s} {self.kind:<8s} {self.value:11.3e} <= {self.threshold:.1e}"


@dataclass
class VerifyReport:
    entries: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def residual(self, name: str, value: float, threshold: float = RESIDUAL_TOL,
                 detail: str = ""):
        self.entries.append(CheckResult(name, "residual", float(value),
                                        threshold, float(value) <= threshold,
                                        detail))

    def zscore(self, name: str, value: float, threshold: float = Z_TOL,
               detail: str = ""):
        self.entries.append(CheckResult(name, "zscore", float(value),
                                        threshold, abs(float(value)) <= threshold,
                                        detail))

    def status(self, name: str, ok: bool, detail: str = ""):
        self.entries.append(CheckResult(name, "status", 0.0 if ok else 1.0,
                                        0.5, ok, detail))

    def window(self, name: str, value: float, lo: float, hi: float,
               detail: str = ""):
        ok = lo <= value <= hi
        self.entries.append(CheckResult(
            name, "window", float(value), hi, ok,
            detail or f"allowed [{lo:g}, {hi:g}]"))

    def extend(self, other: "VerifyReport"):
        self.entries.extend(other.entries)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "entries": [{"name": e.name, "kind": e.kind, "value": e.value,
                             "threshold": e.threshold, "passed": e.passed,
                             "detail": e.detail} for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        lines = [e.row() for e in self.entries]
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'} "
                     f"({sum(e.passed for e in self.entries)}/{len(self.entries)})")
        return "\n".join(lines)


def _max_over(iterable) -> float:
    return float(max(iterable))


def verify_algebra(L: int, E: float, lam: float, trials: int = 100,
                   seed: int = 0) -> VerifyReport:
    """Residual checks of every deterministic identity at (L, E, lam)."""
    rep = VerifyReport()
    try:
        channels = channel_spectrum(L, E)
    except ParabolicChannel as exc:
        rep.status("parabolic rejection", True, str(exc))
        return rep
    nf = build_normal_form(channels)
    model = StripModel(L, E, lam, seed=seed)
    rng = model.rng(0)
    twoL = 2 * L
    J = symplectic_form(L)
    I2 = np.eye(twoL)

    rep.residual("basis inverse |M M^-1 - 1|",
                 np.abs(nf.M @ nf.M_inv - I2).max())
    A = build_transfer(StripModel(L, E, 0.0), np.zeros(L))
    rep.residual("clean conjugation |M^-1 A M - R|",
                 np.abs(nf.M_inv @ A @ nf.M - nf.R).max())
    mixed = not channels.all_elliptic
    rep.residual("pairing |M^t J M - Jg|",
                 np.abs(nf.M.T @ J @ nf.M - nf.pairing).max(),
                 detail="Jg = J (all channels elliptic)" if not mixed
                 else "Jg carries the hyperbolic channel signs")
    rep.residual("basis unitarity |W*W - 1|",
                 np.abs(nf.W.conj().T @ nf.W - I2).max())

    # W* J W block identity
    S = reflection_matrix(L)
    g = nf.g_f
    bid = 0.5j * np.block(
        [[np.diag(g + g.conj()), np.diag(g.conj() - g) @ S],
         [np.diag(g - g.conj()) @ S, -np.diag(g + g.conj())]])
    rep.residual("basis pairing |W*JW - block(g, S)|",
                 np.abs(nf.W.conj().T @ J @ nf.W - bid).max())
    rep.residual("reflection |d d^t - S|", np.abs(nf.d @ nf.d.T - S).max())

    kap = np.concatenate([nf.kappa_f, 1.0 / nf.kappa_f])
    rep.residual("R eigencolumns |R W - W diag(kappa, 1/kappa)|",
                 np.abs(nf.R @ nf.W - nf.W * kap[None, :]).max(),
                 detail="kappa < 0 on modes with mu < -2")

    # projections: resolution of identity, idempotence, orthogonality, rank
    projs = {(c.index, s): nf.projection(c.index, s)
             for c in channels.channels for s in (1, -1)}
    rep.residual("projection resolution |sum pi - 1|",
                 np.abs(sum(projs.values()) - I2).max())
    rep.residual("projection idempotence max |pi^2 - pi|",
                 _max_over(np.abs(P @ P - P).max() for P in projs.values()))
    cross = 0.0
    keys = list(projs)
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            cross = max(cross, np.abs(projs[keys[a]] @ projs[keys[b]]).max())
    rep.residual("projection orthogonality max |pi_a pi_b|", cross)
    rep.residual("projection rank max |tr pi - nu|",
                 _max_over(abs(np.trace(projs[(c.index, s)]).real - c.nu)
                           for c in channels.channels for s in (1, -1)))

    # same-sign elliptic blocks of Pt vanish (checked on one disorder draw)
    v0 = sample_column(model, rng)
    Pt0 = build_P(nf, v0).Ptilde
    same_sign = 0.0
    ell = [c.index for c in channels.channels if c.elliptic]
    for a in ell:
        for b in ell:
            for s in (1, -1):
                same_sign = max(same_sign, np.abs(
                    projs[(a, s)] @ Pt0 @ projs[(b, s)]).max())
    rep.residual("elliptic same-sign blocks of P + P*", same_sign)

    # disorder-dependent identities, max over trials
    conj_res = sym_res = lie_res = elem_res = four_res = pars_res = tr_res = 0.0
    for _ in range(trials):
        v = sample_column(model, rng)
        T = build_transfer(model, v)
        tr_res = max(tr_res, np.abs(T.T @ J @ T - J).max()
                     / max(1.0, np.abs(T).max() ** 2))
        pm = build_P(nf, v)
        conj_res = max(conj_res, np.abs(
            nf.M_inv @ T @ nf.M - nf.R @ (I2 - lam * pm.P)).max())
        B = pm.B
        sym_res = max(sym_res, np.abs(nf.g2_f[:, None] * B
                                      - (nf.g2_f[:, None] * B).T).max())
        lie_res = max(lie_res, np.abs(pm.P.T @ nf.pairing
                                      + nf.pairing @ pm.P).max())
        elem_res = max(elem_res, np.abs(
            nf.W.conj().T @ pm.P @ nf.W - perturbation_elements(nf, v)).max())
        fp = fourier_potential(v)
        four_res = max(four_res, np.abs(
            np.conj(fp.vhat) - fp.vhat[(-np.arange(L)) % L]).max())
        pars_res = max(pars_res, abs(np.sum(np.abs(fp.vhat) ** 2)
                                     - np.sum(v ** 2) / L))
    rep.residual("transfer symplecticity (scaled)", tr_res)
    rep.residual("factorization |M^-1 T M - R(1 - lam P)|", conj_res)
    rep.residual("perturbation block symmetry |g2 B - (g2 B)^t|", sym_res)
    rep.residual("perturbation pairing algebra |P^t Jg + Jg P|", lie_res,
                 detail="reduces to sp(2L,R) membership when all elliptic")
    rep.residual("matrix elements |W*PW - closed form|", elem_res)
    rep.residual("mode-potential conjugate symmetry", four_res)
    rep.residual("mode-potential Parseval", pars_res)

    # Lagrangian projection identity on standard-J frames
    lag = 0.0
    for _ in range(max(4, trials // 20)):
        u = random_frame(rng, L, L, pairing=J).columns
        Pi = u @ u.T
        # family 1: coordinate eigenvectors of J
        V = np.zeros((twoL, twoL), dtype=np.complex128)
        sig = np.zeros(twoL)
        for l in range(L):
            V[l, l] = 1 / np.sqrt(2); V[l + L, l] = -1j / np.sqrt(2)
            sig[l] = 1.0
            V[l, l + L] = 1 / np.sqrt(2); V[l + L, l + L] = 1j / np.sqrt(2)
            sig[l + L] = -1.0
        G = V.conj().T @ Pi @ V
        lag = max(lag, np.abs((1.0 + np.outer(sig, sig)) * G
                              - np.eye(twoL)).max())
        # family 2: elliptic basis columns (J w^+- = +-i w^+-)
        cols, sigs = [], []
        for c in channels.channels:
            if not c.elliptic:
                continue
            for s in (1, -1):
                for col in nf.projection_columns(c.index, s):
                    cols.append(col)
                    sigs.append(float(s))
        if cols:
            Vw = nf.W[:, cols]
            sigw = np.array(sigs)
            Gw = Vw.conj().T @ Pi @ Vw
            lag = max(lag, np.abs((1.0 + np.outer(sigw, sigw)) * Gw
                                  - np.eye(len(cols))).max())
    rep.residual("Lagrangian projection identity", lag)

    uo = random_frame(rng, L, L, pairing=J).columns
    Z = np.hstack([uo, J @ uo])
    rep.residual("frame-unitary correspondence (u, Ju)",
                 max(np.abs(Z.T @ Z - I2).max(), np.abs(Z.T @ J @ Z - J).max()))

    # cocycle of the orthonormalizing action
    p = min(5, L)
    fr = random_frame(rng, L, p, pairing=nf.pairing)
    T1 = build_transfer(model, sample_column(model, rng))
    T2 = build_transfer(model, sample_column(model, rng))
    one = frame_action(T2 @ T1, fr)
    two = frame_action(T2, frame_action(T1, fr).frame)
    rep.residual("action cocycle", np.abs(one.frame.columns
                                          - two.frame.columns).max())

    # weight sum rules on random frames in normal-form coordinates
    from .frames import channel_weights
    fr = random_frame(rng, L, L, pairing=nf.pairing)
    rho = channel_weights(fr, nf)
    rep.residual("weight row sums |sum_j rho - 1|",
                 np.abs(rho.sum(axis=(1, 2)) - 1.0).max())
    nu = np.array([c.nu for c in channels.channels], dtype=float)
    rep.residual("weight column sums |sum_q rho - nu|",
                 np.abs(rho.sum(axis=(0, 2)) - nu).max())
    # elliptic channels: real vectors split weight evenly between signs
    rep.residual("elliptic sign balance |rho+ - rho-|",
                 _max_over(np.abs(rho[:, c.index, 0] - rho[:, c.index, 1]).max()
                           for c in channels.channels if c.elliptic)
                 if any(c.elliptic for c in channels.channels) else 0.0)
    return rep


def _pp_coeffs(pack: _kernels.KernelPack, w: np.ndarray, wp: np.ndarray,
               star: bool) -> np.ndarray:
    """Coefficients c with <w|P|w'> = c . v (or <w|P*|w'> when star)."""
    L = pack.L
    if star:
        return (pack.mh @ np.conj(w[:L])) * (pack.bl.T @ wp[L:])
    return (pack.bl.T @ np.conj(w[L:])) * (pack.mh @ wp[:L])


def _unit_in_span(rng, W, cols) -> np.ndarray:
    coef = rng.standard_normal(len(cols)) + 1j * rng.standard_normal(len(cols))
    coef /= np.linalg.norm(coef)
    return W[:, cols] @ coef


def _z(mean_est: complex, target: complex, spread: float, n: int) -> float:
    se = spread / np.sqrt(n)
    if se == 0.0:
        return 0.0
    return float(abs(mean_est - target) / se)


def verify_moments(L: int, E: float, trials: int = 200_000,
                   seed: int = 0) -> VerifyReport:
    """Monte-Carlo checks of the disorder expectations of matrix elements."""
    rep = VerifyReport()
    channels = channel_spectrum(L, E)
    nf = build_normal_form(channels)
    pack = _kernels.make_pack(nf)
    model = StripModel(L, E, 1.0, seed=seed)
    rng = model.rng(1)
    V = model.disorder.sample(rng, (trials, L))

    def matvec(c):
        # keep the draw matrix real: two real matvecs beat complex promotion
        return V @ c.real + 1j * (V @ c.imag)

    def prod_stats(c1, c2):
        vals = matvec(c1) * matvec(c2)
        m = vals.mean()
        spread = max(vals.real.std(ddof=1), vals.imag.std(ddof=1), 1e-30)
        return m, spread

    # item (i): plain first moments vanish
    w = _unit_in_span(rng, np.eye(2 * L, dtype=complex), list(range(2 * L)))
    wp = _unit_in_span(rng, np.eye(2 * L, dtype=complex), list(range(2 * L)))
    c = _pp_coeffs(pack, w, wp, star=False)
    vals = matvec(c)
    zre = _z(vals.real.mean(), 0.0, max(vals.real.std(ddof=1), 1e-30), trials)
    zim = _z(vals.imag.mean(), 0.0, max(vals.imag.std(ddof=1), 1e-30), trials)
    rep.zscore("first moment <w|P|w'> (i)", max(zre, zim))

    chs = channels.channels
    nu_of = {c_.index: c_.nu for c_ in chs}
    pairs = [(a.index, b.index) for a in chs for b in chs if a.index <= b.index]
    wvec = {}
    for c_ in chs:
        for s in (1, -1):
            wvec[(c_.index, s)] = _unit_in_span(
                rng, nf.W, nf.projection_columns(c_.index, s))

    zmax_ii = zmax_iii = 0.0
    for (l, k) in pairs:
        for tau in (1, -1):
            for sig in (1, -1):
                if l == k and (tau == sig or nu_of[l] == 2):
                    continue
                wl, wk = wvec[(l, tau)], wvec[(k, sig)]
                m, sp = prod_stats(_pp_coeffs(pack, wl, wk, False),
                                   _pp_coeffs(pack, wk, wl, False))
                t = moment_targets(channels, "ii", l, k, tau, sig)
                zmax_ii = max(zmax_ii, _z(m, t, sp, trials))
                m, sp = prod_stats(_pp_coeffs(pack, wl, wk, True),
                                   _pp_coeffs(pack, wk, wl, False))
                t = moment_targets(channels, "iii", l, k, tau, sig)
                zmax_iii = max(zmax_iii, _z(m, t, sp, trials))
    rep.zscore("second moments <P><P> (ii), max z", zmax_ii)
    rep.zscore("second moments <P*><P> (iii), max z", zmax_iii)

    zmax_iv = 0.0
    ell = [c_.index for c_ in chs if c_.elliptic]
    for l in ell:
        for k in ell:
            if l > k or (l == k and nu_of[l] == 2):
                continue
            for sig in (1, -1):
                wl, wk = wvec[(l, sig)], wvec[(k, -sig)]
                c1 = (_pp_coeffs(pack, wl, wk, False)
                      + _pp_coeffs(pack, wl, wk, True))
                c2 = (_pp_coeffs(pack, wk, wl, False)
                      + _pp_coeffs(pack, wk, wl, True))
                m, sp = prod_stats(c1, c2)
                t = moment_targets(channels, "iv", l, k)
                zmax_iv = max(zmax_iv, _z(m, t, sp, trials))
                # conjugate-pair form carries the same expectation
                wlc, wkc = np.conj(wl), np.conj(wk)
                c2c = (_pp_coeffs(pack, wlc, wkc, False)
                       + _pp_coeffs(pack, wlc, wkc, True))
                m, sp = prod_stats(c1, c2c)
                zmax_iv = max(zmax_iv, _z(m, t, sp, trials))
    if ell:
        rep.zscore("cross-sign moments <Pt><Pt> (iv), max z", zmax_iv)

    zmax_v = 0.0
    rfac = pack.Rst ** 2 + pack.Rc ** 2
    for c_ in chs:
        for s in (1, -1):
            wl = wvec[(c_.index, s)]
            base = pack.mh @ wl[:L]
            Yr = (V * base.real[None, :]) @ pack.bl.T
            Yi = (V * base.imag[None, :]) @ pack.bl.T
            vals = (Yr ** 2 + Yi ** 2) @ rfac
            t = moment_targets(channels, "v", c_.index)
            zmax_v = max(zmax_v, _z(vals.mean(), t,
                                    max(vals.std(ddof=1), 1e-30), trials))
    rep.zscore("quadratic moment <|RP|^2> (v), max z", zmax_v)
    return rep


def verify_dynamics(model: StripModel, steps: int = 100_000,
                    seed: int | None = None) -> VerifyReport:
    """Trajectory-level checks: sum rules each step, hyperbolic alignment and
    its lam^2 scaling, +- weight balance of elliptic slots."""
    rep = VerifyReport()
    if seed is not None and seed != model.seed:
        model = StripModel(model.width, model.energy, model.coupling,
                           model.disorder, seed)
    channels = channel_spectrum(model.width, model.energy)
    nf = build_normal_form(channels)
    res = run_trajectory(model, nf, steps, rng=model.rng(0))
    rep.residual("sum rule per slot, max dev", res.max_rowsum_dev)
    rep.residual("sum rule per channel, max dev", res.max_colsum_dev)

    hyp = [c for c in channels.channels if not c.elliptic]
    n_h_slots = sum(c.nu for c in hyp)
    lam = model.coupling
    if hyp and lam == 0.0:
        mis = 1.0 - res.align_mean
        rep.residual("deterministic alignment misfit (lam = 0)",
                     float(np.max(mis)))
        gam = res.logexp_sum / res.n_steps
        rep.residual("clean slot expansions |gamma - eta_hat|",
                     float(np.abs(gam - nf.eta_hat).max()))
    if hyp and lam != 0.0:
        half = StripModel(model.width, model.energy, lam / 2.0,
                          model.disorder, model.seed)
        res_half = run_trajectory(half, nf, steps, rng=half.rng(0))
        mis = 1.0 - res.align_mean
        mis_half = 1.0 - res_half.align_mean
        for i, j in enumerate(res.align_channels):
            rep.window(f"alignment lam^2 scaling, channel {j}",
                       float(mis[i] / mis_half[i]), 2.0, 8.0,
                       detail=f"misalignment {mis[i]:.3e} vs {mis_half[i]:.3e}")
            # qualitative magnitude check of the O(lam^2) misalignment
            rep.residual(f"misalignment magnitude, channel {j}",
                         float(mis[i]), threshold=max(50.0 * lam ** 2, 1e-8),
                         detail="engineering bound 50 lam^2")
        # +- balance of elliptic slots inside hyperbolic channels
        nb = res.batch_first.shape[0]
        bsize = res.batch_size
        worst = 0.0
        for c in hyp:
            j = c.index
            for q in range(n_h_slots, model.width):
                d_b = (res.batch_first[:, q, j, 0]
                       - res.batch_first[:, q, j, 1]) / bsize
                diff = abs(float(d_b.mean()))
                se = float(d_b.std(ddof=1) / np.sqrt(nb)) if nb > 1 else 0.0
                tot = float(res.stats.mean_first[q, j].sum())
                slack = 0.2 * tot + 5.0 * se
                worst = max(worst, diff - slack)
        rep.residual("elliptic-slot +- balance excess", max(worst, 0.0),
                     threshold=1e-12,
                     detail="|<rho+> - <rho->| <= 0.2 (<rho+> + <rho->) + 5 se")
    return rep

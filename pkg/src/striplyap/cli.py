"""Command-line front end.

Subcommands: analyze (channel table + non-resonance check), estimate
(spectrum Monte Carlo), compare (direct estimates vs weak-disorder formulas
over an energy or coupling sweep), verify (identity/moment/dynamics suite),
meanfield (closed weight solution).  Results go to stdout and optionally to
CSV/JSON files that round-trip at full precision.

Exit codes: 0 ok, 1 verification failure, 2 model rejection (parabolic
channel or energy outside the clean spectrum), 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import HyperbolicPresent, OutsideSpectrum, ParabolicChannel
from .frames import default_burn_in
from .lyapunov import estimate_spectrum
from .model import DisorderLaw, StripModel
from .perturbative import (gamma_bottom_bounds, gamma_bottom_formula,
                           gamma_sum_formula, gamma_top_formula,
                           meanfield_weights)
from .spectral import channel_spectrum, check_main_hypothesis, free_spectrum_interval
from .verify import verify_algebra, verify_dynamics, verify_moments

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_REJECTED = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: str, rows: list[dict]):
    header = list(rows[0].keys()) if rows else []
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_fmt(r[k]) for k in header))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, config: dict, results: dict):
    payload = {"config": config, "results": results, "version": __version__}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _emit(args, config: dict, results: dict, rows: list[dict]):
    if args.out:
        if args.format == "csv":
            _write_csv(args.out, rows)
        else:
            _write_json(args.out, config, results)


def _sweep(spec: str) -> np.ndarray:
    try:
        a, b, n = spec.split(":")
        n = int(n)
        if n < 1:
            raise ValueError
        return np.linspace(float(a), float(b), n)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"sweep must be start:stop:count with count >= 1, got {spec!r}")


def _add_common(p: argparse.ArgumentParser, energy_required=True):
    p.add_argument("--width", "-L", type=int, required=True)
    p.add_argument("--energy", "-E", type=float, required=energy_required)
    p.add_argument("--lambda", dest="coupling", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dist", choices=("rademacher", "uniform", "gaussian"),
                   default="rademacher")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _config_echo(args) -> dict:
    keep = ("width", "energy", "coupling", "seed", "dist", "steps", "burn_in",
            "trajectories", "sweep_energy", "sweep_lambda", "trials",
            "moment_draws", "dynamics_steps", "format")
    return {k: getattr(args, k) for k in keep if hasattr(args, k)}


def cmd_analyze(args) -> int:
    try:
        channels = channel_spectrum(args.width, args.energy)
    except ParabolicChannel as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    rep = check_main_hypothesis(channels)
    rows = []
    print(f"width {args.width}, energy {args.energy}: "
          f"{len(channels.channels)} channels, "
          f"{len(channels.hyperbolic_indices)} hyperbolic")
    print(f"{'ch':>3} {'modes':>8} {'mu':>12} {'kind':>11} "
          f"{'eta':>10} {'h^2':>10} {'nu':>3}")
    for c in channels.channels:
        modes = ";".join(str(l) for l in c.fourier_indices)
        print(f"{c.index:>3} {modes:>8} {c.mu:>12.6f} {c.kind:>11} "
              f"{c.eta:>10.6f} {c.h ** 2:>10.6f} {c.nu:>3}")
        rows.append({"channel": c.index, "modes": modes, "mu": c.mu,
                     "kind": c.kind, "eta": c.eta, "h_sq": c.h ** 2,
                     "nu": c.nu})
    print(f"h^2 average: {channels.h_av_sq:.12g}")
    print(f"non-resonance hypothesis: "
          f"{'satisfied' if rep.satisfied else 'VIOLATED'} "
          f"({len(rep.violations)} violations, {len(rep.warnings)} warnings, "
          f"tol {rep.tol:g})")
    for v in rep.violations[:10]:
        print(f"  violation {v.relation} channels={v.indices} "
              f"sigma={v.sigma:+d} residual={v.residual:.3e}")
    results = {"channels": rows, "h_av_sq": channels.h_av_sq,
               "hypothesis_satisfied": rep.satisfied,
               "violations": len(rep.violations),
               "warnings": len(rep.warnings)}
    _emit(args, _config_echo(args), results, rows)
    return EXIT_OK


def _estimate(model: StripModel, args):
    return estimate_spectrum(model, steps=args.steps, burn_in=args.burn_in,
                             n_trajectories=args.trajectories,
                             seed=args.seed)


def cmd_estimate(args) -> int:
    model = StripModel(args.width, args.energy, args.coupling,
                       DisorderLaw(args.dist), args.seed)
    try:
        est = _estimate(model, args)
    except ParabolicChannel as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    rows = [{"slot": q + 1, "gamma": float(est.gammas[q]),
             "stderr": float(est.stderrs[q])} for q in range(est.p)]
    print(f"gamma estimates (N={args.steps} x {args.trajectories} "
          f"trajectories, burn-in {est.burn_in}):")
    for r in rows:
        print(f"  gamma_{r['slot']:<2d} = {r['gamma']: .6e} "
              f"+- {r['stderr']:.2e}")
    results = {"gammas": [r["gamma"] for r in rows],
               "stderrs": [r["stderr"] for r in rows],
               "burn_in": est.burn_in, "n_batches": est.n_batches}
    _emit(args, _config_echo(args), results, rows)
    return EXIT_OK


def _compare_row(args, L: float, E: float, lam: float) -> dict:
    row = {"E": E, "lambda": lam, "gamma_L_direct": math.nan,
           "gamma_L_stderr": math.nan, "gamma_L_formula": math.nan,
           "gamma_1_direct": math.nan, "gamma_1_formula": math.nan,
           "sum_gamma_direct": math.nan, "sum_gamma_formula": math.nan,
           "bound_bulk": math.nan, "bound_edge": math.nan, "note": ""}
    try:
        channels = channel_spectrum(L, E)
        model = StripModel(L, E, lam, DisorderLaw(args.dist), args.seed)
        est = _estimate(model, args)
        row["gamma_L_direct"] = float(est.gammas[-1])
        row["gamma_L_stderr"] = float(est.stderrs[-1])
        row["gamma_1_direct"] = float(est.gammas[0])
        row["sum_gamma_direct"] = float(est.gammas.sum())
        row["gamma_L_formula"] = gamma_bottom_formula(channels,
                                                      est.weight_stats, lam)
        row["gamma_1_formula"] = gamma_top_formula(channels,
                                                   est.weight_stats, lam)
        if channels.all_elliptic:
            row["sum_gamma_formula"] = gamma_sum_formula(channels, lam)
        else:
            row["note"] = "hyperbolic channels: no sum formula"
        lo, hi = free_spectrum_interval(L)
        edge = lo if abs(E - lo) <= abs(E - hi) else hi
        bulk, edge_bound = gamma_bottom_bounds(channels, lam, band_edge=edge)
        row["bound_bulk"] = bulk
        row["bound_edge"] = edge_bound
    except (ParabolicChannel, OutsideSpectrum) as exc:
        row["note"] = f"rejected: {exc}"
    return row


def cmd_compare(args) -> int:
    if (args.sweep_energy is None) == (args.energy is None):
        print("compare: give exactly one of --energy or --sweep-energy",
              file=sys.stderr)
        return EXIT_USAGE
    energies = (_sweep(args.sweep_energy) if args.sweep_energy is not None
                else np.array([args.energy]))
    couplings = (_sweep(args.sweep_lambda) if args.sweep_lambda is not None
                 else np.array([args.coupling]))
    rows = []
    header_printed = False
    for E in energies:
        for lam in couplings:
            row = _compare_row(args, args.width, float(E), float(lam))
            rows.append(row)
            if not header_printed:
                print(",".join(row.keys()))
                header_printed = True
            print(",".join(_fmt(row[k]) for k in row))
    results = {"rows": rows}
    _emit(args, _config_echo(args), results, rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    rep = verify_algebra(args.width, args.energy, args.coupling,
                         trials=args.trials, seed=args.seed)
    if args.moment_draws > 0:
        try:
            rep.extend(verify_moments(args.width, args.energy,
                                      trials=args.moment_draws,
                                      seed=args.seed))
        except ParabolicChannel as exc:
            rep.status("moment suite skipped (parabolic)", True, str(exc))
    if args.dynamics_steps > 0:
        try:
            model = StripModel(args.width, args.energy, args.coupling,
                               DisorderLaw(args.dist), args.seed)
            rep.extend(verify_dynamics(model, steps=args.dynamics_steps))
        except ParabolicChannel as exc:
            rep.status("dynamics suite skipped (parabolic)", True, str(exc))
    print(rep.table())
    if args.out:
        if args.format == "json":
            _write_json(args.out, _config_echo(args), rep.to_dict())
        else:
            _write_csv(args.out, [{"name": e.name, "kind": e.kind,
                                   "value": e.value,
                                   "threshold": e.threshold,
                                   "passed": e.passed}
                                  for e in rep.entries])
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAILED


def cmd_meanfield(args) -> int:
    try:
        channels = channel_spectrum(args.width, args.energy)
        mf = meanfield_weights(channels)
    except (ParabolicChannel, HyperbolicPresent) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    rows = [{"channel": c.index, "sin_eta": math.sin(c.eta),
             "weight": float(mf.rho1[i]), "Z": mf.Z}
            for i, c in enumerate(channels.channels)]
    print(f"mean-field first-slot weights (Z = {mf.Z:.12g}, "
          f"normalization residual {mf.residual():.3e}):")
    for r in rows:
        print(f"  channel {r['channel']:>2d}: sin eta = {r['sin_eta']:.6f}  "
              f"weight = {r['weight']:.6f}")
    results = {"Z": mf.Z, "weights": [r["weight"] for r in rows],
               "residual": mf.residual()}
    _emit(args, _config_echo(args), results, rows)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="striplyap",
                     description="Lyapunov spectra of the Anderson model "
                                 "on a strip")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("analyze", help="channel table and non-resonance check")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("estimate", help="Monte-Carlo spectrum estimate")
    _add_common(p)
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--trajectories", type=int, default=8)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", help="direct estimates vs formulas over a sweep")
    _add_common(p, energy_required=False)
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--trajectories", type=int, default=8)
    p.add_argument("--sweep-energy", default=None)
    p.add_argument("--sweep-lambda", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="identity / moment / dynamics checks")
    _add_common(p)
    p.add_argument("--trials", type=int, default=100,
                   help="disorder draws for the residual checks")
    p.add_argument("--moment-draws", dest="moment_draws", type=int,
                   default=20_000, help="0 skips the moment suite")
    p.add_argument("--dynamics-steps", dest="dynamics_steps", type=int,
                   default=20_000, help="0 skips the dynamics suite")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("meanfield", help="closed mean-field weight solution")
    _add_common(p)
    p.set_defaults(func=cmd_meanfield)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "estimate" and args.burn_in is None:
        args.burn_in = default_burn_in(args.coupling)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

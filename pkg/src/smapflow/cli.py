"""Command-line entry point.

Subcommands: profiles | ode | evolve | extract | fit | verify.  Every report
path writes delimited text plus a rendered figure into the output directory
(SMAPFLOW_OUTDIR or ./smapflow_out unless --outdir is given).  Exit codes:
0 success, 2 usage or config error, 1 runtime failure (with a single
machine-readable "error: ..." line on stderr).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import extraction, pde, plots
from .geometry import bubble_profile, project_sphere, EquivariantProfile
from .harness import RunConfig, default_outdir, emit_plotdata, persist_run, load_run
from .initdata import BlowupDataSpec, build_blowup_data, closeness_report
from .linops import radiation_profile
from .modulation import ModState, integrate, fit_blowup_law
from .radial import RadialGrid


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="smapflow",
        description="equivariant map flow: profiles, reduced dynamics, "
                    "blow-up experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--outdir", type=Path, default=None,
                        help="output directory (default: $SMAPFLOW_OUTDIR)")
    common.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("profiles", parents=[common],
                       help="tabulate the radiation profile and bubbles")
    p.add_argument("--t01", action="store_true",
                   help="radiation profile table + tail check")
    p.add_argument("--rmax", type=float, default=400.0)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--bubble", type=int, default=None, metavar="K",
                   help="also write the degree-K bubble profile")
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.0)

    p = sub.add_parser("ode", parents=[common],
                       help="integrate the reduced parameter system and fit")
    p.add_argument("--b0", type=float, required=True)
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--variant", default="log", choices=("leading", "log"))
    p.add_argument("--lam-floor", type=float, default=1e-8)
    p.add_argument("--rtol", type=float, default=1e-10)
    p.add_argument("--decades", type=float, default=2.0)
    p.add_argument("--no-fit", action="store_true")

    p = sub.add_parser("evolve", parents=[common],
                       help="evolve the map flow and persist the run")
    p.add_argument("--data", default="blowup", choices=("blowup", "bubble"))
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--rmax", type=float, default=64.0)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--b0", type=float, default=0.1)
    p.add_argument("--B0", type=float, default=None)
    p.add_argument("--lam0", type=float, default=1.0)
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--shift", default="core", choices=("core", "none"))
    p.add_argument("--allow-large", action="store_true",
                   help="downgrade the amplitude-margin rejection to a warning")
    p.add_argument("--noise", type=float, default=0.0,
                   help="seeded smooth perturbation amplitude")
    p.add_argument("--sample-dt", type=float, default=0.05)
    p.add_argument("--snapshot-dt", type=float, default=None)
    p.add_argument("--no-extract", action="store_true")
    p.add_argument("--lam-floor", type=float, default=None)
    p.add_argument("--drift-abort", type=float, default=1e-6)
    p.add_argument("--tag", default="run")

    p = sub.add_parser("extract", parents=[common],
                       help="extract modulation series from a persisted run")
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--monitor", action="store_true",
                   help="also compute the regularity monitor per snapshot")

    p = sub.add_parser("fit", parents=[common],
                       help="fit the concentration law to a trajectory CSV")
    p.add_argument("--traj", type=Path, required=True)
    p.add_argument("--decades", type=float, default=2.0)

    p = sub.add_parser("verify", parents=[common],
                       help="run the acceptance suite, print pass/fail table")
    p.add_argument("--only", default=None,
                   help="comma-separated criterion numbers (default: all)")
    return ap


def _smooth_noise(r: np.ndarray, amp: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    mus = np.linspace(2.0, max(6.0, 0.25 * r[-1]), 4)
    coef = rng.standard_normal(4)
    out = np.zeros_like(r)
    for c, mu in zip(coef, mus):
        out += c * np.exp(-0.5 * (r - mu) ** 2)
    return amp * out


def _cmd_profiles(args, out: Path) -> int:
    wrote = []
    if args.t01:
        T = radiation_profile(r_max=args.rmax, n=args.points)
        T.save(out / "t01.csv")
        emit_plotdata(T, "tail-check", out / "t01_tail_check.csv")
        plots.save_radiation_figure(T, out / "t01.png")
        y_probe = min(1e3, 0.5 * args.rmax)
        val = T(y_probe)
        ratio = val / (y_probe * np.log(y_probe) - y_probe)
        print(f"t01: table -> {out / 't01.csv'}")
        print(f"t01 tail ratio at y={y_probe:g}: {ratio:.6f}")
        wrote.append("t01")
    if args.bubble is not None:
        g = RadialGrid.uniform(args.n, max(50.0, 10 * args.lam))
        p = bubble_profile(args.bubble, g, lam=args.lam, theta=args.theta)
        p.save(out / f"bubble_k{args.bubble}.profile")
        print(f"bubble: -> {out / f'bubble_k{args.bubble}.profile'}")
        wrote.append("bubble")
    if not wrote:
        raise ValueError("nothing to do: pass --t01 and/or --bubble K")
    return 0


def _cmd_ode(args, out: Path) -> int:
    traj = integrate(ModState(b=args.b0, a=args.a0), args.variant,
                     lam_floor=args.lam_floor, rtol=args.rtol)
    traj.to_csv(out / "trajectory.csv")
    emit_plotdata(traj, "trajectory", out / "trajectory_cols.csv")
    fit = None
    if not args.no_fit:
        fit = fit_blowup_law(traj, decades=args.decades)
        fit.to_json(out / "fit.json")
        emit_plotdata({"t": traj.t, "lam": traj.lam, "T": fit.T},
                      "rate-ratio", out / "rate_ratio.csv")
        print(f"fit: T={fit.T:.8g} kappa={fit.kappa:.6g} "
              f"max_rel_dev={fit.max_rel_dev:.3g}")
    plots.save_trajectory_figure(traj, out / "ode.png", fit=fit)
    print(f"trajectory: {len(traj.s)} samples, stop={traj.meta['stop']} "
          f"-> {out / 'trajectory.csv'}")
    return 0


def _cmd_evolve(args, out: Path) -> int:
    grid = RadialGrid.uniform(args.n, args.rmax)
    if args.data == "bubble":
        p0 = bubble_profile(args.k, grid, lam=args.lam0, theta=args.theta0)
    else:
        if args.k != 1:
            raise ValueError("blow-up data are a degree-1 construction")
        spec = BlowupDataSpec(grid=grid, b0=args.b0, lambda0=args.lam0,
                              theta0=args.theta0, B0=args.B0, shift=args.shift,
                              enforce_smallness=not args.allow_large)
        p0 = build_blowup_data(spec)
        rep = closeness_report(p0, args.lam0, args.theta0)
        print(f"data: energy excess {rep['energy_excess']:.4e}, "
              f"H1 distance {rep['sobolev_distance']:.4e}")
    if args.noise:
        v = p0.v.copy()
        v[:, 1] += _smooth_noise(grid.r, args.noise, args.seed)
        p0 = EquivariantProfile(k=p0.k, grid=grid, v=project_sphere(v))
    if args.t_end is None and args.lam_floor is None and args.no_extract:
        raise ValueError("need --t-end or --lam-floor")
    cfg = pde.SolverConfig(sample_dt=args.sample_dt,
                           snapshot_dt=args.snapshot_dt,
                           extract=not args.no_extract,
                           drift_abort=args.drift_abort)
    t_end = args.t_end if args.t_end is not None else 12.0
    rec = pde.evolve(p0, cfg, t_end=t_end, lam_floor=args.lam_floor)
    rundir = out / args.tag
    persist_run(rec, rundir)
    plots.save_run_figure(rec, rundir / "run.png")
    lam = rec.diag("lam")
    lam_note = ""
    if np.any(np.isfinite(lam)):
        lam_note = f", lam {np.nanmax(lam):.4f} -> {np.nanmin(lam):.4f}"
    print(f"run: status={rec.status}, drift={rec.drift_rel:.3e}, "
          f"max norm dev={rec.max_norm_dev:.3e}{lam_note} -> {rundir}")
    return 0


def _cmd_extract(args, out: Path) -> int:
    rec = load_run(args.run)
    if not rec.snapshots:
        raise ValueError(f"no snapshots under {args.run}")
    ts = [t for t, _ in rec.snapshots]
    profs = [p for _, p in rec.snapshots]
    ser = extraction.extract_series(ts, profs)
    ser.to_csv(out / "modseries.csv")
    monitor = None
    if args.monitor:
        mts, mvals = [], []
        for t, p in zip(ts, profs):
            i = np.searchsorted(ser.t, t)
            if i >= len(ser.t) or abs(ser.t[i] - t) > 1e-9:
                continue
            b = ser.b[i]
            if not (0.0 < b < 0.1):
                continue
            w = extraction.remainder(p, ser.lam[i], ser.theta[i])
            rep = extraction.sobolev_diagnostic(w, float(b))
            mts.append(t); mvals.append(rep["monitor"])
        np.savetxt(out / "monitor.csv",
                   np.column_stack([mts, mvals]) if mts else np.empty((0, 2)),
                   delimiter=",", header="t,monitor", comments="", fmt="%.17g")
        monitor = (np.array(mts), np.array(mvals))
        print(f"monitor: {len(mts)} samples -> {out / 'monitor.csv'}")
    plots.save_series_figure(ser, out / "series.png", monitor=monitor)
    print(f"series: {len(ser.t)} samples "
          f"({len(ser.provenance.get('flagged_t', []))} flagged) "
          f"-> {out / 'modseries.csv'}")
    return 0


def _cmd_fit(args, out: Path) -> int:
    from .modulation import ModTrajectory
    traj = ModTrajectory.from_csv(args.traj)
    fit = fit_blowup_law(traj, decades=args.decades)
    fit.to_json(out / "fit.json")
    emit_plotdata({"t": traj.t, "lam": traj.lam, "T": fit.T},
                  "rate-ratio", out / "rate_ratio.csv")
    plots.save_trajectory_figure(traj, out / "fit.png", fit=fit)
    print(f"fit: T={fit.T:.8g} kappa={fit.kappa:.6g} "
          f"max_rel_dev={fit.max_rel_dev:.3g} -> {out / 'fit.json'}")
    return 0


def _cmd_verify(args, out: Path) -> int:
    from .acceptance import run_all
    only = None
    if args.only:
        only = sorted(int(x) for x in args.only.split(","))
    results = run_all(out, only=only)
    width = max(len(r.title) for r in results)
    lines = []
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"[{mark}] {r.cid:>2}. {r.title:<{width}}  {r.details}")
    table = "\n".join(lines)
    print(table)
    (out / "acceptance_report.txt").write_text(table + "\n")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed "
          f"-> {out / 'acceptance_report.txt'}")
    return 0 if n_fail == 0 else 1


_DISPATCH = {"profiles": _cmd_profiles, "ode": _cmd_ode, "evolve": _cmd_evolve,
             "extract": _cmd_extract, "fit": _cmd_fit, "verify": _cmd_verify}


def cli_dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    params = {k: v for k, v in vars(args).items()
              if k not in ("cmd", "outdir", "seed")}
    cfg = RunConfig(subcommand=args.cmd, params=params, seed=args.seed,
                    outdir=args.outdir)
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = cfg.resolved_outdir()
    try:
        out.mkdir(parents=True, exist_ok=True)
        return _DISPATCH[args.cmd](args, out)
    except (ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return cli_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())

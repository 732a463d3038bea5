"""Acceptance suite: the eleven checks behind `smapflow verify`.

Each criterion function is self-contained, returns a CriterionResult with a
one-line summary, and writes its artifacts (delimited tables, figures, run
directories) under the given output directory.  The suite is also the body of
tests/test_acceptance.py, so the command line and the test run assert exactly
the same numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import extraction, pde, plots
from .extraction import extract_b_a, extract_lambda, extract_theta, remainder, sobolev_diagnostic
from .geometry import (EquivariantProfile, bubble, bubble_profile,
                       frenet_decompose, frenet_reconstruct, project_sphere,
                       rotate_xy)
from .harness import emit_plotdata, persist_run
from .initdata import BlowupDataSpec, build_blowup_data
from .linops import LinearizedOperator, apply_operator, radiation_profile, resonance
from .modulation import ModState, fit_blowup_law, instability_probe, integrate
from .radial import RadialGrid

ORDER_BAND = (3.0, 5.0)      # second order: error ratio 4 +- 25% per halving


@dataclass
class CriterionResult:
    cid: int
    title: str
    passed: bool
    details: str
    data: dict = field(default_factory=dict)


def _band(x, lo=ORDER_BAND[0], hi=ORDER_BAND[1]):
    return lo <= x <= hi


def _ywts(y):
    w = np.empty_like(y)
    w[0] = 0.5 * (y[1] - y[0]) + 0.5 * y[0]
    w[1:-1] = 0.5 * (y[2:] - y[:-2])
    w[-1] = 0.5 * (y[-1] - y[-2])
    return w


def criterion_1(outdir, shared) -> CriterionResult:
    """Sphere constraint after every accepted step."""
    g = RadialGrid.uniform(512, 50.0)
    p0 = build_blowup_data(BlowupDataSpec(grid=g, b0=0.05))
    cfg = pde.SolverConfig(sample_dt=0.05)
    rec = pde.evolve(p0, cfg, t_end=0.3)
    ok = rec.max_norm_dev <= 1e-12
    return CriterionResult(1, "sphere constraint", ok,
                           f"max |norm-1| = {rec.max_norm_dev:.2e} over every "
                           f"accepted step (tol 1e-12)")


def _smooth_bump(x):
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    out[m] = np.exp(4.0 - 1.0 / (x[m] * (1.0 - x[m])))
    return out


def _drift_pair(n, eps):
    g = RadialGrid.uniform(n, 50.0)
    v = bubble(3, g.r)
    v[:, 1] += eps * _smooth_bump((g.r - 0.5) / 4.0)
    p = EquivariantProfile(k=3, grid=g, v=project_sphere(v))
    cfg = pde.SolverConfig(dt_safety=0.7, sample_dt=0.002, drift_abort=None)
    return pde.evolve(p, cfg, t_end=0.1)


def criterion_2(outdir, shared) -> CriterionResult:
    """Energy conservation and its discretization order.

    The integrator conserves the flux-form energy, so its drift carries the
    1e-6 bound directly.  The independent trapezoid estimate drifts at the
    discretization order; the stationary-state relaxation of the bubble
    itself (a fourth-order effect) is subtracted by an unperturbed control
    run so the ratio isolates the perturbation dynamics.
    """
    rows = []
    diffs = []
    flux_drift_base = None
    for n in (512, 1024, 2048):
        rb = _drift_pair(n, 0.0)
        rp = _drift_pair(n, 1e-2)
        Eb, Ep = rb.diag("e_trap"), rp.diag("e_trap")
        m = min(len(Eb), len(Ep))
        diff = (Ep[:m] - Ep[0]) - (Eb[:m] - Eb[0])
        d_diff = float(np.max(np.abs(diff)) / Ep[0])
        Ef = rp.diag("e_flux")
        d_flux = float(np.max(np.abs(Ef - Ef[0])) / Ef[0])
        rows.append((n, d_flux, d_diff))
        diffs.append(d_diff)
        if n == 2048:
            flux_drift_base = d_flux
    ratios = [diffs[0] / diffs[1], diffs[1] / diffs[2]]
    np.savetxt(Path(outdir) / "c2_energy_drift.csv",
               np.array(rows), delimiter=",",
               header="n,flux_drift,trapezoid_differential_drift", comments="")
    ok = flux_drift_base <= 1e-6 and all(_band(r) for r in ratios)
    return CriterionResult(
        2, "energy conservation", ok,
        f"conserved-energy drift {flux_drift_base:.2e} (tol 1e-6); "
        f"quadrature-drift ratios {ratios[0]:.2f}, {ratios[1]:.2f} (band 3..5)",
        data={"rows": rows, "ratios": ratios})


def criterion_3(outdir, shared) -> CriterionResult:
    """Stationarity of the degree-1 bubble at second order."""
    devs = []
    hs = []
    for n in (512, 1024, 2048):
        g = RadialGrid.uniform(n, 50.0)
        p = bubble_profile(1, g)
        cfg = pde.SolverConfig(sample_dt=0.05)
        rec = pde.evolve(p, cfg, t_end=0.1)
        dev = float(np.max(np.abs(rec.snapshots[-1][1].v - p.v)))
        devs.append(dev)
        hs.append(g.spacing_min)
    ratios = [devs[0] / devs[1], devs[1] / devs[2]]
    C = devs[-1] / hs[-1] ** 2
    ok = all(_band(r) for r in ratios)
    return CriterionResult(
        3, "bubble stationarity", ok,
        f"sup deviations {devs[0]:.2e}/{devs[1]:.2e}/{devs[2]:.2e}, "
        f"ratios {ratios[0]:.2f}, {ratios[1]:.2f} (band 3..5); C = {C:.2f}",
        data={"devs": devs, "ratios": ratios})


def criterion_4(outdir, shared) -> CriterionResult:
    """Discrete resonance: the zero mode is annihilated at second order."""
    res = []
    for n in (2000, 4000, 8000):
        y = np.linspace(50.0 / n, 50.0, n)
        op = LinearizedOperator.on_grid(y)
        psi = resonance(y)
        g = apply_operator(op, psi).vals
        w = _ywts(y)
        res.append(float(np.sqrt(np.sum(w * y * g * g) / np.sum(w * y * psi * psi))))
    ratios = [res[0] / res[1], res[1] / res[2]]
    ok = all(_band(r) for r in ratios)
    return CriterionResult(
        4, "resonance annihilation", ok,
        f"relative residuals {res[0]:.2e}/{res[1]:.2e}/{res[2]:.2e}, "
        f"ratios {ratios[0]:.2f}, {ratios[1]:.2f} (band 3..5)")


def criterion_5(outdir, shared) -> CriterionResult:
    """Radiation profile tail against y log y - y."""
    T = radiation_profile(r_max=1e4)
    T.save(Path(outdir) / "c5_t01.csv")
    emit_plotdata(T, "tail-check", Path(outdir) / "c5_tail_check.csv")
    y0 = 1e3
    ratio = T(y0) / (y0 * np.log(y0) - y0)
    err = abs(ratio - 1.0)
    ok = err <= 0.05
    return CriterionResult(
        5, "radiation tail", ok,
        f"|T(1e3)/(1e3 log 1e3 - 1e3) - 1| = {err:.2e} (tol 0.05)")


def criterion_6(outdir, shared) -> CriterionResult:
    """Leading-order collapse law in closed form."""
    b0, lam0 = 0.05, 1.0
    T = lam0 ** 2 / b0
    tr = integrate(ModState(b=b0, lam=lam0), "leading", lam_floor=1e-6)
    pred = (b0 / lam0) * (T - tr.t)
    err = float(np.max(np.abs(tr.lam / pred - 1.0)))
    ok = err <= 1e-8
    return CriterionResult(
        6, "leading-order law", ok,
        f"max relative deviation from (b0/lam0)(T-t): {err:.2e} (tol 1e-8)")


def criterion_7(outdir, shared) -> CriterionResult:
    """Log-corrected rate law at the reduced level.

    Asserted at face value: the compensated ratio must flatten to
    within 10% over the final two decades, and the fitted front factor must
    be stable across integrator tolerances.  The first clause fails for this
    right-hand side (see the decisions ledger): the printed log correction
    integrates to a law one half-power of log short of the target, so the
    ratio still drifts at the 25-50% level however the window is chosen.
    The result is reported honestly rather than retuned.
    """
    variations = {}
    kappa_stab = {}
    for b0 in (1e-2, 1e-3):
        tr = integrate(ModState(b=b0), "log", lam_floor=1e-9)
        fit = fit_blowup_law(tr)
        m = (tr.t >= fit.window[0]) & (tr.t <= fit.window[1])
        gap = fit.T - tr.t[m]
        ratio = tr.lam[m] * np.log(gap) ** 2 / gap
        variations[b0] = float((ratio.max() - ratio.min()) / np.median(ratio))
        tr2 = integrate(ModState(b=b0), "log", lam_floor=1e-9, rtol=1e-12)
        fit2 = fit_blowup_law(tr2)
        kappa_stab[b0] = float(abs(fit.kappa / fit2.kappa - 1.0))
        emit_plotdata({"t": tr.t, "lam": tr.lam, "T": fit.T}, "rate-ratio",
                      Path(outdir) / f"c7_rate_ratio_b0_{b0:g}.csv")
        plots.save_trajectory_figure(tr, Path(outdir) / f"c7_b0_{b0:g}.png",
                                     fit=fit)
    ok = all(v < 0.10 for v in variations.values()) and \
        all(s <= 0.05 for s in kappa_stab.values())
    det = ("ratio variation over final two decades: "
           + ", ".join(f"b0={b0:g}: {v:.1%}" for b0, v in variations.items())
           + " (tol 10%); kappa tolerance stability: "
           + ", ".join(f"{s:.1e}" for s in kappa_stab.values())
           + " (tol 5%)")
    return CriterionResult(7, "log-corrected rate law", ok, det,
                           data={"variations": variations,
                                 "kappa_stability": kappa_stab})


def criterion_8(outdir, shared) -> CriterionResult:
    """Codimension-one structure of the symmetric branch."""
    rep0 = instability_probe(1e-2, 0.0, lam_floor=1e-4)
    a_zero = float(np.max(np.abs(rep0["traj"].a)))
    rep_p = instability_probe(1e-2, 0.1, lam_floor=1e-4)
    grow = rep_p["monotone_abs"] and rep_p["growth_factor"] > 10
    tp = rep_p["traj"]
    tm = instability_probe(1e-2, -0.1, lam_floor=1e-4)["traj"]
    mirror = max(float(np.max(np.abs(tp.a + tm.a))),
                 float(np.max(np.abs(tp.theta + tm.theta))))
    mirror_b = float(np.max(np.abs(tp.b - tm.b)))
    scale = float(np.max(np.abs(tp.a)))
    ok = (a_zero == 0.0) and grow and mirror <= 1e-10 * max(scale, 1.0) \
        and mirror_b <= 1e-10
    return CriterionResult(
        8, "codimension-one instability", ok,
        f"a0=0: max|a| = {a_zero:.1e}; seeded ratio grows monotonically "
        f"x{rep_p['growth_factor']:.1e}; mirror asymmetry {mirror:.1e}")


RUN9 = {"b0": 0.1, "lam0": 1.0, "B0": 6.5, "n": 2048, "rmax": 64.0,
        "t_end": 12.0, "sample_dt": 0.05, "snapshot_dt": 0.25}


def _concentration_run(outdir, shared):
    if "run9" in shared:
        return shared["run9"]
    g = RadialGrid.uniform(RUN9["n"], RUN9["rmax"])
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # amplitude margin is overridden knowingly
        p0 = build_blowup_data(BlowupDataSpec(
            grid=g, b0=RUN9["b0"], lambda0=RUN9["lam0"], B0=RUN9["B0"],
            enforce_smallness=False))
    cfg = pde.SolverConfig(extract=True, sample_dt=RUN9["sample_dt"],
                           snapshot_dt=RUN9["snapshot_dt"])
    rec = pde.evolve(p0, cfg, t_end=RUN9["t_end"])
    rundir = Path(outdir) / "c9_run"
    persist_run(rec, rundir)
    plots.save_run_figure(rec, rundir / "run.png")
    shared["run9"] = rec
    return rec


def trusted_window(t, lam):
    """Largest strictly-decreasing suffix of the extracted scale series.

    The construction ramp relaxes through the core early in the run and
    produces one shallow rebound of the extracted scale; the collapse
    proper is the monotone tail after it.
    """
    dl = np.diff(lam)
    idx = np.where(dl >= 0)[0]
    i0 = int(idx.max() + 1) if len(idx) else 0
    return i0


def criterion_9(outdir, shared) -> CriterionResult:
    """PDE-level concentration by at least a factor two."""
    rec = _concentration_run(outdir, shared)
    t, lam = rec.diag("t"), rec.diag("lam")
    good = np.isfinite(lam)
    t, lam = t[good], lam[good]
    factor_total = float(lam[0] / np.min(lam))
    i0 = trusted_window(t, lam)
    tw, lw = t[i0:], lam[i0:]
    factor_window = float(lw[0] / lw[-1])
    ser = extract_b_a(tw, lw, np.zeros_like(tw))
    b_pos = bool(np.all(ser.b > 0))
    k = 4
    b_coarse = np.full_like(ser.b, np.nan)
    b_coarse[k:-k] = -(lw[2 * k:] - lw[:-2 * k]) / (tw[2 * k:] - tw[:-2 * k]) * lw[k:-k]
    m = np.isfinite(b_coarse)
    consis = float(np.max(np.abs(ser.b[m] - b_coarse[m]) / ser.b[m]))
    ok = (rec.status == "lam_floor" and factor_total >= 2.0
          and factor_window >= 2.0 and b_pos and consis <= 0.2)
    return CriterionResult(
        9, "PDE concentration", ok,
        f"scale fell x{factor_total:.2f} (x{factor_window:.2f} on the trusted "
        f"window t in [{tw[0]:.2f}, {tw[-1]:.2f}]); b > 0 on window: {b_pos}; "
        f"rate consistency {consis:.1%} (tol 20%)",
        data={"factor_total": factor_total, "factor_window": factor_window,
              "consistency": consis, "window": (float(tw[0]), float(tw[-1]))})


def criterion_10(outdir, shared) -> CriterionResult:
    """Decomposition and rate-extraction round trips."""
    # frame round trip on genuinely perturbed data
    g = RadialGrid.uniform(2048, 50.0)
    p = build_blowup_data(BlowupDataSpec(grid=g, b0=0.05, theta0=0.4))
    y, al, be, ga = frenet_decompose(p, 1.0, 0.4)
    p_back = frenet_reconstruct(y, al, be, ga, 1.0, 0.4, g)
    rt = float(np.max(np.abs(p_back.v - p.v)))
    # extractor on exact rescaled-rotated bubbles
    pb = bubble_profile(1, g, lam=0.37, theta=0.3)
    lam_hat = extract_lambda(pb)
    th_hat = extract_theta(pb, lam_hat)
    lam_err = abs(lam_hat - 0.37)
    th_err = abs(th_hat - 0.3)
    # finite-difference inversion of a reduced trajectory at two samplings
    from scipy.interpolate import CubicSpline
    tr = integrate(ModState(b=0.05, a=0.05 * 0.05 / (-np.log(0.05))), "log",
                   lam_floor=5e-2, n_samples=3000)
    s_lam = CubicSpline(tr.t, tr.lam)
    s_th = CubicSpline(tr.t, tr.theta)
    s_b = CubicSpline(tr.t, tr.b)
    s_a = CubicSpline(tr.t, tr.a)
    errs = []
    for dt in (0.2, 0.1):
        tt = np.arange(tr.t[0], tr.t[-1], dt)
        ser = extract_b_a(tt, s_lam(tt), s_th(tt))
        err = max(float(np.max(np.abs(ser.b - s_b(tt)))),
                  float(np.max(np.abs(ser.a - s_a(tt)))))
        errs.append(err)
    fd_ratio = errs[0] / errs[1]
    ok = (rt <= 1e-10 and lam_err <= 1.5e-3 and th_err <= 1e-8
          and errs[1] <= 1e-4 and 2.2 <= fd_ratio <= 7.5)
    return CriterionResult(
        10, "round trips", ok,
        f"frame round trip {rt:.1e} (tol 1e-10); bubble (lam, theta) errors "
        f"{lam_err:.1e}/{th_err:.1e}; FD inversion err {errs[1]:.1e}, "
        f"halving ratio {fd_ratio:.2f}")


def criterion_11(outdir, shared) -> CriterionResult:
    """Regularity monitor along the concentration run: finite and emitted."""
    rec = _concentration_run(outdir, shared)
    ts = [t for t, _ in rec.snapshots]
    profs = [p for _, p in rec.snapshots]
    ser = extraction.extract_series(ts, profs)
    mts, mvals = [], []
    for t, p in zip(ts, profs):
        i = int(np.argmin(np.abs(ser.t - t)))
        if abs(ser.t[i] - t) > 1e-9:
            continue
        b = float(ser.b[i])
        if not (0.0 < b < 0.1):
            continue          # rebound interval sits outside the monitor domain
        w = remainder(p, float(ser.lam[i]), float(ser.theta[i]))
        rep = sobolev_diagnostic(w, b)
        mts.append(t)
        mvals.append(rep["monitor"])
    out = Path(outdir) / "c11_monitor.csv"
    np.savetxt(out, np.column_stack([mts, mvals]), delimiter=",",
               header="t,monitor", comments="", fmt="%.17g")
    plots.save_series_figure(ser, Path(outdir) / "c11_series.png",
                             monitor=(np.array(mts), np.array(mvals)))
    mvals = np.array(mvals)
    ok = len(mvals) >= 5 and bool(np.all(np.isfinite(mvals))) and out.exists()
    rng = (float(np.min(mvals)), float(np.max(mvals))) if len(mvals) else (np.nan,) * 2
    return CriterionResult(
        11, "regularity monitor", ok,
        f"M computed at {len(mvals)} snapshots, all finite, range "
        f"[{rng[0]:.3g}, {rng[1]:.3g}] -> {out.name}")


REGISTRY = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
            9: criterion_9, 10: criterion_10, 11: criterion_11}


def run_all(outdir, only=None) -> list:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    ids = sorted(REGISTRY) if only is None else sorted(only)
    shared = {}
    results = []
    for cid in ids:
        if cid not in REGISTRY:
            raise ValueError(f"no criterion {cid}")
        results.append(REGISTRY[cid](out, shared))
    return results

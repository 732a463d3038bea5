"""Reduced parameter dynamics for near-bubble evolution.

State (b, a, lam, theta) in rescaled time s, with physical time recovered
through dt/ds = lam^2:

    lam_s = -b lam,   theta_s = -a,

so b > 0 means the bubble is shrinking and a is the rotation rate.  Two
right-hand sides for (b, a) are provided:

    leading:   b_s = -b^2 - a^2,            a_s = 0
    log:       b_s = -b^2 - b^2/(2 log(1/b)) - a^2,
               a_s = -2 a b / log(1/b)

On the a=0 branch the leading system integrates in closed form,

    b = b0/(1 + b0 s),  lam = lam0/(1 + b0 s),
    lam(t) = (b0/lam0) (T - t),  T = lam0^2/b0,

which is the oracle for the integrator.  The log-corrected branch is the
desk-scale model of the concentration law lam ~ kappa (T-t)/log^2(T-t); the
a-equation makes the a=0 branch codimension one: a/(b/log(1/b)) grows along
trajectories, so any small a0 eventually leaves the regime.

Validity domain: 0 < b < b_ceiling (default 0.1); the logarithmic corrections
are asymptotic in small b and meaningless above that.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

B_CEILING = 0.1

VARIANTS = ("leading", "log")


@dataclass(frozen=True)
class ModState:
    b: float
    a: float = 0.0
    lam: float = 1.0
    theta: float = 0.0
    s: float = 0.0
    t: float = 0.0


def modulation_rhs(state: ModState, variant: str = "log",
                   b_ceiling: float = B_CEILING) -> dict:
    """Derivatives with respect to rescaled time s; also reports dt/ds."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    b, a, lam = state.b, state.a, state.lam
    if not (0.0 < b < b_ceiling):
        raise ValueError(f"b={b} outside the validity domain (0, {b_ceiling})")
    if variant == "leading":
        b_s = -b * b - a * a
        a_s = 0.0
    else:
        ell = -np.log(b)
        b_s = -b * b - b * b / (2.0 * ell) - a * a
        a_s = -2.0 * a * b / ell
    return {"b_s": b_s, "a_s": a_s, "lam_s": -b * lam,
            "theta_s": -a, "t_s": lam * lam}


@dataclass
class ModTrajectory:
    s: np.ndarray
    t: np.ndarray
    lam: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    a: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        header = "s,t,lambda,b,theta,a"
        data = np.column_stack([self.s, self.t, self.lam, self.b, self.theta, self.a])
        np.savetxt(str(path), data, delimiter=",", header=header, comments="",
                   fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(str(path), delimiter=",", skiprows=1)
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3],
                   data[:, 4], data[:, 5])


def integrate(state0: ModState, variant: str = "log",
              lam_floor: float | None = None, s_budget: float | None = None,
              rtol: float = 1e-10, atol: float = 1e-14,
              b_ceiling: float = B_CEILING, n_samples: int = 2000) -> ModTrajectory:
    """March the reduced system to the scale floor or the s budget.

    Dense output is sampled at geometrically spaced scale targets (resolved by
    bisection), so trajectories cover every decade of shrinkage evenly; the
    terminal point itself comes from the integrator's event localization.
    """
    if lam_floor is None and s_budget is None:
        raise ValueError("need lam_floor or s_budget as a stopping rule")
    if not (0.0 < state0.b < b_ceiling):
        raise ValueError(f"b0={state0.b} outside the validity domain (0, {b_ceiling})")
    if lam_floor is not None and lam_floor >= state0.lam:
        raise ValueError("lam_floor must sit below the initial scale")

    def rhs(s, yv):
        # trial steps may overshoot the terminal b event; clamp so the
        # logarithm stays finite there (accepted steps never see the clamp)
        b = max(yv[0], 1e-16)
        a, lam = yv[1], yv[2]
        if variant == "leading":
            b_s, a_s = -b * b - a * a, 0.0
        else:
            ell = -np.log(b)
            b_s = -b * b - b * b / (2.0 * ell) - a * a
            a_s = -2.0 * a * b / ell
        return [b_s, a_s, -b * lam, -a, lam * lam]

    events = []
    if lam_floor is not None:
        ev_lam = lambda s, yv: yv[2] - lam_floor
        ev_lam.terminal = True
        ev_lam.direction = -1
        events.append(ev_lam)
    # leave the regime before b crosses zero (log(1/b) blows up)
    ev_b = lambda s, yv: yv[0] - 1e-13
    ev_b.terminal = True
    ev_b.direction = -1
    events.append(ev_b)

    s_end = s_budget if s_budget is not None else 10.0 / state0.b / min(lam_floor, 1.0) ** 2
    y0 = [state0.b, state0.a, state0.lam, state0.theta, state0.t]
    sol = solve_ivp(rhs, (state0.s, state0.s + s_end), y0, method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True, events=events)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")

    s_fin = sol.t[-1]
    lam_of = lambda s: sol.sol(s)[2]
    lam_end = lam_of(s_fin)
    # geometric ladder of scale targets, each located by bisection on the
    # dense output (lam is strictly decreasing while b > 0)
    targets = np.geomspace(state0.lam, lam_end, n_samples)[1:-1]
    ss = [state0.s]
    for tgt in targets:
        lo, hi = ss[-1], s_fin
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if lam_of(mid) > tgt:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * max(1.0, abs(hi)):
                break
        ss.append(0.5 * (lo + hi))
    ss.append(s_fin)
    ss = np.array(ss)
    Y = sol.sol(ss)
    reason = "s_budget"
    if sol.t_events and lam_floor is not None and len(sol.t_events[0]):
        reason = "lam_floor"
    elif len(sol.t_events[-1]):
        reason = "b_floor"
    meta = {"variant": variant, "rtol": rtol, "atol": atol,
            "b0": state0.b, "a0": state0.a, "lam0": state0.lam,
            "stop": reason}
    return ModTrajectory(s=ss, t=Y[4], lam=Y[2], b=Y[0], theta=Y[3], a=Y[1],
                         meta=meta)


@dataclass
class FitResult:
    T: float
    kappa: float
    max_rel_dev: float
    window: tuple
    n_points: int

    def to_json(self, path=None):
        doc = {"T": self.T, "kappa": self.kappa,
               "max_rel_dev": self.max_rel_dev,
               "window_t": list(self.window), "n_points": self.n_points}
        text = json.dumps(doc, indent=1)
        if path is not None:
            with open(str(path), "w") as fh:
                fh.write(text + "\n")
        return text


def _model(T, kappa, t):
    g = T - t
    return kappa * g / np.log(g) ** 2


def fit_blowup_law(traj: ModTrajectory, decades: float = 2.0) -> FitResult:
    """Fit lam ~ kappa (T-t)/log^2(T-t) over the last decades of T-t.

    T is seeded by continuing the end state at leading order
    (T0 = t_end + lam_end^2/b_end), the window is the final `decades` of
    T0 - t, and (T, kappa) minimize the relative deviation there; the window
    is then recomputed from the fitted T and the fit repeated once.  The
    reported residual is the maximum relative deviation over the final window.
    """
    t, lam, b = traj.t, traj.lam, traj.b
    t_end, lam_end, b_end = t[-1], lam[-1], b[-1]
    T_cur = t_end + lam_end ** 2 / b_end

    def window(T):
        gap_end = T - t_end
        if gap_end <= 0:
            raise ValueError("estimated blow-up time before the data ends")
        m = (T - t) <= gap_end * 10.0 ** decades
        if np.sum(m) < 8:
            raise ValueError("too few samples in the fit window")
        return m

    kappa_cur = None
    m = window(T_cur)
    for _ in range(2):   # fit, re-window once, refit
        tw, lw = t[m], lam[m]
        gap_end = T_cur - t_end

        def resid(x):
            T, kap = x
            return _model(T, kap, tw) / lw - 1.0

        kap0 = float(np.mean(lw * np.log(T_cur - tw) ** 2 / (T_cur - tw)))
        res = least_squares(resid, x0=[T_cur, kap0],
                            bounds=([t_end + 1e-3 * gap_end, 0.0],
                                    [t_end + 1e3 * gap_end, np.inf]))
        T_cur, kappa_cur = float(res.x[0]), float(res.x[1])
        m = window(T_cur)
    tw, lw = t[m], lam[m]
    dev = float(np.max(np.abs(_model(T_cur, kappa_cur, tw) / lw - 1.0)))
    return FitResult(T=T_cur, kappa=kappa_cur, max_rel_dev=dev,
                     window=(float(tw[0]), float(tw[-1])), n_points=int(np.sum(m)))


def instability_probe(b0: float, epsilon: float, lam_floor: float = 1e-6,
                      rtol: float = 1e-10) -> dict:
    """Seed a0 = epsilon * b0/log(1/b0) and track rho = a / (b/log(1/b)).

    On the log-corrected system the a=0 branch is invariant; for any
    epsilon != 0 the ratio rho drifts away from 0 (d log|rho|/ds ~ b > 0), the
    codimension-one picture at the reduced level.  |epsilon| <= 1 keeps the
    seed inside the near-branch regime.
    """
    if abs(epsilon) > 1.0:
        raise ValueError("epsilon must lie in [-1, 1]")
    ell0 = -np.log(b0)
    a0 = epsilon * b0 / ell0
    traj = integrate(ModState(b=b0, a=a0), "log", lam_floor=lam_floor, rtol=rtol)
    with np.errstate(divide="ignore"):
        rho = traj.a * (-np.log(traj.b)) / traj.b
    report = {
        "epsilon": epsilon, "a0": a0, "rho": rho, "traj": traj,
        "rho_initial": float(rho[0]), "rho_final": float(rho[-1]),
        "monotone_abs": bool(np.all(np.diff(np.abs(rho)) >= -1e-12)),
        "sign_fixed": bool(np.all(rho * np.sign(epsilon) >= 0)) if epsilon else bool(np.all(rho == 0)),
    }
    if epsilon:
        report["growth_factor"] = float(np.abs(rho[-1]) / np.abs(rho[0]))
    return report

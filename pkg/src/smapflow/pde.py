"""Time evolution of the equivariant map flow with a norm-preserving integrator.

The reduced field v(r, t) on the unit sphere obeys

    v_t = v x ( v'' + v'/r - (k^2/r^2)(v1, v2, 0) ),

with v pinned to the north pole through a ghost value at r = 0 and frozen to
its initial (bubble) value at the outer edge.  The spatial operator is a
flux-form second-order stencil; time stepping is implicit midpoint solved by
fixed-point iteration with a per-node closed form, which makes every update
an exact rotation of the node, so the sphere constraint survives to roundoff
and the discrete energy below is conserved up to the nonlinear solve
tolerance.

Two energies are tracked: `discrete_energy` is the face-quadrature form that
the semi-discrete flow conserves exactly, and `quadrature_energy` is an
independent trapezoid estimate used to cross-check it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import geometry
from .extraction import (ExtractionAmbiguousError, DegeneratePhaseError,
                         _crossing_from_arrays)
from .geometry import NORTH, EquivariantProfile
from .radial import RadialGrid


class StepFailureError(RuntimeError):
    """Fixed-point iteration did not converge within the budget."""


class CorruptedStateError(RuntimeError):
    """Non-finite values in the field."""


def _field_operator(r: np.ndarray, k: int, north: np.ndarray = NORTH):
    """Effective field F(v) = Lap_r v - (k^2/r^2)(v1, v2, 0), flux form.

    Ghost node at r = 0 carries the north pole; the last node is frozen
    (F = 0 there), matching the outer Dirichlet condition.
    """
    n = len(r)
    rg = np.concatenate([[0.0], r])
    hm = r - rg[:-1]                      # spacing to the left neighbor
    rmh = 0.5 * (r + rg[:-1])             # left face radii
    w = np.empty(n)
    w[0] = 0.5 * r[1]
    w[1:-1] = 0.5 * (r[2:] - r[:-2])
    w[-1] = 0.5 * (r[-1] - r[-2])
    cm = rmh[1:-1] / hm[1:-1]
    cp = (0.5 * (r[1:-1] + r[2:])) / (r[2:] - r[1:-1])
    cw = 1.0 / (r[1:-1] * w[1:-1])
    c0m = rmh[0] / hm[0]
    c0p = (0.5 * (r[0] + r[1])) / (r[1] - r[0])
    c0w = 1.0 / (r[0] * w[0])
    k2 = k * k / r ** 2

    def F(v):
        out = np.empty_like(v)
        out[1:-1] = cw[:, None] * (cp[:, None] * (v[2:] - v[1:-1])
                                   - cm[:, None] * (v[1:-1] - v[:-2]))
        out[0] = c0w * (c0p * (v[1] - v[0]) - c0m * (v[0] - north))
        out[:, 0] -= k2 * v[:, 0]
        out[:, 1] -= k2 * v[:, 1]
        out[-1] = 0.0
        return out

    return F


def _cross(a, b):
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def equivariant_rhs(p: EquivariantProfile) -> np.ndarray:
    """dv/dt = v x F(v); pointwise orthogonal to v, zero at the frozen edge."""
    if not np.all(np.isfinite(p.v)):
        raise CorruptedStateError("non-finite field values")
    F = _field_operator(p.grid.r, p.k)
    return _cross(p.v, F(p.v))


def stable_dt(grid: RadialGrid, k: int, safety: float = 0.8) -> float:
    """Largest dt keeping the fixed-point map a contraction, with margin.

    The contraction factor scales like (dt/2) * ||F'||; the dominant entries
    are the 4/h^2 stencil diagonal and the centrifugal weight at the first
    node.
    """
    r = grid.r
    h = grid.spacing_min
    lip = 4.0 / h ** 2 + 2.0 / (r[0] * h) + k * k / r[0] ** 2
    return safety * 0.8 / lip


def _step_arrays(v, F, dt, tol, max_iter):
    """One implicit midpoint step.  Returns (v_new, iterations, pre_dev).

    Each fixed-point sweep freezes the field f = F(m) and solves the per-node
    midpoint relation m - (dt/2) m x f = v in closed form; the induced map
    v -> 2m - v is an exact per-node rotation, so norms are preserved up to
    the iteration tolerance before the final projection.
    """
    c = 0.5 * dt
    m = v
    for it in range(max_iter):
        f = F(m)
        fv = _cross(f, v)
        fdv = np.sum(f * v, axis=1)
        f2 = np.sum(f * f, axis=1)
        mn = (v - c * fv + (c * c) * f * fdv[:, None]) / (1.0 + c * c * f2)[:, None]
        mn[-1] = v[-1]
        d = float(np.max(np.abs(mn - m)))
        m = mn
        if d < tol:
            vn = 2.0 * m - v
            vn[-1] = v[-1]
            nrm = np.linalg.norm(vn, axis=1)
            pre_dev = float(np.max(np.abs(nrm - 1.0)))
            vn = vn / nrm[:, None]
            return vn, it + 1, pre_dev
    raise StepFailureError(f"fixed point stalled at {d:.3e} (tol {tol:.1e})")


@dataclass(frozen=True)
class SolverConfig:
    dt: float | None = None            # None: contraction heuristic
    dt_safety: float = 0.8
    tol: float = 1e-12                 # fixed-point tolerance
    max_iter: int = 80
    drift_abort: float | None = 1e-6   # relative energy drift stop; None disables
    max_halvings: int = 8
    sample_dt: float = 0.05            # diagnostics cadence in t
    snapshot_dt: float | None = None
    extract: bool = False              # track lam/theta along the run

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


def step(p: EquivariantProfile, dt: float, tol: float = 1e-12,
         max_iter: int = 80) -> EquivariantProfile:
    """Single midpoint step at the profile level (dt of either sign)."""
    F = _field_operator(p.grid.r, p.k)
    vn, _, _ = _step_arrays(p.v, F, dt, tol, max_iter)
    return EquivariantProfile(k=p.k, grid=p.grid, v=vn)


def discrete_energy(p: EquivariantProfile) -> float:
    """Face-quadrature reduced energy; invariant of the semi-discrete flow.

    Gradient terms live on cell faces (including the origin-closing face
    against the north pole); the centrifugal term uses the node trapezoid
    weights.  On a uniform grid this is algebraically the energy whose
    gradient is the flux stencil, which is why midpoint conserves it.
    """
    r, v, k = p.grid.r, p.v, p.k
    w = p.grid.trapezoid_weights()
    dv0 = (v[0] - NORTH) / r[0]
    grad = 0.5 * r[0] * r[0] * float(np.sum(dv0 * dv0))
    dvi = (v[1:] - v[:-1]) / (r[1:] - r[:-1])[:, None]
    rf = 0.5 * (r[1:] + r[:-1])
    grad += float(np.sum(rf * (r[1:] - r[:-1]) * np.sum(dvi * dvi, axis=1)))
    pot = float(np.sum(w * (k * k / r ** 2) * (v[:, 0] ** 2 + v[:, 1] ** 2) * r))
    return 2.0 * np.pi * (grad + pot)


def quadrature_energy(p: EquivariantProfile) -> float:
    """Independent energy estimate (centered-gradient trapezoid route)."""
    return geometry.dirichlet_energy(p)


@dataclass
class RunRecord:
    config: dict
    diagnostics: dict
    snapshots: list
    status: str
    max_norm_dev: float
    drift_rel: float
    flags: list = field(default_factory=list)

    DIAG_COLS = ("t", "e_flux", "e_trap", "norm_dev", "lam", "theta")

    def diag(self, col: str) -> np.ndarray:
        return np.asarray(self.diagnostics[col])

    def save(self, outdir) -> Path:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        doc = dict(self.config)
        doc.update({"status": self.status, "max_norm_dev": self.max_norm_dev,
                    "drift_rel": self.drift_rel, "flags": self.flags})
        (out / "config.json").write_text(json.dumps(doc, indent=1) + "\n")
        table = np.column_stack([self.diag(c) for c in self.DIAG_COLS])
        np.savetxt(out / "diagnostics.csv", table, delimiter=",",
                   header=",".join(self.DIAG_COLS), comments="", fmt="%.17g")
        snapdir = out / "snapshots"
        snapdir.mkdir(exist_ok=True)
        for i, (t, prof) in enumerate(self.snapshots):
            prof.save(snapdir / f"{i:04d}.profile")
        if self.snapshots:
            times = {f"{i:04d}": t for i, (t, _) in enumerate(self.snapshots)}
            (snapdir / "times.json").write_text(json.dumps(times, indent=1) + "\n")
        return out

    @classmethod
    def load(cls, outdir):
        out = Path(outdir)
        doc = json.loads((out / "config.json").read_text())
        status = doc.pop("status")
        max_dev = doc.pop("max_norm_dev")
        drift = doc.pop("drift_rel")
        flags = doc.pop("flags", [])
        raw = np.loadtxt(out / "diagnostics.csv", delimiter=",", skiprows=1,
                         ndmin=2)
        diagnostics = {c: raw[:, i] for i, c in enumerate(cls.DIAG_COLS)}
        snapshots = []
        snapdir = out / "snapshots"
        if (snapdir / "times.json").exists():
            times = json.loads((snapdir / "times.json").read_text())
            for stem in sorted(times):
                prof = EquivariantProfile.load(snapdir / f"{stem}.profile")
                snapshots.append((times[stem], prof))
        return cls(config=doc, diagnostics=diagnostics, snapshots=snapshots,
                   status=status, max_norm_dev=max_dev, drift_rel=drift,
                   flags=flags)


def evolve(p0: EquivariantProfile, cfg: SolverConfig,
           t_end: float | None = None,
           lam_floor: float | None = None) -> RunRecord:
    """Advance p0 until the first stop rule fires.

    Stop rules: t_end; extracted scale under the floor (the resolution floor
    10 * innermost spacing is always enforced when extraction is on, a caller
    floor can only raise it); relative drift of the conserved energy past
    cfg.drift_abort.  Step failures halve dt for the failing step; running
    out of halvings aborts with the partial record.
    """
    if t_end is None and lam_floor is None:
        raise ValueError("need t_end or lam_floor as a stopping rule")
    if lam_floor is not None and not cfg.extract:
        raise ValueError("lam_floor stop requires cfg.extract=True")

    grid, k = p0.grid, p0.k
    F = _field_operator(grid.r, k)
    dt0 = cfg.dt if cfg.dt is not None else stable_dt(grid, k, cfg.dt_safety)
    floor = 10.0 * grid.spacing_min
    if lam_floor is not None:
        floor = max(floor, lam_floor)

    v = p0.v.copy()
    t = 0.0
    e0 = discrete_energy(p0)
    cols = {c: [] for c in RunRecord.DIAG_COLS}
    snapshots = []
    flags = []
    max_dev = 0.0
    lam_prev = None
    theta_prev = None
    status = "t_end"

    def profile():
        return EquivariantProfile(k=k, grid=grid, v=v.copy())

    def sample(tt):
        nonlocal lam_prev, theta_prev
        p = profile()
        lam = theta = np.nan
        if cfg.extract:
            try:
                lam = _crossing_from_arrays(grid.r, v[:, 2], lam_prev)
                pv1 = np.interp(lam, grid.r, v[:, 0])
                pv2 = np.interp(lam, grid.r, v[:, 1])
                if np.hypot(pv1, pv2) < 1e-8:
                    raise DegeneratePhaseError("degenerate phase")
                theta = float(np.arctan2(pv2, pv1))
                if theta_prev is not None:
                    theta += 2 * np.pi * np.round((theta_prev - theta) / (2 * np.pi))
                lam_prev, theta_prev = lam, theta
            except (ExtractionAmbiguousError, DegeneratePhaseError) as exc:
                flags.append({"t": tt, "error": str(exc)})
        ef = discrete_energy(p)
        et = quadrature_energy(p)
        dev = float(np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)))
        for c, val in zip(RunRecord.DIAG_COLS, (tt, ef, et, dev, lam, theta)):
            cols[c].append(val)
        return ef, lam

    def snap(tt):
        snapshots.append((tt, profile()))

    if cfg.extract:
        lam_prev = _crossing_from_arrays(grid.r, v[:, 2], None)
    sample(0.0)
    snap(0.0)
    next_sample = cfg.sample_dt
    next_snap = cfg.snapshot_dt if cfg.snapshot_dt is not None else np.inf
    drift = 0.0

    while True:
        dt = dt0
        if t_end is not None:
            dt = min(dt, t_end - t)
            if dt <= 1e-15 * max(1.0, t_end):
                status = "t_end"
                break
        halved = 0
        while True:
            try:
                vn, _, _ = _step_arrays(v, F, dt, cfg.tol, cfg.max_iter)
                break
            except StepFailureError:
                halved += 1
                if halved > cfg.max_halvings:
                    status = "aborted"
                    flags.append({"t": t, "error": "step failure after dt halvings"})
                    sample(t)
                    snap(t)
                    return _finish(cfg, p0, cols, snapshots, status, max_dev,
                                   drift, flags, t_end, lam_floor, dt0)
                dt *= 0.5
        v = vn
        t += dt
        dev = float(np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)))
        max_dev = max(max_dev, dev)
        if t + 1e-12 >= next_sample or (t_end is not None and t >= t_end - 1e-15):
            ef, lam = sample(t)
            while next_sample <= t + 1e-12:
                next_sample += cfg.sample_dt
            drift = abs(ef - e0) / abs(e0) if e0 != 0 else abs(ef - e0)
            if cfg.drift_abort is not None and drift > cfg.drift_abort:
                status = "energy_drift"
                snap(t)
                break
            if cfg.extract and np.isfinite(lam) and lam < floor:
                status = "lam_floor"
                snap(t)
                break
        if t + 1e-12 >= next_snap:
            snap(t)
            next_snap += cfg.snapshot_dt
        if t_end is not None and t >= t_end - 1e-15:
            status = "t_end"
            if not snapshots or snapshots[-1][0] < t:
                snap(t)
            break
    if cols["t"][-1] < t:
        sample(t)
    return _finish(cfg, p0, cols, snapshots, status, max_dev, drift, flags,
                   t_end, lam_floor, dt0)


def _finish(cfg, p0, cols, snapshots, status, max_dev, drift, flags,
            t_end, lam_floor, dt0):
    config = asdict(cfg)
    config.update({"k": p0.k, "n": p0.grid.n, "r_max": p0.grid.r_max,
                   "t_end": t_end, "lam_floor": lam_floor, "dt_used": dt0})
    diagnostics = {c: np.array(vals) for c, vals in cols.items()}
    return RunRecord(config=config, diagnostics=diagnostics,
                     snapshots=snapshots, status=status,
                     max_norm_dev=max_dev, drift_rel=drift, flags=flags)


def refinement_study(cases, metric) -> dict:
    """Observed convergence order over a resolution ladder.

    cases: list of (h, record_or_state) pairs already computed by the caller;
    metric: callable mapping the second element to a positive error number.
    Orders are log-ratio slopes between consecutive levels.  Non-monotone
    errors or a too-short ladder yield an inconclusive report, not a failure.
    """
    if len(cases) < 3:
        return {"inconclusive": True, "reason": "need at least 3 resolutions",
                "h": [h for h, _ in cases], "err": [metric(x) for _, x in cases],
                "orders": []}
    hs = np.array([h for h, _ in cases], dtype=float)
    errs = np.array([metric(x) for _, x in cases], dtype=float)
    order = np.argsort(hs)[::-1]
    hs, errs = hs[order], errs[order]
    report = {"h": hs.tolist(), "err": errs.tolist(), "inconclusive": False,
              "reason": ""}
    if np.any(errs <= 0) or np.any(np.diff(errs) >= 0):
        report["inconclusive"] = True
        report["reason"] = "errors not positive and decreasing along the ladder"
        report["orders"] = []
        return report
    orders = np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])
    report["orders"] = orders.tolist()
    report["order_mean"] = float(np.mean(orders))
    return report

"""Recovery of scale and phase from evolved fields, plus derived rates.

The scale lam of a near-bubble field is located where the third component
crosses zero (the degree-1 bubble has its equator exactly at y = 1, so a
rescaled copy crosses at r = lam).  The phase theta is the planar angle of
(v1, v2) on that circle.  Rates come from finite differences of the sampled
(t, lam, theta) series:

    b = -lam_t * lam,   a = -theta_t * lam^2,

the chain rule through the rescaled time ds = dt/lam^2.  All functions are
pure; extraction failures raise flaggable errors rather than killing runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import EquivariantProfile, frenet_decompose
from .linops import LinearizedOperator, apply_operator
from .modulation import B_CEILING


class ExtractionAmbiguousError(RuntimeError):
    """No usable zero crossing (none, or several in the search window)."""


class DegeneratePhaseError(RuntimeError):
    """(v1, v2) vanishes where the phase is read off."""


def _crossing_from_arrays(r: np.ndarray, v3: np.ndarray,
                          lam_prev: float | None = None) -> float:
    """Downward zero crossing of v3, by bracketing + linear interpolation."""
    if lam_prev is not None:
        m = (r >= 0.2 * lam_prev) & (r <= 5.0 * lam_prev)
        if np.sum(m) < 2:
            raise ExtractionAmbiguousError(
                f"warm-start window around lam={lam_prev} contains <2 nodes")
        idx = np.nonzero(m)[0]
        rr, vv = r[idx[0]:idx[-1] + 1], v3[idx[0]:idx[-1] + 1]
    else:
        rr, vv = r, v3
    down = np.nonzero((vv[:-1] > 0.0) & (vv[1:] <= 0.0))[0]
    if len(down) == 0:
        raise ExtractionAmbiguousError("no downward zero crossing of v3")
    if len(down) > 1:
        raise ExtractionAmbiguousError(
            f"{len(down)} downward crossings of v3; profile too distorted")
    i = down[0]
    return float(rr[i] + (rr[i + 1] - rr[i]) * vv[i] / (vv[i] - vv[i + 1]))


def extract_lambda(p: EquivariantProfile,
                   lam_prev: float | None = None) -> float:
    """Scale of a near-bubble profile from the equator crossing of v3."""
    return _crossing_from_arrays(p.grid.r, p.v[:, 2], lam_prev)


def extract_theta(p: EquivariantProfile, lam: float,
                  theta_prev: float | None = None) -> float:
    """Planar angle of (v1, v2) at r = lam, unwrapped against theta_prev."""
    r = p.grid.r
    v1 = np.interp(lam, r, p.v[:, 0])
    v2 = np.interp(lam, r, p.v[:, 1])
    if np.hypot(v1, v2) < 1e-8:
        raise DegeneratePhaseError(f"|(v1,v2)|={np.hypot(v1, v2):.2e} at r=lam")
    th = float(np.arctan2(v2, v1))
    if theta_prev is not None:
        th += 2.0 * np.pi * np.round((theta_prev - th) / (2.0 * np.pi))
    return th


@dataclass
class ModSeries:
    t: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    b: np.ndarray
    a: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.lam[np.isfinite(self.lam)] <= 0):
            raise ValueError("lam must stay positive")
        dth = np.diff(self.theta[np.isfinite(self.theta)])
        if np.any(np.abs(dth) > np.pi):
            raise ValueError("theta jumps by more than pi between samples; unwrap first")

    def to_csv(self, path):
        data = np.column_stack([self.t, self.lam, self.b, self.theta, self.a])
        np.savetxt(str(path), data, delimiter=",", header="t,lambda,b,theta,a",
                   comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        d = np.loadtxt(str(path), delimiter=",", skiprows=1)
        return cls(t=d[:, 0], lam=d[:, 1], b=d[:, 2], theta=d[:, 3], a=d[:, 4])


def extract_b_a(t: np.ndarray, lam: np.ndarray, theta: np.ndarray) -> ModSeries:
    """Rates from a sampled (t, lam, theta) series by finite differences.

    Centered second-order stencils in the interior (nonuniform-aware via
    np.gradient), one-sided second-order at the endpoints.
    """
    t, lam, theta = map(np.asarray, (t, lam, theta))
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be strictly increasing")
    lam_t = np.gradient(lam, t, edge_order=2)
    th_t = np.gradient(theta, t, edge_order=2)
    b = -lam_t * lam
    a = -th_t * lam * lam
    return ModSeries(t=t, lam=lam, theta=theta, b=b, a=a,
                     provenance={"scheme": "centered second order",
                                 "edges": "one-sided second order"})


@dataclass
class RemainderField:
    """Deviation from the fitted bubble in the comoving frame, w = alpha+i*beta."""
    y: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    lam: float
    theta: float

    def constraint_residual(self) -> float:
        s = self.alpha ** 2 + self.beta ** 2 + (1.0 + self.gamma) ** 2
        return float(np.max(np.abs(s - 1.0)))


def remainder(p: EquivariantProfile, lam: float, theta: float) -> RemainderField:
    y, alpha, beta, gamma = frenet_decompose(p, lam, theta)
    return RemainderField(y=y, alpha=alpha, beta=beta, gamma=gamma,
                          lam=lam, theta=theta)


def sobolev_diagnostic(w: RemainderField, b: float,
                       b_ceiling: float = B_CEILING) -> dict:
    """Dimensionless regularity monitor M = ||L^2 w|| * log(1/b) / b^2.

    L is the linearized operator around the bubble, applied twice to each of
    the remainder components; the norm is the radial L^2 quadrature.  Small M
    along a run means the remainder stays regular at the rate the collapse
    requires.  Monitoring only: reported, never enforced.
    """
    if not (0.0 < b < b_ceiling):
        raise ValueError(f"b={b} outside (0, {b_ceiling})")
    op = LinearizedOperator.on_grid(w.y)
    nrm2 = 0.0
    for comp in (w.alpha, w.beta):
        g = apply_operator(op, apply_operator(op, comp)).vals
        nrm2 += np.trapezoid(g * g * w.y, w.y)
    nrm = float(np.sqrt(nrm2))
    ell = float(-np.log(b))
    return {"norm_L2w": nrm, "b": b, "log_factor": ell,
            "monitor": nrm * ell / (b * b)}


def extract_series(ts, profiles, lam0_hint: float | None = None) -> ModSeries:
    """Run the extractors over a snapshot sequence and differentiate.

    Scale extraction warm-starts from the previous sample; phase unwrapping is
    sequential.  Ambiguous samples are dropped (flagged in provenance), and at
    least three clean samples are required for the rate differences.
    """
    ts = np.asarray(ts, dtype=float)
    good_t, good_lam, good_th, flagged = [], [], [], []
    lam_prev, th_prev = lam0_hint, None
    for t, p in zip(ts, profiles):
        try:
            lam = extract_lambda(p, lam_prev)
            th = extract_theta(p, lam, th_prev)
        except (ExtractionAmbiguousError, DegeneratePhaseError):
            flagged.append(float(t))
            continue
        good_t.append(float(t)); good_lam.append(lam); good_th.append(th)
        lam_prev, th_prev = lam, th
    if len(good_t) < 3:
        raise ExtractionAmbiguousError(
            f"only {len(good_t)} clean samples; cannot form rates")
    ser = extract_b_a(np.array(good_t), np.array(good_lam), np.array(good_th))
    ser.provenance["flagged_t"] = flagged
    return ser

"""Sphere-valued radial profiles for k-equivariant maps of the plane.

A degree-k equivariant map u(r, theta) = exp(k el theta R) v(r) is stored through
its radial section v: (0, r_max] -> S^2.  R generates rotation about the third
axis: R(x1,x2,x3) = (-x2, x1, 0), so exp(theta R) rotates the first two
components by theta and fixes the third.

The stationary bubble in class k is

    B_k(y) = (2 y^k, 0, 1 - y^{2k}) / (1 + y^{2k}),

with Dirichlet energy 8*pi*|k|.  Near the k=1 bubble we use the orthonormal
moving frame (e_r, e_tau, B_1) and coordinates v = alpha e_r + beta e_tau
+ (1+gamma) B_1 with alpha^2 + beta^2 + (1+gamma)^2 = 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radial import RadialGrid

NORTH = np.array([0.0, 0.0, 1.0])
UNIT_TOL = 1e-12


def bubble(k: int, y) -> np.ndarray:
    """Radial section of the degree-k stationary bubble; rows on S^2 exactly."""
    if k == 0:
        raise ValueError("degree must be nonzero")
    y = np.asarray(y, dtype=float)
    yk = y ** abs(k)
    den = 1.0 + yk * yk
    out = np.stack([2.0 * yk / den, np.zeros_like(den), (1.0 - yk * yk) / den], axis=-1)
    return out


def rotate_xy(v: np.ndarray, theta: float) -> np.ndarray:
    """Apply exp(theta R): rotate components (1,2) by theta, fix component 3."""
    c, s = np.cos(theta), np.sin(theta)
    out = np.array(v, dtype=float, copy=True)
    x1 = out[..., 0].copy()
    out[..., 0] = c * x1 - s * out[..., 1]
    out[..., 1] = s * x1 + c * out[..., 1]
    return out


def bubble_rescaled(k: int, r, lam: float, theta: float = 0.0) -> np.ndarray:
    """Bubble concentrated at scale lam and rotated by theta."""
    return rotate_xy(bubble(k, np.asarray(r, dtype=float) / lam), theta)


@dataclass
class EquivariantProfile:
    """Unit-norm radial section of a degree-k equivariant map."""
    k: int
    grid: RadialGrid
    v: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.v.shape != (self.grid.n, 3):
            raise ValueError("field shape must be (n, 3)")
        dev = np.max(np.abs(np.linalg.norm(self.v, axis=1) - 1.0))
        if dev > UNIT_TOL:
            raise ValueError(f"profile off the sphere by {dev:.3e} (> {UNIT_TOL})")

    def norm_deviation(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.v, axis=1) - 1.0)))

    def save(self, path):
        with open(str(path), "w") as fh:
            fh.write(f"# k={self.k} N={self.grid.n} r_max={self.grid.r_max:.17g}\n")
            for rr, row in zip(self.grid.r, self.v):
                fh.write(f"{rr:.17g} {row[0]:.17g} {row[1]:.17g} {row[2]:.17g}\n")

    @classmethod
    def load(cls, path):
        with open(str(path)) as fh:
            header = fh.readline().strip()
        fields = dict(tok.split("=") for tok in header.lstrip("# ").split())
        data = np.loadtxt(str(path))
        return cls(int(fields["k"]), RadialGrid(data[:, 0]), data[:, 1:4])


def project_sphere(v: np.ndarray) -> np.ndarray:
    """Cheapest retraction; error is quadratic in the deviation."""
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def bubble_profile(k: int, grid: RadialGrid, lam: float = 1.0, theta: float = 0.0) -> EquivariantProfile:
    return EquivariantProfile(k, grid, bubble_rescaled(k, grid.r, lam, theta))


# ---------------------------------------------------------------------------
# energy

def dirichlet_energy(p: EquivariantProfile) -> float:
    """Reduced Dirichlet energy 2*pi * int (|v'|^2 + (k^2/r^2)(v1^2+v2^2)) r dr.

    Trapezoid on the native grid; the [0, r_0] segment is closed with the
    integrand -> 0 limit at the origin (fields approach (0,0,1) at least
    linearly in r^k for the maps considered here).
    """
    r = p.grid.r
    dv = np.gradient(p.v, r, axis=0)
    integ = (np.sum(dv * dv, axis=1)
             + (p.k * p.k / r ** 2) * (p.v[:, 0] ** 2 + p.v[:, 1] ** 2)) * r
    inner = 0.5 * r[0] * integ[0]   # triangle from the origin
    return float(2.0 * np.pi * (np.trapezoid(integ, r) + inner))


# ---------------------------------------------------------------------------
# moving frame near the k=1 bubble

@dataclass(frozen=True)
class Frame:
    """Orthonormal triad (e_r, e_tau, q) along the k=1 bubble, theta=0 section."""
    y: np.ndarray
    e_r: np.ndarray
    e_tau: np.ndarray
    q: np.ndarray


def frenet_frame(y) -> Frame:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    den = 1.0 + y * y
    e_r = np.stack([(1.0 - y * y) / den, np.zeros_like(y), -2.0 * y / den], axis=-1)
    e_tau = np.tile([0.0, 1.0, 0.0], (len(y), 1))
    return Frame(y=y, e_r=e_r, e_tau=e_tau, q=bubble(1, y))


def frenet_decompose(p: EquivariantProfile, lam: float, theta: float):
    """Coordinates (alpha, beta, gamma) of v about the (lam, theta) bubble.

    Returns (y, alpha, beta, gamma) with y = r/lam the rescaled radius; the
    section is first unrotated by theta, so the triad is evaluated at theta=0.
    """
    if p.k != 1:
        raise ValueError("frame decomposition is defined for degree 1")
    y = p.grid.r / lam
    vt = rotate_xy(p.v, -theta)
    fr = frenet_frame(y)
    alpha = np.sum(vt * fr.e_r, axis=1)
    beta = vt[:, 1]
    gamma = np.sum(vt * fr.q, axis=1) - 1.0
    return y, alpha, beta, gamma


def frenet_reconstruct(y, alpha, beta, gamma, lam: float, theta: float,
                       grid: RadialGrid) -> EquivariantProfile:
    """Rebuild a profile from frame coordinates given on the y-grid.

    Coordinates are linearly interpolated onto grid.r/lam; outside the sampled
    range the deviation is taken to vanish (pure bubble).  The result is
    projected back to the sphere, so interpolation error enters quadratically
    in the constraint.
    """
    yq = grid.r / lam
    a = np.interp(yq, y, alpha, left=alpha[0], right=0.0)
    b = np.interp(yq, y, beta, left=beta[0], right=0.0)
    g = np.interp(yq, y, gamma, left=gamma[0], right=0.0)
    fr = frenet_frame(yq)
    v = a[:, None] * fr.e_r + b[:, None] * fr.e_tau + (1.0 + g)[:, None] * fr.q
    return EquivariantProfile(1, grid, project_sphere(rotate_xy(v, theta)))

"""Radial grids and sampled radial functions shared across modules.

Grids never include r = 0: the origin is handled by boundary conditions
(fields have a prescribed limit there), and several operators carry 1/r
factors. Functions carry an optional tail descriptor so that asymptotic
claims travel with the samples they were verified on.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing positive nodes; r=0 excluded by construction."""
    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or len(r) < 3:
            raise ValueError("grid needs at least 3 nodes")
        if r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise ValueError("grid must be strictly increasing and positive")
        object.__setattr__(self, "r", r)

    @property
    def n(self):
        return len(self.r)

    @property
    def r_max(self):
        return float(self.r[-1])

    @property
    def spacing_min(self):
        return float(np.min(np.diff(self.r)))

    @classmethod
    def uniform(cls, n: int, r_max: float) -> "RadialGrid":
        # first node at h = r_max/n, matching the ghost-at-origin stencils
        return cls(np.linspace(r_max / n, r_max, n))

    @classmethod
    def stretched(cls, n: int, r_max: float, r_min: float = 1e-3) -> "RadialGrid":
        """Geometric stretch, dense near the origin where concentration happens."""
        return cls(np.geomspace(r_min, r_max, n))

    def trapezoid_weights(self) -> np.ndarray:
        r = self.r
        w = np.empty_like(r)
        w[0] = 0.5 * (r[1] - r[0]) + 0.5 * r[0]   # closes the [0, r0] segment
        w[1:-1] = 0.5 * (r[2:] - r[:-2])
        w[-1] = 0.5 * (r[-1] - r[-2])
        return w


@dataclass
class RadialFunction:
    """Samples of a scalar radial function with an asymptotic-tail descriptor."""
    y: np.ndarray
    vals: np.ndarray
    tail: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.vals = np.asarray(self.vals, dtype=float)
        if self.y.shape != self.vals.shape:
            raise ValueError("y and vals must have matching shape")

    def __call__(self, yq):
        # linear interpolation; zero outside the sampled range (compact reads)
        return np.interp(yq, self.y, self.vals, left=0.0, right=0.0)

    def save(self, path):
        path = str(path)
        with open(path, "w") as fh:
            for yy, vv in zip(self.y, self.vals):
                fh.write(f"{yy:.17g} {vv:.17g}\n")
        with open(path + ".json", "w") as fh:
            json.dump({"tail": self.tail, "n": int(len(self.y))}, fh, indent=1)

    @classmethod
    def load(cls, path):
        path = str(path)
        data = np.loadtxt(path)
        tail = {}
        try:
            with open(path + ".json") as fh:
                tail = json.load(fh).get("tail", {})
        except FileNotFoundError:
            pass
        return cls(data[:, 0], data[:, 1], tail)

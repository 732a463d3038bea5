"""Run persistence, plot-data emission, and configuration plumbing.

Everything on disk is plain text: columnar CSV with a header line, JSON
sidecars, and a manifest of content hashes per run directory.  The default
output root comes from the SMAPFLOW_OUTDIR environment variable, falling back
to ./smapflow_out.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pde import RunRecord

ENV_OUTDIR = "SMAPFLOW_OUTDIR"

PLOT_KINDS = ("rate-ratio", "trajectory", "tail-check")


def default_outdir() -> Path:
    return Path(os.environ.get(ENV_OUTDIR, "smapflow_out"))


@dataclass
class RunConfig:
    """Validated parameter block for one CLI invocation."""
    subcommand: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    outdir: Path | None = None

    KNOWN = ("profiles", "ode", "evolve", "extract", "fit", "verify")

    def validate(self):
        if self.subcommand not in self.KNOWN:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        p = self.params
        for key in ("b0",):
            if key in p and p[key] is not None and not (0.0 < p[key] <= 0.1):
                raise ValueError(f"{key}={p[key]} outside (0, 0.1]")
        for key in ("lam0", "lambda0", "rmax", "t_end", "sample_dt", "B0",
                    "rtol", "tol", "lam_floor"):
            if key in p and p[key] is not None and p[key] <= 0:
                raise ValueError(f"{key} must be positive, got {p[key]}")
        if "n" in p and p["n"] is not None and p["n"] < 3:
            raise ValueError("n must be at least 3")
        if "variant" in p and p["variant"] not in ("leading", "log"):
            raise ValueError(f"variant {p['variant']!r} not in (leading, log)")
        return self

    def resolved_outdir(self) -> Path:
        return Path(self.outdir) if self.outdir is not None else default_outdir()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir) -> dict:
    """Hash every artifact under outdir into manifest.json (which is excluded)."""
    out = Path(outdir)
    entries = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            entries[str(p.relative_to(out))] = _sha256(p)
    doc = {"files": entries}
    (out / "manifest.json").write_text(json.dumps(doc, indent=1) + "\n")
    return doc


def check_manifest(outdir) -> list:
    """Paths whose content no longer matches the stored manifest."""
    out = Path(outdir)
    doc = json.loads((out / "manifest.json").read_text())
    bad = []
    for rel, digest in doc["files"].items():
        p = out / rel
        if not p.is_file() or _sha256(p) != digest:
            bad.append(rel)
    return bad


def persist_run(record: RunRecord, outdir) -> dict:
    """Write the full run directory plus a content-hash manifest."""
    out = Path(outdir)
    record.save(out)
    return write_manifest(out)


def load_run(outdir, verify_hashes: bool = False) -> RunRecord:
    if verify_hashes:
        bad = check_manifest(outdir)
        if bad:
            raise IOError(f"manifest mismatch for {bad} under {outdir}")
    return RunRecord.load(outdir)


def _write_columns(path, header_cols, arrays):
    data = np.column_stack([np.asarray(a, dtype=float) for a in arrays])
    np.savetxt(str(path), data, delimiter=",", header=",".join(header_cols),
               comments="", fmt="%.17g")
    return Path(path)


def emit_plotdata(series, kind: str, path) -> Path:
    """Columnar text for external plotting.

    rate-ratio: needs {"t", "lam", "T"} (fit supplied); emits the ratio
        lam * log^2(T-t) / (T-t) that should flatten toward kappa.
    trajectory: any object with t/lam/b/theta/a arrays (s included if present).
    tail-check: a radial table (y, vals); emits vals / (y log y - y).
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"kind must be one of {PLOT_KINDS}")
    if kind == "rate-ratio":
        try:
            t = np.asarray(series["t"]); lam = np.asarray(series["lam"])
            T = float(series["T"])
        except (TypeError, KeyError) as exc:
            raise ValueError("rate-ratio needs t, lam arrays and a fitted T") from exc
        if len(t) == 0:
            raise ValueError("empty series")
        m = T - t > 0
        g = T - t[m]
        ratio = lam[m] * np.log(g) ** 2 / g
        return _write_columns(path, ("t", "lambda", "ratio"), (t[m], lam[m], ratio))
    if kind == "trajectory":
        cols, arrays = [], []
        for name in ("s", "t", "lam", "b", "theta", "a"):
            if hasattr(series, name):
                val = getattr(series, name)
                cols.append("lambda" if name == "lam" else name)
                arrays.append(val)
        if not arrays or len(arrays[0]) == 0:
            raise ValueError("empty series")
        return _write_columns(path, cols, arrays)
    # tail-check
    y = np.asarray(series.y if hasattr(series, "y") else series["y"])
    vals = np.asarray(series.vals if hasattr(series, "vals") else series["vals"])
    if len(y) == 0:
        raise ValueError("empty series")
    m = y > 1.0
    denom = y[m] * np.log(y[m]) - y[m]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(denom) > 0, vals[m] / denom, np.nan)
    return _write_columns(path, ("y", "value", "ratio"), (y[m], vals[m], ratio))

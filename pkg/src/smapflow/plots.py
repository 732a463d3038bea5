"""Figure rendering for CLI report paths. All figures go to files (Agg)."""
from __future__ import annotations

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save_trajectory_figure(traj, path, fit=None):
    """Scale collapse and rate panels for a reduced-dynamics trajectory."""
    fig, axes = plt.subplots(1, 3 if fit is not None else 2, figsize=(11, 3.4))
    ax = axes[0]
    ax.semilogy(traj.t, traj.lam, lw=1)
    ax.set_xlabel("t"); ax.set_ylabel("lambda")
    ax = axes[1]
    ax.loglog(traj.lam, traj.b, lw=1)
    ax.set_xlabel("lambda"); ax.set_ylabel("b")
    if fit is not None:
        g = fit.T - traj.t
        m = g > 0
        ratio = traj.lam[m] * np.log(g[m]) ** 2 / g[m]
        ax = axes[2]
        ax.semilogx(g[m], ratio, lw=1)
        ax.axhline(fit.kappa, color="k", ls="--", lw=0.8)
        ax.set_xlabel("T - t"); ax.set_ylabel("lam log^2(T-t)/(T-t)")
        ax.set_title(f"kappa={fit.kappa:.4g}, resmax={fit.max_rel_dev:.2g}",
                     fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_radiation_figure(rf, path):
    """Radiation profile against its large-y asymptote."""
    y, vals = rf.y, rf.vals
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.4))
    m = y <= 30
    axes[0].plot(y[m], vals[m], lw=1)
    axes[0].set_xlabel("y"); axes[0].set_ylabel("T(y)")
    mm = y > 2
    axes[1].semilogx(y[mm], vals[mm] / (y[mm] * np.log(y[mm]) - y[mm]), lw=1)
    axes[1].axhline(1.0, color="k", ls="--", lw=0.8)
    axes[1].set_xlabel("y"); axes[1].set_ylabel("T / (y log y - y)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_run_figure(record, path):
    """Diagnostics of a PDE run: scale, energies, constraint."""
    t = record.diag("t")
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    lam = record.diag("lam")
    if np.any(np.isfinite(lam)):
        axes[0].plot(t, lam, lw=1)
    axes[0].set_xlabel("t"); axes[0].set_ylabel("extracted lambda")
    ef, et = record.diag("e_flux"), record.diag("e_trap")
    axes[1].plot(t, ef / ef[0] - 1.0, lw=1, label="flux form")
    axes[1].plot(t, et / et[0] - 1.0, lw=1, ls="--", label="trapezoid")
    axes[1].set_xlabel("t"); axes[1].set_ylabel("relative energy drift")
    axes[1].legend(fontsize=8)
    axes[2].semilogy(t, np.maximum(record.diag("norm_dev"), 1e-18), lw=1)
    axes[2].set_xlabel("t"); axes[2].set_ylabel("max |norm - 1|")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_series_figure(series, path, monitor=None):
    """Extracted modulation series (and the regularity monitor if given)."""
    n = 3 if monitor is not None else 2
    fig, axes = plt.subplots(1, n, figsize=(3.7 * n, 3.4))
    axes[0].plot(series.t, series.lam, lw=1)
    axes[0].set_xlabel("t"); axes[0].set_ylabel("lambda")
    axes[1].plot(series.t, series.b, lw=1, label="b")
    axes[1].plot(series.t, series.a, lw=1, ls="--", label="a")
    axes[1].set_xlabel("t"); axes[1].legend(fontsize=8)
    if monitor is not None:
        mt, mv = monitor
        axes[2].semilogy(mt, mv, lw=1)
        axes[2].set_xlabel("t"); axes[2].set_ylabel("monitor M")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path

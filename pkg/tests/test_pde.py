import numpy as np
import pytest

from smapflow import pde
from smapflow.geometry import (EquivariantProfile, bubble_profile,
                               project_sphere, rotate_xy)
from smapflow.pde import (CorruptedStateError, RunRecord, SolverConfig,
                          StepFailureError, discrete_energy, equivariant_rhs,
                          evolve, quadrature_energy, refinement_study,
                          stable_dt, step)
from smapflow.radial import RadialGrid


def _perturbed(n=256, rmax=30.0, k=1, amp=0.05, seed=0):
    g = RadialGrid.uniform(n, rmax)
    rng = np.random.default_rng(seed)
    v = bubble_profile(k, g).v.copy()
    for mu in (1.5, 3.0, 5.0):
        v[:, 1] += amp * rng.uniform(0.5, 1.0) * np.exp(-((g.r - mu) ** 2))
    return EquivariantProfile(k, g, project_sphere(v))


def test_rhs_tangency():
    p = _perturbed()
    F = equivariant_rhs(p)
    # v x (...) is pointwise orthogonal to v, up to one rounding of the dot
    assert np.max(np.abs(np.sum(F * p.v, axis=1))) < 1e-15


def test_rhs_vanishes_on_bubble_at_truncation_order():
    # weighted L2 of the residual force on the stationary state; the sup is
    # dominated by the innermost node, whose measure-r weight is what makes
    # the solution-level error second order
    norms = []
    for n in (256, 512, 1024):
        g = RadialGrid.uniform(n, 30.0)
        F = equivariant_rhs(bubble_profile(3, g))
        w = g.trapezoid_weights()
        norms.append(float(np.sqrt(np.sum(w * g.r * np.sum(F * F, axis=1)))))
    assert norms[0] < 0.5
    assert 3.0 < norms[0] / norms[1] < 5.0
    assert 3.0 < norms[1] / norms[2] < 5.0


def test_rhs_rejects_corrupted_state():
    p = _perturbed(n=64, rmax=10.0)
    p.v[10, 0] = np.nan
    with pytest.raises(CorruptedStateError):
        equivariant_rhs(p)


def test_stable_dt_formula():
    g = RadialGrid.uniform(128, 16.0)
    h = g.spacing_min
    r1 = g.r[0]
    k = 2
    expected = 0.5 * 0.8 / (4.0 / h ** 2 + 2.0 / (r1 * h) + k * k / r1 ** 2)
    assert stable_dt(g, k, safety=0.5) == pytest.approx(expected, rel=1e-14)
    assert stable_dt(g, 1) > stable_dt(g, 3)     # higher degree, stiffer origin


def test_step_stays_on_sphere_and_conserves_energy():
    p = _perturbed()
    dt = stable_dt(p.grid, p.k)
    q = step(p, dt)
    assert q.norm_deviation() < 1e-15            # renormalized rotation
    e0, e1 = discrete_energy(p), discrete_energy(q)
    assert abs(e1 - e0) < 1e-12 * abs(e0)


def test_step_reversibility():
    p = _perturbed()
    dt = stable_dt(p.grid, p.k)
    back = step(step(p, dt, tol=1e-13), -dt, tol=1e-13)
    assert np.max(np.abs(back.v - p.v)) < 10 * 1e-13


def test_step_equivariance_commutes_with_rotation():
    p = _perturbed()
    dt = stable_dt(p.grid, p.k)
    q1 = step(EquivariantProfile(p.k, p.grid, rotate_xy(p.v, 0.7)), dt)
    q2 = rotate_xy(step(p, dt).v, 0.7)
    assert np.max(np.abs(q1.v - q2)) < 1e-13


def test_step_failure_on_oversized_dt():
    p = _perturbed()
    with pytest.raises(StepFailureError):
        step(p, 1e3 * stable_dt(p.grid, p.k), max_iter=8)


def test_outer_boundary_is_frozen():
    p = _perturbed()
    dt = stable_dt(p.grid, p.k)
    q = step(p, dt)
    assert np.array_equal(q.v[-1], p.v[-1])


def test_energy_routes_agree_on_smooth_data():
    # flux-form and quadrature energies are independent discretizations of the
    # same functional; they agree at O(h^2) but are not identical
    vals = []
    for n in (512, 1024, 2048):
        g = RadialGrid.uniform(n, 30.0)
        p = bubble_profile(1, g)
        vals.append(abs(discrete_energy(p) - quadrature_energy(p)))
    assert vals[0] / abs(discrete_energy(bubble_profile(1, RadialGrid.uniform(512, 30.0)))) < 1e-2
    assert 3.0 < vals[0] / vals[1] < 5.0
    assert 3.0 < vals[1] / vals[2] < 5.0


def test_evolve_requires_a_stop_rule():
    p = _perturbed(n=64, rmax=10.0)
    cfg = SolverConfig()
    with pytest.raises(ValueError):
        evolve(p, cfg)
    with pytest.raises(ValueError):
        evolve(p, cfg, lam_floor=0.5)            # extraction disabled


def test_evolve_to_t_end_and_record_layout(tmp_path):
    p = _perturbed(n=128, rmax=20.0)
    cfg = SolverConfig(sample_dt=0.01, snapshot_dt=0.02)
    rec = evolve(p, cfg, t_end=0.05)
    assert rec.status == "t_end"
    assert rec.diag("t")[-1] == pytest.approx(0.05, abs=1e-12)
    assert rec.max_norm_dev < 1e-12
    assert len(rec.snapshots) >= 3
    rec.save(tmp_path)
    assert (tmp_path / "config.json").is_file()
    assert (tmp_path / "diagnostics.csv").is_file()
    assert sorted((tmp_path / "snapshots").glob("*.profile"))
    back = RunRecord.load(tmp_path)
    assert back.status == "t_end"
    assert np.allclose(back.diag("e_flux"), rec.diag("e_flux"))
    assert len(back.snapshots) == len(rec.snapshots)
    assert np.max(np.abs(back.snapshots[-1][1].v - rec.snapshots[-1][1].v)) < 1e-15


def test_evolve_drift_abort():
    # an impossible drift bound trips immediately on rounding noise
    p = _perturbed(n=128, rmax=20.0)
    cfg = SolverConfig(sample_dt=0.002, drift_abort=1e-17)
    rec = evolve(p, cfg, t_end=0.5)
    assert rec.status == "energy_drift"
    assert rec.diag("t")[-1] < 0.5


def test_evolve_halves_oversized_dt():
    p = _perturbed(n=128, rmax=20.0)
    dt0 = stable_dt(p.grid, p.k)
    cfg = SolverConfig(dt=64 * dt0, max_halvings=12, sample_dt=0.01)
    rec = evolve(p, cfg, t_end=0.02)
    assert rec.status == "t_end"
    assert rec.max_norm_dev < 1e-12


def test_evolve_aborts_when_halvings_exhausted():
    p = _perturbed(n=128, rmax=20.0)
    cfg = SolverConfig(dt=1e6, max_halvings=1, max_iter=6, sample_dt=0.01)
    rec = evolve(p, cfg, t_end=0.02)
    assert rec.status == "aborted"
    assert any("step failure" in f["error"] for f in rec.flags)


def test_evolve_lam_floor_stop():
    # shrink nothing: a bubble sits still, so drive the floor above its scale
    g = RadialGrid.uniform(256, 20.0)
    p = bubble_profile(1, g, lam=0.5)
    cfg = SolverConfig(extract=True, sample_dt=0.005)
    rec = evolve(p, cfg, t_end=1.0, lam_floor=0.6)
    assert rec.status == "lam_floor"
    lam = rec.diag("lam")
    assert lam[-1] == pytest.approx(0.5, abs=2e-3)


def test_refinement_study_paths():
    short = refinement_study([(0.1, 1.0), (0.05, 0.25)], metric=float)
    assert short["inconclusive"]
    wiggly = refinement_study([(0.1, 1.0), (0.05, 1.5), (0.025, 0.2)],
                              metric=float)
    assert wiggly["inconclusive"]
    clean = refinement_study([(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 6.25e-4)],
                             metric=float)
    assert not clean["inconclusive"]
    assert clean["order_mean"] == pytest.approx(2.0, abs=1e-12)

import numpy as np
import pytest

from smapflow.extraction import (DegeneratePhaseError, ExtractionAmbiguousError,
                                 ModSeries, extract_b_a, extract_lambda,
                                 extract_series, extract_theta, remainder,
                                 sobolev_diagnostic)
from smapflow.geometry import (EquivariantProfile, bubble_profile,
                               bubble_rescaled, project_sphere)
from smapflow.initdata import BlowupDataSpec, build_blowup_data
from smapflow.radial import RadialGrid


def test_extract_lambda_on_exact_bubbles():
    g = RadialGrid.uniform(2048, 50.0)
    for lam in (0.25, 0.7, 1.3):
        p = bubble_profile(1, g, lam=lam)
        est = extract_lambda(p)
        # the equator crossing is linear-interp exact up to curvature: O(h^2)
        assert abs(est - lam) < 2.0 * g.spacing_min ** 2, lam


def test_extract_lambda_warm_start_window():
    g = RadialGrid.uniform(1024, 50.0)
    p = bubble_profile(1, g, lam=1.0)
    # honest previous scale: fine; absurd previous scale: no crossing in window
    assert extract_lambda(p, lam_prev=0.9) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ExtractionAmbiguousError):
        extract_lambda(p, lam_prev=0.01)


def test_extract_lambda_multiple_crossings_flagged():
    g = RadialGrid.uniform(2048, 20.0)
    # polar angle wiggles through the equator three times: ambiguous by design
    phi = np.pi * (g.r / 20.0) * (1.0 + 0.45 * np.sin(6.0 * np.pi * g.r / 20.0))
    v = np.stack([np.sin(phi), np.zeros_like(phi), np.cos(phi)], axis=-1)
    p = EquivariantProfile(1, g, v)
    with pytest.raises(ExtractionAmbiguousError):
        extract_lambda(p, lam_prev=3.0)


def test_extract_theta_exact_on_rotated_bubble():
    g = RadialGrid.uniform(1024, 50.0)
    for th in (0.3, -2.9, 3.0):
        p = bubble_profile(1, g, lam=0.8, theta=th)
        lam = extract_lambda(p)
        assert extract_theta(p, lam) == pytest.approx(th, abs=1e-12), th


def test_extract_theta_unwraps_across_branch_cut():
    g = RadialGrid.uniform(512, 30.0)
    th_prev = 3.1
    p = bubble_profile(1, g, lam=1.0, theta=3.2)   # arctan2 alone gives 3.2-2pi
    th = extract_theta(p, extract_lambda(p), theta_prev=th_prev)
    assert th == pytest.approx(3.2, abs=1e-10)


def test_extract_theta_degenerate_phase():
    g = RadialGrid.uniform(512, 30.0)
    v = bubble_rescaled(1, g.r, 1.0)
    v[g.r > 10.0] = [0.0, 0.0, -1.0]               # exact south cap outside
    p = EquivariantProfile(1, g, v)
    with pytest.raises(DegeneratePhaseError):
        extract_theta(p, 20.0)


def test_extract_b_a_exact_on_quadratic_series():
    # second-order differences are exact on quadratics, endpoints included
    t = np.linspace(0.0, 2.0, 41)
    lam = 1.0 - 0.01 * t - 0.005 * t * t
    theta = 0.1 * t + 0.02 * t * t
    ser = extract_b_a(t, lam, theta)
    b_true = -(-0.01 - 0.01 * t) * lam
    a_true = -(0.1 + 0.04 * t) * lam ** 2
    assert np.max(np.abs(ser.b - b_true)) < 1e-13
    assert np.max(np.abs(ser.a - a_true)) < 1e-13


def test_extract_b_a_validation():
    t = np.array([0.0, 0.1])
    with pytest.raises(ValueError):
        extract_b_a(t, np.ones_like(t), np.zeros_like(t))      # too short
    t = np.array([0.0, 0.2, 0.1])
    with pytest.raises(ValueError):
        extract_b_a(t, np.ones_like(t), np.zeros_like(t))      # not increasing


def test_series_validation_and_round_trip(tmp_path):
    t = np.linspace(0.0, 1.0, 11)
    ser = ModSeries(t=t, lam=1.0 - 0.3 * t, theta=0.1 * t,
                    b=np.full_like(t, 0.3), a=np.zeros_like(t))
    path = tmp_path / "series.csv"
    ser.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,lambda,b,theta,a"
    back = ModSeries.from_csv(path)
    assert np.allclose(back.lam, ser.lam)
    assert np.allclose(back.b, ser.b)
    with pytest.raises(ValueError):
        ModSeries(t=t, lam=0.0 * t, theta=0.0 * t, b=0.0 * t, a=0.0 * t)
    with pytest.raises(ValueError):
        ModSeries(t=t, lam=1.0 + 0.0 * t,
                  theta=np.where(t < 0.5, 0.0, 4.0),         # un-unwrapped jump
                  b=0.0 * t, a=0.0 * t)


def test_remainder_constraint_residual():
    g = RadialGrid.uniform(512, 50.0)
    p = build_blowup_data(BlowupDataSpec(grid=g, b0=0.05))
    w = remainder(p, 1.0, 0.0)
    # coordinates of a genuinely spherical section satisfy
    # alpha^2 + beta^2 + (1+gamma)^2 = 1 to rounding
    assert w.constraint_residual() < 1e-12
    assert np.max(np.abs(w.beta)) > 0.01          # and carry the actual data


def test_sobolev_diagnostic_zero_and_guards():
    g = RadialGrid.uniform(512, 50.0)
    w = remainder(bubble_profile(1, g), 1.0, 0.0)  # zero remainder
    rep = sobolev_diagnostic(w, 0.05)
    assert rep["monitor"] == pytest.approx(0.0, abs=1e-8)
    assert rep["log_factor"] == pytest.approx(-np.log(0.05))
    with pytest.raises(ValueError):
        sobolev_diagnostic(w, 0.0)
    with pytest.raises(ValueError):
        sobolev_diagnostic(w, 0.2)


def test_sobolev_diagnostic_finite_on_data():
    g = RadialGrid.uniform(512, 50.0)
    p = build_blowup_data(BlowupDataSpec(grid=g, b0=0.05))
    rep = sobolev_diagnostic(remainder(p, 1.0, 0.0), 0.05)
    assert np.isfinite(rep["monitor"]) and rep["monitor"] > 0


def test_extract_series_flags_bad_samples():
    g = RadialGrid.uniform(1024, 50.0)
    ts = [0.0, 0.1, 0.2, 0.3, 0.4]
    lams = [1.0, 0.95, 0.9, 0.85, 0.8]
    profs = [bubble_profile(1, g, lam=l) for l in lams]
    # corrupt the middle snapshot: scale far outside the warm-start window
    profs[2] = bubble_profile(1, g, lam=30.0)
    ser = extract_series(ts, profs)
    assert len(ser.t) == 4
    assert 0.2 in ser.provenance["flagged_t"]
    assert np.allclose(ser.lam, [1.0, 0.95, 0.85, 0.8], atol=1e-3)


def test_extract_series_tracks_known_motion():
    g = RadialGrid.uniform(1024, 50.0)
    ts = np.linspace(0.0, 1.0, 9)
    lam_t = 1.0 - 0.4 * ts
    th_t = 0.2 * ts
    profs = [bubble_profile(1, g, lam=l, theta=th)
             for l, th in zip(lam_t, th_t)]
    ser = extract_series(ts, profs)
    assert np.max(np.abs(ser.lam - lam_t)) < 2e-3
    assert np.max(np.abs(ser.theta - th_t)) < 1e-10
    # b = -lam_t * lam = 0.4 lam, a = -theta_t lam^2 = -0.2 lam^2
    assert np.max(np.abs(ser.b - 0.4 * ser.lam)) < 5e-3
    assert np.max(np.abs(ser.a + 0.2 * ser.lam ** 2)) < 5e-3

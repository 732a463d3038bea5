import numpy as np
import pytest

from smapflow.modulation import (B_CEILING, FitResult, ModState, ModTrajectory,
                                 fit_blowup_law, instability_probe, integrate,
                                 modulation_rhs)


def test_rhs_leading_closed_arithmetic():
    st = ModState(b=0.01, a=0.002, lam=0.5, theta=0.1)
    rhs = modulation_rhs(st, "leading")
    assert rhs["b_s"] == pytest.approx(-(0.01 ** 2 + 0.002 ** 2), rel=1e-14)
    assert rhs["a_s"] == 0.0
    assert rhs["lam_s"] == pytest.approx(-0.01 * 0.5, rel=1e-14)
    assert rhs["theta_s"] == pytest.approx(-0.002, rel=1e-14)
    assert rhs["t_s"] == pytest.approx(0.25, rel=1e-14)


def test_rhs_log_correction_arithmetic():
    b, a = 0.01, 0.001
    ell = -np.log(b)
    rhs = modulation_rhs(ModState(b=b, a=a), "log")
    assert rhs["b_s"] == pytest.approx(-(b * b + b * b / (2 * ell) + a * a), rel=1e-13)
    assert rhs["a_s"] == pytest.approx(-2 * a * b / ell, rel=1e-13)


def test_rhs_domain_guard():
    with pytest.raises(ValueError):
        modulation_rhs(ModState(b=0.0), "leading")
    with pytest.raises(ValueError):
        modulation_rhs(ModState(b=B_CEILING + 1e-3), "leading")
    with pytest.raises(ValueError):
        modulation_rhs(ModState(b=0.01), "cubic")


def test_leading_order_closed_form():
    # b_s = -b^2, lam_s = -b lam, t_s = lam^2 integrate to
    # lam(t) = (b0/lam0) (T - t) with T = lam0^2/b0
    b0, lam0 = 0.02, 0.7
    tr = integrate(ModState(b=b0, lam=lam0), "leading", lam_floor=1e-5)
    T = lam0 ** 2 / b0
    pred = (b0 / lam0) * (T - tr.t)
    assert np.max(np.abs(tr.lam / pred - 1.0)) < 1e-8
    assert tr.meta["stop"] == "lam_floor"


def test_log_variant_monotone_collapse():
    tr = integrate(ModState(b=0.01), "log", lam_floor=1e-6)
    assert np.all(np.diff(tr.lam) < 0)
    assert np.all(np.diff(tr.b) < 0)          # b decays toward the blow-up time
    assert np.all(np.diff(tr.t) > 0)
    assert tr.lam[-1] <= 1e-6 * 1.01


def test_symmetric_branch_is_invariant():
    tr = integrate(ModState(b=0.01, a=0.0), "log", lam_floor=1e-4)
    assert np.max(np.abs(tr.a)) == 0.0
    assert np.max(np.abs(tr.theta)) == 0.0


def test_mirror_antisymmetry():
    a0 = 0.1 * 0.01 / (-np.log(0.01))
    tp = integrate(ModState(b=0.01, a=+a0), "log", lam_floor=1e-4)
    tm = integrate(ModState(b=0.01, a=-a0), "log", lam_floor=1e-4)
    assert np.max(np.abs(tp.a + tm.a)) == 0.0
    assert np.max(np.abs(tp.theta + tm.theta)) == 0.0
    assert np.max(np.abs(tp.b - tm.b)) == 0.0
    assert np.max(np.abs(tp.lam - tm.lam)) == 0.0


def test_instability_probe_growth_and_guard():
    rep = instability_probe(0.01, 0.2, lam_floor=1e-4)
    assert rep["monotone_abs"]
    assert rep["sign_fixed"]
    assert rep["growth_factor"] > 10.0
    with pytest.raises(ValueError):
        instability_probe(0.01, 1.5)


def test_trajectory_csv_round_trip(tmp_path):
    tr = integrate(ModState(b=0.05, a=1e-4), "log", lam_floor=1e-2,
                   n_samples=200)
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    back = ModTrajectory.from_csv(path)
    for name in ("s", "t", "lam", "b", "theta", "a"):
        assert np.allclose(getattr(back, name), getattr(tr, name),
                           rtol=0, atol=1e-12), name
    header = path.read_text().splitlines()[0]
    assert header == "s,t,lambda,b,theta,a"


def test_fit_recovers_synthetic_law():
    # exact lam = kappa (T-t)/log^2(T-t): the fitter must find (T, kappa)
    T_true, kappa_true = 10.0, 0.7
    # geometric approach to T, as integrate() samples its trajectories
    g = np.geomspace(T_true, 1e-6, 4000)
    t = T_true - g
    lam = kappa_true * g / np.log(g) ** 2
    b = -np.gradient(lam, t) * lam
    tr = ModTrajectory(s=t, t=t, lam=lam, b=b, theta=np.zeros_like(t),
                       a=np.zeros_like(t), meta={})
    fit = fit_blowup_law(tr)
    assert isinstance(fit, FitResult)
    assert fit.T == pytest.approx(T_true, abs=1e-4)
    assert fit.kappa == pytest.approx(kappa_true, rel=1e-3)
    assert fit.max_rel_dev < 1e-3


def test_fit_serialization(tmp_path):
    fit = FitResult(T=2.0, kappa=0.5, max_rel_dev=0.1, window=(0.0, 1.9),
                    n_points=100)
    path = tmp_path / "fit.json"
    fit.to_json(path)
    import json
    doc = json.loads(path.read_text())
    assert doc["T"] == 2.0 and doc["kappa"] == 0.5
    assert doc["window_t"] == [0.0, 1.9]


def test_state_validation():
    with pytest.raises(ValueError):
        integrate(ModState(b=0.5), "leading", lam_floor=1e-3)

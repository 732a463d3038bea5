import numpy as np
import pytest

from smapflow.geometry import bubble_profile
from smapflow.harness import (RunConfig, check_manifest, default_outdir,
                              emit_plotdata, load_run, persist_run,
                              write_manifest)
from smapflow.modulation import ModState, integrate
from smapflow.pde import SolverConfig, evolve
from smapflow.radial import RadialGrid


def _tiny_run():
    g = RadialGrid.uniform(96, 12.0)
    p = bubble_profile(1, g)
    return evolve(p, SolverConfig(sample_dt=0.01, snapshot_dt=0.02), t_end=0.04)


def test_run_config_validation():
    RunConfig("evolve", {"b0": 0.05, "n": 512}).validate()
    with pytest.raises(ValueError):
        RunConfig("paint", {}).validate()
    with pytest.raises(ValueError):
        RunConfig("evolve", {"b0": 0.5}).validate()
    with pytest.raises(ValueError):
        RunConfig("evolve", {"t_end": -1.0}).validate()
    with pytest.raises(ValueError):
        RunConfig("evolve", {"n": 2}).validate()
    with pytest.raises(ValueError):
        RunConfig("ode", {"variant": "cubic"}).validate()


def test_default_outdir_env_override(monkeypatch):
    monkeypatch.setenv("SMAPFLOW_OUTDIR", "/tmp/somewhere_else")
    assert str(default_outdir()) == "/tmp/somewhere_else"
    monkeypatch.delenv("SMAPFLOW_OUTDIR")
    assert str(default_outdir()) == "smapflow_out"


def test_persist_and_load_with_hashes(tmp_path):
    rec = _tiny_run()
    persist_run(rec, tmp_path)
    assert (tmp_path / "manifest.json").is_file()
    assert check_manifest(tmp_path) == []
    back = load_run(tmp_path, verify_hashes=True)
    assert back.status == rec.status
    assert np.allclose(back.diag("e_flux"), rec.diag("e_flux"))


def test_manifest_detects_tampering(tmp_path):
    rec = _tiny_run()
    persist_run(rec, tmp_path)
    with open(tmp_path / "diagnostics.csv", "a") as fh:
        fh.write("# tampered\n")
    bad = check_manifest(tmp_path)
    assert "diagnostics.csv" in bad
    with pytest.raises(IOError):
        load_run(tmp_path, verify_hashes=True)
    # a fresh manifest accepts the current state again
    write_manifest(tmp_path)
    assert check_manifest(tmp_path) == []


def test_emit_trajectory_and_rate_ratio(tmp_path):
    tr = integrate(ModState(b=0.02), "leading", lam_floor=1e-3, n_samples=100)
    out = emit_plotdata(tr, "trajectory", tmp_path / "traj.csv")
    header = out.read_text().splitlines()[0]
    assert header == "s,t,lambda,b,theta,a"
    T = 1.0 / 0.02
    out2 = emit_plotdata({"t": tr.t, "lam": tr.lam, "T": T}, "rate-ratio",
                         tmp_path / "ratio.csv")
    data = np.loadtxt(out2, delimiter=",", skiprows=1)
    assert data.shape[1] == 3
    g = T - data[:, 0]
    assert np.allclose(data[:, 2], data[:, 1] * np.log(g) ** 2 / g, rtol=1e-12)


def test_emit_tail_check_masks_inner_region(tmp_path):
    y = np.geomspace(0.1, 100.0, 50)
    out = emit_plotdata({"y": y, "vals": y * np.log(y) - y}, "tail-check",
                        tmp_path / "tail.csv")
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.all(data[:, 0] > 1.0)
    assert np.allclose(data[:, 2], 1.0, rtol=1e-12)


def test_emit_plotdata_error_paths(tmp_path):
    with pytest.raises(ValueError):
        emit_plotdata({}, "sculpture", tmp_path / "x.csv")
    with pytest.raises(ValueError):
        emit_plotdata({"t": [1.0]}, "rate-ratio", tmp_path / "x.csv")
    with pytest.raises(ValueError):
        emit_plotdata({"t": [], "lam": [], "T": 1.0}, "rate-ratio",
                      tmp_path / "x.csv")
    with pytest.raises(ValueError):
        emit_plotdata({"y": [], "vals": []}, "tail-check", tmp_path / "x.csv")

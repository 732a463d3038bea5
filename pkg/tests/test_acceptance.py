"""Acceptance gate: the eleven criteria, one test line each.

The whole battery (PDE refinement ladders, the long concentration run, the
reduced-model fits) executes once in a session fixture; each test then
asserts its criterion's verdict.  Details for every criterion, including the
measured numbers behind a failure, are printed so they land in the captured
output of the corresponding test.
"""
import pytest

from smapflow.acceptance import run_all


@pytest.fixture(scope="session")
def verdicts(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    results = {r.cid: r for r in run_all(out)}
    print(f"\nacceptance artifacts under {out}")
    return results


def _check(verdicts, cid):
    r = verdicts[cid]
    print(f"[{'PASS' if r.passed else 'FAIL'}] {r.cid:2d} {r.title}: {r.details}")
    assert r.passed, f"criterion {cid} ({r.title}): {r.details}"


def test_criterion_01_sphere_constraint(verdicts):
    _check(verdicts, 1)


def test_criterion_02_energy_conservation(verdicts):
    _check(verdicts, 2)


def test_criterion_03_bubble_stationarity(verdicts):
    _check(verdicts, 3)


def test_criterion_04_resonance_annihilation(verdicts):
    _check(verdicts, 4)


def test_criterion_05_radiation_tail(verdicts):
    _check(verdicts, 5)


def test_criterion_06_leading_order_law(verdicts):
    _check(verdicts, 6)


def test_criterion_07_log_corrected_rate_law(verdicts):
    # Known red: the compensated ratio does not flatten to 10% under the
    # shipped reduced model; the front-factor stability half of the criterion
    # holds.  Asserted at face value, not weakened.
    _check(verdicts, 7)


def test_criterion_08_codimension_one_instability(verdicts):
    _check(verdicts, 8)


def test_criterion_09_pde_concentration(verdicts):
    _check(verdicts, 9)


def test_criterion_10_round_trips(verdicts):
    _check(verdicts, 10)


def test_criterion_11_regularity_monitor(verdicts):
    _check(verdicts, 11)

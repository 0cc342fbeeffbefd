import numpy as np
import pytest

from lattice_extremal.lattice_core import LatticeError, LatticeFunction, delta, from_sites, make_box
from lattice_extremal.operators import heat_step
from lattice_extremal.probe import (
    blowup_window,
    bump,
    check_bound_lemma,
    falsification_search,
    run_blowup,
)


def test_window():
    assert blowup_window(3, 2.5) == (True, False)
    assert blowup_window(3, 4.0) == (False, False)
    assert blowup_window(3, 8 / 3) == (False, True)


def test_spec_one_step_value():
    v, _ = heat_step(delta(make_box(3, 2)), 0.01, 2.5)
    assert v((0, 0, 0)) == pytest.approx(1 + 0.01 * (-6 + 1), rel=1e-15)


def test_zero_data_never_moves():
    u0 = LatticeFunction(make_box(3, 2), np.zeros((5, 5, 5)))
    rep = run_blowup(3, 2.5, u0, max_steps=20)
    assert not rep.blew_up and rep.outcome == "no blow-up observed"
    assert len(rep.trajectory) == 21
    assert all(sup == 0.0 and l2 == 0.0 for _, _, sup, l2 in rep.trajectory)


@pytest.mark.parametrize("R", [4, 8])
def test_bump_blows_up_in_window(R):
    rep = run_blowup(3, 2.5, bump(3, R))
    assert rep.blew_up and rep.failure is None
    assert rep.trajectory[-1][2] >= 1e6
    assert rep.in_window


def test_sup_norm_grows_after_onset():
    rep = run_blowup(3, 2.5, bump(3, 8))
    sups = [s for _, _, s, _ in rep.trajectory]
    tail = sups[len(sups) // 2 :]
    assert all(b > a for a, b in zip(tail, tail[1:]))


@pytest.mark.parametrize("R", [4, 8, 12])
def test_larger_data_blows_up_no_later(R):
    steps = [run_blowup(3, 2.5, bump(3, R, amplitude=A)).steps for A in (0.5, 1.0, 2.0, 5.0)]
    assert all(b <= a + 2 for a, b in zip(steps, steps[1:]))


def test_threshold_immaterial_with_fixed_step():
    u0 = bump(3, 8)
    ref = run_blowup(3, 2.5, u0, dt=0.05).steps
    for cap in (1e4, 1e5, 1e7, 1e8):
        assert abs(run_blowup(3, 2.5, u0, dt=0.05, cap=cap).steps - ref) <= 3


def test_threshold_spread_small_step():
    # smaller fixed steps resolve the final approach, so the cap shifts a few more steps
    u0 = bump(3, 8)
    steps = [run_blowup(3, 2.5, u0, dt=0.01, cap=cap).steps for cap in (1e4, 1e6, 1e8)]
    assert steps == sorted(steps) and steps[-1] - steps[0] <= 10


def test_threshold_changes_time_little_with_adaptive_step():
    u0 = bump(3, 8)
    times = [run_blowup(3, 2.5, u0, cap=cap).time for cap in (1e4, 1e6, 1e8)]
    assert max(times) - min(times) <= 0.01 * max(times)


def test_outside_window_reports_only():
    rep = run_blowup(3, 4.0, bump(3, 4, amplitude=0.01), max_steps=200)
    assert not rep.in_window
    assert rep.outcome in {"blow-up", "no blow-up observed"}


def test_unstable_step_is_integrator_failure():
    rep = run_blowup(3, 2.5, bump(3, 3), dt=1.0)
    assert rep.failure is not None and rep.outcome == "integrator failure"
    assert not rep.blew_up


def test_run_blowup_errors():
    with pytest.raises(LatticeError):
        run_blowup(3, 2.0, bump(3, 2))
    with pytest.raises(LatticeError):
        run_blowup(3, 2.5, bump(3, 2).scaled(-1))
    with pytest.raises(LatticeError):
        run_blowup(2, 2.5, bump(3, 2))
    with pytest.raises(LatticeError):
        run_blowup(3, 2.5, bump(3, 2), dt=0.0)


def test_csv_format():
    rep = run_blowup(3, 2.5, bump(3, 4), max_steps=3)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "step,sup_norm,l2_norm"
    assert len(lines) == 5
    step, sup, l2 = lines[1].split(",")
    assert step == "0" and float(sup) == 1.0


# ---------------------------------------------------------------- pointwise bound


def test_bound_lemma_zero_field():
    assert check_bound_lemma(LatticeFunction(make_box(3, 2), np.zeros((5, 5, 5))), 2.0) == []


def test_bound_lemma_gate_skips_half_delta():
    assert check_bound_lemma(delta(make_box(3, 2), value=0.5), 2.0, eq_tol=1e-6) == []


def test_bound_lemma_exact_solution_site():
    # neighbour mean m and u(0) = x with x - x^2 = m solve the equation at the origin
    x = 0.8
    m = x - x**2
    box = make_box(2, 2)
    u = from_sites(box, {(1, 0): m, (-1, 0): m, (0, 1): m, (0, -1): m, (0, 0): x})
    assert check_bound_lemma(u, 2.0) == []


def test_bound_lemma_errors():
    with pytest.raises(LatticeError):
        check_bound_lemma(delta(make_box(2, 1)), 1.0)
    with pytest.raises(LatticeError):
        check_bound_lemma(delta(make_box(2, 1)).scaled(-1), 2.0)


@pytest.mark.parametrize("a", [1.5, 2.0, 3.0])
def test_falsification_finds_nothing(a):
    res = falsification_search(500, a=a, rng=np.random.default_rng(int(a * 10)))
    assert res.violations == 0
    assert res.gated_sites > 0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_extremal.cc import (
    FunctionSequence,
    bl_defect,
    cc_inequality_check,
    cc_report,
    composition_check,
    escaping,
    gradient_mass,
    perturbation,
    random_bump,
    stationary,
    tail_mass,
)
from lattice_extremal.lattice_core import (
    LatticeError,
    LatticeFunction,
    SobolevParams,
    d1p_energy,
    delta,
    lp_power,
    make_box,
    translate,
)
from lattice_extremal.sobolev import minimize_on_box

P = SobolevParams(3, 2, 7)


@pytest.fixture(scope="module")
def extremizer():
    return minimize_on_box(P, make_box(3, 2))


def integer_field(seed, N=3, R=1, hi=4):
    rng = np.random.default_rng(seed)
    box = make_box(N, R)
    return LatticeFunction(box, rng.integers(0, hi, size=box.shape).astype(float))


# ---------------------------------------------------------------- Brezis-Lieb


@pytest.mark.parametrize("mode,p", [("values", 0.5), ("values", 2.0), ("gradients", 1.0), ("gradients", 2.0)])
def test_stationary_defects_vanish(mode, p):
    seq = stationary(random_bump(3, 2, np.random.default_rng(0)), 4)
    assert bl_defect(seq, p, mode) == [0.0] * 4


@pytest.mark.parametrize("mode", ["values", "gradients"])
def test_escaping_defect_exact_zero_once_disjoint(mode):
    u, w = integer_field(1), integer_field(2)
    seq = escaping(u, w, [1, 2, 3, 4, 5])
    d = bl_defect(seq, 2.0, mode)
    # supports separate by more than one site from n = 4 on
    assert d[3] == 0.0 and d[4] == 0.0
    assert d[0] > 0


def test_escaping_defect_with_floats_is_rounding_small():
    rng = np.random.default_rng(3)
    u, w = random_bump(3, 2, rng), random_bump(3, 2, rng)
    d = bl_defect(escaping(u, w, [6, 7]), 7.0, "values")
    assert max(d) <= 1e-14


@pytest.mark.parametrize("mode", ["values", "gradients"])
def test_perturbation_defect_decays_like_one_over_n(mode):
    # for p = 2 the defect is exactly 2 <u, w> / n (or the gradient pairing)
    rng = np.random.default_rng(4)
    u, w = random_bump(3, 2, rng), random_bump(3, 2, rng)
    ns = [1, 10, 100]
    d = bl_defect(perturbation(u, w, ns), 2.0, mode)
    if mode == "values":
        pairing = 2 * float(np.sum(u.values * w.values))
    else:
        pairing = d1p_energy(u + w, 2.0) - d1p_energy(u, 2.0) - d1p_energy(w, 2.0)
    for n, dn in zip(ns, d):
        assert dn == pytest.approx(pairing / n, rel=1e-9)
    assert d[0] > d[1] > d[2]


def test_perturbation_defect_second_order_when_pairing_vanishes():
    # p = 3: the first-order term sum |u| u w vanishes when w flips sign on a
    # symmetric pair, leaving an O(1/n^2) defect
    box = make_box(1, 2)
    u = LatticeFunction(box, np.array([0.0, 1.0, 2.0, 1.0, 0.0]))
    w = LatticeFunction(box, np.array([0.0, 1.0, 0.0, -1.0, 0.0]))
    d = bl_defect(perturbation(u, w, [1, 10, 100]), 3.0, "values")
    assert d[2] <= 1e-3 * d[0]


def test_gradient_mass_over_subsets():
    u = delta(make_box(2, 1))
    assert gradient_mass(u, 2.0) == d1p_energy(u, 2.0)
    # the origin's own edges, then only the neighbour at (1, 0)
    assert gradient_mass(u, 2.0, {(0, 0)}) == 4.0
    assert gradient_mass(u, 2.0, lambda x: x == (1, 0)) == 1.0


def test_sequence_validation():
    with pytest.raises(LatticeError):
        FunctionSequence([], delta(make_box(2, 1)))
    with pytest.raises(LatticeError):
        FunctionSequence([delta(make_box(3, 1))], delta(make_box(2, 1)))
    with pytest.raises(LatticeError):
        bl_defect(stationary(delta(make_box(2, 1))), 2.0, "weights")


def test_energy_bound():
    seq = escaping(delta(make_box(3, 1)), delta(make_box(3, 1)), [1, 3])
    assert seq.energy_bound(2.0) == max(d1p_energy(t, 2.0) for t in seq.terms)


# ---------------------------------------------------------------- tails


def test_delta_tails():
    N = 3
    assert tail_mass(delta(make_box(N, 2)), 0, 2.0, 7.0) == (2.0 * N, 0.0)
    assert tail_mass(delta(make_box(N, 2)), 1, 2.0, 7.0) == (0.0, 0.0)
    assert tail_mass(delta(make_box(N, 2)), 5, 2.0, 7.0) == (0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0, 3.0]))
def test_tails_nonincreasing(seed, p):
    rng = np.random.default_rng(seed)
    u = LatticeFunction(make_box(3, 2), rng.normal(size=(5, 5, 5)))
    prof = [tail_mass(u, R, p, 7.0) for R in range(0, 3 * 2 + 3)]
    for (m0, n0), (m1, n1) in zip(prof, prof[1:]):
        assert m1 <= m0 and n1 <= n0
        assert m1 >= 0 and n1 >= 0
    assert prof[-1] == (0.0, 0.0)


def test_tail_rejects_negative_radius():
    with pytest.raises(LatticeError):
        tail_mass(delta(make_box(2, 1)), -1, 2.0, 3.0)


# ---------------------------------------------------------------- composition and CC inequality


def test_stationary_gaps_are_tails():
    u = random_bump(3, 2, np.random.default_rng(5))
    seq = stationary(u, 3)
    gap1, gap2 = composition_check(seq, P, 1)
    mu, nu = tail_mass(u, 1, 2.0, 7.0)
    assert gap1 == pytest.approx(mu, rel=1e-12) and gap2 == pytest.approx(nu, rel=1e-12)
    assert composition_check(seq, P, 7) == (0.0, 0.0)


def test_escaping_gaps_vanish():
    u, w = integer_field(6), integer_field(7)
    seq = escaping(u, w, [6, 7, 8])
    assert composition_check(seq, P, 4) == (0.0, 0.0)


def test_escaping_only_mu_is_energy_of_w():
    w = integer_field(8)
    zero = LatticeFunction(make_box(3, 1), np.zeros((3, 3, 3)))
    seq = escaping(zero, w, [5, 6])
    mu, nu = tail_mass(seq.terms[-1], 3, 2.0, 7.0)
    assert mu == d1p_energy(w, 2.0)
    assert nu == lp_power(w, 7.0)


def test_cc_margin_zero_for_compact_sequence(extremizer):
    seq = stationary(extremizer.extremizer, 3)
    assert cc_inequality_check(seq, P, extremizer.constant_estimate, 3) == 0.0


def test_cc_margin_escaping_extremizer(extremizer):
    u = random_bump(3, 2, np.random.default_rng(9)).scaled(0.5)
    seq = escaping(u, extremizer.extremizer, [1, 2, 3, 4], step=7)
    margin = cc_inequality_check(seq, P, extremizer.constant_estimate, 7)
    assert -1e-9 <= margin <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_cc_margin_escaping_bump(extremizer, seed):
    rng = np.random.default_rng(seed)
    u, w = random_bump(3, 2, rng), random_bump(3, 2, rng)
    seq = escaping(u, w, [1, 2, 3, 4], step=7)
    assert cc_inequality_check(seq, P, extremizer.constant_estimate, 7) >= -1e-9


def test_cc_rejects_bad_constant():
    seq = stationary(delta(make_box(3, 1)))
    with pytest.raises(LatticeError):
        cc_inequality_check(seq, P, 0.0, 1)


def test_report_contents(extremizer):
    u = random_bump(3, 2, np.random.default_rng(1))
    seq = escaping(u, extremizer.extremizer, [1, 2, 3], step=7)
    rep = cc_report(seq, P, extremizer.constant_estimate, 7)
    d = rep.to_dict()
    assert d["prefix_length"] == 3
    assert set(d["mu_tail"]) == {str(R) for R in range(8)}
    assert all(len(v) == 3 for v in d["nu_tail"].values())
    assert d["bl_defects"]["values"][-1] == pytest.approx(0.0, abs=1e-14)
    assert "R_max" in d["notes"][1]

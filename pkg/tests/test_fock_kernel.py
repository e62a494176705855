import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qslice.fock_kernel import (FockError, OccupancyCoefficients, annihilate, commutator_check, create,
                                fock_battery, kernel_raise_check, number, phonon_raise, random_state,
                                read_coefficients, write_coefficients)
from qslice.lattice_phonon import LatticeModel, PhononOccupancy, normal_modes, pinned_oscillator


def basis(key, modes=6, max_total=6):
    return OccupancyCoefficients.basis(key, modes, max_total)


def test_create_examples():
    assert create(2, basis((1, 3))).terms == {(1, 2, 3): 1.0}
    out = create(1, basis((1, 1)))
    assert list(out.terms) == [(1, 1, 1)]
    assert out.terms[(1, 1, 1)] == pytest.approx(math.sqrt(3))
    assert create(0, OccupancyCoefficients.vacuum(6, 6)).terms == {(0,): 1.0}


def test_annihilate_examples():
    out = annihilate(2, basis((1, 2, 2)))
    assert list(out.terms) == [(1, 2)]
    assert out.terms[(1, 2)] == pytest.approx(math.sqrt(2))
    assert annihilate(5, basis((1, 2))).terms == {}
    assert annihilate(0, OccupancyCoefficients.vacuum(6, 6)).terms == {}


def test_number_examples():
    assert number(2, basis((2, 2, 2))).terms == {(2, 2, 2): 3.0}
    assert number(0, OccupancyCoefficients.vacuum(6, 6)).terms == {}
    assert number(2, basis((1, 3))).terms == {}


def test_number_is_create_after_annihilate():
    c = random_state(np.random.default_rng(1), 3, 3, 5)
    for s in range(3):
        assert (number(s, c) - create(s, annihilate(s, c))).max_abs() < 1e-14


@given(st.lists(st.integers(0, 3), max_size=4).map(sorted), st.integers(0, 3))
def test_ladder_on_basis_keys(key, s):
    c = OccupancyCoefficients.basis(key, 4, 6)
    out = annihilate(s, create(s, c))
    assert list(out.terms) == [tuple(key)]
    assert out.terms[tuple(key)] == pytest.approx(key.count(s) + 1, abs=1e-14)


def test_truncation_reports_dropped_weight():
    c = OccupancyCoefficients({(0, 1): 2.0, (): 1.0}, 3, 2)
    out = create(1, c)
    assert out.terms == {(1,): 1.0}
    assert out.dropped == pytest.approx(4.0 * 2)


def test_commutator_edge_is_rejected():
    with pytest.raises(FockError, match="truncation"):
        commutator_check(0, 0, basis((0, 1, 2, 3, 4, 5)))


def test_invalid_inputs():
    with pytest.raises(FockError):
        OccupancyCoefficients({(2, 1): 1.0}, 3, 3)
    with pytest.raises(FockError):
        OccupancyCoefficients({(3,): 1.0}, 3, 3)
    with pytest.raises(FockError):
        create(7, basis(()))


def test_battery():
    rep = fock_battery(4, 5, 100, seed=0)
    assert rep.max_commutator < 1e-12 and rep.max_aa < 1e-12 and rep.max_cc < 1e-12
    assert rep.number_exact and rep.create_injective
    assert rep.passed


def test_coefficients_round_trip(tmp_path):
    c = random_state(np.random.default_rng(4), 3, 3, 4)
    write_coefficients(c, tmp_path / "c.csv")
    back = read_coefficients(tmp_path / "c.csv", 3, 4)
    assert back.terms == c.terms


def test_phonon_raise():
    modes = normal_modes(LatticeModel.chain(3))
    occ, factor = phonon_raise(modes, 0, PhononOccupancy())
    assert occ.n == {0: 1} and factor == 1.0
    occ, factor = phonon_raise(modes, 0, PhononOccupancy({0: 2}))
    assert occ.n == {0: 3} and factor == pytest.approx(math.sqrt(3))
    with pytest.raises(FockError):
        phonon_raise(modes, 2, PhononOccupancy())


@pytest.mark.parametrize("n", range(5))
def test_kernel_raise_matches_ladder(n):
    modes = normal_modes(pinned_oscillator(kappa=2.0, mass=1.5))
    mode = modes.modes[0]
    kernel, ladder = kernel_raise_check(n, mode.mass, mode.omega)
    assert kernel == pytest.approx(math.sqrt(n + 1), abs=1e-8)
    assert ladder == pytest.approx(kernel, abs=1e-8)

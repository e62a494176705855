import math

import numpy as np
import pytest
from scipy.optimize import brentq

from qslice.lattice_phonon import (LatticeError, LatticeModel, PhononOccupancy, classicality_energies,
                                   hessian, lattice_from_dict, mode_overlap_matrix, mode_width, normal_modes,
                                   oscillator_eigenfunction, permutation_overlap, phonon_amplitude,
                                   pinned_oscillator, reconstruction_error, scaled, sequence_widths,
                                   write_mode_table)


def test_three_atom_chain():
    modes = normal_modes(LatticeModel.chain(3))
    np.testing.assert_allclose(modes.omegas, [1.0, math.sqrt(3.0)], atol=1e-12)
    assert modes.zero_modes_removed == 1


def test_pinned_single_mass():
    modes = normal_modes(pinned_oscillator(kappa=4.0))
    assert modes.zero_modes_removed == 0
    assert modes.omegas[0] == pytest.approx(2.0, abs=1e-12)


def test_open_chain_dispersion():
    modes = normal_modes(LatticeModel.chain(8))
    expected = 2 * np.sin(np.arange(1, 8) * np.pi / 16)
    np.testing.assert_allclose(modes.omegas, expected, atol=1e-9)
    assert modes.zero_modes_removed == 1


def test_pinned_chain_keeps_every_mode():
    modes = normal_modes(LatticeModel.chain(5, pinned=True))
    assert modes.zero_modes_removed == 0 and len(modes.modes) == 5
    # a chain with walls at both ends: omega_n = 2 sin(n pi / 2(N+1))
    np.testing.assert_allclose(modes.omegas, 2 * np.sin(np.arange(1, 6) * np.pi / 12), atol=1e-9)


def test_triangular_patch_removes_rigid_motions():
    lat = LatticeModel.triangular(3, 3)
    modes = normal_modes(lat)
    # two translations and one rotation
    assert modes.zero_modes_removed == 3
    assert len(modes.modes) == 2 * lat.n_atoms - 3


def test_modes_are_orthonormal_and_complete():
    lat = LatticeModel.triangular(2, 3)
    modes = normal_modes(lat)
    np.testing.assert_allclose(mode_overlap_matrix(modes), np.eye(2 * lat.n_atoms), atol=1e-10)
    assert reconstruction_error(lat, modes) < 1e-12


def test_hessian_is_symmetric_with_zero_row_sums():
    h = hessian(LatticeModel.triangular(2, 2))
    np.testing.assert_allclose(h, h.T)
    np.testing.assert_allclose(h.sum(axis=1), 0.0, atol=1e-12)


def test_width_formula():
    modes = normal_modes(pinned_oscillator(kappa=1.0, mass=1.0))
    assert mode_width(modes.modes[0]) == pytest.approx(1.0)
    heavy = normal_modes(pinned_oscillator(kappa=4.0, mass=4.0))
    assert mode_width(heavy.modes[0]) == pytest.approx(0.5)


def test_width_invariance():
    lat = LatticeModel.chain(8)
    base = sequence_widths(normal_modes(lat))
    stiff = sequence_widths(normal_modes(scaled(lat, kappa_factor=2.0, mass_factor=0.5)))
    np.testing.assert_allclose(stiff / base, 1.0, atol=1e-10)


def test_zero_mode_has_no_width():
    modes = normal_modes(LatticeModel.chain(3))
    with pytest.raises(LatticeError):
        mode_width(modes.zero_modes[0])


def test_ground_state_peaks_at_rest():
    lat = LatticeModel.chain(3)
    modes = normal_modes(lat)
    R = lat.positions
    peak = phonon_amplitude(modes, R, PhononOccupancy(), R)
    assert peak > 0
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = R + 0.3 * rng.standard_normal(R.shape)
        assert abs(phonon_amplitude(modes, R, PhononOccupancy(), X)) < peak


def test_odd_occupancy_vanishes_at_rest():
    lat = LatticeModel.chain(3)
    modes = normal_modes(lat)
    R = lat.positions
    assert phonon_amplitude(modes, R, PhononOccupancy({0: 1}), R) == pytest.approx(0.0, abs=1e-15)


def test_second_level_nodes_match_hermite_roots():
    mass, kappa = 2.0, 8.0
    lat = pinned_oscillator(kappa, mass)
    modes = normal_modes(lat)
    omega = modes.omegas[0]
    occ = PhononOccupancy({0: 2})

    def amp(u):
        return phonon_amplitude(modes, lat.positions, occ, lat.positions + u)

    # H2(xi) = 4 xi^2 - 2 vanishes at xi = 1/sqrt(2), i.e. u = sqrt(hbar / (2 m omega))
    root = math.sqrt(1.0 / (2 * mass * omega))
    w = mode_width(modes.modes[0])
    for sign in (1.0, -1.0):
        lo, hi = sorted((sign * 0.3 * w, sign * 1.2 * w))
        assert brentq(amp, lo, hi, xtol=1e-14) == pytest.approx(sign * root, abs=1e-9)


def test_eigenfunctions_are_orthonormal():
    u = np.linspace(-12, 12, 6001)
    du = u[1] - u[0]
    fs = np.array([oscillator_eigenfunction(n, u, 1.5, 0.8) for n in range(6)])
    np.testing.assert_allclose(fs @ fs.T * du, np.eye(6), atol=1e-10)


def test_zero_mode_occupancy_rejected():
    lat = LatticeModel.chain(3)
    modes = normal_modes(lat)
    with pytest.raises(LatticeError):
        phonon_amplitude(modes, lat.positions, PhononOccupancy({5: 1}), lat.positions)


def test_symmetrization_is_negligible_for_stiff_lattice():
    lat = LatticeModel.chain(4, kappa=50.0, mass=50.0)
    modes = normal_modes(lat, zero_width=0.05)
    assert permutation_overlap(modes, lat.positions) < 1e-10


def test_classicality_energies():
    e = classicality_energies(E_b=1.0, L=2.0, M=1.0, d=1.0, Y=2.0)
    assert e.U_surf == 4.0
    assert classicality_energies(1.0, 1.0, 1.0, 1.0, 1.0).U_r == 1.0
    assert classicality_energies(1.0, 1.0, 1.0, 1.0, 2.0).U_el == 0.5
    with pytest.raises(LatticeError):
        classicality_energies(1.0, 0.0, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("kwargs", [
    dict(positions=[0.0, 1.0], masses=[1.0, -1.0], springs=[(0, 1, 1.0)]),
    dict(positions=[0.0, 1.0, 2.0], masses=[1.0] * 3, springs=[(0, 1, 1.0)]),
    dict(positions=[0.0, 0.0], masses=[1.0] * 2, springs=[(0, 1, 1.0)]),
    dict(positions=[0.0, 1.0], masses=[1.0] * 2, springs=[(0, 1, 1.0)], boundary="pinned"),
])
def test_invalid_lattices(kwargs):
    with pytest.raises(LatticeError):
        LatticeModel(np.asarray(kwargs.pop("positions")), np.asarray(kwargs.pop("masses")),
                     tuple(kwargs.pop("springs")), **kwargs)


def test_lattice_from_dict_and_table(tmp_path):
    lat = lattice_from_dict({"kind": "chain", "n": 4, "kappa": 2.0})
    modes = normal_modes(lat)
    write_mode_table(modes, tmp_path / "modes.csv")
    data = np.loadtxt(tmp_path / "modes.csv", delimiter=",", skiprows=1, ndmin=2)
    np.testing.assert_array_equal(data[:, 1], modes.omegas)
    with pytest.raises(LatticeError):
        lattice_from_dict({"kind": "hexagonal"})

import numpy as np
import pytest

from qslice.grid_field import Grid, make_gaussian, make_rect_sheet, observables
from qslice.tdse import (Potential, ProbeRecorder, StepAuditError, StepperConfig, audit_step, evolve,
                         richardson_ratio, step, steps_between)


@pytest.fixture
def grid():
    return Grid((-40.0,), (40.0,), (320,))


def test_step_conserves_norm(grid):
    f = make_gaussian(grid, -5.0, 1.0, 2.0)
    g = step(f, Potential.free(), StepperConfig(0.01))
    assert g.time == pytest.approx(0.01)
    assert abs(g.norm() - f.norm()) < 1e-12


def test_free_gaussian_spreading(grid):
    f = make_gaussian(grid, 0.0, 1.0, 0.0)
    out = evolve(f, Potential.free(), StepperConfig(0.01), 5.0)
    assert observables(out).sigma_x[0] == pytest.approx(np.sqrt(7.25), rel=1e-2)


def test_sheet_drifts_at_group_velocity():
    g = Grid((-40.0,), (40.0,), (800,))
    f = make_rect_sheet(g, -15.0, -5.0, 5.0)
    x0 = observables(f).mean_x[0]
    out = evolve(f, Potential.free(), StepperConfig(0.002), 2.0)
    assert observables(out).mean_x[0] - x0 == pytest.approx(10.0, rel=1e-2)


def test_constant_potential_is_a_phase(grid):
    f = make_gaussian(grid, 0.0, 1.0, 1.0)
    free = evolve(f, Potential.free(), StepperConfig(0.01), 1.0)
    const = evolve(f, Potential.static(np.full(grid.shape, 0.7)), StepperConfig(0.01), 1.0)
    np.testing.assert_allclose(const.density, free.density, atol=1e-12)
    np.testing.assert_allclose(const.values, free.values * np.exp(-0.7j), atol=1e-12)


def test_observers_are_read_only(grid):
    f = make_gaussian(grid, 0.0, 1.0, 1.0)
    plain = evolve(f, Potential.free(), StepperConfig(0.01), 1.0)
    probes = [ProbeRecorder(grid, p) for p in (-1.0, 0.0, 1.0)]
    watched = evolve(f, Potential.free(), StepperConfig(0.01), 1.0, probes)
    assert np.array_equal(plain.values, watched.values)
    assert len(probes[0].times) == 101


def test_evolve_to_same_time_is_identity(grid):
    f = make_gaussian(grid, 0.0, 1.0, 1.0)
    assert np.array_equal(evolve(f, Potential.free(), StepperConfig(0.01), 0.0).values, f.values)


def test_harmonic_coherent_state(grid):
    small = Grid((-12.0,), (12.0,), (96,))
    x = small.axes[0]
    f = make_gaussian(small, 2.0, np.sqrt(0.5), 0.0)
    pot = Potential.static(0.5 * x ** 2)
    times, means = [], []

    def watch(fld, i):
        times.append(fld.time)
        means.append(observables(fld).mean_x[0])

    evolve(f, pot, StepperConfig(2 * np.pi / 1200), 2 * np.pi, [watch], cadence=20)
    np.testing.assert_allclose(means, 2.0 * np.cos(times), atol=0.02)


def test_richardson_second_order():
    g = Grid((-12.0,), (12.0,), (96,))
    x = g.axes[0]
    f = make_gaussian(g, 1.0, 1.0, 0.5)
    ratio = richardson_ratio(f, Potential.static(0.1 * x ** 2), 0.016, 2.0)
    assert 3.5 <= ratio <= 4.5


def test_time_dependent_potential(grid):
    f = make_gaussian(grid, 0.0, 1.0, 0.0)
    pot = Potential.time_dependent(lambda t: np.full(grid.shape, t), bound=1.0)
    out = evolve(f, pot, StepperConfig(0.01), 1.0)
    # phase is the integral of V = t, i.e. 1/2
    np.testing.assert_allclose(out.values, evolve(f, Potential.free(), StepperConfig(0.01), 1.0).values
                               * np.exp(-0.5j), atol=1e-10)


def test_audits(grid):
    with pytest.raises(StepAuditError, match="k_max"):
        audit_step(grid, Potential.free(), StepperConfig(1.0))
    with pytest.raises(StepAuditError):
        audit_step(grid, Potential.static(np.full(grid.shape, 100.0)), StepperConfig(0.01))
    assert audit_step(grid, Potential.free(), StepperConfig(0.01))["kinetic"] < 1.5


def test_steps_between():
    assert steps_between(0.0, 1.0, 0.01) == 100
    with pytest.raises(ValueError, match="whole number"):
        steps_between(0.0, 1.005, 0.01)

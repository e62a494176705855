"""Acceptance suite. Each test records one numbered criterion for the summary.

The bundled scenarios run once per module into temporary directories and the
results are shared between criteria. The determinism check runs them again.
"""

import math
import time

import numpy as np
import pytest

from qslice.config import BodySpec, GridSpec, InitialSpec, RunConfig, StepperSpec
from qslice.fock_kernel import fock_battery, kernel_raise_check
from qslice.grid_field import Grid, make_gaussian, observables
from qslice.lattice_phonon import LatticeModel, normal_modes, pinned_oscillator, scaled, sequence_widths
from qslice.runner import run_with_ledger
from qslice.scenarios import BUNDLED, boosted, load_bundled
from qslice.tdse import Potential, StepperConfig, evolve, richardson_ratio

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def bundled(tmp_path_factory):
    """Report, in-memory ledger and output directory of every bundled scenario."""
    out = {}
    for name in BUNDLED:
        path = tmp_path_factory.mktemp(name)
        report, ledger = run_with_ledger(load_bundled(name), path)
        out[name] = (report, ledger, path)
    return out


def _records_of(ledger, body):
    return [r for r in ledger.records if ledger.sites[r.site].body == body]


def test_c1_born_recovery(bundled, criterion):
    born, _, _ = bundled["born_gaussian"]
    flat, _, _ = bundled["flat_screen"]
    ok = criterion(1, "Born recovery", born.born_l1 < 0.02 and flat.born_l1 < 0.02 and born.wall_clock < 60.0,
                   f"flux L1 {born.born_l1:.2e}, instant L1 {flat.born_l1:.2e}, runtime {born.wall_clock:.1f} s")
    assert ok


def test_c2_norm_identity(bundled, criterion):
    worst_id = max(abs(r.audit["max_identity_residual"]) for r, _, _ in bundled.values())
    worst_step = max(r.audit["max_step_residual"] for r, _, _ in bundled.values())
    ok = criterion(2, "Norm ledger identity", worst_id < 1e-6 and worst_step < 1e-10,
                   f"max identity {worst_id:.1e}, max step {worst_step:.1e} over {len(bundled)} scenarios")
    assert ok


def test_c3_accelerating_surface(bundled, criterion):
    report, ledger, _ = bundled["accelerating_surface"]
    ref = report.reference
    t1, x1, v_g = 4.0, 5.0, 1.0
    plate = _records_of(ledger, "plate")
    late = [r for r in plate if r.t_last > t1]
    downstream = [r for r in _records_of(ledger, "screen2") if r.probability > 1e-6]
    first = min(r.t_first for r in downstream)
    ok = (ref["relative_error"] < 0.01 and not late and first >= x1 / v_g - ledger.bin_width)
    ok = criterion(3, "Accelerating surface", ok,
                   f"captured {ref['captured']:.5f} vs oracle {ref['oracle']:.5f} "
                   f"({100 * ref['relative_error']:.2f}%), plate records after t1: {len(late)}, "
                   f"first downstream record at t = {first:.2f}")
    assert ok


def _galilean_base() -> RunConfig:
    # finite thickness keeps the body's extent inside the periodic domain in both frames
    return RunConfig(
        name="galilean",
        grid=GridSpec(lo=[-51.2], hi=[51.2], n=[512]),
        initial=InitialSpec(kind="gaussian", center=[-20.0], sigma=[2.0], k0=[4.0]),
        stepper=StepperSpec(dt=0.01, t_final=12.0),
        bodies=[BodySpec(name="screen", primitive="line", position=[0.0], d=0.5, v_s=1.0, thickness=10.0,
                         skin=3.0, absorption=20.0)],
    )


def test_c4_galilean_invariance(criterion):
    base = _galilean_base()
    q = -32 * 2 * math.pi / 102.4
    _, rest = run_with_ledger(base)
    _, moving = run_with_ledger(boosted(base, q))
    a = {(r.site, r.t_bin): r.probability for r in rest.records}
    b = {(r.site, r.t_bin): r.probability for r in moving.records}
    diff = max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))
    ok = criterion(4, "Galilean invariance", diff < 1e-6,
                   f"max per-(site, bin) difference {diff:.1e} at body speed {q:.3f}")
    assert ok


def test_c5_free_propagation(criterion):
    start = time.perf_counter()
    g = Grid((-40.0,), (40.0,), (320,))
    out = evolve(make_gaussian(g, 0.0, 1.0, 0.0), Potential.free(), StepperConfig(0.01), 5.0)
    sigma = observables(out).sigma_x[0]
    expected = math.sqrt(1.0 + (5.0 / 2.0) ** 2)
    small = Grid((-12.0,), (12.0,), (96,))
    x = small.axes[0]
    ratio = richardson_ratio(make_gaussian(small, 1.0, 1.0, 0.5), Potential.static(0.1 * x ** 2), 0.016, 2.0)
    elapsed = time.perf_counter() - start
    rel = abs(sigma - expected) / expected
    ok = criterion(5, "Free propagation", rel < 0.01 and 3.5 <= ratio <= 4.5 and elapsed < 10.0,
                   f"sigma_x error {rel:.1e}, Richardson ratio {ratio:.4f}, runtime {elapsed:.1f} s")
    assert ok


def test_c6_interference(bundled, criterion):
    report, _, _ = bundled["holes_interference"]
    ref = report.reference
    ok = ref["contrast"] > 0.5 and ref["spacing_error"] < 0.05 and report.wall_clock < 300.0
    ok = criterion(6, "Interference", ok,
                   f"contrast {ref['contrast']:.3f}, spacing {ref['spacing']:.3f} vs "
                   f"{ref['expected_spacing']:.3f} ({100 * ref['spacing_error']:.2f}%), "
                   f"runtime {report.wall_clock:.0f} s")
    assert ok


def test_c7_normal_modes(criterion):
    lat = LatticeModel.chain(8)
    modes = normal_modes(lat)
    err = float(np.max(np.abs(modes.omegas - 2 * np.sin(np.arange(1, 8) * np.pi / 16))))
    widths = sequence_widths(normal_modes(scaled(lat, 2.0, 0.5))) / sequence_widths(modes)
    width_err = float(np.max(np.abs(widths - 1.0)))
    ok = criterion(7, "Normal modes", err < 1e-9 and modes.zero_modes_removed == 1 and width_err < 1e-10,
                   f"dispersion error {err:.1e}, zero modes {modes.zero_modes_removed}, "
                   f"width ratio error {width_err:.1e}")
    assert ok


def test_c8_fock_algebra(criterion):
    rep = fock_battery(4, 5, 100, seed=0)
    ok = criterion(8, "Fock algebra", rep.max_commutator < 1e-12 and rep.number_exact,
                   f"max commutator residual {rep.max_commutator:.1e}, number operator exact: {rep.number_exact}")
    assert ok


def test_c9_phonon_raise(criterion):
    mode = normal_modes(pinned_oscillator(kappa=1.0, mass=1.0)).modes[0]
    worst = 0.0
    for n in range(5):
        kernel, ladder = kernel_raise_check(n, mode.mass, mode.omega)
        worst = max(worst, abs(kernel - ladder), abs(kernel - math.sqrt(n + 1)))
    ok = criterion(9, "Phonon raise", worst < 1e-8, f"max kernel vs ladder deviation {worst:.1e} for n = 0..4")
    assert ok


def test_c10_temporal_uncertainty(bundled, criterion):
    checked, failures = 0, []
    for name, (report, _, _) in bundled.items():
        for entry in report.probes:
            checked += 1
            bound = 0.5 - 2.0 / entry["n_samples"]
            if "product" not in entry or entry["product"] < bound:
                failures.append(f"{name}@{entry['position']}")
    worst = min((e["product"] for r, _, _ in bundled.values() for e in r.probes if "product" in e), default=math.nan)
    ok = criterion(10, "Temporal uncertainty", checked > 0 and not failures,
                   f"{checked} probes, smallest product {worst:.3f}, failures {failures or 'none'}")
    assert ok


def test_c11_determinism(bundled, criterion, tmp_path):
    changed = []
    for name, (_, _, path) in bundled.items():
        again = tmp_path / name
        run_with_ledger(load_bundled(name), again)
        if (again / "ledger.csv").read_bytes() != (path / "ledger.csv").read_bytes():
            changed.append(name)
    ok = criterion(11, "Determinism", not changed,
                   f"{len(bundled)} scenarios rerun, ledgers differing: {changed or 'none'}")
    assert ok

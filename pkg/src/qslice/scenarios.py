"""Bundled scenario configurations."""

from __future__ import annotations

import copy
import math
from importlib import resources

from .config import (BodySpec, GridSpec, HoleSpec, InitialSpec, LedgerSpec, OutputSpec, PotentialSpec,
                     ReferenceSpec, RunConfig, StepperSpec, Units)


HOLE_SEPARATION = 4.0
HOLE_WIDTH = 1.0
PLATE_X = -20.0
PLATE_THICKNESS = 1.0
COLLECTOR_X = 20.0


def scenario_flat_screen() -> RunConfig:
    """Broad, thin sheet packet striking a static 64-site screen in 2D.

    The packet is short along the motion, so every part of it arrives within
    a few time bins. The reference is the free transverse marginal at contact.
    """
    return RunConfig(
        name="flat_screen",
        units=Units(hbar=1.0, mass=4.0),
        grid=GridSpec(lo=[-16.0, -204.8], hi=[8.0, 204.8], n=[96, 2048]),
        initial=InitialSpec(kind="gaussian", center=[-8.0, 0.0], sigma=[1.0, 28.0], k0=[8.0, 0.0]),
        stepper=StepperSpec(dt=0.02, t_final=9.0),
        bodies=[BodySpec(name="screen", primitive="line", position=[0.0, 0.0], d=6.4, v_s=6.4,
                         skin=4.0, absorption=4.0)],
        reference=ReferenceSpec(kind="instant", body="screen", time=4.0),
        outputs=OutputSpec(probes=[[-0.5, 0.0]]),
    )


def scenario_born_gaussian() -> RunConfig:
    """Gaussian packet on a static 64-site screen, compared with the free flux per site panel."""
    cfg = scenario_flat_screen()
    cfg.name = "born_gaussian"
    cfg.grid = GridSpec(lo=[-18.0, -204.8], hi=[7.0, 204.8], n=[100, 2048])
    cfg.initial = InitialSpec(kind="gaussian", center=[-7.0, 0.0], sigma=[1.5, 28.0], k0=[8.0, 0.0])
    cfg.reference = ReferenceSpec(kind="flux", body="screen")
    cfg.stepper = StepperSpec(dt=0.02, t_final=8.5)
    cfg.outputs = OutputSpec()
    return cfg


def scenario_elongated_packet() -> RunConfig:
    """Long packet arriving at a single 1D site over many time bins."""
    return RunConfig(
        name="elongated_packet",
        grid=GridSpec(lo=[-204.8], hi=[204.8], n=[2048]),
        initial=InitialSpec(kind="gaussian", center=[-80.0], sigma=[12.0], k0=[6.0]),
        stepper=StepperSpec(dt=0.01, t_final=26.0),
        bodies=[BodySpec(name="screen", primitive="line", position=[10.0], d=0.5, v_s=0.5,
                         skin=3.0, absorption=20.0)],
        reference=ReferenceSpec(kind="flux_bins", body="screen", site=0),
        outputs=OutputSpec(probes=[[0.0]]),
    )


def scenario_accelerating_surface() -> RunConfig:
    """Sheet packet on a screen that is kicked away faster than the packet at t = 4.

    The plate recedes at v = 5 and stops inside a second screen at x = 5,
    which records the transmitted part. A rear backstop absorbs the backward
    tail before it can wrap around the periodic domain.
    """
    return RunConfig(
        name="accelerating_surface",
        units=Units(hbar=1.0, mass=8.0),
        grid=GridSpec(lo=[-50.0], hi=[50.0], n=[1000]),
        initial=InitialSpec(kind="rect_sheet", lo=[-10.0], hi=[0.0], k0=[8.0]),
        stepper=StepperSpec(dt=0.01, t_final=20.0),
        bodies=[
            BodySpec(name="plate", primitive="line", position=[0.0], d=0.5, v_s=1.0, thickness=10.0,
                     trajectory=[[0.0, 0.0], [4.0, 5.0], [5.2, 0.0]]),
            BodySpec(name="screen2", primitive="line", position=[5.0], d=0.5, v_s=1.0),
            BodySpec(name="backstop", primitive="line", position=[-40.0], d=0.5, v_s=1.0, angle=math.pi),
        ],
        ledger=LedgerSpec(bin_width=0.5),
        reference=ReferenceSpec(kind="swept", body="plate", time=4.0),
    )


def scenario_two_plates(separation: float = 4.0) -> RunConfig:
    """Partially absorbing thin plate followed by a collector plate in 1D."""
    return RunConfig(
        name="two_plates",
        grid=GridSpec(lo=[-51.2], hi=[51.2], n=[512]),
        initial=InitialSpec(kind="gaussian", center=[-20.0], sigma=[2.0], k0=[4.0]),
        stepper=StepperSpec(dt=0.01, t_final=16.0),
        bodies=[BodySpec(name="plates", primitive="two_plates", position=[0.0], d=0.5, v_s=1.0,
                         separation=separation, thickness=1.0, eta=0.5, eta_second=1.0, skin=0.5,
                         absorption=8.0, second_skin=3.0, second_absorption=20.0),
                BodySpec(name="backstop", primitive="line", position=[-40.0], d=0.5, v_s=1.0,
                         angle=math.pi, skin=3.0, absorption=20.0)],
        outputs=OutputSpec(probes=[[-5.0]]),
    )


def scenario_holes_interference(hole_shift_time: float | None = None) -> RunConfig:
    """Plate with two holes in front of a static collector in 2D.

    With ``hole_shift_time`` the holes move apart at that time, scripted as a
    closing pair and an opening pair. A rear backstop absorbs what the plate
    reflects before it can wrap around the periodic domain.
    """
    a, w = HOLE_SEPARATION, HOLE_WIDTH
    holes = [HoleSpec(lo=-0.5 * a - 0.5 * w, hi=-0.5 * a + 0.5 * w),
             HoleSpec(lo=0.5 * a - 0.5 * w, hi=0.5 * a + 0.5 * w)]
    if hole_shift_time is not None:
        b = 1.5 * a
        holes = [HoleSpec(h.lo, h.hi, t_close=hole_shift_time) for h in holes]
        holes += [HoleSpec(lo=-0.5 * b - 0.5 * w, hi=-0.5 * b + 0.5 * w, t_open=hole_shift_time),
                  HoleSpec(lo=0.5 * b - 0.5 * w, hi=0.5 * b + 0.5 * w, t_open=hole_shift_time)]
    return RunConfig(
        name="holes_interference" if hole_shift_time is None else "holes_interference_shift",
        units=Units(hbar=1.0, mass=2.0),
        grid=GridSpec(lo=[-51.2, -51.2], hi=[51.2, 51.2], n=[512, 512]),
        initial=InitialSpec(kind="gaussian", center=[-30.0, 0.0], sigma=[2.0, 6.0], k0=[10.0, 0.0]),
        stepper=StepperSpec(dt=0.01, t_final=14.0),
        bodies=[
            BodySpec(name="plate", primitive="line", position=[PLATE_X, 0.0], d=0.4, v_s=1.0,
                     thickness=PLATE_THICKNESS, holes=holes, skin=0.4, absorption=100.0),
            BodySpec(name="collector", primitive="line", position=[COLLECTOR_X, 0.0], d=0.4, v_s=1.0,
                     skin=3.0, absorption=20.0),
            BodySpec(name="backstop", primitive="line", position=[-45.0, 0.0], d=6.4, v_s=1.0,
                     angle=math.pi, skin=3.0, absorption=20.0),
        ],
        reference=ReferenceSpec(kind="fringes", body="collector"),
        outputs=OutputSpec(probes=[[0.0, 0.0]], probe_every=2),
    )


BUNDLED = {
    "flat_screen": scenario_flat_screen,
    "born_gaussian": scenario_born_gaussian,
    "elongated_packet": scenario_elongated_packet,
    "accelerating_surface": scenario_accelerating_surface,
    "two_plates": scenario_two_plates,
    "holes_interference": scenario_holes_interference,
}


def bundled_path(name: str):
    """Path of the TOML file shipped for bundled scenario ``name``."""
    return resources.files("qslice") / "scenarios" / f"{name}.toml"


def load_bundled(name: str) -> RunConfig:
    if name not in BUNDLED:
        raise KeyError(f"no bundled scenario {name!r}")
    return RunConfig.load(bundled_path(name))


def boosted(config: RunConfig, q: float) -> RunConfig:
    """Same scenario seen from a frame moving at -hbar q / m along x.

    The packet wavevector gains ``q`` and every body gains velocity hbar q / m.
    On a periodic grid ``q`` should be a multiple of 2 pi / L_x so the boost
    is exact.
    """
    out = copy.deepcopy(config)
    v = out.units.hbar * q / out.units.mass
    out.name = f"{config.name}_boost"
    out.initial.k0 = [out.initial.k0[0] + q] + out.initial.k0[1:]
    dim = len(out.grid.n)
    for b in out.bodies:
        rows = b.trajectory or [[0.0] + [0.0] * dim]
        b.trajectory = [[r[0], r[1] + v] + r[2:] for r in rows]
    return out


def two_plates_sweep(separations, run_fn=None) -> list[dict]:
    """Arrival-time spread at the collector for several plate separations."""
    from .runner import run

    run_fn = run_fn or run
    rows = []
    for s in separations:
        rep = run_fn(scenario_two_plates(s))
        first, second = rep.bodies["plates.1"], rep.bodies["plates.2"]
        rows.append({"separation": s, "captured_first": first["captured"],
                     "captured_second": second["captured"],
                     "arrival_spread": second.get("arrival_spread", math.nan),
                     "time_bin_bound": second["time_bin_bound"]})
    return rows

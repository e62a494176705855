"""Strang split-operator propagation of a wave field on a periodic grid."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import fft as sfft

from .grid_field import Grid, ProbeSignal, WaveField

PHASE_LIMIT = 0.5
KINETIC_LIMIT = 1.5


class StepAuditError(ValueError):
    """Time step too large for the potential or the grid resolution."""


@dataclass(frozen=True, eq=False)
class Potential:
    """Scalar potential acting on the field.

    ``kind`` is one of ``free``, ``static_grid`` or ``time_dependent_callback``.
    A callback maps a time to an array of grid values; its ``bound`` must cover
    max |V| over the run because it feeds the step-size audit.
    """

    kind: str = "free"
    values: np.ndarray | None = None
    callback: Callable[[float], np.ndarray] | None = None
    bound: float = 0.0

    def __post_init__(self):
        if self.kind == "free":
            object.__setattr__(self, "bound", 0.0)
        elif self.kind == "static_grid":
            if self.values is None:
                raise ValueError("static_grid potential needs values")
            vals = np.array(self.values, dtype=float, copy=True)
            if not np.all(np.isfinite(vals)):
                raise ValueError("potential values must be finite")
            vals.flags.writeable = False
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "bound", float(np.max(np.abs(vals))) if vals.size else 0.0)
        elif self.kind == "time_dependent_callback":
            if self.callback is None:
                raise ValueError("time_dependent_callback potential needs a callback")
            if not np.isfinite(self.bound) or self.bound < 0:
                raise ValueError("callback potential needs a finite bound")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def free(cls) -> "Potential":
        return cls("free")

    @classmethod
    def static(cls, values) -> "Potential":
        return cls("static_grid", values=values)

    @classmethod
    def time_dependent(cls, callback, bound: float) -> "Potential":
        return cls("time_dependent_callback", callback=callback, bound=bound)

    def values_at(self, t: float, shape: tuple[int, ...]) -> np.ndarray | None:
        """Grid values at time ``t``; ``None`` for a free particle."""
        if self.kind == "free":
            return None
        if self.kind == "static_grid":
            vals = self.values
        else:
            vals = np.asarray(self.callback(t), dtype=float)
        if vals.shape != tuple(shape):
            raise ValueError(f"potential shape {vals.shape} does not match grid {tuple(shape)}")
        return vals


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "split_operator_strang"
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not self.dt > 0:
            raise StepAuditError("dt must be positive")
        if self.scheme != "split_operator_strang":
            raise ValueError(f"unsupported scheme {self.scheme!r}")


def audit_step(grid: Grid, pot: Potential, cfg: StepperConfig, mass: float = 1.0,
               hbar: float = 1.0) -> dict:
    """Check the phase-wrap and kinetic step limits; returns both ratios."""
    phase = cfg.dt * pot.bound / hbar
    kinetic = cfg.dt * hbar * grid.k_max_squared / (2 * mass)
    if phase >= PHASE_LIMIT:
        raise StepAuditError(f"dt*max|V|/hbar = {phase:.3g} exceeds {PHASE_LIMIT}")
    if kinetic >= KINETIC_LIMIT:
        raise StepAuditError(f"dt*hbar*k_max^2/2m = {kinetic:.3g} exceeds {KINETIC_LIMIT}")
    return {"phase": phase, "kinetic": kinetic}


@lru_cache(maxsize=32)
def kinetic_propagator(grid: Grid, dt: float, mass: float, hbar: float) -> np.ndarray:
    prop = np.exp(-1j * hbar * grid.k_squared * dt / (2 * mass))
    prop.flags.writeable = False
    return prop


def step_values(grid: Grid, values: np.ndarray, t: float, pot: Potential, dt: float,
                mass: float, hbar: float) -> np.ndarray:
    """One Strang step on a raw array: half potential, kinetic, half potential."""
    v = pot.values_at(t + 0.5 * dt, grid.shape)
    psi = values
    if v is not None:
        half = np.exp(-0.5j * v * dt / hbar)
        psi = psi * half
    psi = sfft.ifftn(kinetic_propagator(grid, dt, mass, hbar) * sfft.fftn(psi))
    if v is not None:
        psi = psi * half
    return psi


def step(field: WaveField, pot: Potential, cfg: StepperConfig) -> WaveField:
    """Advance ``field`` by one time step ``cfg.dt``."""
    audit_step(field.grid, pot, cfg, field.mass, field.hbar)
    psi = step_values(field.grid, field.values, field.time, pot, cfg.dt, field.mass, field.hbar)
    return field.replace(values=psi, time=field.time + cfg.dt)


def steps_between(t0: float, t1: float, dt: float) -> int:
    """Number of fixed steps spanning [t0, t1]; the span must be a whole multiple of dt."""
    if t1 < t0 - 1e-12 * max(1.0, abs(t0)):
        raise ValueError("t_final precedes the field time")
    ratio = (t1 - t0) / dt
    n = int(round(ratio))
    if abs(ratio - n) > 1e-6:
        raise ValueError(f"interval {t1 - t0} is not a whole number of steps of {dt}")
    return n


def evolve(field: WaveField, pot: Potential, cfg: StepperConfig, t_final: float,
           observers: Sequence[Callable[[WaveField, int], None]] = (), cadence: int = 1) -> WaveField:
    """Repeated fixed steps up to ``t_final``.

    Observers are called as ``observer(field, step_index)`` on the initial
    field and after every ``cadence`` steps. They must not modify the field.
    """
    n = steps_between(field.time, t_final, cfg.dt)
    if n > cfg.max_steps:
        raise StepAuditError(f"{n} steps exceed max_steps={cfg.max_steps}")
    audit_step(field.grid, pot, cfg, field.mass, field.hbar)
    t0 = field.time
    for obs in observers:
        obs(field, 0)
    psi = field.values
    for i in range(1, n + 1):
        psi = step_values(field.grid, psi, t0 + (i - 1) * cfg.dt, pot, cfg.dt, field.mass, field.hbar)
        if observers and i % cadence == 0:
            current = field.replace(values=psi, time=t0 + i * cfg.dt)
            for obs in observers:
                obs(current, i)
    return field.replace(values=psi, time=t0 + n * cfg.dt)


def richardson_ratio(field: WaveField, pot: Potential, dt: float, t_final: float) -> float:
    """Convergence ratio ``|psi_dt - psi_dt/2| / |psi_dt/2 - psi_dt/4|`` at ``t_final``.

    A second-order scheme gives about 4. Under a free potential the split step
    is exact and the ratio is meaningless.
    """
    out = [evolve(field, pot, StepperConfig(dt / f), t_final).values for f in (1, 2, 4)]
    return float(np.linalg.norm(out[0] - out[1]) / np.linalg.norm(out[1] - out[2]))


class ProbeRecorder:
    """Observer sampling psi at the grid cell nearest a fixed point."""

    def __init__(self, grid: Grid, position: Iterable[float]):
        self.position = tuple(float(v) for v in np.atleast_1d(position))
        self.index = grid.nearest_index(self.position)
        self.times: list[float] = []
        self.samples: list[complex] = []

    def __call__(self, field: WaveField, step_index: int) -> None:
        self.times.append(field.time)
        self.samples.append(complex(field.values[self.index]))

    def signal(self) -> ProbeSignal:
        if len(self.times) < 2:
            raise ValueError("probe has fewer than two samples")
        dt = (self.times[-1] - self.times[0]) / (len(self.times) - 1)
        return ProbeSignal(self.position, np.array(self.samples), dt, self.times[0])

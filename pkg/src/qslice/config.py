"""Run configuration: dataclasses, TOML round-trip and cross-validation.

The file format is TOML. Every section maps onto one dataclass below.
Missing optional keys take the dataclass defaults, and ``None`` values are
omitted on output. See the README for an annotated example.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Configuration is malformed or fails cross-validation."""


@dataclass
class Units:
    hbar: float = 1.0
    mass: float = 1.0


@dataclass
class GridSpec:
    lo: list[float]
    hi: list[float]
    n: list[int]


@dataclass
class InitialSpec:
    """``kind`` is ``gaussian`` (center, sigma, k0) or ``rect_sheet`` (lo, hi, k0)."""

    kind: str
    k0: list[float]
    center: list[float] | None = None
    sigma: list[float] | None = None
    lo: list[float] | None = None
    hi: list[float] | None = None


@dataclass
class PotentialSpec:
    """``free``, ``constant`` (value), ``harmonic`` (strength, center) or ``linear`` (force)."""

    kind: str = "free"
    value: float = 0.0
    strength: float = 0.0
    center: list[float] | None = None
    force: list[float] | None = None


@dataclass
class HoleSpec:
    lo: float
    hi: float
    t_open: float = -math.inf
    t_close: float = math.inf


@dataclass
class BodySpec:
    """One body block. ``primitive`` is ``line``, ``segment`` or ``two_plates``.

    ``trajectory`` rows are ``[t_start, v_x(, v_y)]``. For ``two_plates`` the
    block expands into bodies ``<name>.1`` and ``<name>.2``.
    """

    name: str
    primitive: str
    position: list[float]
    d: float
    v_s: float
    eta: float = 1.0
    angle: float = 0.0
    thickness: float = math.inf
    length: float | None = None
    separation: float | None = None
    eta_second: float = 1.0
    second_thickness: float = math.inf
    second_skin: float | None = None
    second_absorption: float | None = None
    skin: float = 3.0
    absorption: float = 4.0
    two_sided: bool = False
    site_span: list[float] | None = None
    holes: list[HoleSpec] = field(default_factory=list)
    trajectory: list[list[float]] = field(default_factory=list)
    rotation_rate: float = 0.0
    pivot: list[float] | None = None


@dataclass
class StepperSpec:
    dt: float
    t_final: float


@dataclass
class LedgerSpec:
    bin_width: float | None = None


@dataclass
class OutputSpec:
    ledger: str = "ledger.csv"
    report: str = "report.json"
    snapshot_every: int = 0
    probes: list[list[float]] = field(default_factory=list)
    probe_every: int = 1


@dataclass
class ReferenceSpec:
    """Reference distribution for the Born comparison.

    ``kind``: ``none``; ``flux`` (time-integrated free flux per site of
    ``body``); ``instant`` (free marginal per site panel at ``time``);
    ``swept`` (free probability beyond the face of ``body`` at ``time``);
    ``flux_bins`` (free flux per time bin at site ``site`` of ``body``);
    ``fringes`` (contrast and spacing on collector ``body`` behind a two-hole
    plate, against the two-source far-field spacing).
    """

    kind: str = "none"
    body: str | None = None
    time: float | None = None
    site: int = 0
    tau_energy: float = 1e-2
    tau_momentum: float = 1e-2


@dataclass
class RunConfig:
    name: str
    grid: GridSpec
    initial: InitialSpec
    stepper: StepperSpec
    units: Units = field(default_factory=Units)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    bodies: list[BodySpec] = field(default_factory=list)
    ledger: LedgerSpec = field(default_factory=LedgerSpec)
    outputs: OutputSpec = field(default_factory=OutputSpec)
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    seed: int = 0

    def to_dict(self) -> dict:
        return _strip_none(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        try:
            return _build(cls, data)
        except (TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.loads(text)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_strip_none(v) for v in obj]
    return obj


_NESTED = {
    "grid": GridSpec, "initial": InitialSpec, "stepper": StepperSpec, "units": Units,
    "potential": PotentialSpec, "ledger": LedgerSpec, "outputs": OutputSpec, "reference": ReferenceSpec,
}


def _build(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"section for {cls.__name__} must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {cls.__name__}: {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, val in data.items():
        if cls is RunConfig and key in _NESTED:
            val = _build(_NESTED[key], val)
        elif cls is RunConfig and key == "bodies":
            val = [_build(BodySpec, b) for b in val]
        elif cls is BodySpec and key == "holes":
            val = [_build(HoleSpec, h) for h in val]
        kwargs[key] = val
    obj = cls(**kwargs)
    _coerce(obj)
    return obj


def _coerce(obj) -> None:
    """Normalize numeric types so that round-trips compare equal."""
    for f in dataclasses.fields(obj):
        val = getattr(obj, f.name)
        typ = str(f.type)
        if val is None:
            continue
        if typ.startswith("list[float]") or typ.startswith("list[float] |"):
            setattr(obj, f.name, [float(v) for v in np.atleast_1d(val)])
        elif typ.startswith("list[int]"):
            setattr(obj, f.name, [int(v) for v in np.atleast_1d(val)])
        elif typ.startswith("list[list[float]]"):
            setattr(obj, f.name, [[float(x) for x in row] for row in val])
        elif typ.startswith("float"):
            setattr(obj, f.name, float(val))
        elif typ == "int":
            setattr(obj, f.name, int(val))


def validate(config: RunConfig) -> dict:
    """Cross-validate a configuration by building every component.

    Returns the step audit ratios. Raises ConfigError naming the failing check.
    """
    from .runner import build_run

    try:
        run = build_run(config)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
    return run.audit

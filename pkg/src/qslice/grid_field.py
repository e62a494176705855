"""Uniform periodic grids, complex wave fields and their diagnostics.

Grid samples sit at cell centres ``lo + (i + 1/2) * spacing`` so that the
cell faces fall on ``lo + i * spacing``. Surfaces placed on round numbers
then lie exactly between two samples.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import fft as sfft

SEAM_CELLS = 4
SEAM_TOLERANCE = 1e-10
SNAPSHOT_MAGIC = b"WFLD"
SNAPSHOT_VERSION = 1


class FieldError(ValueError):
    """Invalid grid or field construction."""


def _as_tuple(value, dim: int, name: str, cast=float) -> tuple:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and dim > 1:
        arr = np.repeat(arr, dim)
    if arr.size != dim:
        raise FieldError(f"{name} needs {dim} component(s), got {arr.size}")
    return tuple(cast(v) for v in arr)


@dataclass(frozen=True)
class Grid:
    """Periodic uniform grid in one or two dimensions.

    Parameters
    ----------
    lo, hi : tuple of float
        Domain extent per axis. The wrap seam sits at ``lo == hi``.
    n : tuple of int
        Number of samples per axis (at least 8).
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)
        if not (len(lo) == len(hi) == len(n)) or len(n) not in (1, 2):
            raise FieldError("grid must be 1D or 2D with matching lo/hi/n")
        if any(v < 8 for v in n):
            raise FieldError("at least 8 points per axis are required")
        if any(h <= l for l, h in zip(lo, hi)):
            raise FieldError("grid extent must satisfy hi > lo")

    @classmethod
    def uniform(cls, lo, hi, n) -> "Grid":
        return cls(tuple(np.atleast_1d(lo)), tuple(np.atleast_1d(hi)), tuple(np.atleast_1d(n)))

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple((h - l) / n for l, h, n in zip(self.lo, self.hi, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def length(self) -> tuple[float, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Cell-centre coordinates along each axis."""
        return tuple(l + (np.arange(n) + 0.5) * h for l, n, h in zip(self.lo, self.n, self.spacing))

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumbers per axis in FFT order."""
        return tuple(2 * np.pi * sfft.fftfreq(n, h) for n, h in zip(self.n, self.spacing))

    @cached_property
    def derivative_wavenumbers(self) -> tuple[np.ndarray, ...]:
        # The Nyquist mode has no consistent first derivative, so it is dropped.
        out = []
        for k, n in zip(self.wavenumbers, self.n):
            k = k.copy()
            if n % 2 == 0:
                k[n // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        ks = np.meshgrid(*self.wavenumbers, indexing="ij")
        return sum(k * k for k in ks)

    @property
    def k_max_squared(self) -> float:
        return float(sum((np.pi / h) ** 2 for h in self.spacing))

    def seam_mask(self, cells: int = SEAM_CELLS) -> np.ndarray:
        """Boolean mask of cells within ``cells`` spacings of the wrap seam."""
        mask = np.zeros(self.shape, dtype=bool)
        for ax, n in enumerate(self.n):
            sl = [slice(None)] * self.dim
            idx = np.r_[0:cells, n - cells:n]
            sl[ax] = idx
            mask[tuple(sl)] = True
        return mask

    def nearest_index(self, point) -> tuple[int, ...]:
        p = _as_tuple(point, self.dim, "point")
        return tuple(int(np.floor((v - l) / h)) % n for v, l, h, n in zip(p, self.lo, self.spacing, self.n))

    def contains(self, point) -> bool:
        p = _as_tuple(point, self.dim, "point")
        return all(l <= v <= h for v, l, h in zip(p, self.lo, self.hi))


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex amplitude samples of a one-body wavefunction.

    The values array is stored read-only; every operation returns a new field.
    """

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex, copy=True)
        if vals.shape != self.grid.shape:
            raise FieldError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise FieldError("field contains non-finite values")
        if self.mass <= 0 or self.hbar <= 0:
            raise FieldError("mass and hbar must be positive")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "time", float(self.time))

    def replace(self, values=None, time=None) -> "WaveField":
        return WaveField(
            self.grid,
            self.values if values is None else values,
            self.time if time is None else time,
            self.mass,
            self.hbar,
        )

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density) * self.grid.cell_volume)

    def normalized(self) -> "WaveField":
        nrm = self.norm()
        if nrm <= 0:
            raise FieldError("cannot normalize a zero field")
        return self.replace(values=self.values / np.sqrt(nrm))


def spectral_gradient(grid: Grid, values: np.ndarray, transformed: np.ndarray | None = None) -> list[np.ndarray]:
    """Spectral first derivatives of ``values`` along each axis."""
    psi_k = sfft.fftn(values) if transformed is None else transformed
    out = []
    for ax, k in enumerate(grid.derivative_wavenumbers):
        shape = [1] * grid.dim
        shape[ax] = -1
        out.append(sfft.ifftn(1j * k.reshape(shape) * psi_k))
    return out


def probability_current(field: WaveField, gradient: Sequence[np.ndarray] | None = None) -> list[np.ndarray]:
    """Probability current density (hbar/m) Im(psi* grad psi) per axis."""
    grad = spectral_gradient(field.grid, field.values) if gradient is None else gradient
    pref = field.hbar / field.mass
    return [pref * np.imag(np.conj(field.values) * g) for g in grad]


def energy_density(field: WaveField, potential: np.ndarray | None = None,
                   gradient: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """Local energy density whose grid sum equals the expectation of H.

    The Nyquist mode is excluded from the gradient, which is immaterial for
    band-limited fields.
    """
    grad = spectral_gradient(field.grid, field.values) if gradient is None else gradient
    dens = sum(np.abs(g) ** 2 for g in grad) * (field.hbar ** 2 / (2 * field.mass))
    if potential is not None:
        dens = dens + np.asarray(potential, dtype=float) * field.density
    return dens


@dataclass(frozen=True)
class Observables:
    """Expectation values of a field; vector quantities have one entry per axis."""

    norm: float
    mean_x: np.ndarray
    sigma_x: np.ndarray
    mean_p: np.ndarray
    sigma_p: np.ndarray
    energy: float

    def as_dict(self) -> dict:
        return {
            "norm": self.norm,
            "mean_x": [float(v) for v in self.mean_x],
            "sigma_x": [float(v) for v in self.sigma_x],
            "mean_p": [float(v) for v in self.mean_p],
            "sigma_p": [float(v) for v in self.sigma_p],
            "energy": self.energy,
        }


def observables(field: WaveField, potential: np.ndarray | None = None) -> Observables:
    """Norm, position and momentum moments, and energy of ``field``.

    Momentum moments are computed spectrally. ``potential`` holds the values
    of V on the grid (omit for a free particle).
    """
    grid = field.grid
    dens = field.density
    dv = grid.cell_volume
    norm = float(np.sum(dens) * dv)
    if norm <= 0:
        zeros = np.zeros(grid.dim)
        return Observables(0.0, zeros, zeros, zeros, zeros, 0.0)
    psi_k = sfft.fftn(field.values)
    pk = np.abs(psi_k) ** 2
    pk = pk / np.sum(pk)
    mean_x, sigma_x, mean_p, sigma_p = [], [], [], []
    for ax in range(grid.dim):
        x = grid.mesh[ax]
        mx = np.sum(x * dens) * dv / norm
        vx = np.sum((x - mx) ** 2 * dens) * dv / norm
        shape = [1] * grid.dim
        shape[ax] = -1
        kd = grid.derivative_wavenumbers[ax].reshape(shape)
        kf = grid.wavenumbers[ax].reshape(shape)
        mp = field.hbar * np.sum(kd * pk)
        p2 = field.hbar ** 2 * np.sum(kf ** 2 * pk)
        mean_x.append(mx)
        sigma_x.append(np.sqrt(max(vx, 0.0)))
        mean_p.append(mp)
        sigma_p.append(np.sqrt(max(p2 - mp * mp, 0.0)))
    kinetic = field.hbar ** 2 / (2 * field.mass) * float(np.sum(grid.k_squared * pk)) * norm
    pot = 0.0
    if potential is not None:
        pot = float(np.sum(np.asarray(potential, dtype=float) * dens) * dv)
    return Observables(norm, np.array(mean_x), np.array(sigma_x), np.array(mean_p),
                       np.array(sigma_p), kinetic + pot)


def momentum_from_current(field: WaveField) -> np.ndarray:
    """Mean momentum from the grid sum of m * j (flux-density route)."""
    j = probability_current(field)
    return np.array([field.mass * np.sum(c) * field.grid.cell_volume for c in j])


def _check_seam(grid: Grid, values: np.ndarray) -> None:
    dens = np.abs(values) ** 2
    total = np.sum(dens)
    leak = np.sum(dens[grid.seam_mask()]) / total
    if leak > SEAM_TOLERANCE:
        raise FieldError(f"packet clipped by the periodic seam: {leak:.3e} of norm within "
                         f"{SEAM_CELLS} cells of the boundary")


def _finish(grid: Grid, values: np.ndarray, mass: float, hbar: float, time: float) -> WaveField:
    _check_seam(grid, values)
    nrm = np.sum(np.abs(values) ** 2) * grid.cell_volume
    return WaveField(grid, values / np.sqrt(nrm), time, mass, hbar)


def make_gaussian(grid: Grid, center, sigma, k0, *, mass: float = 1.0, hbar: float = 1.0,
                  time: float = 0.0) -> WaveField:
    """Normalized Gaussian packet exp(-(x-c)^2/(4 sigma^2) + i k0 x).

    ``sigma`` may be a scalar or one width per axis.
    """
    c = _as_tuple(center, grid.dim, "center")
    s = _as_tuple(sigma, grid.dim, "sigma")
    k = _as_tuple(k0, grid.dim, "k0")
    for sv, h in zip(s, grid.spacing):
        if sv < 2 * h:
            raise FieldError(f"sigma={sv} is under-resolved (spacing {h})")
    arg = np.zeros(grid.shape, dtype=complex)
    for x, cv, sv, kv in zip(grid.mesh, c, s, k):
        arg += -((x - cv) ** 2) / (4 * sv * sv) + 1j * kv * x
    return _finish(grid, np.exp(arg), mass, hbar, time)


def raised_cosine_box(x: np.ndarray, lo: float, hi: float, width: float) -> np.ndarray:
    """Box envelope on [lo, hi] with raised-cosine edges of ``width`` centred on the bounds."""
    def rise(s):
        out = 0.5 * (1 + np.sin(np.pi * np.clip(s, -width / 2, width / 2) / width))
        return out
    return rise(x - lo) * rise(hi - x)


def make_rect_sheet(grid: Grid, lo, hi, k0, *, mass: float = 1.0, hbar: float = 1.0,
                    time: float = 0.0, edge_cells: float = 4.0) -> WaveField:
    """Flat-topped packet on the box [lo, hi] with smoothed edges and carrier k0.

    Edges use a raised cosine of width ``edge_cells * spacing`` centred on
    each bound, so the interior density is 1/(L - w/4) per axis.
    """
    a = _as_tuple(lo, grid.dim, "lo")
    b = _as_tuple(hi, grid.dim, "hi")
    k = _as_tuple(k0, grid.dim, "k0")
    env = np.ones(grid.shape)
    phase = np.zeros(grid.shape)
    for x, av, bv, kv, h in zip(grid.mesh, a, b, k, grid.spacing):
        if bv - av < 4 * h:
            raise FieldError("sheet interval shorter than 4 spacings")
        env = env * raised_cosine_box(x, av, bv, edge_cells * h)
        phase = phase + kv * x
    return _finish(grid, env * np.exp(1j * phase), mass, hbar, time)


@dataclass(frozen=True, eq=False)
class ProbeSignal:
    """Uniformly sampled time series of psi at a fixed point."""

    position: tuple[float, ...]
    samples: np.ndarray
    dt_sample: float
    t0: float = 0.0

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex, copy=True)
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        if self.dt_sample <= 0:
            raise FieldError("dt_sample must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(len(self.samples))


@dataclass(frozen=True)
class UncertaintyReport:
    sigma_t: float
    sigma_omega: float
    product: float
    bound: float
    satisfied: bool


def _spread(values: np.ndarray, weights: np.ndarray) -> float:
    w = weights / np.sum(weights)
    mean = np.sum(values * w)
    return float(np.sqrt(np.sum((values - mean) ** 2 * w)))


def probe_uncertainty(signal: ProbeSignal, decay_tol: float = 1e-6) -> UncertaintyReport:
    """Time and frequency spreads of a probe signal and their product.

    The frequency spread is measured on the discrete spectrum. Frequencies are
    unwrapped around the circular mean so a carrier near the Nyquist limit is
    handled correctly. The reported bound is ``0.5 - 2/n``. The signal power
    at both window ends must be below ``decay_tol`` times its peak.
    """
    s = signal.samples
    n = len(s)
    if n < 64:
        raise FieldError("probe_uncertainty needs at least 64 samples")
    power = np.abs(s) ** 2
    peak = power.max()
    if peak == 0 or power[0] > decay_tol * peak or power[-1] > decay_tol * peak:
        raise FieldError("probe signal has not decayed at the window ends")
    sigma_t = _spread(signal.times, power)
    spec = np.abs(sfft.fft(s)) ** 2
    omega = 2 * np.pi * sfft.fftfreq(n, signal.dt_sample)
    span = 2 * np.pi / signal.dt_sample
    centre = np.angle(np.sum(spec * np.exp(1j * omega * 2 * np.pi / span))) * span / (2 * np.pi)
    shifted = (omega - centre + span / 2) % span - span / 2
    sigma_w = _spread(shifted, spec)
    product = sigma_t * sigma_w
    bound = 0.5 - 2.0 / n
    return UncertaintyReport(sigma_t, sigma_w, product, bound, product >= bound)


def write_snapshot(field: WaveField, path) -> None:
    """Write the little-endian binary snapshot of ``field``."""
    grid = field.grid
    header = SNAPSHOT_MAGIC + struct.pack("<II", SNAPSHOT_VERSION, grid.dim)
    header += struct.pack(f"<{grid.dim}I", *grid.n)
    for lo, hi in zip(grid.lo, grid.hi):
        header += struct.pack("<dd", lo, hi)
    data = np.empty(field.values.size * 2, dtype="<f8")
    flat = field.values.ravel(order="C")
    data[0::2] = flat.real
    data[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_snapshot(path, *, mass: float = 1.0, hbar: float = 1.0, time: float = 0.0) -> WaveField:
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise FieldError("not a WFLD snapshot")
    version, dim = struct.unpack_from("<II", raw, 4)
    if version != SNAPSHOT_VERSION:
        raise FieldError(f"unsupported snapshot version {version}")
    off = 12
    n = struct.unpack_from(f"<{dim}I", raw, off)
    off += 4 * dim
    ext = struct.unpack_from(f"<{2 * dim}d", raw, off)
    off += 16 * dim
    data = np.frombuffer(raw, dtype="<f8", offset=off)
    values = (data[0::2] + 1j * data[1::2]).reshape(n)
    grid = Grid(tuple(ext[0::2]), tuple(ext[1::2]), tuple(n))
    return WaveField(grid, values, time, mass, hbar)


def write_snapshot_text(field: WaveField, path) -> None:
    """Delimited text export with columns x[, y], re, im, |psi|^2."""
    grid = field.grid
    cols = [m.ravel() for m in grid.mesh]
    vals = field.values.ravel()
    cols += [vals.real, vals.imag, np.abs(vals) ** 2]
    names = ["x", "y"][: grid.dim] + ["re", "im", "density"]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names), comments="",
               fmt="%.17g")

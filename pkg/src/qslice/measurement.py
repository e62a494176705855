"""Surface capture of the field by bodies and the ledger of slice records.

The sink inside every body is a graded absorber. Its rate rises smoothly from
zero at the face to ``eta * absorption`` at a depth of ``skin``. Cells deeper
than ``CORE_FACTOR * skin`` are cleared outright. Whatever norm the sink
removes in a step is credited to the nearest active site. The credit is the
exact before/after difference, so the free norm plus the captured total stays
fixed to rounding error.

A site moving away from the field with no relative inflow has escaped. On the
step where that first happens, the body content owned by the site is flushed
into a record stamped at the start of the step. The sink then stays off for
that site while the escape lasts.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import fft as sfft

from .body import BodyState, depth_field, nearest_sites, site_positions
from .grid_field import Grid, WaveField, spectral_gradient

CORE_FACTOR = 1.5
LEAK_LIMIT = 1e-6
BIN_GUARD = 1.0 + 1e-12


class SinkLeakError(RuntimeError):
    """Amplitude reached the body core without being absorbed by the skin."""


class CaptureSignError(RuntimeError):
    """The sink produced a negative capture."""


class ConservationError(RuntimeError):
    """Norm audit failed."""


def ramp(s: np.ndarray) -> np.ndarray:
    """Smooth step with three continuous derivatives at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 4 * (35 - 84 * s + 70 * s ** 2 - 20 * s ** 3)


def time_bin(t: float, width: float) -> int:
    # The guard factor keeps exact multiples of the width in the upper bin and
    # commutes with halving the width, so re-binning stays exact.
    return int(math.floor((t / width) * BIN_GUARD))


@dataclass(frozen=True)
class Deposits:
    norm: float
    energy: float
    momentum: tuple[float, ...]


@dataclass(frozen=True)
class SliceRecord:
    """Capture at one site within one time bin.

    ``weight`` has magnitude sqrt(probability) and the phase of the summed
    phasors of the contributing captures. ``flux`` is the time-integrated
    positive relative inflow through the site panel, kept for comparison.
    """

    site: int
    t_bin: int
    weight: complex
    phase: float
    deposits: Deposits
    t_first: float
    t_last: float
    flux: float = 0.0

    @property
    def probability(self) -> float:
        return self.deposits.norm


@dataclass(frozen=True)
class SiteInfo:
    body: str
    local_id: int
    position: tuple[float, ...]
    normal: tuple[float, ...]
    d: float
    v_s: float


@dataclass
class _Contribution:
    t: float
    probability: float
    phasor: complex
    energy: float
    momentum: tuple[float, ...]
    flux: float


class SliceLedger:
    """Run-local store of capture contributions grouped by (site, time bin).

    Every contribution is kept so that totals are exact sums and the ledger can
    be re-binned without loss.
    """

    def __init__(self, bin_width: float, dim: int = 1):
        if not bin_width > 0:
            raise ValueError("bin_width must be positive")
        self.bin_width = float(bin_width)
        self.dim = int(dim)
        self.sites: dict[int, SiteInfo] = {}
        self._offsets: dict[str, int] = {}
        self._parts: dict[tuple[int, int], list[_Contribution]] = defaultdict(list)
        self.escaped: set[int] = set()
        self._cache: dict = {}
        self.steps = 0
        self.max_step_residual = 0.0

    @classmethod
    def for_bodies(cls, bodies: Sequence[BodyState], bin_width: float | None = None) -> "SliceLedger":
        """Ledger with bin width d/v_s of the first body unless overridden."""
        if not bodies and bin_width is None:
            raise ValueError("bin_width is required without bodies")
        width = bin_width if bin_width is not None else bodies[0].d / bodies[0].v_s
        dim = bodies[0].dim if bodies else 1
        led = cls(width, dim)
        for b in bodies:
            led.register(b)
        return led

    def register(self, body: BodyState) -> int:
        if body.name in self._offsets:
            return self._offsets[body.name]
        off = len(self.sites)
        self._offsets[body.name] = off
        for s in body.sites:
            self.sites[off + s.id] = SiteInfo(body.name, s.id, s.rest_position, s.rest_normal,
                                              body.d, body.v_s)
        return off

    def offset(self, body: BodyState) -> int:
        return self._offsets[body.name]

    def site_id(self, body_name: str, local_id: int) -> int:
        return self._offsets[body_name] + local_id

    def add(self, site: int, t: float, probability: float, phase: float, energy: float = 0.0,
            momentum: Sequence[float] | None = None, flux: float = 0.0) -> None:
        if probability < 0:
            raise CaptureSignError(f"negative capture {probability:.3e} at site {site}")
        if probability == 0:
            return
        mom = tuple(float(v) for v in (momentum if momentum is not None else (0.0,) * self.dim))
        key = (int(site), time_bin(t, self.bin_width))
        self._parts[key].append(_Contribution(float(t), float(probability),
                                              probability * complex(math.cos(phase), math.sin(phase)),
                                              float(energy), mom, float(flux)))

    @property
    def records(self) -> list[SliceRecord]:
        out = []
        for key in sorted(self._parts):
            parts = self._parts[key]
            prob = math.fsum(p.probability for p in parts)
            phasor = complex(math.fsum(p.phasor.real for p in parts),
                             math.fsum(p.phasor.imag for p in parts))
            phase = math.atan2(phasor.imag, phasor.real)
            weight = math.sqrt(prob) * complex(math.cos(phase), math.sin(phase))
            dep = Deposits(prob, math.fsum(p.energy for p in parts),
                           tuple(math.fsum(p.momentum[a] for p in parts) for a in range(self.dim)))
            out.append(SliceRecord(key[0], key[1], weight, phase, dep,
                                   min(p.t for p in parts), max(p.t for p in parts),
                                   math.fsum(p.flux for p in parts)))
        return out

    def __len__(self) -> int:
        return len(self._parts)

    @property
    def total_captured(self) -> float:
        return math.fsum(p.probability for parts in self._parts.values() for p in parts)

    def totals(self) -> Deposits:
        allp = [p for parts in self._parts.values() for p in parts]
        return Deposits(math.fsum(p.probability for p in allp), math.fsum(p.energy for p in allp),
                        tuple(math.fsum(p.momentum[a] for p in allp) for a in range(self.dim)))

    def rebinned(self, bin_width: float) -> "SliceLedger":
        """Copy of this ledger with contributions regrouped at a new bin width."""
        new = SliceLedger(bin_width, self.dim)
        new.sites = dict(self.sites)
        new._offsets = dict(self._offsets)
        for (site, _), parts in self._parts.items():
            for p in parts:
                new._parts[(site, time_bin(p.t, bin_width))].append(p)
        return new


# field sampling -------------------------------------------------------------


def _stencil(grid: Grid, points: np.ndarray):
    """Corner indices and multilinear weights of each point in the periodic grid."""
    pts = np.atleast_2d(points)
    idx0, frac = [], []
    for ax in range(grid.dim):
        c = (pts[:, ax] - grid.lo[ax]) / grid.spacing[ax] - 0.5
        i = np.floor(c)
        idx0.append(i.astype(int))
        frac.append(c - i)
    for corner in range(2 ** grid.dim):
        wgt = np.ones(len(pts))
        ids = []
        for ax in range(grid.dim):
            bit = (corner >> ax) & 1
            wgt = wgt * (frac[ax] if bit else 1 - frac[ax])
            ids.append((idx0[ax] + bit) % grid.n[ax])
        yield tuple(ids), wgt


def sample_periodic(grid: Grid, arrays: Sequence[np.ndarray], points: np.ndarray) -> list[np.ndarray]:
    """Multilinear periodic interpolation of grid arrays at ``points`` (n, dim)."""
    n = len(np.atleast_2d(points))
    out = [np.zeros(n, dtype=a.dtype) for a in arrays]
    for ids, wgt in _stencil(grid, points):
        for o, a in zip(out, arrays):
            o += wgt * a[ids]
    return out


def normal_flux(field: WaveField, points: np.ndarray, normals: np.ndarray, velocities: np.ndarray,
                gradient: Sequence[np.ndarray] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Relative inflow -(j - rho v).n and psi at each point.

    Current and density are formed on the grid and then interpolated. Forming
    them from interpolated psi would lose amplitude when the phase turns
    quickly between neighbouring cells.
    """
    grad = spectral_gradient(field.grid, field.values) if gradient is None else gradient
    normals = np.atleast_2d(normals)
    velocities = np.atleast_2d(velocities)
    pref = field.hbar / field.mass
    n = len(normals)
    inflow = np.zeros(n)
    psi = np.zeros(n, dtype=complex)
    for ids, wgt in _stencil(field.grid, points):
        ps = field.values[ids]
        psi += wgt * ps
        rho = np.abs(ps) ** 2
        for ax in range(field.grid.dim):
            j = pref * np.imag(np.conj(ps) * grad[ax][ids])
            inflow -= wgt * (j - rho * velocities[:, ax]) * normals[:, ax]
    return inflow, psi


# geometry ---------------------------------------------------------------------


def _pose_key(body: BodyState, t: float) -> tuple:
    origin, theta = body.pose(t)
    return (body.name, tuple(origin.tolist()), theta, tuple(h.active(t) for h in body.holes))


@dataclass
class _Layout:
    """Combined ownership of grid cells by bodies and sites for one step."""

    owner: np.ndarray          # global site id per cell, -1 outside every body
    owner_any: np.ndarray      # owner over interior(t0) | interior(t1)
    apron: np.ndarray          # site owning each exterior cell just in front of a face
    rate: np.ndarray           # sink rate at t1
    core: np.ndarray           # cells cleared outright
    was_inside: np.ndarray     # interior at t0
    is_inside: np.ndarray      # interior at t1


def _apron(body: BodyState, grid: Grid, t: float, kin) -> np.ndarray:
    """Exterior strip of width ``skin`` in front of each face, owned by the nearest site."""
    local = body.world_to_local(grid.mesh, t)
    u = local[0]
    owner = np.full(grid.shape, -1, dtype=int)
    faces = [("front", (u > -body.skin) & (u <= 0))]
    if any(s.face == "back" for s in body.sites):
        faces.append(("back", (u >= body.thickness) & (u < body.thickness + body.skin)))
    for face, strip in faces:
        if body.dim == 2 and body.span is not None:
            strip = strip & (local[1] >= body.span[0]) & (local[1] <= body.span[1])
        ids = np.array([s.id for s in body.sites if s.face == face and kin.active[s.id]], dtype=int)
        cells = np.flatnonzero(strip)
        if len(ids) == 0 or len(cells) == 0:
            continue
        pts = np.column_stack([m.ravel()[cells] for m in grid.mesh])
        owner.ravel()[cells] = ids[nearest_sites(kin.positions[ids], pts)]
    return owner


def _body_geometry(ledger: SliceLedger, body: BodyState, grid: Grid, t0: float, t1: float):
    key0, key1 = _pose_key(body, t0), _pose_key(body, t1)
    ck = ("body", key0, key1)
    if ck in ledger._cache:
        return ledger._cache[ck]
    d0 = _depth(ledger, body, grid, t0, key0)
    d1 = _depth(ledger, body, grid, t1, key1)
    union = (d0 > 0) | (d1 > 0)
    owner = np.full(grid.shape, -1, dtype=int)
    kin = site_positions(body, t1)
    act = np.flatnonzero(kin.active)
    cells = np.flatnonzero(union)
    if len(act) and len(cells):
        pts = np.column_stack([m.ravel()[cells] for m in grid.mesh])
        owner.ravel()[cells] = act[nearest_sites(kin.positions[act], pts)]
    res = (d0, d1, owner, _apron(body, grid, t1, kin))
    _remember(ledger, ck, res)
    return res


def _depth(ledger: SliceLedger, body: BodyState, grid: Grid, t: float, key) -> np.ndarray:
    ck = ("depth", key)
    if ck not in ledger._cache:
        _remember(ledger, ck, depth_field(body, grid, t))
    return ledger._cache[ck]


def _remember(ledger: SliceLedger, key, value, limit: int = 64) -> None:
    if len(ledger._cache) >= limit:
        ledger._cache.pop(next(iter(ledger._cache)))
    ledger._cache[key] = value


def _layout(ledger: SliceLedger, bodies: Sequence[BodyState], grid: Grid, t0: float, t1: float) -> _Layout:
    ck = ("layout",) + tuple((_pose_key(b, t0), _pose_key(b, t1)) for b in bodies)
    if ck in ledger._cache:
        return ledger._cache[ck]
    shape = grid.shape
    best = np.full(shape, -np.inf)
    owner = np.full(shape, -1, dtype=int)
    owner_any = np.full(shape, -1, dtype=int)
    best_any = np.full(shape, -np.inf)
    rate = np.zeros(shape)
    core = np.zeros(shape, dtype=bool)
    was_inside = np.zeros(shape, dtype=bool)
    is_inside = np.zeros(shape, dtype=bool)
    apron = np.full(shape, -1, dtype=int)
    for body in bodies:
        off = ledger.register(body)
        d0, d1, own, apr = _body_geometry(ledger, body, grid, t0, t1)
        apron = np.where(apr >= 0, apr + off, apron)
        inside1 = (d1 > 0) & (own >= 0)
        take = inside1 & (d1 > best)
        best = np.where(take, d1, best)
        owner = np.where(take, own + off, owner)
        rate = np.where(take, body.eta * body.absorption * ramp(d1 / body.skin), rate)
        core = np.where(take, d1 >= CORE_FACTOR * body.skin, core)
        score = np.where(d1 > 0, d1, np.where(d0 > 0, d0 - 1e9, -np.inf))
        take_any = (own >= 0) & (score > best_any)
        best_any = np.where(take_any, score, best_any)
        owner_any = np.where(take_any, own + off, owner_any)
        was_inside |= d0 > 0
        is_inside |= d1 > 0
    apron = np.where(is_inside, -1, apron)
    lay = _Layout(owner, owner_any, apron, rate, core, was_inside, is_inside)
    _remember(ledger, ck, lay)
    return lay


# capture ------------------------------------------------------------------------


def _window_inflow(field: WaveField, grad, apron: np.ndarray, normals: np.ndarray,
                   velocities: np.ndarray, n_sites: int) -> np.ndarray:
    """Relative inflow summed over the exterior strip in front of each site.

    A single-point flux can spike near nodes of the field, where the local
    phase velocity is large. The strip sum reflects the transport of the
    content that is actually approaching the face.
    """
    cells = apron >= 0
    own = apron[cells]
    psi = field.values[cells]
    rho = np.abs(psi) ** 2
    pref = field.hbar / field.mass
    rel = np.zeros(len(own))
    for ax in range(field.grid.dim):
        j = pref * np.imag(np.conj(psi) * grad[ax][cells])
        rel -= (j - rho * velocities[own, ax]) * normals[own, ax]
    return np.bincount(own, weights=rel, minlength=n_sites) * field.grid.cell_volume



@dataclass(frozen=True)
class CaptureStep:
    """Diagnostics of one capture call."""

    removed: float
    flushed: tuple[int, ...]
    escaped: tuple[int, ...]
    core_content: float
    residual: float


def capture_flux(field: WaveField, bodies: BodyState | Sequence[BodyState], dt: float,
                 ledger: SliceLedger, potential: np.ndarray | None = None,
                 diagnostics: list | None = None) -> tuple[WaveField, SliceLedger]:
    """Apply the body sinks over the step ending at ``field.time``.

    ``field`` is the freely propagated field at the end of the step. Bodies are
    sampled at the step end, the velocities at the step midpoint. Removed norm,
    energy and momentum are credited to the owning sites in ``ledger``, which is
    updated in place and returned.
    """
    if isinstance(bodies, BodyState):
        bodies = [bodies]
    t1 = field.time
    t0 = t1 - dt
    if not bodies:
        return field, ledger
    grid = field.grid
    dv = grid.cell_volume
    psi = field.values
    psi_k = sfft.fftn(psi)
    grad = spectral_gradient(grid, psi, psi_k)
    lay = _layout(ledger, bodies, grid, t0, t1)

    # relative inflow at every site, and escape decisions
    n_sites = len(ledger.sites)
    inflow = np.zeros(n_sites)
    site_psi = np.zeros(n_sites, dtype=complex)
    receding = np.zeros(n_sites, dtype=bool)
    active = np.zeros(n_sites, dtype=bool)
    panel = np.zeros(n_sites)
    normals = np.zeros((n_sites, grid.dim))
    velocities = np.zeros((n_sites, grid.dim))
    tm = 0.5 * (t0 + t1)
    for body in bodies:
        off = ledger.offset(body)
        kin = site_positions(body, t1)
        vel = np.array([body.trajectory.velocity(tm)] * len(kin))
        if body.trajectory.rotation_rate != 0:
            vel = site_positions(body, tm).velocities
        j_in, ps = normal_flux(field, kin.positions, kin.normals, vel, grad)
        sl = slice(off, off + len(kin))
        inflow[sl] = j_in
        site_psi[sl] = ps
        receding[sl] = np.einsum("ij,ij->i", vel, kin.normals) < 0
        active[sl] = kin.active
        normals[sl] = kin.normals
        velocities[sl] = vel
        panel[sl] = body.d ** (grid.dim - 1)
    escaping = np.zeros(n_sites, dtype=bool)
    cand = receding & active
    if np.any(cand):
        escaping = cand & (_window_inflow(field, grad, lay.apron, normals, velocities, n_sites) <= 0)
    newly = np.flatnonzero(escaping & ~np.isin(np.arange(n_sites), list(ledger.escaped)))
    ledger.escaped = set(np.flatnonzero(escaping).tolist())

    owner = lay.owner
    dens = np.abs(psi) ** 2
    factor = np.exp(-lay.rate * dt)
    factor = np.where(lay.core, 0.0, factor)
    if ledger.escaped:
        off_cells = np.isin(owner, list(ledger.escaped))
        factor = np.where(off_cells, 1.0, factor)
    core_content = float(np.sum(dens[lay.core & lay.was_inside & (factor == 0.0)]) * dv)
    if core_content > LEAK_LIMIT:
        raise SinkLeakError(f"{core_content:.3e} of norm reached the body core at t={t1:.6g}; "
                            "the skin is too thin or too weak")
    flush_mask = np.zeros(grid.shape, dtype=bool)
    if len(newly):
        flush_mask = np.isin(lay.owner_any, newly) & (lay.was_inside | lay.is_inside)
        factor = np.where(flush_mask, 0.0, factor)
    cell_owner = np.where(flush_mask, lay.owner_any, owner)

    new_psi = psi * factor
    removed = dens - np.abs(new_psi) ** 2
    if np.any(removed < 0):
        raise CaptureSignError("sink increased the local density")
    touched = (cell_owner >= 0) & (removed > 0)
    total_removed = float(np.sum(removed[touched]) * dv)
    if total_removed == 0.0:
        ledger.steps += 1
        if diagnostics is not None:
            diagnostics.append(CaptureStep(0.0, (), tuple(sorted(ledger.escaped)), core_content, 0.0))
        return field, ledger

    owners = cell_owner[touched]
    rem = removed[touched] * dv
    keep = 1.0 - factor[touched] ** 2
    p_site = np.bincount(owners, weights=rem, minlength=n_sites)

    # exact removed energy and momentum from the spectra before and after
    new_k = sfft.fftn(new_psi)
    dpk = (np.abs(psi_k) ** 2 - np.abs(new_k) ** 2) * dv / psi.size
    hbar, mass = field.hbar, field.mass
    d_energy = hbar ** 2 / (2 * mass) * float(np.sum(grid.k_squared * dpk))
    if potential is not None:
        d_energy += float(np.sum(np.asarray(potential)[touched] * removed[touched]) * dv)
    d_mom = []
    for ax, k in enumerate(grid.derivative_wavenumbers):
        shape = [1] * grid.dim
        shape[ax] = -1
        d_mom.append(hbar * float(np.sum(k.reshape(shape) * dpk)))

    # local estimates split the totals between sites
    e_loc = sum(np.abs(g[touched]) ** 2 for g in grad) * (hbar ** 2 / (2 * mass))
    if potential is not None:
        e_loc = e_loc + np.asarray(potential)[touched] * dens[touched]
    e_site = np.bincount(owners, weights=keep * e_loc * dv, minlength=n_sites)
    e_site += p_site / total_removed * (d_energy - e_site.sum())
    m_site = []
    for ax in range(grid.dim):
        p_loc = hbar * np.imag(np.conj(psi[touched]) * grad[ax][touched])
        ms = np.bincount(owners, weights=keep * p_loc * dv, minlength=n_sites)
        ms += p_site / total_removed * (d_mom[ax] - ms.sum())
        m_site.append(ms)

    flushed = set(newly.tolist())
    for s in np.flatnonzero(p_site > 0):
        stamp = t0 if s in flushed else t1
        flux = 0.0 if s in flushed else max(inflow[s], 0.0) * panel[s] * dt
        ledger.add(int(s), stamp, float(p_site[s]), float(np.angle(site_psi[s])), float(e_site[s]),
                   [float(m[s]) for m in m_site], flux)

    out = field.replace(values=new_psi)
    residual = abs(field.norm() - out.norm() - float(np.sum(p_site)))
    ledger.steps += 1
    ledger.max_step_residual = max(ledger.max_step_residual, residual)
    if diagnostics is not None:
        diagnostics.append(CaptureStep(total_removed, tuple(sorted(flushed)),
                                       tuple(sorted(ledger.escaped)), core_content, residual))
    return out, ledger


# ledger analysis ------------------------------------------------------------------


def born_distribution(ledger: SliceLedger) -> tuple[dict[int, float], dict[tuple[int, int], float]]:
    """Per-site marginal and joint (site, t_bin) capture probabilities."""
    joint = {(r.site, r.t_bin): r.probability for r in ledger.records}
    per_site: dict[int, list[float]] = defaultdict(list)
    for (site, _), parts in ledger._parts.items():
        per_site[site].extend(p.probability for p in parts)
    return {s: math.fsum(v) for s, v in sorted(per_site.items())}, joint


def l1_distance(p: dict, q: dict, normalize: bool = False) -> float:
    """Sum of absolute differences over the union of keys."""
    keys = set(p) | set(q)
    sp = math.fsum(p.values()) if normalize else 1.0
    sq = math.fsum(q.values()) if normalize else 1.0
    return math.fsum(abs(p.get(k, 0.0) / sp - q.get(k, 0.0) / sq) for k in keys)


@dataclass(frozen=True)
class AuditReport:
    norm_residual: float
    energy_residual: float
    momentum_residual: tuple[float, ...]
    tau_energy: float
    tau_momentum: float
    norm_ok: bool
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "norm_residual": self.norm_residual,
            "energy_residual": self.energy_residual,
            "momentum_residual": list(self.momentum_residual),
            "tau_energy": self.tau_energy,
            "tau_momentum": self.tau_momentum,
            "norm_ok": self.norm_ok,
            "warnings": list(self.warnings),
        }


def conservation_audit(initial, ledger: SliceLedger, final, *, tau_energy: float = 1e-6,
                       tau_momentum: float = 1e-6, norm_tol: float = 1e-6,
                       strict: bool = True) -> AuditReport:
    """Compare initial totals with final field plus ledger deposits.

    ``initial`` and ``final`` are observables of the same run. A norm mismatch
    beyond ``norm_tol`` raises ConservationError when ``strict``. Energy and
    momentum mismatches only produce warnings.
    """
    dep = ledger.totals()
    norm_res = initial.norm - final.norm - dep.norm
    e_res = initial.energy - final.energy - dep.energy
    p_init = np.asarray(initial.mean_p) * initial.norm
    p_final = np.asarray(final.mean_p) * final.norm
    p_res = tuple(float(v) for v in p_init - p_final - np.asarray(dep.momentum))
    warns = []
    if abs(e_res) > tau_energy:
        warns.append(f"energy residual {e_res:.3e} exceeds tau_E={tau_energy:.1e}")
    if max((abs(v) for v in p_res), default=0.0) > tau_momentum:
        warns.append(f"momentum residual {max(abs(v) for v in p_res):.3e} exceeds tau_p={tau_momentum:.1e}")
    ok = abs(norm_res) <= norm_tol
    if strict and not ok:
        raise ConservationError(f"norm audit failed: residual {norm_res:.3e}")
    return AuditReport(float(norm_res), float(e_res), p_res, tau_energy, tau_momentum, ok, tuple(warns))


@dataclass(frozen=True)
class OverlapReport:
    metric: float
    status: str
    pair: tuple[tuple[int, int], tuple[int, int]] | None

    @property
    def flagged(self) -> bool:
        return self.status != "ok"


def slice_overlap_monitor(ledger: SliceLedger, bodies: Iterable[BodyState] = (),
                          tol: float = 1e-9) -> OverlapReport:
    """Smallest separation between records of the same body, in units of d.

    For a pair of records the separation is the larger of the site distance
    over d and the bin gap times bin_width * v_s / d. Values below one mean
    overlapping slices. Exactly one is a boundary case and also flagged.
    """
    del bodies  # site geometry is held by the ledger
    recs = ledger.records
    groups: dict[str, list[SliceRecord]] = defaultdict(list)
    for r in recs:
        groups[ledger.sites[r.site].body].append(r)
    best, pair = math.inf, None
    for name, rs in groups.items():
        if len(rs) < 2:
            continue
        info = ledger.sites[rs[0].site]
        pos = np.array([ledger.sites[r.site].position for r in rs], dtype=float)
        bins = np.array([r.t_bin for r in rs], dtype=float)
        tscale = ledger.bin_width * info.v_s / info.d
        for i0 in range(0, len(rs), 512):
            blk = slice(i0, i0 + 512)
            dist = np.sqrt(((pos[blk, None, :] - pos[None, :, :]) ** 2).sum(-1)) / info.d
            tgap = np.abs(bins[blk, None] - bins[None, :]) * tscale
            sep = np.maximum(dist, tgap)
            rows = np.arange(i0, min(i0 + 512, len(rs)))
            sep[rows - i0, rows] = math.inf
            k = np.unravel_index(np.argmin(sep), sep.shape)
            if sep[k] < best:
                best = float(sep[k])
                a, b = rs[rows[k[0]]], rs[k[1]]
                pair = ((a.site, a.t_bin), (b.site, b.t_bin))
    if best < 1 - tol:
        status = "violated"
    elif best <= 1 + tol:
        status = "boundary"
    else:
        status = "ok"
    return OverlapReport(best, status, pair)


# export -------------------------------------------------------------------------------


def ledger_rows(ledger: SliceLedger) -> list[list]:
    rows = []
    for r in ledger.records:
        row = [r.site, r.t_bin, (r.t_bin + 0.5) * ledger.bin_width, r.weight.real, r.weight.imag,
               r.probability, r.deposits.energy, *r.deposits.momentum]
        rows.append(row)
    return rows


def ledger_columns(dim: int) -> list[str]:
    cols = ["site_id", "t_bin", "t_bin_center", "re_weight", "im_weight", "probability",
            "e_deposit", "px_deposit"]
    if dim == 2:
        cols.append("py_deposit")
    return cols


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_ledger(ledger: SliceLedger, path, summary: dict | None = None) -> None:
    """Write records as comma-separated rows followed by a summary block.

    The summary block starts with a ``[summary]`` line and holds one
    ``key,value`` pair per line.
    """
    lines = [",".join(ledger_columns(ledger.dim))]
    for row in ledger_rows(ledger):
        lines.append(",".join(_fmt(v) for v in row))
    summ = {"bin_width": ledger.bin_width, "records": len(ledger),
            "total_captured": ledger.total_captured}
    if summary:
        summ.update(summary)
    lines.append("")
    lines.append("[summary]")
    for k, v in summ.items():
        if isinstance(v, (list, tuple)):
            v = " ".join(_fmt(x) for x in v)
        lines.append(f"{k},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_ledger(path) -> tuple[list[dict], dict[str, str]]:
    """Parse a ledger file into record dicts and the raw summary block."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    header = text[0].split(",")
    records, summary = [], {}
    in_summary = False
    for line in text[1:]:
        if not line.strip():
            continue
        if line.strip() == "[summary]":
            in_summary = True
            continue
        if in_summary:
            k, _, v = line.partition(",")
            summary[k] = v
        else:
            vals = line.split(",")
            rec = {}
            for name, v in zip(header, vals):
                rec[name] = int(v) if name in ("site_id", "t_bin") else float(v)
            records.append(rec)
    return records, summary


def free_norm_identity(field: WaveField, ledger: SliceLedger, initial_norm: float = 1.0) -> float:
    """Residual of free norm plus captured total against the initial norm."""
    return field.norm() + ledger.total_captured - initial_norm


__all__ = [
    "AuditReport", "CaptureStep", "CaptureSignError", "ConservationError", "Deposits", "OverlapReport",
    "SinkLeakError", "SiteInfo", "SliceLedger", "SliceRecord", "born_distribution", "capture_flux",
    "conservation_audit", "free_norm_identity", "l1_distance", "ledger_columns", "ledger_rows", "normal_flux",
    "ramp", "read_ledger", "sample_periodic", "slice_overlap_monitor", "time_bin", "write_ledger",
]

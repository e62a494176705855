"""Scenario runner: builds a run from a RunConfig, evolves it and reports."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .body import BodyError, BodyState, Hole, Trajectory, line, segment, two_plates
from .config import BodySpec, ConfigError, RunConfig
from .grid_field import (FieldError, Grid, ProbeSignal, WaveField, make_gaussian, make_rect_sheet,
                         observables, probe_uncertainty, spectral_gradient, write_snapshot)
from .measurement import (SliceLedger, born_distribution, capture_flux, conservation_audit, l1_distance,
                          normal_flux, slice_overlap_monitor, time_bin, write_ledger)
from .tdse import Potential, StepAuditError, StepperConfig, audit_step, step_values, steps_between

IDENTITY_TOL = 1e-6


# building ------------------------------------------------------------------------


def build_initial(config: RunConfig, grid: Grid) -> WaveField:
    spec, units = config.initial, config.units
    if spec.kind == "gaussian":
        if spec.center is None or spec.sigma is None:
            raise ConfigError("gaussian initial state needs center and sigma")
        return make_gaussian(grid, spec.center, spec.sigma, spec.k0, mass=units.mass, hbar=units.hbar)
    if spec.kind == "rect_sheet":
        if spec.lo is None or spec.hi is None:
            raise ConfigError("rect_sheet initial state needs lo and hi")
        lo = spec.lo if grid.dim > 1 else spec.lo[0]
        hi = spec.hi if grid.dim > 1 else spec.hi[0]
        return make_rect_sheet(grid, lo, hi, spec.k0, mass=units.mass, hbar=units.hbar)
    raise ConfigError(f"unknown initial kind {spec.kind!r}")


def build_potential(config: RunConfig, grid: Grid) -> Potential:
    spec = config.potential
    if spec.kind == "free":
        return Potential.free()
    mesh = grid.mesh
    if spec.kind == "constant":
        return Potential.static(np.full(grid.shape, spec.value))
    if spec.kind == "harmonic":
        center = spec.center or [0.0] * grid.dim
        if len(center) != grid.dim:
            raise ConfigError("harmonic center must match the grid dimension")
        r2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
        return Potential.static(0.5 * spec.strength * r2 + spec.value)
    if spec.kind == "linear":
        if spec.force is None or len(spec.force) != grid.dim:
            raise ConfigError("linear potential needs a force vector matching the grid dimension")
        return Potential.static(spec.value - sum(f * m for f, m in zip(spec.force, mesh)))
    raise ConfigError(f"unknown potential kind {spec.kind!r}")


def _trajectory(spec: BodySpec, dim: int) -> Trajectory:
    rows = spec.trajectory or [[0.0] + [0.0] * dim]
    segs = []
    for row in rows:
        if len(row) != dim + 1:
            raise ConfigError(f"trajectory rows of body {spec.name!r} need 1 + {dim} entries")
        segs.append((row[0], tuple(row[1:])))
    return Trajectory(tuple(segs), rotation_rate=spec.rotation_rate,
                      pivot=None if spec.pivot is None else tuple(spec.pivot))


def build_bodies(config: RunConfig, grid: Grid) -> list[BodyState]:
    bodies: list[BodyState] = []
    for spec in config.bodies:
        if len(spec.position) != grid.dim:
            raise ConfigError(f"body {spec.name!r} position must have {grid.dim} entries")
        if not grid.contains(spec.position):
            raise ConfigError(f"body {spec.name!r} lies outside the domain")
        traj = _trajectory(spec, grid.dim)
        span = spec.site_span
        if grid.dim == 2 and span is None and spec.primitive != "segment":
            # unbounded lines lay sites over the periodic extent across the face
            ax = 1 if abs(math.cos(spec.angle)) > 0.5 else 0
            span = [grid.lo[ax], grid.hi[ax]]
        holes = tuple(Hole(h.lo, h.hi, h.t_open, h.t_close) for h in spec.holes)
        kw = dict(skin=spec.skin, absorption=spec.absorption)
        pos = spec.position if grid.dim > 1 else spec.position[0]
        if spec.primitive == "line":
            bodies.append(line(spec.name, pos, spec.d, spec.v_s, angle=spec.angle, thickness=spec.thickness,
                               site_span=span if grid.dim == 2 else None, holes=holes, trajectory=traj,
                               eta=spec.eta, two_sided=spec.two_sided, **kw))
        elif spec.primitive == "segment":
            if spec.length is None:
                raise ConfigError(f"segment body {spec.name!r} needs a length")
            bodies.append(segment(spec.name, pos, spec.length, spec.d, spec.v_s, angle=spec.angle,
                                  thickness=spec.thickness, holes=holes, trajectory=traj, eta=spec.eta,
                                  two_sided=spec.two_sided, **kw))
        elif spec.primitive == "two_plates":
            if spec.separation is None:
                raise ConfigError(f"two_plates body {spec.name!r} needs a separation")
            bodies.extend(two_plates(spec.name, pos, spec.separation, spec.thickness, spec.d, spec.v_s,
                                     eta_first=spec.eta, eta_second=spec.eta_second,
                                     second_thickness=spec.second_thickness, second_skin=spec.second_skin,
                                     second_absorption=spec.second_absorption, angle=spec.angle,
                                     site_span=span if grid.dim == 2 else None, trajectory=traj, **kw))
        else:
            raise ConfigError(f"unknown body primitive {spec.primitive!r}")
    names = [b.name for b in bodies]
    if len(set(names)) != len(names):
        raise ConfigError("body names must be unique")
    return bodies


def _max_speed(body: BodyState) -> float:
    speed = max(float(np.linalg.norm(v)) for _, v in body.trajectory.segments)
    omega = abs(body.trajectory.rotation_rate)
    if omega:
        reach = max(abs(body.span[0]), abs(body.span[1])) + math.isfinite(body.thickness) * body.thickness
        reach += float(np.linalg.norm(np.subtract(body.pivot, body.origin)))
        speed += omega * reach
    return speed


@dataclass
class PreparedRun:
    """Validated components of a run."""

    config: RunConfig
    grid: Grid
    field: WaveField
    potential: Potential
    bodies: list[BodyState]
    dt: float
    substeps: int
    n_steps: int
    audit: dict


def build_run(config: RunConfig) -> PreparedRun:
    """Build and cross-validate every component of ``config``."""
    try:
        g = config.grid
        grid = Grid(tuple(g.lo), tuple(g.hi), tuple(g.n))
        if config.units.hbar <= 0 or config.units.mass <= 0:
            raise ConfigError("hbar and mass must be positive")
        fld = build_initial(config, grid)
        pot = build_potential(config, grid)
        bodies = build_bodies(config, grid)
        dt = config.stepper.dt
        n_steps = steps_between(0.0, config.stepper.t_final, dt)
        h = min(grid.spacing)
        speed = max((_max_speed(b) for b in bodies), default=0.0)
        substeps = max(1, math.ceil(speed * dt / h - 1e-9))
        audit = audit_step(grid, pot, StepperConfig(dt / substeps), config.units.mass, config.units.hbar)
        for b in bodies:
            for tb in b.trajectory.boundaries():
                k = tb / (dt / substeps)
                if abs(k - round(k)) > 1e-6:
                    raise ConfigError(f"impulse of body {b.name!r} at t={tb} is not on a step boundary")
        for p in config.outputs.probes:
            if len(p) != grid.dim or not grid.contains(p):
                raise ConfigError(f"probe point {p} lies outside the domain")
        if config.ledger.bin_width is not None and not config.ledger.bin_width > 0:
            raise ConfigError("ledger bin_width must be positive")
        ref = config.reference
        if ref.kind not in ("none", "flux", "instant", "swept", "flux_bins", "fringes"):
            raise ConfigError(f"unknown reference kind {ref.kind!r}")
        if ref.kind != "none" and ref.body not in {b.name for b in bodies}:
            raise ConfigError(f"reference body {ref.body!r} is not defined")
        if ref.kind in ("instant", "swept") and ref.time is None:
            raise ConfigError(f"{ref.kind} reference needs a time")
        if ref.kind == "fringes":
            _fringe_plate(bodies)
    except (FieldError, BodyError, StepAuditError) as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    audit = dict(audit, substeps=substeps)
    return PreparedRun(config, grid, fld, pot, bodies, dt / substeps, substeps, n_steps * substeps, audit)


# report --------------------------------------------------------------------------


def _plain(obj):
    """Convert numpy values and tuples into JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


@dataclass
class ScenarioReport:
    """Summary of one run. Every field holds JSON-native values."""

    name: str
    ledger: dict
    audit: dict
    overlap: dict
    born_l1: float | None
    reference: dict
    bodies: dict
    probes: list
    observables: dict
    steps: int
    wall_clock: float
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in ("ledger", "audit", "overlap", "reference", "bodies", "probes", "observables", "outputs"):
            setattr(self, f, _plain(getattr(self, f)))
        if self.born_l1 is not None:
            self.born_l1 = float(self.born_l1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioReport":
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioReport":
        return cls.from_dict(json.loads(text))

    def without_wall_clock(self) -> dict:
        data = self.to_dict()
        data.pop("wall_clock")
        return data


def _obs_dict(obs) -> dict:
    return {"norm": obs.norm, "mean_x": obs.mean_x, "sigma_x": obs.sigma_x, "mean_p": obs.mean_p,
            "sigma_p": obs.sigma_p, "energy": obs.energy}


def body_summary(ledger: SliceLedger, bodies: list[BodyState]) -> dict:
    """Captured probability and arrival-time statistics per body."""
    per_body: dict[str, dict] = {}
    recs = ledger.records
    for b in bodies:
        mine = [r for r in recs if ledger.sites[r.site].body == b.name]
        probs = np.array([r.probability for r in mine])
        total = math.fsum(probs)
        entry = {"captured": total, "records": len(mine), "d": b.d, "v_s": b.v_s,
                 "time_bin_bound": b.d / b.v_s}
        if total > 0:
            tc = np.array([(r.t_bin + 0.5) * ledger.bin_width for r in mine])
            mean = float(np.sum(probs * tc) / total)
            entry["arrival_mean"] = mean
            entry["arrival_spread"] = float(np.sqrt(np.sum(probs * (tc - mean) ** 2) / total))
            entry["first_time"] = min(r.t_first for r in mine)
            entry["last_time"] = max(r.t_last for r in mine)
        per_body[b.name] = entry
    return per_body


# references ----------------------------------------------------------------------


def _face_points(body: BodyState, grid: Grid):
    """Quadrature points across each site panel on the rest face."""
    pts, owners, widths = [], [], []
    h = min(grid.spacing)
    for s in body.sites:
        if grid.dim == 1:
            pts.append(s.rest_position)
            owners.append(s.id)
            widths.append(1.0)
            continue
        k = max(1, math.ceil(body.d / h))
        tangent = np.array([-s.rest_normal[1], s.rest_normal[0]])
        for i in range(k):
            off = -0.5 * body.d + (i + 0.5) * body.d / k
            pts.append(np.asarray(s.rest_position) + off * tangent)
            owners.append(s.id)
            widths.append(body.d / k)
    return np.array(pts, dtype=float), np.array(owners), np.array(widths)


def _free_evolution(prep: PreparedRun, t_end: float, observer=None) -> WaveField:
    fld = prep.field
    n = steps_between(0.0, t_end, prep.dt)
    psi = fld.values
    for i in range(1, n + 1):
        psi = step_values(prep.grid, psi, (i - 1) * prep.dt, prep.potential, prep.dt, fld.mass, fld.hbar)
        if observer is not None:
            observer(fld.replace(values=psi, time=i * prep.dt), i)
    return fld.replace(values=psi, time=n * prep.dt)


def flux_reference(prep: PreparedRun, body: BodyState, bin_width: float | None = None) -> dict:
    """Time-integrated free normal flux through each site panel of a static body.

    With ``bin_width`` the result is keyed by ``(site, t_bin)``.
    """
    if any(np.any(v) for _, v in body.trajectory.segments) or body.trajectory.rotation_rate:
        raise ConfigError("flux reference needs a static body")
    pts, owners, widths = _face_points(body, prep.grid)
    normals = np.array([body.sites[o].rest_normal for o in owners], dtype=float)
    zero = np.zeros_like(normals)
    acc: dict = {}

    def observe(fld: WaveField, i: int) -> None:
        grad = spectral_gradient(prep.grid, fld.values)
        j_in, _ = normal_flux(fld, pts, normals, zero, grad)
        per_site = np.bincount(owners, weights=j_in * widths, minlength=len(body.sites))
        # trapezoid in time: interior steps carry full weight, the final step half
        w = prep.dt if i < n else 0.5 * prep.dt
        for s in np.flatnonzero(per_site):
            key = s if bin_width is None else (int(s), time_bin(fld.time, bin_width))
            acc[key] = acc.get(key, 0.0) + float(per_site[s]) * w

    n = steps_between(0.0, prep.config.stepper.t_final, prep.dt)
    _free_evolution(prep, prep.config.stepper.t_final, observe)
    return acc


def instant_reference(prep: PreparedRun, body: BodyState, t1: float) -> dict:
    """Free probability per site panel at ``t1``, integrated along the normal."""
    fld = _free_evolution(prep, t1)
    dens = fld.density * prep.grid.cell_volume
    if prep.grid.dim == 1:
        return {body.sites[0].id: float(dens.sum())}
    w = body.world_to_local(prep.grid.mesh, 0.0)[1]
    site_w = np.array([s.w for s in body.sites])
    edges = np.concatenate([[site_w[0] - 0.5 * body.d], site_w + 0.5 * body.d])
    idx = np.searchsorted(edges, w, side="right") - 1
    inside = (idx >= 0) & (idx < len(site_w))
    q = np.bincount(idx[inside], weights=dens[inside], minlength=len(site_w))
    return {body.sites[i].id: float(v) for i, v in enumerate(q)}


def swept_reference(prep: PreparedRun, body: BodyState, t1: float, refine: int = 4) -> float:
    """Free probability beyond the face of ``body`` at ``t1``.

    The initial state is resampled on a grid ``refine`` times finer and
    propagated in one exact spectral step. This is valid for a free particle.
    """
    if prep.potential.kind != "free" or prep.grid.dim != 1:
        raise ConfigError("swept reference needs a free 1D run")
    g = prep.grid
    fine = Grid(g.lo, g.hi, tuple(n * refine for n in g.n))
    fld = build_initial(prep.config, fine)
    k2 = fine.k_squared
    psi = sfft.ifftn(np.exp(-1j * fld.hbar * k2 * t1 / (2 * fld.mass)) * sfft.fftn(fld.values))
    face = float(body.pose(t1)[0][0])
    x = fine.axes[0]
    sel = x > face if math.cos(body.angle) > 0 else x < face
    return float(np.sum(np.abs(psi[sel]) ** 2) * fine.cell_volume)


def fringe_analysis(w, p) -> dict:
    """Contrast and spacing of the central fringe of a collector pattern.

    ``w`` are site coordinates along the collector and ``p`` the captured
    probability per site. The central maximum is the largest sample; the
    flanking minima are the first local minima on either side. Each minimum
    is located below the sample spacing by fitting a V to sqrt(p), whose
    magnitude is linear near a node. ``contrast`` uses the central maximum
    and the flanking minima; ``contrast_global`` uses all sites.
    """
    order = np.argsort(w)
    w = np.asarray(w, dtype=float)[order]
    p = np.asarray(p, dtype=float)[order]
    i0 = int(np.argmax(p))

    def walk(step: int) -> int | None:
        i = i0
        while 0 <= i + step < len(p) and p[i + step] < p[i]:
            i += step
        # running into the array end means no interior minimum
        return i if i != i0 and 0 < i < len(p) - 1 else None

    left, right = walk(-1), walk(1)
    out = {"w_max": float(w[i0]), "p_max": float(p[i0]),
           "contrast_global": float((p.max() - p.min()) / (p.max() + p.min()))}
    if left is None or right is None:
        out.update(contrast=math.nan, spacing=math.nan)
        return out

    def node(i: int) -> float:
        a, c = math.sqrt(p[i - 1]), math.sqrt(p[i + 1])
        if a + c == 0:
            return float(w[i])
        y = w[i - 1] + a * (w[i + 1] - w[i - 1]) / (a + c)
        return float(min(max(y, w[i - 1]), w[i + 1]))

    p_min = 0.5 * (p[left] + p[right])
    out.update(contrast=float((p[i0] - p_min) / (p[i0] + p_min)), minima=[node(left), node(right)],
               spacing=node(right) - node(left))
    return out


def _fringe_plate(bodies: list[BodyState]) -> BodyState:
    plates = [b for b in bodies if sum(1 for h in b.holes if math.isinf(h.t_open)) == 2]
    if len(plates) != 1:
        raise ConfigError("fringes reference needs exactly one body with two holes open from the start")
    return plates[0]


def two_source_spacing(prep: PreparedRun, collector: BodyState) -> dict:
    """Far-field fringe spacing lambda D / a for the initially open hole pair.

    D runs from the mid-thickness of the plate to the collector face along
    the plate normal.
    """
    plate = _fringe_plate(prep.bodies)
    h1, h2 = [h for h in plate.holes if math.isinf(h.t_open)]
    a = abs(0.5 * (h2.lo + h2.hi) - 0.5 * (h1.lo + h1.hi))
    k0 = float(np.linalg.norm(prep.config.initial.k0))
    lam = 2 * math.pi / k0
    normal = np.asarray(plate.sites[0].rest_normal, dtype=float)
    gap = abs(float(np.dot(np.subtract(collector.origin, plate.origin), normal)))
    depth = 0.5 * plate.thickness if math.isfinite(plate.thickness) else 0.0
    dist = gap - depth
    return {"wavelength": lam, "distance": dist, "hole_separation": a, "expected_spacing": lam * dist / a}


def _reference(prep: PreparedRun, ledger: SliceLedger) -> tuple[dict, float | None]:
    ref = prep.config.reference
    if ref.kind == "none":
        return {"kind": "none"}, None
    body = next(b for b in prep.bodies if b.name == ref.body)
    off = ledger.offset(body)
    per_site, joint = born_distribution(ledger)
    mine = {s - off: p for s, p in per_site.items() if ledger.sites[s].body == body.name}
    if ref.kind == "flux":
        q = flux_reference(prep, body)
        return {"kind": "flux", "body": body.name, "total": math.fsum(q.values())}, l1_distance(mine, q)
    if ref.kind == "instant":
        q = instant_reference(prep, body, ref.time)
        return ({"kind": "instant", "body": body.name, "time": ref.time, "total": math.fsum(q.values())},
                l1_distance(mine, q))
    if ref.kind == "flux_bins":
        q = flux_reference(prep, body, ledger.bin_width)
        q = {b: v for (s, b), v in q.items() if s == ref.site}
        p = {b: v for (s, b), v in joint.items() if s - off == ref.site and ledger.sites[s].body == body.name}
        return ({"kind": "flux_bins", "body": body.name, "site": ref.site, "total": math.fsum(q.values())},
                l1_distance(p, q))
    if ref.kind == "fringes":
        sites = sorted(s for s in per_site if ledger.sites[s].body == body.name)
        w = [body.sites[s - off].w for s in sites]
        info = fringe_analysis(w, [per_site[s] for s in sites])
        info.update(two_source_spacing(prep, body), kind="fringes", body=body.name)
        info["spacing_error"] = abs(info["spacing"] - info["expected_spacing"]) / info["expected_spacing"]
        return info, None
    q = swept_reference(prep, body, ref.time)
    captured = math.fsum(mine.values())
    return ({"kind": "swept", "body": body.name, "time": ref.time, "oracle": q, "captured": captured,
             "relative_error": abs(captured - q) / q}, abs(captured - q))


# running -------------------------------------------------------------------------


def _write_probe(path: Path, signal: ProbeSignal) -> None:
    lines = ["t,re,im"]
    for t, z in zip(signal.times, signal.samples):
        lines.append(f"{float(t)!r},{float(z.real)!r},{float(z.imag)!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run(config: RunConfig, out_dir=None, *, with_reference: bool = True) -> ScenarioReport:
    """Evolve ``config`` to its final time and summarize the capture ledger.

    Outputs (ledger, report, probes, snapshots) are written when ``out_dir``
    is given. A failing norm audit raises ConservationError.
    """
    return run_with_ledger(config, out_dir, with_reference=with_reference)[0]


def run_with_ledger(config: RunConfig, out_dir=None, *,
                    with_reference: bool = True) -> tuple[ScenarioReport, SliceLedger]:
    """As :func:`run`, also returning the in-memory ledger."""
    start = time.perf_counter()
    prep = build_run(config)
    grid, pot, bodies, dt = prep.grid, prep.potential, prep.bodies, prep.dt
    fld = prep.field
    out = None if out_dir is None else Path(out_dir)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ledger = SliceLedger.for_bodies(bodies, config.ledger.bin_width) if bodies else \
        SliceLedger(config.ledger.bin_width or 1.0, grid.dim)

    v0 = pot.values_at(0.0, grid.shape)
    obs0 = observables(fld, v0)
    norm0 = fld.norm()
    probes = [(tuple(p), grid.nearest_index(p)) for p in config.outputs.probes]
    samples: list[list[complex]] = [[complex(fld.values[ix])] for _, ix in probes]
    sample_times = [0.0]
    snaps = []
    captured = 0.0
    max_identity = 0.0
    diag: list = []
    psi = fld.values
    for i in range(1, prep.n_steps + 1):
        t0, t1 = (i - 1) * dt, i * dt
        psi = step_values(grid, psi, t0, pot, dt, fld.mass, fld.hbar)
        cur = fld.replace(values=psi, time=t1)
        if bodies:
            cur, ledger = capture_flux(cur, bodies, dt, ledger, pot.values_at(t1, grid.shape), diag)
            if diag:
                captured += diag[-1].removed
                diag.clear()
            psi = cur.values
            max_identity = max(max_identity, abs(cur.norm() + captured - norm0))
        outer, rem = divmod(i, prep.substeps)
        if rem == 0:
            if probes and outer % config.outputs.probe_every == 0:
                sample_times.append(t1)
                for buf, (_, ix) in zip(samples, probes):
                    buf.append(complex(psi[ix]))
            every = config.outputs.snapshot_every
            if out is not None and every and outer % every == 0:
                path = out / f"snapshot_{outer:06d}.wfld"
                write_snapshot(cur, path)
                snaps.append(path.name)
    fld = fld.replace(values=psi, time=prep.n_steps * dt)
    obs1 = observables(fld, pot.values_at(fld.time, grid.shape))

    ref = config.reference
    audit = conservation_audit(obs0, ledger, obs1, tau_energy=ref.tau_energy, tau_momentum=ref.tau_momentum,
                               norm_tol=IDENTITY_TOL)
    audit_d = audit.as_dict()
    identity = fld.norm() + ledger.total_captured - norm0
    audit_d.update(identity_residual=identity, max_identity_residual=max(max_identity, abs(identity)),
                   max_step_residual=ledger.max_step_residual, **prep.audit)
    overlap = slice_overlap_monitor(ledger, bodies)
    if with_reference:
        ref_info, l1 = _reference(prep, ledger)
    else:
        ref_info, l1 = {"kind": "skipped"}, None

    probe_reports = []
    for k, (pos, _) in enumerate(probes):
        dt_s = dt * prep.substeps * config.outputs.probe_every
        sig = ProbeSignal(pos, np.array(samples[k]), dt_s, 0.0)
        try:
            rep = probe_uncertainty(sig)
            entry = {"position": pos, "n_samples": len(samples[k]), **asdict(rep)}
        except ValueError as exc:
            entry = {"position": pos, "n_samples": len(samples[k]), "error": str(exc)}
        probe_reports.append(entry)
        if out is not None:
            _write_probe(out / f"probe_{k}.csv", sig)

    summary = {"records": len(ledger), "total_captured": ledger.total_captured,
               "bin_width": ledger.bin_width, "sites": len(ledger.sites)}
    outputs = {}
    if out is not None:
        outputs = {"ledger": config.outputs.ledger, "report": config.outputs.report, "snapshots": snaps,
                   "probes": [f"probe_{k}.csv" for k in range(len(probes))]}
    report = ScenarioReport(
        name=config.name, ledger=summary, audit=audit_d,
        overlap={"metric": overlap.metric, "status": overlap.status, "flagged": overlap.flagged,
                 "pair": overlap.pair},
        born_l1=l1, reference=ref_info, bodies=body_summary(ledger, bodies), probes=probe_reports,
        observables={"initial": _obs_dict(obs0), "final": _obs_dict(obs1)}, steps=prep.n_steps,
        wall_clock=time.perf_counter() - start, outputs=outputs)
    if out is not None:
        summ = {"scenario": config.name, "identity_residual": identity,
                "max_step_residual": ledger.max_step_residual,
                "overlap_metric": overlap.metric, "overlap_status": overlap.status}
        for b in bodies:
            summ[f"sites:{b.name}"] = [ledger.offset(b), len(b.sites)]
        write_ledger(ledger, out / config.outputs.ledger, summ)
        (out / config.outputs.report).write_text(report.to_json() + "\n", encoding="utf-8")
    return report, ledger

"""Classical measurement bodies: rigid slabs with surface sites and holes.

Each body is described in a local frame. The local ``u`` axis points into the
body from its front face at ``u = 0``, and ``w`` runs along the face (2D only).
The body occupies ``0 <= u <= thickness`` and, in 2D, the ``w`` span minus any
open holes. World coordinates follow from a scripted rigid motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid_field import Grid


class BodyError(ValueError):
    """Invalid body description or query."""


class SweepError(BodyError):
    """Body moved more than one cell within a single sweep query."""


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class SurfaceSite:
    id: int
    rest_position: tuple[float, ...]
    rest_normal: tuple[float, ...]
    face: str = "front"
    w: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.rest_normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise BodyError("site normal must be a unit vector")


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant velocity script with an optional 2D rotation rate.

    ``segments`` holds ``(t_start, velocity)`` pairs in time order. The rest
    layout corresponds to the first ``t_start``. An impulse is simply the
    boundary between two segments.
    """

    segments: tuple[tuple[float, tuple[float, ...]], ...]
    t_end: float = math.inf
    rotation_rate: float = 0.0
    pivot: tuple[float, ...] | None = None

    def __post_init__(self):
        segs = tuple((float(t), tuple(float(v) for v in np.atleast_1d(vel))) for t, vel in self.segments)
        if not segs:
            raise BodyError("trajectory needs at least one segment")
        times = [t for t, _ in segs]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise BodyError("trajectory segments must be strictly time-ordered")
        dims = {len(v) for _, v in segs}
        if len(dims) != 1:
            raise BodyError("all segment velocities need the same dimension")
        if self.t_end <= times[0]:
            raise BodyError("t_end must follow the first segment start")
        object.__setattr__(self, "segments", segs)
        if self.pivot is not None:
            object.__setattr__(self, "pivot", tuple(float(v) for v in self.pivot))

    @classmethod
    def static(cls, dim: int, t_start: float = 0.0) -> "Trajectory":
        return cls(((t_start, (0.0,) * dim),))

    @property
    def t_start(self) -> float:
        return self.segments[0][0]

    @property
    def dim(self) -> int:
        return len(self.segments[0][1])

    def _check(self, t: float) -> None:
        if t < self.t_start - 1e-12 or t > self.t_end + 1e-12:
            raise BodyError(f"time {t} outside scripted range [{self.t_start}, {self.t_end}]")

    def segment_index(self, t: float) -> int:
        """Index of the segment active at ``t``; boundaries belong to the later segment."""
        self._check(t)
        idx = 0
        for i, (ts, _) in enumerate(self.segments):
            if t >= ts:
                idx = i
        return idx

    def velocity(self, t: float) -> np.ndarray:
        return np.array(self.segments[self.segment_index(t)][1])

    def displacement(self, t: float) -> np.ndarray:
        self._check(t)
        disp = np.zeros(self.dim)
        for i, (ts, vel) in enumerate(self.segments):
            if t <= ts:
                break
            te = self.segments[i + 1][0] if i + 1 < len(self.segments) else math.inf
            disp += np.array(vel) * (min(t, te) - ts)
        return disp

    def rotation(self, t: float) -> float:
        self._check(t)
        return self.rotation_rate * (t - self.t_start)

    def boundaries(self) -> list[float]:
        return [t for t, _ in self.segments[1:]]


@dataclass(frozen=True)
class Hole:
    """Open interval ``(lo, hi)`` in the surface coordinate, active over ``[t_open, t_close)``."""

    lo: float
    hi: float
    t_open: float = -math.inf
    t_close: float = math.inf

    def __post_init__(self):
        if not self.hi > self.lo:
            raise BodyError("hole needs hi > lo")
        if not self.t_close > self.t_open:
            raise BodyError("hole needs t_close > t_open")

    def active(self, t: float) -> bool:
        return self.t_open <= t < self.t_close


@dataclass(frozen=True, eq=False)
class BodyState:
    """Rigid absorbing body with surface sites.

    Parameters
    ----------
    origin : world position of the local origin at the start of the script.
    angle : rest orientation. In 1D only 0 (facing -x) and pi (facing +x).
    thickness : extent along ``u``; ``inf`` for a half-space.
    span : ``(w_lo, w_hi)`` extent along the face, or ``None`` for an
        unbounded line. Sites are laid out over ``site_span``.
    d, v_s : granularity length and sound speed.
    eta : capture efficiency in [0, 1].
    skin, absorption : depth and peak rate of the graded sink inside the face.
    """

    name: str
    dim: int
    origin: tuple[float, ...]
    d: float
    v_s: float
    trajectory: Trajectory
    angle: float = 0.0
    thickness: float = math.inf
    span: tuple[float, float] | None = None
    site_span: tuple[float, float] | None = None
    holes: tuple[Hole, ...] = ()
    eta: float = 1.0
    skin: float = 3.0
    absorption: float = 4.0
    two_sided: bool = False
    sites: tuple[SurfaceSite, ...] = field(default=(), init=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise BodyError("bodies live in 1D or 2D")
        object.__setattr__(self, "origin", tuple(float(v) for v in np.atleast_1d(self.origin)))
        if len(self.origin) != self.dim or self.trajectory.dim != self.dim:
            raise BodyError("origin and trajectory must match the body dimension")
        if not self.d > 0 or not self.v_s > 0:
            raise BodyError("granularity d and sound speed v_s must be positive")
        if not 0 <= self.eta <= 1:
            raise BodyError("efficiency eta must lie in [0, 1]")
        if not self.thickness > 0 or not self.skin > 0 or self.absorption < 0:
            raise BodyError("thickness and skin must be positive, absorption non-negative")
        if self.dim == 1:
            if not (abs(math.cos(self.angle)) > 1 - 1e-12):
                raise BodyError("1D bodies face -x (angle 0) or +x (angle pi)")
            if self.holes or self.span is not None:
                raise BodyError("1D bodies have no span or holes")
            if self.trajectory.rotation_rate != 0:
                raise BodyError("rotation needs a 2D body")
        else:
            if self.span is not None and not self.span[1] > self.span[0]:
                raise BodyError("span needs w_hi > w_lo")
            if self.trajectory.rotation_rate != 0 and self.span is None:
                raise BodyError("rotating an unbounded line is not supported")
        holes = tuple(sorted(self.holes, key=lambda h: h.lo))
        for i, a in enumerate(holes):
            for b in holes[i + 1:]:
                if b.lo < a.hi and a.lo < b.hi and b.t_open < a.t_close and a.t_open < b.t_close:
                    raise BodyError("holes must not overlap while open")
        object.__setattr__(self, "holes", holes)
        object.__setattr__(self, "sites", self._layout())

    def _layout(self) -> tuple[SurfaceSite, ...]:
        faces = [("front", 0.0, -1.0)]
        if self.two_sided and math.isfinite(self.thickness):
            faces.append(("back", self.thickness, 1.0))
        if self.dim == 1:
            ws = [0.0]
        else:
            sspan = self.site_span or self.span
            if sspan is None:
                raise BodyError("an unbounded 2D line needs a site_span for its site layout")
            count = int(math.floor((sspan[1] - sspan[0]) / self.d + 1e-9))
            if count < 1:
                raise BodyError("site span shorter than one granularity length")
            ws = [sspan[0] + (i + 0.5) * self.d for i in range(count)]
        sites = []
        for face, u, sign in faces:
            for w in ws:
                local = np.array([u, w][: self.dim])
                normal = np.array([sign, 0.0][: self.dim])
                pos = self.local_to_world_rest(local)
                nrm = self._rotate_rest(normal)
                sites.append(SurfaceSite(len(sites), tuple(pos), tuple(nrm), face, w))
        return tuple(sites)

    # frame transforms -----------------------------------------------------

    def _rot_matrix(self, theta: float) -> np.ndarray:
        if self.dim == 1:
            return np.array([[1.0 if math.cos(theta) > 0 else -1.0]])
        return _rot(theta)

    def _rotate_rest(self, vec: np.ndarray) -> np.ndarray:
        return self._rot_matrix(self.angle) @ vec

    @property
    def pivot(self) -> np.ndarray:
        p = self.trajectory.pivot
        return np.zeros(self.dim) if p is None else np.asarray(p, dtype=float)

    def pose(self, t: float) -> tuple[np.ndarray, float]:
        """World position of the local origin and orientation at time ``t``."""
        theta = self.angle + self.trajectory.rotation(t)
        rest_rot = self._rot_matrix(self.angle)
        cur_rot = self._rot_matrix(theta)
        piv = self.pivot
        base = np.asarray(self.origin) + self.trajectory.displacement(t)
        origin = base + rest_rot @ piv - cur_rot @ piv
        return origin, theta

    def local_to_world_rest(self, local: np.ndarray) -> np.ndarray:
        return np.asarray(self.origin) + self._rot_matrix(self.angle) @ local

    def world_to_local(self, coords: Sequence[np.ndarray], t: float) -> list[np.ndarray]:
        origin, theta = self.pose(t)
        rot = self._rot_matrix(theta)
        rel = [c - o for c, o in zip(coords, origin)]
        # local = R^T (x - origin)
        return [sum(rot[i, a] * rel[i] for i in range(self.dim)) for a in range(self.dim)]

    # holes and rectangles -------------------------------------------------

    def active_holes(self, t: float) -> tuple[Hole, ...]:
        return tuple(h for h in self.holes if h.active(t))

    def site_active(self, t: float) -> np.ndarray:
        holes = self.active_holes(t)
        return np.array([not any(h.lo < s.w < h.hi for h in holes) for s in self.sites], dtype=bool)

    def w_intervals(self, t: float) -> list[tuple[float, float]]:
        """Solid intervals along the face at time ``t``."""
        lo, hi = self.span if self.span is not None else (-math.inf, math.inf)
        out = []
        cur = lo
        for h in self.active_holes(t):
            if h.hi <= lo or h.lo >= hi:
                continue
            if h.lo > cur:
                out.append((cur, h.lo))
            cur = max(cur, h.hi)
        if cur < hi:
            out.append((cur, hi))
        return out


@dataclass(frozen=True)
class SiteKinematics:
    """Per-site world positions, outward normals and velocities at one time."""

    ids: np.ndarray
    positions: np.ndarray
    normals: np.ndarray
    velocities: np.ndarray
    active: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


def site_positions(body: BodyState, t: float) -> SiteKinematics:
    """Rigidly transformed site layout with normals and velocities at ``t``.

    The velocity uses the segment active at ``t`` plus the rotational term.
    """
    origin, theta = body.pose(t)
    rot = body._rot_matrix(theta)
    vel = body.trajectory.velocity(t)
    omega = body.trajectory.rotation_rate
    pos, nrm, vels = [], [], []
    piv_world = origin + rot @ body.pivot
    for s in body.sites:
        local = np.array([0.0 if s.face == "front" else body.thickness, s.w][: body.dim])
        p = origin + rot @ local
        n = rot @ np.array([-1.0 if s.face == "front" else 1.0, 0.0][: body.dim])
        v = vel.copy()
        if body.dim == 2 and omega != 0:
            r = p - piv_world
            v = v + omega * np.array([-r[1], r[0]])
        pos.append(p)
        nrm.append(n)
        vels.append(v)
    return SiteKinematics(
        np.arange(len(body.sites)),
        np.array(pos).reshape(len(body.sites), body.dim),
        np.array(nrm).reshape(len(body.sites), body.dim),
        np.array(vels).reshape(len(body.sites), body.dim),
        body.site_active(t),
    )


def depth_field(body: BodyState, grid: Grid, t: float) -> np.ndarray:
    """Distance from each cell centre to the nearest exposed face.

    Positive inside the body, zero or negative outside. Faces at infinity
    (half-space thickness, unbounded line) do not count.
    """
    if grid.dim != body.dim:
        raise BodyError("grid and body dimensions differ")
    local = body.world_to_local(grid.mesh, t)
    u = local[0]
    depth_u = u if math.isinf(body.thickness) else np.minimum(u, body.thickness - u)
    if body.dim == 1:
        return depth_u
    w = local[1]
    out = np.full(grid.shape, -np.inf)
    for a, b in body.w_intervals(t):
        d = depth_u
        if math.isfinite(a):
            d = np.minimum(d, w - a)
        if math.isfinite(b):
            d = np.minimum(d, b - w)
        out = np.maximum(out, d)
    return out


def interior_mask(body: BodyState, grid: Grid, t: float) -> np.ndarray:
    return depth_field(body, grid, t) > 0


def max_displacement(body: BodyState, t0: float, t1: float) -> np.ndarray:
    """Per-axis bound on how far any body point moves between t0 and t1."""
    o0, th0 = body.pose(t0)
    o1, th1 = body.pose(t1)
    disp = np.abs(o1 - o0)
    if body.dim == 2 and th1 != th0:
        reach = body.thickness if math.isfinite(body.thickness) else 0.0
        lo, hi = body.span
        radius = math.hypot(reach + np.linalg.norm(body.pivot), max(abs(lo), abs(hi)) + np.linalg.norm(body.pivot))
        disp = disp + abs(th1 - th0) * radius
    return disp


@dataclass(frozen=True)
class SweptCells:
    """Flat grid indices newly covered by the body and the site owning each."""

    indices: np.ndarray
    owners: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def nearest_sites(positions: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Index into ``positions`` of the nearest entry for each point."""
    from scipy.spatial import cKDTree

    if len(points) == 0:
        return np.zeros(0, dtype=int)
    if len(positions) == 1:
        return np.zeros(len(points), dtype=int)
    _, idx = cKDTree(positions).query(points)
    return np.asarray(idx, dtype=int)


def swept_cells(body: BodyState, grid: Grid, t0: float, t1: float) -> SweptCells:
    """Cells that change from exterior to interior over ``[t0, t1]``.

    Each swept cell is owned by the nearest site that is active at ``t1``.
    Cells inside open holes stay exterior and are never swept.
    """
    if not t1 > t0:
        raise BodyError("swept_cells needs t1 > t0")
    body.trajectory.segment_index(t0)
    if any(t0 < b < t1 - 1e-12 for b in body.trajectory.boundaries()):
        raise BodyError("sweep interval crosses a trajectory impulse; split the query")
    disp = max_displacement(body, t0, t1)
    if np.any(disp > np.asarray(grid.spacing) * (1 + 1e-9)):
        raise SweepError(f"body moved {np.max(disp):.4g} in one sweep, more than one cell "
                         f"(spacing {min(grid.spacing):.4g}); subdivide the step")
    before = interior_mask(body, grid, t0)
    after = interior_mask(body, grid, t1)
    flat = np.flatnonzero(after & ~before)
    kin = site_positions(body, t1)
    act = np.flatnonzero(kin.active)
    if len(act) == 0 or len(flat) == 0:
        return SweptCells(flat[:0], np.zeros(0, dtype=int))
    pts = np.column_stack([m.ravel()[flat] for m in grid.mesh])
    owners = act[nearest_sites(kin.positions[act], pts)]
    return SweptCells(flat, owners)


# primitives ---------------------------------------------------------------


def _trajectory(dim: int, trajectory) -> Trajectory:
    if trajectory is None:
        return Trajectory.static(dim)
    if isinstance(trajectory, Trajectory):
        return trajectory
    return Trajectory(tuple(trajectory))


def line(name: str, position, d: float, v_s: float, *, angle: float = 0.0,
         thickness: float = math.inf, site_span=None, holes: Sequence[Hole] = (),
         trajectory=None, **kw) -> BodyState:
    """Flat screen whose face passes through ``position``.

    In 2D the face is unbounded and ``site_span`` sets where sites are laid out
    (normally the full periodic extent of the grid).
    """
    pos = tuple(np.atleast_1d(np.asarray(position, dtype=float)))
    dim = len(pos)
    return BodyState(name, dim, pos, d, v_s, _trajectory(dim, trajectory), angle=angle,
                     thickness=thickness, span=None,
                     site_span=None if site_span is None else tuple(site_span),
                     holes=tuple(holes), **kw)


def segment(name: str, position, length: float, d: float, v_s: float, *, angle: float = 0.0,
            thickness: float = math.inf, holes: Sequence[Hole] = (), trajectory=None,
            **kw) -> BodyState:
    """Finite 2D plate of face length ``length`` centred on ``position``."""
    pos = tuple(np.atleast_1d(np.asarray(position, dtype=float)))
    if len(pos) != 2:
        raise BodyError("segment is a 2D primitive")
    half = 0.5 * length
    return BodyState(name, 2, pos, d, v_s, _trajectory(2, trajectory), angle=angle,
                     thickness=thickness, span=(-half, half), holes=tuple(holes), **kw)


def two_plates(name: str, position, separation: float, thickness: float, d: float, v_s: float, *,
               eta_first: float = 0.5, eta_second: float = 1.0, second_thickness: float = math.inf,
               second_skin: float | None = None, second_absorption: float | None = None,
               angle: float = 0.0, site_span=None, trajectory=None, **kw) -> tuple[BodyState, BodyState]:
    """Two parallel plates: a thin partial absorber followed by a collector.

    The second face sits ``separation`` beyond the first face. Its sink takes
    ``second_skin`` and ``second_absorption`` when given, else the shared values.
    """
    pos = np.atleast_1d(np.asarray(position, dtype=float))
    dim = len(pos)
    shift = np.zeros(dim)
    shift[0] = separation * math.cos(angle)
    if dim == 2:
        shift[1] = separation * math.sin(angle)
    first = line(f"{name}.1", pos, d, v_s, angle=angle, thickness=thickness, site_span=site_span,
                 trajectory=trajectory, eta=eta_first, two_sided=False, **kw)
    kw2 = dict(kw)
    if second_skin is not None:
        kw2["skin"] = second_skin
    if second_absorption is not None:
        kw2["absorption"] = second_absorption
    second = line(f"{name}.2", pos + shift, d, v_s, angle=angle, thickness=second_thickness,
                  site_span=site_span, trajectory=trajectory, eta=eta_second, **kw2)
    return first, second

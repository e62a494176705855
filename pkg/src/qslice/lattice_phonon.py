"""Harmonic lattices, normal modes and phonon-state amplitudes.

Modes come from the mass-weighted Hessian ``M^-1/2 H M^-1/2``. For a mode
with orthonormal eigenvector ``e`` the effective mass is
``m = 1 / sum_j e_j^2 / M_j``. Its coordinate is ``u = e . M^1/2 (X - R) / sqrt(m)``,
so the mode Hamiltonian reads ``p^2/2m + m w^2 u^2/2``. With equal masses
``u`` is the plain projection of the displacement on the unit mode direction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

ZERO_MODE_RATIO = 1e-10


class LatticeError(ValueError):
    """Invalid lattice or mode request."""


@dataclass(frozen=True, eq=False)
class LatticeModel:
    """Point masses joined by central harmonic springs.

    ``springs`` holds ``(i, j, kappa)`` triples. ``j = -1`` tethers atom ``i``
    isotropically to its rest position, which is how pinned ends are built.
    """

    positions: np.ndarray
    masses: np.ndarray
    springs: tuple[tuple[int, int, float], ...]
    boundary: str = "free"

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        m = np.array(self.masses, dtype=float).reshape(-1)
        if m.size == 1 and len(pos) > 1:
            m = np.full(len(pos), m[0])
        if len(m) != len(pos):
            raise LatticeError("one mass per atom is required")
        if np.any(m <= 0):
            raise LatticeError("masses must be positive")
        if pos.shape[1] not in (1, 2):
            raise LatticeError("lattices are 1D or 2D")
        springs = tuple((int(i), int(j), float(k)) for i, j, k in self.springs)
        n = len(pos)
        for i, j, k in springs:
            if k <= 0:
                raise LatticeError("spring constants must be positive")
            if not (0 <= i < n) or not (-1 <= j < n) or i == j:
                raise LatticeError(f"bad spring ({i}, {j})")
        if self.boundary not in ("free", "pinned"):
            raise LatticeError("boundary must be 'free' or 'pinned'")
        if self.boundary == "pinned" and not any(j == -1 for _, j, _ in springs):
            raise LatticeError("a pinned lattice needs at least one tether (j = -1)")
        if n > 1:
            diffs = pos[:, None, :] - pos[None, :, :]
            dist = np.sqrt((diffs ** 2).sum(-1)) + np.eye(n)
            if np.any(dist <= 0):
                raise LatticeError("atom positions must be distinct")
        if not self._connected(n, springs):
            raise LatticeError("spring graph is not connected")
        pos.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "springs", springs)

    @staticmethod
    def _connected(n: int, springs) -> bool:
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j, _ in springs:
            if j >= 0:
                parent[find(i)] = find(j)
        return len({find(a) for a in range(n)}) == 1

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @classmethod
    def chain(cls, n: int, kappa: float = 1.0, mass: float = 1.0, spacing: float = 1.0,
              pinned: bool = False) -> "LatticeModel":
        """Uniform 1D chain; ``pinned`` tethers both ends to fixed walls."""
        springs = [(i, i + 1, kappa) for i in range(n - 1)]
        if pinned:
            springs += [(0, -1, kappa), (n - 1, -1, kappa)]
        return cls(np.arange(n) * spacing, np.full(n, mass), tuple(springs),
                   "pinned" if pinned else "free")

    @classmethod
    def triangular(cls, rows: int, cols: int, kappa: float = 1.0, mass: float = 1.0,
                   spacing: float = 1.0) -> "LatticeModel":
        """Free 2D triangular patch, rigid against shear."""
        pts, index = [], {}
        for r in range(rows):
            for c in range(cols):
                index[(r, c)] = len(pts)
                pts.append(((c + 0.5 * (r % 2)) * spacing, r * spacing * math.sqrt(3) / 2))
        springs = []
        for (r, c), i in index.items():
            nbrs = [(r, c + 1)]
            if r % 2 == 0:
                nbrs += [(r + 1, c - 1), (r + 1, c)]
            else:
                nbrs += [(r + 1, c), (r + 1, c + 1)]
            for key in nbrs:
                if key in index:
                    springs.append((i, index[key], kappa))
        return cls(np.array(pts), np.full(len(pts), mass), tuple(springs), "free")


def hessian(lat: LatticeModel) -> np.ndarray:
    """Configuration-space Hessian of the spring energy at rest."""
    n, dim = lat.n_atoms, lat.dim
    h = np.zeros((n * dim, n * dim))
    for i, j, k in lat.springs:
        if j == -1:
            block = k * np.eye(dim)
            h[i * dim:(i + 1) * dim, i * dim:(i + 1) * dim] += block
            continue
        e = lat.positions[j] - lat.positions[i]
        e = e / np.linalg.norm(e)
        block = k * np.outer(e, e)
        si, sj = slice(i * dim, (i + 1) * dim), slice(j * dim, (j + 1) * dim)
        h[si, si] += block
        h[sj, sj] += block
        h[si, sj] -= block
        h[sj, si] -= block
    return h


@dataclass(frozen=True)
class Mode:
    index: int
    omega: float
    mass: float
    vector: np.ndarray
    direction: np.ndarray


@dataclass(frozen=True, eq=False)
class NormalModeSet:
    """Retained vibrational modes and the removed zero modes of a lattice."""

    modes: tuple[Mode, ...]
    zero_modes: tuple[Mode, ...]
    masses: np.ndarray
    dim: int
    hbar: float = 1.0
    zero_width: float | None = None

    @property
    def zero_modes_removed(self) -> int:
        return len(self.zero_modes)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    @property
    def vectors(self) -> np.ndarray:
        """Mass-weighted eigenvectors of the retained modes, one per column."""
        return np.column_stack([m.vector for m in self.modes]) if self.modes else np.zeros((0, 0))

    def width(self, i: int) -> float:
        return mode_width(self.modes[i], self.hbar)

    def localization_width(self) -> float:
        """Width of the Gaussians over removed zero-mode coordinates."""
        if self.zero_width is not None:
            return self.zero_width
        return float(np.mean([mode_width(m, self.hbar) for m in self.modes]))

    def coordinates(self, rest: np.ndarray, X: np.ndarray, zero: bool = False) -> np.ndarray:
        """Mode coordinates u of configuration ``X`` relative to ``rest``."""
        disp = (np.asarray(X, dtype=float) - np.asarray(rest, dtype=float)).reshape(-1)
        sqrt_m = np.sqrt(np.repeat(self.masses, self.dim))
        modes = self.zero_modes if zero else self.modes
        return np.array([m.vector @ (sqrt_m * disp) / math.sqrt(m.mass) for m in modes])


def normal_modes(lat: LatticeModel, hbar: float = 1.0, zero_width: float | None = None) -> NormalModeSet:
    """Diagonalize the mass-weighted Hessian and split off the zero modes."""
    h = hessian(lat)
    inv_sqrt_m = 1.0 / np.sqrt(np.repeat(lat.masses, lat.dim))
    hw = h * inv_sqrt_m[:, None] * inv_sqrt_m[None, :]
    w2, vecs = np.linalg.eigh(hw)
    scale = max(float(np.max(np.abs(w2))), 1e-300)
    if np.any(w2 < -ZERO_MODE_RATIO * scale):
        raise LatticeError("Hessian has negative curvature; the lattice is unstable")
    retained, zeros = [], []
    mass_diag = np.repeat(lat.masses, lat.dim)
    for k in range(len(w2)):
        e = vecs[:, k]
        # fix the sign so the largest component is positive (deterministic output)
        e = e * (1.0 if e[np.argmax(np.abs(e))] > 0 else -1.0)
        m_eff = 1.0 / float(np.sum(e ** 2 / mass_diag))
        direction = e * inv_sqrt_m
        direction = direction / np.linalg.norm(direction)
        if w2[k] < ZERO_MODE_RATIO * scale:
            zeros.append(Mode(len(zeros), 0.0, m_eff, e, direction))
        else:
            retained.append(Mode(len(retained), math.sqrt(w2[k]), m_eff, e, direction))
    if not retained:
        raise LatticeError("no vibrational modes survive zero-mode removal")
    return NormalModeSet(tuple(retained), tuple(zeros), lat.masses.copy(), lat.dim, hbar, zero_width)


def mode_width(mode: Mode, hbar: float = 1.0) -> float:
    """Ground-state width sqrt(hbar / (m w)) of a mode."""
    if mode.omega <= 0:
        raise LatticeError("zero modes have no oscillator width")
    return math.sqrt(hbar / (mode.mass * mode.omega))


def oscillator_eigenfunction(n: int, u, mass: float, omega: float, hbar: float = 1.0) -> np.ndarray:
    """Normalized oscillator eigenfunction f_n(u) by the stable Hermite-function recurrence."""
    if n < 0:
        raise LatticeError("occupancy must be non-negative")
    alpha = mass * omega / hbar
    xi = math.sqrt(alpha) * np.asarray(u, dtype=float)
    f0 = (alpha / math.pi) ** 0.25 * np.exp(-0.5 * xi * xi)
    if n == 0:
        return f0
    f1 = math.sqrt(2.0) * xi * f0
    for k in range(1, n):
        f0, f1 = f1, math.sqrt(2.0 / (k + 1)) * xi * f1 - math.sqrt(k / (k + 1)) * f0
    return f1


@dataclass(frozen=True)
class PhononOccupancy:
    n: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {int(k): int(v) for k, v in dict(self.n).items() if int(v) != 0}
        if any(v < 0 for v in clean.values()):
            raise LatticeError("occupancies must be non-negative")
        object.__setattr__(self, "n", dict(sorted(clean.items())))

    def get(self, mode: int) -> int:
        return self.n.get(mode, 0)

    def with_count(self, mode: int, count: int) -> "PhononOccupancy":
        new = dict(self.n)
        new[mode] = count
        return PhononOccupancy(new)

    def __hash__(self):
        return hash(tuple(self.n.items()))


def phonon_amplitude(modes: NormalModeSet, R: np.ndarray, occ: PhononOccupancy, X: np.ndarray,
                     include_zero_modes: bool = True) -> float:
    """Product of oscillator eigenfunctions over mode coordinates of ``X``.

    Removed zero modes contribute unit-normalized Gaussians shaped like an
    oscillator ground state of the localization width, when
    ``include_zero_modes`` is set.
    """
    for k in occ.n:
        if not 0 <= k < len(modes.modes):
            raise LatticeError(f"mode {k} is not a retained mode")
    u = modes.coordinates(R, X)
    amp = 1.0
    for mode, uk in zip(modes.modes, u):
        amp *= float(oscillator_eigenfunction(occ.get(mode.index), uk, mode.mass, mode.omega, modes.hbar))
    if include_zero_modes and modes.zero_modes:
        width = modes.localization_width()
        for z in modes.coordinates(R, X, zero=True):
            amp *= (math.pi * width ** 2) ** -0.25 * math.exp(-z * z / (2 * width ** 2))
    return amp


def symmetrized_amplitude(modes: NormalModeSet, R: np.ndarray, occ: PhononOccupancy, X: np.ndarray) -> float:
    """Bosonic sum over all atom permutations of ``X``, divided by sqrt(N!).

    Exhaustive, so limited to six atoms.
    """
    X = np.asarray(X, dtype=float).reshape(len(R), -1)
    n = len(X)
    if n > 6:
        raise LatticeError("exhaustive symmetrization is limited to N <= 6")
    total = 0.0
    for perm in itertools.permutations(range(n)):
        total += phonon_amplitude(modes, R, occ, X[list(perm)])
    return total / math.sqrt(math.factorial(n))


def permutation_overlap(modes: NormalModeSet, R: np.ndarray, occ: PhononOccupancy | None = None) -> float:
    """Relative weight of non-identity permutations at the rest configuration."""
    occ = occ or PhononOccupancy()
    R = np.asarray(R, dtype=float).reshape(-1, modes.dim)
    direct = phonon_amplitude(modes, R, occ, R)
    sym = symmetrized_amplitude(modes, R, occ, R) * math.sqrt(math.factorial(len(R)))
    return abs(sym - direct) / abs(direct)


@dataclass(frozen=True)
class ClassicalityEnergies:
    U_surf: float
    U_r: float
    U_el: float


def classicality_energies(E_b: float, L: float, M: float, d: float, Y: float,
                          hbar: float = 1.0) -> ClassicalityEnergies:
    """Order-of-magnitude surface, rotational and elastic energy scales."""
    for name, v in (("E_b", E_b), ("L", L), ("M", M), ("d", d), ("Y", Y), ("hbar", hbar)):
        if not v > 0:
            raise LatticeError(f"{name} must be positive")
    return ClassicalityEnergies(
        U_surf=E_b * L ** 2,
        U_r=hbar ** 2 / (M * d ** 2),
        U_el=hbar ** 2 / (M * Y * d ** 2 * L ** 3),
    )


def write_mode_table(modes: NormalModeSet, path) -> None:
    """Comma-separated table of index, omega, m_eff, width."""
    lines = ["index,omega,m_eff,width"]
    for m in modes.modes:
        lines.append(f"{m.index},{m.omega!r},{m.mass!r},{mode_width(m, modes.hbar)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def lattice_from_dict(spec: Mapping) -> LatticeModel:
    """Build a lattice from a config block.

    Either ``kind = "chain"`` (n, kappa, mass, spacing, pinned),
    ``kind = "triangular"`` (rows, cols, kappa, mass, spacing), or explicit
    ``positions``, ``masses``, ``springs`` and ``boundary``.
    """
    kind = spec.get("kind", "explicit")
    if kind == "chain":
        return LatticeModel.chain(int(spec["n"]), float(spec.get("kappa", 1.0)), float(spec.get("mass", 1.0)),
                                  float(spec.get("spacing", 1.0)), bool(spec.get("pinned", False)))
    if kind == "triangular":
        return LatticeModel.triangular(int(spec["rows"]), int(spec["cols"]), float(spec.get("kappa", 1.0)),
                                       float(spec.get("mass", 1.0)), float(spec.get("spacing", 1.0)))
    if kind == "explicit":
        return LatticeModel(np.asarray(spec["positions"], dtype=float), np.asarray(spec["masses"], dtype=float),
                            tuple(tuple(s) for s in spec["springs"]), spec.get("boundary", "free"))
    raise LatticeError(f"unknown lattice kind {kind!r}")


def reconstruction_error(lat: LatticeModel, modes: NormalModeSet) -> float:
    """Relative error of rebuilding the mass-weighted Hessian from its modes."""
    h = hessian(lat)
    inv_sqrt_m = 1.0 / np.sqrt(np.repeat(lat.masses, lat.dim))
    hw = h * inv_sqrt_m[:, None] * inv_sqrt_m[None, :]
    rebuilt = sum(m.omega ** 2 * np.outer(m.vector, m.vector) for m in modes.modes)
    return float(np.linalg.norm(hw - rebuilt) / np.linalg.norm(hw))


def mode_overlap_matrix(modes: NormalModeSet) -> np.ndarray:
    vecs = [m.vector for m in modes.modes + modes.zero_modes]
    v = np.column_stack(vecs)
    return v.T @ v


def pinned_oscillator(kappa: float = 1.0, mass: float = 1.0) -> LatticeModel:
    """Single mass tethered to a wall."""
    return LatticeModel(np.zeros((1, 1)), np.array([mass]), ((0, -1, kappa),), "pinned")


def scaled(lat: LatticeModel, kappa_factor: float = 1.0, mass_factor: float = 1.0) -> LatticeModel:
    return LatticeModel(lat.positions, lat.masses * mass_factor,
                        tuple((i, j, k * kappa_factor) for i, j, k in lat.springs), lat.boundary)


def sequence_widths(modes: NormalModeSet) -> np.ndarray:
    return np.array([mode_width(m, modes.hbar) for m in modes.modes])


__all__ = [
    "ClassicalityEnergies", "LatticeError", "LatticeModel", "Mode", "NormalModeSet", "PhononOccupancy",
    "classicality_energies", "hessian", "lattice_from_dict", "mode_overlap_matrix", "mode_width", "normal_modes",
    "oscillator_eigenfunction", "permutation_overlap", "phonon_amplitude", "pinned_oscillator",
    "reconstruction_error", "scaled", "sequence_widths", "symmetrized_amplitude", "write_mode_table",
]

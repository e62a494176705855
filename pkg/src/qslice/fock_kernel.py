"""Bosonic second quantization on coefficients keyed by sorted index tuples.

A state is a map from non-decreasing index tuples (the empty tuple is the
vacuum) to complex coefficients, truncated at ``max_total`` particles.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .lattice_phonon import NormalModeSet, PhononOccupancy, oscillator_eigenfunction


class FockError(ValueError):
    """Invalid mode index or truncation violation."""


@dataclass(frozen=True, eq=False)
class OccupancyCoefficients:
    """Immutable coefficient store.

    ``dropped`` is the squared weight discarded by the operation that produced
    this store because it would have exceeded ``max_total``.
    """

    terms: Mapping[tuple[int, ...], complex]
    mode_count: int
    max_total: int
    dropped: float = 0.0

    def __post_init__(self):
        if self.mode_count < 1 or self.max_total < 0:
            raise FockError("mode_count must be >= 1 and max_total >= 0")
        clean = {}
        for key, val in dict(self.terms).items():
            key = tuple(int(i) for i in key)
            if any(b < a for a, b in zip(key, key[1:])):
                raise FockError(f"key {key} is not sorted")
            if any(not 0 <= i < self.mode_count for i in key):
                raise FockError(f"key {key} uses an invalid mode")
            if len(key) > self.max_total:
                raise FockError(f"key {key} exceeds max_total={self.max_total}")
            val = complex(val)
            if val != 0:
                clean[key] = clean.get(key, 0) + val
        object.__setattr__(self, "terms", dict(sorted(clean.items(), key=lambda kv: (len(kv[0]), kv[0]))))

    @classmethod
    def vacuum(cls, mode_count: int, max_total: int) -> "OccupancyCoefficients":
        return cls({(): 1.0}, mode_count, max_total)

    @classmethod
    def basis(cls, key, mode_count: int, max_total: int) -> "OccupancyCoefficients":
        return cls({tuple(sorted(key)): 1.0}, mode_count, max_total)

    def with_terms(self, terms: Mapping, dropped: float = 0.0) -> "OccupancyCoefficients":
        return OccupancyCoefficients(terms, self.mode_count, self.max_total, dropped)

    def __len__(self) -> int:
        return len(self.terms)

    def norm2(self) -> float:
        return math.fsum(abs(v) ** 2 for v in self.terms.values())

    def __sub__(self, other: "OccupancyCoefficients") -> "OccupancyCoefficients":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) - v
        return self.with_terms(out)

    def __add__(self, other: "OccupancyCoefficients") -> "OccupancyCoefficients":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return self.with_terms(out)

    def scaled(self, factor: complex) -> "OccupancyCoefficients":
        return self.with_terms({k: v * factor for k, v in self.terms.items()})

    def max_abs(self) -> float:
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def max_n(self) -> int:
        return max((len(k) for k in self.terms), default=0)


@dataclass(frozen=True)
class OccupancyVector:
    n: Mapping[int, int] = field(default_factory=dict)

    @classmethod
    def from_key(cls, key) -> "OccupancyVector":
        counts: dict[int, int] = {}
        for i in key:
            counts[i] = counts.get(i, 0) + 1
        return cls(counts)

    def to_key(self) -> tuple[int, ...]:
        return tuple(i for i in sorted(self.n) for _ in range(self.n[i]))


def _check_mode(s: int, c: OccupancyCoefficients) -> None:
    if not 0 <= s < c.mode_count:
        raise FockError(f"mode {s} outside 0..{c.mode_count - 1}")


def insert_index(key: tuple[int, ...], s: int) -> tuple[int, ...]:
    """Insert ``s`` into a sorted key, keeping it sorted."""
    pos = bisect.bisect_right(key, s)
    return key[:pos] + (s,) + key[pos:]


def remove_index(key: tuple[int, ...], s: int) -> tuple[int, ...]:
    pos = bisect.bisect_left(key, s)
    return key[:pos] + key[pos + 1:]


def create(s: int, c: OccupancyCoefficients) -> OccupancyCoefficients:
    """Apply the creation operator for mode ``s``."""
    _check_mode(s, c)
    out: dict[tuple[int, ...], complex] = {}
    dropped = []
    for key, val in c.terms.items():
        factor = math.sqrt(key.count(s) + 1)
        if len(key) + 1 > c.max_total:
            dropped.append(abs(val * factor) ** 2)
            continue
        new = insert_index(key, s)
        out[new] = out.get(new, 0) + val * factor
    return c.with_terms(out, math.fsum(dropped))


def annihilate(s: int, c: OccupancyCoefficients) -> OccupancyCoefficients:
    """Apply the annihilation operator for mode ``s``; terms without ``s`` vanish."""
    _check_mode(s, c)
    out: dict[tuple[int, ...], complex] = {}
    for key, val in c.terms.items():
        n_s = key.count(s)
        if n_s == 0:
            continue
        new = remove_index(key, s)
        out[new] = out.get(new, 0) + val * math.sqrt(n_s)
    return c.with_terms(out)


def number(s: int, c: OccupancyCoefficients) -> OccupancyCoefficients:
    """Number operator; each key is scaled by its count of ``s``."""
    _check_mode(s, c)
    return c.with_terms({k: v * k.count(s) for k, v in c.terms.items()})


def commutator_check(s: int, t: int, c: OccupancyCoefficients) -> float:
    """Largest coefficient of (a_s a†_t - a†_t a_s - delta_st) applied to ``c``."""
    _check_mode(s, c)
    _check_mode(t, c)
    if c.max_n() > c.max_total - 1:
        raise FockError("state reaches the truncation edge; the commutator is not defined there")
    res = annihilate(s, create(t, c)) - create(t, annihilate(s, c))
    if s == t:
        res = res - c
    return res.max_abs()


def commutator_aa(s: int, t: int, c: OccupancyCoefficients) -> float:
    """Largest coefficient of [a_s, a_t] applied to ``c``."""
    return (annihilate(s, annihilate(t, c)) - annihilate(t, annihilate(s, c))).max_abs()


def commutator_cc(s: int, t: int, c: OccupancyCoefficients) -> float:
    """Largest coefficient of [a†_s, a†_t] applied to ``c``; needs two levels of headroom."""
    if c.max_n() > c.max_total - 2:
        raise FockError("state is too close to the truncation edge")
    return (create(s, create(t, c)) - create(t, create(s, c))).max_abs()


def all_keys(mode_count: int, max_total: int) -> list[tuple[int, ...]]:
    keys = []
    for n in range(max_total + 1):
        keys.extend(itertools.combinations_with_replacement(range(mode_count), n))
    return keys


def random_state(rng: np.random.Generator, mode_count: int, max_n: int, max_total: int) -> OccupancyCoefficients:
    keys = all_keys(mode_count, max_n)
    vals = rng.normal(size=len(keys)) + 1j * rng.normal(size=len(keys))
    return OccupancyCoefficients(dict(zip(keys, vals)), mode_count, max_total)


@dataclass(frozen=True)
class FockCheckReport:
    trials: int
    max_commutator: float
    max_aa: float
    max_cc: float
    number_exact: bool
    create_injective: bool
    ladder_identity: float

    @property
    def passed(self) -> bool:
        return (self.max_commutator < 1e-12 and self.max_aa < 1e-12 and self.max_cc < 1e-12
                and self.number_exact and self.create_injective and self.ladder_identity < 1e-12)


def fock_battery(mode_count: int = 4, max_n: int = 5, trials: int = 100, seed: int = 0) -> FockCheckReport:
    """Run the commutator and number-operator properties on random states.

    States occupy N <= max_n and live in a store truncated at max_n + 2, so
    every operator product stays away from the truncation edge.
    """
    rng = np.random.default_rng(seed)
    max_total = max_n + 2
    worst = worst_aa = worst_cc = worst_ladder = 0.0
    for _ in range(trials):
        c = random_state(rng, mode_count, max_n, max_total)
        for s in range(mode_count):
            for t in range(mode_count):
                worst = max(worst, commutator_check(s, t, c))
                worst_aa = max(worst_aa, commutator_aa(s, t, c))
                worst_cc = max(worst_cc, commutator_cc(s, t, c))
            lhs = annihilate(s, create(s, c))
            rhs = number(s, c) + c
            worst_ladder = max(worst_ladder, (lhs - rhs).max_abs())
    exact = True
    images = set()
    for key in all_keys(mode_count, max_n):
        basis = OccupancyCoefficients.basis(key, mode_count, max_total)
        for s in range(mode_count):
            out = number(s, basis)
            n_s = key.count(s)
            expected = {key: complex(n_s)} if n_s else {}
            exact &= out.terms == expected
        images.add(tuple(create(0, basis).terms))
    injective = len(images) == len(all_keys(mode_count, max_n))
    return FockCheckReport(trials, worst, worst_aa, worst_cc, exact, injective, worst_ladder)


def phonon_raise(modes: NormalModeSet, s: int, occ: PhononOccupancy) -> tuple[PhononOccupancy, float]:
    """Raise mode ``s`` by one quantum; returns the new occupancy and sqrt(n_s + 1)."""
    if not 0 <= s < len(modes.modes):
        raise FockError(f"mode {s} is not a retained vibrational mode")
    n = occ.get(s)
    return occ.with_count(s, n + 1), math.sqrt(n + 1)


def raising_kernel(n: int, mass: float, omega: float, hbar: float = 1.0):
    """Rank-one kernel K(u, u') = f_{n+1}(u) f_n(u') mapping f_n onto f_{n+1}."""
    def kernel(u, up):
        return np.multiply.outer(oscillator_eigenfunction(n + 1, u, mass, omega, hbar),
                                 oscillator_eigenfunction(n, up, mass, omega, hbar))
    return kernel


def kernel_raise_check(n: int, mass: float = 1.0, omega: float = 1.0, hbar: float = 1.0,
                       points: int = 4001, h: float = 1e-3) -> tuple[float, float]:
    """Compare the kernel raise with the ladder operator on a pinned oscillator.

    Returns ``(kernel_factor, ladder_overlap)``. The kernel route applies
    sqrt(n+1) K to f_n by quadrature and projects on f_{n+1}. The ladder route
    applies (xi - d/dxi)/sqrt(2) with a fourth-order finite difference and
    projects on f_{n+1}. Both should equal sqrt(n+1).
    """
    width = math.sqrt(hbar / (mass * omega))
    half = width * (math.sqrt(2 * n + 3) + 12)
    u = np.linspace(-half, half, points)
    du = u[1] - u[0]
    weights = np.full(points, du)
    weights[0] = weights[-1] = du / 2
    f_n = oscillator_eigenfunction(n, u, mass, omega, hbar)
    f_up = oscillator_eigenfunction(n + 1, u, mass, omega, hbar)
    factor = math.sqrt(n + 1)
    raised = factor * raising_kernel(n, mass, omega, hbar)(u, u) @ (weights * f_n)
    kernel_overlap = float(np.sum(weights * f_up * raised))

    def f(x):
        return oscillator_eigenfunction(n, x, mass, omega, hbar)

    dfdu = (-f(u + 2 * h) + 8 * f(u + h) - 8 * f(u - h) + f(u - 2 * h)) / (12 * h)
    xi = u / width
    ladder = (xi * f_n - width * dfdu) / math.sqrt(2)
    ladder_overlap = float(np.sum(weights * f_up * ladder))
    return kernel_overlap, ladder_overlap


def write_coefficients(c: OccupancyCoefficients, path) -> None:
    """Dump coefficients as N, dash-joined key, re, im."""
    lines = ["N,key,re,im"]
    for key, val in c.terms.items():
        lines.append(f"{len(key)},{'-'.join(str(i) for i in key)},{val.real!r},{val.imag!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_coefficients(path, mode_count: int, max_total: int) -> OccupancyCoefficients:
    terms = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
        if not line.strip():
            continue
        n, key, re, im = line.split(",")
        idx = tuple(int(i) for i in key.split("-")) if key else ()
        if len(idx) != int(n):
            raise FockError(f"row {line!r} has inconsistent N")
        terms[idx] = complex(float(re), float(im))
    return OccupancyCoefficients(terms, mode_count, max_total)

"""Triadic-tree geometry and the measures built on it.

The middle-third construction removes the open middle third of every closed
interval it keeps.  Geometry is exact: interval endpoints are integer
numerators over 3^k, so there is no floating-point drift anywhere in the
tree.  Three measures live on this geometry:

* the equidistributed quadrature of the Cantor measure at depth N
  (2^N atoms of mass 2^-N at cylinder midpoints),
* the gap-center atomic measure (one atom per removed gap, generation
  weights ``sigma_weight``),
* the zero-placed variant, with atoms moved to tabulated field zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping

import numpy as np

from .errors import (
    DependencyError,
    InvalidIndexError,
    NoSiblingError,
    ResourceLimitError,
)
from .sums import exact_sum

LN2 = math.log(2.0)
LN3 = math.log(3.0)

MAX_QUADRATURE_DEPTH = 24
MIN_EXPONENT = 1.05
MAX_EXPONENT = 21.0  # admits duals of the CLI range [1.05, 20]


@dataclass(frozen=True)
class TriadicIndex:
    """Position (k, j) in the triadic tree: generation k >= 0, 1 <= j <= 2^k."""

    k: int
    j: int

    def __post_init__(self):
        if self.k < 0:
            raise InvalidIndexError(f"generation must be >= 0, got {self.k}")
        if not 1 <= self.j <= 2**self.k:
            raise InvalidIndexError(
                f"position {self.j} outside [1, 2^{self.k}] at generation {self.k}"
            )

    def parent(self) -> "TriadicIndex":
        if self.k == 0:
            raise InvalidIndexError("the root interval has no parent")
        return TriadicIndex(self.k - 1, (self.j + 1) // 2)

    def sibling(self) -> "TriadicIndex":
        if self.k == 0:
            raise NoSiblingError("the root interval has no sibling")
        return TriadicIndex(self.k, self.j + 1 if self.j % 2 == 1 else self.j - 1)

    def mirror(self) -> "TriadicIndex":
        """Image under x -> 1 - x."""
        return TriadicIndex(self.k, 2**self.k + 1 - self.j)

    def left_numerator(self) -> int:
        """Numerator n of the interval's left endpoint n / 3^k."""
        n = 0
        for bit in range(self.k - 1, -1, -1):
            n = 3 * n + 2 * ((self.j - 1) >> bit & 1)
        return n


@dataclass(frozen=True)
class Interval:
    """An interval with exact rational endpoints.

    ``closed`` distinguishes kept intervals (closed, endpoints included)
    from removed gaps (open); membership tests honor the kind.
    """

    left: Fraction
    right: Fraction
    closed: bool = True

    def __post_init__(self):
        if not self.left < self.right:
            raise InvalidIndexError(f"empty interval [{self.left}, {self.right}]")

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    @property
    def center(self) -> Fraction:
        return (self.left + self.right) / 2

    @property
    def left_float(self) -> float:
        return float(self.left)

    @property
    def right_float(self) -> float:
        return float(self.right)

    @property
    def center_float(self) -> float:
        return float(self.center)

    @property
    def length_float(self) -> float:
        return float(self.length)

    def contains(self, x: float) -> bool:
        if self.closed:
            return self.left_float <= x <= self.right_float
        return self.left_float < x < self.right_float

    def distance(self, x: float) -> float:
        """Distance from x to the interval (0 inside)."""
        return max(self.left_float - x, x - self.right_float, 0.0)

    def tripled(self) -> "Interval":
        """Concentric closed interval of triple length."""
        return Interval(2 * self.left - self.right, 2 * self.right - self.left)

    def mirrored(self) -> "Interval":
        """Image under x -> 1 - x, same kind."""
        return Interval(1 - self.right, 1 - self.left, self.closed)


def interval(idx: TriadicIndex) -> Interval:
    """The j-th generation-k kept interval, length exactly 3^-k."""
    n = idx.left_numerator()
    scale = 3**idx.k
    return Interval(Fraction(n, scale), Fraction(n + 1, scale))


def gap(idx: TriadicIndex) -> Interval:
    """The removed open middle third of interval(idx), length 3^-(k+1)."""
    n = idx.left_numerator()
    scale = 3 ** (idx.k + 1)
    return Interval(Fraction(3 * n + 1, scale), Fraction(3 * n + 2, scale), closed=False)


def sibling(idx: TriadicIndex) -> TriadicIndex:
    """The other kept child of the same parent (undefined at the root)."""
    return idx.sibling()


def omega_mass(k: int) -> Fraction:
    """Mass 2^-k that the Cantor measure gives every generation-k interval."""
    if k < 0:
        raise InvalidIndexError(f"generation must be >= 0, got {k}")
    return Fraction(1, 2**k)


@dataclass(frozen=True)
class ExponentConfig:
    """Exponent pair (p, p') with the test-family parameter delta."""

    p: float
    p_prime: float
    delta: float = 1.0

    def __post_init__(self):
        if not MIN_EXPONENT <= self.p <= MAX_EXPONENT:
            raise InvalidIndexError(
                f"p={self.p} outside [{MIN_EXPONENT}, {MAX_EXPONENT}]"
            )
        if self.delta <= 0:
            raise InvalidIndexError(f"delta must be positive, got {self.delta}")
        defect = abs(1.0 / self.p + 1.0 / self.p_prime - 1.0)
        if defect > 1e-14:
            raise InvalidIndexError(
                f"1/p + 1/p' = 1 violated by {defect:.3e} for p={self.p}"
            )

    @classmethod
    def from_p(cls, p: float, delta: float = 1.0) -> "ExponentConfig":
        return cls(p=float(p), p_prime=float(p) / (float(p) - 1.0), delta=float(delta))

    def dual(self) -> "ExponentConfig":
        """Swap (p, p'); an involution."""
        return ExponentConfig(p=self.p_prime, p_prime=self.p, delta=self.delta)


def sigma_log_weight(cfg: ExponentConfig, k: int) -> float:
    """log of the generation-k gap weight 2^(k(p'-1)) 3^(-k p')."""
    if k < 0:
        raise InvalidIndexError(f"generation must be >= 0, got {k}")
    return k * ((cfg.p_prime - 1.0) * LN2 - cfg.p_prime * LN3)


def sigma_weight(cfg: ExponentConfig, k: int) -> float:
    """Generation-k gap weight; underflow clamps to the smallest subnormal
    (the true magnitude stays available through sigma_log_weight)."""
    w = math.exp(sigma_log_weight(cfg, k))
    return w if w > 0.0 else 5e-324


def mass_ratio(cfg: ExponentConfig) -> float:
    """Ratio (2/3)^p' of consecutive per-generation layer masses 2^k s^k."""
    return math.exp(cfg.p_prime * (LN2 - LN3))


def sigma_total_mass(cfg: ExponentConfig, L: int) -> float:
    """Closed form for the total mass of the depth-L gap measure."""
    r = mass_ratio(cfg)
    return (1.0 - r ** (L + 1)) / (1.0 - r)


def sigma_interval_mass(cfg: ExponentConfig, k: int, L: int) -> float:
    """Closed form for the depth-L gap-measure mass of a generation-k interval."""
    if L < k:
        return 0.0
    r = mass_ratio(cfg)
    return sigma_weight(cfg, k) * (1.0 - r ** (L - k + 1)) / (1.0 - r)


@dataclass(frozen=True)
class Provenance:
    kind: str  # "omega-quadrature" | "sigma-dot" | "sigma-zeroed" | "custom"
    depth: int | None = None
    cfg: ExponentConfig | None = None
    note: str = ""

    def __str__(self) -> str:
        if self.kind == "omega-quadrature":
            return f"omega-quadrature({self.depth})"
        if self.kind in ("sigma-dot", "sigma-zeroed") and self.cfg is not None:
            return f"{self.kind}(p={self.cfg.p:g}, L={self.depth})"
        return self.kind if not self.note else f"{self.kind}({self.note})"


@dataclass(frozen=True)
class Atom:
    position: float
    mass: float
    generation: int
    index: TriadicIndex
    log_mass: float


class AtomicMeasure:
    """Finite positive atomic measure, positions sorted strictly increasing.

    Immutable after construction; all arrays are read-only and safe to share
    across threads.
    """

    __slots__ = (
        "positions",
        "masses",
        "log_masses",
        "generations",
        "indices",
        "provenance",
        "total_mass",
    )

    def __init__(
        self,
        positions: np.ndarray,
        masses: np.ndarray,
        generations: np.ndarray,
        indices: np.ndarray,
        provenance: Provenance,
        log_masses: np.ndarray | None = None,
    ):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        masses = np.ascontiguousarray(masses, dtype=np.float64)
        generations = np.ascontiguousarray(generations, dtype=np.int32)
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        if not (positions.size == masses.size == generations.size == indices.size):
            raise InvalidIndexError("atom arrays must share one length")
        if positions.size and not np.all(np.diff(positions) > 0.0):
            raise InvalidIndexError("atom positions must be strictly increasing")
        if np.any(masses <= 0.0):
            raise InvalidIndexError("atom masses must be positive")
        if log_masses is None:
            log_masses = np.log(masses)
        log_masses = np.ascontiguousarray(log_masses, dtype=np.float64)
        for arr in (positions, masses, generations, indices, log_masses):
            arr.setflags(write=False)
        self.positions = positions
        self.masses = masses
        self.log_masses = log_masses
        self.generations = generations
        self.indices = indices
        self.provenance = provenance
        self.total_mass = exact_sum(masses)

    def __len__(self) -> int:
        return self.positions.size

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AtomicMeasure)
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.masses, other.masses)
            and np.array_equal(self.generations, other.generations)
            and np.array_equal(self.indices, other.indices)
        )

    def atom(self, i: int) -> Atom:
        return Atom(
            position=float(self.positions[i]),
            mass=float(self.masses[i]),
            generation=int(self.generations[i]),
            index=TriadicIndex(int(self.generations[i]), int(self.indices[i])),
            log_mass=float(self.log_masses[i]),
        )

    def atoms(self) -> Iterator[Atom]:
        return (self.atom(i) for i in range(len(self)))

    def slice_range(self, lo: float, hi: float, open_ends: bool) -> slice:
        """Index slice of atoms inside [lo, hi] (or (lo, hi) when open)."""
        if open_ends:
            i0 = int(np.searchsorted(self.positions, lo, side="right"))
            i1 = int(np.searchsorted(self.positions, hi, side="left"))
        else:
            i0 = int(np.searchsorted(self.positions, lo, side="left"))
            i1 = int(np.searchsorted(self.positions, hi, side="right"))
        return slice(i0, max(i0, i1))


@lru_cache(maxsize=32)
def cantor_numerators(k: int) -> np.ndarray:
    """Left-endpoint numerators (over 3^k) of all generation-k intervals,
    in position order."""
    if k == 0:
        n = np.zeros(1, dtype=np.int64)
    else:
        prev = cantor_numerators(k - 1)
        n = np.empty(2 * prev.size, dtype=np.int64)
        n[0::2] = 3 * prev
        n[1::2] = 3 * prev + 2
    n.setflags(write=False)
    return n


def _build_quadrature(N: int) -> AtomicMeasure:
    nums = cantor_numerators(N)
    positions = (2 * nums + 1).astype(np.float64) / (2.0 * 3.0**N)
    count = 2**N
    masses = np.full(count, 2.0**-N)
    log_masses = np.full(count, -N * LN2)
    generations = np.full(count, N, dtype=np.int32)
    indices = np.arange(1, count + 1, dtype=np.int64)
    mu = AtomicMeasure(
        positions,
        masses,
        generations,
        indices,
        Provenance("omega-quadrature", depth=N),
        log_masses=log_masses,
    )
    assert len(mu) == count and abs(mu.total_mass - 1.0) <= 1e-14
    return mu


@lru_cache(maxsize=6)
def _cached_quadrature(N: int) -> AtomicMeasure:
    return _build_quadrature(N)


def cantor_quadrature(N: int) -> AtomicMeasure:
    """Depth-N Cantor quadrature: 2^N atoms of mass 2^-N at cylinder
    midpoints, total mass 1, mirror-symmetric about 1/2."""
    if N < 0:
        raise InvalidIndexError(f"depth must be >= 0, got {N}")
    if N > MAX_QUADRATURE_DEPTH:
        raise ResourceLimitError(
            f"quadrature depth {N} exceeds the limit {MAX_QUADRATURE_DEPTH}"
        )
    if N >= 22:
        return _build_quadrature(N)  # too large to keep cached
    return _cached_quadrature(N)


def gap_centers(k: int) -> np.ndarray:
    """Centers of all generation-k gaps (= centers of their intervals)."""
    nums = cantor_numerators(k)
    return (2 * nums + 1).astype(np.float64) / (2.0 * 3.0**k)


def sigma_truncated(
    cfg: ExponentConfig,
    L: int,
    variant: str = "centered",
    zeros: Mapping[tuple[int, int], float] | None = None,
) -> AtomicMeasure:
    """Gap atomic measure truncated at generation L.

    ``centered`` places atoms at gap centers; ``zeroed`` at tabulated field
    zeros, which must cover every generation <= L.
    """
    if L < 0:
        raise InvalidIndexError(f"truncation depth must be >= 0, got {L}")
    if variant not in ("centered", "zeroed"):
        raise InvalidIndexError(f"unknown variant {variant!r}")
    pos_parts: list[np.ndarray] = []
    mass_parts: list[np.ndarray] = []
    logm_parts: list[np.ndarray] = []
    gen_parts: list[np.ndarray] = []
    idx_parts: list[np.ndarray] = []
    for k in range(L + 1):
        count = 2**k
        if variant == "centered":
            pos = gap_centers(k)
        else:
            if zeros is None:
                raise DependencyError("zeroed variant requires a zero table")
            try:
                pos = np.array(
                    [zeros[(k, j)] for j in range(1, count + 1)], dtype=np.float64
                )
            except KeyError as missing:
                raise DependencyError(
                    f"zero table missing entry {missing.args[0]} (need all k <= {L})"
                ) from None
        nums = cantor_numerators(k)
        scale = 3.0 ** (k + 1)
        inside = ((3 * nums + 1) / scale < pos) & (pos < (3 * nums + 2) / scale)
        if not inside.all():
            raise DependencyError(
                f"generation-{k} atom positions stray outside their gaps"
            )
        logw = sigma_log_weight(cfg, k)
        pos_parts.append(pos)
        mass_parts.append(np.full(count, sigma_weight(cfg, k)))
        logm_parts.append(np.full(count, logw))
        gen_parts.append(np.full(count, k, dtype=np.int32))
        idx_parts.append(np.arange(1, count + 1, dtype=np.int64))
    positions = np.concatenate(pos_parts)
    order = np.argsort(positions, kind="stable")
    kind = "sigma-dot" if variant == "centered" else "sigma-zeroed"
    return AtomicMeasure(
        positions[order],
        np.concatenate(mass_parts)[order],
        np.concatenate(gen_parts)[order],
        np.concatenate(idx_parts)[order],
        Provenance(kind, depth=L, cfg=cfg),
        log_masses=np.concatenate(logm_parts)[order],
    )


def restrict(mu: AtomicMeasure, I: Interval) -> AtomicMeasure:
    """Atoms of mu inside I; endpoint atoms included only for closed I."""
    sl = mu.slice_range(I.left_float, I.right_float, open_ends=not I.closed)
    return AtomicMeasure(
        mu.positions[sl],
        mu.masses[sl],
        mu.generations[sl],
        mu.indices[sl],
        mu.provenance,
        log_masses=mu.log_masses[sl],
    )

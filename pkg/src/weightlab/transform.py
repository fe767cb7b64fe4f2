"""Field evaluation for atomic measures and zero location inside gaps.

The field of a measure nu at a point x off its support is
``sum_a mass_a / (pos_a - x)``.  For the Cantor quadrature the evaluation
carries a rigorous error bound: moving each cylinder's mass to its midpoint
changes the kernel by at most ``mass * halfwidth / dist^2`` per cylinder,
with dist the clearance to the cylinder.  Between consecutive atoms the
field is strictly increasing and crosses zero exactly once per gap, which
bisection exploits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .cantor import (
    AtomicMeasure,
    Interval,
    TriadicIndex,
    cantor_numerators,
    cantor_quadrature,
    gap,
    restrict,
)
from .errors import (
    NumericalFailureError,
    ResourceLimitError,
    SingularityError,
    TooCloseError,
)

MIN_SEPARATION = 1e-300
MAX_TABLE_GENERATION = 14
# Gap generation k needs quadrature depth >= k+1 to expose the gap; one more
# step keeps the flanking cylinders clear of the bracket endpoints.
MIN_DEPTH_MARGIN = 2
# Relative inflation of reported error bounds, absorbing the rounding of
# node positions and distance arithmetic (all inputs are exact rationals
# rounded once to double, so 1e-12 is generous).
BOUND_SLACK = 1.0 + 1e-12
EDGE_DISTANCE_FLOOR = 1e-6  # fraction of gap length; closer zeros are flagged


@dataclass(frozen=True)
class CertifiedValue:
    value: float
    error_bound: float


def cauchy_sum_many(mu: AtomicMeasure, xs: np.ndarray) -> np.ndarray:
    """Field of mu at each point of xs; raises on atom collision."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if len(mu) == 0:
        return np.zeros(xs.shape[0])
    vals, coll = kernels.cauchy_many(mu.positions, mu.masses, xs, MIN_SEPARATION)
    bad = np.flatnonzero(coll >= 0)
    if bad.size:
        i = int(bad[0])
        a = int(coll[i])
        raise SingularityError(float(xs[i]), a, float(mu.positions[a]))
    return vals


def cauchy_sum(mu: AtomicMeasure, x: float) -> float:
    """Field of mu at a single point, compensated ascending-order sum."""
    return float(cauchy_sum_many(mu, np.array([x]))[0])


def h_indicator(mu: AtomicMeasure, I: Interval, x: float) -> float:
    """Field of mu restricted to I, evaluated at x."""
    return cauchy_sum(restrict(mu, I), x)


def hilbert_omega_many(xs: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Cantor-quadrature field and certified bounds at each point of xs."""
    mu = cantor_quadrature(N)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    half = 0.5 * 3.0**-N
    vals, bounds, clearance = kernels.hilbert_bound_uniform(
        mu.positions, 2.0**-N, xs, half
    )
    # a few ulps of slack: exact-boundary points must not slip through on
    # rounding of the midpoint/halfwidth arithmetic
    bad = np.flatnonzero(clearance <= 4.0 * np.spacing(np.maximum(np.abs(xs), 1.0)))
    if bad.size:
        raise TooCloseError(
            f"point {xs[int(bad[0])]!r} lies inside or touches a depth-{N} cylinder"
        )
    return vals, bounds * BOUND_SLACK


def hilbert_omega(x: float, N: int) -> CertifiedValue:
    """Cantor-quadrature field at x with a rigorous truncation bound."""
    vals, bounds = hilbert_omega_many(np.array([x]), N)
    return CertifiedValue(float(vals[0]), float(bounds[0]))


def _gap_bounds(k: int, js: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nums = cantor_numerators(k)[js - 1]
    scale = 3.0 ** (k + 1)
    return (3 * nums + 1) / scale, (3 * nums + 2) / scale


def _bisect_gaps(
    k: int, js: np.ndarray, tol: float, N: int
) -> tuple[np.ndarray, np.ndarray]:
    """Zeros of the depth-N quadrature field in the chosen generation-k gaps.

    Lockstep over gaps: bracket [left + 1e-3 g, right - 1e-3 g], geometric
    expansion toward the edges if a sign is wrong (the field diverges to
    -inf/+inf there), bisection to tol * gap length (floored at a few float
    spacings), then up to five secant polish steps.  Returns (zeros,
    residuals); residuals are compensated field magnitudes at the zeros.
    """
    if N < k + 1:
        raise TooCloseError(
            f"depth {N} cannot expose generation-{k} gaps (need N >= {k + 1})"
        )
    nodes = cantor_quadrature(N).positions
    left, right = _gap_bounds(k, js)
    g = right - left

    a = left + 1e-3 * g
    b = right - 1e-3 * g
    fa = kernels.cauchy_sign_uniform(nodes, a)
    fb = kernels.cauchy_sign_uniform(nodes, b)
    for _ in range(60):
        bad_a = fa >= 0.0
        bad_b = fb <= 0.0
        if not bad_a.any() and not bad_b.any():
            break
        a = np.where(bad_a, left + (a - left) * 0.25, a)
        b = np.where(bad_b, right - (right - b) * 0.25, b)
        if bad_a.any():
            fa = np.where(bad_a, kernels.cauchy_sign_uniform(nodes, a), fa)
        if bad_b.any():
            fb = np.where(bad_b, kernels.cauchy_sign_uniform(nodes, b), fb)
    else:
        raise NumericalFailureError(
            f"no sign change bracketed in generation-{k} gaps at depth {N}"
        )

    tol_abs = np.maximum(tol * g, 8.0 * np.spacing(np.maximum(np.abs(a), np.abs(b))))
    for _ in range(80):
        active = (b - a) > tol_abs
        if not active.any():
            break
        mid = 0.5 * (a + b)
        # a strictly interior midpoint may be impossible at float resolution
        active &= (mid > a) & (mid < b)
        if not active.any():
            break
        fm = kernels.cauchy_sign_uniform(nodes, mid)
        go_left = active & (fm < 0.0)
        go_right = active & ~go_left
        a = np.where(go_left, mid, a)
        fa = np.where(go_left, fm, fa)
        b = np.where(go_right, mid, b)
        fb = np.where(go_right, fm, fb)

    m0 = 2.0**-N
    z = 0.5 * (a + b)
    fz, _ = kernels.cauchy_many_uniform(nodes, m0, z, MIN_SEPARATION)
    best_z = z.copy()
    best_f = np.abs(fz)
    fa_m = fa * m0
    fb_m = fb * m0
    for _ in range(5):
        denom = fb_m - fa_m
        with np.errstate(divide="ignore", invalid="ignore"):
            x = b - fb_m * (b - a) / denom
        x = np.where((x > a) & (x < b) & np.isfinite(x), x, 0.5 * (a + b))
        fx, _ = kernels.cauchy_many_uniform(nodes, m0, x, MIN_SEPARATION)
        improved = np.abs(fx) < best_f
        best_z = np.where(improved, x, best_z)
        best_f = np.where(improved, np.abs(fx), best_f)
        go_left = fx < 0.0
        a = np.where(go_left, x, a)
        fa_m = np.where(go_left, fx, fa_m)
        b = np.where(go_left, b, x)
        fb_m = np.where(go_left, fb_m, fx)
    return best_z, best_f


def find_zero(
    idx: TriadicIndex, tol: float = 1e-12, N: int | None = None
) -> tuple[float, float]:
    """Zero of the depth-N quadrature field inside gap(idx).

    Returns (position, residual); N defaults to max(12, k + 2).
    """
    if N is None:
        N = max(12, idx.k + MIN_DEPTH_MARGIN)
    zs, res = _bisect_gaps(idx.k, np.array([idx.j], dtype=np.int64), tol, N)
    z = float(zs[0])
    if not gap(idx).contains(z):
        raise NumericalFailureError(f"zero {z!r} escaped gap ({idx.k},{idx.j})")
    return z, float(res[0])


@dataclass(frozen=True)
class ZeroEntry:
    z: float
    residual: float
    depth: int


class ZeroTable:
    """Tabulated gap zeros for all generations up to max_generation.

    Invariants validated on construction: every zero strictly inside its
    gap with relative edge clearance >= 1e-6 (closer zeros would invalidate
    downstream distance computations and raise), residuals within the
    adaptive tolerance max(1e-10, 2 * field error bound), and mirror
    symmetry within twice the position tolerance.
    """

    def __init__(self, entries: dict[tuple[int, int], ZeroEntry], tol: float = 1e-12):
        self.entries = dict(entries)
        self.tol = tol
        gens = sorted({k for k, _ in self.entries})
        if gens != list(range(len(gens))):
            raise NumericalFailureError("zero table generations must be contiguous")
        self.max_generation = len(gens) - 1
        for k in gens:
            if sum(1 for kk, _ in self.entries if kk == k) != 2**k:
                raise NumericalFailureError(f"zero table incomplete at generation {k}")
        self._validate()

    def _validate(self) -> None:
        for k in range(self.max_generation + 1):
            js = np.arange(1, 2**k + 1, dtype=np.int64)
            left, right = _gap_bounds(k, js)
            g = right - left
            z = np.array([self.entries[(k, int(j))].z for j in js])
            rel_left = (z - left) / g
            rel_right = (right - z) / g
            if (rel_left <= EDGE_DISTANCE_FLOOR).any() or (
                rel_right <= EDGE_DISTANCE_FLOOR
            ).any():
                raise NumericalFailureError(
                    f"a generation-{k} zero sits within {EDGE_DISTANCE_FLOOR:g} "
                    "of its gap edge"
                )
            # the defect sums positions of order one, so it cannot resolve
            # below a few ulps of 1 regardless of the per-gap tolerance
            tol_abs = np.maximum(self.tol * g, 8.0 * np.spacing(right))
            defect = np.abs(z + z[::-1] - 1.0)
            if (defect > 2.0 * tol_abs + 8.0 * np.spacing(1.0)).any():
                raise NumericalFailureError(
                    f"mirror symmetry defect {defect.max():.3e} at generation {k}"
                )

    def position(self, k: int, j: int) -> float:
        return self.entries[(k, j)].z

    def __contains__(self, kj: tuple[int, int]) -> bool:
        return kj in self.entries

    def covers(self, L: int) -> bool:
        return L <= self.max_generation

    def position_map(self) -> dict[tuple[int, int], float]:
        return {kj: e.z for kj, e in self.entries.items()}

    def mirror_defect(self) -> float:
        return max(
            abs(e.z + self.entries[(k, 2**k + 1 - j)].z - 1.0)
            for (k, j), e in self.entries.items()
        )

    def min_edge_distance(self) -> float:
        """Smallest observed zero-to-gap-edge distance, relative to gap length."""
        worst = np.inf
        for k in range(self.max_generation + 1):
            js = np.arange(1, 2**k + 1, dtype=np.int64)
            left, right = _gap_bounds(k, js)
            g = right - left
            z = np.array([self.entries[(k, int(j))].z for j in js])
            worst = min(worst, ((z - left) / g).min(), ((right - z) / g).min())
        return float(worst)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "j", "z", "residual", "depth"])
            for (k, j) in sorted(self.entries):
                e = self.entries[(k, j)]
                writer.writerow([k, j, f"{e.z:.17g}", f"{e.residual:.17g}", e.depth])

    @classmethod
    def from_csv(cls, path: str | Path, tol: float = 1e-12) -> "ZeroTable":
        entries: dict[tuple[int, int], ZeroEntry] = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                entries[(int(row["k"]), int(row["j"]))] = ZeroEntry(
                    float(row["z"]), float(row["residual"]), int(row["depth"])
                )
        return cls(entries, tol=tol)


def zero_table(
    max_generation: int, tol: float = 1e-12, depth: int = 12
) -> ZeroTable:
    """Complete zero table for all gaps with k <= max_generation.

    ``depth`` is the base quadrature depth; generation k is located at
    depth max(depth, k + 2), recorded per entry.  Capped at generation 14
    (2^15 - 1 zeros); beyond that the bisection cost explodes.
    """
    if max_generation < 0:
        raise NumericalFailureError("max_generation must be >= 0")
    if max_generation > MAX_TABLE_GENERATION:
        raise ResourceLimitError(
            f"zero table generation {max_generation} exceeds the limit "
            f"{MAX_TABLE_GENERATION}"
        )
    entries: dict[tuple[int, int], ZeroEntry] = {}
    for k in range(max_generation + 1):
        N_k = max(depth, k + MIN_DEPTH_MARGIN)
        js = np.arange(1, 2**k + 1, dtype=np.int64)
        zs, res = _bisect_gaps(k, js, tol, N_k)
        _, bounds = hilbert_omega_many(zs, N_k)
        allowed = np.maximum(1e-10, 2.0 * bounds)
        if (res > allowed).any():
            raise NumericalFailureError(
                f"generation-{k} residuals exceed the adaptive tolerance"
            )
        for j, z, r in zip(js, zs, res):
            entries[(k, int(j))] = ZeroEntry(float(z), float(r), N_k)
    return ZeroTable(entries, tol=tol)

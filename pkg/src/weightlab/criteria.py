"""Condition families on the weight pair, plus the growth-exponent fit.

Three condition families are evaluated against the Cantor quadrature and a
truncated gap measure:

* the two-tailed scalar product ``ap_tail``/``ap_constant``,
* the local testing sums ``testing_norm``/``testing_scan``,
* the quadratic square-function pair ``quad_lhs_*`` / ``quad_rhs_*`` built
  on the explicit sibling-supported test family.

``fit_growth`` extracts the asymptotic growth exponent of a series, and
``selfsim_energy`` is a finiteness/stability probe of the field energy of
the gap-center measure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .cantor import (
    LN2,
    LN3,
    AtomicMeasure,
    ExponentConfig,
    Interval,
    TriadicIndex,
    cantor_numerators,
    cantor_quadrature,
    gap,
    interval,
    mass_ratio,
    sigma_truncated,
)
from .errors import (
    InvalidIndexError,
    NumericalFailureError,
    ResourceLimitError,
    SingularityError,
)
from .sums import exact_sum
from .transform import MIN_SEPARATION, CertifiedValue

MAX_SCAN_GENERATION = 8
# Scans pair sigma atoms with quadrature nodes; atoms of generation >= N-1
# sit at or below node resolution (generation-N gap centers coincide with
# the nodes themselves), so scans cap the sigma depth two generations below
# the quadrature depth.  Direct testing_norm calls are not capped.
SCAN_DEPTH_MARGIN = 2
QUAD_SAFETY_MARGIN = 6


@dataclass(frozen=True)
class GrowthFit:
    """Fitted growth exponent of a positive series against N.

    Model: log v = alpha * log N + gamma * loglog N + c, estimated by least
    squares with gamma free.  Pinning gamma to the nominal -(1+delta) would
    misread bounded series with slowly varying factors as growing (their
    loglog drift has nowhere to go but alpha), so the correction exponent is
    estimated and reported alongside.
    """

    alpha: float
    log_correction: float
    intercept: float
    max_residual: float
    target: float

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "log_correction": self.log_correction,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "target": self.target,
        }


@dataclass
class ScanResult:
    """Tabulated condition values over a parameter grid, plus their sup."""

    columns: tuple[str, ...]
    rows: list[tuple]
    summary: float
    metadata: dict

    def values(self) -> np.ndarray:
        i = self.columns.index("value")
        return np.array([row[i] for row in self.rows])

    def to_csv(self, path: str | Path) -> None:
        def fmt(x):
            if isinstance(x, float):
                return f"{x:.17g}"
            return x

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([fmt(x) for x in row])


@dataclass(frozen=True)
class TestFamily:
    """Sibling-supported test family with lacunary coefficients.

    a(k) = (k+1)^(1/p) * ln(k+2)^((1+delta)/p) and
    beta(k) = (3/2)^((p'-1) k) / a(k); the family starts at k = 1 because
    the root interval has no sibling.
    """

    cfg: ExponentConfig
    delta: float
    max_generation: int

    __test__ = False  # despite the name, not a pytest class

    def log_a(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        p, d = self.cfg.p, self.delta
        return np.log(k + 1.0) / p + (1.0 + d) / p * np.log(np.log(k + 2.0))

    def a(self, k) -> np.ndarray:
        return np.exp(self.log_a(k))

    def log_beta(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        return k * (self.cfg.p_prime - 1.0) * (LN3 - LN2) - self.log_a(k)

    def beta(self, k) -> np.ndarray:
        return np.exp(self.log_beta(k))


def test_family_coeffs(
    cfg: ExponentConfig, delta: float | None, k: int
) -> tuple[float, float]:
    """(a_k, beta_k) for the test family; delta defaults to cfg.delta."""
    if k < 0:
        raise InvalidIndexError(f"family index must be >= 0, got {k}")
    fam = TestFamily(cfg, cfg.delta if delta is None else delta, k)
    return float(fam.a(k)), float(fam.beta(k))


test_family_coeffs.__test__ = False  # a library operation, not a pytest case


def dual_swap(cfg: ExponentConfig) -> ExponentConfig:
    """Exchange (p, p'); scans run under the swap exchange the two measures'
    roles.  An involution."""
    return cfg.dual()


def _sigma_tail_mass(cfg: ExponentConfig, L: int, k: int = 0) -> float:
    """Mass of the gap measure beyond generation L inside one generation-k
    interval (k = 0 gives the global tail)."""
    r = mass_ratio(cfg)
    logw = k * ((cfg.p_prime - 1.0) * LN2 - cfg.p_prime * LN3)
    return math.exp(logw) * r ** (max(L, k) - k + 1) / (1.0 - r)


def _field_sup_bound(N: int) -> float:
    """Rigorous sup of |field of the depth-N quadrature restricted to any
    interval| over points with clearance >= half a generation-(N+1) gap.

    Nodes are spaced at least (2/3) 3^-N apart and any admissible point is
    at least 3^-(N+1)/2 from the nearest node, so summing 2^-N/dist over
    nodes ordered by distance gives at most
    (3/2)^N * 3 * (4 + 1 + N ln 2) with the harmonic tail bounded by logs.
    """
    return (1.5**N) * 3.0 * (5.0 + N * LN2)


def _displacement(prov) -> float:
    if prov.kind == "omega-quadrature":
        return 0.5 * 3.0 ** -prov.depth
    return 0.0


def ap_tail(I: Interval, mu: AtomicMeasure, q: float) -> CertifiedValue:
    """Tailed-kernel integral of mu against I at exponent q:
    sum of mass * |I|^(q-1) / (|I| + dist(x, I))^q over atoms.

    The error bound covers what the atoms stand for: the midpoint
    displacement of quadrature cylinders, or the truncated generations of a
    gap measure (tail mass times the kernel sup 1/|I|).  Exact measures get
    a zero bound.
    """
    if q <= 1.0:
        raise InvalidIndexError(f"tail exponent must exceed 1, got {q}")
    lo = np.array([I.left_float])
    hi = np.array([I.right_float])
    if len(mu) == 0:
        vals = np.zeros(1)
        lips = np.zeros(1)
    else:
        vals, lips = kernels.tail_rows(
            mu.positions, mu.masses, q, lo, hi, _displacement(mu.provenance)
        )
    bound = 0.0
    prov = mu.provenance
    if prov.kind == "omega-quadrature":
        bound = float(lips[0]) * _displacement(prov)
    elif prov.kind in ("sigma-dot", "sigma-zeroed"):
        bound = _sigma_tail_mass(prov.cfg, prov.depth) / I.length_float
    return CertifiedValue(float(vals[0]), bound)


def tree_family(max_k: int, include_gaps: bool = True) -> list[Interval]:
    """All kept intervals with k <= max_k, plus gap closures when asked."""
    family: list[Interval] = []
    for k in range(max_k + 1):
        for j in range(1, 2**k + 1):
            idx = TriadicIndex(k, j)
            family.append(interval(idx))
            if include_gaps:
                g = gap(idx)
                family.append(Interval(g.left, g.right, closed=True))
    return family


def ap_constant(
    cfg: ExponentConfig,
    family: Sequence[Interval],
    N: int,
    L: int,
    variant: str = "centered",
    zeros: Mapping[tuple[int, int], float] | None = None,
) -> ScanResult:
    """Two-tailed scalar products over a family of intervals.

    Per interval: (tail integral of the quadrature at p)^(1/p) times
    (tail integral of the gap measure at p')^(1/p'); summary is the sup.
    """
    if not family:
        raise InvalidIndexError("interval family must be nonempty")
    omega = cantor_quadrature(N)
    sigma = sigma_truncated(cfg, L, variant, zeros)
    los = np.array([I.left_float for I in family])
    his = np.array([I.right_float for I in family])
    w_vals, w_lips = kernels.tail_rows(
        omega.positions, omega.masses, cfg.p, los, his, 0.5 * 3.0**-N
    )
    s_vals, s_lips = kernels.tail_rows(
        sigma.positions, sigma.masses, cfg.p_prime, los, his, 0.0
    )
    w_bounds = w_lips * (0.5 * 3.0**-N)
    tail = _sigma_tail_mass(cfg, L)
    s_bounds = tail / (his - los)
    rows = []
    sup = 0.0
    inv_p = 1.0 / cfg.p
    inv_pp = 1.0 / cfg.p_prime
    for i, I in enumerate(family):
        A, eA = float(w_vals[i]), float(w_bounds[i])
        B, eB = float(s_vals[i]), float(s_bounds[i])
        value = A**inv_p * B**inv_pp
        hi_v = (A + eA) ** inv_p * (B + eB) ** inv_pp
        lo_v = max(A - eA, 0.0) ** inv_p * max(B - eB, 0.0) ** inv_pp
        bound = max(hi_v - value, value - lo_v)
        rows.append(
            (
                I.left_float,
                I.right_float,
                "closed" if I.closed else "open",
                value,
                bound,
                N,
                L,
            )
        )
        sup = max(sup, value)
    return ScanResult(
        columns=("left", "right", "kind", "value", "error_bound", "depth_omega", "depth_sigma"),
        rows=rows,
        summary=sup,
        metadata={
            "p": cfg.p,
            "delta": cfg.delta,
            "variant": variant,
            "depth_omega": N,
            "depth_sigma": L,
        },
    )


def _forward_sum(
    w_pos: np.ndarray,
    w_mass0: float,
    s_pos: np.ndarray,
    s_mass: np.ndarray,
    p: float,
    half: float,
) -> tuple[float, float]:
    """Forward testing sum over nodes: sum of w_mass0 |field(sigma)(y)|^p,
    with the node-displacement error bound
    sum w_mass0 * p * |field|^(p-1) * (sum mass/dist^2) * half."""
    if w_pos.size == 0 or s_pos.size == 0:
        return 0.0, 0.0
    S, lip, coll = kernels.cauchy_lipschitz(s_pos, s_mass, w_pos, MIN_SEPARATION)
    bad = np.flatnonzero(coll >= 0)
    if bad.size:
        i = int(bad[0])
        a = int(coll[i])
        raise SingularityError(float(w_pos[i]), a, float(s_pos[a]))
    absS = np.abs(S)
    value = w_mass0 * exact_sum(absS**p)
    bound = w_mass0 * p * half * exact_sum(absS ** (p - 1.0) * lip)
    return value, bound


def _backward_sum(
    w_pos: np.ndarray,
    w_mass0: float,
    s_pos: np.ndarray,
    s_mass: np.ndarray,
    p_prime: float,
) -> float:
    """Backward testing sum over sigma atoms: sum of mass |field(omega)(z)|^p'."""
    if w_pos.size == 0 or s_pos.size == 0:
        return 0.0
    S, coll = kernels.cauchy_many_uniform(w_pos, w_mass0, s_pos, MIN_SEPARATION)
    bad = np.flatnonzero(coll >= 0)
    if bad.size:
        i = int(bad[0])
        raise SingularityError(float(s_pos[i]), int(coll[i]), float(w_pos[coll[i]]))
    return exact_sum(s_mass * np.abs(S) ** p_prime)


def testing_norm(
    cfg: ExponentConfig,
    I: Interval,
    direction: str,
    N: int,
    L: int,
    variant: str = "centered",
    zeros: Mapping[tuple[int, int], float] | None = None,
    generation_hint: int = 0,
) -> CertifiedValue:
    """Local testing sum over I, un-normalized.

    forward:  sum over quadrature nodes y in I of 2^-N |field(sigma_L
              restricted to I)(y)|^p, bounded by the node-displacement
              (Lipschitz) estimate;
    backward: sum over sigma atoms z in I of mass |field(omega_N restricted
              to I)(z)|^p', bounded by the truncation tail times the
              restricted-field sup.

    Collisions between nodes and atoms raise SingularityError (the centered
    variant collides whenever L >= N: generation-N gap centers are nodes).
    """
    if direction not in ("forward", "backward"):
        raise InvalidIndexError(f"unknown direction {direction!r}")
    omega = cantor_quadrature(N)
    sigma = sigma_truncated(cfg, L, variant, zeros)
    w_sl = omega.slice_range(I.left_float, I.right_float, open_ends=not I.closed)
    s_sl = sigma.slice_range(I.left_float, I.right_float, open_ends=not I.closed)
    w_pos = omega.positions[w_sl]
    s_pos = sigma.positions[s_sl]
    s_mass = sigma.masses[s_sl]
    m0 = 2.0**-N
    if direction == "forward":
        value, bound = _forward_sum(w_pos, m0, s_pos, s_mass, cfg.p, 0.5 * 3.0**-N)
        return CertifiedValue(value, bound)
    value = _backward_sum(w_pos, m0, s_pos, s_mass, cfg.p_prime)
    tail = _sigma_tail_mass(cfg, L, generation_hint)
    bound = tail * _field_sup_bound(N) ** cfg.p_prime
    return CertifiedValue(value, bound)


def testing_scan(
    cfg: ExponentConfig,
    max_k: int,
    N: int,
    L: int,
    variant: str = "centered",
    zeros: Mapping[tuple[int, int], float] | None = None,
) -> ScanResult:
    """Normalized testing sums over every kept interval with k <= max_k,
    both directions; summary is the sup of normalized values.

    Forward rows divide by the interval's sigma mass, backward rows by its
    quadrature mass.  The sigma depth is capped at N - 2: atoms at or below
    node resolution would pair quadrature nodes with unresolved structure
    (at L = N they coincide with the nodes outright).
    """
    if max_k > MAX_SCAN_GENERATION:
        raise ResourceLimitError(
            f"scan generation {max_k} exceeds the limit {MAX_SCAN_GENERATION}"
        )
    L_eff = min(L, N - SCAN_DEPTH_MARGIN)
    if max_k > L_eff:
        raise InvalidIndexError(
            f"scan needs sigma atoms in every row: max_k={max_k} > "
            f"effective sigma depth {L_eff}"
        )
    omega = cantor_quadrature(N)
    sigma = sigma_truncated(cfg, L_eff, variant, zeros)
    m0 = 2.0**-N
    half = 0.5 * 3.0**-N
    rows = []
    sup_fwd = 0.0
    sup_bwd = 0.0
    for k in range(max_k + 1):
        nums = cantor_numerators(k)
        scale = 3.0**k
        for j in range(1, 2**k + 1):
            lo = nums[j - 1] / scale
            hi = (nums[j - 1] + 1) / scale
            w_sl = omega.slice_range(lo, hi, open_ends=False)
            s_sl = sigma.slice_range(lo, hi, open_ends=False)
            w_pos = omega.positions[w_sl]
            s_pos = sigma.positions[s_sl]
            s_mass = sigma.masses[s_sl]
            w_norm = exact_sum(omega.masses[w_sl])
            s_norm = exact_sum(s_mass)
            fwd, fwd_bound = _forward_sum(w_pos, m0, s_pos, s_mass, cfg.p, half)
            rows.append(
                (k, j, "forward", fwd / s_norm, fwd_bound / s_norm, N, L_eff)
            )
            sup_fwd = max(sup_fwd, fwd / s_norm)
            bwd = _backward_sum(w_pos, m0, s_pos, s_mass, cfg.p_prime)
            bwd_bound = (
                _sigma_tail_mass(cfg, L_eff, k) * _field_sup_bound(N) ** cfg.p_prime
            )
            rows.append((k, j, "backward", bwd / w_norm, bwd_bound / w_norm, N, L_eff))
            sup_bwd = max(sup_bwd, bwd / w_norm)
    return ScanResult(
        columns=("k", "j", "direction", "value", "error_bound", "depth_omega", "depth_sigma"),
        rows=rows,
        summary=max(sup_fwd, sup_bwd),
        metadata={
            "p": cfg.p,
            "delta": cfg.delta,
            "variant": variant,
            "depth_omega": N,
            "depth_sigma_requested": L,
            "depth_sigma": L_eff,
            "sup_forward": sup_fwd,
            "sup_backward": sup_bwd,
        },
    )


def _family_log_beta_sq_prefix(fam: TestFamily) -> np.ndarray:
    """log of cumulative sums of beta_k^2 for k = 1..max_generation,
    accumulated in the log domain (beta grows fast for small p)."""
    ks = np.arange(1, fam.max_generation + 1, dtype=np.float64)
    log_b2 = 2.0 * fam.log_beta(ks)
    return np.logaddexp.accumulate(log_b2)


def quad_lhs_direct(
    cfg: ExponentConfig, delta: float | None, N: int, L: int
) -> float:
    """Square-function mass of the test family against the gap measure,
    summed exactly over atoms.

    An atom of generation l lies in exactly one sibling support per family
    generation k <= l, so its square sum is the prefix sum of beta_k^2 up to
    min(l, N) and the atom sum collapses to one term per generation."""
    if L < N:
        raise InvalidIndexError(f"need L >= N, got L={L} < N={N}")
    d = cfg.delta if delta is None else delta
    if N < 1:
        return 0.0
    fam = TestFamily(cfg, d, N)
    log_prefix = _family_log_beta_sq_prefix(fam)
    terms = []
    for l in range(1, L + 1):
        log_layer_mass = l * LN2 + l * ((cfg.p_prime - 1.0) * LN2 - cfg.p_prime * LN3)
        log_sq = log_prefix[min(l, N) - 1]
        terms.append(math.exp(log_layer_mass + 0.5 * cfg.p * log_sq))
    return exact_sum(terms)


def quad_lhs_closed(cfg: ExponentConfig, delta: float | None, N: int) -> float:
    """Collapsed form of the square-function mass:
    sum_{k=1}^{N} 1 / ((k+1) ln(k+2)^(1+delta))."""
    d = cfg.delta if delta is None else delta
    if N < 1:
        return 0.0
    k = np.arange(1, N + 1, dtype=np.float64)
    return float(np.sum(1.0 / ((k + 1.0) * np.log(k + 2.0) ** (1.0 + d))))


def quad_rhs_closed(cfg: ExponentConfig, delta: float | None, N: int) -> float:
    """Closed form of the quadratic tail functional on the test family:
    (sum_{k=1}^{N} (k+1)^(-2/p) ln(k+2)^(-2(1+delta)/p))^(p/2),
    evaluated in the log domain."""
    return float(quad_rhs_closed_series(cfg, delta, np.array([N]))[0])


def quad_rhs_closed_series(
    cfg: ExponentConfig, delta: float | None, Ns: np.ndarray
) -> np.ndarray:
    """quad_rhs_closed on a grid of N values sharing one cumulative sum."""
    d = cfg.delta if delta is None else delta
    Ns = np.asarray(Ns, dtype=np.int64)
    if (Ns < 1).any():
        raise InvalidIndexError("family cutoffs must be >= 1")
    n_max = int(Ns.max())
    k = np.arange(1, n_max + 1, dtype=np.float64)
    terms = (k + 1.0) ** (-2.0 / cfg.p) * np.log(k + 2.0) ** (
        -2.0 * (1.0 + d) / cfg.p
    )
    cum = np.cumsum(terms)
    return np.exp(0.5 * cfg.p * np.log(cum[Ns - 1]))


def quad_rhs_direct(
    cfg: ExponentConfig,
    delta: float | None,
    N: int,
    L: int,
    variant: str = "centered",
    zeros: Mapping[tuple[int, int], float] | None = None,
    margin: int = QUAD_SAFETY_MARGIN,
) -> float:
    """Quadratic tail functional summed exactly over the given atoms.

    For each family member (k <= N, j), T = beta_k * sum over sigma atoms
    in the sibling support (minus the concentric triple, which meets it in
    at most one endpoint) of mass / |x - center|; the square sum is constant
    on depth-N cylinders, and the quadrature integral collapses to
    2^-N * sum over cylinders of (sum_k T^2)^(p/2).

    Computed in linear doubles: fine for p >= 1.3 at desk depths; smaller p
    should run through the dual swap."""
    d = cfg.delta if delta is None else delta
    if L < N + margin:
        raise InvalidIndexError(
            f"sigma depth {L} too shallow for family cutoff {N} (need >= N+{margin})"
        )
    if N < 1:
        return 0.0
    sigma = sigma_truncated(cfg, L, variant, zeros)
    fam = TestFamily(cfg, d, N)
    G = np.zeros(1)
    for k in range(1, N + 1):
        nums = cantor_numerators(k)
        scale = 3.0**k
        lefts = nums / scale
        rights = (nums + 1) / scale
        centers = (2 * nums + 1).astype(np.float64) / (2.0 * 3.0**k)
        # sibling of j (1-based): pairs (1,2), (3,4), ... swap within pairs
        order = np.arange(2**k)
        sib = order ^ 1
        lo_idx = np.searchsorted(sigma.positions, lefts[sib], side="left")
        hi_idx = np.searchsorted(sigma.positions, rights[sib], side="right")
        skip_lo = lefts - scale**-1  # concentric triple of I_j^k
        skip_hi = rights + scale**-1
        sums = kernels.abs_cauchy_rows(
            sigma.positions,
            sigma.masses,
            centers,
            lo_idx.astype(np.int64),
            hi_idx.astype(np.int64),
            skip_lo,
            skip_hi,
        )
        T = float(fam.beta(k)) * sums
        G = np.repeat(G, 2) + T**2
    if not np.isfinite(G).all():
        raise NumericalFailureError(
            "quadratic functional overflowed; run the dual swap for small p"
        )
    # G now holds the square sum per generation-N cylinder (constant on each)
    return 2.0**-N * exact_sum(G ** (0.5 * cfg.p))


def fit_growth(
    points: Sequence[tuple[float, float]],
    cfg: ExponentConfig,
    delta: float | None = None,
) -> GrowthFit:
    """Least-squares growth exponent of positive (N, value) points.

    Fits log v = alpha log N + gamma loglog N + c and reports alpha with the
    estimated logarithmic correction gamma, the intercept, and the largest
    absolute residual.  Target exponent is p/2 - 1.
    """
    if len(points) < 4:
        raise InvalidIndexError(f"need at least 4 points, got {len(points)}")
    Ns = np.array([float(n) for n, _ in points])
    vals = np.array([float(v) for _, v in points])
    if (Ns <= 2).any() or np.any(np.diff(Ns) <= 0):
        raise InvalidIndexError("N values must be increasing and exceed 2")
    if (vals <= 0).any() or not np.isfinite(vals).all():
        raise InvalidIndexError("fit requires positive finite values")
    x1 = np.log(Ns)
    x2 = np.log(np.log(Ns))
    y = np.log(vals)
    design = np.column_stack([x1, x2, np.ones_like(x1)])
    sol, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise NumericalFailureError("degenerate design matrix in growth fit")
    resid = y - design @ sol
    return GrowthFit(
        alpha=float(sol[0]),
        log_correction=float(sol[1]),
        intercept=float(sol[2]),
        max_residual=float(np.abs(resid).max()),
        target=cfg.p / 2.0 - 1.0,
    )


def selfsim_energy(cfg: ExponentConfig, K: int, N: int) -> float:
    """Field energy of the gap-center measure against the quadrature:
    sum over nodes y of 2^-N |field(sigma-dot_K)(y)|^p.

    Requires K < N; at K >= N the generation-N gap centers coincide with
    quadrature nodes and the evaluation is singular."""
    sigma = sigma_truncated(cfg, K, "centered")
    omega = cantor_quadrature(N)
    S, coll = kernels.cauchy_many(
        sigma.positions, sigma.masses, omega.positions, MIN_SEPARATION
    )
    bad = np.flatnonzero(coll >= 0)
    if bad.size:
        i = int(bad[0])
        a = int(coll[i])
        raise SingularityError(
            float(omega.positions[i]), a, float(sigma.positions[a])
        )
    return 2.0**-N * exact_sum(np.abs(S) ** cfg.p)

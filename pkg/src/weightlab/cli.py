"""Command-line front end: parameter parsing, experiment orchestration,
CSV/JSON emission, and the combined report.

Commands: zeros, masses, ap, testing, quadap, selfsim, report.  Exit codes:
0 success, 2 configuration error, 3 numerical failure (partial outputs are
flushed next to a ``_FAILED`` marker).  Identical configurations produce
byte-identical output files regardless of thread count; wall-clock timings
go to stderr only.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import criteria, transform
from .cantor import (
    ExponentConfig,
    sigma_log_weight,
    sigma_total_mass,
    sigma_weight,
)
from .errors import ConfigError, WeightlabError
from .plots import emit_svg_loglog

COMMANDS = ("zeros", "masses", "ap", "testing", "quadap", "selfsim", "report")

# per-command defaults where the shared flag means different tables
DEFAULT_SCAN_K = 6       # tree depth of ap/testing scans
DEFAULT_TABLE_K = 10     # zero-table generations (zeros, report)
DEFAULT_ZERO_BASE_DEPTH = 12
DRIFT_TOLERANCE = 0.05
ALPHA_TOLERANCE = 0.05


@dataclass(frozen=True)
class RunConfig:
    command: str
    p: float = 4.0
    delta: float = 1.0
    depth_omega: int = 16
    depth_sigma: int = 16
    family_n: int = 14
    max_k: int | None = None
    nmax: int = 10**6
    tol: float = 1e-12
    variant: str | None = None
    dual: bool = False
    zeros_file: str | None = None
    out_dir: str = "."
    svg: bool = False
    explicit: frozenset = frozenset()

    def exponents(self) -> ExponentConfig:
        cfg = ExponentConfig.from_p(self.p, self.delta)
        return cfg.dual() if self.dual else cfg

    def scan_k(self) -> int:
        if self.max_k is not None:
            return self.max_k
        return DEFAULT_SCAN_K

    def table_k(self) -> int:
        if self.command in ("zeros", "report") and self.max_k is not None:
            return self.max_k
        return DEFAULT_TABLE_K

    def variant_for(self, default: str) -> str:
        """Explicit --variant wins; otherwise the experiment's natural
        default (zeroed for the scalar conditions, centered for the
        quadratic sums, whose depth requirements exceed any zero table)."""
        if self.variant is not None:
            return self.variant
        return default


@dataclass
class RunSummary:
    command: str
    statuses: dict = field(default_factory=dict)
    headlines: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weightlab",
        description=(
            "Two-weight experiments on the Cantor measure and gap-supported "
            "atomic measures"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--p", type=float, default=None, help="exponent in [1.05, 20]")
        sp.add_argument("--delta", type=float, default=None, help="family damping > 0")
        sp.add_argument("--depth-omega", type=int, default=None, help="quadrature depth N")
        sp.add_argument("--depth-sigma", type=int, default=None, help="gap-measure depth L")
        sp.add_argument("--family-n", type=int, default=None, help="direct family cutoff")
        sp.add_argument("--max-k", type=int, default=None, help="table/scan generations")
        sp.add_argument("--nmax", type=int, default=None, help="closed-form cutoff")
        sp.add_argument("--tol", type=float, default=None, help="relative position tolerance")
        sp.add_argument("--variant", choices=("centered", "zeroed"), default=None)
        sp.add_argument("--dual", action="store_true", default=None,
                        help="swap exponent and measure roles")
        sp.add_argument("--zeros-file", type=str, default=None,
                        help="reuse a zero table CSV")
        sp.add_argument("--out", type=str, default=None, help="output directory")
        sp.add_argument("--config", type=str, default=None, help="JSON config file")
        sp.add_argument("--svg", action="store_true", default=None,
                        help="emit a log-log SVG figure")
    return parser


_FIELD_BY_FLAG = {
    "p": "p",
    "delta": "delta",
    "depth_omega": "depth_omega",
    "depth_sigma": "depth_sigma",
    "family_n": "family_n",
    "max_k": "max_k",
    "nmax": "nmax",
    "tol": "tol",
    "variant": "variant",
    "dual": "dual",
    "zeros_file": "zeros_file",
    "out": "out_dir",
    "svg": "svg",
}


def parse_config(argv: list[str]) -> RunConfig:
    """Flags override JSON config values, which override built-in defaults."""
    args = _build_parser().parse_args(argv)
    values: dict = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"--config: cannot read {args.config!r}: {exc}")
        for key, val in loaded.items():
            if key not in _FIELD_BY_FLAG:
                raise ConfigError(f"--config: unknown key {key!r}")
            values[_FIELD_BY_FLAG[key]] = val
    explicit = set()
    for flag, fieldname in _FIELD_BY_FLAG.items():
        val = getattr(args, flag)
        if val is not None:
            values[fieldname] = val
            explicit.add(fieldname)
    config = RunConfig(command=args.command, explicit=frozenset(explicit), **values)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    def fail(flag: str, message: str):
        raise ConfigError(f"--{flag}: {message}")

    if not 1.05 <= config.p <= 20.0:
        fail("p", f"{config.p} outside [1.05, 20]")
    if config.delta <= 0:
        fail("delta", f"{config.delta} must be positive")
    if not 0 <= config.depth_omega <= 24:
        fail("depth-omega", f"{config.depth_omega} outside [0, 24]")
    if config.depth_sigma < 0:
        fail("depth-sigma", f"{config.depth_sigma} must be >= 0")
    if config.family_n < 0:
        fail("family-n", f"{config.family_n} must be >= 0")
    if config.nmax < 10:
        fail("nmax", f"{config.nmax} must be >= 10")
    if not 0 < config.tol <= 1e-2:
        fail("tol", f"{config.tol} outside (0, 1e-2]")
    if config.max_k is not None:
        if config.command in ("zeros", "report") and not 0 <= config.max_k <= 14:
            fail("max-k", f"zero tables support 0..14, got {config.max_k}")
        if config.command in ("ap", "testing") and not 0 <= config.max_k <= 8:
            fail("max-k", f"scans support 0..8, got {config.max_k}")
    if config.variant is not None and config.variant not in ("centered", "zeroed"):
        fail("variant", f"unknown variant {config.variant!r}")
    if config.command == "testing" and config.depth_omega < config.scan_k() + 4:
        fail(
            "depth-omega",
            f"testing scans need depth_omega >= max_k + 4 "
            f"(= {config.scan_k() + 4}) so both stability scans resolve "
            "every row",
        )
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        fail("out", f"cannot create {config.out_dir!r}: {exc}")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _write_json(path: Path, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Runner:
    def __init__(self, config: RunConfig):
        self.config = config
        self.cfg = config.exponents()
        self.out = Path(config.out_dir)
        self.summary = RunSummary(command=config.command)
        self._table: transform.ZeroTable | None = None

    # -- shared helpers ----------------------------------------------------

    def _record(self, name: str) -> Path:
        self.summary.manifest.append(name)
        return self.out / name

    def zero_table(self) -> transform.ZeroTable:
        if self._table is None:
            if self.config.zeros_file is not None:
                self._table = transform.ZeroTable.from_csv(
                    self.config.zeros_file, tol=self.config.tol
                )
            else:
                base = (
                    self.config.depth_omega
                    if "depth_omega" in self.config.explicit
                    else DEFAULT_ZERO_BASE_DEPTH
                )
                self._table = transform.zero_table(
                    min(self.config.table_k(), 14), self.config.tol, base
                )
        return self._table

    def sigma_inputs(self, L: int, variant: str):
        """(effective depth, zero map) honoring the zero-table coverage."""
        if variant == "centered":
            return L, None
        table = self.zero_table()
        return min(L, table.max_generation), table.position_map()

    # -- commands ----------------------------------------------------------

    def cmd_zeros(self) -> None:
        table = self.zero_table()
        table.to_csv(self._record("zeros.csv"))
        self.summary.statuses["zeros"] = "ok"
        self.summary.headlines["zeros"] = {
            "entries": len(table.entries),
            "max_generation": table.max_generation,
            "mirror_defect": table.mirror_defect(),
            "min_edge_distance_rel": table.min_edge_distance(),
        }

    def cmd_masses(self) -> None:
        cfg = self.cfg
        rows = []
        running = 0.0
        for k in range(self.config.depth_sigma + 1):
            s = sigma_weight(cfg, k)
            layer = math.exp(k * math.log(2.0) + sigma_log_weight(cfg, k))
            running += layer
            closed = sigma_total_mass(cfg, k)
            rel_err = abs(running - closed) / closed
            precursor = abs(
                math.exp(
                    (cfg.p - 1.0) * sigma_log_weight(cfg, k)
                    - k * math.log(2.0)
                    + k * cfg.p * math.log(3.0)
                )
                - 1.0
            )
            rows.append((k, s, layer, running, closed, rel_err, precursor))
        _write_csv(
            self._record("masses.csv"),
            ["k", "weight", "layer_mass", "cumulative_mass", "closed_form",
             "rel_err", "precursor_defect"],
            rows,
        )
        self.summary.statuses["masses"] = "ok"
        self.summary.headlines["masses"] = {
            "total_mass": rows[-1][3],
            "closed_form": rows[-1][4],
            "max_precursor_defect": max(r[6] for r in rows),
        }

    def _ap_scans(self, depth_pairs, variant):
        family = criteria.tree_family(self.config.scan_k())
        scans = []
        for N, L in depth_pairs:
            L_eff, zeros = self.sigma_inputs(L, variant)
            scans.append(
                criteria.ap_constant(self.cfg, family, N, L_eff, variant, zeros)
            )
        return scans

    def cmd_ap(self) -> None:
        variant = self.config.variant_for("zeroed")
        N, L = self.config.depth_omega, self.config.depth_sigma
        scans = self._ap_scans([(max(0, N - 2), max(0, L - 2)), (N, L)], variant)
        rows = [r for scan in scans for r in scan.rows]
        _write_csv(self._record("ap.csv"), list(scans[0].columns), rows)
        drift = _rel_drift(scans[0].summary, scans[1].summary)
        self.summary.statuses["ap"] = "ok"
        self.summary.headlines["ap"] = {
            "sup": scans[1].summary,
            "sup_coarse": scans[0].summary,
            "drift": drift,
            "variant": variant,
            "bounded": drift < DRIFT_TOLERANCE,
        }

    def _testing_scans(self, depth_pairs, variant):
        scans = []
        for N, L in depth_pairs:
            L_eff, zeros = self.sigma_inputs(L, variant)
            scans.append(
                criteria.testing_scan(
                    self.cfg, self.config.scan_k(), N, L_eff, variant, zeros
                )
            )
        return scans

    def cmd_testing(self) -> None:
        variant = self.config.variant_for("zeroed")
        N, L = self.config.depth_omega, self.config.depth_sigma
        scans = self._testing_scans([(N - 2, L - 2), (N, L)], variant)
        rows = [r for scan in scans for r in scan.rows]
        _write_csv(self._record("testing.csv"), list(scans[0].columns), rows)
        fwd_drift = _rel_drift(
            scans[0].metadata["sup_forward"], scans[1].metadata["sup_forward"]
        )
        bwd_drift = _rel_drift(
            scans[0].metadata["sup_backward"], scans[1].metadata["sup_backward"]
        )
        self.summary.statuses["testing"] = "ok"
        self.summary.headlines["testing"] = {
            "sup_forward": scans[1].metadata["sup_forward"],
            "sup_backward": scans[1].metadata["sup_backward"],
            "drift_forward": fwd_drift,
            "drift_backward": bwd_drift,
            "variant": variant,
            "depth_sigma_effective": scans[1].metadata["depth_sigma"],
            "bounded": max(fwd_drift, bwd_drift) < DRIFT_TOLERANCE,
        }

    def cmd_quadap(self) -> None:
        cfg = self.cfg
        config = self.config
        variant = config.variant_for("centered")
        rows = []
        # direct-vs-closed consistency grids
        lhs_ratios = []
        for n in range(4, min(10, config.family_n) + 1, 2):
            L = n + criteria.QUAD_SAFETY_MARGIN
            L_eff, zeros = self.sigma_inputs(L, variant)
            if L_eff < L:
                break  # zero table too shallow for the direct sums
            direct = criteria.quad_lhs_direct(cfg, None, n, L_eff)
            closed = criteria.quad_lhs_closed(cfg, None, n)
            rows.append(("lhs_direct", n, L_eff, direct))
            rows.append(("lhs_closed", n, "", closed))
            lhs_ratios.append(direct / closed)
        rhs_ratios = []
        for n in range(6, config.family_n + 1, 2):
            L = n + criteria.QUAD_SAFETY_MARGIN
            L_eff, zeros = self.sigma_inputs(L, variant)
            if L_eff < L:
                break
            direct = criteria.quad_rhs_direct(cfg, None, n, L_eff, variant, zeros)
            closed = criteria.quad_rhs_closed(cfg, None, n)
            rows.append(("rhs_direct", n, L_eff, direct))
            rows.append(("rhs_closed", n, "", closed))
            rhs_ratios.append(direct / closed)
        # closed-form growth series and fit
        fit_ns = np.unique(
            np.round(np.geomspace(max(10, config.nmax // 100), config.nmax, 4))
        ).astype(np.int64)
        series = criteria.quad_rhs_closed_series(cfg, None, fit_ns)
        for n, v in zip(fit_ns, series):
            rows.append(("rhs_closed_fit_grid", int(n), "", float(v)))
        rows.append(("lhs_closed_limit", config.nmax, "",
                     criteria.quad_lhs_closed(cfg, None, config.nmax)))
        fit = criteria.fit_growth(
            [(float(n), float(v)) for n, v in zip(fit_ns, series)], cfg, None
        )
        _write_csv(
            self._record("quadap.csv"),
            ["kind", "family_n", "depth_sigma", "value"],
            rows,
        )
        _write_json(self._record("fit.json"), fit.to_json_dict())
        if config.svg or config.command == "report":
            emit_svg_loglog(
                [(float(n), float(v)) for n, v in zip(fit_ns, series)],
                fit.target,
                self._record("quadap.svg"),
            )
        lhs_tail_drift = _rel_drift(
            criteria.quad_lhs_closed(cfg, None, max(10, config.nmax // 10)),
            criteria.quad_lhs_closed(cfg, None, config.nmax),
        )
        self.summary.statuses["quadap"] = "ok"
        self.summary.headlines["quadap"] = {
            "alpha": fit.alpha,
            "alpha_target": fit.target,
            "alpha_within_tolerance": abs(fit.alpha - fit.target) <= ALPHA_TOLERANCE,
            "log_correction": fit.log_correction,
            "max_residual": fit.max_residual,
            "lhs_ratio_range": [min(lhs_ratios), max(lhs_ratios)] if lhs_ratios else None,
            "rhs_ratio_range": [min(rhs_ratios), max(rhs_ratios)] if rhs_ratios else None,
            "lhs_tail_drift": lhs_tail_drift,
            "lhs_bounded": lhs_tail_drift < DRIFT_TOLERANCE,
            "rhs_divergent": fit.alpha > 0.25,
            "variant": variant,
        }

    def cmd_selfsim(self) -> None:
        N = self.config.depth_omega
        K = min(self.config.depth_sigma, N - 4)
        if K < 2:
            raise ConfigError("--depth-omega: selfsim needs depth_omega >= 6")
        pairs = [(K - 2, N - 2), (K, N)]
        rows = []
        values = []
        for kk, nn in pairs:
            v = criteria.selfsim_energy(self.cfg, kk, nn)
            rows.append((kk, nn, v))
            values.append(v)
        _write_csv(
            self._record("selfsim.csv"),
            ["depth_sigma", "depth_omega", "value"],
            rows,
        )
        drift = _rel_drift(values[0], values[1])
        self.summary.statuses["selfsim"] = "ok"
        self.summary.headlines["selfsim"] = {
            "value": values[1],
            "value_coarse": values[0],
            "drift": drift,
            "stable": drift < DRIFT_TOLERANCE,
        }

    def cmd_report(self) -> None:
        for step in ("zeros", "masses", "ap", "testing", "quadap", "selfsim"):
            t0 = time.monotonic()
            getattr(self, f"cmd_{step}")()
            self.summary.timings[step] = time.monotonic() - t0
        h = self.summary.headlines
        verdicts = {
            "ap": "bounded" if h["ap"]["bounded"] else "unstable",
            "testing": "bounded" if h["testing"]["bounded"] else "unstable",
            "quad_lhs": "bounded" if h["quadap"]["lhs_bounded"] else "unstable",
            "quad_rhs": "divergent" if h["quadap"]["rhs_divergent"] else "bounded",
        }
        self.summary.headlines["verdicts"] = verdicts
        self.summary.headlines["verdict_line"] = "/".join(
            [verdicts["ap"], verdicts["testing"], verdicts["quad_lhs"], verdicts["quad_rhs"]]
        )
        self.summary.statuses["report"] = "ok"
        self._write_summary()

    def _write_summary(self) -> None:
        cfg_section = {
            "command": self.config.command,
            "p": self.config.p,
            "delta": self.config.delta,
            "depth_omega": self.config.depth_omega,
            "depth_sigma": self.config.depth_sigma,
            "family_n": self.config.family_n,
            "max_k": self.config.table_k(),
            "nmax": self.config.nmax,
            "tol": self.config.tol,
            "variant": self.config.variant,
            "dual": self.config.dual,
        }
        path = self._record("summary.json")
        _write_json(
            path,
            {
                "config": cfg_section,
                "statuses": self.summary.statuses,
                "headlines": self.summary.headlines,
                "manifest": sorted(self.summary.manifest),
            },
        )

    def run(self) -> RunSummary:
        t0 = time.monotonic()
        getattr(self, f"cmd_{self.config.command}")()
        self.summary.timings.setdefault(
            self.config.command, time.monotonic() - t0
        )
        return self.summary


def _rel_drift(coarse: float, fine: float) -> float:
    if fine == 0.0:
        return 0.0 if coarse == 0.0 else float("inf")
    return abs(fine - coarse) / abs(fine)


def run(config: RunConfig) -> RunSummary:
    """Execute one command; writes output files and returns the summary."""
    return _Runner(config).run()


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except WeightlabError as exc:
        marker = Path(config.out_dir) / "_FAILED"
        marker.write_text(f"{type(exc).__name__}: {exc}\n")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for name, seconds in summary.timings.items():
        print(f"[timing] {name}: {seconds:.2f}s", file=sys.stderr)
    for key, val in summary.headlines.items():
        print(f"{key}: {val}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

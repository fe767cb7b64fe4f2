"""Log-log figures for growth series, rendered to deterministic SVG files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .errors import ConfigError

Point = tuple[float, float]


def reference_series(series: Sequence[Point], slope: float) -> list[Point]:
    """Power-law reference anchored at the first data point: passes through
    (x0, y0) with the given log-log slope, sampled at the data abscissas."""
    x0, y0 = series[0]
    return [(x, y0 * (x / x0) ** slope) for x, _ in series]


def emit_svg_loglog(
    series: Sequence[Point], target_slope: float, path: str | Path
) -> None:
    """Render a log-log plot of the series with a dashed reference line of
    the target slope.  Byte-deterministic for fixed input.

    Raises ConfigError for fewer than two points or nonpositive values.
    """
    if len(series) < 2:
        raise ConfigError(f"need at least 2 points to plot, got {len(series)}")
    if any(x <= 0 or y <= 0 for x, y in series):
        raise ConfigError("log-log plot requires positive coordinates")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ref = reference_series(series, target_slope)
    xs = [x for x, _ in series]
    ys = [y for _, y in series]
    # svg.hashsalt pins the element ids; dropping the Date strips the only
    # other run-dependent bytes.
    with plt.rc_context({"svg.hashsalt": "weightlab"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        try:
            ax.loglog(xs, ys, marker="o", label="measured")
            ax.loglog(
                [x for x, _ in ref],
                [y for _, y in ref],
                linestyle="--",
                label=f"slope {target_slope:g} reference",
            )
            ax.set_xlabel("N")
            ax.set_ylabel("value")
            ax.grid(True, which="both", alpha=0.3)
            ax.legend()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)

"""Benchmark figures: median value and variable count versus sample size."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_METHOD_STYLE = {
    "l1pls": dict(color="tab:blue", marker="o", label="l1-PLS"),
    "ols": dict(color="tab:orange", marker="s", label="OLS"),
    "pp": dict(color="tab:green", marker="^", label="PP"),
}


def benchmark_figure(summary_rows: list, path) -> None:
    """Render value (top) and variable-count (bottom) panels with MAD error
    bars, one curve per method, plus the optimal-Value reference line."""
    methods = list(dict.fromkeys(r["method"] for r in summary_rows))
    sizes = sorted({int(r["n"]) for r in summary_rows})
    example = summary_rows[0]["example"] if summary_rows else "?"
    optimal = summary_rows[0]["optimal_value"] if summary_rows else None

    fig, (ax_v, ax_k) = plt.subplots(2, 1, figsize=(6.5, 7.5), sharex=True)
    for method in methods:
        cells = {int(r["n"]): r for r in summary_rows if r["method"] == method}
        xs = [n for n in sizes if n in cells]
        med_v = [cells[n]["median_value"] for n in xs]
        mad_v = [cells[n]["mad_value"] for n in xs]
        med_k = [cells[n]["median_vars"] for n in xs]
        mad_k = [cells[n]["mad_vars"] for n in xs]
        style = _METHOD_STYLE.get(method, dict(marker="o", label=method))
        ax_v.errorbar(xs, med_v, yerr=mad_v, capsize=3, **style)
        ax_k.errorbar(xs, med_k, yerr=mad_k, capsize=3, **style)
    if optimal is not None and np.isfinite(optimal):
        ax_v.axhline(optimal, color="black", linestyle="-.", linewidth=1,
                     label="optimal")
    ax_v.set_xscale("log", base=2)
    ax_v.set_ylabel("median value (± MAD)")
    ax_v.set_title(f"Example {example}")
    ax_v.legend(fontsize=8)
    ax_k.set_xscale("log", base=2)
    ax_k.set_xlabel("sample size")
    ax_k.set_ylabel("median # variables (± MAD)")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)

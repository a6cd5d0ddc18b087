"""Static figures. Needs matplotlib (the `plot` extra)."""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("plotting needs matplotlib; install the 'plot' extra") from None
    return plt


def branch_bars(report, path) -> Path:
    """Per-branch line-parameter MARE next to the mean VT and CT factor MARE."""
    plt = _pyplot()
    names = report.branches
    line = [100 * report.line_mare(b) for b in names]
    vt = [100 * _mean(report, b, ("tau_v_pq", "tau_v_qp")) for b in names]
    ct = [100 * _mean(report, b, ("tau_i_pq", "tau_i_qp")) for b in names]
    fig, ax = plt.subplots(figsize=(9, 3.5))
    xs = range(len(names))
    w = 0.28
    ax.bar([x - w for x in xs], line, w, label="line params")
    ax.bar(list(xs), vt, w, label="VT factors")
    ax.bar([x + w for x in xs], ct, w, label="CT factors")
    ax.set_xticks(list(xs), names, rotation=45, ha="right")
    ax.set_ylabel("MARE (%)")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def sweep_lines(points, path, qty: str = "r") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [float(p.value) for p in points]
    for b in points[0].report.branches:
        ax.plot(xs, [100 * p.report.mare(b, qty) for p in points], marker="o", label=b)
    ax.set_xlabel(points[0].axis)
    ax.set_ylabel(f"MARE of {qty} (%)")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def _mean(report, branch, qtys):
    vals = [report.mare(branch, q) for q in qtys if q in report.are[branch]]
    return sum(vals) / len(vals)

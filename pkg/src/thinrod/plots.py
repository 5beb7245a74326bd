"""
Self-contained SVG line charts for reports.

The Agg backend and a fixed SVG hash salt keep the output byte-identical
across runs.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "thinrod", "svg.fonttype": "path", "figure.figsize": (6.0, 4.0)}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_eigenvalues(report, path) -> None:
    """lambda_eps^n against eps with the limit values as dashed asymptotes."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        eps = np.asarray(report.eps)
        for n in range(report.k):
            line, = ax.plot(eps, report.lambda_eps[:, n], "o-", label=f"n={n + 1}")
            ax.axhline(report.lambda0[n], ls="--", lw=0.8, color=line.get_color())
        ax.set_xscale("log")
        ax.set_xlabel("epsilon")
        ax.set_ylabel("eigenvalue")
        ax.set_title(f"{report.profile_id} ({report.bc})")
        ax.legend(fontsize="small")
        _save(fig, path)


def plot_errors(report, path) -> None:
    """Log-log relative eigenvalue errors; zero or failed entries are skipped."""
    rel = report.rel_error
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        eps = np.asarray(report.eps)
        for n in range(report.k):
            ok = np.isfinite(rel[:, n]) & (rel[:, n] > 0)
            if ok.any():
                ax.plot(eps[ok], rel[ok, n], "o-", label=f"n={n + 1}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("epsilon")
        ax.set_ylabel("relative error")
        ax.set_title(f"{report.profile_id} ({report.bc})")
        if ax.lines:
            ax.legend(fontsize="small")
        _save(fig, path)


def plot_modes(modes, path, title: str = "", limit_modes=None) -> None:
    """Section-averaged modes (list of Mode1D), optionally over the limit modes."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for i, m in enumerate(modes):
            line, = ax.plot(m.grid, m.values, label=f"n={i + 1}")
            if limit_modes is not None and i < len(limit_modes):
                f = limit_modes[i]
                ax.plot(f.grid, f.values, ls="--", lw=0.8, color=line.get_color())
        ax.set_xlabel("y1")
        ax.set_ylabel("section average")
        if title:
            ax.set_title(title)
        ax.legend(fontsize="small")
        _save(fig, path)

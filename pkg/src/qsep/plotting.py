"""Figures for the report bundle.

PNG output is written without the software-version metadata block so that
reruns with the same matplotlib produce identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.4),
    "savefig.dpi": 120,
}


def save_figure(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_e_theta(curves, path, title: str = "") -> Path:
    """One panel of E(theta) curves.

    ``curves`` maps a label to ``(thetas, measured, errors, exact)`` where
    ``errors`` and ``exact`` may be ``None``.
    """
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for label, (thetas, measured, errors, exact) in curves.items():
            deg = [math.degrees(t) for t in thetas]
            if exact is not None:
                ax.plot(deg, exact, lw=1.0, alpha=0.6)
            color = ax.lines[-1].get_color() if exact is not None else None
            ax.errorbar(deg, measured, yerr=errors, fmt="o", ms=3, color=color, label=label)
        ax.axhline(0.0, color="0.7", lw=0.5)
        ax.set_xlabel(r"$\theta$ (degrees)")
        ax.set_ylabel(r"$E(\theta)$")
        ax.set_xlim(0, 180)
        ax.set_ylim(-1.05, 1.05)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
    return save_figure(fig, path)


def plot_fisher(estimates, path, reference: float | None = 1.0, title: str = "") -> Path:
    """Finite-difference Fisher information against theta, with SE bars."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        deg = [math.degrees(e.theta) for e in estimates]
        ax.errorbar(deg, [e.fisher for e in estimates], yerr=[e.se for e in estimates],
                    fmt="o", ms=3, label="estimate")
        if reference is not None:
            ax.axhline(reference, color="k", lw=0.8, ls="--", label=f"$I_F = {reference:g}$")
        ax.set_xlabel(r"$\theta$ (degrees)")
        ax.set_ylabel(r"$I_F$")
        ax.set_xlim(0, 180)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
    return save_figure(fig, path)

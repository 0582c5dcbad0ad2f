"""Matplotlib figure rendering for spectra and curvature reports.

Figures are written next to the delimited output files; they are a
convenience view of the same data and carry no information of their own.
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

BAND_COLOR = "#2b7bba"
GAP_COLOR = "#d1495b"


def save_spectrum_figure(path, structure, potential=None, span=None, title=None):
    """Band/gap diagram, optionally with the generating potential above it."""
    if potential is not None:
        fig, (ax_pot, ax) = plt.subplots(
            2, 1, figsize=(8.0, 5.0), height_ratios=[1.0, 1.0], constrained_layout=True
        )
        s_lo = potential.s0
        s_hi = span if span is not None else _default_span(potential)
        s = np.linspace(s_lo, s_hi, 2000)
        ax_pot.plot(s, np.asarray(potential(s), dtype=float), lw=1.0, color="k")
        ax_pot.set_xlabel("s")
        ax_pot.set_ylabel("W(s)")
        ax_pot.grid(alpha=0.3)
    else:
        fig, ax = plt.subplots(figsize=(8.0, 2.6), constrained_layout=True)

    lo = min((b.lower for b in structure.bands), default=0.0)
    ax.set_xlim(lo - 0.05 * (structure.lambda_max - lo), structure.lambda_max)
    ax.set_ylim(0.0, 1.0)
    ax.set_yticks([])
    for b in structure.bands:
        ax.axvspan(b.lower, b.upper, color=BAND_COLOR, alpha=0.75)
    for g in structure.gaps:
        ax.axvspan(g.lower, g.upper, color=GAP_COLOR, alpha=0.85 if g.resolved else 0.4)
    ax.set_xlabel("energy")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _default_span(potential):
    tail = getattr(potential, "tail", None)
    onset = getattr(tail, "onset", potential.s0 + 10.0)
    period = getattr(getattr(tail, "q", None), "period", 1.0)
    return onset + 4.0 * period


def save_curvature_figure(path, s, k_min, k_max, k_target, title=None):
    """Per-sample extremal sectional curvatures along the cusp."""
    fig, ax = plt.subplots(figsize=(8.0, 3.2), constrained_layout=True)
    ax.fill_between(s, k_min, k_max, color=BAND_COLOR, alpha=0.4, label="curvature range")
    ax.plot(s, k_min, lw=0.8, color=BAND_COLOR)
    ax.plot(s, k_max, lw=0.8, color=BAND_COLOR)
    ax.axhline(k_target, color=GAP_COLOR, lw=1.0, ls="--", label=f"target {k_target:g}")
    ax.set_xlabel("s")
    ax.set_ylabel("sectional curvature")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=150)
    plt.close(fig)

"""Figure rendering for the batch front-end.

Only the CLI imports this module; the numerical core never does, so the
library can run without a display stack.  Every function writes one PNG
next to the delimited output it illustrates.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _save(fig, path) -> None:
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def field_heatmap(omega, T_values, Q_values, values, path) -> None:
    """Melnikov functional over one junction cell, with its minimum marked."""
    fig, ax = plt.subplots(figsize=(5.4, 4.4))
    mesh = ax.pcolormesh(T_values, Q_values, values, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=r"$A_\omega(Q_0, T_0)$")
    i, j = np.unravel_index(np.argmin(values), np.asarray(values).shape)
    ax.plot(T_values[j], Q_values[i], "r+", markersize=12, markeredgewidth=2)
    ax.set_xlabel(r"$T_0$")
    ax.set_ylabel(r"$Q_0$")
    ax.set_title(rf"$\omega = {omega:g}$")
    _save(fig, path)


def gap_sweep(omegas, gaps, path) -> None:
    """Certification margin across the frequency band."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(omegas, gaps, lw=1.2)
    ax.axhline(0.0, color="k", lw=0.8, alpha=0.5)
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel("boundary gap")
    ax.set_title("Condition 1 margin")
    _save(fig, path)


def curve_overview(times, q_nodes, Q_nodes, path, junctions=()) -> None:
    """Pendulum angle and rotor velocity along a solved curve."""
    t = np.asarray(times)
    fig, (ax_q, ax_v) = plt.subplots(2, 1, figsize=(7.0, 5.2), sharex=True)
    ax_q.plot(t, q_nodes, lw=0.9)
    ax_q.set_ylabel(r"$q(t)$")
    v = np.diff(Q_nodes) / np.diff(t)
    ax_v.plot(0.5 * (t[1:] + t[:-1]), v, lw=0.9)
    ax_v.set_ylabel(r"$\dot Q(t)$")
    ax_v.set_xlabel(r"$t$")
    for tj, _ in junctions:
        for ax in (ax_q, ax_v):
            ax.axvline(tj, color="r", lw=0.7, alpha=0.5)
    _save(fig, path)


def scaling_loglog(mus, t_ds, exponent, path) -> None:
    """Drift time against 1/mu on log axes, with the fitted power law."""
    mus = np.asarray(mus, dtype=float)
    t_ds = np.asarray(t_ds, dtype=float)
    ok = np.isfinite(t_ds)
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.loglog(1.0 / mus[ok], t_ds[ok], "o", ms=6)
    if ok.sum() >= 2 and math.isfinite(exponent):
        x = np.log(1.0 / mus[ok])
        y = np.log(t_ds[ok])
        offset = np.mean(y) - exponent * np.mean(x)
        xs = np.linspace(x.min(), x.max(), 32)
        ax.loglog(np.exp(xs), np.exp(offset + exponent * xs), "--", lw=1.0,
                  label=rf"$t_d \propto \mu^{{-{exponent:.2f}}}$")
        ax.legend()
    ax.set_xlabel(r"$1/\mu$")
    ax.set_ylabel(r"$t_d$")
    _save(fig, path)

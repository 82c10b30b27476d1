"""Figures for run directories, rendered off-screen to PNG."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_norm_series(series: dict[str, np.ndarray], path) -> Path:
    fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
    labels = {"l2_norm": r"$\|\theta\|_{L^2}$", "besov_2_2_1": r"$\|\theta\|_{\dot B^2_{2,1}}$",
              "grad_linf": r"$\|\nabla\theta\|_{L^\infty}$"}
    for ax, (key, label) in zip(axes, labels.items()):
        ax.plot(series["time"], series[key], lw=1.2)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    return _save(fig, path)


def plot_report(rows, path) -> Path:
    """Worst measured ratio per inequality, one marker per resolution and mu."""
    idents = list(dict.fromkeys(r[0] for r in rows))
    fig, ax = plt.subplots(figsize=(7, max(3.0, 0.28 * len(idents) + 1)))
    ns = sorted({r[1] for r in rows})
    markers = "os^vD<>"
    for k, n in enumerate(ns):
        ys, xs = [], []
        for ident, nn, _mu, ratio in rows:
            if nn == n:
                ys.append(idents.index(ident))
                xs.append(ratio)
        ax.scatter(xs, ys, marker=markers[k % len(markers)], s=18, label=f"N={n}", alpha=0.8)
    ax.set_yticks(range(len(idents)))
    ax.set_yticklabels(idents, fontsize=7)
    ax.invert_yaxis()
    if rows and min(r[3] for r in rows) > 0:
        ax.set_xscale("log")
    ax.set_xlabel("max ratio LHS / RHS")
    ax.grid(alpha=0.3)
    if ns:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(mus, cl_norms, differences, path) -> Path:
    mus = np.asarray(mus, dtype=float)
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
    pos = mus > 0
    a.semilogx(mus[pos], np.asarray(cl_norms)[pos], "o-")
    a.set_xlabel(r"$\mu$")
    a.set_ylabel("Chemin-Lerner norm, s = 2")
    a.invert_xaxis()
    a.grid(alpha=0.3)
    d = np.asarray([x for x in differences if not math.isnan(x)], dtype=float)
    if len(d) and np.all(d > 0):
        b.loglog(mus[: len(d)], d, "s-")
        b.invert_xaxis()
    b.set_xlabel(r"$\mu$ (larger of the pair)")
    b.set_ylabel(r"$\sup_t \|\theta_\mu - \theta_{\mu'}\|_{L^2}$")
    b.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_growth(curves: dict[int, dict[str, np.ndarray]], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for n, c in sorted(curves.items()):
        line, = ax.plot(c["time"], c["ratio"], lw=1.2, label=f"N={n} growth")
        ax.plot(c["time"], c["envelope"], ls="--", color=line.get_color(), label=f"N={n} envelope")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\|w(t)\|_{L^2} / \|w(0)\|_{L^2}$")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)

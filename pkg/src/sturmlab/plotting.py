"""Optional figures; matplotlib is imported only when a plot is requested."""

from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_bands(tree, path: str, max_order: int | None = None):
    """Bands as horizontal segments, one row per order."""
    plt = _plt()
    depth = tree.depth if max_order is None else max_order
    fig, ax = plt.subplots(figsize=(8, 0.4 * depth + 2))
    colors = {1: "tab:blue", 2: "tab:orange", 3: "tab:green"}
    for n in range(depth + 1):
        for b in tree.level(n):
            ax.plot([float(b.lo), float(b.hi)], [n, n], color=colors[b.band_type], lw=6, solid_capstyle="butt")
    ax.invert_yaxis()
    ax.set_xlabel("E")
    ax.set_ylabel("order")
    ax.set_title(f"bands, coupling {tree.lam:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_pressure(curve, path: str):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(curve.t_grid, curve.values, yerr=3 * np.asarray(curve.stderr), marker="o", capsize=3)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("pressure (+-3 se)")
    ax.set_title(f"n={curve.n}, coupling {curve.lam:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_gap_ratios(rows, path: str):
    """``rows`` are ``(order, ratio * a^3)`` pairs."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 4))
    o = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    ax.semilogy(o, v, ".", alpha=0.4)
    ax.set_xlabel("order")
    ax.set_ylabel("|G|/|B| * a^3")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ids(eigenvalues, path: str):
    """Integrated density of states of a periodic approximant."""
    plt = _plt()
    ev = np.sort(np.asarray(eigenvalues, float))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(ev, np.arange(1, len(ev) + 1) / len(ev), where="post")
    ax.set_xlabel("E")
    ax.set_ylabel("IDS")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_local_dimensions(values, path: str):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.hist(np.asarray(values, float), bins=30)
    ax.set_xlabel("local dimension estimate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

"""Figure rendering for the CLI reports. Always writes to files (Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_conditional_law(path, t, mean, lower, upper, s_points, y, samples=None):
    """Conditional mean with a two-sigma envelope and the observed values."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.fill_between(t, lower, upper, color="C0", alpha=0.2, lw=0, label=r"mean $\pm 2\sigma$")
        if samples is not None:
            for p in samples:
                ax.plot(t, p, color="0.5", lw=0.5, alpha=0.6)
        ax.plot(t, mean, color="C0", lw=1.5, label="conditional mean")
        ax.plot(s_points, y, ".", color="C3", ms=3, label="observation")
        ax.set_xlabel("t")
        ax.set_ylabel("field value")
        ax.legend(frameon=False, loc="best")
        return _save(fig, path)


def plot_samples(path, t, paths, title=""):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for p in np.atleast_2d(paths)[:50]:
            ax.plot(t, p, lw=0.7)
        ax.set_xlabel("t")
        ax.set_title(title)
        return _save(fig, path)


def plot_divergence(path, rows):
    """Continuity ratio and observation/mean sizes along the bumps family."""
    N = [r["n_bumps"] for r in rows]
    with plt.rc_context(RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
        ax1.plot(N, [r["m_delta"] for r in rows], "o-", color="C3")
        ax1.set_yscale("log", base=2)
        ax1.set_xlabel("number of bumps N")
        ax1.set_ylabel("continuity ratio M")
        ax2.plot(N, [r["y_norm"] for r in rows], "s-", label=r"$\|y_N\|_\infty$")
        ax2.plot(N, [r["mean_norm"] for r in rows], "o-", label=r"$\|m(y_N)\|_\infty$")
        ax2.axhline(1.0, color="k", lw=0.8, ls=":")
        ax2.set_yscale("log")
        ax2.set_xlabel("number of bumps N")
        ax2.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_z_scores(path, reports):
    """Horizontal bar chart of z-scores against the +-3 band."""
    names = [r["name"] for r in reports]
    z = [r["z_score"] if np.isfinite(r["z_score"]) else np.sign(r["z_score"]) * 10 for r in reports]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 0.4 * len(names) + 1))
        colors = ["C2" if r["pass"] else "C3" for r in reports]
        ax.barh(range(len(names)), z, color=colors)
        ax.set_yticks(range(len(names)))
        ax.set_yticklabels(names)
        for x in (-3, 3):
            ax.axvline(x, color="k", lw=0.8, ls="--")
        ax.set_xlabel("z-score")
        return _save(fig, path)

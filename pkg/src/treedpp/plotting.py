"""SVG figures for samples, spectra and count laws (non-interactive backend)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no date stamp keep SVG output reproducible
matplotlib.rcParams["svg.hashsalt"] = "treedpp"
_META = {"Date": None, "Creator": "treedpp"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_points_2d(points, window, path, title="lifted sample"):
    """Scatter of planar points (e.g. an unlabeled Ginibre lift)."""
    pts = np.asarray(points).reshape(-1, 2)
    lo, hi = window
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(pts[:, 0], pts[:, 1], s=6, c="tab:blue")
    ax.set_xlim(lo, hi)
    ax.set_ylim(lo, hi)
    ax.set_aspect("equal")
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    ax.set_title(title)
    return _save(fig, path)


def plot_points_1d(points, window, path, first=None, bins=40, title="lifted samples"):
    """Histogram of all points, with a rug of the first configuration."""
    pts = np.asarray(points).ravel()
    lo, hi = window
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.hist(pts, bins=bins, range=(lo, hi), color="tab:gray", alpha=0.7)
    if first is not None and len(first):
        top = ax.get_ylim()[1]
        ax.vlines(np.asarray(first).ravel(), 0, 0.08 * top, colors="tab:red", linewidth=1)
    ax.set_xlim(lo, hi)
    ax.set_xlabel("x")
    ax.set_ylabel("count")
    ax.set_title(title)
    return _save(fig, path)


def plot_spectrum(eigenvalues, path, eps=1e-8, title="projected kernel spectrum"):
    lam = np.sort(np.asarray(eigenvalues))[::-1]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(1, len(lam) + 1), lam, ".", ms=3)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title(f"{title} (containment eps {eps:g})")
    return _save(fig, path)


def plot_count_laws(outcomes, freq_a, freq_b, path, labels=("level l", "level l'"), exact=None):
    x = np.arange(len(outcomes))
    fig, ax = plt.subplots(figsize=(max(5, 0.35 * len(outcomes) + 2), 3.5))
    ax.bar(x - 0.2, freq_a, width=0.4, label=labels[0])
    ax.bar(x + 0.2, freq_b, width=0.4, label=labels[1])
    if exact is not None:
        ax.plot(x, exact, "k_", ms=14, label="exact")
    ax.set_xticks(x)
    ax.set_xticklabels([str(o) for o in outcomes], rotation=90, fontsize=7)
    ax.set_ylabel("frequency")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)

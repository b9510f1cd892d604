"""Static SVG figures for analysis and evaluation reports.

Output is byte-deterministic: a fixed hash salt replaces matplotlib's
per-process element ids and the creation date is stripped. Each figure
embeds the producing config echo in its SVG metadata.
"""

import matplotlib

matplotlib.use("Agg")

import json
import math

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "layerlens"


def _save(fig, path, config_echo):
    metadata = {"Date": None}
    if config_echo is not None:
        metadata["Description"] = json.dumps(config_echo, sort_keys=True)
    fig.savefig(path, format="svg", metadata=metadata)
    plt.close(fig)


def entropy_plane(path, reports, curve=None, config_echo=None):
    """H[s] vs H[k], normalized by log M, one series per labelled report.

    ``reports`` maps a series label to a list of RraPoints (or any objects
    with resolution_norm / relevance_norm attributes).
    """
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    if curve is not None:
        log_m = math.log(curve.total)
        order = np.argsort(curve.resolution)
        ax.plot(
            curve.resolution[order] / log_m,
            curve.relevance[order] / log_m,
            "k:",
            lw=1.2,
            label="maximal H[k]",
        )
    markers = ["s", "o", "^", "D", "v", "*"]
    for i, (label, points) in enumerate(reports.items()):
        xs = [p.resolution_norm for p in points]
        ys = [p.relevance_norm for p in points]
        ax.plot(xs, ys, marker=markers[i % len(markers)], ms=5, lw=1.0, label=label)
    ax.set_xlabel("H[s] / log M")
    ax.set_ylabel("H[k] / log M")
    ax.set_xlim(-0.02, 1.02)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path, config_echo)


def spectra(path, series, config_echo=None):
    """Log-log degeneracy spectra with fitted slopes.

    ``series`` maps a label to (DegeneracySpectrum, PowerLawFit or None).
    """
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    markers = ["o", "s", "^", "D", "v", "*", "P", "X"]
    for i, (label, (spectrum, fit)) in enumerate(series.items()):
        k = spectrum.k_values
        m = spectrum.m_values
        text = label if fit is None else f"{label} (beta={fit.beta:.2f})"
        ax.loglog(k, m, markers[i % len(markers)], ms=4, mfc="none", label=text)
        if fit is not None:
            ks = np.array([k.min(), k.max()], dtype=float)
            anchor = m.max() * (ks / k.min()) ** (-(fit.beta + 1.0))
            ax.loglog(ks, anchor, "-", lw=0.8, color="gray")
    ax.set_xlabel("state frequency k")
    ax.set_ylabel("degeneracy m_k")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path, config_echo)


def beta_by_layer(path, reports, config_echo=None):
    """Fitted exponent per layer, one series per labelled report."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for label, points in reports.items():
        xs = [p.layer_index for p in points if p.beta is not None]
        ys = [p.beta for p in points if p.beta is not None]
        errs = [p.beta_stderr for p in points if p.beta is not None]
        ax.errorbar(xs, ys, yerr=errs, marker="s", ms=5, lw=1.0, capsize=3, label=label)
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("hidden layer")
    ax.set_ylabel("power-law exponent beta")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path, config_echo)


def ability_vs_beta(path, layer_rows, config_echo=None):
    """Generation ability and classification error against each layer's beta.

    ``layer_rows`` is a list of dicts with keys layer, beta, ability (None
    when unbounded), classification_error (optional).
    """
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    usable = [r for r in layer_rows if r.get("beta") is not None and r.get("ability")]
    xs = [r["beta"] for r in usable]
    ys = [r["ability"] for r in usable]
    ax.plot(xs, ys, "ks", ms=6)
    for r in usable:
        ax.annotate(str(r["layer"]), (r["beta"], r["ability"]), fontsize=7,
                    xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("power-law exponent beta")
    ax.set_ylabel("generation ability 1/D", color="k")
    errors = [r for r in layer_rows if r.get("beta") is not None
              and r.get("classification_error") is not None]
    if errors:
        ax2 = ax.twinx()
        ax2.plot(
            [r["beta"] for r in errors],
            [r["classification_error"] for r in errors],
            "o",
            color="tab:blue",
            ms=5,
        )
        ax2.set_ylabel("classification error", color="tab:blue")
    fig.tight_layout()
    _save(fig, path, config_echo)


def sample_grid(path, images, image_shape, n_columns=8, config_echo=None):
    """Grayscale grid of generated samples (values in [0, 1])."""
    images = np.asarray(images)
    n = images.shape[0]
    n_columns = min(n_columns, n)
    n_rows = (n + n_columns - 1) // n_columns
    fig, axes = plt.subplots(
        n_rows, n_columns, figsize=(n_columns * 0.9, n_rows * 0.9), squeeze=False
    )
    for idx in range(n_rows * n_columns):
        ax = axes[idx // n_columns][idx % n_columns]
        ax.axis("off")
        if idx < n:
            ax.imshow(
                images[idx].reshape(image_shape), cmap="gray_r", vmin=0.0, vmax=1.0,
                interpolation="nearest",
            )
    fig.tight_layout()
    _save(fig, path, config_echo)

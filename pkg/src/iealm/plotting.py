"""Figures written next to the JSON reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .lclm import FunctionalGraph, GraphStats  # noqa: E402

STAGE_BUDGET = {"T2": 17, "V": 6, "T1": 32, "T4": 17, "T3": 17, "codebook": 86}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_functional_graph(g: FunctionalGraph, stats: GraphStats, path) -> Path:
    size = g.size
    fig, ax = plt.subplots(figsize=(6, 6))
    src = np.arange(size * size)
    dst = np.asarray(g.successor)
    u0, v0 = np.divmod(src, size)
    u1, v1 = np.divmod(dst, size)
    moving = src != dst
    ax.quiver(u0[moving], v0[moving], (u1 - u0)[moving], (v1 - v0)[moving],
              angles="xy", scale_units="xy", scale=1, width=0.003, color="0.55", alpha=0.6)
    on_cycle = stats.on_cycle if stats.on_cycle is not None else np.zeros(size * size, bool)
    ax.scatter(u0[~on_cycle], v0[~on_cycle], s=12, c="tab:blue", label="transient")
    ax.scatter(u0[on_cycle], v0[on_cycle], s=22, c="tab:red", label="on cycle")
    loops = np.array(stats.self_loop_nodes).reshape(-1, 2)
    if len(loops):
        ax.scatter(loops[:, 0], loops[:, 1], s=80, facecolors="none", edgecolors="k", label="self-loop")
    if size <= 8:
        for s in src:
            ax.annotate(f"{u0[s]},{v0[s]}", (u0[s], v0[s]), fontsize=6, xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("previous state  u / 2^n")
    ax.set_ylabel("current state  v / 2^n")
    ax.set_title(f"n={g.n}: {stats.component_count} components, cycles {dict(sorted(stats.cycle_lengths.items()))}",
                 fontsize=9)
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=7)
    return _save(fig, path)


def plot_attack_panels(plain, cipher, recovered, path) -> Path:
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.6))
    for ax, img, title in zip(axes, (plain, cipher, recovered), ("plain", "cipher", "recovered")):
        img = np.asarray(img)
        ax.imshow(img, cmap="gray" if img.ndim == 2 else None, vmin=0, vmax=255, interpolation="nearest")
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
    return _save(fig, path)


def plot_query_counts(report: dict, path) -> Path:
    stages = list(STAGE_BUDGET)
    counts = [report["stages"][f"stage_{s}"] for s in stages]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    x = np.arange(len(stages))
    ax.bar(x, counts, color="tab:blue", label="queries")
    if report.get("packing") and tuple(report["dims"]) == (256, 256):
        ax.scatter(x, [STAGE_BUDGET[s] for s in stages], marker="_", s=400, c="k", label="256x256 budget")
    ax.set_xticks(x, stages)
    ax.set_ylabel("chosen plain-images")
    ax.set_title(f"{report['dims'][0]}x{report['dims'][1]}, total {report['total']}")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_corpus_histogram(report: dict, path) -> Path:
    edges = np.asarray(report["histogram"]["bin_edges"])
    centers = (edges[:-1] + edges[1:]) / 2
    width = np.diff(edges)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for ch, color in zip("rgb", ("tab:red", "tab:green", "tab:blue")):
        ax.step(centers, report["histogram"][ch], where="mid", color=color, label=ch)
    ax.set_xlim(0, 256)
    ax.set_xlabel("mean pixel value")
    ax.set_ylabel("images")
    ax.set_title(f"{report['count']} images, bin width {width[0]:g}")
    ax.legend(fontsize=8)
    return _save(fig, path)

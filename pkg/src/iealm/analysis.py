"""Key-space arithmetic and plain-image statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .imageio import ImageFormatError, read_image

# probability mass of a normal distribution within one standard deviation
ONE_SIGMA_MASS = 0.6827

# one-sigma bands of the per-channel mean pixel value over a natural-image corpus
NATURAL_IMAGE_INTERVALS = ((81.641, 159.609), (77.388, 151.382), (60.422, 144.984))


class EmptyCorpus(ValueError):
    pass


@dataclass(frozen=True)
class ChannelInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi <= 256:
            raise ValueError(f"bad interval ({self.lo}, {self.hi})")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def key_count(m: int, n: int) -> int:
    """Number of distinct channel-sum triples an M x N image can produce."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    return (255 * m * n) ** 3


def key_space_size(precision_bits: int, m: int, n: int) -> int:
    """``2^(2L) * (256 M N)^3`` as an exact integer."""
    if precision_bits < 0:
        raise ValueError("precision must be non-negative")
    return (1 << (2 * precision_bits)) * (256 * m * n) ** 3


def sigma_coverage(intervals: Sequence = NATURAL_IMAGE_INTERVALS) -> tuple[float, float]:
    """(joint probability of all three channels in band, fraction of the mean-value cube)."""
    ivs = [iv if isinstance(iv, ChannelInterval) else ChannelInterval(*iv) for iv in intervals]
    if len(ivs) != 3:
        raise ValueError("need one interval per colour channel")
    probability = ONE_SIGMA_MASS ** 3
    fraction = math.prod(iv.width / 256 for iv in ivs)
    return probability, fraction


def magnitude(value: int) -> dict:
    return {
        "value": str(value),
        "log2": round(math.log2(value), 6) if value else None,
        "log10": round(math.log10(value), 6) if value else None,
        "scientific": f"{value:.3e}",
    }


def keyspace_report(precision_bits: int, m: int, n: int) -> dict:
    prob, frac = sigma_coverage()
    return {
        "M": m,
        "N": n,
        "precision_bits": precision_bits,
        "key_count": magnitude(key_count(m, n)),
        "key_space_size": magnitude(key_space_size(precision_bits, m, n)),
        "sigma_coverage": {"probability": prob, "key_space_fraction": frac},
    }


def corpus_means(images: Iterable[np.ndarray], bin_width: float = 8.0, names: Sequence[str] | None = None) -> dict:
    """Per-image mean pixel value of each channel, plus per-channel histograms.

    Single-channel images count their one mean for all three channels.
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    means = []
    for img in images:
        img = np.asarray(img)
        if img.ndim == 2:
            mu = float(img.mean())
            means.append((mu, mu, mu))
        else:
            means.append(tuple(float(img[:, :, c].mean()) for c in range(3)))
    if not means:
        raise EmptyCorpus("no images in corpus")
    arr = np.asarray(means)
    edges = np.arange(0.0, 256.0 + bin_width, bin_width)
    edges[-1] = max(edges[-1], 256.0)
    hist = {ch: np.histogram(arr[:, c], bins=edges)[0].tolist() for c, ch in enumerate("rgb")}
    names = list(names) if names is not None else [str(i) for i in range(len(means))]
    return {
        "count": len(means),
        "images": [{"name": nm, "means": list(mu)} for nm, mu in zip(names, means)],
        "mean_of_means": arr.mean(axis=0).tolist(),
        "std_of_means": arr.std(axis=0).tolist(),
        "histogram": {"bin_edges": edges.tolist(), **hist},
    }


def load_corpus(directory: str | Path) -> tuple[list[np.ndarray], list[str]]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    images, names = [], []
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() not in (".ppm", ".pgm", ".raw", ".ieal"):
            continue
        try:
            images.append(read_image(path))
        except ImageFormatError:
            continue
        names.append(path.name)
    if not images:
        raise EmptyCorpus(f"{directory}: no readable PPM/PGM images")
    return images, names

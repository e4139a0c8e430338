"""Keystream derivation: chaotic orbits -> nibble/byte sequences and bit-plane permutations."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lclm import MapParams, State, orbit

DISCARD = 250
B_MIN, B_MAX = 1.69, 2.0


class ChannelSums(NamedTuple):
    r: int
    g: int
    b: int


@dataclass(frozen=True)
class KeyMaterial:
    b: float
    sums: ChannelSums

    def __post_init__(self):
        if not B_MIN <= self.b < B_MAX:
            raise ValueError(f"control parameter b={self.b} outside [{B_MIN}, {B_MAX})")
        sums = ChannelSums(*(int(s) for s in self.sums))
        if any(s < 0 for s in sums):
            raise ValueError("channel sums must be non-negative")
        object.__setattr__(self, "sums", sums)


class InitialConditions(NamedTuple):
    k1: State
    k2: State


def derive_initial_conditions(s: ChannelSums) -> InitialConditions:
    xr, yg, zb = (v / 1e9 for v in s)
    return InitialConditions(
        State(0.2 + xr, 0.4 + yg, 0.1 + zb),
        State(0.3 + xr, 0.5 + yg, 0.2 + zb),
    )


def quantize_u(x: float) -> int:
    return math.floor(abs(x) * 1e15) % 16


def quantize_vw(x: float) -> int:
    scaled = x * 1e3
    frac = scaled - math.floor(scaled)
    return math.floor(frac * 1e3) % 256


def quantize_u_array(x: np.ndarray) -> np.ndarray:
    return (np.floor(np.abs(x) * 1e15) % 16).astype(np.uint8)


def quantize_vw_array(x: np.ndarray) -> np.ndarray:
    scaled = x * 1e3
    frac = scaled - np.floor(scaled)
    return (np.floor(frac * 1e3) % 256).astype(np.uint8)


def rank_permutation(seq) -> np.ndarray:
    """0-based ascending rank of each element, ties broken by index."""
    seq = np.asarray(seq, dtype=np.float64)
    order = np.argsort(seq, kind="stable")
    ranks = np.empty(len(seq), dtype=np.int64)
    ranks[order] = np.arange(len(seq), dtype=np.int64)
    return ranks


def sort_order_permutation(seq) -> np.ndarray:
    """Indices that sort ``seq`` ascending (stable); ``T(i)`` is the index of the i-th smallest.

    This is the inverse of :func:`rank_permutation` and is what the keystream uses.
    """
    return np.argsort(np.asarray(seq, dtype=np.float64), kind="stable").astype(np.int64)


def is_bijection(perm: np.ndarray, size: int | None = None) -> bool:
    perm = np.asarray(perm)
    size = len(perm) if size is None else size
    if perm.ndim != 1 or len(perm) != size:
        return False
    if size == 0:
        return True
    if perm.min() < 0 or perm.max() >= size:
        return False
    return bool(np.all(np.bincount(perm, minlength=size) == 1))


@dataclass(frozen=True)
class Keystream:
    """All pseudo-random material for one image.

    ``T1`` .. ``T4`` have shape (4, MN); row k permutes bit-plane k.
    Primed sequences are stored as ``U2``, ``V2``, ``W2``.
    """

    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    U2: np.ndarray
    V2: np.ndarray
    W2: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    T4: np.ndarray

    @property
    def mn(self) -> int:
        return len(self.U)

    def families(self) -> dict[str, np.ndarray]:
        return {"T1": self.T1, "T2": self.T2, "T3": self.T3, "T4": self.T4}

    def to_json(self) -> str:
        doc = {name: getattr(self, name).tolist() for name in ("U", "V", "W", "U2", "V2", "W2")}
        doc.update({name: fam.tolist() for name, fam in self.families().items()})
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Keystream":
        doc = json.loads(text)
        seqs = {k: np.asarray(doc[k], dtype=np.uint8) for k in ("U", "V", "W", "U2", "V2", "W2")}
        perms = {k: np.asarray(doc[k], dtype=np.int64) for k in ("T1", "T2", "T3", "T4")}
        return cls(**seqs, **perms)

    @classmethod
    def zero(cls, mn: int) -> "Keystream":
        """All-zero sequences with identity permutations; handy for hand checks."""
        z = np.zeros(mn, dtype=np.uint8)
        ident = np.tile(np.arange(mn, dtype=np.int64), (4, 1))
        return cls(z, z, z, z, z, z, ident, ident, ident, ident)


def _half_from(k: State, b: float, mn: int):
    xs, ys, zs = orbit(k, MapParams(b), keep=2 * mn, discard=DISCARD)
    gs = (xs + ys + zs) / 3
    u = quantize_u_array(xs[:mn])
    v = quantize_vw_array(ys[:mn])
    w = quantize_vw_array(zs[:mn])
    first = np.stack([sort_order_permutation(s[:mn]) for s in (xs, ys, zs, gs)])
    second = np.stack([sort_order_permutation(s[mn:]) for s in (xs, ys, zs, gs)])
    return u, v, w, first, second


def generate_keystream(k: KeyMaterial, mn: int) -> Keystream:
    """Full keystream for an image of ``mn`` pixels.

    Row m of each family comes from source X, Y, Z, G for m = 0..3.  The
    families acting on the high nibble (T2, T4) are sorted from the first
    half of their orbit and those acting on the low nibble (T1, T3) from the
    second half; with this assignment the published reference trace for key
    (1.99, 29676, 9202, 62299) is reproduced exactly.
    """
    if mn < 1:
        raise ValueError("MN must be at least 1")
    k1, k2 = derive_initial_conditions(k.sums)
    u, v, w, t2, t1 = _half_from(k1, k.b, mn)
    u2, v2, w2, t4, t3 = _half_from(k2, k.b, mn)
    return Keystream(u, v, w, u2, v2, w2, t1, t2, t3, t4)

"""Nibble, bit-plane and modular-arithmetic primitives.

Scalar helpers validate their operands; the ``*_array`` variants work on
numpy arrays of unsigned bytes and are what the cipher and attack use.
"""

from __future__ import annotations

import numpy as np


def _check_width(value: int, width: int, name: str = "operand") -> None:
    if not 0 <= value < (1 << width):
        raise ValueError(f"{name}={value} outside [0, 2**{width})")


def spl(x: int) -> tuple[int, int]:
    """Split a byte into (low nibble, high nibble)."""
    _check_width(x, 8, "x")
    return x & 0x0F, x >> 4


def combine(low: int, high: int) -> int:
    _check_width(low, 4, "low")
    _check_width(high, 4, "high")
    return low | (high << 4)


def bit(x: int, k: int, width: int = 8) -> int:
    """k-th least significant bit of ``x``."""
    if not 0 <= k < width:
        raise ValueError(f"bit index {k} out of range for width {width}")
    _check_width(x, width, "x")
    return (x >> k) & 1


def boxplus(a: int, b: int, n0: int) -> int:
    _check_width(a, n0, "a")
    _check_width(b, n0, "b")
    return (a + b) % (1 << n0)


def boxminus(a: int, b: int, n0: int) -> int:
    _check_width(a, n0, "a")
    _check_width(b, n0, "b")
    return (a - b) % (1 << n0)


def carry_low_to_high(l: int, v: int) -> int:
    """Carry out of the low nibble when adding ``l + v``."""
    _check_width(l, 4, "l")
    _check_width(v, 4, "v")
    return (l + v) >> 4


# -- vectorised forms -------------------------------------------------------

def spl_array(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.uint8)
    return x & 0x0F, x >> 4


def combine_array(low: np.ndarray, high: np.ndarray) -> np.ndarray:
    return (np.asarray(low, dtype=np.uint8) & 0x0F) | ((np.asarray(high, dtype=np.uint8) & 0x0F) << 4)


def bit_array(x: np.ndarray, k: int) -> np.ndarray:
    return (np.asarray(x, dtype=np.uint8) >> k) & 1


def boxplus_array(a: np.ndarray, b: np.ndarray, n0: int) -> np.ndarray:
    mask = (1 << n0) - 1
    return ((np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64)) & mask).astype(np.uint8)


def boxminus_array(a: np.ndarray, b: np.ndarray, n0: int) -> np.ndarray:
    mask = (1 << n0) - 1
    return ((np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)) & mask).astype(np.uint8)


def carry_array(l: np.ndarray, v: np.ndarray) -> np.ndarray:
    return ((np.asarray(l, dtype=np.int64) + np.asarray(v, dtype=np.int64)) >> 4).astype(np.uint8)

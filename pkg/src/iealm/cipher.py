"""Channel-level encryption and decryption, and the RGB wrappers.

Images are numpy ``uint8`` arrays of shape (M, N, 3) or (M, N).  A channel
is the raster-order flattening of one colour plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitops import boxminus_array, boxplus_array, combine_array, spl_array
from .keystream import ChannelSums, Keystream, KeyMaterial, generate_keystream, is_bijection


class InvalidPermutation(ValueError):
    pass


def _check_family(T: np.ndarray, mn: int) -> np.ndarray:
    T = np.asarray(T)
    if T.shape != (4, mn) or not all(is_bijection(row, mn) for row in T):
        raise InvalidPermutation(f"permutation family of shape {T.shape} is not 4 bijections on {mn} points")
    return T


def permute_bits(nibbles: np.ndarray, T: np.ndarray, check: bool = True) -> np.ndarray:
    """Gather bit-plane k of output pixel i from input pixel ``T[k][i]``."""
    nibbles = np.asarray(nibbles, dtype=np.uint8)
    if check:
        T = _check_family(T, len(nibbles))
    out = np.zeros_like(nibbles)
    for k in range(4):
        out |= nibbles[T[k]] & np.uint8(1 << k)
    return out


def inverse_permute_bits(nibbles: np.ndarray, T: np.ndarray, check: bool = True) -> np.ndarray:
    nibbles = np.asarray(nibbles, dtype=np.uint8)
    if check:
        T = _check_family(T, len(nibbles))
    out = np.zeros_like(nibbles)
    for k in range(4):
        out[T[k]] |= nibbles & np.uint8(1 << k)
    return out


@dataclass
class CipherTrace:
    """Every intermediate buffer of one channel encryption."""

    I: np.ndarray
    I_star: np.ndarray  # I (+) V
    I_2star: np.ndarray  # W xor I*
    L_2star: np.ndarray
    H_2star: np.ndarray
    L_2star_perm: np.ndarray  # T1 applied to L**
    H_2star_perm: np.ndarray  # T2 applied to H**
    L1: np.ndarray  # L'
    L1_perm: np.ndarray  # T3 applied to L'
    H_2star_perm4: np.ndarray  # T4 applied to H**
    H1: np.ndarray  # H'
    I1: np.ndarray  # I'
    I2: np.ndarray  # I'', the cipher channel


def _validate(ks: Keystream, mn: int) -> None:
    if ks.mn != mn:
        raise ValueError(f"keystream length {ks.mn} does not match channel length {mn}")
    for T in ks.families().values():
        _check_family(T, mn)


def encrypt_channel(I: np.ndarray, ks: Keystream, check: bool = True) -> CipherTrace:
    I = np.asarray(I, dtype=np.uint8).ravel()
    if check:
        _validate(ks, len(I))
    i_star = boxplus_array(I, ks.V, 8)
    i_2star = ks.W ^ i_star
    l2, h2 = spl_array(i_2star)
    l2p = permute_bits(l2, ks.T1, check=False)
    h2p = permute_bits(h2, ks.T2, check=False)
    l1 = ks.U ^ l2p ^ h2p
    l1p = permute_bits(l1, ks.T3, check=False)
    h2p4 = permute_bits(h2, ks.T4, check=False)
    h1 = ks.U2 ^ l1p ^ h2p4
    i1 = combine_array(l1, h1)
    i2 = ks.W2 ^ boxplus_array(i1, ks.V2, 8)
    return CipherTrace(I, i_star, i_2star, l2, h2, l2p, h2p, l1, l1p, h2p4, h1, i1, i2)


def decrypt_channel(I2: np.ndarray, ks: Keystream, check: bool = True) -> np.ndarray:
    I2 = np.asarray(I2, dtype=np.uint8).ravel()
    if check:
        _validate(ks, len(I2))
    i1 = boxminus_array(I2 ^ ks.W2, ks.V2, 8)
    l1, h1 = spl_array(i1)
    h2p4 = h1 ^ ks.U2 ^ permute_bits(l1, ks.T3, check=False)
    h2 = inverse_permute_bits(h2p4, ks.T4, check=False)
    l2p = l1 ^ ks.U ^ permute_bits(h2, ks.T2, check=False)
    l2 = inverse_permute_bits(l2p, ks.T1, check=False)
    i_2star = combine_array(l2, h2)
    return boxminus_array(i_2star ^ ks.W, ks.V, 8)


# -- whole images -----------------------------------------------------------

def channel_sums(img: np.ndarray) -> ChannelSums:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (M, N, 3) image, got shape {img.shape}")
    return ChannelSums(*(int(img[:, :, c].sum(dtype=np.int64)) for c in range(3)))


def _check_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected a uint8 (M, N, 3) image, got {img.dtype} {img.shape}")
    if img.shape[0] * img.shape[1] < 2:
        raise ValueError("image must have at least two pixels")
    return img


def apply_keystream(img: np.ndarray, ks: Keystream, decrypt: bool = False) -> np.ndarray:
    """Run every channel of ``img`` through the cipher with one shared keystream."""
    img = np.asarray(img, dtype=np.uint8)
    planes = img[:, :, None] if img.ndim == 2 else img
    m, n, c = planes.shape
    _validate(ks, m * n)
    out = np.empty_like(planes)
    for ch in range(c):
        flat = planes[:, :, ch].ravel()
        res = decrypt_channel(flat, ks, check=False) if decrypt else encrypt_channel(flat, ks, check=False).I2
        out[:, :, ch] = res.reshape(m, n)
    return out.reshape(img.shape)


def encrypt_rgb(img: np.ndarray, b: float, sums: ChannelSums | None = None) -> np.ndarray:
    """Encrypt an RGB image.

    With ``sums=None`` the channel sums are taken from ``img`` itself, as the
    cipher prescribes; passing explicit sums freezes the keystream.
    """
    img = _check_rgb(img)
    m, n, _ = img.shape
    key = KeyMaterial(b, channel_sums(img) if sums is None else ChannelSums(*sums))
    return apply_keystream(img, generate_keystream(key, m * n))


def decrypt_rgb(img: np.ndarray, b: float, sums: ChannelSums) -> np.ndarray:
    img = _check_rgb(img)
    m, n, _ = img.shape
    ks = generate_keystream(KeyMaterial(b, ChannelSums(*sums)), m * n)
    return apply_keystream(img, ks, decrypt=True)

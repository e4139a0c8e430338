"""Chosen-plaintext recovery of an equivalent key, stage by stage.

Stage order: T2, V (low nibble then three bits of the high nibble), T1,
T4, T3, codebook.  Every stage works on single-channel plaintexts; because
all three colour channels share one keystream, a :class:`AttackSession`
with packing enabled fits three of them into each RGB query.

Naming of nibble-domain buffers follows the cipher:  ``I*`` is the byte
after the modular addition, ``L*``/``H*`` its nibbles, and the "star
domain" value ``I★ = L★ + 16 H★`` is what the last two bit-permutation
layers see after the keyed XOR terms are factored out.
"""

from __future__ import annotations

import json
import math
import struct
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bitops import boxminus_array
from .cipher import inverse_permute_bits, permute_bits
from .keystream import is_bijection

STAGES = ("T2", "V", "T1", "T4", "T3", "codebook")
PLANES = (0, 2, 3)  # plane 1 normally shares its permutation with plane 0
ALL_PLANES = (0, 1, 2, 3)


class NonBijectiveRecovery(RuntimeError):
    """Decoded positions do not form a permutation: the oracle's keystream moved between queries."""

    def __init__(self, stage: str, detail: str, queries: int | None = None):
        msg = f"stage {stage}: {detail}"
        if queries is not None:
            msg += f" (after {queries} queries)"
        super().__init__(msg)
        self.stage = stage
        self.queries = queries


class CodebookInconsistent(RuntimeError):
    pass


class RecoveryMismatch(RuntimeError):
    """A verification plaintext did not survive encrypt-then-recover."""


def index_bits(mn: int) -> int:
    """Number of binary pattern images needed to label ``mn`` positions."""
    if mn < 2:
        raise ValueError("need at least two pixels")
    return math.ceil(math.log2(mn))


def pattern_images(k: int, target: str, mn: int) -> list[np.ndarray]:
    """Pattern t (t = 1..n) puts bit t-1 of the pixel index on plane ``k`` of one nibble.

    Returns channel byte arrays; ``target`` selects the low ('L') or high ('H')
    nibble.
    """
    if target not in ("L", "H"):
        raise ValueError("target must be 'L' or 'H'")
    shift = k + (4 if target == "H" else 0)
    idx = np.arange(mn, dtype=np.int64)
    return [(((idx >> t) & 1) << shift).astype(np.uint8) for t in range(index_bits(mn))]


def _index_patterns(mn: int) -> list[np.ndarray]:
    idx = np.arange(mn, dtype=np.int64)
    return [((idx >> t) & 1).astype(np.uint8) for t in range(index_bits(mn))]


@dataclass
class DifferentialWorkspace:
    """Per-pixel carry tables a stage derived while cancelling its differentials."""

    r: dict[str, np.ndarray] = field(default_factory=dict)
    phi: dict[int, np.ndarray] = field(default_factory=dict)
    psi: dict[int, np.ndarray] = field(default_factory=dict)


class AttackSession:
    """Wraps an oracle: channel packing, per-stage accounting and cached baselines."""

    def __init__(self, oracle, packing: bool = True, all_planes: bool = False):
        self.oracle = oracle
        self.packing = packing
        self.planes = ALL_PLANES if all_planes else PLANES
        m, n = oracle.dims
        self.dims = (m, n)
        self.mn = m * n
        self.counts: Counter = Counter()
        self.baselines: dict[str, np.ndarray] = {}
        self.workspaces: dict[str, DifferentialWorkspace] = {}

    @property
    def total_queries(self) -> int:
        return sum(self.counts.values())

    def encrypt(self, channels: list[np.ndarray], stage: str) -> list[np.ndarray]:
        """Encrypt single-channel plaintexts, returning their cipher channels in order."""
        m, n = self.dims
        out: list[np.ndarray] = []
        width = 3 if self.packing else 1
        for start in range(0, len(channels), width):
            group = channels[start:start + width]
            img = np.empty((m, n, 3), dtype=np.uint8)
            for c in range(3):
                # unpacked queries and short final groups repeat their last channel
                img[:, :, c] = group[min(c, len(group) - 1)].reshape(m, n)
            cipher = np.asarray(self.oracle.query(img, stage=stage), dtype=np.uint8)
            self.counts[stage] += 1
            out.extend(cipher[:, :, c].ravel() for c in range(len(group)))
        return out

    def baseline(self, key: str, plain: np.ndarray, stage: str) -> np.ndarray:
        """Cipher of a baseline plaintext, queried once and shared by later stages."""
        if key not in self.baselines:
            self.baselines[key] = self.encrypt([plain], stage)[0]
        return self.baselines[key]


def _session(oracle_or_session, packing: bool = True) -> AttackSession:
    if isinstance(oracle_or_session, AttackSession):
        return oracle_or_session
    return AttackSession(oracle_or_session, packing)


def _decode_positions(bits: list[np.ndarray], mn: int, stage: str, s: AttackSession) -> np.ndarray:
    pos = np.zeros(mn, dtype=np.int64)
    for t, b in enumerate(bits):
        pos |= b.astype(np.int64) << t
    if not is_bijection(pos, mn):
        raise NonBijectiveRecovery(stage, "decoded positions are not a permutation", s.total_queries)
    return pos


def _family(rows: dict[int, np.ndarray]) -> np.ndarray:
    return np.stack([rows[0], rows.get(1, rows[0]), rows[2], rows[3]])


def recover_T2(oracle, packing: bool = True) -> np.ndarray:
    s = _session(oracle, packing)
    mn = s.mn
    zero = np.zeros(mn, dtype=np.uint8)
    c0 = s.baseline("zero", zero, "T2")
    pats = _index_patterns(mn)
    planes = s.planes
    plains = [(p << (k + 4)).astype(np.uint8) for p in pats for k in planes]
    ciphers = s.encrypt(plains, "T2")
    rows = {}
    for j, k in enumerate(planes):
        bits = [((ciphers[t * len(planes) + j] ^ c0) >> k) & 1 for t in range(len(pats))]
        rows[k] = _decode_positions(bits, mn, "T2", s)
    return _family(rows)


def recover_VL(oracle, T2: np.ndarray, packing: bool = True) -> np.ndarray:
    """Low nibble of V by sweeping a constant low-nibble offset c = 1..15."""
    s = _session(oracle, packing)
    mn = s.mn
    c0 = s.baseline("zero", np.zeros(mn, dtype=np.uint8), "V")
    plains = [np.full(mn, c, dtype=np.uint8) for c in range(1, 16)]
    ciphers = s.encrypt(plains, "V")
    vl = np.zeros(mn, dtype=np.uint8)
    resolved = np.zeros(mn, dtype=bool)
    for c, ct in zip(range(1, 16), ciphers):
        observed = ((ct ^ c0) & 1) ^ (c & 1)
        carry = np.zeros(mn, dtype=bool)
        carry[T2[0]] = observed.astype(bool)
        fresh = carry & ~resolved
        vl[fresh] = 16 - c
        resolved |= carry
    return vl


def recover_VH(oracle, T1: np.ndarray | None, T2: np.ndarray, VL: np.ndarray, packing: bool = True) -> np.ndarray:
    """Bits 0..2 of the high nibble of V; bit 3 is left at zero.

    ``T1`` is accepted for interface symmetry; the readout only passes through ``T2``.
    """
    s = _session(oracle, packing)
    mn = s.mn
    VL = np.asarray(VL, dtype=np.int64)
    c0 = s.baseline("zero", np.zeros(mn, dtype=np.uint8), "V")
    plains = []
    for k in range(3):
        low = ((VL ^ (1 << k)) - VL) & 0xF
        r1 = (low + VL) >> 4
        high = ((1 << k) - r1) & 0xF
        plains.append((low | (high << 4)).astype(np.uint8))
    ciphers = s.encrypt(plains, "V")
    vh = np.zeros(mn, dtype=np.uint8)
    for k, ct in enumerate(ciphers):
        readout = ((ct ^ c0) >> (k + 1)) & 1
        plane = np.zeros(mn, dtype=np.uint8)
        plane[T2[k + 1]] = readout
        vh |= plane << k
    return vh


def recover_T1(oracle, T2: np.ndarray, VL: np.ndarray, packing: bool = True) -> np.ndarray:
    s = _session(oracle, packing)
    mn = s.mn
    VL = np.asarray(VL, dtype=np.int64)
    pats = _index_patterns(mn)
    ws = s.workspaces.setdefault("T1", DifferentialWorkspace())
    planes = s.planes
    width = len(planes)
    plains = []
    for t, p in enumerate(pats):
        lows = [(p.astype(np.int64) << k) for k in planes]
        carries = [(low + VL) >> 4 for low in lows]
        for k, r1 in zip(planes, carries):
            ws.r[f"t{t}k{k}"] = r1.astype(np.uint8)
        # baseline: L0 = 0, H0 = r1 ; pattern: L1 = plane-k bits, H1 = r0 = 0
        plains.extend((r1 << 4).astype(np.uint8) for r1 in carries)
        plains.extend(low.astype(np.uint8) for low in lows)
    ciphers = s.encrypt(plains, "T1")
    rows = {}
    for j, k in enumerate(planes):
        bits = []
        for t in range(len(pats)):
            base, pat = ciphers[2 * width * t + j], ciphers[2 * width * t + width + j]
            bits.append(((pat ^ base) >> k) & 1)
        rows[k] = _decode_positions(bits, mn, "T1", s)
    return _family(rows)


def plain_from_istar(istar: np.ndarray, V_eq: np.ndarray) -> np.ndarray:
    return boxminus_array(istar, V_eq, 8)


def plain_from_star(L_star: np.ndarray, H_star: np.ndarray, T1, T2, T3, T4, V_eq) -> np.ndarray:
    """Plaintext channel whose star-domain nibbles are (``L_star``, ``H_star``)."""
    L_star = np.asarray(L_star, dtype=np.uint8)
    H_star = np.asarray(H_star, dtype=np.uint8)
    H_hat = H_star ^ permute_bits(L_star, T3, check=False)
    h = inverse_permute_bits(H_hat, T4, check=False)
    L_tilde = L_star ^ permute_bits(h, T2, check=False)
    low = inverse_permute_bits(L_tilde, T1, check=False)
    return plain_from_istar(low | (h << 4), V_eq)


def recover_T4(oracle, T1: np.ndarray, T2: np.ndarray, V_eq: np.ndarray, packing: bool = True) -> np.ndarray:
    s = _session(oracle, packing)
    mn = s.mn
    c0 = s.baseline("istar_zero", plain_from_istar(np.zeros(mn, dtype=np.uint8), V_eq), "T4")
    pats = _index_patterns(mn)
    planes = s.planes
    plains = []
    for p in pats:
        for k in planes:
            h = (p << k).astype(np.uint8)
            # make the T1-permuted low nibble cancel the T2-permuted high nibble
            low = inverse_permute_bits(permute_bits(h, T2, check=False), T1, check=False)
            plains.append(plain_from_istar(low | (h << 4), V_eq))
    ciphers = s.encrypt(plains, "T4")
    rows = {}
    for j, k in enumerate(planes):
        bits = [((ciphers[t * len(planes) + j] ^ c0) >> (4 + k)) & 1 for t in range(len(pats))]
        rows[k] = _decode_positions(bits, mn, "T4", s)
    return _family(rows)


def recover_T3(oracle, T1: np.ndarray, T2: np.ndarray, T4: np.ndarray, V_eq: np.ndarray,
               packing: bool = True) -> np.ndarray:
    s = _session(oracle, packing)
    mn = s.mn
    c0 = s.baseline("istar_zero", plain_from_istar(np.zeros(mn, dtype=np.uint8), V_eq), "T3")

    def plain_for(l_star):
        # H* = 0, so the star-domain low nibble is just T1 applied to L*
        low = inverse_permute_bits(l_star.astype(np.uint8), T1, check=False)
        return plain_from_istar(low, V_eq)

    pats = _index_patterns(mn)
    planes = s.planes
    width = len(planes)
    plains = [plain_for(np.full(mn, 1 << k, dtype=np.uint8)) for k in planes]
    plains += [plain_for(p << k) for p in pats for k in planes]
    ciphers = s.encrypt(plains, "T3")

    ws = s.workspaces.setdefault("T3", DifferentialWorkspace())
    # carry flip seen on plane k when the star value at pixel i is 2^k (0 gives none)
    flip = {}
    for j, k in enumerate(planes):
        flip[k] = (((ciphers[j] ^ c0) >> (4 + k)) & 1) ^ 1
        (ws.phi if k == 0 else ws.psi)[k] = flip[k]

    rows = {}
    for j, k in enumerate(planes):
        bits = []
        for t, p in enumerate(pats):
            ct = ciphers[width + t * width + j]
            bits.append((((ct ^ c0) >> (4 + k)) & 1) ^ (flip[k] & p))
        rows[k] = _decode_positions(bits, mn, "T3", s)
    return _family(rows)


def build_codebook(oracle, T1, T2, T3, T4, V_eq, packing: bool = True) -> np.ndarray:
    """Per-pixel table mapping cipher byte -> star-domain byte."""
    s = _session(oracle, packing)
    mn = s.mn
    plains = []
    for c in range(256):
        plains.append(plain_from_star(np.full(mn, c & 0xF, dtype=np.uint8), np.full(mn, c >> 4, dtype=np.uint8),
                                      T1, T2, T3, T4, V_eq))
    ciphers = s.encrypt(plains, "codebook")
    F = np.zeros((mn, 256), dtype=np.uint8)
    seen = np.zeros((mn, 256), dtype=bool)
    rows = np.arange(mn)
    for c, ct in enumerate(ciphers):
        F[rows, ct] = c
        seen[rows, ct] = True
    if not seen.all():
        bad = int(np.flatnonzero(~seen.all(axis=1))[0])
        raise CodebookInconsistent(f"codebook row for pixel {bad} is not a bijection")
    return F


# -- equivalent key ---------------------------------------------------------

EQKEY_MAGIC = b"IEQK"


@dataclass
class EquivalentKey:
    dims: tuple[int, int]
    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    T4: np.ndarray
    V_eq: np.ndarray
    F: np.ndarray

    def save(self, path: str | Path) -> None:
        """Binary layout: magic, u32 M, u32 N, T1..T4 as little-endian u32, V_eq, F."""
        m, n = self.dims
        parts = [EQKEY_MAGIC, struct.pack("<II", m, n)]
        for T in (self.T1, self.T2, self.T3, self.T4):
            parts.append(np.asarray(T, dtype="<u4").tobytes())
        parts.append(np.asarray(self.V_eq, dtype=np.uint8).tobytes())
        parts.append(np.asarray(self.F, dtype=np.uint8).tobytes())
        Path(path).write_bytes(b"".join(parts))

    @classmethod
    def load(cls, path: str | Path) -> "EquivalentKey":
        data = Path(path).read_bytes()
        if data[:4] != EQKEY_MAGIC:
            raise ValueError(f"{path}: not an equivalent-key file")
        m, n = struct.unpack("<II", data[4:12])
        mn = m * n
        expected = 12 + 16 * mn * 4 + mn + mn * 256
        if len(data) != expected:
            raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
        off = 12
        fams = []
        for _ in range(4):
            arr = np.frombuffer(data, dtype="<u4", count=4 * mn, offset=off).astype(np.int64)
            fams.append(arr.reshape(4, mn))
            off += 16 * mn
        v = np.frombuffer(data, dtype=np.uint8, count=mn, offset=off).copy()
        off += mn
        F = np.frombuffer(data, dtype=np.uint8, count=mn * 256, offset=off).reshape(mn, 256).copy()
        return cls((m, n), *fams, v, F)


def recover_channel(cipher: np.ndarray, eq: EquivalentKey) -> np.ndarray:
    cipher = np.asarray(cipher, dtype=np.uint8).ravel()
    star = eq.F[np.arange(len(cipher)), cipher]
    return plain_from_star(star & 0xF, star >> 4, eq.T1, eq.T2, eq.T3, eq.T4, eq.V_eq)


def recover_plaintext(cipher_img: np.ndarray, eq: EquivalentKey) -> np.ndarray:
    cipher_img = np.asarray(cipher_img, dtype=np.uint8)
    m, n = eq.dims
    if cipher_img.shape[:2] != (m, n):
        raise ValueError(f"cipher-image is {cipher_img.shape[:2]}, key is for {(m, n)}")
    planes = cipher_img[:, :, None] if cipher_img.ndim == 2 else cipher_img
    out = np.empty_like(planes)
    for c in range(planes.shape[2]):
        out[:, :, c] = recover_channel(planes[:, :, c], eq).reshape(m, n)
    return out.reshape(cipher_img.shape)


# -- driver -----------------------------------------------------------------

@dataclass
class AttackReport:
    stage_counts: dict[str, int]
    packing: bool
    wall_time: float
    dims: tuple[int, int]
    all_planes: bool = False
    verified: int = 0

    @property
    def total(self) -> int:
        return sum(self.stage_counts.values())

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "packing": self.packing,
            "all_planes": self.all_planes,
            "verified": self.verified,
            "stages": {f"stage_{k}": self.stage_counts.get(k, 0) for k in STAGES},
            "total": self.total,
            "wall_time_s": round(self.wall_time, 4),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def expected_counts(mn: int, packing: bool, all_planes: bool = False) -> dict[str, int]:
    """Closed-form query counts of :func:`run_attack`."""
    n = index_bits(mn)
    w = len(ALL_PLANES if all_planes else PLANES)
    raw = {"T2": (1, w * n), "V": (15, 3), "T1": (2 * w * n,), "T4": (1, w * n), "T3": (w * n + w,),
           "codebook": (256,)}
    div = 3 if packing else 1
    return {k: sum(-(-part // div) for part in parts) for k, parts in raw.items()}


def verify_recovery(oracle, eq: EquivalentKey, trials: int, seed: int | None = None) -> None:
    """Encrypt ``trials`` random images and check that ``eq`` recovers each one."""
    rng = np.random.default_rng(seed)
    m, n = eq.dims
    for _ in range(trials):
        img = rng.integers(0, 256, (m, n, 3), dtype=np.uint8)
        cipher = np.asarray(oracle.query(img, stage="verify"), dtype=np.uint8)
        wrong = int(np.count_nonzero(recover_plaintext(cipher, eq) != img))
        if wrong:
            raise RecoveryMismatch(f"{wrong} of {img.size} bytes differ after recovery; "
                                   "retry with all four bit planes")


def run_attack(oracle, packing: bool = True, all_planes: bool = False,
               verify: int = 0) -> tuple[EquivalentKey, AttackReport]:
    """Recover an equivalent key.

    By default plane 1 of each permutation family is taken to equal plane 0,
    which holds unless the keystream orbit has fallen onto an exactly periodic
    float cycle.  ``all_planes`` recovers plane 1 as well at a higher query
    cost; ``verify`` spends extra queries checking the result.
    """
    s = AttackSession(oracle, packing, all_planes)
    start = time.perf_counter()
    T2 = recover_T2(s)
    VL = recover_VL(s, T2)
    VH = recover_VH(s, None, T2, VL)
    V_eq = (VL | (VH << 4)).astype(np.uint8)
    T1 = recover_T1(s, T2, VL)
    T4 = recover_T4(s, T1, T2, V_eq)
    T3 = recover_T3(s, T1, T2, T4, V_eq)
    F = build_codebook(s, T1, T2, T3, T4, V_eq)
    elapsed = time.perf_counter() - start
    eq = EquivalentKey(s.dims, T1, T2, T3, T4, V_eq, F)
    report = AttackReport({k: s.counts.get(k, 0) for k in STAGES}, packing, elapsed, s.dims, all_planes)
    if verify:
        verify_recovery(oracle, eq, verify)
        report.verified = verify
    return eq, report

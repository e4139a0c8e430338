"""Chosen-plaintext encryption oracles, in-process and over TCP.

Wire protocol: one JSON object per line.  Requests carry ``op`` (HELLO,
ENCRYPT or STATS), ENCRYPT also carries ``stage`` and ``data`` (base64 of
the interleaved RGB bytes in raster order).  Replies echo ``op`` and carry
either the result fields or ``error``.
"""

from __future__ import annotations

import base64
import json
import logging
import socket
import socketserver
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .cipher import apply_keystream, channel_sums, encrypt_rgb
from .keystream import KeyMaterial, Keystream, generate_keystream

log = logging.getLogger(__name__)

MODES = ("frozen", "faithful")


class DimensionMismatch(ValueError):
    pass


class OracleError(RuntimeError):
    pass


@dataclass
class QueryLog:
    per_stage: Counter = field(default_factory=Counter)
    bytes_sent: int = 0
    bytes_received: int = 0

    @property
    def total_queries(self) -> int:
        return sum(self.per_stage.values())

    def record(self, stage: str) -> None:
        self.per_stage[stage] += 1

    def to_dict(self) -> dict:
        return {"total_queries": self.total_queries, "per_stage": dict(self.per_stage)}


@dataclass(frozen=True)
class OracleConfig:
    key: KeyMaterial
    dims: tuple[int, int]
    mode: str = "frozen"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        m, n = self.dims
        if m < 1 or n < 1 or m * n < 2:
            raise ValueError(f"bad image dimensions {self.dims}")


class LocalOracle:
    """Encrypts whatever it is given under a fixed secret.

    In frozen mode the keystream is derived once from the configured sums and
    reused for every query.  In faithful mode each query derives its own
    keystream from its own pixel sums, exactly as the cipher does.
    """

    def __init__(self, cfg: OracleConfig):
        self.cfg = cfg
        self.log = QueryLog()
        m, n = cfg.dims
        self.keystream = generate_keystream(cfg.key, m * n) if cfg.mode == "frozen" else None

    @classmethod
    def with_keystream(cls, ks: Keystream, dims: tuple[int, int]) -> "LocalOracle":
        """Frozen oracle around an arbitrary keystream (e.g. a hand-built one)."""
        m, n = dims
        if ks.mn != m * n:
            raise DimensionMismatch(f"keystream covers {ks.mn} pixels, dims give {m * n}")
        self = cls.__new__(cls)
        self.cfg = None
        self._dims = (m, n)
        self.log = QueryLog()
        self.keystream = ks
        return self

    @property
    def dims(self) -> tuple[int, int]:
        return self.cfg.dims if self.cfg is not None else self._dims

    @property
    def mode(self) -> str:
        return self.cfg.mode if self.cfg is not None else "frozen"

    def _check(self, img) -> np.ndarray:
        img = np.asarray(img)
        m, n = self.dims
        if img.shape != (m, n, 3) or img.dtype != np.uint8:
            raise DimensionMismatch(f"expected uint8 image of shape {(m, n, 3)}, got {img.dtype} {img.shape}")
        return img

    def query(self, img, stage: str = "query") -> np.ndarray:
        img = self._check(img)
        if self.keystream is not None:
            out = apply_keystream(img, self.keystream)
        else:
            out = encrypt_rgb(img, self.cfg.key.b, channel_sums(img))
        self.log.record(stage)
        return out


# -- TCP transport ----------------------------------------------------------

def _encode(img: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(img, dtype=np.uint8).tobytes()).decode("ascii")


def _decode(text: str, dims: tuple[int, int]) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    m, n = dims
    if len(raw) != m * n * 3:
        raise DimensionMismatch(f"payload of {len(raw)} bytes does not match {m}x{n}x3")
    return np.frombuffer(raw, dtype=np.uint8).reshape(m, n, 3).copy()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        oracle: LocalOracle = self.server.oracle
        for line in self.rfile:
            if not line.strip():
                continue
            oracle.log.bytes_received += len(line)
            reply = self._dispatch(oracle, line)
            payload = (json.dumps(reply) + "\n").encode("ascii")
            oracle.log.bytes_sent += len(payload)
            self.wfile.write(payload)
            self.wfile.flush()

    @staticmethod
    def _dispatch(oracle: LocalOracle, line: bytes) -> dict:
        try:
            req = json.loads(line)
            op = req.get("op")
        except (ValueError, AttributeError) as exc:
            return {"op": None, "error": f"malformed request: {exc}"}
        try:
            if op == "HELLO":
                m, n = oracle.dims
                return {"op": op, "M": m, "N": n, "mode": oracle.mode}
            if op == "STATS":
                return {"op": op, **oracle.log.to_dict()}
            if op == "ENCRYPT":
                img = _decode(req["data"], oracle.dims)
                out = oracle.query(img, stage=str(req.get("stage") or "query"))
                return {"op": op, "data": _encode(out)}
            return {"op": op, "error": f"unknown op {op!r}"}
        except (DimensionMismatch, KeyError, ValueError) as exc:
            return {"op": op, "error": f"{type(exc).__name__}: {exc}"}


class OracleServer(socketserver.TCPServer):
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], oracle: LocalOracle):
        self.oracle = oracle
        super().__init__(address, _Handler)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


def serve(endpoint: str, cfg: OracleConfig) -> None:
    """Serve an oracle until interrupted.  Requests are handled one at a time."""
    address = parse_endpoint(endpoint)
    try:
        server = OracleServer(address, LocalOracle(cfg))
    except OSError as exc:
        raise OracleError(f"cannot bind {endpoint}: {exc}") from exc
    log.info("oracle listening on %s:%d (%s mode)", *server.server_address[:2], cfg.mode)
    with server:
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


class RemoteOracle:
    """Client side of the protocol; satisfies the same ``query`` contract as :class:`LocalOracle`."""

    def __init__(self, endpoint: str, timeout: float | None = 60.0):
        self.endpoint = endpoint
        host, port = parse_endpoint(endpoint)
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise OracleError(f"cannot connect to {endpoint}: {exc}") from exc
        self._file = self._sock.makefile("rwb")
        self.log = QueryLog()
        hello = self._call({"op": "HELLO"})
        self._dims = (int(hello["M"]), int(hello["N"]))
        self.mode = hello["mode"]

    @property
    def dims(self) -> tuple[int, int]:
        return self._dims

    def _call(self, req: dict) -> dict:
        line = (json.dumps(req) + "\n").encode("ascii")
        try:
            self._file.write(line)
            self._file.flush()
            reply_line = self._file.readline()
        except OSError as exc:
            raise OracleError(f"{self.endpoint}: {exc}") from exc
        if not reply_line:
            raise OracleError(f"{self.endpoint}: connection closed")
        self.log.bytes_sent += len(line)
        self.log.bytes_received += len(reply_line)
        reply = json.loads(reply_line)
        if "error" in reply:
            if reply["error"].startswith("DimensionMismatch"):
                raise DimensionMismatch(reply["error"])
            raise OracleError(f"{self.endpoint}: {reply['error']}")
        return reply

    def query(self, img, stage: str = "query") -> np.ndarray:
        img = np.asarray(img, dtype=np.uint8)
        reply = self._call({"op": "ENCRYPT", "stage": stage, "data": _encode(img)})
        self.log.record(stage)
        return _decode(reply["data"], self._dims)

    def stats(self) -> dict:
        reply = self._call({"op": "STATS"})
        reply.pop("op", None)
        return reply

    def close(self) -> None:
        self._file.close()
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect(endpoint: str) -> RemoteOracle:
    return RemoteOracle(endpoint)

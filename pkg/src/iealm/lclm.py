"""The 2D lag-complex Logistic map.

Floating-point iteration (used as the cipher's PRNG), the decoupled
second-order form of each coordinate, and the fixed-point functional graph
of the z-coordinate recurrence.
"""

from __future__ import annotations

import json
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple

import numpy as np

A_DEFAULT = 2.0


class DivergentOrbit(ArithmeticError):
    def __init__(self, index: int, state: tuple[float, float, float]):
        super().__init__(f"non-finite state {state} at iteration {index}")
        self.index = index
        self.state = state


class RatioUndefined(ZeroDivisionError):
    pass


class State(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class MapParams:
    b: float
    a: float = A_DEFAULT


def step(s: State, p: MapParams) -> State:
    x, y, z = s
    b, a = p.b, p.a
    nx = b * x * (1.0 - z)
    ny = b * y * (1.0 - z)
    nz = a * x * x + y * y
    if not (math.isfinite(nx) and math.isfinite(ny) and math.isfinite(nz)):
        raise DivergentOrbit(1, (nx, ny, nz))
    return State(nx, ny, nz)


def step_decoupled(prev: State, cur: State, p: MapParams, ratio: float) -> State:
    """Advance one step using only each coordinate's own history.

    ``ratio`` is x(0)/y(0) of the orbit that produced ``prev`` and ``cur``.
    The x-line coefficient is ``a + (1/ratio)**2`` and the y-line one is
    ``a*ratio**2 + 1``.
    """
    if ratio == 0.0 or not math.isfinite(ratio):
        raise RatioUndefined(f"x(0)/y(0) = {ratio!r} cannot decouple the map")
    b, a = p.b, p.a
    inv = 1.0 / ratio
    nx = b * cur.x * (1.0 - (a + inv * inv) * prev.x * prev.x)
    ny = b * cur.y * (1.0 - (a * ratio * ratio + 1.0) * prev.y * prev.y)
    nz = b * b * cur.z * (1.0 - prev.z) ** 2
    return State(nx, ny, nz)


def orbit(k: State, p: MapParams, keep: int, discard: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Iterate ``keep + discard`` times from ``k`` and return the last ``keep`` iterates.

    The initial state is never part of the output.
    """
    if keep < 0 or discard < 0:
        raise ValueError("keep and discard must be non-negative")
    xs = np.empty(keep)
    ys = np.empty(keep)
    zs = np.empty(keep)
    x, y, z = float(k[0]), float(k[1]), float(k[2])
    b, a = float(p.b), float(p.a)
    isfinite = math.isfinite
    for i in range(discard):
        x, y, z = b * x * (1.0 - z), b * y * (1.0 - z), a * x * x + y * y
        if not isfinite(z + x + y):
            raise DivergentOrbit(i + 1, (x, y, z))
    for j in range(keep):
        x, y, z = b * x * (1.0 - z), b * y * (1.0 - z), a * x * x + y * y
        xs[j] = x
        ys[j] = y
        zs[j] = z
    bad = ~(np.isfinite(xs) & np.isfinite(ys) & np.isfinite(zs))
    if bad.any():
        j = int(np.argmax(bad))
        raise DivergentOrbit(discard + j + 1, (xs[j], ys[j], zs[j]))
    return xs, ys, zs


# -- fixed-point functional graph -------------------------------------------

QUANTIZERS = ("floor", "round", "ceil")


@dataclass(frozen=True)
class QuantizedMapConfig:
    n: int
    b: Fraction
    quantizer: str = "floor"

    def __post_init__(self):
        if not 1 <= self.n <= 16:
            raise ValueError("n must lie in [1, 16]")
        if self.quantizer not in QUANTIZERS:
            raise ValueError(f"quantizer must be one of {QUANTIZERS}")
        object.__setattr__(self, "b", Fraction(self.b))


def _quantize(num: int, den: int, how: str) -> int:
    # num, den > 0 or num == 0
    if how == "floor":
        return num // den
    if how == "ceil":
        return -((-num) // den)
    # half away from zero; operands are non-negative
    return (2 * num + den) // (2 * den)


def quantized_step(u: int, v: int, cfg: QuantizedMapConfig) -> tuple[int, int]:
    """One step of the z-recurrence on the 2^n x 2^n grid, evaluated exactly."""
    size = 1 << cfg.n
    if not (0 <= u < size and 0 <= v < size):
        raise ValueError(f"grid index outside [0, {size})")
    p, q = cfg.b.numerator, cfg.b.denominator
    # b^2 * (v/2^n) * (1 - u/2^n)^2 * 2^n  ==  p^2 v (2^n - u)^2 / (q^2 4^n)
    num = p * p * v * (size - u) ** 2
    den = q * q * size * size
    return v, _quantize(num, den, cfg.quantizer) % size


@dataclass(frozen=True)
class FunctionalGraph:
    n: int
    successor: np.ndarray  # node id u * 2^n + v  ->  successor node id

    @property
    def size(self) -> int:
        return 1 << self.n

    def node(self, u: int, v: int) -> int:
        return u * self.size + v

    def coords(self, node: int) -> tuple[int, int]:
        return divmod(int(node), self.size)

    def next(self, u: int, v: int) -> tuple[int, int]:
        return self.coords(self.successor[self.node(u, v)])

    def edges(self) -> Iterable[tuple[tuple[int, int], tuple[int, int]]]:
        for src, dst in enumerate(self.successor):
            yield self.coords(src), self.coords(dst)


def build_functional_graph(cfg: QuantizedMapConfig) -> FunctionalGraph:
    size = 1 << cfg.n
    succ = np.empty(size * size, dtype=np.int64)
    for u in range(size):
        base = u * size
        for v in range(size):
            nu, nv = quantized_step(u, v, cfg)
            succ[base + v] = nu * size + nv
    succ.flags.writeable = False
    return FunctionalGraph(cfg.n, succ)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1


@dataclass
class GraphStats:
    component_count: int
    cycle_count: int
    cycle_lengths: Counter
    max_transient_length: int
    self_loop_nodes: list[tuple[int, int]]
    component_sizes: list[int] = field(default_factory=list)
    transient: np.ndarray | None = field(default=None, repr=False)
    on_cycle: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "component_count": self.component_count,
            "cycle_count": self.cycle_count,
            "cycle_lengths": {str(k): v for k, v in sorted(self.cycle_lengths.items())},
            "max_transient_length": self.max_transient_length,
            "self_loop_nodes": [list(p) for p in self.self_loop_nodes],
            "component_sizes": sorted(self.component_sizes, reverse=True),
        }


def graph_stats(g: FunctionalGraph) -> GraphStats:
    succ = g.successor.tolist()
    total = len(succ)

    uf = UnionFind(total)
    for src, dst in enumerate(succ):
        uf.union(src, dst)
    comp_sizes = Counter(uf.find(i) for i in range(total))

    # 0 = unvisited, 1 = on current path, 2 = finished
    state = [0] * total
    on_cycle = np.zeros(total, dtype=bool)
    cycle_lengths: Counter = Counter()
    for start in range(total):
        if state[start]:
            continue
        path = []
        pos = {}
        node = start
        while state[node] == 0:
            state[node] = 1
            pos[node] = len(path)
            path.append(node)
            node = succ[node]
        if state[node] == 1:
            cyc = path[pos[node]:]
            on_cycle[cyc] = True
            cycle_lengths[len(cyc)] += 1
        for p in path:
            state[p] = 2

    # transient length = distance to the cycle, by BFS over reversed edges
    preds: list[list[int]] = [[] for _ in range(total)]
    for src, dst in enumerate(succ):
        if not on_cycle[src]:
            preds[dst].append(src)
    transient = np.full(total, -1, dtype=np.int64)
    queue = deque()
    for node in np.flatnonzero(on_cycle).tolist():
        transient[node] = 0
        queue.append(node)
    while queue:
        node = queue.popleft()
        d = transient[node] + 1
        for p in preds[node]:
            transient[p] = d
            queue.append(p)

    self_loops = [g.coords(i) for i in range(total) if succ[i] == i]
    return GraphStats(
        component_count=len(comp_sizes),
        cycle_count=sum(cycle_lengths.values()),
        cycle_lengths=cycle_lengths,
        max_transient_length=int(transient.max()),
        self_loop_nodes=self_loops,
        component_sizes=list(comp_sizes.values()),
        transient=transient,
        on_cycle=on_cycle,
    )


def graph_to_dot(g: FunctionalGraph) -> str:
    lines = [f"digraph lclm_n{g.n} {{"]
    for (u, v), (nu, nv) in g.edges():
        lines.append(f'  "{u},{v}" -> "{nu},{nv}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(g: FunctionalGraph, stats: GraphStats | None = None) -> str:
    if stats is None:
        stats = graph_stats(g)
    doc = {
        "n": g.n,
        "edges": [[[u, v], [nu, nv]] for (u, v), (nu, nv) in g.edges()],
        "stats": stats.to_dict(),
    }
    return json.dumps(doc, separators=(",", ":"))

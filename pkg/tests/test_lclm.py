import math
from fractions import Fraction

import numpy as np
import pytest

from iealm.lclm import (
    DivergentOrbit, MapParams, QuantizedMapConfig, RatioUndefined, State, build_functional_graph,
    graph_stats, graph_to_dot, graph_to_json, orbit, quantized_step, step, step_decoupled,
)


def exact_step(x, y, z, b, a=2):
    """Line-by-line evaluation in rational arithmetic from decimal literals."""
    x, y, z, b, a = (Fraction(str(v)) for v in (x, y, z, b, a))
    return b * x * (1 - z), b * y * (1 - z), a * x * x + y * y


def test_origin_is_fixed():
    assert step(State(0.0, 0.0, 0.0), MapParams(1.8)) == (0.0, 0.0, 0.0)


def test_step_against_exact_oracle():
    got = step(State(0.2, 0.4, 0.1), MapParams(1.99))
    want = exact_step(0.2, 0.4, 0.1, 1.99)
    assert [float(w) for w in want] == pytest.approx([0.3582, 0.7164, 0.24], rel=0, abs=0)
    for g, w in zip(got, want):
        assert math.isclose(g, float(w), rel_tol=1e-15)


def test_step_unit_z_annihilates_xy():
    s = step(State(0.1, 0.1, 1.0), MapParams(1.9))
    assert s.x == 0.0 and s.y == 0.0
    assert math.isclose(s.z, 0.03, rel_tol=1e-15)


def test_step_divergence_reported():
    with pytest.raises(DivergentOrbit):
        step(State(1e200, 1e200, -1e200), MapParams(1.9))


def test_decoupled_z_line_matches_direct():
    p = MapParams(1.99)
    s0 = State(0.2, 0.4, 0.1)
    s1 = step(s0, p)
    s2 = step(s1, p)
    d = step_decoupled(s0, s1, p, ratio=0.2 / 0.4)
    # rational oracle for z(2) = b^2 z(1) (1 - z(0))^2 with z(1) = 0.24 exactly
    want = Fraction("1.99") ** 2 * Fraction("0.24") * (1 - Fraction("0.1")) ** 2
    assert want == Fraction("0.76984344")
    assert math.isclose(d.z, float(want), rel_tol=1e-12)
    assert math.isclose(s2.z, float(want), rel_tol=1e-12)


def test_decoupled_trivial_cases():
    p = MapParams(1.9)
    d = step_decoupled(State(0.3, 0.2, 0.0), State(0.0, 0.5, 0.0), p, ratio=1.5)
    assert d.x == 0.0 and d.z == 0.0
    with pytest.raises(RatioUndefined):
        step_decoupled(State(0.1, 0.1, 0.1), State(0.1, 0.1, 0.1), p, ratio=0.0)


def test_decoupled_swapped_x_coefficient_is_wrong():
    # the x-line needs (y0/x0)^2; using (x0/y0)^2 does not track the orbit
    p = MapParams(1.95)
    s0 = State(0.2, 0.4, 0.1)
    xs, ys, zs = orbit(s0, p, keep=3)
    prev, cur, nxt = State(xs[0], ys[0], zs[0]), State(xs[1], ys[1], zs[1]), State(xs[2], ys[2], zs[2])
    ratio = 0.5
    good = step_decoupled(prev, cur, p, ratio)
    swapped = p.b * cur.x * (1 - (p.a + ratio ** 2) * prev.x ** 2)
    assert math.isclose(good.x, nxt.x, rel_tol=1e-12)
    assert not math.isclose(swapped, nxt.x, rel_tol=1e-3)


def test_orbit_shapes_and_suffix_consistency():
    p = MapParams(1.99)
    k = State(0.2, 0.4, 0.1)
    assert all(len(a) == 0 for a in orbit(k, p, keep=0))
    xs, ys, zs = orbit(k, p, keep=1)
    assert (xs[0], ys[0], zs[0]) == tuple(step(k, p))
    full = orbit(k, p, keep=5)
    tail = orbit(k, p, keep=3, discard=2)
    for a, b in zip(full, tail):
        assert np.array_equal(a[2:], b)


def test_orbit_divergence_index():
    with pytest.raises(DivergentOrbit) as info:
        orbit(State(3.0, 3.0, 3.0), MapParams(1.99), keep=50, discard=5)
    assert info.value.index >= 1


@pytest.mark.parametrize("quantizer, w", [("floor", 3), ("round", 4), ("ceil", 4)])
def test_quantized_step_example(quantizer, w):
    cfg = QuantizedMapConfig(3, Fraction(511, 256), quantizer)
    # oracle: (511/256)^2 * (1/8) * 1 * 8 = 3.98444...
    assert Fraction(511, 256) ** 2 == Fraction(261121, 65536)
    assert quantized_step(0, 1, cfg) == (1, w)


@pytest.mark.parametrize("quantizer", ["floor", "round", "ceil"])
def test_quantized_zero_rows(quantizer):
    cfg = QuantizedMapConfig(4, Fraction(511, 256), quantizer)
    assert quantized_step(0, 0, cfg) == (0, 0)
    for u in range(16):
        assert quantized_step(u, 0, cfg) == (0, 0)


def test_round_is_half_away_from_zero():
    # b = 1, n = 2, (u, v) = (2, 2): 2 * (4 - 2)^2 / 16 is exactly 1/2
    assert Fraction(2 * (4 - 2) ** 2, 16) == Fraction(1, 2)
    assert quantized_step(2, 2, QuantizedMapConfig(2, Fraction(1), "round")) == (2, 1)
    assert quantized_step(2, 2, QuantizedMapConfig(2, Fraction(1), "floor")) == (2, 0)
    assert quantized_step(2, 2, QuantizedMapConfig(2, Fraction(1), "ceil")) == (2, 1)


def test_config_bounds():
    with pytest.raises(ValueError):
        QuantizedMapConfig(0, Fraction(1))
    with pytest.raises(ValueError):
        QuantizedMapConfig(3, Fraction(1), "truncate")


def test_graph_small_cases():
    g = build_functional_graph(QuantizedMapConfig(1, Fraction(511, 256)))
    assert len(g.successor) == 4
    assert g.next(0, 0) == (0, 0)
    g3 = build_functional_graph(QuantizedMapConfig(3, Fraction(511, 256), "floor"))
    assert len(g3.successor) == 64
    assert g3.next(0, 1) == (1, 3)
    again = build_functional_graph(QuantizedMapConfig(3, Fraction(511, 256), "floor"))
    assert np.array_equal(g3.successor, again.successor)


def brute_force_stats(succ):
    """Oracle: cycles by walking each node 2*len steps, components by label propagation."""
    total = len(succ)
    cyclic = set()
    for start in range(total):
        node = start
        for _ in range(total):
            node = succ[node]
        cyclic.add(node)  # after `total` steps every walk sits on its cycle
    labels = list(range(total))
    changed = True
    while changed:
        changed = False
        for a in range(total):
            b = succ[a]
            lo = min(labels[a], labels[b])
            if labels[a] != lo or labels[b] != lo:
                labels[a] = labels[b] = lo
                changed = True
    transient = []
    for start in range(total):
        node, d = start, 0
        while node not in cyclic:
            node, d = succ[node], d + 1
        transient.append(d)
    return cyclic, len(set(labels)), max(transient)


@pytest.mark.parametrize("quantizer", ["floor", "round", "ceil"])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_graph_stats_against_brute_force(n, quantizer):
    g = build_functional_graph(QuantizedMapConfig(n, Fraction(511, 256), quantizer))
    stats = graph_stats(g)
    cyclic, components, max_transient = brute_force_stats(g.successor.tolist())
    assert set(np.flatnonzero(stats.on_cycle).tolist()) == cyclic
    assert stats.component_count == components == stats.cycle_count
    assert stats.max_transient_length == max_transient
    assert sum(stats.component_sizes) == 4 ** n
    assert sum(k * v for k, v in stats.cycle_lengths.items()) == len(cyclic)
    assert (0, 0) in stats.self_loop_nodes


def test_graph_n3_floor_has_transients():
    g = build_functional_graph(QuantizedMapConfig(3, Fraction(511, 256), "floor"))
    stats = graph_stats(g)
    assert g.next(1, 0) == (0, 0)
    assert not stats.on_cycle[g.node(1, 0)]
    assert stats.max_transient_length >= 1


def test_exports():
    g = build_functional_graph(QuantizedMapConfig(1, Fraction(511, 256)))
    dot = graph_to_dot(g)
    assert dot.startswith("digraph") and '"0,0" -> "0,0";' in dot
    assert dot.count("->") == 4
    import json

    doc = json.loads(graph_to_json(g))
    assert doc["n"] == 1 and len(doc["edges"]) == 4
    assert doc["stats"]["component_count"] == doc["stats"]["cycle_count"]


def test_three_quantizers_give_distinct_graphs():
    dots = {q: graph_to_dot(build_functional_graph(QuantizedMapConfig(3, Fraction(511, 256), q)))
            for q in ("floor", "round", "ceil")}
    assert len(set(dots.values())) == 3

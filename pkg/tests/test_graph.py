import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import floyd_warshall, graph_neighbours, random_hetero
from vnhgcn.errors import ShapeError, StructuralError
from vnhgcn.graph import (NetworkSchema, TypedAdjacency, build_graph, hop_distances, khop_nodes,
                          row_normalize)


def pa_schema():
    return NetworkSchema.build(["A", "P"], [("A-P", "A", "P", "P-A"), ("P-A", "P", "A", "A-P")])


def test_schema_inverse_pairs():
    s = pa_schema()
    for r in s.relations:
        inv = s.relations[r.inverse]
        assert s.relations[inv.inverse] == r
        assert (inv.src_type, inv.dst_type) == (r.dst_type, r.src_type)


def test_schema_rejects_bad_inverse():
    with pytest.raises(StructuralError):
        NetworkSchema.build(["A", "P"], [("A-P", "A", "P", "A-P")])
    with pytest.raises(StructuralError):
        NetworkSchema.build(["A", "P"], [("A-P", "A", "P", "missing")])


def test_schema_dict_roundtrip():
    s = pa_schema()
    assert NetworkSchema.from_dict(s.to_dict()) == s


def test_build_graph_derives_inverse_and_dedups():
    s = pa_schema()
    g = build_graph(s, {"A": np.ones((2, 1)), "P": np.ones((3, 1))},
                    {"A-P": [(0, 1), (0, 1), (1, 2)]})
    assert g.adjacency[0].nnz == 2
    assert g.adjacency[1].edge_set() == {(1, 0), (2, 1)}
    assert g.adjacency[0].shape == (3, 2)


def test_build_graph_empty_relation():
    g = build_graph(pa_schema(), {"A": np.ones((2, 1)), "P": np.ones((3, 1))}, {})
    assert all(a.nnz == 0 for a in g.adjacency)
    assert np.all(g.normalized[0].to_dense() == 0)


def test_build_graph_errors():
    s = pa_schema()
    feats = {"A": np.ones((2, 1)), "P": np.ones((3, 1))}
    with pytest.raises(StructuralError):
        build_graph(s, feats, {"A-P": [(5, 0)]})
    with pytest.raises(StructuralError):
        build_graph(s, feats, {"A-P": [(0, 0)], "P-A": [(1, 1)]})
    with pytest.raises(ShapeError):
        build_graph(s, {"A": np.ones((2, 1))}, {})
    with pytest.raises(ShapeError):
        build_graph(s, feats, {}, labels=[0, 1, 2], target_type="A")


def test_row_normalize_examples():
    adj = TypedAdjacency.from_pairs(0, 2, 3, [0, 1, 2], [0, 0, 1])
    dense = row_normalize(adj).to_dense()
    np.testing.assert_array_equal(dense, [[0.5, 0.5, 0], [0, 0, 1]])
    raw = adj.to_dense()
    deg = raw.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(dense, raw / deg, atol=1e-15)

    four = row_normalize(TypedAdjacency.from_pairs(0, 2, 4, [0, 1, 2, 3], [0, 0, 0, 0]))
    np.testing.assert_array_equal(four.to_dense(), [[0.25] * 4, [0] * 4])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11))))
def test_row_sums_zero_or_one(n_dst, n_src, pairs):
    pairs = [(s % n_src, d % n_dst) for s, d in pairs]
    src = [p[0] for p in pairs]
    dst = [p[1] for p in pairs]
    sums = row_normalize(TypedAdjacency.from_pairs(0, n_dst, n_src, src, dst)).to_dense().sum(axis=1)
    assert np.all(np.isclose(sums, 0, atol=1e-12, rtol=0) | np.isclose(sums, 1, atol=1e-12, rtol=0))


def test_inverse_is_transpose_on_random_graphs(rng):
    for _ in range(10):
        g, _ = random_hetero(rng)
        for r in g.schema.relations:
            inv = g.schema.relations[r.inverse]
            assert g.adjacency[r.index].edge_set() == {(d, s) for s, d in g.adjacency[inv.index].edge_set()}


def test_csr_invariants(rng):
    g, _ = random_hetero(rng)
    for a in g.adjacency:
        assert np.all(np.diff(a.indptr) >= 0)
        for i in range(a.shape[0]):
            cols = a.indices[a.indptr[i]:a.indptr[i + 1]]
            assert np.all(np.diff(cols) > 0)
            assert np.all((cols >= 0) & (cols < a.shape[1]))


def test_khop_chain():
    s = pa_schema()
    g = build_graph(s, {"A": np.ones((2, 1)), "P": np.ones((1, 1))}, {"A-P": [(0, 0), (1, 0)]})
    assert khop_nodes(g, ("A", 0), 0) == {(0, 0)}
    assert khop_nodes(g, ("A", 0), 1) == {(1, 0)}
    assert khop_nodes(g, ("A", 0), 2) == {(0, 1)}
    with pytest.raises(StructuralError):
        khop_nodes(g, ("A", 7), 1)


def test_khop_matches_floyd_warshall(rng):
    g, _ = random_hetero(rng, n_types=3, max_nodes=50, edge_p=0.08)
    n, nb, off = graph_neighbours(g)
    d = floyd_warshall(n, nb)
    start = (1, 0)
    s = off[1]
    reachable = set()
    for k in range(n):
        shell = khop_nodes(g, start, k)
        want = {(t, v - off[t]) for v in range(n) if d[s, v] == k
                for t in range(len(off) - 1) if off[t] <= v < off[t + 1]}
        assert shell == want
        assert not shell & reachable
        reachable |= shell
    assert len(reachable) == int(np.sum(np.isfinite(d[s])))


def test_hop_distances_per_type():
    g = build_graph(pa_schema(), {"A": np.ones((2, 1)), "P": np.ones((2, 1))}, {"A-P": [(0, 0)]})
    dist = hop_distances(g, ("A", 0))
    np.testing.assert_array_equal(dist[0], [0, -1])
    np.testing.assert_array_equal(dist[1], [1, -1])

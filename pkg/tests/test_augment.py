import numpy as np
import pytest
from scipy.stats import binom

from oracles import bfs_all, graph_neighbours, random_hetero
from vnhgcn.augment import AugmentationConfig, augment, sample_drop_edge
from vnhgcn.errors import ConfigError
from vnhgcn.graph import NetworkSchema, build_graph


def one_type_graph():
    s = NetworkSchema.build(["A"], [])
    return build_graph(s, {"A": np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])}, {})


def acm_like(counts=(30, 12, 3), seed=0):
    rng = np.random.default_rng(seed)
    s = NetworkSchema.build(["P", "A", "S"], [("P-A", "P", "A", "A-P"), ("A-P", "A", "P", "P-A"),
                                              ("P-S", "P", "S", "S-P"), ("S-P", "S", "P", "P-S")])
    feats = {n: rng.normal(size=(c, 3)) for n, c in zip("PAS", counts)}
    pa = [(p, rng.integers(counts[1])) for p in range(counts[0])]
    ps = [(p, rng.integers(counts[2])) for p in range(counts[0])]
    return build_graph(s, feats, {"P-A": pa, "P-S": ps})


def test_config_validation():
    with pytest.raises(ConfigError):
        AugmentationConfig(n_virtual=0)
    with pytest.raises(ConfigError):
        AugmentationConfig(central_dim=0)
    with pytest.raises(ConfigError):
        AugmentationConfig(assignment="nope")


def test_mean_init_single_virtual():
    aug = augment(one_type_graph(), AugmentationConfig(n_virtual=1, central_dim=5))
    np.testing.assert_array_equal(aug.graph.features[aug.virtual_type_map[0]], [[3.0, 4.0]])
    np.testing.assert_array_equal(aug.graph.features[aug.central_type], np.ones((1, 5)))


def test_mean_init_matches_assignment(rng):
    g = acm_like()
    aug = augment(g, AugmentationConfig(n_virtual=4, seed=3))
    for t, a in aug.assignment.items():
        vx = aug.graph.features[aug.virtual_type_map[t]]
        for v in range(4):
            members = g.features[t][a == v]
            want = members.mean(axis=0) if len(members) else np.zeros(g.feature_dims[t])
            np.testing.assert_allclose(vx[v], want, atol=1e-14)


def test_acm_three_types_two_virtual():
    g = acm_like()
    aug = augment(g, AugmentationConfig(n_virtual=2))
    assert aug.schema.num_types == 7
    up = aug.schema.relation_index("A->virtual_A")
    assert aug.graph.adjacency[up].shape == (2, 12)
    assert aug.graph.adjacency[up].nnz == 12


@pytest.mark.parametrize("mode", ["uniform-random", "round-robin"])
def test_laws_on_random_graphs(rng, mode):
    for trial in range(8):
        g, _ = random_hetero(rng, max_nodes=40)
        aug = augment(g, AugmentationConfig(n_virtual=int(rng.integers(1, 5)), seed=trial, assignment=mode))
        assert aug.schema.num_types == 2 * g.schema.num_types + 1
        for t in range(g.schema.num_types):
            tname = g.schema.node_types[t].name
            down = aug.schema.relation_index(f"virtual_{tname}->{tname}")
            assert np.all(aug.graph.adjacency[down].degrees() == 1)
            assert np.bincount(aug.assignment[t], minlength=aug.config.n_virtual).sum() == g.node_counts[t]
        for r in g.schema.relations:
            assert aug.graph.adjacency[r.index].edge_set() == g.adjacency[r.index].edge_set()
        c = aug.schema.relation_index(f"central->virtual_{g.schema.node_types[0].name}")
        assert aug.graph.adjacency[c].nnz == aug.config.n_virtual
        n, nb, off = graph_neighbours(aug.graph)
        n0, nb0, _ = graph_neighbours(g)
        d = bfs_all(n, nb)
        d0 = bfs_all(n0, nb0)
        n_real = int(off[g.schema.num_types])
        assert np.all(d[:n_real, :n_real] <= np.minimum(d0, 4))


def test_round_robin_balanced():
    g = acm_like(counts=(33, 12, 3))
    aug = augment(g, AugmentationConfig(n_virtual=4, assignment="round-robin"))
    counts = np.bincount(aug.assignment[0], minlength=4)
    assert counts.max() - counts.min() <= 1


def test_more_virtual_than_real_nodes():
    aug = augment(one_type_graph(), AugmentationConfig(n_virtual=8, assignment="round-robin"))
    vx = aug.graph.features[aug.virtual_type_map[0]]
    assert np.sum(np.all(vx == 0, axis=1)) == 5


def test_deterministic():
    g = acm_like()
    a = augment(g, AugmentationConfig(seed=11))
    b = augment(g, AugmentationConfig(seed=11))
    for x, y in zip(a.graph.features, b.graph.features):
        assert x.tobytes() == y.tobytes()
    for x, y in zip(a.graph.adjacency, b.graph.adjacency):
        assert x.indices.tobytes() == y.indices.tobytes() and x.indptr.tobytes() == y.indptr.tobytes()


def _virtual_connections(aug):
    return sum(aug.graph.adjacency[r].nnz for r in aug.virtual_edge_relations) // 2


def test_drop_edge_boundaries():
    g = acm_like()
    aug = augment(g, AugmentationConfig(n_virtual=3))
    assert sample_drop_edge(aug, 0.0, 1) is aug
    none = sample_drop_edge(aug, 1.0, 1)
    assert _virtual_connections(none) == 0
    for r in g.schema.relations:
        assert none.graph.adjacency[r.index].edge_set() == g.adjacency[r.index].edge_set()
    for r in aug.central_relations:
        assert none.graph.adjacency[r].nnz == aug.graph.adjacency[r].nnz
    with pytest.raises(ConfigError):
        sample_drop_edge(aug, 1.5, 0)


def test_drop_edge_leaves_input_untouched():
    aug = augment(acm_like(), AugmentationConfig(n_virtual=3))
    before = [a.indices.copy() for a in aug.graph.adjacency]
    sample_drop_edge(aug, 0.5, 3)
    for b, a in zip(before, aug.graph.adjacency):
        np.testing.assert_array_equal(b, a.indices)


def test_drop_edge_binomial_count():
    s = NetworkSchema.build(["A"], [])
    g = build_graph(s, {"A": np.ones((1000, 1))}, {})
    aug = augment(g, AugmentationConfig(n_virtual=16))
    kept = _virtual_connections(sample_drop_edge(aug, 0.5, 2024))
    lo, hi = binom.interval(0.999, 1000, 0.5)
    assert (lo, hi) == (448.0, 552.0)
    assert lo <= kept <= hi


def test_drop_edge_renormalizes():
    aug = augment(acm_like(), AugmentationConfig(n_virtual=3))
    dropped = sample_drop_edge(aug, 0.4, 7)
    for r in aug.virtual_edge_relations:
        sums = dropped.graph.normalized[r].to_dense().sum(axis=1)
        assert np.all((np.abs(sums - 1) <= 1e-12) | (sums == 0))

import json

import numpy as np
import pytest

from oracles import random_hetero
from vnhgcn.data import (DanglingEdgeError, DimensionMismatchError, ManifestError, MissingFileError,
                         SyntheticSpec, UnknownClassError, generate_synthetic, load_dataset,
                         save_dataset)
from vnhgcn.errors import ConfigError, DataError
from vnhgcn.graph import hop_distances


def assert_same_graph(a, b):
    assert a.schema == b.schema
    for x, y in zip(a.features, b.features):
        assert x.tobytes() == y.tobytes()
    for x, y in zip(a.adjacency, b.adjacency):
        assert x.edge_set() == y.edge_set()
    np.testing.assert_array_equal(a.labels, b.labels)
    assert (a.target_type, a.num_classes) == (b.target_type, b.num_classes)


def test_round_trip_random(tmp_path, rng):
    for i in range(5):
        g, _ = random_hetero(rng)
        save_dataset(g, tmp_path / str(i))
        assert_same_graph(g, load_dataset(tmp_path / str(i)))


def test_round_trip_synthetic(tmp_path):
    g = generate_synthetic(SyntheticSpec(n_target=20, n_bridge=8, n_context=3, feature_dim=3))
    path = save_dataset(g, tmp_path)
    assert_same_graph(g, load_dataset(path))


def write_min(tmp_path, manifest=None, feats="id,f0\n0,1.0\n1,2.0\n", edges="src,dst\n0,1\n",
              labels="id,label\n0,0\n1,1\n"):
    (tmp_path / "A.csv").write_text(feats)
    (tmp_path / "e.csv").write_text(edges)
    (tmp_path / "labels.csv").write_text(labels)
    m = manifest or {
        "node_types": [{"name": "A", "features": "A.csv"}],
        "relations": [{"name": "cites", "src": "A", "dst": "A", "inverse": "cited", "edges": "e.csv"}],
        "target": {"type": "A", "labels": "labels.csv", "num_classes": 2},
    }
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    return tmp_path


def test_minimal_dataset_with_auto_inverse(tmp_path):
    g = load_dataset(write_min(tmp_path))
    assert [r.name for r in g.schema.relations] == ["cites", "cited"]
    assert g.adjacency[1].edge_set() == {(1, 0)}


def test_missing_inverse_names_relation(tmp_path):
    m = {"node_types": [{"name": "A", "features": "A.csv"}],
         "relations": [{"name": "cites", "src": "A", "dst": "A", "edges": "e.csv"}],
         "target": {"type": "A", "num_classes": 2}}
    with pytest.raises(ManifestError, match="cites"):
        load_dataset(write_min(tmp_path, m))


def test_zero_dim_features(tmp_path):
    with pytest.raises(DimensionMismatchError):
        load_dataset(write_min(tmp_path, feats="id\n0\n1\n"))


def test_ragged_features_report_line(tmp_path):
    with pytest.raises(DimensionMismatchError, match=r"A\.csv:3"):
        load_dataset(write_min(tmp_path, feats="id,f0\n0,1.0\n1,2.0,3.0\n"))


def test_dangling_edge(tmp_path):
    with pytest.raises(DanglingEdgeError, match=r"e\.csv:3"):
        load_dataset(write_min(tmp_path, edges="src,dst\n0,1\n0,5\n"))


def test_unknown_class(tmp_path):
    with pytest.raises(UnknownClassError, match=r"labels\.csv:3"):
        load_dataset(write_min(tmp_path, labels="id,label\n0,0\n1,2\n"))


def test_missing_files(tmp_path):
    with pytest.raises(MissingFileError):
        load_dataset(tmp_path / "nope")
    write_min(tmp_path)
    (tmp_path / "e.csv").unlink()
    with pytest.raises(MissingFileError, match=r"e\.csv"):
        load_dataset(tmp_path)


def test_errors_are_data_errors():
    for cls in (MissingFileError, ManifestError, DimensionMismatchError, DanglingEdgeError,
                UnknownClassError):
        assert issubclass(cls, DataError)


def test_typed_chain_hops():
    g = generate_synthetic(SyntheticSpec(kind="typed-chain", chain_length=9))
    d = hop_distances(g, (0, 0))
    assert sum(int(np.sum(x == 8)) for x in d) == 1
    assert g.node_counts == (5, 4)


def test_typed_chain_length_twelve_reaches_eleven():
    g = generate_synthetic(SyntheticSpec(kind="typed-chain", chain_length=12))
    d = np.concatenate(hop_distances(g, (0, 0)))
    assert sorted(d.tolist()) == list(range(12))


def test_planted_partition_linearly_separable():
    g = generate_synthetic(SyntheticSpec(seed=3))
    x = g.features[0]
    y = np.eye(3)[g.labels]
    X = np.hstack([x, np.ones((len(x), 1))])
    w, *_ = np.linalg.lstsq(X, y, rcond=None)
    assert np.mean(np.argmax(X @ w, axis=1) == g.labels) >= 0.99
    assert g.schema.num_types == 3 and g.node_counts[0] == 300


def test_planted_partition_intra_class_preference():
    g = generate_synthetic(SyntheticSpec(seed=0))
    tb = g.adjacency[g.schema.relation_index("target-bridge")]
    bclass = np.arange(g.node_counts[1]) % 3
    pairs = tb.edges()
    same = np.mean(g.labels[pairs[:, 0]] == bclass[pairs[:, 1]])
    assert same > 0.8


def test_generator_deterministic():
    a = generate_synthetic(SyntheticSpec(seed=5))
    b = generate_synthetic(SyntheticSpec(seed=5))
    assert_same_graph(a, b)


@pytest.mark.parametrize("bad", [dict(kind="x"), dict(n_target=0), dict(separation=0.0),
                                 dict(feature_dim=2), dict(intra_class=1.5)])
def test_spec_validation(bad):
    with pytest.raises(ConfigError):
        SyntheticSpec(**bad)

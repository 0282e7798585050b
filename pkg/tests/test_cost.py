import numpy as np
import pytest

from advtransport.cost import (
    IndistGraph,
    NeighborhoodSpec,
    load_distances,
    pairwise_distances,
    save_distances,
    threshold,
)
from advtransport.dataset import BinaryTask, DatasetError
from advtransport.numerics import BallSpec, ball_norm

from .conftest import random_spd


def test_pairwise_examples():
    v = np.array([[0.3, -1.2]])
    assert pairwise_distances(BinaryTask(v, v), BallSpec("l2")).tolist() == [[0.0]]
    task = BinaryTask([[0.0, 0.0]], [[3.0, 4.0]])
    assert pairwise_distances(task, BallSpec("l2")).tolist() == [[5.0]]


def test_pairwise_matches_per_pair_loop(rng):
    task = BinaryTask(rng.standard_normal((8, 5)), rng.standard_normal((8, 5)))
    for ball in (BallSpec("l1"), BallSpec("l2"), BallSpec("linf")):
        d = pairwise_distances(task, ball)
        ref = [[ball_norm(a - b, ball) for b in task.class_neg] for a in task.class_pos]
        assert d.tolist() == ref
    maha = BallSpec("mahalanobis", random_spd(rng, 5))
    d = pairwise_distances(task, maha)
    ref = [[ball_norm(a - b, maha) for b in task.class_neg] for a in task.class_pos]
    np.testing.assert_allclose(d, ref, rtol=1e-13, atol=0)


def test_pairwise_thread_independent(rng):
    task = BinaryTask(rng.standard_normal((40, 6)), rng.standard_normal((40, 6)))
    a = pairwise_distances(task, BallSpec("linf"), workers=1)
    b = pairwise_distances(task, BallSpec("linf"), workers=4)
    assert np.array_equal(a, b)


def test_pairwise_swap_transposes(rng):
    task = BinaryTask(rng.standard_normal((6, 3)), rng.standard_normal((6, 3)))
    a = pairwise_distances(task, BallSpec("l2"))
    b = pairwise_distances(task.swapped(), BallSpec("l2"))
    assert np.array_equal(a, b.T)


def test_threshold_examples(rng):
    d = rng.uniform(0.1, 3.0, (6, 6))
    assert threshold(d, 0.0) == IndistGraph.empty(6)
    assert threshold(d, d.max() / 2) == IndistGraph.complete(6)
    assert threshold(np.array([[2.0]]), 1.0).has_edge(0, 0)
    assert not threshold(np.array([[2.0]]), np.nextafter(1.0, 0)).has_edge(0, 0)
    with pytest.raises(ValueError):
        threshold(d, -0.1)


def test_threshold_monotone(rng):
    d = rng.uniform(0, 2, (10, 10))
    prev = threshold(d, 0.0)
    for beta in np.linspace(0, 1.2, 25)[1:]:
        cur = threshold(d, beta)
        assert prev.issubset(cur)
        prev = cur


def test_threshold_midpoint_equivalence(rng):
    # for l2 an edge exists iff the two closed beta-balls share a point (the midpoint)
    ball = BallSpec("l2")
    task = BinaryTask(rng.standard_normal((12, 3)), rng.standard_normal((12, 3)))
    d = pairwise_distances(task, ball)
    beta = 0.8
    g = threshold(d, beta)
    for i, a in enumerate(task.class_pos):
        for j, b in enumerate(task.class_neg):
            mid = 0.5 * (a + b)
            shared = ball_norm(a - mid, ball) <= beta and ball_norm(b - mid, ball) <= beta
            assert g.has_edge(i, j) == shared


def test_graph_accessors():
    adj = np.array([[1, 0, 1], [0, 0, 0], [1, 1, 1]], dtype=bool)
    g = IndistGraph(adj)
    assert g.num_edges == 5
    assert g.neighbors(0) == [0, 2]
    assert g.adjacency_lists() == [[0, 2], [], [0, 1, 2]]
    assert np.array_equal(g.transpose().to_dense(), adj.T)
    assert g.nbytes == 3
    big = IndistGraph.complete(1000)
    assert big.nbytes == 1000 * 125


def test_neighborhood_spec_validation():
    with pytest.raises(ValueError):
        NeighborhoodSpec(BallSpec("l2"), -1.0)


def test_distance_cache_round_trip(tmp_path, rng):
    d = rng.uniform(0, 5, (7, 7))
    path = tmp_path / "d.bin"
    save_distances(path, d, 784, BallSpec("linf"))
    raw = path.read_bytes()
    assert raw[:4] == b"ADVD" and len(raw) == 16 + 8 * 49
    back, dim, kind = load_distances(path)
    assert np.array_equal(back, d) and dim == 784 and kind == "linf"


def test_distance_cache_errors(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(DatasetError, match="not a distance cache"):
        load_distances(path)
    save_distances(path, np.zeros((2, 2)), 1, BallSpec("l2"))
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(DatasetError, match="payload"):
        load_distances(path)

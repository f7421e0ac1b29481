import io
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crep.graph import (
    DirectedGraph,
    EdgeListError,
    degree_stats,
    dump_edge_list,
    load_edge_list,
    make_folds,
    read_edge_list,
    restrict_to_core,
    write_edge_list,
)


def test_load_basic():
    g = load_edge_list("a b\nb a\nb c")
    assert g.n_nodes == 3
    assert g.total_weight == 3
    assert g.get(0, 1) == g.get(1, 0) == g.get(1, 2) == 1
    assert g.get(2, 1) == 0
    assert g.labels() == ("a", "b", "c")


def test_only_self_loops_is_error():
    with pytest.raises(EdgeListError):
        load_edge_list("a a 5")


def test_duplicates_sum():
    g = load_edge_list("a b 2\na b 3")
    assert g.n_edges == 1
    assert g.get(0, 1) == 5


def test_self_loops_dropped_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        g = load_edge_list("a a\nb b 2\na b")
    assert g.n_edges == 1
    assert "2 self-loop" in caplog.text


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("a b\nx", "line 2"),
        ("a b 1 7", "line 1"),
        ("a b\n# c\nb c 1.5", "line 3"),
        ("a b 0", "line 1"),
        ("a b -2", "line 1"),
        ("", "no edges"),
        ("# only a comment\n", "no edges"),
    ],
)
def test_malformed_records(text, fragment):
    with pytest.raises(EdgeListError, match=fragment):
        load_edge_list(text)


def test_delimiters_comments_and_streams():
    text = "# header\nx,y,4\n\ny  z\tw\n"
    with pytest.raises(EdgeListError):
        load_edge_list(text)  # "y z w" has a non-integer weight
    g = load_edge_list(io.BytesIO(b"# header\nx,y,4\n\ny \t z\n"))
    assert g.get(0, 1) == 4 and g.get(1, 2) == 1


def test_degree_stats():
    g = DirectedGraph.from_dense(np.array([[0, 2], [3, 0]]))
    s = degree_stats(g)
    assert s.total_weight == 5 and s.n_edges == 2 and s.avg_degree == 2.5
    empty = DirectedGraph.from_arrays(10, [], [], [])
    s = degree_stats(empty)
    assert (s.total_weight, s.avg_degree, s.n_edges) == (0, 0.0, 0)


def test_real_weights_rejected():
    with pytest.raises(ValueError):
        DirectedGraph.from_arrays(2, [0], [1], [1.5])


def test_from_arrays_drops_diagonal_and_zeros():
    g = DirectedGraph.from_arrays(3, [0, 1, 2, 0], [0, 2, 1, 1], [4, 0, 1, 2])
    assert g.n_edges == 2
    assert g.get(0, 0) == 0 and g.get(2, 1) == 1 and g.get(0, 1) == 2


def test_lookup_matches_dense_on_random_probes():
    rng = np.random.default_rng(1)
    N = 60
    A = rng.poisson(0.2, size=(N, N))
    np.fill_diagonal(A, 0)
    g = DirectedGraph.from_dense(A)
    i = rng.integers(0, N, 100_000)
    j = rng.integers(0, N, 100_000)
    assert np.array_equal(g.lookup(i, j), A[i, j])
    assert np.array_equal(g.lookup(j, i), A[j, i])
    assert np.array_equal(g.reverse_weights(), A[g.dst, g.src])
    assert all(g.get(a, b) == A[a, b] for a, b in zip(i[:500], j[:500]))


def test_lookup_empty_graph():
    g = DirectedGraph.from_arrays(4, [], [], [])
    assert g.lookup([0, 1], [1, 2]).tolist() == [0, 0]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(1, 5)), min_size=1,
                max_size=40))
def test_round_trip(records):
    records = [r for r in records if r[0] != r[1]]
    if not records:
        return
    text = "".join(f"n{a} n{b} {w}\n" for a, b, w in records)
    g = load_edge_list(text)
    h = load_edge_list(dump_edge_list(g))
    lab_g, lab_h = g.labels(), h.labels()
    wg = {(lab_g[i], lab_g[j]): w for i, j, w in zip(g.src, g.dst, g.weight)}
    wh = {(lab_h[i], lab_h[j]): w for i, j, w in zip(h.src, h.dst, h.weight)}
    assert wg == wh


def test_file_round_trip(tmp_path):
    g = load_edge_list("a b 2\nb c\nc a 7\n")
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    h = read_edge_list(path)
    assert h.labels() == g.labels()
    assert np.array_equal(h.to_dense(), g.to_dense())


def test_restrict_to_core():
    # d only receives; e-f is a separate 2-cycle
    g = load_edge_list("a b\nb c\nc a\nc d\ne f\nf e\n")
    core = restrict_to_core(g)
    assert set(core.labels()) == {"a", "b", "c"}
    assert core.total_weight == 3


def test_folds_small_pigeonhole():
    m = make_folds(3, 5, seed=0)
    assert sorted(m.sizes().tolist()) == [1, 1, 1, 1, 2]
    assert (np.diag(m.assignment) == -1).all()


def test_folds_errors():
    with pytest.raises(ValueError):
        make_folds(2, 3)
    with pytest.raises(ValueError):
        make_folds(5, 1)
    with pytest.raises(ValueError):
        make_folds(1, 2)


def test_folds_deterministic():
    a = make_folds(30, 5, seed=4)
    b = make_folds(30, 5, seed=4)
    c = make_folds(30, 5, seed=5)
    assert np.array_equal(a.assignment, b.assignment)
    assert not np.array_equal(a.assignment, c.assignment)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 25), st.integers(2, 8), st.integers(0, 10_000))
def test_fold_partition(N, F, seed):
    if F > N * (N - 1):
        with pytest.raises(ValueError):
            make_folds(N, F, seed)
        return
    m = make_folds(N, F, seed)
    off = ~np.eye(N, dtype=bool)
    assert ((m.assignment >= 0) == off).all()
    sizes = m.sizes()
    assert sizes.sum() == N * (N - 1)
    assert sizes.max() - sizes.min() <= 1
    for f in range(F):
        train = m.train_support(f)
        test = np.zeros((N, N), dtype=bool)
        test[m.test_pairs(f)] = True
        assert not (train & test).any()
        assert ((train | test) == off).all()

import io
import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from embinterp.graph import (DataError, Graph, NodeGrouping, ParseError, density, graph_stats,
                             load_edge_list, load_labels, sample_non_edges, write_edge_list)

from conftest import complete_edges, erdos_renyi


def test_reverse_duplicate_removed():
    g = load_edge_list(b"0 1\n1 0\n")
    assert (g.num_nodes, g.num_edges) == (2, 1)


def test_self_loop_dropped_and_counted():
    g = load_edge_list(b"a b\nb c\na a\n")
    assert (g.num_nodes, g.num_edges, g.dropped_self_loops) == (3, 2, 1)
    assert g.ids == ("a", "b", "c")


def test_comments_and_blank_lines():
    g = load_edge_list(b"# header\n\nx y\n  # indented comment\ny z\n")
    assert g.num_edges == 2


def test_malformed_line_reports_line_number():
    with pytest.raises(ParseError) as exc:
        load_edge_list(b"a b\nb c d\n")
    assert exc.value.line == 2
    assert "line 2" in str(exc.value)


def test_empty_stream_is_empty_graph():
    g = load_edge_list(b"")
    assert g.num_nodes == 0 and g.num_edges == 0
    assert graph_stats(g).to_json() == {"nodes": 0, "edges": 0, "density": 0.0, "components": 0}


def test_comma_delimiter():
    g = load_edge_list(b"1,2\n2,3\n", delimiter=",")
    assert g.num_edges == 2 and g.ids == ("1", "2", "3")


def test_adjacency_invariants():
    g = erdos_renyi(40, 0.2, 3)
    for u in range(g.num_nodes):
        nb = g.neighbors(u)
        assert np.all(np.diff(nb) > 0)
        assert u not in nb
        for v in nb:
            assert u in g.neighbors(v)
    assert g.degrees().sum() == 2 * g.num_edges


@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), max_size=60))
def test_round_trip_and_degree_sum(pairs):
    text = "".join(f"v{a} v{b}\n" for a, b in pairs).encode()
    g = load_edge_list(text)
    buf = io.StringIO()
    write_edge_list(g, buf)
    g2 = load_edge_list(buf.getvalue().encode())
    # write drops isolated nodes; compare on edge sets by name
    e1 = {frozenset((g.ids[u], g.ids[v])) for u, v in g.edges()}
    e2 = {frozenset((g2.ids[u], g2.ids[v])) for u, v in g2.edges()}
    assert e1 == e2
    expected = {frozenset((f"v{a}", f"v{b}")) for a, b in pairs if a != b}
    assert e1 == expected
    assert g.degrees().sum() == 2 * g.num_edges


def test_round_trip_identical_adjacency():
    g = erdos_renyi(30, 0.3, 1)
    buf = io.StringIO()
    write_edge_list(g, buf)
    g2 = load_edge_list(buf.getvalue().encode())
    perm = np.asarray([g2.index_of(name) for name in g.ids])
    assert np.array_equal(g.relabeled(perm).indptr, g2.indptr)
    assert np.array_equal(g.relabeled(perm).indices, g2.indices)


def test_stats_single_node_and_k4():
    g1 = Graph.from_edges(np.zeros((0, 2), dtype=np.int64), 1)
    s = graph_stats(g1)
    assert s.density == 0.0 and s.num_components == 1
    k4 = Graph.from_edges(complete_edges(range(4)), 4)
    assert graph_stats(k4).density == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_density_matches_pair_count_oracle(seed):
    g = erdos_renyi(35, 0.15, seed)
    pairs = list(itertools.combinations(range(g.num_nodes), 2))
    adjacent = sum(1 for u, v in pairs if g.has_edge(u, v))
    oracle = adjacent / len(pairs)
    assert graph_stats(g).density == pytest.approx(oracle, rel=1e-12)


def test_components_counted(two_triangles):
    g = Graph.from_edges(two_triangles.edges(), 7)
    assert graph_stats(g).num_components == 3


def test_flickr_density_from_counts():
    assert density(80513, 5899882) == pytest.approx(1.82e-3, rel=5e-3)
    assert density(10312, 333983) == pytest.approx(6.28e-3, rel=1e-3)


def test_labels_basic():
    g = load_edge_list(b"n1 n2\nn2 n3\n")
    grp = load_labels(b"n1\t2,2\nn3\t5,2\n", g)
    assert grp.kind == "multilabel" and grp.num_groups == 2
    assert grp.membership[0] == (0,)
    assert grp.membership[1] == ()
    assert grp.names == ("2", "5")
    assert list(grp.group_sizes) == [2, 1]


def test_labels_empty_file():
    g = load_edge_list(b"a b\n")
    grp = load_labels(b"", g)
    assert grp.num_groups == 0 and grp.membership == [(), ()]


def test_labels_unknown_ids_listed():
    g = load_edge_list(b"a b\n")
    with pytest.raises(DataError, match="zz"):
        load_labels(b"a\t1\nzz\t2\n", g)


def test_labels_empty_group_list():
    g = load_edge_list(b"a b\n")
    with pytest.raises(ParseError):
        load_labels(b"a\t\n", g)


def test_partition_invariant():
    grp = NodeGrouping.from_partition([0, 1, 1, 2])
    assert list(grp.group_sizes) == [1, 2, 1]
    with pytest.raises(ValueError):
        NodeGrouping("partition", 2, [(0,), (0, 1)])


def test_non_edges_complete_graph_errors():
    with pytest.raises(DataError):
        sample_non_edges(Graph.from_edges(complete_edges(range(4)), 4), 1, 0)


def test_non_edges_path_forced():
    g = load_edge_list(b"a b\nb c\n")
    assert sample_non_edges(g, 1, 0) == [(0, 2)]


def test_non_edges_random_graph_oracle():
    g = erdos_renyi(50, 0.1, 7)
    s1 = sample_non_edges(g, 100, 11)
    s2 = sample_non_edges(g, 100, 11)
    assert s1 == s2
    edge_set = {(int(u), int(v)) for u, v in g.edges()}
    assert len(set(s1)) == 100
    for u, v in s1:
        assert u < v and (u, v) not in edge_set


def test_non_edges_dense_regime_exhausts():
    g = Graph.from_edges([(0, 1), (1, 2)], 4)
    total = 6 - 2
    got = sample_non_edges(g, total, 3)
    assert sorted(got) == [(0, 2), (0, 3), (1, 3), (2, 3)]

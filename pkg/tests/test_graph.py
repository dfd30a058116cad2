import math
from collections import deque

import numpy as np
import pytest
from scipy import stats

from efneuro import graph


@pytest.fixture(scope="module")
def er10k():
    return graph.generate_er(10000, 0.0008, seed=1)


def complete_graph(n):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return graph.network_from_edge_array(n, np.array(edges))


def test_complete_graph_histogram():
    k5 = graph.generate_er(5, 1.0, seed=0)
    assert graph.degree_histogram(k5) == {4: 5}


def test_empty_graph_histogram():
    empty = graph.generate_er(3, 0.0, seed=0)
    assert graph.degree_histogram(empty) == {0: 3}
    assert list(empty.degree_classes) == [0]
    assert len(empty.degree_classes[0]) == 3


def test_preconditions():
    with pytest.raises(ValueError):
        graph.generate_er(0, 0.5, seed=0)
    with pytest.raises(ValueError):
        graph.generate_er(5, 1.5, seed=0)


def test_adjacency_invariants(er10k):
    net = er10k
    adj = net.adjacency
    assert (adj != adj.T).nnz == 0                      # symmetric
    assert adj.diagonal().sum() == 0                    # no self-loops
    assert adj.data.max() == 1                          # no duplicate edges
    assert np.array_equal(net.degrees, np.diff(adj.indptr))
    for i in (0, 137, 9999):
        assert np.array_equal(net.neighbor_lists[i], np.sort(net.neighbor_lists[i]))
        assert len(net.neighbor_lists[i]) == net.degrees[i]


def test_degree_classes_partition(er10k):
    net = er10k
    all_nodes = np.concatenate([net.degree_classes[k] for k in net.degree_classes])
    assert len(all_nodes) == net.num_nodes
    assert len(np.unique(all_nodes)) == net.num_nodes
    for k, nodes in net.degree_classes.items():
        assert np.all(net.degrees[nodes] == k)


def test_reproducible(er10k):
    again = graph.generate_er(10000, 0.0008, seed=1)
    assert (er10k.adjacency != again.adjacency).nnz == 0
    other = graph.generate_er(10000, 0.0008, seed=2)
    assert (er10k.adjacency != other.adjacency).nnz > 0


def test_degree_histogram_poisson_chisq(er10k):
    """Empirical degree histogram consistent with Poisson(N p)."""
    net = er10k
    n = net.num_nodes
    kbar = n * net.connection_probability
    counts = np.bincount(net.degrees, minlength=40)
    expected = stats.poisson.pmf(np.arange(40), kbar) * n
    expected[-1] = n * stats.poisson.sf(38, kbar)
    # pool bins until every expected count is >= 5
    obs_b, exp_b = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(counts, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            obs_b.append(acc_o)
            exp_b.append(acc_e)
            acc_o = acc_e = 0.0
    obs_b[-1] += acc_o
    exp_b[-1] += acc_e
    obs_b, exp_b = np.array(obs_b), np.array(exp_b)
    exp_b *= obs_b.sum() / exp_b.sum()
    chi2 = ((obs_b - exp_b) ** 2 / exp_b).sum()
    dof = len(obs_b) - 1
    assert chi2 < stats.chi2.ppf(0.999, dof), (chi2, dof)


def test_poisson_mode_fraction(er10k):
    """Fraction of degree-8 nodes near the Poisson pmf value e^-8 8^8/8!."""
    pmf8 = math.exp(-8) * 8.0 ** 8 / math.factorial(8)
    frac = len(er10k.degree_classes.get(8, [])) / er10k.num_nodes
    se = math.sqrt(pmf8 * (1 - pmf8) / er10k.num_nodes)
    assert abs(frac - pmf8) < 3 * se


def test_edge_count_over_seeds():
    n, p = 400, 0.01
    m_pairs = n * (n - 1) // 2
    reps = 30
    counts = [graph.generate_er(n, p, seed=s).num_edges for s in range(reps)]
    mean = np.mean(counts)
    se_mean = math.sqrt(m_pairs * p * (1 - p) / reps)
    assert abs(mean - m_pairs * p) < 4 * se_mean


def test_clustering_triangle():
    tri = graph.network_from_edge_array(3, np.array([[0, 1], [1, 2], [0, 2]]))
    for i in range(3):
        assert graph.clustering_coefficient(tri, i) == 1.0


def test_clustering_star_center():
    star = graph.network_from_edge_array(5, np.array([[0, 1], [0, 2], [0, 3], [0, 4]]))
    assert graph.clustering_coefficient(star, 0) == 0.0
    with pytest.raises(ValueError):
        graph.clustering_coefficient(star, 1)  # leaf has degree 1


def test_clustering_er_mean_near_p():
    net = graph.generate_er(2000, 0.01, seed=4)
    vals = [graph.clustering_coefficient(net, i)
            for i in range(net.num_nodes) if net.degrees[i] >= 2]
    mean = np.mean(vals)
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(mean - 0.01) < 3 * se


def test_path_length_complete():
    assert graph.mean_path_length(complete_graph(10), 500, seed=0) == 1.0


def test_path_length_path_graph():
    chain = graph.network_from_edge_array(3, np.array([[0, 1], [1, 2]]))
    est = graph.mean_path_length(chain, 30000, seed=1)
    assert abs(est - 4.0 / 3.0) < 0.02  # pairs {1,1,2} -> mean 4/3


def test_path_length_disconnected_error():
    empty = graph.generate_er(4, 0.0, seed=0)
    with pytest.raises(ValueError):
        graph.mean_path_length(empty, 50, seed=0)


def _oracle_mean_path(net, sources):
    """Independent BFS oracle over all pairs reachable from the sources."""
    total = count = 0
    for s in sources:
        dist = {s: 0}
        q = deque([s])
        while q:
            v = q.popleft()
            for w in net.neighbor_lists[v]:
                w = int(w)
                if w not in dist:
                    dist[w] = dist[v] + 1
                    q.append(w)
        total += sum(d for d in dist.values() if d > 0)
        count += sum(1 for d in dist.values() if d > 0)
    return total / count


@pytest.mark.slow
def test_path_length_er_vs_theory_and_oracle(er10k):
    est = graph.mean_path_length(er10k, 3000, seed=2)
    theory = math.log(10000) / math.log(8)
    assert theory / 1.5 < est < theory * 1.5
    oracle = _oracle_mean_path(er10k, range(0, 10000, 250))
    assert abs(est - oracle) / oracle < 0.05


def test_edge_list_roundtrip(tmp_path, er10k):
    path = tmp_path / "edges.txt"
    graph.save_edge_list(er10k, str(path))
    loaded = graph.load_edge_list(str(path))
    assert loaded.num_nodes == er10k.num_nodes
    assert loaded.connection_probability == er10k.connection_probability
    assert loaded.seed == er10k.seed
    assert (loaded.adjacency != er10k.adjacency).nnz == 0

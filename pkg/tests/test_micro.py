import math

import numpy as np
import pytest

from efneuro import graph, micro


def star_with_degree(k, n_active):
    """Center node 0 with k leaves, the first n_active leaves active."""
    edges = np.array([[0, j + 1] for j in range(k)])
    net = graph.network_from_edge_array(k + 1, edges)
    state = np.zeros(k + 1, dtype=np.uint8)
    state[1:n_active + 1] = 1
    return net, state


def test_params_range():
    with pytest.raises(ValueError):
        micro.SimParams(eps=0.0)
    with pytest.raises(ValueError):
        micro.SimParams(eps=0.5)
    micro.SimParams(eps=0.499)


def test_active_neighbor_count_all_off():
    net = graph.generate_er(50, 0.2, seed=0)
    state = np.zeros(50, dtype=np.uint8)
    for i in range(50):
        assert micro.active_neighbor_count(net, state, i) == 0


def test_active_neighbor_count_majority_example():
    # degree-9 neuron with six active neighbors
    net, state = star_with_degree(9, 6)
    assert micro.active_neighbor_count(net, state, 0) == 6


def test_active_neighbor_count_complete_graph():
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    net = graph.network_from_edge_array(4, np.array(edges))
    state = np.zeros(4, dtype=np.uint8)
    state[2] = 1
    assert micro.active_neighbor_count(net, state, 2) == 0
    for i in (0, 1, 3):
        assert micro.active_neighbor_count(net, state, i) == 1


@pytest.mark.parametrize("k,n_active,start,expect", [
    (9, 6, 0, "major"),    # strict majority: activate with 1 - eps
    (9, 6, 1, "major"),
    (5, 1, 1, "minor"),    # below majority, sigma >= 1: active with eps
    (5, 1, 0, "minor"),
    (6, 3, 0, "minor"),    # tie sigma = k/2 falls in the low branch
    (6, 3, 1, "minor"),
    (4, 0, 0, "off"),      # no active neighbor: stays off
    (4, 0, 1, "minor"),    # active with silent neighborhood: survives w.p. eps
])
def test_rule_table_probabilities(k, n_active, start, expect):
    eps = 0.17
    net, state = star_with_degree(k, n_active)
    state[0] = start
    p = micro.activation_probabilities(net, state, eps)[0]
    expected = {"major": 1 - eps, "minor": eps, "off": 0.0}[expect]
    assert p == expected


def test_rule_table_empirical_frequencies():
    """Transition frequencies of an embedded neuron over >= 1e5 trials."""
    eps = 0.2
    trials = 120000
    configs = [(9, 6, 0, 1 - eps), (5, 1, 1, eps), (3, 0, 1, eps), (3, 0, 0, 0.0)]
    for k, n_active, start, p_next_active in configs:
        net, state = star_with_degree(k, n_active)
        state[0] = start
        rng = np.random.default_rng(99)
        u = rng.random((trials, net.num_nodes))
        hits = sum(int(micro.step(net, state, micro.SimParams(eps),
                                  uniforms=u[t])[0]) for t in range(trials))
        freq = hits / trials
        se = math.sqrt(max(p_next_active * (1 - p_next_active), 1e-12) / trials)
        assert abs(freq - p_next_active) <= max(4 * se, 1e-9), (k, n_active, start, freq)


def test_all_off_absorbing():
    net = graph.generate_er(200, 0.05, seed=3)
    state = np.zeros(200, dtype=np.uint8)
    rng = np.random.default_rng(0)
    for eps in (0.05, 0.25, 0.45):
        s = state
        for _ in range(1000):
            s = micro.step(net, s, micro.SimParams(eps), rng)
        assert not s.any()


def test_states_stay_binary():
    net = graph.generate_er(300, 0.03, seed=5)
    rng = np.random.default_rng(1)
    s = micro.new_state(net, 0.5, rng)
    for _ in range(50):
        s = micro.step(net, s, micro.SimParams(0.3), rng)
        assert set(np.unique(s)) <= {0, 1}


def test_isolated_node_decay():
    """An isolated active node survives each step with probability eps and
    is absorbed at 0 afterwards."""
    net = graph.network_from_edge_array(1, np.empty((0, 2)))
    eps = 0.3
    trials = 100000
    rng = np.random.default_rng(12)
    u = rng.random(trials)
    survived = (u < eps).sum()  # what step() computes for sigma=0, active
    hits = sum(int(micro.step(net, np.array([1], dtype=np.uint8),
                              micro.SimParams(eps), uniforms=u[t:t + 1])[0])
               for t in range(trials))
    assert hits == survived
    se = math.sqrt(eps * (1 - eps) / trials)
    assert abs(hits / trials - eps) < 4 * se
    # absorbed once off
    out = micro.step(net, np.array([0], dtype=np.uint8), micro.SimParams(eps),
                     uniforms=np.array([0.0]))
    assert out[0] == 0


def test_relabeling_equivariance():
    """Permuting node ids and carrying the per-node variates along yields the
    identically relabeled next state."""
    net = graph.generate_er(120, 0.06, seed=8)
    rng = np.random.default_rng(2)
    state = micro.new_state(net, 0.4, rng)
    u = rng.random(120)
    perm = rng.permutation(120)
    inv = np.argsort(perm)
    # relabeled network: node i becomes perm[i]
    coo = net.adjacency.tocoo()
    edges = np.column_stack([perm[coo.row], perm[coo.col]])
    edges = edges[edges[:, 0] < edges[:, 1]]
    net_p = graph.network_from_edge_array(120, edges)
    out = micro.step(net, state, micro.SimParams(0.2), uniforms=u)
    out_p = micro.step(net_p, state[inv], micro.SimParams(0.2), uniforms=u[inv])
    assert np.array_equal(out_p, out[inv])


def test_run_zero_steps_records_initial_only():
    net = graph.generate_er(30, 0.2, seed=0)
    rng = np.random.default_rng(0)
    state = micro.new_state(net, 0.5, rng)
    rec = micro.TrajectoryRecorder(net)
    final = micro.run(net, state, micro.SimParams(0.1), 0, rng, rec)
    assert len(rec.rows) == 1 and rec.rows[0][0] == 0
    assert np.array_equal(final, state)


def test_recorder_rho_equals_dnorm():
    net = graph.generate_er(100, 0.08, seed=1)
    rng = np.random.default_rng(3)
    rec = micro.TrajectoryRecorder(net, per_degree=True)
    micro.run(net, micro.new_state(net, 0.3, rng), micro.SimParams(0.2), 20, rng, rec)
    assert len(rec.rows) == 21
    for row in rec.rows:
        assert row[1] == row[2]                      # rho == ||d||_1
        assert abs(sum(row[3:]) - row[1]) < 1e-12    # per-degree densities sum to rho


def test_total_density():
    assert micro.total_density(np.ones(7, dtype=np.uint8)) == 1.0
    assert micro.total_density(np.zeros(4, dtype=np.uint8)) == 0.0
    s = np.zeros(10, dtype=np.uint8)
    s[:3] = 1
    assert micro.total_density(s) == 0.3


@pytest.mark.slow
def test_bistability_and_monostability():
    """At small eps the final density depends on the initial condition; at
    large eps every initial condition settles on the low-density plateau."""
    net = graph.generate_er(10000, 0.0006, seed=2)
    params_lo = micro.SimParams(0.1)
    params_hi = micro.SimParams(0.2)

    def plateau(eps_params, rho0, seed):
        rng = np.random.default_rng(seed)
        s = micro.new_state(net, rho0, rng)
        tail = []
        for t in range(400):
            s = micro.step(net, s, eps_params, rng)
            if t >= 350:
                tail.append(micro.total_density(s))
        return np.mean(tail)

    assert plateau(params_lo, 0.9, 1) > 0.5       # high plateau survives
    assert plateau(params_lo, 0.0, 2) == 0.0      # all-off absorbing
    assert plateau(params_hi, 0.9, 3) < 0.2       # high state gone at eps=0.2
    assert plateau(params_hi, 0.5, 4) < 0.2

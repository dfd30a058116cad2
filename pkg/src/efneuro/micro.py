"""Stochastic majority-rule dynamics of binary neurons on a fixed network.

All neurons update synchronously once per discrete time step. A neuron with
an active strict majority of neighbors (sigma > degree/2) becomes active with
probability 1 - eps; with at least one active neighbor but no strict majority
it becomes active with probability eps; with no active neighbor an inactive
neuron stays inactive (spontaneous activation needs an active neighbor) while
an active one survives only with probability eps. The all-off configuration
is therefore absorbing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Network


@dataclass(frozen=True)
class SimParams:
    """Dynamics parameters. eps is the defection probability in (0, 0.5)."""

    eps: float

    def __post_init__(self):
        if not (0.0 < self.eps < 0.5):
            raise ValueError(f"eps must lie in (0, 0.5), got {self.eps}")


def new_state(net: Network, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Random initial state with activation probability rho per neuron."""
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    return (rng.random(net.num_nodes) < rho).astype(np.uint8)


def validate_state(net: Network, state: np.ndarray) -> None:
    if state.shape != (net.num_nodes,):
        raise ValueError(f"state length {state.shape} != ({net.num_nodes},)")
    if not np.isin(state, (0, 1)).all():
        raise ValueError("state values must be exactly 0 or 1")


def active_neighbor_count(net: Network, state: np.ndarray, i: int) -> int:
    """Number of active neighbors sigma_i of node i."""
    return int(state[net.neighbor_lists[i]].sum())


def activation_probabilities(net: Network, state: np.ndarray, eps: float) -> np.ndarray:
    """Per-node probability of being active at the next step.

    The law depends on the current state only through the sigma = 0 guard.
    """
    sigma = net.adjacency.dot(state.astype(np.int32))
    p_act = np.where(2 * sigma > net.degrees, 1.0 - eps, eps)
    silent = sigma == 0
    p_act[silent] = 0.0
    p_act[silent & (state == 1)] = eps
    return p_act


def step(net: Network, state: np.ndarray, params: SimParams,
         rng: np.random.Generator | None = None,
         uniforms: np.ndarray | None = None) -> np.ndarray:
    """One synchronous update of the whole network.

    Uniform variates are consumed in node-id order from `rng`; passing
    `uniforms` (shape (N,)) instead makes the draw assignment explicit,
    e.g. for relabeling-equivariance checks or counter-based parallel runs.
    """
    p_act = activation_probabilities(net, state, params.eps)
    if uniforms is None:
        if rng is None:
            raise ValueError("need either rng or uniforms")
        uniforms = rng.random(net.num_nodes)
    return (uniforms < p_act).astype(np.uint8)


def total_density(state: np.ndarray) -> float:
    """Fraction of active neurons."""
    return int(state.sum()) / len(state)


def run(net: Network, state0: np.ndarray, params: SimParams, num_steps: int,
        rng: np.random.Generator, recorder=None) -> np.ndarray:
    """Apply `step` num_steps times; recorder(t, state) sees the initial
    state at t=0 and every state thereafter. Returns the final state."""
    if num_steps < 0:
        raise ValueError("num_steps must be >= 0")
    validate_state(net, state0)
    state = state0
    if recorder is not None:
        recorder(0, state)
    for t in range(1, num_steps + 1):
        state = step(net, state, params, rng)
        if recorder is not None:
            recorder(t, state)
    return state


class TrajectoryRecorder:
    """Collects (t, rho, d_norm) rows; optionally per-degree densities.

    d_norm is the l1 norm of the degree-resolved density vector, which
    coincides with rho; both columns are emitted for downstream tooling.
    """

    def __init__(self, net: Network, per_degree: bool = False):
        self.net = net
        self.per_degree = per_degree
        self.degrees_present = sorted(net.degree_classes)
        self.rows: list[tuple] = []

    def __call__(self, t: int, state: np.ndarray) -> None:
        n = self.net.num_nodes
        rho = int(state.sum()) / n
        row = [t, rho, rho]
        if self.per_degree:
            for k in self.degrees_present:
                row.append(int(state[self.net.degree_classes[k]].sum()) / n)
        self.rows.append(tuple(row))

    def header(self) -> list[str]:
        cols = ["t", "rho", "d_norm"]
        if self.per_degree:
            cols += [f"d_{k}" for k in self.degrees_present]
        return cols

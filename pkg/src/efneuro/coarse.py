"""Restriction/lifting between microscopic states and degree-resolved
densities, and the black-box ensemble coarse timestepper.

The coarse state is the vector d with d_k = (number of active neurons of
degree k) / N, laid out over a fixed set of degree classes. Lifting places
the prescribed number of active neurons uniformly at random inside each
class, so restriction after lifting reproduces d in expectation (exactly,
when d_k * N is integral). The timestepper lifts an ensemble of realizations,
evolves each for a short horizon with the microscopic dynamics, and restricts
back by ensemble averaging.

Reproducibility: realizations are processed in fixed-size blocks, each with
its own RNG substream spawned from the master seed, and the restriction
accumulates integer activation counts, so results are bitwise identical for
any worker-thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .graph import Network, generate_er

DEFAULT_BLOCK = 256


@dataclass(frozen=True)
class DegreeLayout:
    """Fixed degree-class layout the coarse vector is indexed against.

    class_fractions holds |V(k)|/N of the reference network (or the pooled
    Poisson weights for regenerated-network mode, where they are the expected
    fractions and the admissible box varies per realization).
    """

    degrees: np.ndarray
    class_fractions: np.ndarray
    pooled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "degrees", np.asarray(self.degrees, dtype=np.int32))
        object.__setattr__(self, "class_fractions",
                           np.asarray(self.class_fractions, dtype=np.float64))
        if np.any(np.diff(self.degrees) <= 0):
            raise ValueError("layout degrees must be strictly increasing")
        if len(self.degrees) != len(self.class_fractions):
            raise ValueError("degrees and class_fractions length mismatch")

    @property
    def dimension(self) -> int:
        return len(self.degrees)

    def class_of_degree(self, degrees: np.ndarray) -> np.ndarray:
        """Map node degrees to class indices (pooling out-of-range degrees
        into the boundary classes when the layout is pooled)."""
        idx = np.searchsorted(self.degrees, degrees)
        if self.pooled:
            clipped = np.clip(degrees, self.degrees[0], self.degrees[-1])
            idx = np.searchsorted(self.degrees, clipped)
            exact = self.degrees[np.minimum(idx, self.dimension - 1)] == clipped
            if not exact.all():
                raise ValueError("pooled layout must contain a contiguous degree range")
            return idx.astype(np.int32)
        bad = (idx >= self.dimension) | (self.degrees[np.minimum(idx, self.dimension - 1)] != degrees)
        if np.any(bad):
            missing = np.unique(np.asarray(degrees)[bad])
            raise ValueError(f"degrees {missing.tolist()} not covered by layout")
        return idx.astype(np.int32)

    def matches(self, other: "DegreeLayout") -> bool:
        return (self.pooled == other.pooled
                and np.array_equal(self.degrees, other.degrees)
                and np.array_equal(self.class_fractions, other.class_fractions))


@dataclass(frozen=True)
class CoarseState:
    """Degree-resolved density vector over a fixed layout."""

    densities: np.ndarray
    layout: DegreeLayout

    def __post_init__(self):
        d = np.asarray(self.densities, dtype=np.float64)
        if d.shape != (self.layout.dimension,):
            raise ValueError(f"density vector shape {d.shape} does not match "
                             f"layout dimension {self.layout.dimension}")
        object.__setattr__(self, "densities", d)

    @property
    def norm1(self) -> float:
        return float(np.abs(self.densities).sum())


def layout_from_network(net: Network) -> DegreeLayout:
    """Layout holding exactly the nonempty degree classes of the network."""
    degrees = np.array(sorted(net.degree_classes), dtype=np.int32)
    fractions = np.array([len(net.degree_classes[int(k)]) / net.num_nodes
                          for k in degrees])
    return DegreeLayout(degrees=degrees, class_fractions=fractions, pooled=False)


def poisson_layout(n: int, p_max: float, coverage: float = 0.9999) -> DegreeLayout:
    """Pooled layout over the Poisson(n * p_max) quantile range holding at
    least `coverage` probability mass; tail mass is pooled into the boundary
    bins. Used when networks are regenerated per realization so the unknown
    vector keeps a constant dimension along a branch in p."""
    kbar = n * p_max
    alpha = (1.0 - coverage) / 2.0
    k_lo = int(stats.poisson.ppf(alpha, kbar))
    k_hi = int(stats.poisson.ppf(1.0 - alpha, kbar))
    degrees = np.arange(k_lo, k_hi + 1, dtype=np.int32)
    fractions = stats.poisson.pmf(degrees, kbar)
    fractions[0] = stats.poisson.cdf(k_lo, kbar)
    fractions[-1] = stats.poisson.sf(k_hi - 1, kbar)
    return DegreeLayout(degrees=degrees, class_fractions=fractions, pooled=True)


@dataclass(frozen=True)
class ClassBundle:
    """Per-network node grouping aligned with a layout: nodes of class c are
    class_nodes[class_starts[c]:class_starts[c+1]]."""

    class_nodes: np.ndarray
    class_starts: np.ndarray
    class_sizes: np.ndarray

    @property
    def fractions(self) -> np.ndarray:
        n = len(self.class_nodes)
        return self.class_sizes / n


def class_bundle(net: Network, layout: DegreeLayout) -> ClassBundle:
    node_class = layout.class_of_degree(net.degrees)
    order = np.argsort(node_class, kind="stable")
    class_nodes = order.astype(np.int64)
    class_sizes = np.bincount(node_class, minlength=layout.dimension).astype(np.int64)
    class_starts = np.concatenate([[0], np.cumsum(class_sizes)]).astype(np.int64)
    return ClassBundle(class_nodes=class_nodes, class_starts=class_starts,
                       class_sizes=class_sizes)


def _class_counts(states_nb: np.ndarray, bundle: ClassBundle) -> np.ndarray:
    """Integer activation counts per class: (C, B) from node-major (N, B)."""
    n_classes = len(bundle.class_sizes)
    counts = np.zeros((n_classes, states_nb.shape[1]), dtype=np.int64)
    for c in range(n_classes):
        lo, hi = bundle.class_starts[c], bundle.class_starts[c + 1]
        if hi > lo:
            counts[c] = states_nb[bundle.class_nodes[lo:hi]].sum(axis=0, dtype=np.int64)
    return counts


def restrict(states, nets, layout: DegreeLayout | None = None) -> CoarseState:
    """Average degree-resolved densities over one or more realizations.

    states: a single (N,) array or a list of them; nets: the matching Network
    or list of Networks. A pooled layout must be supplied when realizations
    live on different networks.
    """
    if isinstance(states, np.ndarray) and states.ndim == 1:
        states = [states]
    if isinstance(nets, Network):
        nets = [nets] * len(states)
    if len(states) == 0:
        raise ValueError("need at least one realization")
    if len(states) != len(nets):
        raise ValueError("states and networks count mismatch")
    if layout is None:
        layout = layout_from_network(nets[0])
    n = nets[0].num_nodes
    total = np.zeros(layout.dimension, dtype=np.int64)
    for state, net in zip(states, nets):
        if len(state) != net.num_nodes:
            raise ValueError("state length does not match its network")
        if net.num_nodes != n:
            raise ValueError("all networks must have the same node count")
        bundle = class_bundle(net, layout)
        total += _class_counts(np.asarray(state, dtype=np.uint8)[:, None], bundle)[:, 0]
    densities = total / (n * len(states))
    return CoarseState(densities=densities, layout=layout)


def clip_to_box(densities: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(densities, 0.0), fractions)


def _draw_counts(gen: np.random.Generator, d_clipped: np.ndarray, n: int,
                 sizes: np.ndarray, n_real: int) -> np.ndarray:
    """Target active counts per (realization, class): floor(d_k N) plus a
    Bernoulli(frac(d_k N)) extra neuron, so the expectation is d_k N."""
    target = d_clipped * n
    base = np.floor(target)
    frac = target - base
    u = gen.random((n_real, len(sizes)))
    m = base.astype(np.int64)[None, :] + (u < frac[None, :])
    return np.minimum(m, sizes[None, :])


def lift(target: CoarseState, net: Network, rng: np.random.Generator) -> np.ndarray:
    """One microscopic realization consistent with the target densities.

    Within each degree class the active neurons are chosen uniformly without
    replacement; inadmissible density components are clipped to [0, |V(k)|/N].
    """
    bundle = class_bundle(net, target.layout)
    n = net.num_nodes
    d = clip_to_box(target.densities, bundle.class_sizes / n)
    m = _draw_counts(rng, d, n, bundle.class_sizes, 1)[0]
    keys = rng.random(n, dtype=np.float32)
    state = np.zeros((1, n), dtype=np.uint8)
    _kernels.lift_block(bundle.class_starts, bundle.class_nodes,
                        m[None, :], keys[None, :], state)
    return state[0]


@dataclass(frozen=True)
class FixedNetwork:
    """All realizations share one network."""
    net: Network


@dataclass(frozen=True)
class RegeneratedNetworks:
    """Each realization lives on a freshly generated G(n, p) network."""
    n: int
    p: float


@dataclass(frozen=True)
class EnsembleSpec:
    n_copies: int
    horizon: int
    master_seed: int
    network_mode: FixedNetwork | RegeneratedNetworks
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.n_copies < 1:
            raise ValueError("n_copies must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def _block_generator(master_seed, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed,
                                                        spawn_key=(block,)))


def _net_seed(master_seed, block: int, local: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(block, local + 1))
    return int(ss.generate_state(1, np.uint64)[0])


def _evolve_block_fixed(net: Network, bundle: ClassBundle, d: np.ndarray,
                        eps: float, horizon: int, n_real: int,
                        gen: np.random.Generator) -> np.ndarray:
    """Lift + evolve one block on a shared network; returns final (N, B)."""
    n = net.num_nodes
    sizes = bundle.class_sizes
    d_clip = clip_to_box(d, sizes / n)
    m = _draw_counts(gen, d_clip, n, sizes, n_real)
    keys = gen.random((n_real, n), dtype=np.float32)
    states = np.zeros((n_real, n), dtype=np.uint8)
    _kernels.lift_block(bundle.class_starts, bundle.class_nodes, m, keys, states)
    x = np.ascontiguousarray(states.T)
    buf = np.empty_like(x)
    u = np.empty((n, n_real), dtype=np.float32)
    indptr = net.adjacency.indptr.astype(np.int64)
    indices = net.adjacency.indices.astype(np.int32)
    for _ in range(horizon):
        gen.random(out=u, dtype=np.float32)
        _kernels.majority_step_block(indptr, indices, net.degrees, x, u, eps, buf)
        x, buf = buf, x
    return x


def _ensemble_counts_fixed(net: Network, bundle: ClassBundle, d: np.ndarray,
                           eps: float, spec_n: int, horizon: int, master_seed,
                           block_size: int, per_realization: bool):
    n_classes = len(bundle.class_sizes)
    total = np.zeros(n_classes, dtype=np.int64)
    per_real = [] if per_realization else None
    done = 0
    block = 0
    while done < spec_n:
        n_real = min(block_size, spec_n - done)
        gen = _block_generator(master_seed, block)
        x = _evolve_block_fixed(net, bundle, d, eps, horizon, n_real, gen)
        counts = _class_counts(x, bundle)
        total += counts.sum(axis=1)
        if per_realization:
            per_real.append(counts)
        done += n_real
        block += 1
    if per_realization:
        return total, np.concatenate(per_real, axis=1)
    return total, None


def _ensemble_counts_regen(n: int, p: float, layout: DegreeLayout, d: np.ndarray,
                           eps: float, spec_n: int, horizon: int, master_seed,
                           block_size: int, per_realization: bool):
    n_classes = layout.dimension
    total = np.zeros(n_classes, dtype=np.int64)
    per_real = [] if per_realization else None
    done = 0
    block = 0
    while done < spec_n:
        n_real = min(block_size, spec_n - done)
        gen = _block_generator(master_seed, block)
        for local in range(n_real):
            net = generate_er(n, p, _net_seed(master_seed, block, local))
            bundle = class_bundle(net, layout)
            d_clip = clip_to_box(d, bundle.class_sizes / n)
            m = _draw_counts(gen, d_clip, n, bundle.class_sizes, 1)
            keys = gen.random((1, n), dtype=np.float32)
            state = np.zeros((1, n), dtype=np.uint8)
            _kernels.lift_block(bundle.class_starts, bundle.class_nodes, m, keys, state)
            x = np.ascontiguousarray(state.T)
            buf = np.empty_like(x)
            u = np.empty((n, 1), dtype=np.float32)
            indptr = net.adjacency.indptr.astype(np.int64)
            indices = net.adjacency.indices.astype(np.int32)
            for _ in range(horizon):
                gen.random(out=u, dtype=np.float32)
                _kernels.majority_step_block(indptr, indices, net.degrees, x, u, eps, buf)
                x, buf = buf, x
            counts = _class_counts(x, bundle)
            total += counts[:, 0]
            if per_realization:
                per_real.append(counts)
        done += n_real
        block += 1
    if per_realization:
        return total, np.concatenate(per_real, axis=1)
    return total, None


def coarse_timestepper(d: CoarseState, eps: float, spec: EnsembleSpec) -> CoarseState:
    """Lift d into an ensemble, evolve `horizon` microscopic steps, restrict
    back by ensemble averaging. Deterministic given spec.master_seed."""
    mode = spec.network_mode
    if isinstance(mode, FixedNetwork):
        bundle = class_bundle(mode.net, d.layout)
        n = mode.net.num_nodes
        total, _ = _ensemble_counts_fixed(mode.net, bundle, d.densities, eps,
                                          spec.n_copies, spec.horizon,
                                          spec.master_seed, spec.block_size, False)
    else:
        n = mode.n
        total, _ = _ensemble_counts_regen(mode.n, mode.p, d.layout, d.densities,
                                          eps, spec.n_copies, spec.horizon,
                                          spec.master_seed, spec.block_size, False)
    return CoarseState(densities=total / (n * spec.n_copies), layout=d.layout)


class CoarseTimestepper:
    """Callable map u -> Phi_T(u, param) over raw density vectors, for the
    Newton/Arnoldi wrappers. param is either the activation noise eps (fixed
    network) or the connection probability p (networks regenerated per
    realization, eps held fixed)."""

    def __init__(self, layout: DegreeLayout, *, param: str = "eps",
                 net: Network | None = None, eps: float | None = None,
                 regen_n: int | None = None, n_copies: int = 2000,
                 horizon: int = 5, block_size: int = DEFAULT_BLOCK):
        if param == "eps":
            if net is None:
                raise ValueError("param='eps' requires a fixed network")
        elif param == "p":
            if regen_n is None or eps is None:
                raise ValueError("param='p' requires regen_n and a fixed eps")
        else:
            raise ValueError(f"unknown parameter {param!r}")
        self.layout = layout
        self.param = param
        self.net = net
        self.eps = eps
        self.regen_n = regen_n
        self.n_copies = n_copies
        self.horizon = horizon
        self.block_size = block_size
        self._bundle = class_bundle(net, layout) if net is not None else None
        self.num_nodes = net.num_nodes if net is not None else regen_n

    @property
    def dimension(self) -> int:
        return self.layout.dimension

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Admissible (lower, upper) bounds of the density vector."""
        lower = np.zeros(self.layout.dimension)
        if self._bundle is not None:
            upper = self._bundle.class_sizes / self.net.num_nodes
        else:
            upper = self.layout.class_fractions.copy()
        return lower, upper

    def noise_floor(self, u: np.ndarray) -> float:
        """l2 aggregate of the per-component ensemble fluctuation estimate
        sqrt(d_k (1 - d_k) / (N * n_copies))."""
        d = np.clip(np.abs(u), 0.0, 1.0)
        var = (d * (1.0 - d)).sum() / (self.num_nodes * self.n_copies)
        return math.sqrt(max(var, 1e-300))

    def fd_scale(self, floor_frac: float = 0.02) -> np.ndarray:
        """Diagonal similarity scale for eigenvalue estimation: class
        fractions, floored so the noisiest tail rows stay bounded."""
        _, upper = self.box()
        return np.maximum(upper, floor_frac * upper.max())

    def __call__(self, u: np.ndarray, param_value: float, master_seed) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if self.param == "eps":
            total, _ = _ensemble_counts_fixed(
                self.net, self._bundle, u, param_value, self.n_copies,
                self.horizon, master_seed, self.block_size, False)
            n = self.net.num_nodes
        else:
            total, _ = _ensemble_counts_regen(
                self.regen_n, param_value, self.layout, u, self.eps,
                self.n_copies, self.horizon, master_seed, self.block_size, False)
            n = self.regen_n
        return total / (n * self.n_copies)

    def per_realization_densities(self, u: np.ndarray, param_value: float,
                                  master_seed) -> np.ndarray:
        """(C, n_copies) densities of each realization after the horizon,
        without ensemble averaging (rare-event moment estimation)."""
        u = np.asarray(u, dtype=np.float64)
        if self.param == "eps":
            _, per = _ensemble_counts_fixed(
                self.net, self._bundle, u, param_value, self.n_copies,
                self.horizon, master_seed, self.block_size, True)
            n = self.net.num_nodes
        else:
            _, per = _ensemble_counts_regen(
                self.regen_n, param_value, self.layout, u, self.eps,
                self.n_copies, self.horizon, master_seed, self.block_size, True)
            n = self.regen_n
        return per / n

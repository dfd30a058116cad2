"""Erdos-Renyi random networks with degree-class bookkeeping.

Networks are undirected, simple (no self-loops, no multi-edges) and immutable
after construction. Nodes of equal degree are grouped into degree classes,
which the coarse-graining layer uses as its observable partition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Network:
    """Undirected graph with per-degree node classes.

    Attributes
    ----------
    num_nodes : int
    neighbor_lists : list of sorted int32 arrays, one per node
    degrees : int32 array, degrees[i] == len(neighbor_lists[i])
    degree_classes : dict degree -> sorted array of node ids with that degree
    connection_probability : edge probability the graph was built with
    seed : RNG seed used for construction (None if built from explicit edges)
    adjacency : symmetric CSR int8 adjacency matrix
    """

    num_nodes: int
    neighbor_lists: list = field(repr=False)
    degrees: np.ndarray = field(repr=False)
    degree_classes: dict = field(repr=False)
    connection_probability: float
    seed: int | None
    adjacency: sp.csr_matrix = field(repr=False)

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.nnz // 2)

    def mean_degree(self) -> float:
        return float(self.degrees.mean())


def _network_from_edges(n: int, rows: np.ndarray, cols: np.ndarray,
                        p: float, seed: int | None) -> Network:
    """Assemble a Network from unique undirected edges (rows[k] < cols[k])."""
    data = np.ones(2 * len(rows), dtype=np.int8)
    ii = np.concatenate([rows, cols])
    jj = np.concatenate([cols, rows])
    adj = sp.csr_matrix((data, (ii, jj)), shape=(n, n), dtype=np.int8)
    adj.sort_indices()
    degrees = np.diff(adj.indptr).astype(np.int32)
    neighbor_lists = [adj.indices[adj.indptr[i]:adj.indptr[i + 1]].astype(np.int32)
                      for i in range(n)]
    degree_classes = {int(k): np.flatnonzero(degrees == k).astype(np.int32)
                      for k in np.unique(degrees)}
    return Network(num_nodes=n, neighbor_lists=neighbor_lists, degrees=degrees,
                   degree_classes=degree_classes, connection_probability=p,
                   seed=seed, adjacency=adj)


def _pair_index_to_edge(t: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the lexicographic index of unordered pairs {i<j} over n nodes."""
    t = np.asarray(t, dtype=np.int64)
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * t)) / 2.0).astype(np.int64)
    # float sqrt can be off by one near class boundaries
    base = i * (2 * n - i - 1) // 2
    too_big = base > t
    i[too_big] -= 1
    base = i * (2 * n - i - 1) // 2
    nxt = (i + 1) * (2 * n - i - 2) // 2
    too_small = nxt <= t
    i[too_small] += 1
    base = i * (2 * n - i - 1) // 2
    j = t - base + i + 1
    return i, j


def _sample_pair_indices(rng: np.random.Generator, m_pairs: int, p: float) -> np.ndarray:
    """Geometric-skip Bernoulli(p) sampling over the index range [0, m_pairs).

    Expected cost O(p * m_pairs) instead of m_pairs coin flips.
    """
    if m_pairs == 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(m_pairs, dtype=np.int64)
    log_q = math.log1p(-p)
    chunks = []
    pos = -1
    batch = max(int(1.2 * m_pairs * p) + 16, 64)
    while pos < m_pairs - 1:
        u = rng.random(batch)
        gaps = 1 + np.floor(np.log1p(-u) / log_q).astype(np.int64)
        hits = pos + np.cumsum(gaps)
        if hits[-1] >= m_pairs:
            chunks.append(hits[hits < m_pairs])
            break
        chunks.append(hits)
        pos = int(hits[-1])
    return np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)


def generate_er(n: int, p: float, seed: int | None) -> Network:
    """Generate an undirected G(n, p) network.

    Each unordered pair {i, j} carries an edge independently with probability
    p. Deterministic for fixed (n, p, seed). Isolated nodes are kept.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"need 0 <= p <= 1, got {p}")
    rng = np.random.default_rng(seed)
    m_pairs = n * (n - 1) // 2
    idx = _sample_pair_indices(rng, m_pairs, p)
    rows, cols = _pair_index_to_edge(idx, n)
    return _network_from_edges(n, rows, cols, p, seed)


def network_from_edge_array(n: int, edges: np.ndarray,
                            p: float = float("nan"), seed: int | None = None) -> Network:
    """Build a Network from an (m, 2) array of undirected edges."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    if len(lo) and (lo.min() < 0 or hi.max() >= n):
        raise ValueError("edge endpoint out of range")
    if np.any(lo == hi):
        raise ValueError("self-loops are not allowed")
    uniq = np.unique(lo * n + hi)
    return _network_from_edges(n, uniq // n, uniq % n, p, seed)


def degree_histogram(net: Network) -> dict[int, int]:
    """Histogram of node degrees; counts sum to num_nodes."""
    ks, counts = np.unique(net.degrees, return_counts=True)
    return {int(k): int(c) for k, c in zip(ks, counts)}


def clustering_coefficient(net: Network, i: int) -> float:
    """Local clustering 2*E_i / (k_i (k_i - 1)) where E_i counts edges
    among the neighbors of i. Undefined (raises) for degree < 2."""
    nb = net.neighbor_lists[i]
    k = len(nb)
    if k < 2:
        raise ValueError(f"clustering coefficient undefined for degree {k} < 2")
    e_i = 0
    nb_set = nb
    for j in nb:
        # each neighbor-neighbor edge counted twice over the loop
        e_i += np.intersect1d(net.neighbor_lists[j], nb_set, assume_unique=True).size
    e_i //= 2
    return 2.0 * e_i / (k * (k - 1))


def mean_clustering(net: Network) -> float:
    """Average clustering over nodes with degree >= 2 (others skipped)."""
    vals = [clustering_coefficient(net, i)
            for i in range(net.num_nodes) if net.degrees[i] >= 2]
    if not vals:
        raise ValueError("no node has degree >= 2")
    return float(np.mean(vals))


def _bfs_distances(net: Network, source: int) -> np.ndarray:
    """Unweighted shortest-path distances from source (-1 where unreachable)."""
    dist = np.full(net.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for v in frontier:
            for w in net.neighbor_lists[v]:
                if dist[w] < 0:
                    dist[w] = d
                    nxt.append(int(w))
        frontier = nxt
    return dist


def mean_path_length(net: Network, sample_pairs: int, seed: int | None) -> float:
    """Average shortest-path length over sampled connected node pairs.

    Pairs are sampled uniformly with replacement; disconnected pairs are
    skipped. Raises if no connected pair is found.
    """
    if sample_pairs < 1:
        raise ValueError("need sample_pairs >= 1")
    rng = np.random.default_rng(seed)
    n = net.num_nodes
    total = 0
    found = 0
    cache: dict[int, np.ndarray] = {}
    sources = rng.integers(0, n, size=sample_pairs)
    targets = rng.integers(0, n, size=sample_pairs)
    for s, t in zip(sources, targets):
        s = int(s)
        t = int(t)
        if s == t:
            continue
        if s not in cache:
            cache[s] = _bfs_distances(net, s)
        d = cache[s][t]
        if d > 0:
            total += int(d)
            found += 1
    if found == 0:
        raise ValueError("no connected pair found among samples")
    return total / found


def save_edge_list(net: Network, path: str) -> None:
    """Write the edge list, one 'i j' line per edge with i < j."""
    coo = sp.triu(net.adjacency, k=1).tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# n={net.num_nodes} p={net.connection_probability!r} "
                 f"seed={net.seed}\n")
        for r, c in zip(coo.row[order], coo.col[order]):
            fh.write(f"{r} {c}\n")


def load_edge_list(path: str) -> Network:
    """Read a network written by save_edge_list."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# n="):
            raise ValueError(f"bad edge-list header: {header!r}")
        fields = dict(tok.split("=", 1) for tok in header[2:].split())
        n = int(fields["n"])
        p = float(fields["p"])
        seed = None if fields.get("seed") in (None, "None") else int(fields["seed"])
        pairs = [tuple(map(int, line.split())) for line in fh if line.strip()]
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return network_from_edge_array(n, edges, p=p, seed=seed)

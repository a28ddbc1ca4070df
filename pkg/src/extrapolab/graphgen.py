"""Graph families, degree/shortest-path oracles, and node-feature schemes.

All random families are conditioned on connectivity by rejection, since
shortest-path labels need s-t reachability.  Samplers are hand-rolled on the
shared counter-based RNG: G(n,p) via masked upper-triangle draws, trees via
Prufer sequences, 4-regular graphs via the configuration model with
rejection of self-loops and multi-edges.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .numerics import RandomSource

__all__ = [
    "Complete",
    "Cycle",
    "DegreeProfile",
    "Expander",
    "FourRegular",
    "General",
    "Gnp",
    "Graph",
    "IdenticalFeatures",
    "Ladder",
    "Path",
    "ShortestPathFeatures",
    "SpuriousFeatures",
    "Tree",
    "attach_features",
    "bellman_ford_table",
    "degree_profile",
    "read_jsonl",
    "sample_graph",
    "sample_st_pair",
    "shortest_path_bf",
    "shortest_path_dijkstra",
    "write_jsonl",
]

UNREACHABLE = float("inf")


def _gen(rng: Union[RandomSource, np.random.Generator]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()


# ---------------------------------------------------------------------------
# graph type
# ---------------------------------------------------------------------------


@dataclass
class Graph:
    """Weighted undirected graph with optional features and s/t markers.

    ``edge_vectors`` carries directed per-edge features for physics frames:
    row 2i is the feature for messages into edges[i][0] from edges[i][1],
    row 2i+1 the reverse direction.  Scalar-weight tasks leave it None.
    """

    n: int
    edges: list[tuple[int, int, float]]
    node_features: Optional[np.ndarray] = None
    source: Optional[int] = None
    target: Optional[int] = None
    edge_vectors: Optional[np.ndarray] = None

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        seen = set()
        for u, v, w in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for n={self.n}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            if not w > 0.0:
                raise ValueError(f"edge weight must be positive, got {w}")
        if self.node_features is not None and self.node_features.shape[0] != self.n:
            raise ValueError("feature row count differs from node count")
        if self.edge_vectors is not None and self.edge_vectors.shape[0] != 2 * len(self.edges):
            raise ValueError("edge_vectors must have one row per directed edge slot")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj


@dataclass(frozen=True)
class DegreeProfile:
    """(max degree, min degree, #max-degree nodes, #min-degree nodes)."""

    g_max: int
    g_min: int
    n_max: int
    n_min: int


def degree_profile(g: Graph) -> DegreeProfile:
    deg = g.degrees()
    g_max = int(deg.max())
    g_min = int(deg.min())
    return DegreeProfile(
        g_max=g_max,
        g_min=g_min,
        n_max=int((deg == g_max).sum()),
        n_min=int((deg == g_min).sum()),
    )


def _degree_profile_rowsum(g: Graph) -> DegreeProfile:
    """Independent oracle: degrees as adjacency-matrix row sums."""
    adj = np.zeros((g.n, g.n), dtype=np.int64)
    for u, v, _ in g.edges:
        adj[u, v] = 1
        adj[v, u] = 1
    deg = adj.sum(axis=1)
    g_max = int(deg.max())
    g_min = int(deg.min())
    return DegreeProfile(g_max, g_min, int((deg == g_max).sum()), int((deg == g_min).sum()))


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Path:
    kind = "path"


@dataclass(frozen=True)
class Cycle:
    kind = "cycle"


@dataclass(frozen=True)
class Ladder:
    kind = "ladder"


@dataclass(frozen=True)
class Tree:
    kind = "tree"


@dataclass(frozen=True)
class FourRegular:
    kind = "four_regular"


@dataclass(frozen=True)
class Complete:
    kind = "complete"


@dataclass(frozen=True)
class Expander:
    """Dense G(n,p); p = 0.8 for degree tasks, 0.6 for path tasks."""

    p: float = 0.8

    kind = "expander"


@dataclass(frozen=True)
class General:
    """G(n,p) with p drawn uniformly from {0.1, ..., 0.9} per attempt."""

    kind = "general"


@dataclass(frozen=True)
class Gnp:
    p: float = 0.5

    kind = "gnp"


GraphFamily = Union[Path, Cycle, Ladder, Tree, FourRegular, Complete, Expander, General, Gnp]

GENERAL_P_CHOICES = np.arange(1, 10) / 10.0


def _gnp_edge_arrays(n: int, p: float, g: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n, k=1)
    mask = g.random(iu.size) < p
    return iu[mask], ju[mask]


def _connected_arrays(n: int, us: np.ndarray, vs: np.ndarray) -> bool:
    if n == 1:
        return True
    deg = np.bincount(us, minlength=n) + np.bincount(vs, minlength=n)
    if np.any(deg == 0):
        return False
    adj = np.zeros((n, n), dtype=bool)
    adj[us, vs] = True
    adj[vs, us] = True
    visited = np.zeros(n, dtype=bool)
    visited[0] = True
    frontier = adj[0].copy()
    while frontier.any():
        visited |= frontier
        frontier = adj[frontier].any(axis=0) & ~visited
    return bool(visited.all())


def _prufer_tree_edges(n: int, g: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random labeled tree decoded from a Prufer sequence."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = g.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=np.int64)
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, int(v)), max(leaf, int(v))))
        degree[leaf] -= 1
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((min(u, v), max(u, v)))
    return edges


def _four_regular_edges(n: int, g: np.random.Generator) -> Optional[list[tuple[int, int]]]:
    """One configuration-model draw; None if it has loops or multi-edges."""
    stubs = np.repeat(np.arange(n), 4)
    g.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    if np.any(pairs[:, 0] == pairs[:, 1]):
        return None
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    keys = lo * n + hi
    if len(np.unique(keys)) != len(keys):
        return None
    return [(int(a), int(b)) for a, b in zip(lo, hi)]


def _deterministic_edges(family: GraphFamily, n: int) -> list[tuple[int, int]]:
    if isinstance(family, Path):
        return [(i, i + 1) for i in range(n - 1)]
    if isinstance(family, Cycle):
        return [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
    if isinstance(family, Ladder):
        m = n // 2
        rails = [(i, i + 1) for i in range(m - 1)]
        rails += [(m + i, m + i + 1) for i in range(m - 1)]
        rungs = [(i, m + i) for i in range(m)]
        return rails + rungs
    if isinstance(family, Complete):
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    raise TypeError(f"not a deterministic family: {family!r}")


def sample_graph(
    family: GraphFamily,
    n_range: tuple[int, int],
    rng: Union[RandomSource, np.random.Generator],
    max_tries: int = 100,
) -> Graph:
    """Connected graph of the family with n uniform in ``n_range``.

    ``max_tries`` bounds connectivity resampling for the random families;
    very sparse G(n,p) needs a much larger budget than the default.
    """
    lo, hi = n_range
    min_lo = 5 if isinstance(family, FourRegular) else 4 if isinstance(family, Ladder) else 2
    if lo < min_lo or hi < lo:
        raise ValueError(f"invalid n_range {n_range} for {family!r}")
    g = _gen(rng)
    if isinstance(family, Ladder):
        m = int(g.integers(lo // 2 + lo % 2, hi // 2 + 1))
        n = 2 * m
    else:
        n = int(g.integers(lo, hi + 1))

    if isinstance(family, (Path, Cycle, Ladder, Complete)):
        pairs = _deterministic_edges(family, n)
    elif isinstance(family, Tree):
        pairs = _prufer_tree_edges(n, g)
    elif isinstance(family, FourRegular):
        for _ in range(max_tries):
            # Simplicity rejection is internal to one connectivity try.
            pairs = None
            for _ in range(10_000):
                pairs = _four_regular_edges(n, g)
                if pairs is not None:
                    break
            if pairs is None:
                continue
            us = np.array([u for u, _ in pairs])
            vs = np.array([v for _, v in pairs])
            if _connected_arrays(n, us, vs):
                break
            pairs = None
        if pairs is None:
            raise RuntimeError(f"no connected 4-regular graph in {max_tries} tries (n={n})")
    elif isinstance(family, (Expander, General, Gnp)):
        pairs = None
        for _ in range(max_tries):
            if isinstance(family, General):
                p = float(g.choice(GENERAL_P_CHOICES))
            else:
                p = family.p
            us, vs = _gnp_edge_arrays(n, p, g)
            if _connected_arrays(n, us, vs):
                pairs = list(zip(us.tolist(), vs.tolist()))
                break
        if pairs is None:
            raise RuntimeError(
                f"no connected sample of {family!r} on n={n} in {max_tries} tries"
            )
    else:
        raise TypeError(f"unknown family {family!r}")

    return Graph(n=n, edges=[(u, v, 1.0) for u, v in pairs])


# ---------------------------------------------------------------------------
# shortest-path oracles
# ---------------------------------------------------------------------------


def bellman_ford_table(g: Graph, s: int, max_hops: int) -> np.ndarray:
    """Dynamic-programming table d[k][u]: shortest distance within k hops."""
    if not 0 <= s < g.n:
        raise ValueError(f"source {s} out of range")
    if max_hops < 0:
        raise ValueError("max_hops must be >= 0")
    us = np.array([u for u, _, _ in g.edges], dtype=np.int64)
    vs = np.array([v for _, v, _ in g.edges], dtype=np.int64)
    ws = np.array([w for _, _, w in g.edges], dtype=np.float64)
    src = np.concatenate([vs, us])
    dst = np.concatenate([us, vs])
    w_dir = np.concatenate([ws, ws])

    table = np.full((max_hops + 1, g.n), np.inf)
    table[0, s] = 0.0
    for k in range(1, max_hops + 1):
        prev = table[k - 1]
        nxt = prev.copy()
        if len(dst) > 0:
            np.minimum.at(nxt, dst, prev[src] + w_dir)
        table[k] = nxt
    return table


def shortest_path_bf(g: Graph, s: int, t: int, max_hops: int) -> float:
    """Bellman-Ford distance within ``max_hops``; inf when unreachable."""
    if not 0 <= t < g.n:
        raise ValueError(f"target {t} out of range")
    return float(bellman_ford_table(g, s, max_hops)[max_hops, t])


def shortest_path_dijkstra(g: Graph, s: int, t: Optional[int] = None):
    """Heap-based Dijkstra; the independent oracle for Bellman-Ford.

    Returns dist[t] when ``t`` is given, else the full distance array.
    """
    if not 0 <= s < g.n:
        raise ValueError(f"source {s} out of range")
    adj = g.adjacency()
    dist = np.full(g.n, np.inf)
    dist[s] = 0.0
    done = np.zeros(g.n, dtype=bool)
    heap = [(0.0, s)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    if t is None:
        return dist
    return float(dist[t])


def _hop_distance_capped(g: Graph, s: int, t: int, cap: int) -> int:
    """Unweighted hop distance via BFS, stopping past ``cap`` (returns cap+1)."""
    if s == t:
        return 0
    adj = g.adjacency()
    visited = {s}
    frontier = [s]
    for depth in range(1, cap + 1):
        nxt = []
        for u in frontier:
            for v, _ in adj[u]:
                if v == t:
                    return depth
                if v not in visited:
                    visited.add(v)
                    nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    return cap + 1


def sample_st_pair(
    g: Graph,
    rng: Union[RandomSource, np.random.Generator],
    max_hops: int = 3,
    max_draws: int = 10_000,
) -> tuple[int, int]:
    """Random distinct pair whose unweighted hop distance is <= max_hops."""
    if g.n < 2:
        raise ValueError("need at least two nodes for an s-t pair")
    gen = _gen(rng)
    for _ in range(max_draws):
        s = int(gen.integers(0, g.n))
        t = int(gen.integers(0, g.n))
        if s == t:
            continue
        if _hop_distance_capped(g, s, t, max_hops) <= max_hops:
            return s, t
    raise RuntimeError(f"no pair within {max_hops} hops found in {max_draws} draws")


# ---------------------------------------------------------------------------
# feature schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdenticalFeatures:
    """Every node gets the constant feature (1)."""

    kind = "identical"


@dataclass(frozen=True)
class SpuriousFeatures:
    """Label-irrelevant continuous features, uniform on [-a, a]^3."""

    half_width: float = 5.0

    kind = "spurious"


@dataclass(frozen=True)
class ShortestPathFeatures:
    """[h, 1(v=s), 1(v=t)] node features plus uniform edge weights."""

    h_half_width: float = 5.0
    weight_lo: float = 1.0
    weight_hi: float = 5.0

    kind = "shortest_path"


FeatureScheme = Union[IdenticalFeatures, SpuriousFeatures, ShortestPathFeatures]


def attach_features(
    g: Graph,
    scheme: FeatureScheme,
    rng: Union[RandomSource, np.random.Generator],
) -> Graph:
    gen = _gen(rng)
    edges = list(g.edges)
    if isinstance(scheme, IdenticalFeatures):
        features = np.ones((g.n, 1))
    elif isinstance(scheme, SpuriousFeatures):
        a = scheme.half_width
        features = gen.uniform(-a, a, size=(g.n, 3))
    elif isinstance(scheme, ShortestPathFeatures):
        if g.source is None or g.target is None:
            raise ValueError("shortest-path features require source and target nodes")
        h = gen.uniform(-scheme.h_half_width, scheme.h_half_width, size=g.n)
        features = np.zeros((g.n, 3))
        features[:, 0] = h
        features[g.source, 1] = 1.0
        features[g.target, 2] = 1.0
        weights = gen.uniform(scheme.weight_lo, scheme.weight_hi, size=len(edges))
        edges = [(u, v, float(w)) for (u, v, _), w in zip(edges, weights)]
    else:
        raise TypeError(f"unknown feature scheme {scheme!r}")
    return Graph(
        n=g.n,
        edges=edges,
        node_features=features,
        source=g.source,
        target=g.target,
        edge_vectors=g.edge_vectors,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def write_jsonl(path: str, graphs: list[Graph], labels: Optional[list] = None) -> None:
    """One JSON object per line: n, edges, features, source, target, label."""
    if labels is not None and len(labels) != len(graphs):
        raise ValueError("label count differs from graph count")
    with open(path, "w") as fh:
        for i, g in enumerate(graphs):
            record = {
                "n": g.n,
                "edges": [[int(u), int(v), float(w)] for u, v, w in g.edges],
                "features": None if g.node_features is None else g.node_features.tolist(),
                "source": g.source,
                "target": g.target,
                "label": None,
            }
            if g.edge_vectors is not None:
                record["edge_vectors"] = g.edge_vectors.tolist()
            if labels is not None:
                lab = labels[i]
                record["label"] = lab.tolist() if isinstance(lab, np.ndarray) else lab
            fh.write(json.dumps(record) + "\n")


def read_jsonl(path: str) -> tuple[list[Graph], list]:
    graphs = []
    labels = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            features = record.get("features")
            vectors = record.get("edge_vectors")
            graphs.append(
                Graph(
                    n=record["n"],
                    edges=[(int(u), int(v), float(w)) for u, v, w in record["edges"]],
                    node_features=None if features is None else np.asarray(features, dtype=np.float64),
                    source=record.get("source"),
                    target=record.get("target"),
                    edge_vectors=None if vectors is None else np.asarray(vectors, dtype=np.float64),
                )
            )
            labels.append(record.get("label"))
    return graphs, labels

"""Message-passing networks with sum/min/max aggregation and readout.

One round computes, for every directed edge (v -> u), a message
MLP(h_u, h_v, w_uv) and combines the messages arriving at u with the
configured aggregator; after K rounds a readout pools node states (or maps
them per node) through a final MLP.  Everything is batched: edges of a
graph batch are concatenated, sorted by destination, and reduced with
segment operations, which keeps training in dense matrix multiplies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import graphgen
from .diagnostics import mape
from .graphgen import Graph
from .mlp import Optimizer, TrainConfig, TrainHistory, stack_backward, stack_forward
from .numerics import RandomSource

__all__ = [
    "GnnConfig",
    "GnnGradients",
    "GnnModel",
    "gnn_forward",
    "gnn_grad",
    "gnn_loss",
    "gnn_train",
    "hand_wired_max_degree_model",
    "init_gnn",
    "predict_graphs",
    "run_max_degree_experiment",
    "run_shortest_path_experiment",
]

AGGREGATIONS = ("sum", "min", "max")
READOUTS = ("sum", "min", "max", "node")

# Edge budget per evaluation chunk; bounds peak memory on dense test graphs.
EVAL_CHUNK_EDGES = 60_000


@dataclass(frozen=True)
class GnnConfig:
    iterations: int = 1
    aggregation: str = "sum"
    readout: str = "max"
    width: int = 64
    message_depth: int = 2
    readout_depth: int = 1
    uses_edge_features: bool = False
    edge_feature_dim: int = 1
    node_feature_dim: int = 1
    out_dim: int = 1
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("need at least one message-passing iteration")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.readout not in READOUTS:
            raise ValueError(f"unknown readout {self.readout!r}")
        if self.message_depth < 1 or self.readout_depth < 1:
            raise ValueError("MLP depths must be >= 1")


@dataclass
class DenseStack:
    weights: list[np.ndarray]
    biases: Optional[list[np.ndarray]]


@dataclass
class GnnModel:
    message_mlps: list[DenseStack]
    readout_mlp: DenseStack
    config: GnnConfig

    def parameters(self) -> list[np.ndarray]:
        params = []
        for stack in self.message_mlps + [self.readout_mlp]:
            params.extend(stack.weights)
            if stack.biases is not None:
                params.extend(stack.biases)
        return params

    def copy(self) -> "GnnModel":
        def dup(stack: DenseStack) -> DenseStack:
            return DenseStack(
                weights=[w.copy() for w in stack.weights],
                biases=None if stack.biases is None else [b.copy() for b in stack.biases],
            )

        return GnnModel(
            message_mlps=[dup(s) for s in self.message_mlps],
            readout_mlp=dup(self.readout_mlp),
            config=self.config,
        )


def _init_stack(sizes: list[int], bias: bool, g: np.random.Generator) -> DenseStack:
    weights = []
    biases = [] if bias else None
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(g.uniform(-bound, bound, size=(fan_out, fan_in)))
        if bias:
            biases.append(g.uniform(-bound, bound, size=fan_out))
    return DenseStack(weights=weights, biases=biases)


def init_gnn(config: GnnConfig, rng: Optional[RandomSource] = None, bias: bool = True) -> GnnModel:
    rng = rng if rng is not None else RandomSource(0, "gnn-init")
    g = rng.generator()
    message_mlps = []
    h_dim = config.node_feature_dim
    edge_dim = config.edge_feature_dim if config.uses_edge_features else 0
    for _ in range(config.iterations):
        in_dim = 2 * h_dim + edge_dim
        sizes = [in_dim] + [config.width] * config.message_depth
        message_mlps.append(_init_stack(sizes, bias, g))
        h_dim = config.width
    out_dim = config.out_dim if config.readout == "node" else 1
    sizes = [h_dim] + [config.width] * (config.readout_depth - 1) + [out_dim]
    readout = _init_stack(sizes, bias, g)
    return GnnModel(message_mlps=message_mlps, readout_mlp=readout, config=config)


# ---------------------------------------------------------------------------
# batching and segment operations
# ---------------------------------------------------------------------------


@dataclass
class GraphBatch:
    node_feat: np.ndarray
    graph_sizes: np.ndarray
    node_offsets: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_feat: Optional[np.ndarray]
    dst_starts: np.ndarray
    dst_counts: np.ndarray
    src_order: np.ndarray
    src_starts: np.ndarray
    src_counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.node_feat.shape[0]

    @property
    def n_graphs(self) -> int:
        return len(self.graph_sizes)


def _directed_arrays(g: Graph, edge_dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directed (dst, src, feature) arrays; slots 2i / 2i+1 per edge i.

    Cached on the graph object: batches are reassembled every epoch and the
    edge layout never changes.
    """
    cache = getattr(g, "_directed_cache", None)
    if cache is not None and cache[0] == edge_dim:
        return cache[1]
    m = len(g.edges)
    table = np.asarray(g.edges, dtype=np.float64).reshape(m, 3)
    us = table[:, 0].astype(np.int64)
    vs = table[:, 1].astype(np.int64)
    dst = np.empty(2 * m, dtype=np.int64)
    src = np.empty(2 * m, dtype=np.int64)
    dst[0::2], src[0::2] = us, vs
    dst[1::2], src[1::2] = vs, us
    if edge_dim == 0:
        feat = np.empty((2 * m, 0))
    elif g.edge_vectors is not None:
        if g.edge_vectors.shape[1] != edge_dim:
            raise ValueError("edge_vectors width differs from configured edge dimension")
        feat = np.asarray(g.edge_vectors, dtype=np.float64)
    else:
        feat = np.empty((2 * m, edge_dim))
        feat[0::2, 0] = table[:, 2]
        feat[1::2, 0] = table[:, 2]
    result = (dst, src, feat)
    g._directed_cache = (edge_dim, result)
    return result


def build_batch(graphs: Sequence[Graph], config: GnnConfig) -> GraphBatch:
    if not graphs:
        raise ValueError("empty graph batch")
    edge_dim = config.edge_feature_dim if config.uses_edge_features else 0
    feats, dsts, srcs, efeats, sizes = [], [], [], [], []
    offset = 0
    for g in graphs:
        if g.node_features is None or g.node_features.shape[1] != config.node_feature_dim:
            raise ValueError("graph node features do not match the configured width")
        feats.append(np.asarray(g.node_features, dtype=np.float64))
        dst, src, ef = _directed_arrays(g, edge_dim)
        dsts.append(dst + offset)
        srcs.append(src + offset)
        efeats.append(ef)
        sizes.append(g.n)
        offset += g.n

    node_feat = np.concatenate(feats, axis=0)
    dst = np.concatenate(dsts)
    src = np.concatenate(srcs)
    edge_feat = np.concatenate(efeats, axis=0) if edge_dim else None
    n_nodes = offset

    order = np.argsort(dst, kind="stable")
    dst = dst[order]
    src = src[order]
    if edge_feat is not None:
        edge_feat = edge_feat[order]
    dst_starts = np.searchsorted(dst, np.arange(n_nodes + 1))
    dst_counts = np.diff(dst_starts)
    if config.aggregation in ("min", "max") and np.any(dst_counts == 0):
        raise ValueError("isolated node under min/max aggregation")
    src_order = np.argsort(src, kind="stable")
    src_sorted = src[src_order]
    src_starts = np.searchsorted(src_sorted, np.arange(n_nodes + 1))
    src_counts = np.diff(src_starts)

    sizes_arr = np.asarray(sizes, dtype=np.int64)
    node_offsets = np.concatenate([[0], np.cumsum(sizes_arr)])
    return GraphBatch(
        node_feat=node_feat,
        graph_sizes=sizes_arr,
        node_offsets=node_offsets,
        edge_src=src,
        edge_dst=dst,
        edge_feat=edge_feat,
        dst_starts=dst_starts,
        dst_counts=dst_counts,
        src_order=src_order,
        src_starts=src_starts,
        src_counts=src_counts,
    )


def _segment_sum(values: np.ndarray, starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    out_rows = len(counts)
    if values.shape[0] == 0:
        return np.zeros((out_rows, values.shape[1]))
    idx = np.minimum(starts[:-1], values.shape[0] - 1)
    out = np.add.reduceat(values, idx, axis=0)
    empty = counts == 0
    if empty.any():
        out[empty] = 0.0
    return out


def _segment_extremum(
    values: np.ndarray, starts: np.ndarray, counts: np.ndarray, op: str
) -> np.ndarray:
    if np.any(counts == 0):
        raise ValueError(f"empty segment under {op} reduction")
    ufunc = np.minimum if op == "min" else np.maximum
    return ufunc.reduceat(values, starts[:-1], axis=0)


def _segment_reduce(values, starts, counts, op) -> np.ndarray:
    if op == "sum":
        return _segment_sum(values, starts, counts)
    return _segment_extremum(values, starts, counts, op)


def _expand_gradient(
    d_reduced: np.ndarray,
    reduced: np.ndarray,
    values: np.ndarray,
    starts: np.ndarray,
    counts: np.ndarray,
    op: str,
) -> np.ndarray:
    """Push a segment-reduction gradient back to the segment elements.

    Sum broadcasts; min/max route to the achieving elements, splitting
    equally on exact ties.
    """
    if op == "sum":
        return np.repeat(d_reduced, counts, axis=0)
    mask = values == np.repeat(reduced, counts, axis=0)
    ties = _segment_sum(mask.astype(np.float64), starts, counts)
    return mask * np.repeat(d_reduced / ties, counts, axis=0)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def _forward_batch(model: GnnModel, batch: GraphBatch) -> tuple[np.ndarray, list, dict]:
    cfg = model.config
    h = batch.node_feat
    caches = []
    for stack in model.message_mlps:
        parts = [h[batch.edge_dst], h[batch.edge_src]]
        if cfg.uses_edge_features:
            parts.append(batch.edge_feat)
        msg_in = np.concatenate(parts, axis=1)
        m, stack_cache = stack_forward(stack.weights, stack.biases, cfg.activation, None, msg_in)
        h_new = _segment_reduce(m, batch.dst_starts, batch.dst_counts, cfg.aggregation)
        caches.append({"h_prev": h, "stack": stack_cache, "m": m, "h_new": h_new})
        h = h_new

    ro = model.readout_mlp
    if cfg.readout == "node":
        out, ro_cache = stack_forward(ro.weights, ro.biases, cfg.activation, None, h)
        readout_cache = {"stack": ro_cache}
    else:
        pooled = _segment_reduce(
            h, batch.node_offsets, batch.graph_sizes, cfg.readout
        )
        out, ro_cache = stack_forward(ro.weights, ro.biases, cfg.activation, None, pooled)
        readout_cache = {"stack": ro_cache, "pooled": pooled, "h_last": h}
    return out, caches, readout_cache


def _backward_batch(
    model: GnnModel,
    batch: GraphBatch,
    caches: list,
    readout_cache: dict,
    d_out: np.ndarray,
) -> list[np.ndarray]:
    cfg = model.config
    ro = model.readout_mlp
    d_w_ro, d_b_ro, d_in = stack_backward(
        ro.weights, ro.biases, cfg.activation, None, readout_cache["stack"], d_out
    )
    if cfg.readout == "node":
        d_h = d_in
    else:
        d_h = _expand_gradient(
            d_in,
            readout_cache["pooled"],
            readout_cache["h_last"],
            batch.node_offsets,
            batch.graph_sizes,
            cfg.readout,
        )

    f_parts: list[tuple[list, Optional[list]]] = []
    for k in range(cfg.iterations - 1, -1, -1):
        cache = caches[k]
        stack = model.message_mlps[k]
        d_m = _expand_gradient(
            d_h, cache["h_new"], cache["m"], batch.dst_starts, batch.dst_counts, cfg.aggregation
        )
        d_w, d_b, d_msg_in = stack_backward(
            stack.weights, stack.biases, cfg.activation, None, cache["stack"], d_m
        )
        f_parts.append((d_w, d_b))
        f_dim = cache["h_prev"].shape[1]
        d_dst_part = d_msg_in[:, :f_dim]
        d_src_part = d_msg_in[:, f_dim : 2 * f_dim]
        d_h = _segment_sum(d_dst_part, batch.dst_starts, batch.dst_counts)
        d_h += _segment_sum(
            d_src_part[batch.src_order], batch.src_starts, batch.src_counts
        )

    flat: list[np.ndarray] = []
    for (d_w, d_b) in reversed(f_parts):
        flat.extend(d_w)
        if d_b is not None:
            flat.extend(d_b)
    flat.extend(d_w_ro)
    if d_b_ro is not None:
        flat.extend(d_b_ro)
    return flat


def _stack_labels(model: GnnModel, labels: Sequence) -> np.ndarray:
    if model.config.readout == "node":
        return np.concatenate([np.asarray(l, dtype=np.float64) for l in labels], axis=0)
    return np.asarray(labels, dtype=np.float64)


def _batch_outputs(out: np.ndarray, config: GnnConfig) -> np.ndarray:
    return out if config.readout == "node" else out[:, 0]


def gnn_forward(model: GnnModel, g: Graph):
    """Single-graph forward: scalar, or an n x out matrix for node readout."""
    batch = build_batch([g], model.config)
    out, _, _ = _forward_batch(model, batch)
    if model.config.readout == "node":
        return out
    return float(out[0, 0])


def gnn_loss(model: GnnModel, graphs: Sequence[Graph], labels: Sequence) -> float:
    batch = build_batch(graphs, model.config)
    out, _, _ = _forward_batch(model, batch)
    y = _stack_labels(model, labels)
    preds = _batch_outputs(out, model.config)
    diff = (preds - y).ravel()
    return float(diff @ diff / diff.size)


@dataclass
class GnnGradients:
    flat: list[np.ndarray] = field(default_factory=list)


def gnn_grad(model: GnnModel, graphs: Sequence[Graph], labels: Sequence) -> GnnGradients:
    """Gradient of mean squared loss over the batch, as a flat list."""
    if not graphs:
        raise ValueError("empty batch")
    batch = build_batch(graphs, model.config)
    out, caches, ro_cache = _forward_batch(model, batch)
    y = _stack_labels(model, labels)
    if model.config.readout == "node":
        d_out = 2.0 * (out - y) / y.size
    else:
        d_out = (2.0 * (out[:, 0] - y) / y.size)[:, None]
    flat = _backward_batch(model, batch, caches, ro_cache, d_out)
    for k, g_k in enumerate(flat):
        if not np.all(np.isfinite(g_k)):
            raise FloatingPointError(f"non-finite gradient in parameter {k}")
    return GnnGradients(flat=flat)


def predict_graphs(model: GnnModel, graphs: Sequence[Graph]) -> np.ndarray:
    """Chunked batch prediction: (G,) vector, or stacked (N, out) rows."""
    outs = []
    chunk: list[Graph] = []
    chunk_edges = 0
    for g in list(graphs):
        chunk.append(g)
        chunk_edges += 2 * len(g.edges)
        if chunk_edges >= EVAL_CHUNK_EDGES:
            batch = build_batch(chunk, model.config)
            out, _, _ = _forward_batch(model, batch)
            outs.append(_batch_outputs(out, model.config))
            chunk, chunk_edges = [], 0
    if chunk:
        batch = build_batch(chunk, model.config)
        out, _, _ = _forward_batch(model, batch)
        outs.append(_batch_outputs(out, model.config))
    return np.concatenate(outs, axis=0)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def gnn_train(
    model: GnnModel,
    train_graphs: Sequence[Graph],
    train_labels: Sequence,
    val_graphs: Sequence[Graph],
    val_labels: Sequence,
    cfg: TrainConfig,
) -> tuple[GnnModel, TrainHistory]:
    """Minibatch training mirroring the MLP loop.

    Per-epoch train loss is the running minibatch average; validation loss
    is evaluated exactly and drives best-epoch selection.
    """
    model = model.copy()
    history = TrainHistory()
    if cfg.epochs == 0:
        return model, history
    g = RandomSource(cfg.seed, "gnn-train").generator()
    params = model.parameters()
    opt = Optimizer(params, cfg)
    best = model.copy()
    best_val = np.inf
    idx_all = np.arange(len(train_graphs))
    val_y = _stack_labels(model, val_labels)

    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * cfg.lr_decay ** (epoch // cfg.decay_every)
        perm = g.permutation(idx_all)
        epoch_losses = []
        ok = True
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            graphs = [train_graphs[i] for i in idx]
            labels = [train_labels[i] for i in idx]
            batch = build_batch(graphs, model.config)
            out, caches, ro_cache = _forward_batch(model, batch)
            y = _stack_labels(model, labels)
            preds = _batch_outputs(out, model.config)
            diff = (preds - y).ravel()
            loss = float(diff @ diff / diff.size)
            if not np.isfinite(loss):
                ok = False
                break
            epoch_losses.append(loss)
            if model.config.readout == "node":
                d_out = 2.0 * (out - y) / y.size
            else:
                d_out = (2.0 * (out[:, 0] - y) / y.size)[:, None]
            grads = _backward_batch(model, batch, caches, ro_cache, d_out)
            opt.step(params, grads, lr)
            if not all(np.all(np.isfinite(p)) for p in params):
                ok = False
                break
        if not ok:
            history.diverged = True
            break
        val_preds = predict_graphs(model, val_graphs)
        val_diff = (val_preds - val_y).ravel()
        val_loss = float(val_diff @ val_diff / val_diff.size)
        if not np.isfinite(val_loss):
            history.diverged = True
            break
        history.train_mse.append(float(np.mean(epoch_losses)))
        history.val_mse.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best = model.copy()
            history.best_epoch = epoch
    return best, history


# ---------------------------------------------------------------------------
# hand-wired construction
# ---------------------------------------------------------------------------


def hand_wired_max_degree_model() -> GnnModel:
    """Weights chosen so the output is exactly the max degree.

    The message MLP ignores the receiver state and passes the constant
    feature of the sender through; sum aggregation turns that into the
    node degree, and max readout with an identity map extracts the answer.
    """
    config = GnnConfig(
        iterations=1,
        aggregation="sum",
        readout="max",
        width=1,
        message_depth=2,
        readout_depth=1,
        node_feature_dim=1,
    )
    message = DenseStack(weights=[np.array([[0.0, 1.0]]), np.array([[1.0]])], biases=None)
    readout = DenseStack(weights=[np.array([[1.0]])], biases=None)
    return GnnModel(message_mlps=[message], readout_mlp=readout, config=config)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _mape_mse(preds: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    diff = (preds - labels).ravel()
    return mape(preds, labels), float(diff @ diff / diff.size)


def _max_degree_set(
    family: graphgen.GraphFamily,
    n_graphs: int,
    n_range: tuple[int, int],
    rng: RandomSource,
) -> tuple[list[Graph], list[float]]:
    g = rng.generator()
    graphs, labels = [], []
    for _ in range(n_graphs):
        graph = graphgen.sample_graph(family, n_range, g)
        graph = graphgen.attach_features(graph, graphgen.IdenticalFeatures(), g)
        graphs.append(graph)
        labels.append(float(graphgen.degree_profile(graph).g_max))
    return graphs, labels


def run_max_degree_experiment(
    train_family: graphgen.GraphFamily = graphgen.General(),
    readout: str = "max",
    seeds: Sequence[int] = (0, 1, 2),
    n_train: int = 1000,
    n_val: int = 150,
    n_test: int = 300,
    width: int = 64,
    epochs: int = 80,
    learning_rate: float = 0.01,
    batch_size: int = 64,
) -> list[dict]:
    """Max-degree task: train on small graphs, test on larger general graphs."""
    records = []
    for seed in seeds:
        rng = RandomSource(seed, "max-degree")
        train_g, train_y = _max_degree_set(train_family, n_train, (20, 30), rng.child("train"))
        val_g, val_y = _max_degree_set(train_family, n_val, (20, 30), rng.child("val"))
        interp_g, interp_y = _max_degree_set(train_family, n_test, (20, 30), rng.child("interp"))
        extra_g, extra_y = _max_degree_set(graphgen.General(), n_test, (50, 100), rng.child("extra"))

        config = GnnConfig(
            iterations=1,
            aggregation="sum",
            readout=readout,
            width=width,
            message_depth=2,
            readout_depth=1,
            node_feature_dim=1,
        )
        model = init_gnn(config, rng.child("init"))
        cfg = TrainConfig(
            learning_rate=learning_rate, batch_size=batch_size, epochs=epochs, seed=seed
        )
        trained, history = gnn_train(model, train_g, train_y, val_g, val_y, cfg)
        for split, graphs, labels in (
            ("interpolation", interp_g, interp_y),
            ("extrapolation", extra_g, extra_y),
        ):
            preds = predict_graphs(trained, graphs)
            m, mse_val = _mape_mse(preds, np.asarray(labels))
            records.append(
                {
                    "task": "max_degree",
                    "train_family": train_family.kind,
                    "aggregation": "sum",
                    "readout": readout,
                    "seed": seed,
                    "split": split,
                    "mse": mse_val,
                    "mape": m,
                    "epochs_to_best": history.best_epoch,
                }
            )
    return records


def _shortest_path_set(
    family: graphgen.GraphFamily,
    n_graphs: int,
    n_range: tuple[int, int],
    weight_hi: float,
    rng: RandomSource,
    max_tries: int = 100,
) -> tuple[list[Graph], list[float]]:
    g = rng.generator()
    scheme = graphgen.ShortestPathFeatures(weight_lo=1.0, weight_hi=weight_hi)
    graphs, labels = [], []
    for _ in range(n_graphs):
        graph = graphgen.sample_graph(family, n_range, g, max_tries=max_tries)
        s, t = graphgen.sample_st_pair(graph, g)
        graph.source, graph.target = s, t
        graph = graphgen.attach_features(graph, scheme, g)
        label = graphgen.shortest_path_bf(graph, s, t, max_hops=3)
        graphs.append(graph)
        labels.append(float(label))
    return graphs, labels


def run_shortest_path_experiment(
    train_family: graphgen.GraphFamily = graphgen.General(),
    aggregation: str = "min",
    weight_extrapolation: bool = True,
    seeds: Sequence[int] = (0, 1, 2),
    n_train: int = 500,
    n_val: int = 100,
    n_test: int = 200,
    width: int = 32,
    epochs: int = 60,
    learning_rate: float = 0.01,
    batch_size: int = 64,
    max_tries: int = 100,
) -> list[dict]:
    """Shortest-path task (3-hop labels, K=3, min readout fixed)."""
    records = []
    for seed in seeds:
        rng = RandomSource(seed, "shortest-path")
        train_g, train_y = _shortest_path_set(
            train_family, n_train, (20, 40), 5.0, rng.child("train"), max_tries
        )
        val_g, val_y = _shortest_path_set(
            train_family, n_val, (20, 40), 5.0, rng.child("val"), max_tries
        )
        interp_g, interp_y = _shortest_path_set(
            train_family, n_test, (20, 40), 5.0, rng.child("interp"), max_tries
        )
        size_g, size_y = _shortest_path_set(
            graphgen.General(), n_test, (50, 70), 5.0, rng.child("ood-size")
        )
        eval_splits = [("interpolation", interp_g, interp_y), ("ood_size", size_g, size_y)]
        if weight_extrapolation:
            wt_g, wt_y = _shortest_path_set(
                graphgen.General(), n_test, (50, 70), 10.0, rng.child("ood-weight")
            )
            eval_splits.append(("ood_weight", wt_g, wt_y))

        config = GnnConfig(
            iterations=3,
            aggregation=aggregation,
            readout="min",
            width=width,
            message_depth=2,
            readout_depth=2,
            uses_edge_features=True,
            edge_feature_dim=1,
            node_feature_dim=3,
        )
        model = init_gnn(config, rng.child("init"))
        cfg = TrainConfig(
            learning_rate=learning_rate, batch_size=batch_size, epochs=epochs, seed=seed
        )
        trained, history = gnn_train(model, train_g, train_y, val_g, val_y, cfg)
        family_tag = train_family.kind
        if isinstance(train_family, graphgen.Gnp):
            family_tag = f"gnp_{train_family.p:g}"
        for split, graphs, labels in eval_splits:
            preds = predict_graphs(trained, graphs)
            m, mse_val = _mape_mse(preds, np.asarray(labels))
            records.append(
                {
                    "task": "shortest_path",
                    "train_family": family_tag,
                    "aggregation": aggregation,
                    "readout": "min",
                    "seed": seed,
                    "split": split,
                    "mse": mse_val,
                    "mape": m,
                    "epochs_to_best": history.best_epoch,
                }
            )
    return records

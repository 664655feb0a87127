"""Distance-gated spatial attention encoder.

Produces one embedding per node plus a graph-level class-token embedding.
All geometry enters exclusively through pairwise distances (center-to-
neighbor and neighbor-to-neighbor), so the output is invariant to rigid
transforms of the node positions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, NumericError, ShapeError, WeightsFormatError
from .scene_graph import DEFAULT_FEATURE_DIMS, Node, SceneGraph

LN_EPS = 1e-5
CLS_ATTN_LAYERS = 2
# Largest double below 1.0; keeps gate outputs in the open interval.
_GATE_HI = np.nextafter(1.0, 0.0)
_GATE_LO = np.nextafter(0.0, 1.0)


@dataclass(frozen=True)
class EncoderConfig:
    pe_dim: int = 64
    heads: int = 8
    layers: int = 4
    d_model: int = 512
    gate_hidden: int = 16
    geo_hidden: int = 32
    dropout: float = 0.1  # stored for fidelity; inert at inference
    feature_dims: tuple[int, int] = DEFAULT_FEATURE_DIMS

    def __post_init__(self):
        if self.pe_dim % 2 != 0:
            raise InvalidInputError(f"pe_dim must be even, got {self.pe_dim}")
        if self.d_model % self.heads != 0:
            raise InvalidInputError(
                f"d_model {self.d_model} not divisible by heads {self.heads}")
        if not 0 <= self.dropout < 1:
            raise InvalidInputError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.heads

    @property
    def d_init(self) -> int:
        d_vl, d_t = self.feature_dims
        return d_vl + d_t + self.geo_hidden

    def to_dict(self) -> dict:
        return {
            "pe_dim": self.pe_dim, "heads": self.heads, "layers": self.layers,
            "d_model": self.d_model, "gate_hidden": self.gate_hidden,
            "geo_hidden": self.geo_hidden, "dropout": self.dropout,
            "feature_dims": list(self.feature_dims),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderConfig":
        data = dict(data)
        if "feature_dims" in data:
            data["feature_dims"] = tuple(data["feature_dims"])
        return cls(**data)


def tensor_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """The fixed enumeration of weight tensor names and their shapes."""
    d_init = config.d_init
    h_dim = config.pe_dim + d_init
    shapes: dict[str, tuple[int, ...]] = {
        "geo_ffn.w1": (config.geo_hidden, 3),
        "geo_ffn.b1": (config.geo_hidden,),
        "geo_ffn.w2": (config.geo_hidden, config.geo_hidden),
        "geo_ffn.b2": (config.geo_hidden,),
        "proj_ffn.w1": (config.d_model, 2 * d_init),
        "proj_ffn.b1": (config.d_model,),
        "proj_ffn.w2": (config.d_model, config.d_model),
        "proj_ffn.b2": (config.d_model,),
        "cls_token": (config.d_model,),
    }
    for layer in range(config.layers):
        p = f"layer{layer}."
        shapes[p + "Wq"] = (config.d_model, d_init)
        shapes[p + "Wk"] = (config.d_model, h_dim)
        shapes[p + "Wv"] = (config.d_model, h_dim)
        shapes[p + "Wq_nn"] = (config.d_model, h_dim)
        shapes[p + "Wk_nn"] = (config.d_model, h_dim)
        shapes[p + "Wv_nn"] = (config.d_model, h_dim)
        shapes[p + "Wo"] = (d_init, config.d_model)
        shapes[p + "ln_scale"] = (d_init,)
        shapes[p + "ln_bias"] = (d_init,)
        shapes[p + "gate.w1"] = (config.gate_hidden, 1)
        shapes[p + "gate.b1"] = (config.gate_hidden,)
        shapes[p + "gate.w2"] = (1, config.gate_hidden)
        shapes[p + "gate.b2"] = (1,)
    for layer in range(CLS_ATTN_LAYERS):
        p = f"cls_attn{layer}."
        shapes[p + "Wq"] = (config.d_model, config.d_model)
        shapes[p + "Wk"] = (config.d_model, config.d_model)
        shapes[p + "Wv"] = (config.d_model, config.d_model)
        shapes[p + "Wo"] = (config.d_model, config.d_model)
        shapes[p + "ln_scale"] = (config.d_model,)
        shapes[p + "ln_bias"] = (config.d_model,)
    return shapes


@dataclass
class EncoderWeights:
    config: EncoderConfig
    tensors: dict[str, np.ndarray]
    seed: int | None = None

    def __post_init__(self):
        expected = tensor_shapes(self.config)
        missing = sorted(set(expected) - set(self.tensors))
        unknown = sorted(set(self.tensors) - set(expected))
        if missing:
            raise WeightsFormatError(f"missing tensors: {missing}")
        if unknown:
            raise WeightsFormatError(f"unknown tensors: {unknown}")
        for name, arr in self.tensors.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != expected[name]:
                raise WeightsFormatError(
                    f"tensor {name}: shape {arr.shape}, expected {expected[name]}")
            if not np.all(np.isfinite(arr)):
                raise WeightsFormatError(f"tensor {name}: non-finite values")
            self.tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]


# Attention output projections start damped so the residual stream stays
# feature-dominated under random weights; a full-gain Wo lets the (large)
# positional-encoding block drown the semantic features and distinct classes
# collapse to near-identical embeddings. Entries remain inside the Xavier
# bound for their shape.
WO_INIT_GAIN = 0.05


def init_weights(config: EncoderConfig, seed: int = 0) -> EncoderWeights:
    """Xavier-uniform matrices, zero biases, unit LayerNorm, normalized CLS."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(config).items():
        if name == "cls_token":
            v = rng.standard_normal(shape)
            tensors[name] = v / np.linalg.norm(v)
        elif name.endswith("ln_scale"):
            tensors[name] = np.ones(shape)
        elif len(shape) == 1:  # biases and ln_bias
            tensors[name] = np.zeros(shape)
        else:
            fan_out, fan_in = shape
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            gain = WO_INIT_GAIN if name.startswith("layer") and name.endswith("Wo") else 1.0
            tensors[name] = rng.uniform(-gain * bound, gain * bound, size=shape)
    return EncoderWeights(config=config, tensors=tensors, seed=seed)


def save_weights(weights: EncoderWeights, path) -> None:
    doc = {
        "config": weights.config.to_dict(),
        "tensors": {k: v.tolist() for k, v in sorted(weights.tensors.items())},
        "seed": weights.seed,
        "format_version": 1,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_weights(path) -> EncoderWeights:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise WeightsFormatError(f"not valid JSON: {exc}") from exc
    if doc.get("format_version") != 1:
        raise WeightsFormatError(f"unsupported format_version {doc.get('format_version')}")
    config = EncoderConfig.from_dict(doc["config"])
    tensors = {k: np.asarray(v, dtype=float) for k, v in doc["tensors"].items()}
    return EncoderWeights(config=config, tensors=tensors, seed=doc.get("seed"))


# ---------------------------------------------------------------------------
# Forward-pass pieces


def sinusoidal_pe(d: float, pe_dim: int) -> np.ndarray:
    """Standard sinusoidal encoding of a scalar distance."""
    if pe_dim % 2 != 0:
        raise InvalidInputError(f"pe_dim must be even, got {pe_dim}")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise InvalidInputError("sinusoidal_pe: distance must be finite and >= 0")
    k = np.arange(pe_dim // 2)
    args = d[..., None] / np.power(10000.0, 2.0 * k / pe_dim)
    out = np.empty(d.shape + (pe_dim,))
    out[..., 0::2] = np.sin(args)
    out[..., 1::2] = np.cos(args)
    return out


def distance_gate(d, gate_weights: dict[str, np.ndarray]):
    """Two-layer MLP + sigmoid on a scalar distance; output in (0, 1).

    gate_weights holds w1 (hidden, 1), b1, w2 (1, hidden), b2.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise InvalidInputError("distance_gate: distance must be finite and >= 0")
    h = np.maximum(d[..., None] * gate_weights["w1"][:, 0] + gate_weights["b1"], 0.0)
    z = h @ gate_weights["w2"][0] + gate_weights["b2"][0]
    s = 1.0 / (1.0 + np.exp(-z))
    out = np.clip(s, _GATE_LO, _GATE_HI)
    return float(out) if out.ndim == 0 else out


def _gate_weights(weights: EncoderWeights, layer: int) -> dict[str, np.ndarray]:
    p = f"layer{layer}.gate."
    return {k: weights[p + k] for k in ("w1", "b1", "w2", "b2")}


def initial_embed(node: Node, weights: EncoderWeights) -> np.ndarray:
    """[f_vl || f_t || GeoFFN(f_g)] in that fixed order."""
    cfg = weights.config
    d_vl, d_t = cfg.feature_dims
    f = node.features
    if f.f_vl.shape != (d_vl,) or f.f_t.shape != (d_t,) or f.f_g.shape != (3,):
        raise ShapeError(
            f"node {node.id}: feature shapes {f.f_vl.shape}/{f.f_t.shape}/{f.f_g.shape} "
            f"do not match config dims ({d_vl},)/({d_t},)/(3,)")
    h = np.maximum(weights["geo_ffn.w1"] @ f.f_g + weights["geo_ffn.b1"], 0.0)
    geo = weights["geo_ffn.w2"] @ h + weights["geo_ffn.b2"]
    return np.concatenate([f.f_vl, f.f_t, geo])


def _layer_norm(x: np.ndarray, scale: np.ndarray, bias: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LN_EPS) * scale + bias


@dataclass
class _NeighborIndex:
    """Flattened neighbor structure of a graph, in node-declaration order.

    Directed pairs (center a, neighbor b) are grouped contiguously by center,
    neighbors sorted by node id; ordered triples (a, j, k), j != k, are
    grouped contiguously by the (a, j) pair.
    """

    pair_center: np.ndarray  # (E,) center node index per directed pair
    pair_nbr: np.ndarray     # (E,) neighbor node index
    pair_dist: np.ndarray    # (E,) center-to-neighbor distance
    pair_offsets: np.ndarray  # (n+1,) group boundaries per center
    nbr_counts: np.ndarray   # (n,)
    tri_src: np.ndarray      # (T,) pair index of (a, j)
    tri_tgt: np.ndarray      # (T,) pair index of (a, k)
    tri_dist: np.ndarray     # (T,) neighbor-to-neighbor distance d_jk
    tri_offsets: np.ndarray  # (E+1,) group boundaries per (a, j) pair


def _build_neighbor_index(graph: SceneGraph) -> _NeighborIndex:
    order = {n.id: idx for idx, n in enumerate(graph.nodes)}
    pos = graph.positions()
    adj = graph.neighbor_ids()

    pair_center, pair_nbr, pair_dist = [], [], []
    pair_offsets = [0]
    for node in graph.nodes:
        for nbr_id in adj[node.id]:
            b = order[nbr_id]
            pair_center.append(order[node.id])
            pair_nbr.append(b)
            pair_dist.append(np.linalg.norm(node.x - pos[b]))
        pair_offsets.append(len(pair_center))

    tri_src, tri_tgt, tri_dist = [], [], []
    tri_offsets = [0]
    for e in range(len(pair_center)):
        a, j = pair_center[e], pair_nbr[e]
        for e2 in range(pair_offsets[a], pair_offsets[a + 1]):
            k = pair_nbr[e2]
            if k == j:
                continue
            tri_src.append(e)
            tri_tgt.append(e2)
            tri_dist.append(np.linalg.norm(pos[j] - pos[k]))
        tri_offsets.append(len(tri_src))

    counts = np.diff(pair_offsets)
    return _NeighborIndex(
        pair_center=np.asarray(pair_center, dtype=int),
        pair_nbr=np.asarray(pair_nbr, dtype=int),
        pair_dist=np.asarray(pair_dist, dtype=float),
        pair_offsets=np.asarray(pair_offsets, dtype=int),
        nbr_counts=counts,
        tri_src=np.asarray(tri_src, dtype=int),
        tri_tgt=np.asarray(tri_tgt, dtype=int),
        tri_dist=np.asarray(tri_dist, dtype=float),
        tri_offsets=np.asarray(tri_offsets, dtype=int),
    )


def _segment_softmax(scores: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Column-wise softmax within contiguous row groups [offsets[g], offsets[g+1])."""
    out = np.empty_like(scores)
    for s, e in zip(offsets[:-1], offsets[1:]):
        if e > s:
            blk = scores[s:e]
            ex = np.exp(blk - blk.max(axis=0, keepdims=True))
            out[s:e] = ex / ex.sum(axis=0, keepdims=True)
    return out


def dgsa_layer(graph: SceneGraph, embeddings_in: np.ndarray,
               weights: EncoderWeights, layer: int,
               index: _NeighborIndex | None = None) -> np.ndarray:
    """One distance-gated attention block over the graph neighborhoods.

    Projections of h_ij = [PE(d_ij) || c_j] are split into a per-distance
    part and a per-node part (W @ h = W_pe @ PE + W_c @ c_j), so the large
    feature block is projected once per node instead of once per pair.
    """
    cfg = weights.config
    if index is None:
        index = _build_neighbor_index(graph)
    n = len(graph.nodes)
    heads, dh = cfg.heads, cfg.d_head
    pe_dim = cfg.pe_dim
    p = f"layer{layer}."
    gate_w = _gate_weights(weights, layer)

    def split_proj(name: str, pe: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = weights[p + name]
        w_pe, w_c = w[:, :pe_dim], w[:, pe_dim:]
        return ((pe @ w_pe.T).reshape(-1, heads, dh),
                (embeddings_in @ w_c.T).reshape(n, heads, dh))

    out_attn = np.zeros((n, cfg.d_model))
    if index.pair_center.size:
        pe = sinusoidal_pe(index.pair_dist, pe_dim)
        nbr = index.pair_nbr
        gate_cn = distance_gate(index.pair_dist, gate_w)

        # center -> neighbor attention
        q = (embeddings_in @ weights[p + "Wq"].T).reshape(n, heads, dh)
        k_pe, k_c = split_proj("Wk", pe)
        v_pe, v_c = split_proj("Wv", pe)
        k = k_pe + k_c[nbr]
        raw = (q[index.pair_center] * k).sum(axis=2) / math.sqrt(dh)
        probs = _segment_softmax(gate_cn[:, None] * raw, index.pair_offsets)
        o_cn = np.zeros((n, heads, dh))
        np.add.at(o_cn, index.pair_center, probs[:, :, None] * (v_pe + v_c[nbr]))

        # neighbor -> neighbor attention, average-pooled over neighbors
        o_nn = np.zeros((n, heads, dh))
        if index.tri_src.size:
            q2_pe, q2_c = split_proj("Wq_nn", pe)
            k2_pe, k2_c = split_proj("Wk_nn", pe)
            v2_pe, v2_c = split_proj("Wv_nn", pe)
            src, tgt = index.tri_src, index.tri_tgt
            q2 = q2_pe[src] + q2_c[nbr[src]]
            k2 = k2_pe[tgt] + k2_c[nbr[tgt]]
            gate_nn = distance_gate(index.tri_dist, gate_w)
            raw2 = gate_nn[:, None] * ((q2 * k2).sum(axis=2) / math.sqrt(dh))
            probs2 = _segment_softmax(raw2, index.tri_offsets)
            per_pair = np.zeros((index.pair_center.size, heads, dh))
            np.add.at(per_pair, src, probs2[:, :, None] * (v2_pe[tgt] + v2_c[nbr[tgt]]))
            np.add.at(o_nn, index.pair_center, per_pair)
            o_nn /= np.maximum(index.nbr_counts, 1)[:, None, None]

        out_attn = (o_cn + o_nn).reshape(n, cfg.d_model)

    fused = embeddings_in + out_attn @ weights[p + "Wo"].T
    result = _layer_norm(fused, weights[p + "ln_scale"], weights[p + "ln_bias"])
    if not np.all(np.isfinite(result)):
        bad = np.where(~np.isfinite(result).all(axis=1))[0]
        ids = [graph.nodes[i].id for i in bad]
        raise NumericError(f"dgsa_layer {layer}: non-finite output for nodes {ids}")
    return result


def _mhsa(x: np.ndarray, weights: EncoderWeights, prefix: str) -> np.ndarray:
    cfg = weights.config
    n = x.shape[0]
    heads, dh = cfg.heads, cfg.d_head
    q = (x @ weights[prefix + "Wq"].T).reshape(n, heads, dh)
    k = (x @ weights[prefix + "Wk"].T).reshape(n, heads, dh)
    v = (x @ weights[prefix + "Wv"].T).reshape(n, heads, dh)
    scores = np.einsum("ihd,jhd->hij", q, k) / math.sqrt(dh)
    scores -= scores.max(axis=2, keepdims=True)
    ex = np.exp(scores)
    probs = ex / ex.sum(axis=2, keepdims=True)
    attn = np.einsum("hij,jhd->ihd", probs, v).reshape(n, cfg.d_model)
    return attn @ weights[prefix + "Wo"].T


def class_token_embedding(node_embeddings: np.ndarray,
                          weights: EncoderWeights) -> np.ndarray:
    """Global descriptor: CLS token attended over the node embeddings."""
    x = np.concatenate([weights["cls_token"][None, :], node_embeddings], axis=0)
    for layer in range(CLS_ATTN_LAYERS):
        p = f"cls_attn{layer}."
        x = _layer_norm(x + _mhsa(x, weights, p),
                        weights[p + "ln_scale"], weights[p + "ln_bias"])
    cls = x[0]
    norm = np.linalg.norm(cls)
    if norm == 0:
        raise NumericError("class token embedding collapsed to zero")
    return cls / norm


def encode_graph(graph: SceneGraph, weights: EncoderWeights,
                 config: EncoderConfig | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Full forward pass: (node embeddings (n, d_model), global (d_model,)).

    Node embeddings are L2-normalized so the matcher's dot products are
    cosine similarities.
    """
    cfg = weights.config if config is None else config
    if config is not None and config != weights.config:
        raise InvalidInputError("encode_graph: config does not match weights")

    n = len(graph.nodes)
    if n == 0:
        node_emb = np.zeros((0, cfg.d_model))
        return node_emb, class_token_embedding(node_emb, weights)

    c0 = np.stack([initial_embed(node, weights) for node in graph.nodes])
    index = _build_neighbor_index(graph)
    c = c0
    for layer in range(cfg.layers):
        c = dgsa_layer(graph, c, weights, layer, index=index)

    cat = np.concatenate([c, c0], axis=1)
    h = np.maximum(cat @ weights["proj_ffn.w1"].T + weights["proj_ffn.b1"], 0.0)
    emb = h @ weights["proj_ffn.w2"].T + weights["proj_ffn.b2"]
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms == 0):
        ids = [graph.nodes[i].id for i in np.where(norms == 0)[0]]
        raise NumericError(f"zero-norm node embeddings for nodes {ids}")
    node_emb = emb / norms[:, None]
    return node_emb, class_token_embedding(node_emb, weights)

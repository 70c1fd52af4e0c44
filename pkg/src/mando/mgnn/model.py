"""Node-level metapath attention network with graph and node classification heads.

Forward pass for a packed :class:`GraphBatch`:

1. every node feature is mapped by the matrix of its node type;
2. for each metapath and head, a centre attends over its metapath neighbours
   (softmax of a LeakyReLU-scored linear form of the projected pair) and
   aggregates their projected features;
3. heads are concatenated and the per-metapath results of a node are summed
   and divided by the number of model metapaths that start at its type;
4. the node's unified vector places that result in the block of its type;
   a graph vector is the mean of its nodes' unified vectors;
5. a two-layer perceptron produces class logits.

The unified block vector is never materialised during training: its product
with the first perceptron layer equals the node result times the layer's
type block, and the graph mean commutes with that product.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import torch
import torch.nn.functional as F

from mando.errors import UnknownType
from mando.metapath import Metapath
from mando.mgnn.batch import GraphBatch

ACTIVATIONS = ("elu", "identity")


@dataclass
class MgnnConfig:
    in_dim: int = 128
    type_dim: int = 128
    heads: int = 8
    head_dim: int = 32
    hidden: int = 128
    n_classes: int = 2
    dropout: float = 0.6
    negative_slope: float = 0.2
    activation: str = "elu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.type_dim > self.out_dim:
            raise ValueError("type_dim must not exceed heads * head_dim (fallback padding)")

    @property
    def out_dim(self) -> int:
        return self.heads * self.head_dim

    def to_dict(self) -> dict:
        return asdict(self)


PARAM_ORDER = ("type_transform", "path_proj", "attn_src", "attn_dst", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2")


class MgnnModel(torch.nn.Module):
    def __init__(
        self,
        cfg: MgnnConfig,
        vocab: Sequence[str],
        paths: Sequence[Metapath],
        seed: int = 0,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        self.cfg = cfg
        self.vocab = list(vocab)
        self.paths = [Metapath(*p) for p in paths]
        self.type_index = {t: k for k, t in enumerate(self.vocab)}
        T, P, H, D = len(self.vocab), len(self.paths), cfg.heads, cfg.head_dim
        z = lambda *shape: torch.nn.Parameter(torch.zeros(*shape, dtype=dtype))
        self.type_transform = z(T, cfg.in_dim, cfg.type_dim)
        self.path_proj = z(P, cfg.type_dim, H * D)
        self.attn_src = z(P, H, D)
        self.attn_dst = z(P, H, D)
        self.mlp_w1 = z(T, H * D, cfg.hidden)
        self.mlp_b1 = z(cfg.hidden)
        self.mlp_w2 = z(cfg.hidden, cfg.n_classes)
        self.mlp_b2 = z(cfg.n_classes)
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int):
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for name in ("type_transform", "path_proj", "attn_src", "attn_dst", "mlp_w1"):
                for block in getattr(self, name):
                    torch.nn.init.xavier_uniform_(block, generator=gen)
            torch.nn.init.xavier_uniform_(self.mlp_w2, generator=gen)
            self.mlp_b1.zero_()
            self.mlp_b2.zero_()

    def named_tensors(self) -> list[tuple[str, torch.Tensor]]:
        return [(name, getattr(self, name)) for name in PARAM_ORDER]

    def parameter_count(self) -> int:
        return sum(t.numel() for _, t in self.named_tensors())

    # -- stages ---------------------------------------------------------------

    def _per_type(self, batch: GraphBatch, x: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
        """Row ``i`` of the result is ``x[i] @ weights[type(i)]``; zero for unknown types."""
        parts, order = [], []
        # unbind once: indexing a stacked parameter per type costs a full-size gradient each
        blocks = weights.unbind(0)
        for t in range(len(self.vocab)):
            idx = (batch.node_type == t).nonzero(as_tuple=True)[0]
            if len(idx):
                parts.append(x[idx] @ blocks[t])
                order.append(idx)
        unknown = (batch.node_type < 0).nonzero(as_tuple=True)[0]
        parts.append(x.new_zeros(len(unknown), weights.shape[-1]))
        order.append(unknown)
        perm = torch.cat(order)
        inverse = torch.empty_like(perm)
        inverse[perm] = torch.arange(len(perm))
        return torch.cat(parts)[inverse]

    def transform(self, batch: GraphBatch) -> torch.Tensor:
        """Type-specific linear map of every node; unknown types map to zero."""
        return self._per_type(batch, batch.x, self.type_transform)

    def node_embeddings(
        self, batch: GraphBatch, e_prime: torch.Tensor, generator: Optional[torch.Generator] = None
    ) -> torch.Tensor:
        """Per-node metapath-averaged attention output, width ``heads * head_dim``."""
        cfg = self.cfg
        n = batch.n_nodes
        denom = batch.paths_per_type.to(e_prime.dtype)
        outs, where = [], []
        items = list(batch.path_edges.items())
        if items:
            # one gather for all paths keeps the backward pass to a single scatter
            gathered = e_prime[torch.cat([pe.nodes for _, pe in items])]
            chunks = gathered.split([len(pe.nodes) for _, pe in items])
        params = (self.path_proj.unbind(0), self.attn_src.unbind(0), self.attn_dst.unbind(0))
        for (k, pe), rows in zip(items, chunks if items else []):
            m_centers = self._path_embedding(rows, pe, tuple(p[k] for p in params), generator)
            centers = pe.nodes[pe.center_pos]
            outs.append(m_centers / denom[batch.node_type[centers]][:, None])
            where.append(centers)
        fallback = F.pad(e_prime, (0, cfg.out_dim - cfg.type_dim))
        if not outs:
            return fallback
        where_all = torch.cat(where)
        acc = e_prime.new_zeros(n, cfg.out_dim).index_add(0, where_all, torch.cat(outs))
        covered = torch.zeros(n, dtype=torch.bool)
        covered[where_all] = True
        return torch.where(covered[:, None], acc, fallback)

    def _path_embedding(self, rows: torch.Tensor, pe, params, generator) -> torch.Tensor:
        """Attention output of one path for its centres; ``rows`` are ``e'`` of ``pe.nodes``.

        ``params`` holds that path's projection and source/target attention vectors.
        """
        cfg = self.cfg
        H, D = cfg.heads, cfg.head_dim
        n_centers = len(pe.center_pos)
        w_proj, a_src, a_dst = params
        proj = (rows @ w_proj).view(-1, H, D)
        alpha = attention_scores(proj, pe.c_loc, pe.n_loc, a_src, a_dst, cfg.negative_slope)
        alpha = segment_softmax(alpha, pe.seg, n_centers)
        if self.training and cfg.dropout > 0:
            keep = torch.rand(alpha.shape, generator=generator, dtype=alpha.dtype) >= cfg.dropout
            alpha = alpha * keep / (1 - cfg.dropout)
        msg = alpha[:, :, None] * proj[pe.n_loc]
        agg = proj.new_zeros(n_centers, H, D).index_add(0, pe.seg, msg)
        return activate(agg.reshape(n_centers, H * D), cfg.activation)

    def hidden_per_node(self, batch: GraphBatch, m: torch.Tensor) -> torch.Tensor:
        """First perceptron layer (without bias) applied to each node's unified vector."""
        return self._per_type(batch, m, self.mlp_w1)

    def head(self, z: torch.Tensor) -> torch.Tensor:
        return F.relu(z + self.mlp_b1) @ self.mlp_w2 + self.mlp_b2

    def forward(self, batch: GraphBatch, task: str, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        """Class logits: one row per node (``fine``) or per graph (``coarse``)."""
        m = self.node_embeddings(batch, self.transform(batch), generator)
        z = self.hidden_per_node(batch, m)
        if task == "fine":
            return self.head(z)
        if task == "coarse":
            pooled = z.new_zeros(batch.n_graphs, self.cfg.hidden).index_add(0, batch.graph_index, z)
            return self.head(pooled / batch.graph_sizes.clamp(min=1).to(z.dtype)[:, None])
        raise ValueError(f"task must be 'coarse' or 'fine', got {task!r}")

    def unified(self, batch: GraphBatch) -> torch.Tensor:
        """Block-layout node vectors of width ``|vocab| * heads * head_dim``."""
        m = self.node_embeddings(batch, self.transform(batch))
        return fine_readout(m, batch.node_type, len(self.vocab))


# -- standalone operations ----------------------------------------------------


def activate(x: torch.Tensor, kind: str) -> torch.Tensor:
    return F.elu(x) if kind == "elu" else x


def transform(e: torch.Tensor, node_type: str, vocab: Sequence[str], weights: torch.Tensor) -> torch.Tensor:
    """Map one feature vector by the matrix of its type."""
    if node_type not in vocab:
        raise UnknownType(f"node type {node_type!r} is not in the model vocabulary")
    return e @ weights[list(vocab).index(node_type)]


def attention_scores(proj, c_loc, n_loc, a_src, a_dst, negative_slope: float = 0.2) -> torch.Tensor:
    """Raw per-edge, per-head scores ``LeakyReLU(a_src . h_i + a_dst . h_j)``."""
    s_src = (proj * a_src).sum(-1)
    s_dst = (proj * a_dst).sum(-1)
    return F.leaky_relu(s_src[c_loc] + s_dst[n_loc], negative_slope)


def segment_softmax(scores: torch.Tensor, segment: torch.Tensor, n_segments: int) -> torch.Tensor:
    """Softmax of ``scores`` (E, H) within each group of equal ``segment`` id."""
    idx = segment[:, None].expand_as(scores)
    top = scores.new_full((n_segments, scores.shape[1]), float("-inf"))
    top = top.scatter_reduce(0, idx, scores.detach(), reduce="amax", include_self=True)
    ex = torch.exp(scores - top[segment])
    total = scores.new_zeros(n_segments, scores.shape[1]).index_add(0, segment, ex)
    return ex / total[segment]


def attention_weights(
    center: torch.Tensor,
    neighbors: torch.Tensor,
    proj: torch.Tensor,
    a_src: torch.Tensor,
    a_dst: torch.Tensor,
    negative_slope: float = 0.2,
) -> torch.Tensor:
    """Attention of one centre over its neighbour rows: shape (n_neighbors, heads)."""
    if neighbors.shape[0] == 0:
        raise ValueError("no neighbours to attend over")
    H, D = a_src.shape
    h = torch.cat([center[None], neighbors]) @ proj
    h = h.view(-1, H, D)
    n = neighbors.shape[0]
    c_loc = torch.zeros(n, dtype=torch.int64)
    n_loc = torch.arange(1, n + 1)
    scores = attention_scores(h, c_loc, n_loc, a_src, a_dst, negative_slope)
    return segment_softmax(scores, c_loc, 1)


def metapath_embedding(
    center: torch.Tensor,
    neighbors: torch.Tensor,
    proj: torch.Tensor,
    a_src: torch.Tensor,
    a_dst: torch.Tensor,
    activation: str = "elu",
    negative_slope: float = 0.2,
) -> torch.Tensor:
    """Concatenated per-head attention aggregate of one centre for one metapath."""
    H, D = a_src.shape
    alpha = attention_weights(center, neighbors, proj, a_src, a_dst, negative_slope)
    h = (neighbors @ proj).view(-1, H, D)
    return activate((alpha[:, :, None] * h).sum(0).reshape(H * D), activation)


def node_embedding(per_path: Sequence[torch.Tensor], n_type_paths: int) -> torch.Tensor:
    """Sum of a node's per-metapath results divided by its type's metapath count."""
    return torch.stack(list(per_path)).sum(0) / n_type_paths


def fine_readout(m: torch.Tensor, node_type: torch.Tensor, n_types: int) -> torch.Tensor:
    """Place each node's vector in the block of its type; other blocks are zero."""
    n, w = m.shape
    out = m.new_zeros(n, n_types, w)
    known = node_type >= 0
    rows = known.nonzero(as_tuple=True)[0]
    out[rows, node_type[rows]] = m[rows]
    return out.reshape(n, n_types * w)


def coarse_readout(unified: torch.Tensor, graph_index: torch.Tensor, n_graphs: int) -> torch.Tensor:
    """Mean of the unified node vectors of each graph."""
    sums = unified.new_zeros(n_graphs, unified.shape[1]).index_add(0, graph_index, unified)
    counts = torch.bincount(graph_index, minlength=n_graphs).clamp(min=1).to(unified.dtype)
    return sums / counts[:, None]


def classify(logits: torch.Tensor) -> torch.Tensor:
    return torch.softmax(logits, dim=-1)


def loss(logits: torch.Tensor, labels: torch.Tensor, class_weight: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Mean cross-entropy; with class weights, the weighted mean."""
    return F.cross_entropy(logits, labels, weight=class_weight)

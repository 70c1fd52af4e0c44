"""Unsupervised node features: node-type one-hot, node2vec, LINE and metapath2vec.

All generators return a ``float32`` matrix with one row per node id.  Random
walks draw from per-walk substreams keyed by ``(seed, node, walk index)`` so
the corpus does not depend on generation order; skip-gram training is
single-threaded and seeded.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import torch

from mando.errors import MandoError, TooManyTypes
from mando.hetgraph import BACK, HetGraph
from mando.metapath import Metapath, MetapathCatalog

EMBED_DIM = 128
FEATS_MAGIC = b"MNDE"
FEATS_VERSION = 1


@dataclass
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    p: float = 1.0
    q: float = 1.0
    window: int = 5
    negatives: int = 5
    epochs: int = 1
    dim: int = EMBED_DIM
    lr: float = 0.01
    batch_size: int = 1024
    seed: int = 0

    def __post_init__(self):
        for name in ("walks_per_node", "walk_length", "window", "negatives", "epochs", "dim", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.p <= 0 or self.q <= 0 or self.lr <= 0:
            raise ValueError("p, q and lr must be positive")


# -- one-hot -----------------------------------------------------------------


def one_hot_features(g: HetGraph, dim: int = EMBED_DIM, vocabulary: Optional[Sequence[str]] = None) -> np.ndarray:
    """Row ``i`` is the indicator of node ``i``'s type in the sorted type list.

    With an explicit ``vocabulary`` (a shared, ordered type list) nodes of
    types outside it get an all-zero row.
    """
    types = list(vocabulary) if vocabulary is not None else sorted(g.node_types)
    if len(types) > dim:
        raise TooManyTypes(f"{len(types)} node types do not fit in {dim} dimensions")
    index = {t: k for k, t in enumerate(types)}
    out = np.zeros((len(g.nodes), dim), dtype=np.float32)
    for n in g.nodes:
        k = index.get(n.node_type)
        if k is not None:
            out[n.id, k] = 1.0
    return out


# -- walks -------------------------------------------------------------------


def _walk_rng(seed: int, node: int, walk: int, salt: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, node, walk, salt])


def _csr(n: int, pairs: Iterable[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Sorted, de-duplicated adjacency of ``n`` nodes as (indptr, indices)."""
    arr = np.array(sorted(set(pairs)), dtype=np.int64).reshape(-1, 2)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, arr[:, 0] + 1, 1)
    return np.cumsum(indptr), arr[:, 1].copy()


def _walk_uniforms(seed: int, starts: np.ndarray, walk: int, length: int, salt: int = 0) -> np.ndarray:
    return np.stack([_walk_rng(seed, int(s), walk, salt).random(length) for s in starts]) if len(starts) else np.zeros((0, length))


def _follow(indptr: np.ndarray, indices: np.ndarray, cur: np.ndarray, u: np.ndarray):
    """Uniform successor of every ``cur`` (-1 where there is none)."""
    deg = indptr[cur + 1] - indptr[cur]
    pick = np.minimum((u * deg).astype(np.int64), np.maximum(deg - 1, 0))
    nxt = np.where(deg > 0, indices[np.minimum(indptr[cur] + pick, max(len(indices) - 1, 0))] if len(indices) else -1, -1)
    return nxt


def _trim(paths: np.ndarray) -> list[list[int]]:
    return [row[row >= 0].tolist() for row in paths]


def node2vec_walks(g: HetGraph, cfg: WalkConfig) -> list[list[int]]:
    """Second-order biased walks on the undirected, type-blind view of ``g``.

    Walk ``w`` from node ``s`` draws its uniforms from the substream
    ``(seed, s, w)``, so the corpus is independent of generation order.
    """
    n = len(g.nodes)
    und = [(e.src, e.dst) for e in g.edges if e.src != e.dst]
    indptr, indices = _csr(n, und + [(b, a) for a, b in und])
    starts = np.arange(n)
    walks = []
    for w in range(cfg.walks_per_node):
        u = _walk_uniforms(cfg.seed, starts, w, cfg.walk_length)
        if cfg.p == 1.0 and cfg.q == 1.0:
            paths = np.full((n, cfg.walk_length), -1, dtype=np.int64)
            paths[:, 0] = starts
            for step in range(1, cfg.walk_length):
                prev = paths[:, step - 1]
                alive = prev >= 0
                nxt = _follow(indptr, indices, np.where(alive, prev, 0), u[:, step])
                paths[:, step] = np.where(alive, nxt, -1)
            walks.extend(_trim(paths))
            continue
        for s in range(n):
            walks.append(_biased_walk(indptr, indices, s, u[s], cfg))
    return walks


def _biased_walk(indptr: np.ndarray, indices: np.ndarray, start: int, u: np.ndarray, cfg: WalkConfig) -> list[int]:
    walk = [start]
    for step in range(1, cfg.walk_length):
        cur = walk[-1]
        cand = indices[indptr[cur] : indptr[cur + 1]]
        if len(cand) == 0:
            break
        if step == 1:
            weights = np.ones(len(cand))
        else:
            prev = walk[-2]
            near = np.isin(cand, indices[indptr[prev] : indptr[prev + 1]])
            weights = np.where(cand == prev, 1.0 / cfg.p, np.where(near, 1.0, 1.0 / cfg.q))
        cum = np.cumsum(weights)
        k = min(int(np.searchsorted(cum, u[step] * cum[-1], side="right")), len(cand) - 1)
        walk.append(int(cand[k]))
    return walk


@dataclass
class MetapathWalkScheme:
    """Cyclic walk pattern: each step is (relation, forward?, next node type)."""

    start_type: str
    steps: list[tuple[str, bool, str]] = field(default_factory=list)

    @classmethod
    def from_metapath(cls, path: Metapath) -> "MetapathWalkScheme":
        if path.is_back:
            steps = [(path.r1, True, path.a2), (path.r1, False, path.a1)]
        else:
            steps = [(path.r1, True, path.a2), (path.r2, True, path.a3), (path.r2, False, path.a2), (path.r1, False, path.a1)]
        return cls(path.a1, steps)

    def type_pattern(self) -> list[str]:
        return [self.start_type] + [t for _, _, t in self.steps]


def derive_schemes(catalog: MetapathCatalog, top_k: int = 8) -> list[MetapathWalkScheme]:
    """Schemes from the ``top_k`` catalog paths with the most (centre, neighbour) instances."""
    counts = {p: sum(len(ns) for ns in catalog.per_path_neighbors[p].values()) for p in catalog.paths}
    ranked = sorted(catalog.paths, key=lambda p: (-counts[p], p))
    return [MetapathWalkScheme.from_metapath(p) for p in ranked[:top_k]]


def metapath2vec_walks(
    g: HetGraph, catalog: MetapathCatalog, schemes: Sequence[MetapathWalkScheme], cfg: WalkConfig
) -> list[list[int]]:
    """Scheme-guided walks; a walk stops early when no typed successor exists.

    Nodes whose type starts no scheme contribute a single-node walk.
    """
    n = len(g.nodes)
    ntype = [nd.node_type for nd in g.nodes]
    steps_csr: dict[tuple[str, bool, str], tuple[np.ndarray, np.ndarray]] = {}
    for scheme in schemes:
        for rel, forward, nxt in scheme.steps:
            if (rel, forward, nxt) not in steps_csr:
                pairs = [
                    (e.src, e.dst) if forward else (e.dst, e.src)
                    for e in g.edges
                    if e.edge_type == rel and ntype[e.dst if forward else e.src] == nxt
                ]
                steps_csr[(rel, forward, nxt)] = _csr(n, pairs)

    walks = []
    for w in range(cfg.walks_per_node):
        per_start: list[list[list[int]]] = [[] for _ in range(n)]
        for k, scheme in enumerate(schemes):
            starts = np.array([i for i in range(n) if ntype[i] == scheme.start_type], dtype=np.int64)
            if len(starts) == 0:
                continue
            u = _walk_uniforms(cfg.seed, starts, w, cfg.walk_length, k + 1)
            paths = np.full((len(starts), cfg.walk_length), -1, dtype=np.int64)
            paths[:, 0] = starts
            for step in range(1, cfg.walk_length):
                indptr, indices = steps_csr[scheme.steps[(step - 1) % len(scheme.steps)]]
                prev = paths[:, step - 1]
                alive = prev >= 0
                nxt = _follow(indptr, indices, np.where(alive, prev, 0), u[:, step])
                paths[:, step] = np.where(alive, nxt, -1)
            for s, walk in zip(starts.tolist(), _trim(paths)):
                per_start[s].append(walk)
        for s in range(n):
            walks.extend(per_start[s] or [[s]])
    return walks


def walk_matches_scheme(g: HetGraph, walk: Sequence[int], scheme: MetapathWalkScheme) -> bool:
    ntype = [n.node_type for n in g.nodes]
    if ntype[walk[0]] != scheme.start_type:
        return False
    for k in range(1, len(walk)):
        rel, forward, nxt = scheme.steps[(k - 1) % len(scheme.steps)]
        a, b = walk[k - 1], walk[k]
        if ntype[b] != nxt:
            return False
        if not (g.has_edge(a, b, rel) if forward else g.has_edge(b, a, rel)):
            return False
    return True


# -- skip-gram with negative sampling ----------------------------------------


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sgns_loss_grads(center: np.ndarray, context: np.ndarray, negatives: np.ndarray):
    """Loss and gradients of ``-log s(c.o) - sum_k log s(-c.n_k)`` for one triple.

    ``negatives`` has shape ``(K, d)``.  Returns (loss, d_center, d_context, d_negatives).
    """
    pos = float(center @ context)
    neg = negatives @ center
    loss = -np.log(_sigmoid(np.array(pos))) - np.sum(np.log(_sigmoid(-neg)))
    g_pos = _sigmoid(np.array(pos)) - 1.0
    g_neg = _sigmoid(neg)
    d_center = g_pos * context + g_neg @ negatives
    d_context = g_pos * center
    d_negatives = g_neg[:, None] * center[None, :]
    return float(loss), d_center, d_context, d_negatives


def _noise_table(counts: np.ndarray) -> np.ndarray:
    weights = np.power(np.maximum(counts, 0).astype(np.float64), 0.75)
    if weights.sum() == 0:
        weights = np.ones_like(weights)
    return np.cumsum(weights / weights.sum())


class _SparseAdam:
    """Adam over the rows touched by a minibatch; untouched rows keep their moments."""

    def __init__(self, shape: tuple[int, int], betas=(0.9, 0.999), eps: float = 1e-8):
        self.m = np.zeros(shape, dtype=np.float32)
        self.v = np.zeros(shape, dtype=np.float32)
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0

    def step(self, param: np.ndarray, idx: np.ndarray, rows: np.ndarray, lr: float):
        # duplicate indices are averaged so row scale does not depend on batch composition
        uniq, inv, counts = np.unique(idx, return_inverse=True, return_counts=True)
        acc = torch.zeros((len(uniq), rows.shape[1]), dtype=torch.float32)
        acc.index_add_(0, torch.from_numpy(inv.astype(np.int64)), torch.from_numpy(np.ascontiguousarray(rows)))
        grad = acc.numpy() / counts[:, None]
        self.t += 1
        m = self.m[uniq] = self.b1 * self.m[uniq] + (1 - self.b1) * grad
        v = self.v[uniq] = self.b2 * self.v[uniq] + (1 - self.b2) * grad * grad
        m_hat = m / (1 - self.b1**self.t)
        v_hat = v / (1 - self.b2**self.t)
        param[uniq] -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _sgns_epoch(
    vec_in: np.ndarray,
    vec_out: np.ndarray,
    opt_in: _SparseAdam,
    opt_out: _SparseAdam,
    pairs: np.ndarray,
    noise_cdf: np.ndarray,
    cfg: WalkConfig,
    rng: np.random.Generator,
    lr_start: float,
    lr_end: float,
):
    order = rng.permutation(len(pairs))
    n_batches = max(1, -(-len(pairs) // cfg.batch_size))
    d = vec_in.shape[1]
    for b in range(n_batches):
        idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
        if len(idx) == 0:
            continue
        lr = lr_start + (lr_end - lr_start) * b / n_batches
        c_idx, o_idx = pairs[idx, 0], pairs[idx, 1]
        n_idx = np.minimum(np.searchsorted(noise_cdf, rng.random((len(idx), cfg.negatives))), len(noise_cdf) - 1)
        # a sampled negative that is the true context or the centre itself carries no signal
        keep = (n_idx != o_idx[:, None]) & (n_idx != c_idx[:, None])
        c = vec_in[c_idx]
        o = vec_out[o_idx]
        nv = vec_out[n_idx]
        g_pos = (_sigmoid(np.einsum("bd,bd->b", c, o)) - 1.0).astype(np.float32)
        g_neg = (_sigmoid(np.einsum("bkd,bd->bk", nv, c)) * keep).astype(np.float32)
        d_c = g_pos[:, None] * o + np.einsum("bk,bkd->bd", g_neg, nv)
        d_o = g_pos[:, None] * c
        d_n = g_neg[:, :, None] * c[:, None, :]
        out_idx = np.concatenate([o_idx, n_idx.reshape(-1)])
        out_rows = np.concatenate([d_o, d_n.reshape(-1, d)])
        if vec_out is vec_in:
            opt_in.step(vec_in, np.concatenate([c_idx, out_idx]), np.concatenate([d_c, out_rows]), lr)
        else:
            opt_in.step(vec_in, c_idx, d_c, lr)
            opt_out.step(vec_out, out_idx, out_rows, lr)


def _check_finite(m: np.ndarray, where: str):
    if not np.all(np.isfinite(m)):
        raise MandoError(f"non-finite values in embedding after {where}")


def _init_vectors(n: int, dim: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    vec_in = ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)
    return vec_in, np.zeros((n, dim), dtype=np.float32)


def walk_pairs(walks: Sequence[Sequence[int]], window: int) -> np.ndarray:
    pairs = []
    for walk in walks:
        w = np.asarray(walk, dtype=np.int64)
        for off in range(1, window + 1):
            if len(w) > off:
                pairs.append(np.stack([w[:-off], w[off:]], axis=1))
                pairs.append(np.stack([w[off:], w[:-off]], axis=1))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    out = np.concatenate(pairs)
    # revisits of the centre node are not informative contexts
    return out[out[:, 0] != out[:, 1]]


def train_skipgram(walks: Sequence[Sequence[int]], n_nodes: int, cfg: WalkConfig) -> np.ndarray:
    rng = np.random.default_rng([cfg.seed, 0x5347])
    vec_in, vec_out = _init_vectors(n_nodes, cfg.dim, rng)
    pairs = walk_pairs(walks, cfg.window)
    counts = np.bincount(np.concatenate([np.asarray(w) for w in walks]) if walks else np.zeros(0, np.int64), minlength=n_nodes)
    noise = _noise_table(counts)
    opt_in, opt_out = _SparseAdam(vec_in.shape), _SparseAdam(vec_out.shape)
    for epoch in range(cfg.epochs):
        if len(pairs):
            a = cfg.lr * (1 - epoch / cfg.epochs)
            b = cfg.lr * max(1e-4, 1 - (epoch + 1) / cfg.epochs)
            _sgns_epoch(vec_in, vec_out, opt_in, opt_out, pairs, noise, cfg, rng, a, b)
        _check_finite(vec_in, f"skip-gram epoch {epoch}")
        _check_finite(vec_out, f"skip-gram epoch {epoch}")
    # word and context roles are summed: in-vectors alone need not align for co-occurring nodes
    return (vec_in + vec_out).astype(np.float32)


def node2vec_embed(g: HetGraph, cfg: WalkConfig) -> np.ndarray:
    return train_skipgram(node2vec_walks(g, cfg), len(g.nodes), cfg)


def metapath2vec_embed(g: HetGraph, catalog: MetapathCatalog, cfg: WalkConfig, top_k: int = 8) -> np.ndarray:
    schemes = derive_schemes(catalog, top_k)
    return train_skipgram(metapath2vec_walks(g, catalog, schemes, cfg), len(g.nodes), cfg)


def line_embed(g: HetGraph, order: str = "first", cfg: Optional[WalkConfig] = None) -> np.ndarray:
    """LINE with edge sampling on the undirected, type-blind view of ``g``.

    ``first`` shares one vector per node between both edge ends; ``second``
    scores node vectors against separate context vectors and, like the
    skip-gram output, returns their sum.
    """
    cfg = cfg or WalkConfig()
    if order not in ("first", "second"):
        raise ValueError(f"order must be 'first' or 'second', got {order!r}")
    rng = np.random.default_rng([cfg.seed, 0x4C49])
    n = len(g.nodes)
    vec_in, vec_out = _init_vectors(n, cfg.dim, rng)
    if order == "first":
        vec_out = vec_in  # shared storage: both roles update the same rows
    undirected = sorted({(min(e.src, e.dst), max(e.src, e.dst)) for e in g.edges if e.src != e.dst})
    if undirected:
        edges = np.array(undirected, dtype=np.int64)
        pairs = np.concatenate([edges, edges[:, ::-1]])
        degree = np.bincount(edges.reshape(-1), minlength=n)
        noise = _noise_table(degree)
        # one pass over each edge per walk-equivalent sample budget
        rounds = cfg.epochs * cfg.walks_per_node
        opt_in, opt_out = _SparseAdam(vec_in.shape), _SparseAdam(vec_out.shape)
        for r in range(rounds):
            a = cfg.lr * (1 - r / rounds)
            b = cfg.lr * max(1e-4, 1 - (r + 1) / rounds)
            _sgns_epoch(vec_in, vec_out, opt_in, opt_out, pairs, noise, cfg, rng, a, b)
            _check_finite(vec_in, f"LINE round {r}")
    out = vec_in if order == "first" else vec_in + vec_out
    return out.astype(np.float32)


FEATURE_METHODS = ("onehot", "node2vec", "line", "metapath2vec")


def node_features(
    g: HetGraph,
    method: str = "onehot",
    cfg: Optional[WalkConfig] = None,
    vocabulary: Optional[Sequence[str]] = None,
    catalog: Optional[MetapathCatalog] = None,
) -> np.ndarray:
    cfg = cfg or WalkConfig()
    if method == "onehot":
        return one_hot_features(g, cfg.dim, vocabulary)
    if method == "node2vec":
        return node2vec_embed(g, cfg)
    if method == "line":
        return line_embed(g, "first", cfg)
    if method == "metapath2vec":
        from mando.metapath import extract_catalog

        return metapath2vec_embed(g, catalog or extract_catalog(g), cfg)
    raise ValueError(f"unknown feature method {method!r}; expected one of {FEATURE_METHODS}")


# -- feats.bin ---------------------------------------------------------------


def write_features(path: str | Path, matrix: np.ndarray):
    m = np.ascontiguousarray(matrix, dtype="<f4")
    n, d = m.shape
    with open(path, "wb") as fh:
        fh.write(FEATS_MAGIC + struct.pack("<IQQ", FEATS_VERSION, n, d))
        fh.write(m.tobytes())


def read_features(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != FEATS_MAGIC:
        raise MandoError(f"{path}: not a feature file")
    version, n, d = struct.unpack_from("<IQQ", blob, 4)
    if version != FEATS_VERSION:
        raise MandoError(f"{path}: unsupported feature file version {version}")
    body = blob[24:]
    if len(body) != 4 * n * d:
        raise MandoError(f"{path}: truncated feature file")
    return np.frombuffer(body, dtype="<f4").reshape(n, d).astype(np.float32)


def type_counts(g: HetGraph) -> Counter:
    return Counter(n.node_type for n in g.nodes)

"""Self-tokenization: nodes are clustered in a learned embedding space
and every link becomes a community-pair token.

The cluster centers and node embeddings are ordinary trainable tensors,
so the clustering distance term participates in the same gradient tape
as the sequence loss.  Assignments are hard nearest-center choices,
recomputed between optimizer epochs and treated as constants inside a
step.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .autodiff import embedding_lookup, squared_distance

__all__ = [
    "TokenAlphabet",
    "ClusterModel",
    "initial_embedding_values",
    "initial_center_values",
    "assign_clusters",
    "clustering_loss",
    "tokenize_link",
    "tokenize_sequence",
    "detokenize",
    "first_occurrence_ids",
    "cluster_report",
]


class TokenAlphabet:
    """Fixed alphabet of all K*K community pairs.

    token = src_cluster * K + dst_cluster; the encoding is a bijection,
    and the alphabet size never changes across re-clusterings, so the
    sequence model's output layer shape is stable.
    """

    __slots__ = ("n_clusters",)

    def __init__(self, n_clusters):
        if n_clusters < 1:
            raise ValueError("alphabet needs at least one cluster")
        self.n_clusters = int(n_clusters)

    @property
    def size(self):
        return self.n_clusters * self.n_clusters

    def encode(self, src_cluster, dst_cluster):
        k = self.n_clusters
        if not (0 <= src_cluster < k and 0 <= dst_cluster < k):
            raise ValueError(f"cluster pair ({src_cluster}, {dst_cluster}) out of range for K={k}")
        return src_cluster * k + dst_cluster

    def decode(self, token):
        if not 0 <= token < self.size:
            raise ValueError(f"token {token} out of range for alphabet of size {self.size}")
        return token // self.n_clusters, token % self.n_clusters


def detokenize(token, alphabet):
    """Inverse of the pair encoding: token -> (src_cluster, dst_cluster)."""
    return alphabet.decode(int(token))


_EMBEDDING_SALT = 0xE3B
_CENTER_SALT = 0xCE7


def initial_embedding_values(node_ids, dim, seed):
    """Seeded uniform [-0.1, 0.1] embeddings, one row per node.

    Each row is derived from (run seed, node identifier), so a node keeps
    its initial embedding under any registry permutation — re-ingesting a
    normalized edge list cannot silently change a run.
    """
    emb = np.empty((len(node_ids), dim))
    for i, nid in enumerate(node_ids):
        digest = hashlib.sha256(nid.encode("utf-8")).digest()
        entropy = [int(seed) & 0xFFFFFFFF, _EMBEDDING_SALT, int.from_bytes(digest[:16], "little")]
        emb[i] = np.random.default_rng(np.random.SeedSequence(entropy)).uniform(-0.1, 0.1, size=dim)
    return emb


def initial_center_values(embedding_values, node_ids, n_clusters, seed):
    """Centers start at the embeddings of K distinct seeded-sampled nodes,
    drawn over the identifier-sorted node list (registry-order-free)."""
    n = embedding_values.shape[0]
    if n_clusters > n:
        raise ValueError(f"cannot place {n_clusters} centers among {n} nodes")
    order = sorted(range(n), key=lambda i: node_ids[i])
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, _CENTER_SALT]))
    chosen = rng.choice(n, size=n_clusters, replace=False)
    return embedding_values[[order[i] for i in chosen]].copy()


class ClusterModel:
    """Node embedding table, cluster centers, and the hard assignment map."""

    def __init__(self, embedding, centers):
        self.embedding = embedding  # Tensor, |V| x D
        self.centers = centers  # Tensor, K x D
        self.assignment = np.zeros(embedding.values.shape[0], dtype=np.int64)

    @property
    def n_nodes(self):
        return self.embedding.values.shape[0]

    @property
    def n_clusters(self):
        return self.centers.values.shape[0]

    def members(self, cluster):
        return np.flatnonzero(self.assignment == cluster)


def assign_clusters(model):
    """Recompute nearest-center assignments; returns the mean squared
    distance over all nodes.  Ties go to the lowest cluster index, and
    empty clusters are left empty (their tokens become unreachable)."""
    emb = model.embedding.values
    cen = model.centers.values
    d2 = ((emb[:, None, :] - cen[None, :, :]) ** 2).sum(axis=2)
    model.assignment = np.argmin(d2, axis=1).astype(np.int64)
    return float(d2[np.arange(emb.shape[0]), model.assignment].mean())


def clustering_loss(model):
    """Differentiable sum over all nodes of the squared distance to the
    assigned center; gradients reach both embeddings and centers."""
    assigned_centers = embedding_lookup(model.centers, model.assignment)
    return squared_distance(model.embedding, assigned_centers)


def tokenize_link(src_index, dst_index, model, alphabet):
    return alphabet.encode(int(model.assignment[src_index]), int(model.assignment[dst_index]))


def tokenize_sequence(network, model, alphabet):
    """Map the link sequence to tokens, preserving chronological order."""
    k = alphabet.n_clusters
    if model.n_clusters != k:
        raise ValueError(f"cluster model has K={model.n_clusters}, alphabet expects K={k}")
    return model.assignment[network.src] * k + model.assignment[network.dst]


def first_occurrence_ids(tokens):
    """Compress tokens to 1-based ids in first-occurrence order.

    Returns (ids, mapping) where mapping[id] is the underlying token.
    This is the observed-token view of the alphabet used in reports.
    """
    mapping: dict[int, int] = {}
    ids = []
    for t in np.asarray(tokens).tolist():
        if t not in mapping:
            mapping[t] = len(mapping) + 1
        ids.append(mapping[t])
    return ids, {v: k for k, v in mapping.items()}


def cluster_report(model, network):
    """Per-cluster sizes and member identifier lists, for inspection."""
    clusters = []
    for c in range(model.n_clusters):
        members = [network.external_id(int(i)) for i in model.members(c)]
        clusters.append({"cluster": c, "size": len(members), "members": members})
    return {"n_clusters": model.n_clusters, "n_nodes": model.n_nodes, "clusters": clusters}

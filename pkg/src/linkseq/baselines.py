"""Classic link-prediction baselines over a training split: Jaccard
coefficient, Adamic-Adar, and logistic matrix factorization.

JC and AA read undirected neighbor statistics from an adjacency
snapshot; MF learns factor tables with the shared Adam optimizer on
observed links plus seeded uniform negatives.  All three are pure
functions of the training split.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .autodiff import ParameterStore
from .ingest import TemporalNetwork

__all__ = [
    "AdjacencySnapshot",
    "jaccard_score",
    "adamic_adar_score",
    "JaccardCoefficient",
    "AdamicAdar",
    "MatrixFactorization",
]


class AdjacencySnapshot:
    """Undirected neighbor sets of a training split, without self-loops."""

    def __init__(self, network):
        self.n_nodes = network.n_nodes
        neighbors: dict[int, set[int]] = {}
        for s, d in zip(network.src.tolist(), network.dst.tolist()):
            if s == d:
                continue
            neighbors.setdefault(s, set()).add(d)
            neighbors.setdefault(d, set()).add(s)
        self._neighbors = neighbors

    def neighbors(self, node):
        return self._neighbors.get(int(node), frozenset())

    def degree(self, node):
        return len(self.neighbors(node))


def jaccard_score(u, v, snapshot):
    """|common neighbors| / |neighborhood union|, 0 on an empty union."""
    gu, gv = snapshot.neighbors(u), snapshot.neighbors(v)
    union = len(gu | gv)
    if union == 0:
        return 0.0
    return len(gu & gv) / union


def adamic_adar_score(u, v, snapshot):
    """Sum of 1/ln(degree) over common neighbors; degree <= 1 is skipped."""
    total = 0.0
    for w in snapshot.neighbors(u) & snapshot.neighbors(v):
        deg = snapshot.degree(w)
        if deg > 1:
            total += 1.0 / math.log(deg)
    return total


class _SnapshotScorer(BaseEstimator):
    def fit(self, network, y=None):
        if not isinstance(network, TemporalNetwork):
            raise TypeError("fit expects a TemporalNetwork")
        self.snapshot_ = AdjacencySnapshot(network)
        return self

    def _check_fitted(self):
        if not hasattr(self, "snapshot_"):
            raise NotFittedError(f"this {type(self).__name__} instance is not fitted yet")


class JaccardCoefficient(_SnapshotScorer):
    """Neighborhood-overlap scorer; scores lie in [0, 1]."""

    def predict_scores(self, pairs):
        self._check_fitted()
        return np.array([jaccard_score(u, v, self.snapshot_) for u, v in pairs])


class AdamicAdar(_SnapshotScorer):
    """Log-degree weighted common-neighbor scorer; scores are >= 0."""

    def predict_scores(self, pairs):
        self._check_fitted()
        return np.array([adamic_adar_score(u, v, self.snapshot_) for u, v in pairs])


class MatrixFactorization(BaseEstimator):
    """Logistic factorization of the binary adjacency into source and
    destination factor tables; score(u, v) = sigmoid(p_u . q_v)."""

    def __init__(self, n_factors=16, epochs=30, learning_rate=0.05, negative_ratio=1, random_state=0):
        self.n_factors = n_factors
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.negative_ratio = negative_ratio
        self.random_state = random_state

    def fit(self, network, y=None):
        if not isinstance(network, TemporalNetwork):
            raise TypeError("fit expects a TemporalNetwork")
        if network.n_links == 0:
            raise ValueError("cannot factorize an empty training split")
        rng = np.random.default_rng(self.random_state)
        n = network.n_nodes
        store = ParameterStore()
        p = store.add("mf_p", rng.normal(0.0, 0.1, size=(n, self.n_factors)))
        q = store.add("mf_q", rng.normal(0.0, 0.1, size=(n, self.n_factors)))

        positives = network.link_pairs()
        pos_src = np.array([u for u, _ in positives], dtype=np.int64)
        pos_dst = np.array([v for _, v in positives], dtype=np.int64)
        n_neg = int(self.negative_ratio * len(positives))
        src_pool = network.source_universe()
        dst_pool = network.dest_universe()
        for _ in range(self.epochs):
            neg_src = src_pool[rng.integers(len(src_pool), size=n_neg)]
            neg_dst = dst_pool[rng.integers(len(dst_pool), size=n_neg)]
            src = np.concatenate([pos_src, neg_src])
            dst = np.concatenate([pos_dst, neg_dst])
            y_true = np.concatenate([np.ones(len(pos_src)), np.zeros(n_neg)])
            logits = np.einsum("ij,ij->i", p.values[src], q.values[dst])
            err = _sigmoid(logits) - y_true  # d(BCE)/d(logit)
            gp = np.zeros_like(p.values)
            gq = np.zeros_like(q.values)
            np.add.at(gp, src, err[:, None] * q.values[dst])
            np.add.at(gq, dst, err[:, None] * p.values[src])
            scale = 1.0 / len(y_true)
            p.grad, q.grad = gp * scale, gq * scale
            store.adam_step(lr=self.learning_rate)
        self.p_ = p.values.copy()
        self.q_ = q.values.copy()
        return self

    def predict_scores(self, pairs):
        if not hasattr(self, "p_"):
            raise NotFittedError("this MatrixFactorization instance is not fitted yet")
        pairs = np.asarray(pairs, dtype=np.int64)
        return _sigmoid(np.einsum("ij,ij->i", self.p_[pairs[:, 0]], self.q_[pairs[:, 1]]))


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

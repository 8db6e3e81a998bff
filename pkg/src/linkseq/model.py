"""The link-sequence model: a multi-layer LSTM over community-pair
tokens, trained jointly with the clustering term on one gradient tape.

Training follows the epoch loop: recompute cluster assignments,
retokenize the link sequence, then optimize the combined objective
(1 - alpha) * sequence cross-entropy + alpha * mean clustering distance
on randomly sampled chunks.  Every source of randomness derives from a
single run seed, so checkpoints are bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import generator as _generator
from .autodiff import (
    ParameterStore,
    Tensor,
    add,
    backward,
    concat,
    embedding_lookup,
    matmul,
    mul_elementwise,
    scalar_scale,
    sigmoid,
    softmax_cross_entropy,
    tanh,
)
from .ingest import TemporalNetwork
from .tokenizer import (
    ClusterModel,
    TokenAlphabet,
    assign_clusters,
    clustering_loss,
    initial_center_values,
    initial_embedding_values,
    tokenize_sequence,
)

__all__ = [
    "TrainConfig",
    "GlsmModel",
    "GLSM",
    "train",
    "sequence_loss",
    "combined_loss",
    "final_cluster_assignment",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]

_GATES = ("i", "f", "g", "o")
_MAGIC = b"LSEQCKPT"
_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    n_clusters: int
    alpha: float = 0.5
    epochs: int = 20
    chunk_size: int = 64
    stride: int = 1
    hidden_size: int = 128
    n_layers: int = 2
    embedding_dim: int = 32
    token_embedding_dim: int = 32
    learning_rate: float = 2e-3
    steps_per_epoch: int | None = None
    seed: int = 0

    def problems(self):
        out = []
        if self.n_clusters < 1:
            out.append("n_clusters must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            out.append("alpha must lie in [0, 1]")
        if self.epochs < 0:
            out.append("epochs must be >= 0")
        if self.chunk_size < 2:
            out.append("chunk_size must be >= 2")
        if not 1 <= self.stride <= self.chunk_size:
            out.append("stride must satisfy 1 <= stride <= chunk_size")
        for field in ("hidden_size", "n_layers", "embedding_dim", "token_embedding_dim"):
            if getattr(self, field) < 1:
                out.append(f"{field} must be >= 1")
        if self.learning_rate <= 0:
            out.append("learning_rate must be positive")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            out.append("steps_per_epoch must be >= 1 when given")
        return out

    def validate(self):
        problems = self.problems()
        if problems:
            raise ValueError("invalid training configuration: " + "; ".join(problems))


def _seed_streams(seed):
    """One rng per concern: network weights, chunk sampling.

    Node embeddings and centers are seeded per identifier instead (see
    tokenizer.initial_embedding_values), so they get no stream here.
    """
    children = np.random.SeedSequence(int(seed)).spawn(2)
    return tuple(np.random.default_rng(c) for c in children)


def _stable_sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def registry_hash(network):
    h = hashlib.sha256()
    h.update(b"bipartite" if network.bipartite else b"plain")
    for nid in network.node_ids:
        h.update(b"\x00")
        h.update(nid.encode("utf-8"))
    return h.hexdigest()


class GlsmModel:
    """A trained (or freshly initialized) model: parameter store, cluster
    state, LSTM stack and token alphabet, bound to one node registry."""

    def __init__(self, config, n_nodes, bipartite, net_hash, node_ids=None):
        config.validate()
        if config.n_clusters > n_nodes:
            raise ValueError(f"n_clusters={config.n_clusters} exceeds node count {n_nodes}")
        self.config = config
        self.n_nodes = n_nodes
        self.bipartite = bipartite
        self.registry_hash = net_hash
        self.alphabet = TokenAlphabet(config.n_clusters)
        self.store = ParameterStore()

        rng_weights, self._rng_chunks = _seed_streams(config.seed)
        if node_ids is not None:
            # Per-identifier seeding: embeddings survive registry reordering.
            emb = initial_embedding_values(node_ids, config.embedding_dim, config.seed)
            cen = initial_center_values(emb, node_ids, config.n_clusters, config.seed)
        else:
            # Load path: values are overwritten from the checkpoint.
            emb = np.zeros((n_nodes, config.embedding_dim))
            cen = np.zeros((config.n_clusters, config.embedding_dim))
        self.cluster = ClusterModel(
            self.store.add("node_embedding", emb),
            self.store.add("cluster_centers", cen),
        )

        h = config.hidden_size
        k = 1.0 / math.sqrt(h)
        self.store.add(
            "token_embedding",
            rng_weights.uniform(-0.1, 0.1, size=(self.alphabet.size, config.token_embedding_dim)),
        )
        for layer in range(config.n_layers):
            in_dim = config.token_embedding_dim if layer == 0 else h
            for gate in _GATES:
                self.store.add(f"lstm{layer}.W{gate}", rng_weights.uniform(-k, k, size=(in_dim + h, h)))
                self.store.add(f"lstm{layer}.b{gate}", np.zeros(h))
        self.store.add("out_w", rng_weights.uniform(-k, k, size=(h, self.alphabet.size)))
        self.store.add("out_b", np.zeros(self.alphabet.size))

    # ---- forward passes -------------------------------------------------

    def initial_state(self):
        h = self.config.hidden_size
        return [(np.zeros(h), np.zeros(h)) for _ in range(self.config.n_layers)]

    def step_values(self, token, state):
        """Consume one token; return (next-token distribution, new state).

        Pure-value fast path used for generation and scoring.
        """
        token = int(token)
        if not 0 <= token < self.alphabet.size:
            raise ValueError(f"token {token} out of range for alphabet of size {self.alphabet.size}")
        x = self.store["token_embedding"].values[token]
        new_state = []
        for layer, (h_prev, c_prev) in enumerate(state):
            z = np.concatenate([x, h_prev])
            i = _stable_sigmoid(z @ self.store[f"lstm{layer}.Wi"].values + self.store[f"lstm{layer}.bi"].values)
            f = _stable_sigmoid(z @ self.store[f"lstm{layer}.Wf"].values + self.store[f"lstm{layer}.bf"].values)
            g = np.tanh(z @ self.store[f"lstm{layer}.Wg"].values + self.store[f"lstm{layer}.bg"].values)
            o = _stable_sigmoid(z @ self.store[f"lstm{layer}.Wo"].values + self.store[f"lstm{layer}.bo"].values)
            c = f * c_prev + i * g
            h = o * np.tanh(c)
            new_state.append((h, c))
            x = h
        logits = x @ self.store["out_w"].values + self.store["out_b"].values
        z = np.exp(logits - logits.max())
        return z / z.sum(), new_state

    def forward_step(self, token, state=None):
        """Public single-step interface; state defaults to zeros."""
        if state is None:
            state = self.initial_state()
        return self.step_values(token, state)

    def _tape_initial_state(self):
        h = self.config.hidden_size
        return [(Tensor(np.zeros(h)), Tensor(np.zeros(h))) for _ in range(self.config.n_layers)]

    def _step_tape(self, x, state):
        new_state = []
        for layer, (h_prev, c_prev) in enumerate(state):
            z = concat(x, h_prev)
            i = sigmoid(add(matmul(z, self.store[f"lstm{layer}.Wi"]), self.store[f"lstm{layer}.bi"]))
            f = sigmoid(add(matmul(z, self.store[f"lstm{layer}.Wf"]), self.store[f"lstm{layer}.bf"]))
            g = tanh(add(matmul(z, self.store[f"lstm{layer}.Wg"]), self.store[f"lstm{layer}.bg"]))
            o = sigmoid(add(matmul(z, self.store[f"lstm{layer}.Wo"]), self.store[f"lstm{layer}.bo"]))
            c = add(mul_elementwise(f, c_prev), mul_elementwise(i, g))
            h = mul_elementwise(o, tanh(c))
            new_state.append((h, c))
            x = h
        logits = add(matmul(x, self.store["out_w"]), self.store["out_b"])
        return logits, new_state

    def consume(self, tokens, state=None):
        """Feed a token sequence; return (final next-token probs, state)."""
        if state is None:
            state = self.initial_state()
        probs = None
        for t in np.asarray(tokens).tolist():
            probs, state = self.step_values(t, state)
        return probs, state

    # ---- scoring ---------------------------------------------------------

    _role_masks = None

    def community_members(self, cluster, role):
        """Cluster members eligible for the given link role.

        On bipartite registries, sources must come from the source
        namespace and destinations from the destination namespace.
        """
        members = self.cluster.members(cluster)
        if not self.bipartite or self._role_masks is None:
            return members
        mask = self._role_masks[0] if role == "source" else self._role_masks[1]
        return members[mask[members]]

    def bind_roles(self, network):
        """Record which registry indices may act as sources/destinations."""
        if not network.bipartite:
            self._role_masks = None
            return
        src_mask = np.zeros(self.n_nodes, dtype=bool)
        dst_mask = np.zeros(self.n_nodes, dtype=bool)
        src_mask[network.source_universe()] = True
        dst_mask[network.dest_universe()] = True
        self._role_masks = (src_mask, dst_mask)

    def pair_grid(self, src_cluster, dst_cluster):
        """Candidate links of a community pair with their sampling weights.

        Returns (src_members, dst_members, probs) where probs is the
        softmax of embedding dot products over all non-self candidate
        pairs, or None when the pair has no candidates.
        """
        m1 = self.community_members(src_cluster, "source")
        m2 = self.community_members(dst_cluster, "destination")
        if len(m1) == 0 or len(m2) == 0:
            return None
        emb = self.cluster.embedding.values
        w = emb[m1] @ emb[m2].T
        selfpair = m1[:, None] == m2[None, :]
        if selfpair.all():
            return None
        w = np.where(selfpair, -np.inf, w)
        z = np.exp(w - w[~selfpair].max())
        probs = z / z.sum()
        return m1, m2, probs

    def score_pairs(self, pairs, context_tokens):
        """Scores in [0, 1] for (src, dst) index pairs.

        Each score is the next-token probability of the pair's community
        token (after consuming the training-suffix context) times the
        pair's normalized weight inside its community-pair grid.
        """
        tokens = np.asarray(context_tokens)
        context = tokens[-min(self.config.chunk_size, len(tokens)):]
        probs, _ = self.consume(context)
        grids: dict[tuple[int, int], object] = {}
        assignment = self.cluster.assignment
        scores = np.zeros(len(pairs))
        for i, (u, v) in enumerate(pairs):
            u, v = int(u), int(v)
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(f"pair ({u}, {v}) outside the node registry")
            cu, cv = int(assignment[u]), int(assignment[v])
            key = (cu, cv)
            if key not in grids:
                grids[key] = self.pair_grid(cu, cv)
            grid = grids[key]
            if grid is None:
                continue
            m1, m2, w = grid
            iu = np.searchsorted(m1, u)
            iv = np.searchsorted(m2, v)
            if iu >= len(m1) or m1[iu] != u or iv >= len(m2) or m2[iv] != v:
                continue  # role-ineligible endpoint; no candidate weight
            scores[i] = probs[self.alphabet.encode(cu, cv)] * w[iu, iv]
        return scores


def sequence_loss(model, tokens, chunk_start, chunk_size, stride):
    """Mean next-token cross-entropy over one chunk.

    The preceding window is tokens[start : start+H]; the succeeding
    window is tokens[start+s : start+s+H], clipped at the sequence end.
    Position j consumes preceding[j] and is scored against succeeding[j].
    """
    tokens = np.asarray(tokens)
    n = len(tokens)
    inputs = tokens[chunk_start:chunk_start + chunk_size]
    targets = tokens[chunk_start + stride:chunk_start + stride + chunk_size]
    n_pairs = min(len(inputs), len(targets))
    if n_pairs <= 0:
        raise ValueError(
            f"chunk at {chunk_start} (H={chunk_size}, s={stride}) yields no (input, target) pairs "
            f"in a sequence of {n} tokens"
        )
    chunk_embs = embedding_lookup(model.store["token_embedding"], inputs[:n_pairs])
    state = model._tape_initial_state()
    total = None
    for j in range(n_pairs):
        x = embedding_lookup(chunk_embs, j)
        logits, state = model._step_tape(x, state)
        ce = softmax_cross_entropy(logits, int(targets[j]))
        total = ce if total is None else add(total, ce)
    return scalar_scale(total, 1.0 / n_pairs), n_pairs


def combined_loss(seq_loss, clus_loss, alpha):
    """(1 - alpha) * sequence loss + alpha * clustering loss."""
    return add(scalar_scale(seq_loss, 1.0 - alpha), scalar_scale(clus_loss, alpha))


def training_step_loss(model, tokens, chunk_start):
    """Build the full per-step objective on a fresh tape.

    The clustering term enters as the mean distance over nodes so its
    scale does not grow with the registry; assignments are constants
    within the step.
    """
    cfg = model.config
    seq_t, _ = sequence_loss(model, tokens, chunk_start, cfg.chunk_size, cfg.stride)
    clus_mean = scalar_scale(clustering_loss(model.cluster), 1.0 / model.n_nodes)
    return combined_loss(seq_t, clus_mean, cfg.alpha), seq_t, clus_mean


def train(network, config):
    """Run the joint training loop; returns (model, loss trace).

    The trace holds one row per epoch: (epoch, mean sequence loss, mean
    clustering distance, mean combined loss).  Cluster assignments are
    recomputed between epochs and once more after the last epoch, so the
    returned tokenization map reflects the final embeddings.
    """
    config.validate()
    if not isinstance(network, TemporalNetwork):
        raise TypeError("train expects a TemporalNetwork")
    if network.n_links < config.stride + 1:
        raise ValueError(
            f"need at least stride+1={config.stride + 1} links to form a training pair, "
            f"got {network.n_links}"
        )
    model = GlsmModel(
        config, network.n_nodes, network.bipartite, registry_hash(network), node_ids=network.node_ids
    )
    model.bind_roles(network)
    rng = model._rng_chunks
    trace = []
    for epoch in range(config.epochs):
        assign_clusters(model.cluster)
        tokens = tokenize_sequence(network, model.cluster, model.alphabet)
        steps = config.steps_per_epoch or math.ceil(len(tokens) / config.chunk_size)
        seq_sum = clus_sum = total_sum = 0.0
        for _ in range(steps):
            start = int(rng.integers(0, len(tokens) - config.stride))
            total, seq_t, clus_t = training_step_loss(model, tokens, start)
            model.store.zero_grads()
            backward(total)
            model.store.adam_step(lr=config.learning_rate)
            seq_sum += seq_t.item()
            clus_sum += clus_t.item()
            total_sum += total.item()
        trace.append((epoch, seq_sum / steps, clus_sum / steps, total_sum / steps))
    assign_clusters(model.cluster)
    return model, trace


def final_cluster_assignment(n_train_links, config, node_ids):
    """The cluster partition a run with this config ends with.

    The clustering objective never reads the link data (node embeddings
    receive gradients only through the distance term), so the embedding
    and center trajectory — and with it the final tokenization map — can
    be replayed exactly, Adam step for Adam step, without training the
    sequence model.  Planted-pattern datasets use this to lay their
    communities where a matching run's final tokenizer will find them.
    """
    config.validate()
    store = ParameterStore()
    emb = initial_embedding_values(node_ids, config.embedding_dim, config.seed)
    cen = initial_center_values(emb, node_ids, config.n_clusters, config.seed)
    cluster = ClusterModel(store.add("node_embedding", emb), store.add("cluster_centers", cen))
    n_nodes = len(node_ids)
    steps = config.steps_per_epoch or math.ceil(n_train_links / config.chunk_size)
    for _ in range(config.epochs):
        assign_clusters(cluster)
        for _ in range(steps):
            # Mirrors the gradient flow of the combined objective exactly.
            clus_mean = scalar_scale(clustering_loss(cluster), 1.0 / n_nodes)
            loss = scalar_scale(clus_mean, config.alpha)
            store.zero_grads()
            backward(loss)
            store.adam_step(lr=config.learning_rate)
    assign_clusters(cluster)
    return cluster.assignment.copy()


# ---- checkpoint serialization -------------------------------------------


class CheckpointError(ValueError):
    """Unreadable, version-mismatched, or registry-mismatched checkpoint."""


def save_checkpoint(path, model):
    """Write a canonical binary checkpoint (identical bytes per state)."""
    params = model.store.snapshot()
    manifest = []
    offset = 0
    for name in sorted(params):
        arr = params[name]
        nbytes = arr.size * 8
        manifest.append([name, list(arr.shape), offset, nbytes])
        offset += nbytes
    header = {
        "format_version": _FORMAT_VERSION,
        "config": asdict(model.config),
        "n_nodes": model.n_nodes,
        "bipartite": model.bipartite,
        "registry_hash": model.registry_hash,
        "params": manifest,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in sorted(params):
            fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Rebuild a model from a checkpoint; optimizer moments start fresh."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise CheckpointError(f"{path}: not a linkseq checkpoint")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format_version") != _FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: checkpoint format version {header.get('format_version')} "
                f"is not supported (expected {_FORMAT_VERSION})"
            )
        config = TrainConfig(**header["config"])
        model = GlsmModel(config, header["n_nodes"], header["bipartite"], header["registry_hash"])
        values = {}
        for name, shape, _, nbytes in header["params"]:
            buf = fh.read(nbytes)
            if len(buf) != nbytes:
                raise CheckpointError(f"{path}: truncated parameter block for {name}")
            values[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    model.store.load_values(values)
    assign_clusters(model.cluster)
    return model


# ---- estimator ------------------------------------------------------------


class GLSM(BaseEstimator):
    """Generative link-sequence model with a fit/predict estimator surface.

    fit() consumes a TemporalNetwork (the training split); afterwards
    predict_scores() ranks candidate (src, dst) index pairs and
    generate() samples a set of predicted future links.
    """

    def __init__(
        self,
        n_clusters=16,
        alpha=0.5,
        epochs=20,
        chunk_size=64,
        stride=1,
        hidden_size=128,
        n_layers=2,
        embedding_dim=32,
        token_embedding_dim=32,
        learning_rate=2e-3,
        steps_per_epoch=None,
        random_state=0,
    ):
        self.n_clusters = n_clusters
        self.alpha = alpha
        self.epochs = epochs
        self.chunk_size = chunk_size
        self.stride = stride
        self.hidden_size = hidden_size
        self.n_layers = n_layers
        self.embedding_dim = embedding_dim
        self.token_embedding_dim = token_embedding_dim
        self.learning_rate = learning_rate
        self.steps_per_epoch = steps_per_epoch
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            n_clusters=self.n_clusters,
            alpha=self.alpha,
            epochs=self.epochs,
            chunk_size=self.chunk_size,
            stride=self.stride,
            hidden_size=self.hidden_size,
            n_layers=self.n_layers,
            embedding_dim=self.embedding_dim,
            token_embedding_dim=self.token_embedding_dim,
            learning_rate=self.learning_rate,
            steps_per_epoch=self.steps_per_epoch,
            seed=self.random_state,
        )

    def fit(self, network, y=None):
        self.model_, self.loss_trace_ = train(network, self._config())
        self.train_network_ = network
        self.train_tokens_ = tokenize_sequence(network, self.model_.cluster, self.model_.alphabet)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this GLSM instance is not fitted yet; call fit first")

    def predict_scores(self, pairs):
        self._check_fitted()
        return self.model_.score_pairs(pairs, self.train_tokens_)

    def generate(self, rounds, seed=None, strategy="weighted"):
        self._check_fitted()
        cfg = _generator.GenerationConfig(
            rounds=rounds,
            seed=self.random_state if seed is None else seed,
            strategy=strategy,
        )
        return _generator.generate(self.model_, self.train_network_, cfg)

    def save(self, path):
        self._check_fitted()
        save_checkpoint(path, self.model_)

    @classmethod
    def from_checkpoint(cls, path, network):
        """Rebind a saved model to its network for scoring/generation."""
        model = load_checkpoint(path)
        if model.registry_hash != registry_hash(network):
            raise CheckpointError(
                "checkpoint was trained on a different node registry than the given network"
            )
        cfg = model.config
        est = cls(
            n_clusters=cfg.n_clusters,
            alpha=cfg.alpha,
            epochs=cfg.epochs,
            chunk_size=cfg.chunk_size,
            stride=cfg.stride,
            hidden_size=cfg.hidden_size,
            n_layers=cfg.n_layers,
            embedding_dim=cfg.embedding_dim,
            token_embedding_dim=cfg.token_embedding_dim,
            learning_rate=cfg.learning_rate,
            steps_per_epoch=cfg.steps_per_epoch,
            random_state=cfg.seed,
        )
        model.bind_roles(network)
        est.model_ = model
        est.loss_trace_ = []
        est.train_network_ = network
        est.train_tokens_ = tokenize_sequence(network, model.cluster, model.alphabet)
        return est

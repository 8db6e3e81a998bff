"""Seeded synthetic temporal networks for tests, demos and smoke runs.

make_cyclic_network plants a deterministic community-level cycle:
links rotate through community pairs (c0 -> c1), (c1 -> c2), ...,
with endpoints drawn uniformly inside the communities.  The clustering
trajectory of a training run never depends on the link data, so the
partition a run ends with is replayable up front; the planted
communities are laid out exactly there, which makes the community cycle
discoverable by construction and the known generating cycle an oracle
for sequence-model tests.

make_social_stream is a small message-stream surrogate with heavy-tailed
activity and repeat contacts, shaped like desk-scale slices of online
social datasets.
"""

from __future__ import annotations

import math

import numpy as np

from .ingest import TemporalNetwork
from .model import TrainConfig, final_cluster_assignment

__all__ = ["make_cyclic_network", "cycle_respecting_fraction", "make_social_stream"]


def make_cyclic_network(
    seed,
    n_nodes=60,
    n_communities=3,
    n_links=600,
    train_ratio=0.7,
    **train_overrides,
):
    """Build the planted-cycle network; returns (network, communities).

    ``communities`` is the planted per-node community array: the final
    cluster partition of a training run with this seed, K=n_communities
    and matching hyperparameters (override via ``train_overrides``) on a
    train split of floor(train_ratio * n_links) links.
    """
    config = TrainConfig(n_clusters=n_communities, seed=seed, **train_overrides)
    n_train = int(math.floor(train_ratio * n_links + 1e-9))
    width = len(str(n_nodes - 1))
    node_ids = [f"n{i:0{width}d}" for i in range(n_nodes)]
    communities = final_cluster_assignment(n_train, config, node_ids)
    members = [np.flatnonzero(communities == c) for c in range(n_communities)]
    for c, m in enumerate(members):
        if len(m) == 0:
            raise ValueError(f"seed {seed} yields an empty planted community {c}; pick another seed")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x1CCE]))
    src = np.empty(n_links, dtype=np.int64)
    dst = np.empty(n_links, dtype=np.int64)
    for t in range(n_links):
        phase = t % n_communities
        src[t] = rng.choice(members[phase])
        dst[t] = rng.choice(members[(phase + 1) % n_communities])
    network = TemporalNetwork(node_ids, src, dst, np.arange(n_links, dtype=np.int64))
    return network, communities


def cycle_respecting_fraction(pairs, communities, n_communities=3):
    """Fraction of (src, dst) pairs that follow the planted cycle."""
    pairs = list(pairs)
    if not pairs:
        return 0.0
    good = sum(
        1
        for u, v in pairs
        if (communities[u] + 1) % n_communities == communities[v]
    )
    return good / len(pairs)


def make_social_stream(
    seed,
    n_nodes=300,
    n_links=2000,
    reciprocate_prob=0.3,
    repeat_prob=0.2,
):
    """Message-stream surrogate with the temporal texture of online DM
    networks: staggered user arrivals and churn (the active population
    drifts over the stream), reciprocated messages, bursty repeat
    contacts, and heavy-tailed activity among currently active users."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x50C1]))
    arrival = rng.uniform(0, 0.9 * n_links, size=n_nodes).astype(np.int64)
    lifespan = rng.exponential(0.15 * n_links, size=n_nodes).astype(np.int64) + n_links // 20
    arrival[0] = 0
    lifespan[0] = n_links  # at least one user spans the whole stream
    popularity = 1.0 / (1.0 + rng.permutation(n_nodes).astype(np.float64)) ** 1.1

    def draw_active(t, exclude=None):
        active = np.flatnonzero((arrival <= t) & (t < arrival + lifespan))
        if exclude is not None:
            active = active[active != exclude]
        if len(active) == 0:
            return exclude if exclude is not None else 0
        w = popularity[active]
        return int(rng.choice(active, p=w / w.sum()))

    history: list[tuple[int, int]] = []
    unreciprocated: list[tuple[int, int]] = []
    src = np.empty(n_links, dtype=np.int64)
    dst = np.empty(n_links, dtype=np.int64)
    for t in range(n_links):
        r = rng.random()
        if r < reciprocate_prob and unreciprocated:
            pos = max(len(unreciprocated) - 1 - int(rng.geometric(0.25) - 1), 0)
            a, b = unreciprocated.pop(pos)
            u, v = b, a
        elif r < reciprocate_prob + repeat_prob and history:
            pos = max(len(history) - 1 - int(rng.geometric(0.1) - 1), 0)
            u, v = history[pos]
        else:
            u = draw_active(t)
            v = draw_active(t, exclude=u)
            if u == v:
                v = (u + 1) % n_nodes
            unreciprocated.append((u, v))
        history.append((u, v))
        src[t], dst[t] = u, v
    node_ids = [f"u{i}" for i in range(n_nodes)]
    return TemporalNetwork(node_ids, src, dst, np.arange(n_links, dtype=np.int64))

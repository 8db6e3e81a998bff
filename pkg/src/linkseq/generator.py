"""Two-step sampling of candidate future links.

Each round draws the next community-pair token from the model's
conditional distribution, then draws a concrete (source, destination)
pair inside that community pair, weighted by embedding dot products.
Links already observed (or already generated) are rejected but still
consume their round, and the sampled token always becomes the next
recurrent input, so a run costs exactly R steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tokenizer import tokenize_sequence

__all__ = [
    "GenerationConfig",
    "GeneratedLink",
    "GeneratedLinkSet",
    "sample_next_token",
    "generate",
]

_STRATEGIES = ("weighted", "greedy")


@dataclass(frozen=True)
class GenerationConfig:
    rounds: int
    seed: int = 0
    strategy: str = "weighted"

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.strategy not in _STRATEGIES:
            raise ValueError(f"strategy must be one of {_STRATEGIES}, got {self.strategy!r}")


@dataclass(frozen=True)
class GeneratedLink:
    source: int
    destination: int
    round: int
    token_prob: float


@dataclass
class GeneratedLinkSet:
    """Ordered, duplicate-free links disjoint from the observed set."""

    links: list[GeneratedLink] = field(default_factory=list)

    def __len__(self):
        return len(self.links)

    def pairs(self):
        return [(l.source, l.destination) for l in self.links]

    def pairs_up_to_round(self, max_round):
        return [(l.source, l.destination) for l in self.links if l.round <= max_round]


def sample_next_token(distribution, rng):
    """Draw one token index proportionally to the distribution."""
    p = np.asarray(distribution, dtype=np.float64)
    total = p.sum()
    if total <= 0.0:
        raise ValueError("cannot sample from an all-zero distribution")
    return int(rng.choice(len(p), p=p / total))


def generate(model, train_network, config):
    """Run the sampling loop against a trained model and its train split.

    The seed token is drawn uniformly from the training token sequence;
    every round performs one recurrent step, one token draw, and one
    within-community pair draw.  At most one link is emitted per round.
    """
    rng = np.random.default_rng(config.seed)
    tokens = tokenize_sequence(train_network, model.cluster, model.alphabet)
    if len(tokens) == 0:
        raise ValueError("cannot generate from an empty training sequence")
    observed = set(zip(train_network.src.tolist(), train_network.dst.tolist()))

    current = int(tokens[rng.integers(len(tokens))])
    state = model.initial_state()
    out = GeneratedLinkSet()
    emitted: set[tuple[int, int]] = set()
    for rnd in range(1, config.rounds + 1):
        probs, state = model.step_values(current, state)
        token = sample_next_token(probs, rng)
        token_prob = float(probs[token])
        src_cluster, dst_cluster = model.alphabet.decode(token)
        grid = model.pair_grid(src_cluster, dst_cluster)
        current = token
        if grid is None:
            continue  # empty community pair: the round is consumed
        m1, m2, w = grid
        if config.strategy == "greedy":
            flat = int(np.argmax(w))
        else:
            flat = int(rng.choice(w.size, p=w.ravel()))
        u = int(m1[flat // len(m2)])
        v = int(m2[flat % len(m2)])
        if (u, v) in observed or (u, v) in emitted:
            continue
        emitted.add((u, v))
        out.links.append(GeneratedLink(u, v, rnd, token_prob))
    return out


def write_generated(path, generated, network, delimiter=","):
    """Emit generated links as text: source, destination, round, token_prob."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(delimiter.join(("source", "destination", "round", "token_prob")) + "\n")
        for link in generated.links:
            fh.write(
                delimiter.join(
                    (
                        network.external_id(link.source),
                        network.external_id(link.destination),
                        str(link.round),
                        repr(link.token_prob),
                    )
                )
                + "\n"
            )

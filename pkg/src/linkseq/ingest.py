"""Edge-list ingestion: parsing, rating binarization, chronological
network construction, windowing, and train/test splitting.

Input files are delimited text with four columns
(``source, destination, rating, timestamp``); lines starting with ``#``
and blank lines are ignored.  All downstream splitting is positional on
the chronologically sorted link sequence, never random, so every
pipeline stage is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParseError",
    "TemporalEdgeRecord",
    "TemporalNetwork",
    "WindowSpec",
    "SplitSpec",
    "UNKNOWN_NODE_ID",
    "parse_edge_list",
    "binarize_ratings",
    "build_network",
    "make_windows",
    "split",
    "write_edge_list",
    "network_summary",
]

UNKNOWN_NODE_ID = "<unknown>"

_SOURCE_PREFIX = "s:"
_DEST_PREFIX = "d:"


class ParseError(ValueError):
    """Malformed edge-list line; carries the 1-based line number."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class TemporalEdgeRecord:
    source: str
    destination: str
    rating: float
    timestamp: int


@dataclass(frozen=True)
class SplitSpec:
    """Chronological training fraction gamma in (0, 1)."""

    training_ratio: float

    def __post_init__(self):
        if not 0.0 < self.training_ratio < 1.0:
            raise ValueError(f"training_ratio must lie in (0, 1), got {self.training_ratio}")


@dataclass(frozen=True)
class WindowSpec:
    """Either fixed-link-count windows or N equal-time-span chunks."""

    mode: str
    window_size: int | None = None
    chunk_count: int | None = None

    def __post_init__(self):
        if self.mode == "by-count":
            if self.window_size is None or self.chunk_count is not None:
                raise ValueError("by-count windows take window_size only")
            if self.window_size < 1:
                raise ValueError("window_size must be positive")
        elif self.mode == "by-equal-timespan":
            if self.chunk_count is None or self.window_size is not None:
                raise ValueError("by-equal-timespan windows take chunk_count only")
            if self.chunk_count < 1:
                raise ValueError("chunk_count must be positive")
        else:
            raise ValueError(f"unknown window mode {self.mode!r}")

    @classmethod
    def by_count(cls, window_size):
        return cls("by-count", window_size=int(window_size))

    @classmethod
    def by_timespan(cls, chunk_count):
        return cls("by-equal-timespan", chunk_count=int(chunk_count))


class TemporalNetwork:
    """A fixed node registry plus a chronologically ordered link sequence.

    The registry maps external identifiers to dense indices in first-
    appearance order over the sorted records.  Windows carved out of a
    network share its registry, so cluster identities remain comparable
    across windows.  In bipartite mode, source and destination
    identifiers live in separate namespaces and the original identifier
    is recoverable via external_id().
    """

    def __init__(self, node_ids, src, dst, ts, bipartite=False):
        self.node_ids = tuple(node_ids)
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.ts = np.asarray(ts, dtype=np.int64)
        self.bipartite = bool(bipartite)
        if len(self.src) != len(self.dst) or len(self.src) != len(self.ts):
            raise ValueError("src, dst and ts must have equal length")
        if len(self.src) and max(self.src.max(), self.dst.max()) >= len(self.node_ids):
            raise ValueError("link endpoint index outside the node registry")
        self._index = {nid: i for i, nid in enumerate(self.node_ids)}

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_links(self):
        return len(self.src)

    def external_id(self, idx):
        nid = self.node_ids[idx]
        if self.bipartite:
            return nid[len(_SOURCE_PREFIX):]
        return nid

    def pair_indices(self, source, destination):
        """Registry indices for an external (source, destination) pair.

        Unknown identifiers fall back to the reserved unknown node when
        the registry carries one, and raise KeyError otherwise.
        """
        skey = _SOURCE_PREFIX + str(source) if self.bipartite else str(source)
        dkey = _DEST_PREFIX + str(destination) if self.bipartite else str(destination)
        return self._lookup(skey), self._lookup(dkey)

    def _lookup(self, key):
        idx = self._index.get(key)
        if idx is None:
            idx = self._index.get(UNKNOWN_NODE_ID)
            if idx is None:
                raise KeyError(f"node {key!r} not in registry (no unknown node reserved)")
        return idx

    def source_universe(self):
        """Indices eligible as link sources (namespace-aware)."""
        if not self.bipartite:
            return np.arange(self.n_nodes, dtype=np.int64)
        return np.array(
            [i for i, nid in enumerate(self.node_ids) if nid.startswith(_SOURCE_PREFIX)],
            dtype=np.int64,
        )

    def dest_universe(self):
        if not self.bipartite:
            return np.arange(self.n_nodes, dtype=np.int64)
        return np.array(
            [i for i, nid in enumerate(self.node_ids) if nid.startswith(_DEST_PREFIX)],
            dtype=np.int64,
        )

    def link_pairs(self):
        """Distinct (src, dst) index pairs, in first-appearance order."""
        seen = {}
        for s, d in zip(self.src.tolist(), self.dst.tolist()):
            seen.setdefault((s, d), None)
        return list(seen)

    def slice_links(self, lo, hi):
        return TemporalNetwork(
            self.node_ids,
            self.src[lo:hi].copy(),
            self.dst[lo:hi].copy(),
            self.ts[lo:hi].copy(),
            bipartite=self.bipartite,
        )

    def to_records(self):
        return [
            TemporalEdgeRecord(self.external_id(s), self.external_id(d), 1.0, int(t))
            for s, d, t in zip(self.src, self.dst, self.ts)
        ]

    def __eq__(self, other):
        if not isinstance(other, TemporalNetwork):
            return NotImplemented
        return (
            self.node_ids == other.node_ids
            and self.bipartite == other.bipartite
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.ts, other.ts)
        )


def parse_edge_list(path, delimiter=","):
    """Read a 4-column delimited edge list into records, in file order."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(delimiter)]
            if len(fields) != 4:
                raise ParseError(lineno, f"expected 4 fields, got {len(fields)}")
            source, destination, rating_s, ts_s = fields
            if not source or not destination:
                raise ParseError(lineno, "empty source or destination identifier")
            try:
                rating = float(rating_s)
            except ValueError:
                raise ParseError(lineno, f"non-numeric rating {rating_s!r}") from None
            try:
                timestamp = int(ts_s)
            except ValueError:
                raise ParseError(lineno, f"non-integer timestamp {ts_s!r}") from None
            if timestamp < 0:
                raise ParseError(lineno, f"negative timestamp {timestamp}")
            records.append(TemporalEdgeRecord(source, destination, rating, timestamp))
    return records


def binarize_ratings(records, threshold=0.0):
    """Map ratings above the threshold to 1 and drop the rest."""
    return [
        TemporalEdgeRecord(r.source, r.destination, 1.0, r.timestamp)
        for r in records
        if r.rating > threshold
    ]


def build_network(records, bipartite=False, reserve_unknown=False):
    """Sort records chronologically (stable) and build the node registry.

    With ``reserve_unknown`` the registry carries one extra node at index 0
    that absorbs identifiers unseen at build time.
    """
    if not records:
        raise ValueError("cannot build a network from zero records")
    ordered = sorted(records, key=lambda r: r.timestamp)
    index: dict[str, int] = {}
    node_ids: list[str] = []
    if reserve_unknown:
        index[UNKNOWN_NODE_ID] = 0
        node_ids.append(UNKNOWN_NODE_ID)

    def intern(key):
        idx = index.get(key)
        if idx is None:
            idx = len(node_ids)
            index[key] = idx
            node_ids.append(key)
        return idx

    src = np.empty(len(ordered), dtype=np.int64)
    dst = np.empty(len(ordered), dtype=np.int64)
    ts = np.empty(len(ordered), dtype=np.int64)
    for i, r in enumerate(ordered):
        skey = _SOURCE_PREFIX + r.source if bipartite else r.source
        dkey = _DEST_PREFIX + r.destination if bipartite else r.destination
        src[i] = intern(skey)
        dst[i] = intern(dkey)
        ts[i] = r.timestamp
    return TemporalNetwork(node_ids, src, dst, ts, bipartite=bipartite)


def make_windows(network, spec):
    """Carve the link sequence into windows sharing the global registry.

    by-count: consecutive disjoint windows of window_size links, any
    trailing partial window dropped.  by-equal-timespan: chunk_count
    windows over [t_min, t_max] with equal time extents; link counts may
    differ and windows may be empty.
    """
    n = network.n_links
    if n == 0:
        raise ValueError("cannot window an empty network")
    if spec.mode == "by-count":
        w = spec.window_size
        if w > n:
            raise ValueError(f"window_size {w} exceeds total link count {n}")
        return [network.slice_links(i * w, (i + 1) * w) for i in range(n // w)]

    k = spec.chunk_count
    t_min, t_max = int(network.ts[0]), int(network.ts[-1])
    if t_min == t_max:
        # Degenerate time span: everything lands in the first window.
        return [network.slice_links(0, n)] + [network.slice_links(n, n) for _ in range(k - 1)]
    span = t_max - t_min
    # Half-open boundaries at t_min + span*i/k; the last window keeps t_max.
    bounds = [0]
    for i in range(1, k):
        bounds.append(int(np.searchsorted(network.ts, t_min + span * i / k, side="left")))
    bounds.append(n)
    return [network.slice_links(bounds[i], bounds[i + 1]) for i in range(k)]


def split(window, spec):
    """Positional split: first floor(gamma * n) links train, rest test."""
    n = window.n_links
    if n < 2:
        raise ValueError(f"cannot split a window with {n} links")
    cut = int(math.floor(spec.training_ratio * n + 1e-9))
    if cut == 0:
        raise ValueError(f"training ratio {spec.training_ratio} leaves an empty training set")
    if cut == n:
        raise ValueError(f"training ratio {spec.training_ratio} leaves an empty testing set")
    return window.slice_links(0, cut), window.slice_links(cut, n)


def write_edge_list(network, path, delimiter=","):
    """Emit the normalized (binarized, sorted) edge list for reproducibility."""
    with open(path, "w", encoding="utf-8") as fh:
        for s, d, t in zip(network.src, network.dst, network.ts):
            fh.write(
                delimiter.join(
                    (network.external_id(int(s)), network.external_id(int(d)), "1", str(int(t)))
                )
                + "\n"
            )


def network_summary(network):
    """Dataset statistics: cardinalities, density, covered time span."""
    n = network.n_links
    src_card = len(set(network.src.tolist()))
    dst_card = len(set(network.dst.tolist()))
    distinct = len(network.link_pairs())
    if network.bipartite:
        denom = len(network.source_universe()) * len(network.dest_universe())
    else:
        denom = network.n_nodes**2
    t_min = int(network.ts[0]) if n else 0
    t_max = int(network.ts[-1]) if n else 0
    return {
        "total_links": n,
        "distinct_links": distinct,
        "node_number": network.n_nodes,
        "source_cardinality": src_card,
        "destination_cardinality": dst_card,
        "edge_density": (distinct / denom) if denom else 0.0,
        "bipartite": network.bipartite,
        "t_min": t_min,
        "t_max": t_max,
        "days_covered": (t_max - t_min) / 86400.0,
    }

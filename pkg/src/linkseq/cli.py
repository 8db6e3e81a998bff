"""Command-line surface: ingest, train, generate, evaluate, benchmark,
and inspect-clusters subcommands.

Every command reads an optional JSON config file, applies explicit
flags on top, validates the effective configuration (reporting every
violated constraint), echoes it into the output directory, and is
bit-reproducible given the same config and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .baselines import AdamicAdar, JaccardCoefficient, MatrixFactorization
from .evaluation import (
    edge_density,
    hitting_ratio,
    negative_sample,
    rmse,
    roc_auc,
    run_benchmark,
)
from .generator import write_generated
from .ingest import (
    SplitSpec,
    WindowSpec,
    binarize_ratings,
    build_network,
    make_windows,
    network_summary,
    parse_edge_list,
    split,
    write_edge_list,
)
from .model import GLSM
from .tokenizer import cluster_report

__all__ = ["main", "RunConfig"]

_PREDICTOR_NAMES = ("glsm", "jc", "aa", "mf")


@dataclass
class RunConfig:
    """Union of ingest, training, generation and evaluation settings."""

    input: str | None = None
    out_dir: str = "linkseq-out"
    delimiter: str = ","
    bipartite: bool = False
    binarize_threshold: float = 0.0
    window_size: int | None = None
    chunks: int | None = None
    window_index: int = 0
    train_ratio: float = 0.7
    clusters: int = 16
    alpha: float = 0.5
    epochs: int = 20
    chunk_size: int = 64
    stride: int = 1
    hidden_size: int = 128
    layers: int = 2
    embedding_dim: int = 32
    token_embedding_dim: int = 32
    learning_rate: float = 2e-3
    steps_per_epoch: int | None = None
    rounds: int = 1500
    strategy: str = "weighted"
    predictors: str = "glsm,jc,aa,mf"
    seeds: str = "0,1,2,3,4"
    seed: int = 0
    hit_iterations: str = "500,1000,1500,2000,2500,3000"
    checkpoint: str | None = None

    def predictor_list(self):
        return [p.strip() for p in self.predictors.split(",") if p.strip()]

    def seed_list(self):
        return [int(s) for s in self.seeds.split(",") if s.strip()]

    def hit_iteration_list(self):
        return [int(s) for s in self.hit_iterations.split(",") if s.strip()]

    def problems(self, command):
        out = []
        needs_input = command in ("ingest", "train", "generate", "evaluate", "benchmark", "inspect-clusters")
        if needs_input:
            if not self.input:
                out.append("--input is required")
            elif not Path(self.input).exists():
                out.append(f"input file {self.input!r} does not exist")
        if command in ("generate", "evaluate", "inspect-clusters"):
            if not self.checkpoint:
                out.append("--checkpoint is required")
            elif not Path(self.checkpoint).exists():
                out.append(f"checkpoint file {self.checkpoint!r} does not exist")
        if self.window_size is not None and self.chunks is not None:
            out.append("--window-size and --chunks are mutually exclusive")
        if self.window_size is not None and self.window_size < 1:
            out.append("--window-size must be >= 1")
        if self.chunks is not None and self.chunks < 1:
            out.append("--chunks must be >= 1")
        if self.window_index < 0:
            out.append("--window-index must be >= 0")
        if not 0.0 < self.train_ratio < 1.0:
            out.append("--train-ratio must lie in (0, 1)")
        if self.clusters < 1:
            out.append("--clusters must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            out.append("--alpha must lie in [0, 1]")
        if self.epochs < 0:
            out.append("--epochs must be >= 0")
        if self.chunk_size < 2:
            out.append("--chunk-size must be >= 2")
        if not 1 <= self.stride <= self.chunk_size:
            out.append("--stride must satisfy 1 <= stride <= chunk-size")
        if self.hidden_size < 1:
            out.append("--hidden-size must be >= 1")
        if self.layers < 1:
            out.append("--layers must be >= 1")
        if self.embedding_dim < 1 or self.token_embedding_dim < 1:
            out.append("embedding dimensions must be >= 1")
        if self.learning_rate <= 0:
            out.append("--learning-rate must be positive")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            out.append("--steps-per-epoch must be >= 1")
        if command in ("generate", "evaluate", "benchmark") and self.rounds < 1:
            out.append("--rounds must be >= 1")
        if self.strategy not in ("weighted", "greedy"):
            out.append("--strategy must be 'weighted' or 'greedy'")
        unknown = [p for p in self.predictor_list() if p not in _PREDICTOR_NAMES]
        if unknown:
            out.append(f"unknown predictors: {', '.join(unknown)} (choose from {', '.join(_PREDICTOR_NAMES)})")
        if not self.predictor_list():
            out.append("--predictors must name at least one predictor")
        try:
            if not self.seed_list():
                out.append("--seeds must name at least one seed")
        except ValueError:
            out.append("--seeds must be a comma-separated list of integers")
        try:
            if any(i < 1 for i in self.hit_iteration_list()):
                out.append("--hit-iterations entries must be >= 1")
        except ValueError:
            out.append("--hit-iterations must be a comma-separated list of integers")
        return out


def _add_config_flags(parser):
    parser.add_argument("--config", help="JSON config file; explicit flags override its values")
    parser.add_argument("--input", help="edge list file (source, destination, rating, timestamp)")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--delimiter")
    parser.add_argument("--bipartite", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--binarize-threshold", dest="binarize_threshold", type=float)
    parser.add_argument("--window-size", dest="window_size", type=int)
    parser.add_argument("--chunks", type=int)
    parser.add_argument("--window-index", dest="window_index", type=int)
    parser.add_argument("--train-ratio", dest="train_ratio", type=float)
    parser.add_argument("--clusters", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--chunk-size", dest="chunk_size", type=int)
    parser.add_argument("--stride", type=int)
    parser.add_argument("--hidden-size", dest="hidden_size", type=int)
    parser.add_argument("--layers", type=int)
    parser.add_argument("--embedding-dim", dest="embedding_dim", type=int)
    parser.add_argument("--token-embedding-dim", dest="token_embedding_dim", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--steps-per-epoch", dest="steps_per_epoch", type=int)
    parser.add_argument("--rounds", type=int)
    parser.add_argument("--strategy")
    parser.add_argument("--predictors")
    parser.add_argument("--seeds")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--hit-iterations", dest="hit_iterations")
    parser.add_argument("--checkpoint")


def _effective_config(args):
    cfg = RunConfig()
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_values = json.load(fh)
        known = {f.name for f in fields(RunConfig)}
        bad = sorted(set(file_values) - known)
        if bad:
            raise ValueError(f"unknown config keys: {', '.join(bad)}")
        for key, value in file_values.items():
            setattr(cfg, key, value)
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            setattr(cfg, f.name, flag_value)
    return cfg


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _echo_config(cfg, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "config.json", asdict(cfg))


def _load_network(cfg):
    records = parse_edge_list(cfg.input, delimiter=cfg.delimiter)
    records = binarize_ratings(records, threshold=cfg.binarize_threshold)
    if not records:
        raise ValueError("input contains no positive links after binarization")
    return build_network(records, bipartite=cfg.bipartite)


def _select_window(network, cfg):
    if cfg.window_size is not None:
        spec = WindowSpec.by_count(cfg.window_size)
    elif cfg.chunks is not None:
        spec = WindowSpec.by_timespan(cfg.chunks)
    else:
        spec = WindowSpec.by_count(network.n_links)
    windows = make_windows(network, spec)
    if not 0 <= cfg.window_index < len(windows):
        raise ValueError(f"--window-index {cfg.window_index} out of range ({len(windows)} windows)")
    return windows[cfg.window_index]


def _glsm_from_config(cfg, seed=None):
    return GLSM(
        n_clusters=cfg.clusters,
        alpha=cfg.alpha,
        epochs=cfg.epochs,
        chunk_size=cfg.chunk_size,
        stride=cfg.stride,
        hidden_size=cfg.hidden_size,
        n_layers=cfg.layers,
        embedding_dim=cfg.embedding_dim,
        token_embedding_dim=cfg.token_embedding_dim,
        learning_rate=cfg.learning_rate,
        steps_per_epoch=cfg.steps_per_epoch,
        random_state=cfg.seed if seed is None else seed,
    )


def _write_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def cmd_ingest(cfg):
    network = _load_network(cfg)
    out_dir = Path(cfg.out_dir)
    _echo_config(cfg, out_dir)
    write_edge_list(network, out_dir / "normalized.csv", delimiter=cfg.delimiter)
    summary = network_summary(network)
    _write_json(out_dir / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True, indent=2))
    print(f"normalized edge list: {out_dir / 'normalized.csv'}")
    return 0


def cmd_train(cfg):
    network = _load_network(cfg)
    window = _select_window(network, cfg)
    train_net, _ = split(window, SplitSpec(cfg.train_ratio))
    est = _glsm_from_config(cfg).fit(train_net)
    out_dir = Path(cfg.out_dir)
    _echo_config(cfg, out_dir)
    est.save(out_dir / "checkpoint.lsq")
    rows = [["epoch", "seq_loss", "clus_loss", "combined"]]
    rows += [[e, repr(s), repr(c), repr(t)] for e, s, c, t in est.loss_trace_]
    _write_csv(out_dir / "loss_trace.csv", rows)
    final = est.loss_trace_[-1][3] if est.loss_trace_ else float("nan")
    print(f"trained on {train_net.n_links} links ({network.n_nodes} registered nodes)")
    print(f"final combined loss: {final:.6f}")
    print(f"checkpoint: {out_dir / 'checkpoint.lsq'}")
    return 0


def _restore(cfg):
    network = _load_network(cfg)
    window = _select_window(network, cfg)
    train_net, test_net = split(window, SplitSpec(cfg.train_ratio))
    est = GLSM.from_checkpoint(cfg.checkpoint, train_net)
    return network, train_net, test_net, est


def cmd_generate(cfg):
    _, train_net, _, est = _restore(cfg)
    delta = est.generate(cfg.rounds, seed=cfg.seed, strategy=cfg.strategy)
    out_dir = Path(cfg.out_dir)
    _echo_config(cfg, out_dir)
    write_generated(out_dir / "generated.csv", delta, train_net, delimiter=cfg.delimiter)
    print(f"generated {len(delta)} candidate links in {cfg.rounds} rounds")
    print(f"link set: {out_dir / 'generated.csv'}")
    return 0


def cmd_evaluate(cfg):
    _, train_net, test_net, est = _restore(cfg)
    iterations = sorted(cfg.hit_iteration_list())
    rounds = max(cfg.rounds, iterations[-1])
    delta = est.generate(rounds, seed=cfg.seed, strategy=cfg.strategy)
    test_pairs = test_net.link_pairs()
    negatives = negative_sample(
        test_pairs,
        delta.pairs(),
        train_net,
        count=len(test_pairs),
        seed=np.random.SeedSequence([cfg.seed, cfg.window_index, 2]),
    )
    eval_pairs = list(test_pairs) + negatives
    labels = np.concatenate([np.ones(len(test_pairs)), np.zeros(len(negatives))])
    scores = est.predict_scores(eval_pairs)
    report = {
        "window": cfg.window_index,
        "seed": cfg.seed,
        "rounds": rounds,
        "n_train": train_net.n_links,
        "n_test": test_net.n_links,
        "n_test_distinct": len(test_pairs),
        "edge_density": edge_density(test_net),
        "auc": roc_auc(labels, scores),
        "rmse": rmse(labels, scores),
        "generated": len(delta),
        "hitting_ratio": {
            str(it): hitting_ratio(delta.pairs_up_to_round(it), test_pairs) for it in iterations
        },
    }
    out_dir = Path(cfg.out_dir)
    _echo_config(cfg, out_dir)
    _write_json(out_dir / "report.json", report)
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def cmd_benchmark(cfg):
    network = _load_network(cfg)
    if cfg.window_size is not None:
        wspec = WindowSpec.by_count(cfg.window_size)
    elif cfg.chunks is not None:
        wspec = WindowSpec.by_timespan(cfg.chunks)
    else:
        wspec = WindowSpec.by_count(network.n_links)
    prototypes = {
        "glsm": lambda: _glsm_from_config(cfg),
        "jc": JaccardCoefficient,
        "aa": AdamicAdar,
        "mf": MatrixFactorization,
    }
    predictors = {name: prototypes[name]() for name in cfg.predictor_list()}
    report = run_benchmark(
        network,
        wspec,
        SplitSpec(cfg.train_ratio),
        predictors,
        cfg.seed_list(),
        hit_iterations=cfg.hit_iteration_list(),
        rounds=cfg.rounds,
    )
    out_dir = Path(cfg.out_dir)
    _echo_config(cfg, out_dir)
    _write_json(out_dir / "report.json", report.to_dict())
    _write_csv(out_dir / "metrics.csv", report.metric_csv_rows())
    _write_csv(out_dir / "hitting.csv", report.hitting_csv_rows())
    for name in report.predictors:
        agg = report.aggregate[name]
        print(
            f"{name:5s} auc {agg['auc_mean']:.4f} ± {agg['auc_std']:.4f}   "
            f"rmse {agg['rmse_mean']:.4f} ± {agg['rmse_std']:.4f}   ({agg['n_runs']} runs)"
        )
    print(f"report: {out_dir / 'report.json'}")
    return 0


def cmd_inspect_clusters(cfg):
    network, train_net, _, est = _restore(cfg)
    report = cluster_report(est.model_.cluster, network)
    out_dir = Path(cfg.out_dir)
    _echo_config(cfg, out_dir)
    _write_json(out_dir / "clusters.json", report)
    for entry in report["clusters"]:
        print(f"cluster {entry['cluster']}: {entry['size']} nodes")
    print(f"membership report: {out_dir / 'clusters.json'}")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "inspect-clusters": cmd_inspect_clusters,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="linkseq",
        description="Generative link-sequence modeling for temporal link prediction",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub = subparsers.add_parser(name)
        _add_config_flags(sub)
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    problems = cfg.problems(args.command)
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg)
    except Exception as err:  # noqa: BLE001 - diagnostics for the shell
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

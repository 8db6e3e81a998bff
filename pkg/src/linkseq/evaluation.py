"""Windowed benchmark protocol: negative sampling, ROC-AUC, RMSE,
hitting ratio, and mean/std aggregation across windows.

Predictors are sklearn-style estimators exposing fit(network) and
predict_scores(pairs); anything with a generate() method additionally
produces a candidate link set whose hitting ratio is tracked at fixed
iteration checkpoints.  Training only ever sees the train split, so
test leakage is structurally impossible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from .ingest import make_windows, split

__all__ = [
    "roc_auc",
    "rmse",
    "hitting_ratio",
    "negative_sample",
    "edge_density",
    "MetricsReport",
    "run_benchmark",
    "DEFAULT_HIT_ITERATIONS",
]

DEFAULT_HIT_ITERATIONS = (500, 1000, 1500, 2000, 2500, 3000)


def roc_auc(labels, scores):
    """Probability that a random positive outranks a random negative,
    ties counted 1/2 (rank / Mann-Whitney formulation)."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def rmse(labels, scores):
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if len(labels) == 0:
        raise ValueError("rmse of an empty score set")
    return float(np.sqrt(np.mean((scores - labels) ** 2)))


def hitting_ratio(generated_pairs, test_pairs):
    """Fraction of generated links that are true future links; None when
    nothing was generated (reported as absent, not zero)."""
    generated = list(generated_pairs)
    if not generated:
        return None
    test_set = set(test_pairs)
    hits = sum(1 for p in generated if p in test_set)
    return hits / len(generated)


def edge_density(test_network):
    """Distinct test pairs over the registry pair space (namespace-aware)."""
    if test_network.bipartite:
        denom = len(test_network.source_universe()) * len(test_network.dest_universe())
    else:
        denom = test_network.n_nodes**2
    return len(test_network.link_pairs()) / denom if denom else 0.0


def negative_sample(test_pairs, generated_pairs, train_network, count=None, seed=0):
    """Uniform seeded sample of candidate non-links.

    The sample is disjoint from the observed (training) links, the test
    positives, the generated positives, and self-pairs; by default it
    matches the positive count.
    """
    forbidden = set(zip(train_network.src.tolist(), train_network.dst.tolist()))
    forbidden.update((int(u), int(v)) for u, v in test_pairs)
    forbidden.update((int(u), int(v)) for u, v in generated_pairs)
    if count is None:
        count = len(set((int(u), int(v)) for u, v in test_pairs))

    src_pool = train_network.source_universe()
    dst_pool = train_network.dest_universe()
    n_self = 0 if train_network.bipartite else train_network.n_nodes
    n_forbidden = sum(1 for (u, v) in forbidden if u != v)
    available = len(src_pool) * len(dst_pool) - n_self - n_forbidden
    if available < count:
        raise ValueError(
            f"cannot sample {count} negatives: only {available} candidate non-links exist"
        )

    rng = np.random.default_rng(seed)
    out: list[tuple[int, int]] = []
    chosen: set[tuple[int, int]] = set()
    attempts = 0
    max_attempts = 50 * count + 1000
    while len(out) < count and attempts < max_attempts:
        attempts += 1
        u = int(src_pool[rng.integers(len(src_pool))])
        v = int(dst_pool[rng.integers(len(dst_pool))])
        if u == v or (u, v) in forbidden or (u, v) in chosen:
            continue
        chosen.add((u, v))
        out.append((u, v))
    if len(out) < count:
        # Dense graph: enumerate the complement and sample without replacement.
        candidates = sorted(
            (int(u), int(v))
            for u in src_pool
            for v in dst_pool
            if u != v and (u, v) not in forbidden and (u, v) not in chosen
        )
        picked = rng.choice(len(candidates), size=count - len(out), replace=False)
        out.extend(candidates[i] for i in sorted(picked.tolist()))
    return out


@dataclass
class MetricsReport:
    """Per-window and aggregate benchmark results."""

    predictors: list[str]
    seeds: list[int]
    hit_iterations: list[int]
    windows: list[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    hitting: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "predictors": self.predictors,
            "seeds": self.seeds,
            "hit_iterations": self.hit_iterations,
            "windows": self.windows,
            "aggregate": self.aggregate,
            "hitting": self.hitting,
        }

    def metric_csv_rows(self):
        rows = [["model", "auc_mean", "auc_std", "rmse_mean", "rmse_std", "runs"]]
        for name in self.predictors:
            agg = self.aggregate.get(name)
            if agg is None:
                continue
            rows.append(
                [
                    name,
                    f"{agg['auc_mean']:.6f}",
                    f"{agg['auc_std']:.6f}",
                    f"{agg['rmse_mean']:.6f}",
                    f"{agg['rmse_std']:.6f}",
                    str(agg["n_runs"]),
                ]
            )
        return rows

    def hitting_csv_rows(self):
        rows = [["iteration", "hitting_ratio_mean", "hitting_ratio_std", "runs"]]
        for it in self.hit_iterations:
            agg = self.hitting.get(str(it))
            if agg is None:
                continue
            rows.append(
                [str(it), f"{agg['mean']:.6f}", f"{agg['std']:.6f}", str(agg["n"])]
            )
        return rows


def _mean_std(values):
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())  # population std across runs


def run_benchmark(
    network,
    window_spec,
    split_spec,
    predictors,
    seeds,
    hit_iterations=DEFAULT_HIT_ITERATIONS,
    rounds=None,
):
    """Run every predictor on every (window, seed) pair and aggregate.

    ``predictors`` maps names to estimator prototypes; each run works on
    a clone with its random_state (when the estimator has one) set to
    the run seed.  Windows whose split is degenerate are skipped and
    recorded.  Returns a MetricsReport.
    """
    hit_iterations = sorted(int(i) for i in hit_iterations)
    if rounds is None:
        rounds = max(hit_iterations) if hit_iterations else 1000
    names = list(predictors)
    report = MetricsReport(predictors=names, seeds=[int(s) for s in seeds], hit_iterations=hit_iterations)
    metric_runs: dict[str, dict[str, list[float]]] = {n: {"auc": [], "rmse": []} for n in names}
    hit_runs: dict[int, list[float]] = {it: [] for it in hit_iterations}

    windows = make_windows(network, window_spec)
    usable = 0
    for wi, window in enumerate(windows):
        try:
            train_net, test_net = split(window, split_spec)
        except ValueError as err:
            report.windows.append({"window": wi, "skipped": True, "reason": str(err)})
            continue
        usable += 1
        test_pairs = test_net.link_pairs()
        p_e = edge_density(test_net)
        window_entry = {
            "window": wi,
            "skipped": False,
            "n_links": window.n_links,
            "n_train": train_net.n_links,
            "n_test": test_net.n_links,
            "n_test_distinct": len(test_pairs),
            "edge_density": p_e,
            "runs": [],
        }
        for seed in report.seeds:
            fitted = {}
            for name in names:
                est = clone(predictors[name])
                if "random_state" in est.get_params():
                    est.set_params(random_state=seed)
                fitted[name] = est.fit(train_net)
            generated_pairs: list[tuple[int, int]] = []
            run_entry = {"seed": seed, "scores": {}, "hitting_ratio": {}, "generated": 0}
            for name in names:
                est = fitted[name]
                if hasattr(est, "generate"):
                    delta = est.generate(rounds, seed=seed)
                    generated_pairs = delta.pairs()
                    run_entry["generated"] = len(delta)
                    test_set = set(test_pairs)
                    for it in hit_iterations:
                        upto = delta.pairs_up_to_round(it)
                        hr = hitting_ratio(upto, test_set)
                        run_entry["hitting_ratio"][str(it)] = hr
                        if hr is not None:
                            hit_runs[it].append(hr)
            negatives = negative_sample(
                test_pairs,
                generated_pairs,
                train_net,
                count=len(test_pairs),
                seed=np.random.SeedSequence([int(seed), wi, 2]),
            )
            eval_pairs = list(test_pairs) + negatives
            labels = np.concatenate([np.ones(len(test_pairs)), np.zeros(len(negatives))])
            for name in names:
                scores = fitted[name].predict_scores(eval_pairs)
                run_entry["scores"][name] = {
                    "auc": roc_auc(labels, scores),
                    "rmse": rmse(labels, scores),
                }
                metric_runs[name]["auc"].append(run_entry["scores"][name]["auc"])
                metric_runs[name]["rmse"].append(run_entry["scores"][name]["rmse"])
            window_entry["runs"].append(run_entry)
        report.windows.append(window_entry)

    if usable == 0:
        raise ValueError("no window admits a valid train/test split")
    for name in names:
        auc_mean, auc_std = _mean_std(metric_runs[name]["auc"])
        rmse_mean, rmse_std = _mean_std(metric_runs[name]["rmse"])
        report.aggregate[name] = {
            "auc_mean": auc_mean,
            "auc_std": auc_std,
            "rmse_mean": rmse_mean,
            "rmse_std": rmse_std,
            "n_runs": len(metric_runs[name]["auc"]),
        }
    for it in hit_iterations:
        if hit_runs[it]:
            mean, std = _mean_std(hit_runs[it])
            report.hitting[str(it)] = {"mean": mean, "std": std, "n": len(hit_runs[it])}
    return report

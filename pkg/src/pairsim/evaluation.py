"""Verification metrics, the separation audit, and threshold clustering.

Conventions, fixed here because published EER/TPR numbers rarely state
them:

* EER sweeps candidate thresholds at midpoints of sorted unique scores
  plus +-inf, with FRR(t) = frac(pos < t) and FAR(t) = frac(neg >= t),
  and linearly interpolates between the two bracketing candidates.
* TPR@FAR puts candidate thresholds at the observed negative scores (the
  smallest threshold whose FAR is within target maximizes TPR); targets
  below the strictest achievable FAR are clamped and flagged.
* Clustering is a single-linkage threshold cut: connect every pair that
  scores strictly above the threshold, components become clusters, and
  accuracy is scored under the optimal one-to-one cluster/class matching.

A positive separation margin (min same-class score minus max cross-class
score) certifies that any threshold inside the margin reproduces the
classes exactly; `cluster_by_threshold` realizes that guarantee.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, DegenerateInputError, ShapeError
from .numkit import Rng
from .similarity import SimilarityKind, score_matrix, score_rows


@dataclass
class ScoredPairs:
    """Scores of sampled same-class (pos) and cross-class (neg) pairs."""

    pos_scores: np.ndarray
    neg_scores: np.ndarray

    def __post_init__(self):
        self.pos_scores = np.asarray(self.pos_scores, dtype=np.float64).ravel()
        self.neg_scores = np.asarray(self.neg_scores, dtype=np.float64).ravel()

    def require_both_sides(self):
        if self.pos_scores.size == 0 or self.neg_scores.size == 0:
            raise DegenerateInputError(
                "need at least one positive and one negative score"
            )


class TprAtFar(NamedTuple):
    tpr: float
    threshold: float
    far_achieved: float
    clamped: bool


@dataclass
class EvalReport:
    eer: float
    eer_threshold: float
    tpr_at_far: dict
    roc: list
    desideratum_margin: float
    clustering_accuracy: float

    def __post_init__(self):
        if not 0.0 <= self.eer <= 1.0:
            raise ConfigError(f"eer must lie in [0,1], got {self.eer}")
        if not 0.0 <= self.clustering_accuracy <= 1.0:
            raise ConfigError(
                f"clustering_accuracy must lie in [0,1], got {self.clustering_accuracy}"
            )
        fars = [p[0] for p in self.roc]
        tprs = [p[1] for p in self.roc]
        if sorted(fars) != fars or sorted(tprs) != tprs:
            raise ConfigError("roc points must be monotone in both coordinates")


def _pair_totals(labels: np.ndarray):
    n = labels.size
    counts = np.bincount(labels)
    intra = int((counts * (counts - 1) // 2).sum())
    inter = n * (n - 1) // 2 - intra
    return intra, inter


def _sample_side(rng: Rng, labels: np.ndarray, want: int, total: int, same: bool):
    """Uniform unordered index pairs without replacement, one side.

    Rejection sampling while the request is sparse; full enumeration once
    it passes half the population (keeps the tail deterministic and fast).
    """
    n = labels.size
    if want == 0:
        return np.empty((0, 2), dtype=np.int64)
    if want <= total // 2:
        seen = set()
        out = np.empty((want, 2), dtype=np.int64)
        k = 0
        while k < want:
            m = max(1024, 4 * (want - k))
            ii = rng.integers(0, n, size=m)
            jj = rng.integers(0, n, size=m)
            ok = (ii != jj) & ((labels[ii] == labels[jj]) == same)
            lo = np.minimum(ii[ok], jj[ok])
            hi = np.maximum(ii[ok], jj[ok])
            for key in zip(lo.tolist(), hi.tolist()):
                if key in seen:
                    continue
                seen.add(key)
                out[k] = key
                k += 1
                if k == want:
                    break
        return out
    ii, jj = np.triu_indices(n, k=1)
    mask = (labels[ii] == labels[jj]) == same
    ii, jj = ii[mask], jj[mask]
    pick = rng.permutation(ii.size)[:want]
    return np.stack([ii[pick], jj[pick]], axis=1).astype(np.int64)


def sample_pair_indices(labels, num_pos: int, num_neg: int, seed: int):
    """(pos_pairs, neg_pairs) as (k, 2) index arrays, deterministic under seed."""
    labels = np.asarray(labels).ravel().astype(np.int64)
    intra, inter = _pair_totals(labels)
    if num_pos > intra:
        raise ConfigError(f"{num_pos} same-class pairs requested, only {intra} exist")
    if num_neg > inter:
        raise ConfigError(f"{num_neg} cross-class pairs requested, only {inter} exist")
    rng = Rng(seed).stream("eval_pairs")
    pos = _sample_side(rng.stream("pos"), labels, int(num_pos), intra, True)
    neg = _sample_side(rng.stream("neg"), labels, int(num_neg), inter, False)
    return pos, neg


def score_pairs(sim: SimilarityKind, features, pos_pairs, neg_pairs) -> ScoredPairs:
    """Score fixed pair indices against (possibly re-encoded) features."""
    features = np.asarray(features, dtype=np.float64)
    pos_pairs = np.asarray(pos_pairs, dtype=np.int64).reshape(-1, 2)
    neg_pairs = np.asarray(neg_pairs, dtype=np.int64).reshape(-1, 2)
    return ScoredPairs(
        pos_scores=score_rows(sim, features[pos_pairs[:, 0]], features[pos_pairs[:, 1]])
        if pos_pairs.size
        else np.empty(0),
        neg_scores=score_rows(sim, features[neg_pairs[:, 0]], features[neg_pairs[:, 1]])
        if neg_pairs.size
        else np.empty(0),
    )


def build_eval_pairs(
    features, labels, num_pos: int, num_neg: int, seed: int,
    sim: SimilarityKind | None = None,
) -> ScoredPairs:
    """Sample and score verification pairs in one step."""
    sim = sim if sim is not None else SimilarityKind()
    pos, neg = sample_pair_indices(labels, num_pos, num_neg, seed)
    return score_pairs(sim, features, pos, neg)


def _candidates(sp: ScoredPairs) -> np.ndarray:
    uniq = np.unique(np.concatenate([sp.pos_scores, sp.neg_scores]))
    mids = (uniq[:-1] + uniq[1:]) / 2.0
    return np.concatenate([[-np.inf], mids, [np.inf]])


def _frr_far(sp: ScoredPairs, t: np.ndarray):
    pos = np.sort(sp.pos_scores)
    neg = np.sort(sp.neg_scores)
    frr = np.searchsorted(pos, t, side="left") / pos.size
    far = (neg.size - np.searchsorted(neg, t, side="left")) / neg.size
    return frr, far


def compute_eer(sp: ScoredPairs):
    """(eer, threshold) by threshold sweep with linear interpolation.

    FAR - FRR is monotone nonincreasing over the candidate sweep, from +1
    at -inf to -1 at +inf; the EER sits where it crosses zero.
    """
    sp.require_both_sides()
    t = _candidates(sp)
    frr, far = _frr_far(sp, t)
    diff = far - frr
    k = int(np.flatnonzero(diff >= 0)[-1])
    lam = diff[k] / (diff[k] - diff[k + 1])
    eer = (1.0 - lam) * far[k] + lam * far[k + 1]
    if lam == 0.0 or not np.isfinite(t[k + 1]):
        threshold = t[k]
    elif lam == 1.0 or not np.isfinite(t[k]):
        threshold = t[k + 1]
    else:
        threshold = (1.0 - lam) * t[k] + lam * t[k + 1]
    return float(eer), float(threshold)


def tpr_at_far(sp: ScoredPairs, far_targets) -> dict:
    """Map each FAR target to a TprAtFar entry.

    Thresholds sit at observed negative scores; the smallest threshold
    with FAR(t) <= target maximizes TPR. Targets stricter than 1/|neg|
    (more generally, than the strictest achievable FAR) fall back to the
    strictest threshold and come back flagged.
    """
    sp.require_both_sides()
    neg_cand = np.unique(sp.neg_scores)
    _, far = _frr_far(sp, neg_cand)
    pos = np.sort(sp.pos_scores)
    out = {}
    for target in far_targets:
        target = float(target)
        if not 0.0 <= target <= 1.0:
            raise ConfigError(f"FAR target must lie in [0,1], got {target}")
        hit = np.flatnonzero(far <= target)
        if hit.size:
            i, clamped = int(hit[0]), False
        else:
            i, clamped = neg_cand.size - 1, True
        t = neg_cand[i]
        tpr = (pos.size - np.searchsorted(pos, t, side="left")) / pos.size
        out[target] = TprAtFar(float(tpr), float(t), float(far[i]), clamped)
    return out


def roc_points(sp: ScoredPairs) -> list:
    """(far, tpr) staircase from strictest to loosest threshold."""
    sp.require_both_sides()
    uniq = np.unique(np.concatenate([sp.pos_scores, sp.neg_scores]))[::-1]
    frr, far = _frr_far(sp, uniq)
    tpr = 1.0 - frr
    pts = [(0.0, 0.0)]
    for f, t in zip(far, tpr):
        if (f, t) != pts[-1]:
            pts.append((float(f), float(t)))
    return pts


def desideratum_audit(features, labels, sim: SimilarityKind) -> float:
    """min same-class score minus max cross-class score, all pairs.

    Positive iff every same-class pair outscores every cross-class pair,
    i.e. one global threshold separates them.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels).ravel().astype(np.int64)
    n = labels.size
    if features.ndim != 2 or features.shape[0] != n:
        raise ShapeError(f"features {features.shape} do not match {n} labels")
    intra, inter = _pair_totals(labels)
    if intra == 0 or inter == 0:
        raise DegenerateInputError(
            "separation margin needs at least one same-class and one cross-class pair"
        )
    min_intra, max_inter = np.inf, -np.inf
    block = 512
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        rows = score_matrix(sim, features[lo:hi], features)
        same = labels[lo:hi, None] == labels[None, :]
        upper = np.arange(n)[None, :] > np.arange(lo, hi)[:, None]
        if np.any(same & upper):
            min_intra = min(min_intra, rows[same & upper].min())
        if np.any(~same & upper):
            max_inter = max(max_inter, rows[~same & upper].max())
    return float(min_intra - max_inter)


def cluster_by_threshold(features, sim: SimilarityKind, threshold: float) -> np.ndarray:
    """Connected components of the strictly-above-threshold score graph."""
    if not np.isfinite(threshold):
        raise ConfigError(f"threshold must be finite, got {threshold}")
    features = np.asarray(features, dtype=np.float64)
    adj = score_matrix(sim, features, features) > threshold
    np.fill_diagonal(adj, False)
    _, comp = connected_components(csr_matrix(adj), directed=False)
    return comp.astype(np.int64)


def clustering_accuracy(predicted, truth) -> float:
    """Accuracy under the optimal one-to-one cluster/class assignment."""
    predicted = np.asarray(predicted).ravel().astype(np.int64)
    truth = np.asarray(truth).ravel().astype(np.int64)
    if predicted.shape != truth.shape:
        raise ShapeError("predicted and truth label lengths differ")
    if predicted.size == 0:
        raise DegenerateInputError("no labels to score")
    table = np.zeros((predicted.max() + 1, truth.max() + 1), dtype=np.int64)
    np.add.at(table, (predicted, truth), 1)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / predicted.size


def evaluate(
    features,
    labels,
    sim: SimilarityKind,
    num_pos: int = 1000,
    num_neg: int = 1000,
    seed: int = 0,
    far_targets=(0.1, 0.01),
    threshold: float | None = None,
) -> EvalReport:
    """Full report; pair requests are clamped to what the labels allow.

    ``threshold`` sets the clustering cut; default is the EER threshold.
    """
    labels = np.asarray(labels).ravel().astype(np.int64)
    intra, inter = _pair_totals(labels)
    sp = build_eval_pairs(
        features, labels, min(num_pos, intra), min(num_neg, inter), seed, sim
    )
    eer, t_eer = compute_eer(sp)
    tprs = tpr_at_far(sp, far_targets)
    cut = t_eer if threshold is None else float(threshold)
    acc = clustering_accuracy(cluster_by_threshold(features, sim, cut), labels)
    return EvalReport(
        eer=eer,
        eer_threshold=t_eer,
        tpr_at_far={t: r.tpr for t, r in tprs.items()},
        roc=roc_points(sp),
        desideratum_margin=desideratum_audit(features, labels, sim),
        clustering_accuracy=acc,
    )


def report_to_dict(report: EvalReport) -> dict:
    return {
        "eer": report.eer,
        "eer_threshold": report.eer_threshold,
        "tpr_at_far": {str(k): v for k, v in report.tpr_at_far.items()},
        "roc": [[f, t] for f, t in report.roc],
        "desideratum_margin": report.desideratum_margin,
        "clustering_accuracy": report.clustering_accuracy,
    }


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2)


def report_csv_header(report: EvalReport) -> str:
    cols = ["eer", "eer_threshold", "desideratum_margin", "clustering_accuracy"]
    cols += [f"tpr_at_far_{t:g}" for t in sorted(report.tpr_at_far)]
    return ",".join(cols)


def report_csv_row(report: EvalReport) -> str:
    vals = [report.eer, report.eer_threshold, report.desideratum_margin,
            report.clustering_accuracy]
    vals += [report.tpr_at_far[t] for t in sorted(report.tpr_at_far)]
    return ",".join("%.17g" % v for v in vals)

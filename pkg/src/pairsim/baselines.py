"""Comparator losses: proxy softmax CE, its generalized-inner variants,
and proxy-free contrastive / triplet hinges.

The CE family is the log(1 + sum_{i != y} exp(z_i - z_y)) form.  Plain
``softmax_ce`` uses raw inner-product logits z_i = w_i . x, which on
separable data can be driven to zero by inflating ||x|| alone; that
degenerate route is what `norm_blowup_probe` measures.  ``proxy_gip_ce``
swaps in z_i = ||w_i|| ||x|| (cos - b_theta), minus a margin inside the
non-target cosine when margin > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError
from .numkit import as_matrix, check_finite
from .similarity import SimilarityKind, score, score_grad
from .losses import PairBatch


@dataclass
class ProxyBank:
    """One learnable proxy row per class."""

    proxies: np.ndarray
    normalize_proxies: bool = False
    b_theta: float = 0.0
    margin: float = 0.0

    def __post_init__(self):
        self.proxies = as_matrix(self.proxies)
        if self.proxies.shape[0] < 2:
            raise ConfigError(
                f"need at least 2 classes, got {self.proxies.shape[0]} proxy rows"
            )
        self.b_theta = float(self.b_theta)
        self.margin = float(self.margin)
        if self.margin < 0:
            raise ConfigError(f"margin must be >= 0, got {self.margin}")

    @property
    def num_classes(self) -> int:
        return self.proxies.shape[0]

    @property
    def d_feat(self) -> int:
        return self.proxies.shape[1]


def init_proxy_bank(rng, num_classes: int, d_feat: int, **kw) -> ProxyBank:
    """Gaussian proxies at scale 1/sqrt(d_feat)."""
    w = rng.normal(size=(num_classes, d_feat)) / np.sqrt(d_feat)
    return ProxyBank(proxies=w, **kw)


class CeGrads(NamedTuple):
    d_feature: np.ndarray
    d_proxies: np.ndarray
    d_btheta: float


def _check_example(bank: ProxyBank, feature, label):
    feature = np.asarray(feature, dtype=np.float64).ravel()
    check_finite(feature, "feature")
    if feature.size != bank.d_feat:
        raise ShapeError(f"feature dim {feature.size} != proxy dim {bank.d_feat}")
    label = int(label)
    if not 0 <= label < bank.num_classes:
        raise ConfigError(f"label {label} out of range [0, {bank.num_classes})")
    return feature, label


def _softmax_over_diffs(diffs: np.ndarray):
    """loss = log(1 + sum exp(diffs)) and p = exp(diffs)/(1 + sum exp(diffs)).

    The implicit zero logit keeps the result finite for any diffs.
    """
    m = max(0.0, float(diffs.max())) if diffs.size else 0.0
    terms = np.exp(diffs - m)
    z = np.exp(-m) + terms.sum()
    loss = m + np.log(z)
    return float(loss), terms / z


def softmax_ce(bank: ProxyBank, feature, label):
    """Cross entropy over raw inner-product logits; (loss, CeGrads)."""
    feature, label = _check_example(bank, feature, label)
    w = bank.proxies
    if bank.normalize_proxies:
        return _gip_ce(bank, feature, label, b_theta=0.0, margin=0.0)
    logits = w @ feature
    others = np.arange(bank.num_classes) != label
    loss, p = _softmax_over_diffs(logits[others] - logits[label])
    d_w = np.zeros_like(w)
    d_w[others] = p[:, None] * feature
    d_w[label] = -p.sum() * feature
    d_x = p @ w[others] - p.sum() * w[label]
    return loss, CeGrads(d_x, d_w, 0.0)


def _unit_rows(w: np.ndarray):
    norms = np.linalg.norm(w, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError("cannot normalize a zero proxy")
    return w / norms[:, None], norms


def _gip_ce(bank: ProxyBank, feature, label, b_theta: float, margin: float):
    """Shared kernel: logits ||w|| ||x|| (cos - b_theta [- margin off target])."""
    w = bank.proxies
    if bank.normalize_proxies:
        u, raw_norms = _unit_rows(w)
        w_eff, w_norm = u, np.ones(bank.num_classes)
    else:
        w_eff = w
        w_norm = np.linalg.norm(w, axis=1)
    x_norm = float(np.linalg.norm(feature))
    if x_norm == 0.0 and (b_theta != 0.0 or margin != 0.0):
        raise DegenerateInputError(
            "zero feature has no direction for the b_theta/margin term"
        )
    others = np.arange(bank.num_classes) != label
    bias = np.where(others, b_theta + margin, b_theta)
    logits = w_eff @ feature - bias * w_norm * x_norm
    loss, p = _softmax_over_diffs(logits[others] - logits[label])

    coef = np.zeros(bank.num_classes)  # dL/d logit_i
    coef[others] = p
    coef[label] = -p.sum()
    # d logit_i / dx = w_i - bias_i ||w_i|| x/||x||
    d_x = coef @ w_eff
    if x_norm > 0.0:
        d_x -= float(coef @ (bias * w_norm)) / x_norm * feature
    # d logit_i / dw_i = x - bias_i ||x|| w_i/||w_i||
    d_weff = coef[:, None] * feature[None, :]
    if not bank.normalize_proxies:
        safe = w_norm > 0.0
        d_weff[safe] -= (
            (coef * bias * x_norm)[safe] / w_norm[safe]
        )[:, None] * w_eff[safe]
        d_w = d_weff
    else:
        # normalized logits do not depend on ||w_i||; bias term is constant
        # in w_i, and the cos term backprops through u = w/||w||
        d_w = (d_weff - (d_weff * w_eff).sum(axis=1)[:, None] * w_eff)
        d_w /= raw_norms[:, None]
    d_btheta = -float(coef @ w_norm) * x_norm
    return loss, CeGrads(d_x, d_w, d_btheta)


def proxy_gip_ce(bank: ProxyBank, feature, label):
    """CE over generalized-inner logits, with the bank's b_theta and margin.

    margin = 0 gives the plain generalized-inner CE; b_theta = 0 and
    margin = 0 reduce to `softmax_ce` exactly.
    """
    feature, label = _check_example(bank, feature, label)
    return _gip_ce(bank, feature, label, bank.b_theta, bank.margin)


def contrastive_loss(pairs: PairBatch, margin: float):
    """Two-sided hinge in score space, mean-pooled; (loss, d_scores).

    Positives pay (margin - s)+ and negatives (s + margin)+, i.e. the
    pull/push targets sit at +margin and -margin. Exactly at the hinge the
    loss is 0 with subgradient 0.
    """
    if not margin > 0:
        raise ConfigError(f"margin must be positive, got {margin}")
    if len(pairs) == 0:
        raise DegenerateInputError("empty pair batch")
    s = pairs.scores
    y = pairs.labels
    gap = np.where(y == 1, margin - s, s + margin)
    active = gap > 0.0
    loss = float(np.where(active, gap, 0.0).mean())
    d_scores = np.where(active, np.where(y == 1, -1.0, 1.0), 0.0) / len(pairs)
    return loss, d_scores


@dataclass
class TripletConfig:
    margin: float = 0.2
    similarity: SimilarityKind = field(default_factory=SimilarityKind)

    def __post_init__(self):
        if not self.margin > 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")


class TripletGrads(NamedTuple):
    d_anchor: np.ndarray
    d_positive: np.ndarray
    d_negative: np.ndarray


def triplet_loss(anchor, positive, negative, cfg: TripletConfig):
    """(margin + S(a,n) - S(a,p))+ with gradients; (loss, TripletGrads)."""
    a = np.asarray(anchor, dtype=np.float64).ravel()
    p = np.asarray(positive, dtype=np.float64).ravel()
    n = np.asarray(negative, dtype=np.float64).ravel()
    if not a.size == p.size == n.size:
        raise ShapeError(
            f"triplet dims differ: {a.size}, {p.size}, {n.size}"
        )
    sim = cfg.similarity
    gap = cfg.margin + score(sim, a, n) - score(sim, a, p)
    if gap <= 0.0:
        z = np.zeros_like(a)
        return 0.0, TripletGrads(z, z.copy(), z.copy())
    d_a_n, d_n, _ = score_grad(sim, a, n)
    d_a_p, d_p, _ = score_grad(sim, a, p)
    return float(gap), TripletGrads(d_a_n - d_a_p, -d_p, d_n)


def norm_blowup_probe(run) -> np.ndarray:
    """Per-epoch mean feature norm series from a training run log."""
    series = [rec["mean_feature_norm"] for rec in run.epochs]
    if not series:
        raise DegenerateInputError("run log holds no epochs")
    return np.asarray(series, dtype=np.float64)

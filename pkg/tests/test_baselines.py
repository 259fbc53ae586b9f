"""Baseline losses: CE family oracles, hinge mechanics, gradient checks."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pairsim import PairBatch, SimilarityKind, score
from pairsim.baselines import (
    CeGrads,
    ProxyBank,
    TripletConfig,
    contrastive_loss,
    init_proxy_bank,
    proxy_gip_ce,
    softmax_ce,
    triplet_loss,
)
from pairsim.errors import ConfigError, DegenerateInputError
from pairsim.gradcheck import max_rel_err, numerical_grad, numerical_grad_scalar


# ----- direct-summation oracles -----------------------------------------


def ce_oracle(W, x, y):
    z = [float(np.dot(w, x)) for w in W]
    return math.log(1.0 + sum(math.exp(z[i] - z[y]) for i in range(len(W)) if i != y))


def gip_logit(w, x, b, extra=0.0):
    nw, nx = np.linalg.norm(w), np.linalg.norm(x)
    cos = float(np.dot(w, x)) / (nw * nx)
    return nw * nx * (cos - b - extra)


def gip_ce_oracle(W, x, y, b, m):
    z = [gip_logit(W[i], x, b, m if i != y else 0.0) for i in range(len(W))]
    return math.log(1.0 + sum(math.exp(z[i] - z[y]) for i in range(len(W)) if i != y))


FIX_W = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
FIX_X = np.array([0.5, -0.25])


# ----- softmax_ce --------------------------------------------------------


def test_ce_uniform_logits_give_log_k():
    for k in (2, 3, 7):
        bank = ProxyBank(proxies=np.tile([0.4, -0.2, 0.1], (k, 1)))
        loss, _ = softmax_ce(bank, [5.0, 1.0, -2.0], 0)
        assert_allclose(loss, math.log(k), rtol=1e-15)


def test_ce_two_class_tie_gives_log_two():
    bank = ProxyBank(proxies=np.array([[1.0, 0.0], [0.0, 1.0]]))
    loss, _ = softmax_ce(bank, [1.0, 1.0], 1)
    assert_allclose(loss, math.log(2.0), rtol=1e-15)


def test_ce_three_class_fixture_matches_oracle():
    bank = ProxyBank(proxies=FIX_W)
    loss, _ = softmax_ce(bank, FIX_X, 0)
    assert_allclose(loss, 0.81144889759451366, rtol=1e-15)
    assert_allclose(loss, ce_oracle(FIX_W, FIX_X, 0), rtol=1e-15)


def test_ce_stable_for_huge_logits():
    bank = ProxyBank(proxies=np.array([[1.0, 0.0], [0.0, 1.0]]))
    x = np.array([0.0, 1e4])
    loss, grads = softmax_ce(bank, x, 0)
    assert np.isfinite(loss)
    assert_allclose(loss, 1e4, rtol=1e-12)  # dominated by the one huge diff
    assert np.isfinite(grads.d_feature).all()
    assert np.isfinite(grads.d_proxies).all()


def test_ce_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(5):
        W = rng.normal(size=(4, 3))
        x = rng.normal(size=3)
        y = int(rng.integers(0, 4))
        bank = ProxyBank(proxies=W.copy())
        _, grads = softmax_ce(bank, x, y)
        num_x = numerical_grad(lambda v: softmax_ce(bank, v, y)[0], x.copy())
        assert max_rel_err(grads.d_feature, num_x) < 1e-5
        num_w = numerical_grad(
            lambda M: softmax_ce(ProxyBank(proxies=M.copy()), x, y)[0], W.copy()
        )
        assert max_rel_err(grads.d_proxies, num_w) < 1e-5


def test_ce_validates_label_and_shape():
    bank = ProxyBank(proxies=np.eye(3))
    with pytest.raises(ConfigError):
        softmax_ce(bank, np.ones(3), 3)
    with pytest.raises(ValueError):
        softmax_ce(bank, np.ones(2), 0)
    with pytest.raises(ConfigError):
        ProxyBank(proxies=np.ones((1, 2)))


# ----- proxy_gip_ce ------------------------------------------------------


def test_gip_ce_reduces_to_softmax_ce():
    rng = np.random.default_rng(1)
    for _ in range(10):
        W = rng.normal(size=(5, 4))
        x = rng.normal(size=4)
        y = int(rng.integers(0, 5))
        plain, pg = softmax_ce(ProxyBank(proxies=W), x, y)
        gip, gg = proxy_gip_ce(ProxyBank(proxies=W, b_theta=0.0, margin=0.0), x, y)
        assert_allclose(gip, plain, rtol=1e-12)
        assert_allclose(gg.d_feature, pg.d_feature, rtol=1e-12, atol=1e-12)
        assert_allclose(gg.d_proxies, pg.d_proxies, rtol=1e-12, atol=1e-12)


def test_gip_ce_fixture_matches_oracle():
    bank = ProxyBank(proxies=FIX_W, b_theta=0.3)
    loss, _ = proxy_gip_ce(bank, FIX_X, 0)
    assert_allclose(loss, 0.78795889791502016, rtol=1e-15)
    assert_allclose(loss, gip_ce_oracle(FIX_W, FIX_X, 0, 0.3, 0.0), rtol=1e-15)


def test_gip_ce_margin_fixture_matches_oracle():
    bank = ProxyBank(proxies=FIX_W, b_theta=0.3, margin=0.2)
    loss, _ = proxy_gip_ce(bank, FIX_X, 0)
    assert_allclose(loss, 0.71426391628952579, rtol=1e-15)
    assert_allclose(loss, gip_ce_oracle(FIX_W, FIX_X, 0, 0.3, 0.2), rtol=1e-15)


def test_gip_ce_margin_zero_equals_plain_gip():
    rng = np.random.default_rng(2)
    W = rng.normal(size=(4, 3))
    x = rng.normal(size=3)
    a, _ = proxy_gip_ce(ProxyBank(proxies=W, b_theta=0.2, margin=0.0), x, 1)
    b, _ = proxy_gip_ce(ProxyBank(proxies=W, b_theta=0.2), x, 1)
    assert a == b


def test_gip_ce_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    for margin in (0.0, 0.15):
        for normalize in (False, True):
            W = rng.normal(size=(4, 3))
            x = rng.normal(size=3) + 0.1
            y = 2
            bank = ProxyBank(
                proxies=W.copy(), b_theta=0.3, margin=margin,
                normalize_proxies=normalize,
            )
            _, grads = proxy_gip_ce(bank, x, y)

            def loss_of_x(v):
                return proxy_gip_ce(bank, v, y)[0]

            def loss_of_w(M):
                b2 = ProxyBank(proxies=M.copy(), b_theta=0.3, margin=margin,
                               normalize_proxies=normalize)
                return proxy_gip_ce(b2, x, y)[0]

            def loss_of_b(t):
                b2 = ProxyBank(proxies=W.copy(), b_theta=t, margin=margin,
                               normalize_proxies=normalize)
                return proxy_gip_ce(b2, x, y)[0]

            assert max_rel_err(grads.d_feature, numerical_grad(loss_of_x, x.copy())) < 1e-5
            assert max_rel_err(grads.d_proxies, numerical_grad(loss_of_w, W.copy())) < 1e-5
            num_b = numerical_grad_scalar(loss_of_b, 0.3)
            assert max_rel_err([grads.d_btheta], [num_b]) < 1e-5


def test_gip_ce_normalized_is_scale_invariant_in_proxies():
    rng = np.random.default_rng(4)
    W = rng.normal(size=(3, 4))
    x = rng.normal(size=4)
    a, _ = proxy_gip_ce(ProxyBank(proxies=W, b_theta=0.2, normalize_proxies=True), x, 0)
    W2 = W * np.array([[7.0], [0.5], [3.0]])
    b, _ = proxy_gip_ce(ProxyBank(proxies=W2, b_theta=0.2, normalize_proxies=True), x, 0)
    assert_allclose(a, b, rtol=1e-12)


def test_gip_ce_zero_feature_needs_zero_bias():
    bank = ProxyBank(proxies=np.eye(2), b_theta=0.3)
    with pytest.raises(DegenerateInputError):
        proxy_gip_ce(bank, [0.0, 0.0], 0)


def test_init_proxy_bank_shapes():
    from pairsim import Rng

    bank = init_proxy_bank(Rng(0), 5, 8, b_theta=0.1)
    assert bank.proxies.shape == (5, 8)
    assert bank.b_theta == 0.1


# ----- contrastive -------------------------------------------------------


def test_contrastive_satisfied_hinges_are_free():
    pairs = PairBatch([5.0, -5.0], [1, 0])
    loss, d = contrastive_loss(pairs, margin=0.3)
    assert loss == 0.0
    assert np.array_equal(d, [0.0, 0.0])


def test_contrastive_boundary_has_zero_subgradient():
    pairs = PairBatch([0.3, -0.3], [1, 0])
    loss, d = contrastive_loss(pairs, margin=0.3)
    assert loss == 0.0
    assert np.array_equal(d, [0.0, 0.0])


def test_contrastive_active_hinges_hand_example():
    pairs = PairBatch([0.1, -0.5], [1, 0])
    loss, d = contrastive_loss(pairs, margin=0.3)
    assert_allclose(loss, 0.1)  # (0.3 - 0.1)/2, negative side inactive
    assert_allclose(d, [-0.5, 0.0])


def test_contrastive_gradient_matches_fd_away_from_kinks():
    rng = np.random.default_rng(5)
    scores = rng.normal(size=12)
    labels = rng.integers(0, 2, size=12)
    margin = 0.25
    # keep every score at least 1e-3 from its hinge
    hinge = np.where(labels == 1, margin, -margin)
    scores = np.where(np.abs(scores - hinge) < 1e-3, scores + 0.01, scores)
    _, d = contrastive_loss(PairBatch(scores, labels), margin)
    num = numerical_grad(
        lambda s: contrastive_loss(PairBatch(s, labels), margin)[0], scores.copy()
    )
    assert max_rel_err(d, num, floor=1e-3) < 1e-5


def test_contrastive_validates():
    with pytest.raises(ConfigError):
        contrastive_loss(PairBatch([0.1], [1]), margin=0.0)
    with pytest.raises(DegenerateInputError):
        contrastive_loss(PairBatch(np.zeros(0), np.zeros(0, dtype=int)), margin=0.1)


# ----- triplet -----------------------------------------------------------


def test_triplet_satisfied_is_zero_with_zero_grads():
    cfg = TripletConfig(margin=0.2, similarity=SimilarityKind("cosine"))
    a = np.array([1.0, 0.0])
    p = np.array([1.0, 0.05])
    n = np.array([-1.0, 0.0])
    loss, g = triplet_loss(a, p, n, cfg)
    assert loss == 0.0
    assert np.array_equal(g.d_anchor, [0.0, 0.0])
    assert np.array_equal(g.d_positive, [0.0, 0.0])
    assert np.array_equal(g.d_negative, [0.0, 0.0])


def test_triplet_anchor_equals_positive_plugin():
    cfg = TripletConfig(margin=0.5, similarity=SimilarityKind("cosine"))
    a = np.array([1.0, 0.0])
    n = np.array([1.0, 1.0]) / math.sqrt(2.0)
    loss, _ = triplet_loss(a, a, n, cfg)
    # S(a,a) = 1 under cosine, so loss = margin - 1 + S(a,n)
    assert_allclose(loss, 0.20710678118654757, rtol=1e-15)
    assert_allclose(loss, 0.5 - 1.0 + score(cfg.similarity, a, n), rtol=1e-15)


def test_triplet_gradients_match_fd_away_from_kink():
    rng = np.random.default_rng(6)
    for name in ("generalized_inner", "cosine", "inner"):
        cfg = TripletConfig(margin=1.0, similarity=SimilarityKind(name))
        for _ in range(4):
            a = rng.normal(size=4)
            p = rng.normal(size=4)
            n = rng.normal(size=4)
            loss, g = triplet_loss(a, p, n, cfg)
            gap = cfg.margin + score(cfg.similarity, a, n) - score(cfg.similarity, a, p)
            if abs(gap) < 1e-4:
                continue
            num_a = numerical_grad(lambda v: triplet_loss(v, p, n, cfg)[0], a.copy())
            num_p = numerical_grad(lambda v: triplet_loss(a, v, n, cfg)[0], p.copy())
            num_n = numerical_grad(lambda v: triplet_loss(a, p, v, cfg)[0], n.copy())
            assert max_rel_err(g.d_anchor, num_a, floor=1e-2) < 1e-6
            assert max_rel_err(g.d_positive, num_p, floor=1e-2) < 1e-6
            assert max_rel_err(g.d_negative, num_n, floor=1e-2) < 1e-6


def test_triplet_validates():
    with pytest.raises(ConfigError):
        TripletConfig(margin=0.0)
    cfg = TripletConfig(margin=0.1)
    with pytest.raises(ValueError):
        triplet_loss(np.ones(3), np.ones(2), np.ones(3), cfg)

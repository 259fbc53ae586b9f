"""Central finite-difference gradient checking helpers.

`component_checks` runs the standard battery of named fixtures (scores,
losses, encoder, full pipeline, baselines) and reports a max relative error
per component; the command line front end prints these and the test suite
holds them to their tolerances.
"""

from __future__ import annotations

import numpy as np


def numerical_grad_scalar(f, x: float, step: float = 1e-6) -> float:
    """Central difference df/dx for scalar f of a scalar."""
    return (f(x + step) - f(x - step)) / (2.0 * step)


def numerical_grad(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar f w.r.t. every entry of x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f(x)
        flat[i] = orig - step
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def max_rel_err(analytic, numeric, floor: float = 1.0) -> float:
    """Worst per-entry relative error, with an absolute floor.

    err_i = |a_i - n_i| / max(|a_i|, |n_i|, floor): relative above the floor,
    absolute below it, so near-zero entries are not judged by their own
    (noise-dominated) magnitude.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def _flat_params(net):
    return np.concatenate([a.ravel() for a in (*net.weights, *net.biases)])


def _load_params(net, flat):
    i = 0
    for arrs in (net.weights, net.biases):
        for a in arrs:
            a[...] = flat[i : i + a.size].reshape(a.shape)
            i += a.size


def _score_fixture(rng, sim, d=5):
    """A pair of vectors kept away from the angular endpoints."""
    from .similarity import score

    while True:
        x1 = rng.normal(size=d)
        x2 = rng.normal(size=d)
        cos = x1 @ x2 / (np.linalg.norm(x1) * np.linalg.norm(x2))
        if abs(cos) < 0.9:
            return x1, x2


def component_checks(seed: int = 0) -> list:
    """[(component, max_rel_err, tolerance)] over the standard fixtures.

    Tolerances follow the per-kind rule: 1e-6 for closed-form scalar maps,
    1e-4 for whole-pipeline compositions through the encoder.  Hidden
    activations in the finite-difference fixtures are tanh, so no relu kink
    sits inside the perturbation window.
    """
    from .baselines import (
        ProxyBank,
        TripletConfig,
        contrastive_loss,
        init_proxy_bank,
        proxy_gip_ce,
        softmax_ce,
        triplet_loss,
    )
    from .encoder import backward, forward, init_encoder
    from .losses import LossConfig, PairBatch, batch_loss, pair_loss, pair_loss_grad
    from .numkit import Rng
    from .similarity import (
        KINDS,
        SimilarityKind,
        score,
        score_grad,
        score_matrix,
        score_matrix_grad_left,
    )

    rng = Rng(seed)
    out = []

    # scalar score gradients, every kind
    for kind in KINDS:
        sim = SimilarityKind(kind, b_theta=0.3)
        x1, x2 = _score_fixture(rng.stream(("score", kind)), sim)
        d1, d2, dbt = score_grad(sim, x1, x2)
        n1 = numerical_grad(lambda v: score(sim, v, x2), x1.copy())
        n2 = numerical_grad(lambda v: score(sim, x1, v), x2.copy())
        err = max(max_rel_err(d1, n1), max_rel_err(d2, n2))
        if kind == "generalized_inner":
            nbt = numerical_grad_scalar(
                lambda b: score(SimilarityKind(kind, b_theta=b), x1, x2), 0.3
            )
            err = max(err, max_rel_err(np.array([dbt]), np.array([nbt])))
        out.append((f"score_{kind}", err, 1e-6))

    # scalar pair losses, every variant
    for variant in ("naive", "balanced", "simple_final"):
        cfg = LossConfig(variant=variant, r=3.0, alpha=0.2, b=0.1)
        errs = []
        for s in (-1.5, -0.2, 0.4, 2.0):
            for y in (0, 1):
                d_s, d_b = pair_loss_grad(cfg, s, y)
                n_s = numerical_grad_scalar(lambda v: pair_loss(cfg, v, y), s)
                errs.append(max_rel_err(np.array([d_s]), np.array([n_s]), floor=1e-3))
        out.append((f"pair_loss_{variant}", max(errs), 1e-6))

    # batched loss: gradients w.r.t. all scores and the shared bias
    for variant in ("naive", "balanced", "simple_final"):
        cfg = LossConfig(variant=variant, r=2.0, alpha=0.1, b=0.05)
        srng = rng.stream(("batch", variant))
        scores = srng.normal(size=12)
        labels = (srng.uniform(size=12) < 0.4).astype(int)

        def f_scores(v, cfg=cfg, labels=labels):
            return batch_loss(cfg, PairBatch(v, labels))[0]

        _, d_scores, d_b = batch_loss(cfg, PairBatch(scores, labels))
        n_scores = numerical_grad(f_scores, scores.copy())
        n_b = numerical_grad_scalar(
            lambda b, cfg=cfg: batch_loss(
                LossConfig(cfg.variant, cfg.r, cfg.alpha, b), PairBatch(scores, labels)
            )[0],
            cfg.b,
        )
        err = max(
            max_rel_err(d_scores, n_scores, floor=1e-3),
            max_rel_err(np.array([d_b]), np.array([n_b]), floor=1e-3),
        )
        out.append((f"batch_loss_{variant}", err, 1e-6))

    # encoder backward against a fixed linear readout
    erng = rng.stream("encoder")
    net = init_encoder([4, 6, 3], erng.stream("init"), activation="tanh")
    x = erng.normal(size=(3, 4))
    readout = erng.normal(size=(3, 3))

    def f_net(flat):
        _load_params(net, flat)
        feats, _ = forward(net, x)
        return float(np.sum(readout * feats))

    flat0 = _flat_params(net)
    feats, cache = forward(net, x)
    grads = backward(net, cache, readout)
    analytic = np.concatenate([a.ravel() for a in (*grads.weights, *grads.biases)])
    numeric = numerical_grad(f_net, flat0.copy())
    _load_params(net, flat0)
    out.append(("encoder_backward", max_rel_err(analytic, numeric, floor=1e-3), 1e-4))

    # full pipeline: params -> features -> score matrix -> batch loss
    for kind in KINDS:
        crng = rng.stream(("composition", kind))
        sim = SimilarityKind(kind, b_theta=0.3)
        cfg = LossConfig(variant="simple_final", r=3.0, alpha=0.1, b=0.1, similarity=sim)
        for attempt in range(32):
            arng = crng.stream(("attempt", attempt))
            pnet = init_encoder([4, 5, 3], arng.stream("init"), activation="tanh")
            px = arng.normal(size=(3, 4))
            qfeat = arng.normal(size=(6, 3))
            qlabels = arng.integers(0, 2, size=6)
            blabels = arng.integers(0, 2, size=3)
            pf, _ = forward(pnet, px)
            cos = score_matrix(SimilarityKind("cosine"), pf, qfeat)
            if np.max(np.abs(cos)) < 0.9:  # keep angular away from its endpoints
                break
        y = (blabels[:, None] == qlabels[None, :]).astype(int).ravel()

        def f_pipe(flat, b=None, b_theta=None):
            _load_params(pnet, flat)
            s = sim if b_theta is None else SimilarityKind(kind, b_theta=b_theta)
            c = cfg if b is None else LossConfig(cfg.variant, cfg.r, cfg.alpha, b, similarity=s)
            if b is None and b_theta is not None:
                c = LossConfig(cfg.variant, cfg.r, cfg.alpha, cfg.b, similarity=s)
            feats, _ = forward(pnet, px)
            sc = score_matrix(s, feats, qfeat).ravel()
            return batch_loss(c, PairBatch(sc, y))[0]

        flat0 = _flat_params(pnet)
        feats, cache = forward(pnet, px)
        sc = score_matrix(sim, feats, qfeat)
        _, d_scores, d_b = batch_loss(cfg, PairBatch(sc.ravel(), y))
        d_feats, d_btheta = score_matrix_grad_left(sim, feats, qfeat, d_scores.reshape(3, 6))
        grads = backward(pnet, cache, d_feats)
        analytic = np.concatenate([a.ravel() for a in (*grads.weights, *grads.biases)])
        numeric = numerical_grad(f_pipe, flat0.copy())
        err = max_rel_err(analytic, numeric, floor=1e-3)
        n_b = numerical_grad_scalar(lambda b: f_pipe(flat0, b=b), cfg.b)
        err = max(err, max_rel_err(np.array([d_b]), np.array([n_b]), floor=1e-3))
        if kind == "generalized_inner":
            n_bt = numerical_grad_scalar(lambda t: f_pipe(flat0, b_theta=t), 0.3)
            err = max(err, max_rel_err(np.array([d_btheta]), np.array([n_bt]), floor=1e-3))
        _load_params(pnet, flat0)
        out.append((f"composition_{kind}", err, 1e-4))

    # proxy cross entropies: feature, proxies and b_theta
    for name, normalize, b_theta, margin in (
        ("softmax_ce", False, 0.0, 0.0),
        ("proxy_gip_ce", True, 0.3, 0.2),
    ):
        prng = rng.stream(("proxy", name))
        bank = init_proxy_bank(
            prng.stream("bank"), 4, 5,
            normalize_proxies=normalize, b_theta=b_theta, margin=margin,
        )
        feat = prng.normal(size=5)
        label = 2
        ce = softmax_ce if name == "softmax_ce" else proxy_gip_ce
        _, g = ce(bank, feat, label)
        n_x = numerical_grad(lambda v: ce(bank, v, label)[0], feat.copy())
        n_w = numerical_grad(
            lambda w: ce(
                ProxyBank(w, normalize_proxies=normalize, b_theta=bank.b_theta,
                          margin=margin),
                feat, label,
            )[0],
            bank.proxies.copy(),
        )
        err = max(
            max_rel_err(g.d_feature, n_x, floor=1e-3),
            max_rel_err(g.d_proxies, n_w, floor=1e-3),
        )
        if name == "proxy_gip_ce":
            n_bt = numerical_grad_scalar(
                lambda t: proxy_gip_ce(
                    ProxyBank(bank.proxies, normalize_proxies=normalize, b_theta=t,
                              margin=margin),
                    feat, label,
                )[0],
                b_theta,
            )
            err = max(err, max_rel_err(np.array([g.d_btheta]), np.array([n_bt]), floor=1e-3))
        out.append((name, err, 1e-6))

    # contrastive hinge away from its kinks
    hrng = rng.stream("contrastive")
    margin = 0.5
    scores = np.array([0.9, -0.8, 0.2, -0.1]) + 0.01 * hrng.normal(size=4)
    labels = np.array([1, 0, 0, 1])
    _, d_scores = contrastive_loss(PairBatch(scores, labels), margin)
    n_scores = numerical_grad(
        lambda v: contrastive_loss(PairBatch(v, labels), margin)[0], scores.copy()
    )
    out.append(
        ("contrastive_loss", max_rel_err(d_scores, n_scores, floor=1e-3), 1e-6)
    )

    # triplet with an active margin (re-draw until clear of the hinge)
    trng = rng.stream("triplet")
    tcfg = TripletConfig(margin=5.0, similarity=SimilarityKind("generalized_inner", 0.3))
    for attempt in range(32):
        arng = trng.stream(("attempt", attempt))
        a = arng.normal(size=4)
        p = arng.normal(size=4)
        n = arng.normal(size=4)
        loss, g = triplet_loss(a, p, n, tcfg)
        if loss > 0.05:
            break
    n_a = numerical_grad(lambda v: triplet_loss(v, p, n, tcfg)[0], a.copy())
    n_p = numerical_grad(lambda v: triplet_loss(a, v, n, tcfg)[0], p.copy())
    n_n = numerical_grad(lambda v: triplet_loss(a, p, v, tcfg)[0], n.copy())
    err = max(
        max_rel_err(g.d_anchor, n_a, floor=1e-3),
        max_rel_err(g.d_positive, n_p, floor=1e-3),
        max_rel_err(g.d_negative, n_n, floor=1e-3),
    )
    out.append(("triplet_loss", err, 1e-6))
    return out

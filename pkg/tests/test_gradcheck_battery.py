from pairsim.gradcheck import component_checks

EXPECTED = {
    "score_generalized_inner", "score_inner", "score_cosine", "score_angular",
    "pair_loss_naive", "pair_loss_balanced", "pair_loss_simple_final",
    "batch_loss_naive", "batch_loss_balanced", "batch_loss_simple_final",
    "encoder_backward",
    "composition_generalized_inner", "composition_inner",
    "composition_cosine", "composition_angular",
    "softmax_ce", "proxy_gip_ce", "contrastive_loss", "triplet_loss",
}


def test_battery_covers_every_component():
    rows = component_checks(0)
    assert {name for name, _, _ in rows} == EXPECTED


def test_battery_within_tolerance_over_seeds():
    for seed in range(4):
        for name, err, tol in component_checks(seed):
            assert err < tol, f"{name} at seed {seed}: {err:.3e} >= {tol:g}"


def test_battery_deterministic():
    assert component_checks(3) == component_checks(3)

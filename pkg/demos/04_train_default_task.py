"""
Training the default task end to end
====================================

Run the full momentum-encoder training loop on the desk-scale task,
watch verification quality improve epoch by epoch, and keep the
artifacts: a step-level run log, a checkpoint, and an ROC plot.
"""

from dataclasses import replace

import numpy as np

from pairsim import (
    GenSpec,
    TrainConfig,
    build_eval_pairs,
    encode,
    final_report,
    generate,
    render_roc_svg,
    roc_points,
    split,
    train,
)

ds = generate(GenSpec(seed=0))

# the tuned desk recipe: alpha = 0.1 from the standard sweep grid suits
# this task size, and weight decay is lifted so the late epochs do not
# grind the feature norms back down and erode the separation margin
cfg = TrainConfig(eval_every=10, seed=0)
cfg = replace(cfg, loss=replace(cfg.loss, alpha=0.1),
              sgd=replace(cfg.sgd, weight_decay=0.0))

log = train(cfg, ds)

print("epoch    eer    tpr@far=0.01   margin")
for rec in log.epochs:
    if "eval" in rec:
        e = rec["eval"]
        print(f"{rec['epoch']:>5}   {e['eer']:.4f}   {e['tpr_at_far']['0.01']:>9.4f}"
              f"   {e['desideratum_margin']:+.3f}")

final = final_report(log)
print(f"\nfinal EER {final['eer']:.4f}, held-out margin "
      f"{final['desideratum_margin']:+.3f}")
if final["desideratum_margin"] > 0:
    print("margin is positive: every same-class pair outscores every "
          "cross-class pair, so one threshold separates them all")

# cash that guarantee in: audit the gap on the held-out features and
# cluster at its midpoint.  (The trained bias -b is also a threshold
# candidate, but at alpha = 0.1 its equilibrium sits below the gap, so
# the audited midpoint is the calibrated choice.)
from pairsim import cluster_by_threshold, clustering_accuracy, score_matrix

tr, va, _ = split(ds, (1.0 - cfg.val_fraction, cfg.val_fraction, 0.0), seed=cfg.seed)
sim = cfg.loss.similarity
feats = encode(log.encoder, va.inputs)
scores = score_matrix(sim, feats, feats)
iu = np.triu_indices(len(feats), 1)
same = va.labels[iu[0]] == va.labels[iu[1]]
mid = 0.5 * (scores[iu][same].min() + scores[iu][~same].max())
clusters = cluster_by_threshold(feats, sim, mid)
print(f"clustering at the gap midpoint {mid:+.2f}: "
      f"{clusters.max() + 1} clusters, "
      f"accuracy {clustering_accuracy(clusters, va.labels):.3f}")

# artifacts: runlog.jsonl + summary.json + checkpoint.bin, written
# byte-deterministically so reruns diff clean
from pairsim import save_runlog

save_runlog(log, "/tmp/desk_run")
print("\nwrote /tmp/desk_run/{runlog.jsonl,summary.json,checkpoint.bin}")

# before/after ROC on the same held-out pairs.  train() carves its val
# split with the run seed, so the split above recovers exactly that set.
raw = build_eval_pairs(va.inputs / np.linalg.norm(va.inputs, axis=1, keepdims=True),
                       va.labels, 2000, 2000, seed=cfg.seed, sim=sim)
learned = build_eval_pairs(feats, va.labels, 2000, 2000, seed=cfg.seed, sim=sim)
svg = render_roc_svg([
    ("raw inputs", roc_points(raw)),
    ("trained encoder", roc_points(learned)),
])
with open("/tmp/desk_run/roc.svg", "w") as f:
    f.write(svg)
print("wrote /tmp/desk_run/roc.svg")

"""Train on the synthetic edge-count task: structure-blind features.

Every graph has 3 nodes with features drawn uniformly from the unit disk
and a label equal to its edge count, so the features alone carry no
signal. A plain GCN does poorly; attach the learnable local-ECT encoding
(trainable directions) and the same backbone solves the task.

Takes about a minute. Run: python3 demos/train_synthetic.py
"""
import time

from leapgraph import (LeapConfig, ModelConfig, SyntheticSpec, TrainConfig,
                       generate_synthetic, train_eval)

dataset = generate_synthetic(SyntheticSpec(count=600, seed=0))
train_cfg = TrainConfig(epochs=30, batch_size=32, folds=2, seed=0)

print(f"{len(dataset)} graphs, 4 classes, 2 folds, up to 30 epochs\n")

for label, pe_cfg, in_dim in (
    ("plain GCN", None, 2),
    ("GCN + learnable local-ECT encoding",
     LeapConfig(hops=(1,), out_dim=10, learn_directions=True, seed=0), 12),
):
    model_cfg = ModelConfig("gcn", layers=5, hidden=32, in_dim=in_dim,
                            out_dim=4)
    t0 = time.time()
    report = train_eval(model_cfg, pe_cfg, dataset, train_cfg)
    acc = report["mean"]["accuracy"]
    std = report["std"]["accuracy"]
    print(f"{label:38s} test accuracy {acc:.3f} +/- {std:.3f} "
          f"({time.time() - t0:.0f}s)")

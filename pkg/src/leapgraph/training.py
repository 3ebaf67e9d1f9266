"""Adam optimization, losses, metrics, k-fold cross-validation, and the
full train/evaluate loop with early stopping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.stats import rankdata

from . import autodiff as ad
from .ect import renormalize_directions
from .encoders import (LeapConfig, LeapParams, init_leap_params,
                       leap_encode_value, merge_neighborhood_batches,
                       neighborhood_batch, lape, rwpe)
from .graphs import adjacency
from .models import (ModelConfig, attention_mask, block_diag, block_mask,
                     gcn_propagation, init_model_params, model_forward,
                     pooling_matrix)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 10
    folds: int = 5
    seed: int = 0
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("epochs, batch size, and lr must be positive")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.loss not in ("cross_entropy", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class BaselinePeConfig:
    kind: str  # "rwpe" | "lape"
    dim: int = 10


# -- optimizer -------------------------------------------------------------

class AdamState:
    def __init__(self):
        self.t = 0
        self.m = {}
        self.v = {}


def adam_step(params, state: AdamState, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8,
              directions=None) -> None:
    """One bias-corrected Adam update over the trainable parameters.

    If a trainable DirectionSet is given, its vectors are projected back
    onto the unit sphere after the step.
    """
    state.t += 1
    t = state.t
    for p in params:
        if not p.trainable:
            continue
        key = id(p)
        g = p.grad
        m = state.m.get(key)
        if m is None:
            m = np.zeros_like(p.data)
            state.v[key] = np.zeros_like(p.data)
        v = state.v[key]
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        state.m[key], state.v[key] = m, v
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        p.value.data -= lr * mhat / (np.sqrt(vhat) + eps)
    if directions is not None and directions.trainable:
        renormalize_directions(directions)


# -- losses ----------------------------------------------------------------

def cross_entropy(logits: ad.Value, labels) -> ad.Value:
    """Mean log-sum-exp-stable cross entropy over a batch of logit rows."""
    labels = np.asarray(labels, dtype=np.intp)
    n, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError("label out of range")
    shift = ad.Value(logits.data.max(axis=1, keepdims=True))  # detached
    z = logits - shift
    lse = ad.log(ad.vsum(ad.exp(z), axis=1, keepdims=True))
    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    picked = ad.vsum(z * ad.Value(onehot), axis=1, keepdims=True)
    return ad.vmean(lse - picked)


def mse(pred: ad.Value, target) -> ad.Value:
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - ad.Value(target)
    return ad.vmean(diff * diff)


# -- metrics ---------------------------------------------------------------

def accuracy(preds, labels) -> float:
    preds, labels = np.asarray(preds), np.asarray(labels)
    if preds.size == 0:
        raise ValueError("empty predictions")
    return float((preds == labels).mean())


def auroc(scores, labels) -> float:
    """Rank-statistic AUROC with midrank tie handling."""
    scores, labels = np.asarray(scores, float), np.asarray(labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc needs both classes present")
    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def r2(preds, targets) -> float:
    """1 - SS_res/SS_tot, averaged over target dimensions."""
    preds = np.atleast_2d(np.asarray(preds, float))
    targets = np.atleast_2d(np.asarray(targets, float))
    ss_res = ((preds - targets) ** 2).sum(axis=0)
    ss_tot = ((targets - targets.mean(axis=0)) ** 2).sum(axis=0)
    vals = np.where(ss_tot > 0, 1.0 - ss_res / np.maximum(ss_tot, 1e-300),
                    np.where(ss_res > 0, -np.inf, 1.0))
    return float(vals.mean())


# -- folds -----------------------------------------------------------------

@dataclass
class FoldAssignment:
    folds: np.ndarray
    stratified: bool
    warning: str = ""


def kfold_split(dataset, folds: int, seed: int = 0,
                stratified: bool = True) -> FoldAssignment:
    """Deterministic fold assignment; sizes differ by at most one.

    Stratification is dropped (with a warning recorded) when some class
    has fewer members than folds, or for regression targets.
    """
    n = len(dataset.graphs)
    if n < folds:
        raise ValueError("dataset smaller than fold count")
    rng = np.random.default_rng(seed)
    assign = np.zeros(n, dtype=np.intp)
    warning = ""
    if stratified and dataset.task == "classification":
        labels = np.asarray(dataset.targets, dtype=np.intp)
        counts = np.bincount(labels)
        if counts[counts > 0].min() < folds:
            warning = "class smaller than fold count; downgraded to unstratified"
            stratified = False
    elif stratified:
        stratified = False
    if stratified:
        labels = np.asarray(dataset.targets, dtype=np.intp)
        for c in np.unique(labels):
            idx = np.flatnonzero(labels == c)
            rng.shuffle(idx)
            assign[idx] = np.arange(len(idx)) % folds
    else:
        idx = rng.permutation(n)
        assign[idx] = np.arange(n) % folds
    return FoldAssignment(assign, stratified, warning)


# -- batched graph views ---------------------------------------------------

class _GraphView:
    """Per-graph constants reused across epochs."""

    __slots__ = ("features", "prop", "mask", "size", "target", "nbs")

    def __init__(self, g, target, backbone, hops):
        self.features = g.features
        A = adjacency(g)
        self.prop = gcn_propagation(A) if backbone == "gcn" else None
        self.mask = attention_mask(A) if backbone == "gat" else None
        self.size = g.num_nodes
        self.target = target
        self.nbs = ([neighborhood_batch(g, m) for m in hops]
                    if hops is not None else None)


def _batch_structures(views, backbone):
    sizes = [v.size for v in views]
    pool = pooling_matrix(sizes)
    if backbone == "gcn":
        struct = block_diag([v.prop for v in views])
    elif backbone == "gat":
        full = block_mask(sizes)
        o = 0
        for v in views:
            full[o:o + v.size, o:o + v.size] = v.mask
            o += v.size
        struct = full
    else:
        struct = block_mask(sizes)
    return struct, pool


def _batch_outputs(views, model_cfg, model_params, leap_params, static_pe):
    """Forward pass over a list of graph views; returns graph-level outputs."""
    struct, pool = _batch_structures(views, model_cfg.backbone)
    feats = np.concatenate([v.features for v in views], axis=0)
    x = ad.Value(feats)
    if leap_params is not None:
        nbs = [merge_neighborhood_batches([v.nbs[i] for v in views])
               for i in range(len(views[0].nbs))]
        pe = leap_encode_value(nbs, leap_params)
        x = ad.concat([x, pe], axis=-1)
    elif static_pe is not None:
        x = ad.Value(np.concatenate(
            [feats, np.concatenate([static_pe[id(v)] for v in views], axis=0)],
            axis=-1))
    return model_forward(model_cfg, model_params, x, struct, pool)


# -- the experiment loop ---------------------------------------------------

def _stratified_holdout(indices, labels, frac, rng):
    """Split indices into (train, held-out) with a stratified held-out part."""
    held = []
    if labels is not None:
        for c in np.unique(labels):
            idx = indices[labels == c]
            idx = idx[rng.permutation(len(idx))]
            k = max(1, int(round(frac * len(idx)))) if len(idx) > 1 else 0
            held.extend(idx[:k])
    else:
        idx = indices[rng.permutation(len(indices))]
        held.extend(idx[:max(1, int(round(frac * len(idx))))])
    if not held and len(indices) >= 2:
        # tiny pools (singleton classes) still need a validation graph
        held.append(indices[rng.integers(len(indices))])
    held = np.asarray(sorted(held), dtype=np.intp)
    train = np.asarray([i for i in indices if i not in set(held.tolist())],
                       dtype=np.intp)
    return train, held


def _evaluate(views, idx, model_cfg, model_params, leap_params, static_pe,
              cfg: TrainConfig):
    """Loss and task metrics over an index set, in evaluation batches."""
    outs, targets = [], []
    for lo in range(0, len(idx), cfg.batch_size):
        chunk = [views[i] for i in idx[lo:lo + cfg.batch_size]]
        out = _batch_outputs(chunk, model_cfg, model_params, leap_params,
                             static_pe)
        outs.append(out.data.copy())
        targets.extend(v.target for v in chunk)
    outs = np.concatenate(outs, axis=0)
    metrics = {}
    if cfg.loss == "cross_entropy":
        labels = np.asarray(targets, dtype=np.intp)
        shift = outs - outs.max(axis=1, keepdims=True)
        logp = shift - np.log(np.exp(shift).sum(axis=1, keepdims=True))
        metrics["loss"] = float(-logp[np.arange(len(labels)), labels].mean())
        metrics["accuracy"] = accuracy(outs.argmax(axis=1), labels)
        if outs.shape[1] == 2 and len(np.unique(labels)) == 2:
            metrics["auroc"] = auroc(outs[:, 1] - outs[:, 0], labels)
    else:
        t = np.asarray(targets, dtype=np.float64)
        metrics["loss"] = float(((outs - t) ** 2).mean())
        metrics["r2"] = r2(outs, t)
    return metrics


def _snapshot(params):
    return [p.data.copy() for p in params]


def _restore(params, snap):
    for p, s in zip(params, snap):
        p.value.data[...] = s


def train_eval(model_cfg: ModelConfig, pe_cfg, dataset,
               cfg: TrainConfig) -> dict:
    """K-fold cross-validated training with early stopping.

    Returns a JSON-ready report with per-fold metrics, their mean and
    standard deviation, the configuration echo, and the seed. The learned
    parameters of the best-performing fold are attached under
    "_best_fold_params" (stripped before serialization by the CLI).
    """
    if model_cfg.task == "regression" and cfg.loss != "mse":
        raise ValueError("regression tasks require the mse loss")
    hops = pe_cfg.hops if isinstance(pe_cfg, LeapConfig) else None
    views = [_GraphView(g, t, model_cfg.backbone, hops)
             for g, t in zip(dataset.graphs, dataset.targets)]

    static_pe = None
    if isinstance(pe_cfg, BaselinePeConfig):
        enc = rwpe if pe_cfg.kind == "rwpe" else lape
        static_pe = {id(v): enc(g, pe_cfg.dim)
                     for v, g in zip(views, dataset.graphs)}

    assign = kfold_split(dataset, cfg.folds, cfg.seed,
                         stratified=dataset.task == "classification")
    labels = (np.asarray(dataset.targets, dtype=np.intp)
              if dataset.task == "classification" else None)

    fold_reports = []
    best_overall = (-math.inf, None)
    for fold in range(cfg.folds):
        rng = np.random.default_rng(cfg.seed * 1000 + fold)
        test_idx = np.flatnonzero(assign.folds == fold)
        pool_idx = np.flatnonzero(assign.folds != fold)
        train_idx, val_idx = _stratified_holdout(
            pool_idx, labels[pool_idx] if labels is not None else None,
            0.1, rng)

        model_params = init_model_params(model_cfg, rng)
        leap_params = None
        if isinstance(pe_cfg, LeapConfig):
            # each fold is an independent replicate: draw the encoding
            # initialization from the fold rng like the model parameters
            leap_params = init_leap_params(pe_cfg, dataset.feature_dim, rng)
        trainable = list(model_params.values())
        directions = None
        if leap_params is not None:
            trainable.extend(leap_params.parameters())
            directions = leap_params.directions

        state = AdamState()
        best = {"epoch": -1, "val_loss": math.inf, "snap": None}
        epochs_run = 0
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(train_idx))
            for lo in range(0, len(order), cfg.batch_size):
                chunk = [views[train_idx[i]]
                         for i in order[lo:lo + cfg.batch_size]]
                out = _batch_outputs(chunk, model_cfg, model_params,
                                     leap_params, static_pe)
                if cfg.loss == "cross_entropy":
                    loss = cross_entropy(out, [v.target for v in chunk])
                else:
                    loss = mse(out, np.asarray([v.target for v in chunk],
                                               dtype=np.float64))
                if not np.isfinite(loss.data):
                    raise FloatingPointError(
                        f"non-finite training loss at fold {fold} epoch {epoch}")
                ad.backward(loss)
                adam_step(trainable, state, cfg.lr, cfg.beta1, cfg.beta2,
                          cfg.eps, directions)
                for p in trainable:
                    p.zero_grad()
            epochs_run = epoch + 1
            val = _evaluate(views, val_idx, model_cfg, model_params,
                            leap_params, static_pe, cfg)
            if val["loss"] < best["val_loss"] - 1e-12:
                best = {"epoch": epoch, "val_loss": val["loss"],
                        "snap": _snapshot(trainable),
                        "val_metrics": val}
            elif epoch - best["epoch"] >= cfg.patience:
                break

        if best["snap"] is not None:
            _restore(trainable, best["snap"])
        test = _evaluate(views, test_idx, model_cfg, model_params,
                         leap_params, static_pe, cfg)
        report = {"fold": fold, "best_epoch": best["epoch"],
                  "epochs_run": epochs_run,
                  "val": best.get("val_metrics", {"loss": best["val_loss"]}),
                  "test": test}
        fold_reports.append(report)
        score = (test.get("accuracy") if cfg.loss == "cross_entropy"
                 else -test["loss"])
        if score is not None and score > best_overall[0]:
            best_overall = (score, {"model": model_params,
                                    "leap": leap_params, "fold": fold})

    keys = sorted({k for r in fold_reports for k in r["test"]})
    mean = {k: float(np.mean([r["test"][k] for r in fold_reports
                              if k in r["test"]])) for k in keys}
    std = {k: float(np.std([r["test"][k] for r in fold_reports
                            if k in r["test"]])) for k in keys}
    val_keys = sorted({k for r in fold_reports for k in r["val"]})
    val_mean = {k: float(np.mean([r["val"][k] for r in fold_reports
                                  if k in r["val"]])) for k in val_keys}
    return {
        "config": {"model": asdict(model_cfg),
                   "pe": asdict(pe_cfg) if pe_cfg is not None else None,
                   "train": asdict(cfg)},
        "seed": cfg.seed,
        "fold_warning": assign.warning,
        "folds": fold_reports,
        "mean": mean,
        "std": std,
        "val_mean": val_mean,
        "_best_fold_params": best_overall[1],
    }

"""Two-stage training: masked-autoencoder pre-training with a 3-NN probe
for checkpoint selection, then focal-loss fine-tuning selected by
validation macro-F1. Everything is deterministic given (seed, config,
data order).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .. import metrics
from ..crops import CROP_CLASSES, class_index
from ..errors import ConfigError, ZeroMaskLoss
from ..rsd import NormStats
from . import autodiff as ad
from .checkpoint import Checkpoint
from .losses import focal_loss, mae_loss, mae_step_selection
from .network import Batch, CropModel, ModelConfig
from .optim import Adam


@dataclass
class TrainingConfig:
    batch_size: int = 64
    pretrain_steps: int = 5000
    finetune_steps: int = 5000
    validate_every: int = 250
    probe_train_cap: int = 1500
    probe_val_cap: int = 750
    eval_batch_size: int = 256


@dataclass
class ExampleArrays:
    """Column layout of a list of in-season examples for batched training."""

    values: dict[str, np.ndarray]  # sat -> (N, L, bands)
    mask: dict[str, np.ndarray]  # sat -> (N, L) bool
    labels: np.ndarray  # (N,) int, -1 when unlabeled
    meta: list = dc_field(default_factory=list)

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    def batch(self, idx: np.ndarray) -> Batch:
        return {sat: (self.values[sat][idx], self.mask[sat][idx]) for sat in self.values}

    def subset(self, idx: np.ndarray) -> "ExampleArrays":
        return ExampleArrays(
            values={s: v[idx] for s, v in self.values.items()},
            mask={s: m[idx] for s, m in self.mask.items()},
            labels=self.labels[idx],
            meta=[self.meta[i] for i in idx] if self.meta else [],
        )


def arrays_from_examples(examples: list) -> ExampleArrays:
    if not examples:
        raise ConfigError("no examples to train on")
    dtype = ad.get_default_dtype()
    sats = sorted(examples[0].series.values.keys())
    values = {
        s: np.stack([ex.series.values[s] for ex in examples]).astype(dtype) for s in sats
    }
    mask = {s: np.stack([ex.series.mask[s] for ex in examples]) for s in sats}
    labels = np.array(
        [class_index(ex.label) if ex.label else -1 for ex in examples], dtype=np.int64
    )
    return ExampleArrays(values=values, mask=mask, labels=labels, meta=list(examples))


def embed_examples(model: CropModel, arrays: ExampleArrays, batch_size: int = 256) -> np.ndarray:
    out = []
    for lo in range(0, arrays.size, batch_size):
        idx = np.arange(lo, min(lo + batch_size, arrays.size))
        out.append(model.embed(arrays.batch(idx)).data)
    return np.concatenate(out, axis=0)


def predict_probs(model: CropModel, arrays: ExampleArrays, batch_size: int = 256) -> np.ndarray:
    out = []
    for lo in range(0, arrays.size, batch_size):
        idx = np.arange(lo, min(lo + batch_size, arrays.size))
        out.append(model.predict_probs(arrays.batch(idx)))
    return np.concatenate(out, axis=0)


def knn_predict(
    train_emb: np.ndarray, train_labels: np.ndarray, query_emb: np.ndarray, k: int = 3
) -> np.ndarray:
    """Euclidean k-NN majority vote.

    Count ties break by the smallest summed neighbor distance, then by
    class index. Neighbor ordering itself ties on (distance, train index).
    """
    if train_emb.shape[0] < k:
        raise ConfigError(f"k-NN needs at least k={k} train points, got {train_emb.shape[0]}")
    preds = np.empty(query_emb.shape[0], dtype=np.int64)
    t_sq = (train_emb ** 2).sum(axis=1)
    for lo in range(0, query_emb.shape[0], 512):
        q = query_emb[lo: lo + 512]
        d2 = np.maximum(t_sq[None, :] - 2.0 * q @ train_emb.T + (q ** 2).sum(axis=1)[:, None], 0.0)
        for row in range(d2.shape[0]):
            order = np.lexsort((np.arange(d2.shape[1]), d2[row]))[:k]
            votes: dict[int, tuple[int, float]] = {}
            for idx in order:
                cls = int(train_labels[idx])
                count, dist = votes.get(cls, (0, 0.0))
                votes[cls] = (count + 1, dist + float(np.sqrt(d2[row, idx])))
            best = max(votes.items(), key=lambda kv: (kv[1][0], -kv[1][1], -kv[0]))
            preds[lo + row] = best[0]
    return preds


def knn_probe(
    train_emb: np.ndarray,
    train_labels: np.ndarray,
    val_emb: np.ndarray,
    val_labels: np.ndarray,
    k: int = 3,
) -> float:
    """Macro-F1 of a k-NN classifier fit on train embeddings."""
    preds = knn_predict(train_emb, train_labels, val_emb, k=k)
    records = [
        metrics.PredictionRecord(
            field_id="", probs=_onehot(p), true_label=CROP_CLASSES[t]
        )
        for p, t in zip(preds, val_labels)
    ]
    return metrics.macro_f1(metrics.precision_recall(records))


def _onehot(cls: int) -> np.ndarray:
    v = np.zeros(len(CROP_CLASSES))
    v[cls] = 1.0
    return v


def _mae_batch_loss(model: CropModel, batch: Batch, rng: np.random.Generator):
    """One masked-reconstruction forward pass; redraws masks if none landed."""
    seqs = model.tokenize_batch(batch)
    for _ in range(16):
        masked = {
            sat: model.mae_mask(seqs[sat], model.config.mask_prob.get(sat, 0.5), rng)
            for sat in seqs
        }
        if any(seq.masked.any() for seq in masked.values()):
            break
    else:
        raise ZeroMaskLoss("mask redraw limit reached")
    embedding = model.encode(masked)
    recon = model.decode(embedding)
    spt = model.config.steps_per_token
    target = {sat: batch[sat][0] for sat in recon}
    step_sel = {
        sat: mae_step_selection(masked[sat].valid, masked[sat].masked, spt) for sat in recon
    }
    step_valid = {sat: batch[sat][1] for sat in recon}
    return mae_loss(recon, target, step_sel, step_valid)


def holdout_mae_mse(model: CropModel, arrays: ExampleArrays, seed: int, batch_size: int = 256) -> float:
    """Masked-reconstruction MSE on held-out data with a fixed mask draw."""
    rng = np.random.default_rng([seed, 7919])
    losses = []
    weights = []
    for lo in range(0, arrays.size, batch_size):
        idx = np.arange(lo, min(lo + batch_size, arrays.size))
        batch = arrays.batch(idx)
        loss = _mae_batch_loss(model, batch, rng)
        losses.append(float(loss.data))
        weights.append(len(idx))
    return float(np.average(losses, weights=weights))


def _batch_stream(n: int, batch_size: int, steps: int, rng: np.random.Generator):
    """Yield `steps` index batches, reshuffling each epoch."""
    produced = 0
    while produced < steps:
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            if produced >= steps:
                return
            idx = order[lo: lo + batch_size]
            if idx.size < min(batch_size, n) // 2 and n > batch_size:
                break  # drop runt batch, start a fresh epoch
            yield idx
            produced += 1


def pretrain(
    unlabeled: ExampleArrays,
    probe_train: ExampleArrays,
    probe_val: ExampleArrays,
    config: ModelConfig,
    train_cfg: TrainingConfig,
    norm_stats: NormStats | None = None,
    holdout: ExampleArrays | None = None,
) -> tuple[Checkpoint, list[dict]]:
    """Train encoder + decoders on masked reconstruction.

    At every validation interval the encoder embeds the labeled probe
    sets; a 3-NN classifier fit on the train embeddings scores macro-F1 on
    the val embeddings, and the checkpoint with the highest probe F1 is
    returned.
    """
    model = CropModel(config)
    opt = Adam(model.encoder_params(), lr=config.learning_rate)
    rng = np.random.default_rng([config.seed, 11])

    pt = _cap(probe_train, train_cfg.probe_train_cap, config.seed)
    pv = _cap(probe_val, train_cfg.probe_val_cap, config.seed + 1)

    history: list[dict] = []
    best: tuple[float, int, dict] | None = None

    def validate(step: int):
        nonlocal best
        train_emb = embed_examples(model, pt, train_cfg.eval_batch_size)
        val_emb = embed_examples(model, pv, train_cfg.eval_batch_size)
        f1 = knn_probe(train_emb, pt.labels, val_emb, pv.labels)
        entry = {"step": step, "probe_f1": f1}
        if holdout is not None:
            entry["holdout_mse"] = holdout_mae_mse(model, holdout, config.seed)
        history.append(entry)
        if best is None or f1 > best[0]:
            best = (f1, step, {k: v.data.copy() for k, v in model.params().items()})

    validate(0)
    step = 0
    for idx in _batch_stream(unlabeled.size, train_cfg.batch_size, train_cfg.pretrain_steps, rng):
        step += 1
        opt.zero_grad()
        loss = _mae_batch_loss(model, unlabeled.batch(idx), rng)
        loss.backward()
        opt.step()
        if step % train_cfg.validate_every == 0 or step == train_cfg.pretrain_steps:
            validate(step)

    f1, sel_step, params = best
    ckpt = Checkpoint(config=config, params=params, norm_stats=norm_stats, step=sel_step, selection_score=f1)
    return ckpt, history


def finetune(
    train: ExampleArrays,
    validation: ExampleArrays,
    config: ModelConfig,
    train_cfg: TrainingConfig,
    encoder_checkpoint: Checkpoint | None = None,
    norm_stats: NormStats | None = None,
) -> tuple[Checkpoint, list[dict]]:
    """Train encoder + classifier with the focal loss.

    Starts from a pre-trained encoder when one is given (the classifier
    head always starts fresh). Selects the checkpoint with the highest
    validation macro-F1.
    """
    model = CropModel(config)
    if encoder_checkpoint is not None:
        encoder_names = set(model.encoder_params().keys())
        blobs = {k: v for k, v in encoder_checkpoint.params.items() if k in encoder_names}
        model.load_params(blobs, subset=True)
    opt = Adam(model.params(), lr=config.learning_rate)
    rng = np.random.default_rng([config.seed, 13])

    history: list[dict] = []
    best: tuple[float, int, dict] | None = None

    def validate(step: int):
        nonlocal best
        probs = predict_probs(model, validation, train_cfg.eval_batch_size)
        records = [
            metrics.PredictionRecord(field_id="", probs=p, true_label=CROP_CLASSES[t])
            for p, t in zip(probs, validation.labels)
        ]
        f1 = metrics.macro_f1(metrics.precision_recall(records))
        history.append({"step": step, "val_macro_f1": f1})
        if best is None or f1 > best[0]:
            best = (f1, step, {k: v.data.copy() for k, v in model.params().items()})

    validate(0)
    step = 0
    for idx in _batch_stream(train.size, train_cfg.batch_size, train_cfg.finetune_steps, rng):
        step += 1
        opt.zero_grad()
        batch = train.batch(idx)
        embedding = model.embed(batch)
        probs = model.classify(embedding, rng=rng, training=True)
        loss = focal_loss(probs, train.labels[idx], config.focal_gamma)
        loss.backward()
        opt.step()
        if step % train_cfg.validate_every == 0 or step == train_cfg.finetune_steps:
            validate(step)

    f1, sel_step, params = best
    stats = norm_stats if norm_stats is not None else (
        encoder_checkpoint.norm_stats if encoder_checkpoint else None
    )
    ckpt = Checkpoint(config=config, params=params, norm_stats=stats, step=sel_step, selection_score=f1)
    return ckpt, history


def steps_to_reach(history: list[dict], key: str, threshold: float) -> int | None:
    """First recorded step at which history[key] >= threshold, else None."""
    for entry in history:
        if entry.get(key, float("-inf")) >= threshold:
            return entry["step"]
    return None


def _cap(arrays: ExampleArrays, cap: int, seed: int) -> ExampleArrays:
    if arrays.size <= cap:
        return arrays
    rng = np.random.default_rng([seed, 17])
    idx = np.sort(rng.choice(arrays.size, size=cap, replace=False))
    return arrays.subset(idx)

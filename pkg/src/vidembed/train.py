"""Dot-product classification against frozen prototypes: training loop
(Adam, cross-entropy over temperature-scaled cosine logits) and evaluation.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .data import l2_normalize
from .errors import DimMismatch, EmptyDataset, HeadNotTrainable
from .heads import (
    TRAINABLE_KINDS,
    classify_majority_vote,
    embed_sequence,
    head_forward,
    init_params,
)
from .optim import AdamState, adam_step
from .tensor import GradTape, Tensor, backward


@dataclass
class TrainConfig:
    head: "HeadSpec"
    lr: float = 1e-3
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    temperature: float = 10.0
    split: float = 0.8

    def validate(self):
        from .errors import ConfigInvalid

        if self.lr <= 0 or self.epochs < 1 or self.temperature <= 0:
            raise ConfigInvalid("lr, epochs, temperature must be positive")
        if not 0.0 < self.split < 1.0:
            raise ConfigInvalid("split must lie in (0, 1)")
        if self.batch_size < 1:
            raise ConfigInvalid("batch_size must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    train_acc: float
    val_acc: float
    seconds: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "train_loss", "val_loss", "train_acc", "val_acc"])
            for r in self.records:
                w.writerow(
                    [
                        r.epoch,
                        f"{r.train_loss:.6f}",
                        f"{r.val_loss:.6f}",
                        f"{r.train_acc:.6f}",
                        f"{r.val_acc:.6f}",
                    ]
                )


def logits(v, protos, temperature=10.0):
    """Temperature-scaled dot products of a unit video vector with prototypes."""
    vec = np.asarray(v.vector if hasattr(v, "vector") else v)
    if vec.shape[-1] != protos.vectors.shape[1]:
        raise DimMismatch(
            f"embedding dim {vec.shape[-1]} vs prototype dim {protos.vectors.shape[1]}"
        )
    return temperature * (protos.vectors @ vec)


def split_dataset(sequences, split, seed):
    """Deterministic seeded shuffle, then fractional train/val cut."""
    from .data import stream_rng

    perm = stream_rng(seed, "split").permutation(len(sequences))
    n_train = int(round(split * len(sequences)))
    train = [sequences[i] for i in perm[:n_train]]
    val = [sequences[i] for i in perm[n_train:]]
    return train, val


def _sample_loss(seq, params, protos_t, temperature, label):
    x = Tensor(seq.frames)
    emb = head_forward(x, params)  # (1, d_out), unit norm
    z = tn.scale(tn.matmul(emb, protos_t), temperature)
    loss = tn.softmax_cross_entropy(z, label)
    pred = int(z.data.reshape(-1).argmax())
    return loss, pred


def train(manifest, protos, config, base_dir):
    """Train an LSTM or transformer head; returns (HeadParams, TrainHistory)."""
    config.validate()
    if config.head.kind not in TRAINABLE_KINDS:
        raise HeadNotTrainable(f"{config.head.kind} head has no parameters to train")
    if not manifest.records:
        raise EmptyDataset("manifest has no videos")

    sequences = [
        s.__class__(s.video_id, l2_normalize(s.frames).astype(np.float32), s.label)
        for s in manifest.load_all(base_dir)
    ]
    train_set, val_set = split_dataset(sequences, config.split, config.seed)
    if not train_set:
        raise EmptyDataset("train split is empty")

    params = init_params(config.head, config.seed, dtype=np.float32)
    states = {
        name: AdamState(p.shape, dtype=np.float32, lr=config.lr)
        for name, p in params.tensors.items()
    }
    protos_t = Tensor(l2_normalize(protos.vectors).astype(np.float32).T)

    from .data import stream_rng

    shuffle_rng = stream_rng(config.seed, "epoch-shuffle")
    history = TrainHistory()
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(len(train_set))
        losses, correct = [], 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            for p in params.tensors.values():
                p.grad = None
            for idx in batch:
                seq = train_set[idx]
                with GradTape() as tape:
                    loss, pred = _sample_loss(
                        seq, params, protos_t, config.temperature, seq.label
                    )
                backward(tape, loss)
                losses.append(loss.item())
                correct += pred == seq.label
            inv = 1.0 / len(batch)
            for name, p in params.tensors.items():
                adam_step(p, p.grad * inv, states[name])
        val_loss, val_acc = _validate(val_set, params, protos_t, config.temperature)
        history.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=float(np.mean(losses)),
                val_loss=val_loss,
                train_acc=correct / len(train_set),
                val_acc=val_acc,
                seconds=time.perf_counter() - t0,
            )
        )
    return params, history


def _validate(val_set, params, protos_t, temperature):
    if not val_set:
        return float("nan"), float("nan")
    losses, correct = [], 0
    for seq in val_set:
        loss, pred = _sample_loss(seq, params, protos_t, temperature, seq.label)
        losses.append(loss.item())
        correct += pred == seq.label
    return float(np.mean(losses)), correct / len(val_set)


def evaluate(manifest, params, protos, base_dir, temperature=10.0, threads=1):
    """Top-1 accuracy and per-class confusion counts for any head."""
    if not manifest.records:
        raise EmptyDataset("manifest has no videos")
    c = protos.vectors.shape[0]
    confusion = np.zeros((c, c), dtype=np.int64)

    def predict(rec):
        seq = manifest.load_sequence(rec, base_dir)
        seq = seq.__class__(
            seq.video_id, l2_normalize(seq.frames).astype(np.float32), seq.label
        )
        if params.spec.kind == "majority_vote":
            return classify_majority_vote(seq, protos)
        emb = embed_sequence(seq, params)
        return int(logits(emb, protos, temperature).argmax())

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            preds = list(pool.map(predict, manifest.records))
    else:
        preds = [predict(rec) for rec in manifest.records]
    correct = 0
    for rec, pred in zip(manifest.records, preds):
        confusion[rec.label, pred] += 1
        correct += pred == rec.label
    return correct / len(manifest.records), confusion

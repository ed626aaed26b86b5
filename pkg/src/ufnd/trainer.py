"""Supervised training loop: minibatch iteration, loss / backprop /
clip / Adam stepping, per-epoch validation, best-validation weight
handling, and checkpoint round-tripping.

"Best weights are used for subsequent epochs" is implemented as
restore-on-no-improvement (rollback); plain best-checkpoint selection is
available via ``best_mode="select"``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .checkpoint import Checkpoint
from .classifier import HeadConfig, predict
from .encoder import EncoderConfig
from .errors import ArgumentError, NonFiniteError
from .metrics import Metrics, compute_metrics, confusion
from .model import Model, ModelConfig
from .numerics import (AdamState, GELU_VARIANT, RngStreams, adam_step,
                       assert_all_finite, clip_global_norm, nll_loss)
from .textprep import EncodedDataset


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    lr: float = 0.003
    clip: float = 1.0
    epochs: int = 50
    batch_size: int = 32
    dropout_rate: float = 0.1
    freeze_encoder: bool = False
    max_seq_len: int = 120
    preprocessing_enabled: bool = True
    best_mode: str = "rollback"
    checked: bool = False

    def __post_init__(self):
        if self.lr <= 0 or self.clip <= 0:
            raise ArgumentError("lr and clip must be positive")
        if self.epochs < 1:
            raise ArgumentError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ArgumentError("batch_size must be >= 2")
        if self.best_mode not in ("rollback", "select"):
            raise ArgumentError("best_mode must be 'rollback' or 'select'")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_metrics: Metrics
    seconds: float
    max_pre_clip_norm: float
    clipped_steps: int
    n_steps: int


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    total_seconds: float = 0.0
    metadata: dict = field(default_factory=dict)

    def loss_trace(self) -> list[float]:
        return [r.train_loss for r in self.epochs]

    def render(self) -> str:
        lines = [f"# train report ({self.metadata.get('rng_algorithm', '')}, "
                 f"gelu={self.metadata.get('gelu_variant', '')})"]
        for k, v in sorted(self.metadata.items()):
            lines.append(f"# {k}={v}")
        lines.append("epoch\ttrain_loss\tval_accuracy\tval_precision\t"
                     "val_recall\tval_f1\tseconds")
        for r in self.epochs:
            m = r.val_metrics
            lines.append(f"{r.epoch}\t{r.train_loss:.6f}\t{m.accuracy:.6f}\t"
                         f"{m.precision:.6f}\t{m.recall:.6f}\t{m.f1:.6f}\t"
                         f"{r.seconds:.3f}")
        lines.append(f"best_epoch\t{self.best_epoch}")
        lines.append(f"best_val_accuracy\t{self.best_val_accuracy:.6f}")
        return "\n".join(lines) + "\n"


def batch_iterator(n: int, batch_size: int, epoch: int, seed: int):
    """Deterministic per-epoch reshuffle; a final short batch of fewer
    than 2 samples is merged into the previous batch."""
    if n < 1:
        raise ArgumentError("batch_iterator requires a nonempty dataset")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed, spawn_key=(0xB, epoch))))
    perm = rng.permutation(n)
    batches = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def predict_dataset(model: Model, ds: EncodedDataset,
                    batch_size: int = 256) -> np.ndarray:
    preds = []
    for start in range(0, len(ds), batch_size):
        out = model.forward(ds.ids[start:start + batch_size],
                            ds.mask[start:start + batch_size], "eval")
        preds.append(predict(out))
    return np.concatenate(preds)


def evaluate(model: Model, ds: EncodedDataset) -> Metrics:
    if len(ds) == 0:
        raise ArgumentError("evaluate requires a nonempty dataset")
    preds = predict_dataset(model, ds)
    return compute_metrics(confusion(preds, ds.labels))


def _config_snapshot(model: Model, cfg: TrainConfig,
                     vocab_hash: str = "") -> dict:
    enc = asdict(model.config.encoder)
    enc["block_subset"] = list(model.config.encoder.block_subset)
    return {"encoder": enc, "head": asdict(model.config.head),
            "train": asdict(cfg), "vocab_hash": vocab_hash,
            "dtype": np.dtype(model.dtype).str}


def make_checkpoint(model: Model, cfg: TrainConfig, adam: dict,
                    best_state: dict, best_epoch: int, best_acc: float,
                    epoch: int, vocab_hash: str = "") -> Checkpoint:
    tensors = {}
    for name, arr in model.state_arrays().items():
        tensors["model/" + name] = arr.copy()
    for name, arr in best_state.items():
        tensors["best/" + name] = arr.copy()
    for name, state in adam.items():
        tensors[f"adam/{name}/m"] = state.m.copy()
        tensors[f"adam/{name}/v"] = state.v.copy()
    meta = {"epoch": epoch, "best_epoch": best_epoch,
            "best_val_accuracy": best_acc,
            "adam_t": {name: state.t for name, state in adam.items()},
            "rng_state": model.rng.state(),
            "rng_algorithm": RngStreams.ALGORITHM,
            "gelu_variant": GELU_VARIANT}
    return Checkpoint(config=_config_snapshot(model, cfg, vocab_hash),
                      tensors=tensors, meta=meta)


def model_from_checkpoint(ckpt: Checkpoint, which: str = "best"
                          ) -> tuple[Model, TrainConfig]:
    enc_cfg = dict(ckpt.config["encoder"])
    enc_cfg["block_subset"] = tuple(enc_cfg["block_subset"])
    config = ModelConfig(encoder=EncoderConfig(**enc_cfg),
                         head=HeadConfig(**ckpt.config["head"]))
    cfg = TrainConfig(**ckpt.config["train"])
    dtype = np.dtype(ckpt.config.get("dtype", "<f4"))
    rng = RngStreams(cfg.seed)
    model = Model(config, rng, dtype=dtype.type)
    prefix = which + "/"
    state = {name[len(prefix):]: arr for name, arr in ckpt.tensors.items()
             if name.startswith(prefix)}
    model.load_state_arrays(state)
    model.rng.restore(ckpt.meta["rng_state"])
    return model, cfg


def train(model: Model, train_ds: EncodedDataset, val_ds: EncodedDataset,
          cfg: TrainConfig, resume: Checkpoint | None = None,
          vocab_hash: str = "") -> tuple[Checkpoint, TrainReport]:
    """Train, validating each epoch, and return the best-validation
    checkpoint plus a per-epoch report."""
    if len(train_ds) == 0:
        raise ArgumentError("train requires a nonempty training set")
    if len(val_ds) == 0:
        raise ArgumentError("train requires a nonempty validation set")
    params = model.trainable_parameters(cfg.freeze_encoder)
    adam = {p.name: AdamState.for_param(p, lr=cfg.lr) for p in params}

    start_epoch = 0
    best_acc = -1.0
    best_epoch = 0
    best_state = model.snapshot()
    if resume is not None:
        model.load_state_arrays({
            name[len("model/"):]: arr for name, arr in resume.tensors.items()
            if name.startswith("model/")})
        model.rng.restore(resume.meta["rng_state"])
        for name, state in adam.items():
            state.m = resume.tensors[f"adam/{name}/m"].copy()
            state.v = resume.tensors[f"adam/{name}/v"].copy()
            state.t = resume.meta["adam_t"][name]
        start_epoch = resume.meta["epoch"]
        best_epoch = resume.meta["best_epoch"]
        best_acc = resume.meta["best_val_accuracy"]
        best_state = {name[5:]: arr.copy() for name, arr in
                      resume.tensors.items() if name.startswith("best/")}

    report = TrainReport(metadata={
        "rng_algorithm": RngStreams.ALGORITHM,
        "gelu_variant": GELU_VARIANT,
        "tokenizer": "whitespace-nonalnum (simplified, not WordPiece)",
        "best_mode": cfg.best_mode,
        "freeze_encoder": cfg.freeze_encoder,
        "seed": cfg.seed,
        "note": "validation set is the held-out test split; selection and "
                "reporting share it",
    })
    run_start = time.perf_counter()
    for epoch in range(start_epoch + 1, cfg.epochs + 1):
        t0 = time.perf_counter()
        losses = []
        max_pre = 0.0
        clipped = 0
        batches = batch_iterator(len(train_ds), cfg.batch_size, epoch, cfg.seed)
        for idx in batches:
            model.zero_grad()
            out = model.forward(train_ds.ids[idx], train_ds.mask[idx], "train")
            loss = nll_loss(out, train_ds.labels[idx])
            if cfg.checked and not np.isfinite(loss.data):
                raise NonFiniteError("loss")
            loss.backward()
            pre = clip_global_norm(params, cfg.clip)
            max_pre = max(max_pre, pre)
            if pre > cfg.clip:
                clipped += 1
            for p in params:
                adam_step(p, adam[p.name])
            if cfg.checked:
                assert_all_finite(params)
            losses.append(loss.item())
        val = evaluate(model, val_ds)
        report.epochs.append(EpochRecord(
            epoch=epoch, train_loss=float(np.mean(losses)), val_metrics=val,
            seconds=time.perf_counter() - t0, max_pre_clip_norm=max_pre,
            clipped_steps=clipped, n_steps=len(batches)))
        if val.accuracy > best_acc:
            best_acc = val.accuracy
            best_epoch = epoch
            best_state = model.snapshot()
        elif cfg.best_mode == "rollback":
            model.load_state_arrays(best_state)
    report.best_epoch = best_epoch
    report.best_val_accuracy = best_acc
    report.total_seconds = time.perf_counter() - run_start
    ckpt = make_checkpoint(model, cfg, adam, best_state, best_epoch,
                           best_acc, len(report.epochs) + start_epoch,
                           vocab_hash=vocab_hash)
    return ckpt, report


def estimate_cost(encoder_cfg: EncoderConfig, head_cfg: HeadConfig,
                  seq_len: int, batch_size: int) -> float:
    """Multiply-accumulate count per training step (backward = 2x forward)."""
    d, ff = encoder_cfg.d_model, encoder_cfg.d_ff
    per_block = (4 * seq_len * d * d          # Q/K/V/O projections
                 + 2 * seq_len * seq_len * d  # scores and weighted values
                 + 2 * seq_len * d * ff)      # feed-forward
    encoder = seq_len * d + len(encoder_cfg.block_subset) * per_block
    head = (head_cfg.d_in * head_cfg.h1 + head_cfg.h1 * head_cfg.h2
            + head_cfg.h2 * head_cfg.n_classes)
    return 3.0 * batch_size * (encoder + head)

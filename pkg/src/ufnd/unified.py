"""Two-phase orchestration: per-dataset constrained training under the
acceptance threshold (phase 1), joint training on the combined corpus
with a freshly initialized head (phase 2), plus the preprocessing
comparison and encoder-block ablation harnesses."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import Checkpoint
from .corpus import Corpus, split
from .encoder import param_count, select_blocks
from .errors import ArgumentError
from .metrics import Metrics, POSITIVE_CLASS_NOTE
from .model import Model, ModelConfig
from .numerics import RngStreams
from .textprep import EncodedDataset, PrepConfig, build_vocab, encode_corpus
from .trainer import TrainConfig, TrainReport, estimate_cost, train

DEFAULT_BATCH_SIZES = (16, 32, 64, 128, 256, 512, 1024)
DEFAULT_BLOCK_SUBSETS = ((1, 3, 5, 7, 9, 11), (1, 5, 9), (1, 9), (5,))
METRIC_COLUMNS = ("Accuracy", "Precision", "Recall", "F1-score")


@dataclass(frozen=True)
class EncodedSplit:
    """A named dataset after encoding, with its train/test partition."""
    name: str
    train: EncodedDataset
    test: EncodedDataset


@dataclass
class TrainedCell:
    dataset: str
    batch_size: int
    metrics: Metrics
    best_val_accuracy: float


@dataclass
class PhaseOneResult:
    accepted: bool
    threshold: float
    shared_model_config: ModelConfig | None = None
    shared_train_config: TrainConfig | None = None
    chosen_batch_sizes: dict[str, int] = field(default_factory=dict)
    best_metrics: dict[str, Metrics] = field(default_factory=dict)
    deficits: dict[str, float] = field(default_factory=dict)
    cells: list[TrainedCell] = field(default_factory=list)
    best_checkpoints: dict[str, Checkpoint] = field(default_factory=dict)
    minimum_deficits: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class AblationGrid:
    block_subsets: tuple[tuple[int, ...], ...] = DEFAULT_BLOCK_SUBSETS
    batch_sizes: tuple[int, ...] = (16, 32, 64, 128)


@dataclass
class AblationRow:
    label: str
    subset: tuple[int, ...]
    batch_size: int
    metrics: Metrics
    param_count: int


def check_acceptable(accuracy: float, baseline: float,
                     threshold: float) -> bool:
    """True when the accuracy deficit against the baseline is within the
    threshold (a negative deficit, i.e. exceeding the baseline, passes)."""
    if threshold <= 0:
        raise ArgumentError(f"threshold must be positive, got {threshold}")
    for name, value in (("accuracy", accuracy), ("baseline", baseline)):
        if not 0.0 < value <= 1.0:
            raise ArgumentError(f"{name} must be in (0, 1], got {value}")
    return (baseline - accuracy) <= threshold


def load_baselines(path) -> dict[str, float]:
    """Delimited baseline table: dataset-id <TAB> accuracy <TAB> citation."""
    baselines = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ArgumentError(f"bad baseline line: {line!r}")
            baselines[parts[0]] = float(parts[1])
    return baselines


def _cell_seed(base_seed: int, candidate: int, dataset: int,
               batch: int) -> int:
    # distinct deterministic seed per grid cell
    return base_seed + 1_000_003 * candidate + 1_009 * dataset + batch


def phase_one(datasets: list[EncodedSplit],
              candidates: list[tuple[ModelConfig, TrainConfig]],
              baselines: dict[str, float], threshold: float,
              batch_sizes=DEFAULT_BATCH_SIZES) -> PhaseOneResult:
    """Sweep shared configurations across all datasets.

    Every dataset is trained with the identical architecture and
    hyperparameters except batch size, which is swept per dataset.  A
    candidate is feasible when every dataset's accuracy deficit against
    its baseline is within the threshold; among feasible candidates the
    one with the highest mean best-validation accuracy wins, ties broken
    by lower estimated cost.
    """
    if not candidates:
        raise ArgumentError("phase_one requires a nonempty candidate grid")
    if threshold <= 0:
        raise ArgumentError("threshold must be positive")
    for ds in datasets:
        if ds.name not in baselines:
            raise ArgumentError(f"no baseline for dataset '{ds.name}'")

    result = PhaseOneResult(accepted=False, threshold=threshold)
    best_score = None
    min_deficits = {ds.name: float("inf") for ds in datasets}

    for ci, (model_cfg, train_cfg) in enumerate(candidates):
        chosen: dict[str, int] = {}
        best_m: dict[str, Metrics] = {}
        ckpts: dict[str, Checkpoint] = {}
        cells: list[TrainedCell] = []
        for di, ds in enumerate(datasets):
            best_acc = -1.0
            for batch in batch_sizes:
                cfg = replace(train_cfg, batch_size=batch,
                              seed=_cell_seed(train_cfg.seed, ci, di, batch))
                model = Model(model_cfg, RngStreams(cfg.seed))
                ckpt, report = train(model, ds.train, ds.test, cfg)
                metrics = report.epochs[report.best_epoch - 1].val_metrics
                cells.append(TrainedCell(
                    dataset=ds.name, batch_size=batch, metrics=metrics,
                    best_val_accuracy=report.best_val_accuracy))
                if report.best_val_accuracy > best_acc:
                    best_acc = report.best_val_accuracy
                    chosen[ds.name] = batch
                    best_m[ds.name] = metrics
                    ckpts[ds.name] = ckpt
            min_deficits[ds.name] = min(min_deficits[ds.name],
                                        baselines[ds.name] - best_acc)
        deficits = {name: baselines[name] - m.accuracy
                    for name, m in best_m.items()}
        result.cells.extend(cells)
        feasible = all(d <= threshold for d in deficits.values())
        if feasible:
            mean_acc = float(np.mean([m.accuracy for m in best_m.values()]))
            cost = estimate_cost(model_cfg.encoder, model_cfg.head,
                                 model_cfg.encoder.max_seq_len,
                                 train_cfg.batch_size)
            score = (mean_acc, -cost)
            if best_score is None or score > best_score:
                best_score = score
                result.accepted = True
                result.shared_model_config = model_cfg
                result.shared_train_config = train_cfg
                result.chosen_batch_sizes = chosen
                result.best_metrics = best_m
                result.deficits = deficits
                result.best_checkpoints = ckpts
    if not result.accepted:
        result.minimum_deficits = min_deficits
    return result


def phase_two(combined: EncodedSplit, model_cfg: ModelConfig,
              train_cfg: TrainConfig,
              encoder_source: Checkpoint | None = None
              ) -> tuple[Checkpoint, TrainReport]:
    """Joint training on the combined dataset.

    The classifier head is always freshly initialized; the encoder may
    optionally be seeded from a phase-1 checkpoint (transfer) or left at
    its fresh random initialization.
    """
    model = Model(model_cfg, RngStreams(train_cfg.seed))
    if encoder_source is not None:
        for p in model.encoder_params.parameters():
            key = "best/" + p.name
            source = encoder_source.tensors.get(key)
            # skip shape mismatches (e.g. position table at another seq len)
            if source is not None and source.shape == p.data.shape:
                p.data = source.astype(p.data.dtype, copy=True)
    model.reinit_head()
    return train(model, combined.train, combined.test, train_cfg)


def phase_two_sweep(combined: EncodedSplit, model_cfg: ModelConfig,
                    train_cfg: TrainConfig, batch_sizes=DEFAULT_BATCH_SIZES,
                    encoder_source: Checkpoint | None = None
                    ) -> list[TrainedCell]:
    cells = []
    for batch in batch_sizes:
        cfg = replace(train_cfg, batch_size=batch)
        _, report = phase_two(combined, model_cfg, cfg, encoder_source)
        cells.append(TrainedCell(
            dataset=combined.name, batch_size=batch,
            metrics=report.epochs[report.best_epoch - 1].val_metrics,
            best_val_accuracy=report.best_val_accuracy))
    return cells


@dataclass
class PreprocessingComparison:
    without: list[TrainedCell]
    with_removal: list[TrainedCell]
    seconds_without: float
    seconds_with: float
    cost_ratio: float
    seq_len_without: int
    seq_len_with: int


def compare_preprocessing(combined_corpus: Corpus, model_cfg: ModelConfig,
                          train_cfg: TrainConfig, *, ratio: float = 0.8,
                          vocab_size: int = 8000, min_freq: int = 1,
                          seq_len_without: int = 200, seq_len_with: int = 120,
                          batch_sizes=DEFAULT_BATCH_SIZES,
                          min_word_len: int = 3) -> PreprocessingComparison:
    """Run the joint training twice: short-word removal off (longer
    sequences) and on (shorter), and report both metric tables plus the
    deterministic cost ratio."""
    results = {}
    seconds = {}
    for mode, seq_len, word_len in (("without", seq_len_without, 1),
                                    ("with", seq_len_with, min_word_len)):
        prep = PrepConfig(min_word_len=word_len, max_seq_len=seq_len)
        vocab = build_vocab(combined_corpus, prep, vocab_size, min_freq)
        sc = split(combined_corpus, ratio, train_cfg.seed)
        enc_split = EncodedSplit(
            name=combined_corpus.name + f":{mode}-prep",
            train=encode_corpus(sc.train, vocab, prep),
            test=encode_corpus(sc.test, vocab, prep))
        enc_cfg = replace(model_cfg.encoder, max_seq_len=seq_len)
        mc = ModelConfig(encoder=enc_cfg, head=model_cfg.head)
        tc = replace(train_cfg, max_seq_len=seq_len,
                     preprocessing_enabled=(mode == "with"))
        t0 = time.perf_counter()
        results[mode] = phase_two_sweep(enc_split, mc, tc, batch_sizes)
        seconds[mode] = time.perf_counter() - t0
    cost_without = estimate_cost(model_cfg.encoder, model_cfg.head,
                                 seq_len_without, train_cfg.batch_size)
    cost_with = estimate_cost(model_cfg.encoder, model_cfg.head,
                              seq_len_with, train_cfg.batch_size)
    return PreprocessingComparison(
        without=results["without"], with_removal=results["with"],
        seconds_without=seconds["without"], seconds_with=seconds["with"],
        cost_ratio=cost_without / cost_with,
        seq_len_without=seq_len_without, seq_len_with=seq_len_with)


def ablate(combined: EncodedSplit, model_cfg: ModelConfig,
           train_cfg: TrainConfig,
           grid: AblationGrid = AblationGrid()) -> list[AblationRow]:
    """Train one model per (block subset, batch size) cell and emit one
    row each, ordered subsets-as-given then batch ascending."""
    rows = []
    for subset in grid.block_subsets:
        enc_cfg = select_blocks(model_cfg.encoder, subset)
        mc = ModelConfig(encoder=enc_cfg, head=model_cfg.head)
        for batch in sorted(grid.batch_sizes):
            cfg = replace(train_cfg, batch_size=batch)
            model = Model(mc, RngStreams(cfg.seed))
            _, report = train(model, combined.train, combined.test, cfg)
            rows.append(AblationRow(
                label=f"{','.join(map(str, subset))} ({batch})",
                subset=tuple(subset), batch_size=batch,
                metrics=report.epochs[report.best_epoch - 1].val_metrics,
                param_count=param_count(enc_cfg)))
    return rows


# -- table emission ----------------------------------------------------


def render_delimited(header: list[str], rows: list[list]) -> str:
    lines = ["# " + POSITIVE_CLASS_NOTE, "\t".join(header)]
    for row in rows:
        lines.append("\t".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def render_aligned(header: list[str], rows: list[list]) -> str:
    table = [header] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["# " + POSITIVE_CLASS_NOTE]
    for r in table:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def per_dataset_table(cells: list[TrainedCell], datasets: list[str],
                      batch_sizes) -> tuple[list[str], list[list]]:
    """Batch-size rows x (dataset x 4 metrics) columns."""
    header = ["Minibatch size"]
    for name in datasets:
        header.extend(f"{name} {m}" for m in METRIC_COLUMNS)
    index = {(c.dataset, c.batch_size): c.metrics for c in cells}
    rows = []
    for batch in batch_sizes:
        row = [batch]
        for name in datasets:
            m = index[(name, batch)]
            row.extend([m.accuracy, m.precision, m.recall, m.f1])
        rows.append(row)
    return header, rows


def sweep_table(cells: list[TrainedCell]) -> tuple[list[str], list[list]]:
    """Batch-size rows x 4 metric columns (combined-dataset sweeps)."""
    header = ["Minibatch size", *METRIC_COLUMNS]
    rows = [[c.batch_size, c.metrics.accuracy, c.metrics.precision,
             c.metrics.recall, c.metrics.f1]
            for c in sorted(cells, key=lambda c: c.batch_size)]
    return header, rows


def ablation_table(rows: list[AblationRow]) -> tuple[list[str], list[list]]:
    header = ["Encoder Blocks (mini batch size)", *METRIC_COLUMNS,
              "Parameters"]
    out = [[r.label, r.metrics.accuracy, r.metrics.precision,
            r.metrics.recall, r.metrics.f1, r.param_count] for r in rows]
    return header, out

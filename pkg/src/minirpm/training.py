"""Training loop, evaluation, ablation runner, and few-shot protocol.

Everything here is deterministic given (seed, data, config): epoch
shuffles and dropout masks come from seed streams derived from the master
seed, so two runs with the same inputs emit identical metrics.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import data as dio
from .engine import Tape, adam_step, bce_with_logits, scale, tensor
from .model import DualContrastNet, ModelConfig

__all__ = [
    "TrainConfig",
    "EpochMetrics",
    "RunMetrics",
    "DivergenceError",
    "make_targets",
    "train_epoch",
    "train",
    "evaluate",
    "run_ablation",
    "run_few_shot",
    "write_metrics_csv",
]

METRICS_HEADER = ("epoch", "train_loss", "train_acc", "test_acc", "seconds")


class DivergenceError(Exception):
    """Scores blew past the divergence guard; carries batch diagnostics."""


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 0.001  # fixed; no schedule
    epochs: int = 10
    seed: int = 0
    eval_every: int = 1
    score_limit: float = 1e4  # divergence guard

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm needs statistics)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float
    seconds: float


@dataclass
class RunMetrics:
    rows: list[EpochMetrics] = field(default_factory=list)

    @property
    def final_test_acc(self) -> float:
        return self.rows[-1].test_acc


def make_targets(answers: np.ndarray) -> np.ndarray:
    """One-hot [N,8] target matrix from answer indices."""
    answers = np.asarray(answers)
    if answers.size and (answers.min() < 0 or answers.max() > 7):
        raise ValueError(f"answer indices must be in 0..7, got {answers}")
    out = np.zeros((len(answers), 8))
    out[np.arange(len(answers)), answers] = 1.0
    return out


def _epoch_rng(seed: int, epoch: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, epoch, stream)))


def train_epoch(
    model: DualContrastNet,
    images: np.ndarray,
    answers: np.ndarray,
    config: TrainConfig,
    epoch: int,
    step_offset: int = 0,
) -> tuple[float, float, int]:
    """One shuffled pass; returns (mean per-puzzle loss, train accuracy, steps)."""
    n = len(images)
    order = _epoch_rng(config.seed, epoch, 0).permutation(n)
    drop_rng = _epoch_rng(config.seed, epoch, 1)
    params = model.parameters
    total_loss = 0.0
    correct = 0
    step = step_offset
    for start in range(0, n, config.batch_size):
        batch = order[start : start + config.batch_size]
        x = images[batch].astype(np.float64) / 255.0
        targets = make_targets(answers[batch])
        with Tape() as tape:
            scores = model.forward(x, training=True, rng=drop_rng)
            if np.abs(scores.data).max() > config.score_limit:
                raise DivergenceError(
                    f"epoch {epoch}, batch at {start}: |score| max "
                    f"{np.abs(scores.data).max():.3g} exceeds {config.score_limit:.3g} "
                    f"(mean {scores.data.mean():.3g})"
                )
            loss = bce_with_logits(scores, tensor(targets))
            tape.backward(scale(loss, 1.0 / len(batch)))
        step += 1
        adam_step(params, lr=config.lr, t=step)
        total_loss += float(loss.data)
        correct += int((model.predict(scores.data) == answers[batch]).sum())
    return total_loss / n, correct / n, step - step_offset


def evaluate(
    model: DualContrastNet,
    images: np.ndarray,
    answers: np.ndarray,
    batch_size: int = 64,
) -> float:
    """Fraction of puzzles whose top-scoring candidate is the stored answer."""
    n = len(images)
    if n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    correct = 0
    for start in range(0, n, batch_size):
        x = images[start : start + batch_size].astype(np.float64) / 255.0
        scores = model.forward(x, training=False)
        correct += int((model.predict(scores.data) == answers[start : start + batch_size]).sum())
    return correct / n


def train(
    model: DualContrastNet,
    train_images: np.ndarray,
    train_answers: np.ndarray,
    test_images: np.ndarray,
    test_answers: np.ndarray,
    config: TrainConfig,
) -> RunMetrics:
    metrics = RunMetrics()
    step = 0
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        loss, train_acc, steps = train_epoch(
            model, train_images, train_answers, config, epoch, step
        )
        step += steps
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            test_acc = evaluate(model, test_images, test_answers)
        else:
            test_acc = metrics.rows[-1].test_acc if metrics.rows else float("nan")
        metrics.rows.append(
            EpochMetrics(epoch, loss, train_acc, test_acc, time.perf_counter() - t0)
        )
    return metrics


def write_metrics_csv(path, metrics: RunMetrics) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        for r in metrics.rows:
            w.writerow(
                [r.epoch, f"{r.train_loss:.10f}", f"{r.train_acc:.6f}",
                 f"{r.test_acc:.6f}", f"{r.seconds:.3f}"]
            )


def _fresh_model(base: ModelConfig, ablation: str, seed: int) -> DualContrastNet:
    cfg = ModelConfig(
        image_size=base.image_size,
        channels=base.channels,
        mlp_hidden=base.mlp_hidden,
        dropout_p=base.dropout_p,
        ablation=ablation,
        seed=seed,
    )
    return DualContrastNet(cfg)


def run_ablation(
    variants: list[str],
    train_data: tuple[np.ndarray, np.ndarray],
    test_data: tuple[np.ndarray, np.ndarray],
    model_config: ModelConfig,
    train_config: TrainConfig,
    seeds: list[int],
) -> list[dict]:
    """Train each variant identically per seed; rows end with per-variant means."""
    rows = []
    accs: dict[str, list[float]] = {v: [] for v in variants}
    for variant in variants:
        for seed in seeds:
            model = _fresh_model(model_config, variant, seed)
            cfg = TrainConfig(
                batch_size=train_config.batch_size,
                lr=train_config.lr,
                epochs=train_config.epochs,
                seed=seed,
                eval_every=train_config.eval_every,
            )
            metrics = train(model, *train_data, *test_data, cfg)
            acc = metrics.final_test_acc
            accs[variant].append(acc)
            rows.append({"variant": variant, "seed": seed, "test_acc": acc})
    for variant in variants:
        rows.append(
            {"variant": variant, "seed": "mean", "test_acc": float(np.mean(accs[variant]))}
        )
    return rows


def run_few_shot(
    fractions: list[float],
    train_puzzles: list,
    test_data: tuple[np.ndarray, np.ndarray],
    model_config: ModelConfig,
    train_config: TrainConfig,
    seeds: list[int],
) -> list[dict]:
    """Train a fresh model per (fraction, seed) on a subsample, test on the
    full test set."""
    if list(fractions) != sorted(set(fractions)):
        raise ValueError("fractions must be strictly increasing")
    rows = []
    for fraction in fractions:
        for seed in seeds:
            subset = dio.subsample(train_puzzles, fraction, seed)
            images, answers = dio.to_arrays(subset)
            model = _fresh_model(model_config, model_config.ablation, seed)
            cfg = TrainConfig(
                batch_size=train_config.batch_size,
                lr=train_config.lr,
                epochs=train_config.epochs,
                seed=seed,
                eval_every=train_config.eval_every,
            )
            metrics = train(model, images, answers, *test_data, cfg)
            rows.append(
                {
                    "fraction": fraction,
                    "seed": seed,
                    "train_size": len(subset),
                    "test_acc": metrics.final_test_acc,
                }
            )
    for fraction in fractions:
        accs = [r["test_acc"] for r in rows if r.get("fraction") == fraction and r["seed"] != "mean"]
        rows.append(
            {"fraction": fraction, "seed": "mean", "train_size": "", "test_acc": float(np.mean(accs))}
        )
    return rows

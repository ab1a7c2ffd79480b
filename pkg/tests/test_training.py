"""Training loop: loss anchor, determinism, protocols, metrics."""

import csv

import numpy as np
import pytest

from minirpm.data import to_arrays
from minirpm.engine import bce_with_logits, tensor
from minirpm.model import DualContrastNet, ModelConfig
from minirpm.training import (
    METRICS_HEADER,
    DivergenceError,
    TrainConfig,
    evaluate,
    make_targets,
    run_ablation,
    run_few_shot,
    train,
    train_epoch,
    write_metrics_csv,
)

SMALL = dict(channels=(4, 8), mlp_hidden=16)


def _model(**kwargs):
    return DualContrastNet(ModelConfig(image_size=16, **SMALL, **kwargs))


@pytest.fixture(scope="module")
def arrays(center_puzzles):
    return to_arrays(center_puzzles)


def test_initial_loss_is_eight_ln_two(arrays):
    images, answers = arrays
    model = _model()
    x = images.astype(np.float64) / 255.0
    scores = model.forward(x, training=False)
    loss = float(bce_with_logits(scores, tensor(make_targets(answers))).data)
    per_puzzle = loss / len(answers)
    assert abs(per_puzzle - 8.0 * np.log(2.0)) <= 1e-6


def test_make_targets():
    t = make_targets(np.array([0, 7, 3]))
    assert t.shape == (3, 8)
    assert np.array_equal(t.sum(axis=1), [1.0, 1.0, 1.0])
    assert t[1, 7] == 1.0 and t[2, 3] == 1.0
    with pytest.raises(ValueError):
        make_targets(np.array([8]))


def test_train_epoch_decreases_loss(arrays):
    images, answers = arrays
    model = _model(dropout_p=0.0)
    cfg = TrainConfig(batch_size=8, lr=0.002, epochs=1, seed=0)
    losses = []
    step = 0
    for epoch in range(1, 9):
        loss, _, steps = train_epoch(model, images, answers, cfg, epoch, step)
        step += steps
        losses.append(loss)
    assert losses[-1] < losses[0]


def test_training_is_deterministic(arrays):
    images, answers = arrays

    def run():
        model = _model(seed=3)
        cfg = TrainConfig(batch_size=8, lr=0.001, epochs=2, seed=3)
        return train(model, images, answers, images, answers, cfg)

    a, b = run(), run()
    for ra, rb in zip(a.rows, b.rows):
        assert (ra.epoch, ra.train_loss, ra.train_acc, ra.test_acc) == (
            rb.epoch,
            rb.train_loss,
            rb.train_acc,
            rb.test_acc,
        )


def test_evaluate_bounds_and_empty(arrays):
    images, answers = arrays
    acc = evaluate(_model(), images, answers)
    assert 0.0 <= acc <= 1.0
    with pytest.raises(ValueError, match="empty"):
        evaluate(_model(), images[:0], answers[:0])


def test_divergence_guard(arrays):
    images, answers = arrays
    model = _model(dropout_p=0.0)
    # Blow up the head so scores exceed the guard without overflowing.
    model.fc2.weight.data = np.full_like(model.fc2.weight.data, 1e4)
    model.fc1.weight.data = model.fc1.weight.data + 1.0
    cfg = TrainConfig(batch_size=8, epochs=1, seed=0, score_limit=1e2)
    with pytest.raises(DivergenceError, match="exceeds"):
        train_epoch(model, images, answers, cfg, 1)


def test_train_config_validation():
    with pytest.raises(ValueError, match="batch_size"):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError, match="lr"):
        TrainConfig(lr=0.0)


def test_metrics_csv_round_trip(tmp_path, arrays):
    images, answers = arrays
    model = _model()
    cfg = TrainConfig(batch_size=8, epochs=2, seed=0)
    metrics = train(model, images, answers, images, answers, cfg)
    path = tmp_path / "metrics.csv"
    write_metrics_csv(path, metrics)
    with open(path) as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == METRICS_HEADER
    assert len(rows) == 3
    assert int(rows[1][0]) == 1
    assert abs(float(rows[2][1]) - metrics.rows[1].train_loss) < 1e-9


def test_run_ablation_rows(arrays):
    images, answers = arrays
    base = ModelConfig(image_size=16, **SMALL, dropout_p=0.0)
    cfg = TrainConfig(batch_size=8, epochs=1, seed=0)
    rows = run_ablation(
        ["full", "no_choice_contrast"], (images, answers), (images, answers), base, cfg, [0, 1]
    )
    assert len(rows) == 6  # 2 variants x 2 seeds + 2 means
    means = [r for r in rows if r["seed"] == "mean"]
    assert {r["variant"] for r in means} == {"full", "no_choice_contrast"}
    per_seed = [r["test_acc"] for r in rows if r["variant"] == "full" and r["seed"] != "mean"]
    assert means[0]["test_acc"] == pytest.approx(np.mean(per_seed))


def test_run_few_shot_rows_and_full_fraction(center_puzzles, arrays):
    images, answers = arrays
    base = ModelConfig(image_size=16, **SMALL, dropout_p=0.0)
    cfg = TrainConfig(batch_size=8, epochs=1, seed=0)
    rows = run_few_shot(
        [0.5, 1.0], center_puzzles, (images, answers), base, cfg, [0]
    )
    assert [r["fraction"] for r in rows] == [0.5, 1.0, 0.5, 1.0]
    half = next(r for r in rows if r["fraction"] == 0.5 and r["seed"] == 0)
    assert half["train_size"] == len(center_puzzles) // 2
    # Fraction 1.0 is bit-identical to plain training on the full set.
    model = DualContrastNet(ModelConfig(image_size=16, **SMALL, dropout_p=0.0, seed=0))
    direct = train(model, images, answers, images, answers, cfg)
    full = next(r for r in rows if r["fraction"] == 1.0 and r["seed"] == 0)
    assert full["test_acc"] == direct.final_test_acc


def test_run_few_shot_rejects_unsorted_fractions(center_puzzles, arrays):
    images, answers = arrays
    base = ModelConfig(image_size=16, **SMALL)
    with pytest.raises(ValueError, match="increasing"):
        run_few_shot([1.0, 0.5], center_puzzles, (images, answers), base, TrainConfig(), [0])

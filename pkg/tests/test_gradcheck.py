"""grad_check behavior, the Adam optimizer, and the checkpoint format."""

import numpy as np
import pytest

import minirpm.engine as eg
from minirpm.engine import (
    Parameter,
    Tape,
    adam_step,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    tensor,
)


def test_grad_check_passes_on_smooth_function():
    rng = np.random.default_rng(0)
    x = tensor(rng.normal(size=(3, 4)))
    w = tensor(rng.normal(size=(4, 2)))
    b = tensor(rng.normal(size=2))
    coeffs = tensor(rng.normal(size=(6, 1)))

    def f(x, w, b):
        return eg.linear(
            eg.reshape(eg.sigmoid(eg.linear(x, w, b)), (1, -1)), coeffs, tensor(np.zeros(1))
        )

    res = grad_check(f, [x, w, b], n_samples=50)
    assert res.max_rel_error < 1e-7
    assert res.checked > 0 and not res.skipped


def test_grad_check_catches_a_wrong_gradient():
    # An op with a deliberately corrupted backward rule must be flagged.
    from minirpm.engine.tensor import _record

    def bad_square(x):
        # True derivative is 2x; this claims 3x.
        return _record(x.data**2, (x,), lambda g: (g * 3.0 * x.data,), "bad_square")

    rng = np.random.default_rng(1)
    x = tensor(rng.uniform(1.0, 2.0, size=(2, 3)))
    coeffs = tensor(rng.normal(size=(6, 1)))
    res = grad_check(
        lambda x: eg.linear(eg.reshape(bad_square(x), (1, -1)), coeffs, tensor(np.zeros(1))),
        [x],
        n_samples=6,
    )
    assert res.max_rel_error > 0.1


def test_grad_check_skips_relu_kink():
    x = tensor(np.array([[0.0, 1.0, -1.0]]))
    coeffs = tensor(np.ones((3, 1)))
    res = grad_check(
        lambda x: eg.linear(eg.relu(x), coeffs, tensor(np.zeros(1))),
        [x],
        n_samples=3,
        step=1e-5,
    )
    # The coordinate sitting exactly on the kink is excluded, not failed.
    assert (0, 0) in res.skipped
    assert res.checked == 2
    assert res.max_rel_error < 1e-7


def test_grad_check_skips_maxpool_tie():
    x = tensor(np.array([[[[2.0, 2.0], [0.0, -1.0]]]]))
    coeffs = tensor(np.ones((1, 1)))
    res = grad_check(
        lambda x: eg.linear(
            eg.reshape(eg.maxpool2d(x, 2, 2), (1, 1)), coeffs, tensor(np.zeros(1))
        ),
        [x],
        n_samples=4,
    )
    tied = {(0, 0), (0, 1)}
    assert tied.issubset(set(res.skipped))
    assert res.max_rel_error < 1e-7


def _quadratic_params():
    return [Parameter("p", np.array([1.0, -2.0, 3.0]))]


def test_adam_step_matches_manual_formula():
    p = Parameter("w", np.array([1.0, 2.0]))
    g = np.array([0.5, -1.5])
    p.tensor.grad = g.copy()
    adam_step([p], lr=0.01, t=1)
    m = 0.1 * g
    v = 0.001 * g * g
    m_hat = m / 0.1
    v_hat = v / 0.001
    want = np.array([1.0, 2.0]) - 0.01 * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert np.allclose(p.data, want, atol=1e-15)
    assert p.tensor.grad is None  # gradients are consumed


def test_adam_two_steps_track_moments():
    p = Parameter("w", np.zeros(1))
    grads = [np.array([1.0]), np.array([-2.0])]
    m = v = 0.0
    x = 0.0
    for t, g in enumerate(grads, start=1):
        p.tensor.grad = g.copy()
        adam_step([p], lr=0.1, t=t)
        m = 0.9 * m + 0.1 * g[0]
        v = 0.999 * v + 0.001 * g[0] ** 2
        x -= 0.1 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert np.allclose(p.data, [x], atol=1e-14)


def test_adam_skips_frozen_and_gradless_params():
    frozen = Parameter("stats", np.array([5.0]), trainable=False)
    frozen.tensor.grad = np.array([1.0])
    idle = Parameter("idle", np.array([7.0]))
    adam_step([frozen, idle], lr=0.1, t=1)
    assert frozen.data[0] == 5.0
    assert idle.data[0] == 7.0


def test_adam_rejects_bad_step_index():
    with pytest.raises(ValueError, match=">= 1"):
        adam_step(_quadratic_params(), lr=0.1, t=0)


def test_adam_descends_a_quadratic():
    p = Parameter("x", np.array([4.0]))
    for t in range(1, 200):
        with Tape() as tape:
            loss = eg.linear(
                eg.reshape(eg.scale(p.tensor, 1.0), (1, 1)),
                eg.tensor(p.data.reshape(1, 1)),
                eg.tensor(np.zeros(1)),
            )
            tape.backward(eg.reshape(loss, ()))
        adam_step([p], lr=0.05, t=t)
    assert abs(p.data[0]) < 0.5


def test_checkpoint_round_trip_is_byte_exact(tmp_path):
    rng = np.random.default_rng(5)
    params = [
        Parameter("a.weight", rng.normal(size=(3, 4))),
        Parameter("a.bias", rng.normal(size=4)),
        Parameter("scalar", np.array(2.5)),
    ]
    for p in params:
        p.adam_m = rng.normal(size=p.data.shape)
        p.adam_v = rng.uniform(size=p.data.shape)
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, step=17, path=path)
    loaded, step = load_checkpoint(path)
    assert step == 17
    assert set(loaded) == {"a.weight", "a.bias", "scalar"}
    for p in params:
        q = loaded[p.name]
        assert np.array_equal(p.data, q.data)
        assert np.array_equal(p.adam_m, q.adam_m)
        assert np.array_equal(p.adam_v, q.adam_v)
    path2 = tmp_path / "again.ckpt"
    save_checkpoint([loaded[p.name] for p in params], step=17, path=path2)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_corruption(tmp_path):
    params = [Parameter("w", np.arange(6.0).reshape(2, 3))]
    path = tmp_path / "ok.ckpt"
    save_checkpoint(params, step=1, path=path)
    raw = path.read_bytes()

    bad = tmp_path / "magic.ckpt"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(bad)

    short = tmp_path / "short.ckpt"
    short.write_bytes(raw[:-5])
    with pytest.raises(ValueError, match="truncated"):
        load_checkpoint(short)

    trailing = tmp_path / "trailing.ckpt"
    trailing.write_bytes(raw + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_checkpoint(trailing)

    dup = tmp_path / "dup.ckpt"
    save_checkpoint([params[0], Parameter("w", np.zeros(2))], step=1, path=dup)
    with pytest.raises(ValueError, match="duplicate"):
        load_checkpoint(dup)

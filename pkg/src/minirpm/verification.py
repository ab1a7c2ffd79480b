"""Gradient verification suite shared by the CLI and the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine as eg
from .engine import GradCheckResult, Tensor, grad_check
from .model import DualContrastNet, ModelConfig
from .training import make_targets

__all__ = ["SuiteCase", "gradient_suite"]


@dataclass
class SuiteCase:
    name: str
    result: GradCheckResult
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.result.max_rel_error < self.tolerance


def _scalarize(t, coeffs: Tensor):
    """Weighted sum of all elements, as a differentiable scalar."""
    return eg.linear(eg.reshape(t, (1, -1)), coeffs, eg.tensor(np.zeros(1)))


def _coeffs(rng, n) -> Tensor:
    return eg.tensor(rng.normal(0.0, 1.0, (n, 1)))


def gradient_suite(seed: int = 0) -> list[SuiteCase]:
    """Run grad_check over every differentiable op plus the composed model loss."""
    rng = np.random.default_rng(seed)
    cases: list[SuiteCase] = []

    def check(name, f, inputs, tol, n_samples=20):
        cases.append(SuiteCase(name, grad_check(f, inputs, n_samples=n_samples), tol))

    x = eg.tensor(rng.normal(size=(4, 6)))
    w = eg.tensor(rng.normal(size=(6, 3)))
    b = eg.tensor(rng.normal(size=3))
    c = _coeffs(rng, 12)
    check("linear", lambda x, w, b: _scalarize(eg.linear(x, w, b), c), [x, w, b], 1e-7)

    xc = eg.tensor(rng.normal(size=(2, 3, 6, 6)))
    wc = eg.tensor(rng.normal(size=(4, 3, 3, 3)) * 0.5)
    bc = eg.tensor(rng.normal(size=4))
    cc = _coeffs(rng, 2 * 4 * 3 * 3)
    check(
        "conv2d",
        lambda x, w, b: _scalarize(eg.conv2d(x, w, b, stride=2, padding=1), cc),
        [xc, wc, bc],
        1e-6,
    )

    xm = eg.tensor(rng.normal(size=(2, 2, 6, 6)))
    cm = _coeffs(rng, 2 * 2 * 3 * 3)
    check(
        "maxpool2d",
        lambda x: _scalarize(eg.maxpool2d(x, kernel=2, stride=2), cm),
        [xm],
        1e-6,
    )

    xb = eg.tensor(rng.normal(size=(3, 4, 5, 5)))
    gamma = eg.tensor(rng.normal(1.0, 0.2, size=4))
    beta = eg.tensor(rng.normal(size=4))
    run_mean = rng.normal(size=4)
    run_var = rng.uniform(0.5, 2.0, size=4)
    cb = _coeffs(rng, 3 * 4 * 5 * 5)
    check(
        "batchnorm2d(eval)",
        lambda x, g, b: _scalarize(
            eg.batchnorm2d(x, g, b, run_mean, run_var, training=False), cb
        ),
        [xb, gamma, beta],
        1e-6,
    )

    xr = eg.tensor(rng.normal(size=(5, 7)))
    cr = _coeffs(rng, 35)
    check("relu", lambda x: _scalarize(eg.relu(x), cr), [xr], 1e-6)
    xs = eg.tensor(rng.normal(size=(5, 7)))
    check("sigmoid", lambda x: _scalarize(eg.sigmoid(x), cr), [xs], 1e-6)
    xd = eg.tensor(rng.normal(size=(5, 7)))
    check(
        "dropout(eval)",
        lambda x: _scalarize(eg.dropout(x, 0.5, training=False), cr),
        [xd],
        1e-7,
    )

    scores = eg.tensor(rng.normal(size=(4, 8)) * 3.0)
    targets = eg.tensor(make_targets(rng.integers(0, 8, size=4)))
    check("bce_with_logits", lambda s: eg.bce_with_logits(s, targets), [scores], 1e-7)

    # Composed model loss on a 2-puzzle 32x32 batch, deterministic mode
    # (eval batch norm, dropout off). Parameters get jittered off their
    # init so the zero-initialized head does not trivialize the check.
    model = DualContrastNet(
        ModelConfig(image_size=32, channels=(4, 8), mlp_hidden=16, dropout_p=0.0, seed=seed)
    )
    trainable = [p for p in model.parameters if p.trainable]
    for p in trainable:
        p.data = p.data + rng.normal(0.0, 0.05, p.data.shape)
    images = rng.random((2, 16, 32, 32))
    y = eg.tensor(make_targets(np.array([1, 6])))

    def composed(*_):
        return eg.bce_with_logits(model.forward(images, training=False), y)

    cases.append(
        SuiteCase(
            "composed dual-contrast loss",
            # A short step keeps hidden relu/maxpool crossings out of the
            # difference window; roundoff stays ~1e-9 at this loss scale.
            grad_check(composed, [p.tensor for p in trainable], n_samples=4, step=1e-6),
            1e-4,
        )
    )
    return cases

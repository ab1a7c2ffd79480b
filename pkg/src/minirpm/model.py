"""Dual-contrast network for 8-choice matrix puzzles.

Each candidate is filled into the missing panel, forming 10 row triples
and 10 column triples per puzzle. A shared CNN encoder embeds every
triple; the rule-contrast stage subtracts the centroid of the two context
triples, the choice-contrast stage subtracts an adapted mean of the eight
candidate triples, and a small MLP scores the summed row/column features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine as eg
from .engine import Parameter, Tensor

__all__ = ["ModelConfig", "DualContrastNet", "row_col_triples", "ABLATIONS"]

ABLATIONS = ("full", "no_rule_contrast", "no_choice_contrast")

# Panel indices (0-based): context 0..7 fills the 3x3 grid minus the
# bottom-right cell; candidate c is image 8+c.
_ROW_TRIPLES = [[0, 1, 2], [3, 4, 5]] + [[6, 7, 8 + c] for c in range(8)]
_COL_TRIPLES = [[0, 3, 6], [1, 4, 7]] + [[2, 5, 8 + c] for c in range(8)]


def row_col_triples(images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Form the 10 row and 10 column triples of one puzzle.

    ``images``: (16, S, S) with panels 0..7 the context and 8..15 the
    candidates. Returns two (10, 3, S, S) stacks.
    """
    return images[_ROW_TRIPLES], images[_COL_TRIPLES]


@dataclass
class ModelConfig:
    image_size: int = 32  # desk default; the reference scale is 96
    channels: tuple[int, int] = (64, 128)
    mlp_hidden: int = 256
    dropout_p: float = 0.5
    ablation: str = "full"
    identity_phi: bool = False  # test hook: bypass the adaptive block
    seed: int = 0

    def __post_init__(self):
        if self.image_size % 8:
            raise ValueError(
                f"image_size must be divisible by 8 (x4 encoder downsampling "
                f"plus 2x2 pooling), got {self.image_size}"
            )
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")

    @property
    def feature_size(self) -> int:
        return self.image_size // 4

    @property
    def mlp_input_dim(self) -> int:
        return self.channels[1] * 2 * 2


class _Registry:
    def __init__(self):
        self.params: dict[str, Parameter] = {}

    def add(self, name: str, data, trainable: bool = True) -> Parameter:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Parameter(name, data, trainable=trainable)
        self.params[name] = p
        return p


class _Conv:
    def __init__(self, reg, name, cin, cout, k, stride, padding, rng):
        std = np.sqrt(2.0 / (cin * k * k))
        self.weight = reg.add(f"{name}.weight", rng.normal(0.0, std, (cout, cin, k, k)))
        self.bias = reg.add(f"{name}.bias", np.zeros(cout))
        self.stride, self.padding = stride, padding

    def __call__(self, x: Tensor) -> Tensor:
        return eg.conv2d(x, self.weight.tensor, self.bias.tensor, self.stride, self.padding)


class _BatchNorm:
    def __init__(self, reg, name, channels):
        self.gamma = reg.add(f"{name}.gamma", np.ones(channels))
        self.beta = reg.add(f"{name}.beta", np.zeros(channels))
        # Running stats are explicitly initialized (mean 0, var 1) so eval
        # mode is legal from the start; they persist via the registry.
        self.running_mean = reg.add(f"{name}.running_mean", np.zeros(channels), trainable=False)
        self.running_var = reg.add(f"{name}.running_var", np.ones(channels), trainable=False)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return eg.batchnorm2d(
            x,
            self.gamma.tensor,
            self.beta.tensor,
            self.running_mean.data,
            self.running_var.data,
            training,
        )


class _Linear:
    def __init__(self, reg, name, din, dout, rng, zero_init=False):
        if zero_init:
            w = np.zeros((din, dout))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / din), (din, dout))
        self.weight = reg.add(f"{name}.weight", w)
        self.bias = reg.add(f"{name}.bias", np.zeros(dout))

    def __call__(self, x: Tensor) -> Tensor:
        return eg.linear(x, self.weight.tensor, self.bias.tensor)


class DualContrastNet:
    """Shared-parameter row/column streams with rule and choice contrast.

    The final scoring layer is zero-initialized so an untrained model
    scores every candidate 0 (and the initial loss sits at 8*ln 2 per
    puzzle analytically).
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        reg = _Registry()
        c1, c2 = config.channels
        self.conv1 = _Conv(reg, "encoder.conv1", 3, c1, 7, 2, 3, rng)
        self.bn1 = _BatchNorm(reg, "encoder.bn1", c1)
        self.res_conv_a = _Conv(reg, "encoder.res.conv_a", c1, c2, 3, 1, 1, rng)
        self.res_bn_a = _BatchNorm(reg, "encoder.res.bn_a", c2)
        self.res_conv_b = _Conv(reg, "encoder.res.conv_b", c2, c2, 3, 1, 1, rng)
        self.res_bn_b = _BatchNorm(reg, "encoder.res.bn_b", c2)
        self.res_proj = _Conv(reg, "encoder.res.proj", c1, c2, 1, 1, 0, rng)
        self.res_bn_proj = _BatchNorm(reg, "encoder.res.bn_proj", c2)
        self.phi_conv = _Conv(reg, "phi.conv", c2, c2, 3, 1, 1, rng)
        self.phi_bn = _BatchNorm(reg, "phi.bn", c2)
        self.fc1 = _Linear(reg, "mlp.fc1", config.mlp_input_dim, config.mlp_hidden, rng)
        self.fc2 = _Linear(reg, "mlp.fc2", config.mlp_hidden, 1, rng, zero_init=True)
        self._registry = reg

    @property
    def parameters(self) -> list[Parameter]:
        return list(self._registry.params.values())

    def encode(self, x: Tensor, training: bool) -> Tensor:
        """CNN layer -> maxpool -> residual block; (M,3,S,S) -> (M,C2,S/4,S/4)."""
        y = eg.relu(self.bn1(self.conv1(x), training))
        y = eg.maxpool2d(y, kernel=3, stride=2, padding=1)
        z = eg.relu(self.res_bn_a(self.res_conv_a(y), training))
        z = self.res_bn_b(self.res_conv_b(z), training)
        shortcut = self.res_bn_proj(self.res_proj(y), training)
        return eg.relu(eg.add(z, shortcut))

    def phi(self, x: Tensor, training: bool) -> Tensor:
        if self.config.identity_phi:
            return x
        return self.phi_bn(self.phi_conv(x), training)

    def forward(
        self,
        images: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Score a batch: (B,16,S,S) float panels in [0,1] -> (B,8) logits."""
        b = images.shape[0]
        rows = images[:, _ROW_TRIPLES]  # (B,10,3,S,S)
        cols = images[:, _COL_TRIPLES]
        s = self.config.image_size
        triples = np.concatenate(
            [rows.reshape(b * 10, 3, s, s), cols.reshape(b * 10, 3, s, s)]
        )
        feats = self.encode(Tensor(triples), training)  # (2B*10, C2, s/4, s/4)

        groups = 2 * b
        base = np.arange(groups) * 10
        cand_idx = (base[:, None] + 2 + np.arange(8)[None, :]).ravel()
        f_cand = eg.take_rows(feats, cand_idx)  # (2B*8, ...)

        if self.config.ablation == "no_rule_contrast":
            g = f_cand
        else:
            centroid = eg.scale(
                eg.add(eg.take_rows(feats, base), eg.take_rows(feats, base + 1)), 0.5
            )
            g = eg.sub(f_cand, eg.repeat_rows(centroid, 8))

        if self.config.ablation == "no_choice_contrast":
            h = g
        else:
            c2, fs = self.config.channels[1], self.config.feature_size
            g_mean = eg.mean_over(eg.reshape(g, (groups, 8, c2, fs, fs)), axis=1)
            h = eg.sub(g, eg.repeat_rows(self.phi(g_mean, training), 8))

        h_rows = eg.take_rows(h, np.arange(b * 8))
        h_cols = eg.take_rows(h, b * 8 + np.arange(b * 8))
        summed = eg.add(h_rows, h_cols)  # (B*8, C2, s/4, s/4)
        pooled = eg.flatten(eg.avgpool_to(summed, 2, 2), from_axis=1)
        hidden = eg.relu(self.fc1(pooled))
        hidden = eg.dropout(hidden, self.config.dropout_p, training, rng)
        scores = self.fc2(hidden)
        return eg.reshape(scores, (b, 8))

    def predict(self, scores: np.ndarray) -> np.ndarray:
        """Argmax per puzzle; ties resolve to the lowest index."""
        return np.argmax(scores, axis=1)

    def save(self, path, step: int = 0) -> None:
        """Checkpoint all parameters plus a frozen config record."""
        cfg = self.config
        meta = Parameter(
            "meta.config",
            np.array(
                [
                    cfg.image_size,
                    cfg.channels[0],
                    cfg.channels[1],
                    cfg.mlp_hidden,
                    cfg.dropout_p,
                    ABLATIONS.index(cfg.ablation),
                    int(cfg.identity_phi),
                    cfg.seed,
                ],
                dtype=np.float64,
            ),
            trainable=False,
        )
        eg.save_checkpoint(self.parameters + [meta], step, path)

    @classmethod
    def load(cls, path) -> tuple["DualContrastNet", int]:
        loaded, step = eg.load_checkpoint(path)
        meta = loaded.pop("meta.config", None)
        if meta is None:
            raise ValueError(f"{path}: checkpoint lacks the meta.config record")
        m = meta.data
        config = ModelConfig(
            image_size=int(m[0]),
            channels=(int(m[1]), int(m[2])),
            mlp_hidden=int(m[3]),
            dropout_p=float(m[4]),
            ablation=ABLATIONS[int(m[5])],
            identity_phi=bool(m[6]),
            seed=int(m[7]),
        )
        model = cls(config)
        own = model._registry.params
        if set(own) != set(loaded):
            raise ValueError(f"{path}: parameter names do not match the architecture")
        for name, p in own.items():
            src = loaded[name]
            if src.data.shape != p.data.shape:
                raise ValueError(
                    f"{path}: shape mismatch for {name}: {src.data.shape} vs {p.data.shape}"
                )
            p.data = src.data
            p.adam_m, p.adam_v = src.adam_m, src.adam_v
        return model, step

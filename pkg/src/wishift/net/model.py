"""Compact activity classifier: three conv blocks feeding three stacked
bidirectional LSTM layers, a dense softmax head, and an optional
gradient-reversed domain head.

The forward/backward passes are explicit (see layers.py); ``loss_and_grad``
produces a gradient tensor for every trainable parameter. The default
configuration lands at 1,735,274 trainable parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import NonFiniteLossError, ShapeMismatchError
from . import layers as L


@dataclass(frozen=True)
class ModelConfig:
    input_shape: tuple[int, int] = (400, 242)
    conv_channels: tuple[int, int, int] = (16, 32, 48)
    kernel: tuple[tuple[int, int], ...] = ((3, 3), (3, 3), (3, 3))
    pool: tuple[tuple[int, int], ...] = ((2, 2), (2, 2), (2, 2))
    lstm_hidden: int = 100
    lstm_layers: int = 3
    n_classes: int = 10
    n_domains: int | None = None
    grl_schedule: tuple[str, float] = ("constant", 1.0)

    def __post_init__(self):
        if len(self.conv_channels) != 3 or len(self.kernel) != 3 or len(self.pool) != 3:
            raise ValueError("expected three conv layers (channels, kernel, pool)")
        for k in self.kernel + self.pool:
            if k[0] < 1 or k[1] < 1:
                raise ValueError("kernel and pool extents must be >= 1")
        if self.lstm_hidden < 1 or self.lstm_layers < 1 or self.n_classes < 2:
            raise ValueError("bad lstm_hidden / lstm_layers / n_classes")
        if self.grl_schedule[0] not in ("constant", "linear_warmup"):
            raise ValueError(f"unknown grl schedule {self.grl_schedule[0]!r}")

    def block_dims(self) -> list[tuple[int, int, int]]:
        """(channels, time, freq) after each conv/pool block."""
        t, f = self.input_shape
        dims = []
        for c, (ph, pw) in zip(self.conv_channels, self.pool):
            t, f = t // ph, f // pw
            if t < 1 or f < 1:
                raise ValueError("pooling collapses the input to nothing")
            dims.append((c, t, f))
        return dims

    @property
    def seq_len(self) -> int:
        return self.block_dims()[-1][1]

    @property
    def lstm_input_size(self) -> int:
        c, _t, f = self.block_dims()[-1]
        return c * f

    @property
    def feature_size(self) -> int:
        return 2 * self.lstm_hidden

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "conv_channels": list(self.conv_channels),
            "kernel": [list(k) for k in self.kernel],
            "pool": [list(p) for p in self.pool],
            "lstm_hidden": self.lstm_hidden,
            "lstm_layers": self.lstm_layers,
            "n_classes": self.n_classes,
            "n_domains": self.n_domains,
            "grl_schedule": list(self.grl_schedule),
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(
            input_shape=tuple(d["input_shape"]),
            conv_channels=tuple(d["conv_channels"]),
            kernel=tuple(tuple(k) for k in d["kernel"]),
            pool=tuple(tuple(p) for p in d["pool"]),
            lstm_hidden=int(d["lstm_hidden"]),
            lstm_layers=int(d.get("lstm_layers", 3)),
            n_classes=int(d["n_classes"]),
            n_domains=d.get("n_domains"),
            grl_schedule=tuple(d.get("grl_schedule", ("constant", 1.0))),
        )


@dataclass
class Parameters:
    """All trainable tensors plus batch-norm running statistics."""

    tensors: dict[str, np.ndarray]
    state: dict[str, np.ndarray] = field(default_factory=dict)

    def total_count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def copy(self) -> "Parameters":
        return Parameters(
            {k: v.copy() for k, v in self.tensors.items()},
            {k: v.copy() for k, v in self.state.items()},
        )


def _tensor_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c_in = 1
    for i, (c_out, (kh, kw)) in enumerate(zip(config.conv_channels, config.kernel), start=1):
        shapes[f"conv{i}_w"] = (c_out, c_in, kh, kw)
        shapes[f"conv{i}_b"] = (c_out,)
        shapes[f"bn{i}_gamma"] = (c_out,)
        shapes[f"bn{i}_beta"] = (c_out,)
        c_in = c_out
    h = config.lstm_hidden
    d = config.lstm_input_size
    for l in range(1, config.lstm_layers + 1):
        for direction in ("f", "b"):
            shapes[f"lstm{l}_{direction}_wx"] = (d, 4 * h)
            shapes[f"lstm{l}_{direction}_wh"] = (h, 4 * h)
            shapes[f"lstm{l}_{direction}_b"] = (4 * h,)
        d = 2 * h
    shapes["head_w"] = (2 * h, config.n_classes)
    shapes["head_b"] = (config.n_classes,)
    if config.n_domains:
        shapes["dom_w"] = (2 * h, config.n_domains)
        shapes["dom_b"] = (config.n_domains,)
    return shapes


def parameter_count(config: ModelConfig) -> int:
    return int(sum(np.prod(s) for s in _tensor_shapes(config).values()))


def init_parameters(config: ModelConfig, seed: int = 0) -> Parameters:
    """Uniform fan-in init for conv/dense, uniform +-1/sqrt(H) for LSTM
    gates, forget-gate bias 1."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    h = config.lstm_hidden
    for name, shape in _tensor_shapes(config).items():
        if name.endswith("_gamma"):
            tensors[name] = np.ones(shape)
        elif name.endswith("_beta"):
            tensors[name] = np.zeros(shape)
        elif name.startswith("lstm"):
            if name.endswith("_b"):
                b = np.zeros(shape)
                b[h : 2 * h] = 1.0
                tensors[name] = b
            else:
                bound = 1.0 / np.sqrt(h)
                tensors[name] = rng.uniform(-bound, bound, size=shape)
        elif name.endswith("_w"):
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
        else:  # conv / dense biases
            tensors[name] = np.zeros(shape)
    state = {}
    for i, c in enumerate(config.conv_channels, start=1):
        state[f"bn{i}_mean"] = np.zeros(c)
        state[f"bn{i}_var"] = np.ones(c)
    return Parameters(tensors, state)


def grl_backward(grad: np.ndarray, lam: float) -> np.ndarray:
    """Gradient reversal: identity forward, -lam * g backward."""
    return -lam * grad


def _forward_full(config: ModelConfig, params: Parameters, x: np.ndarray, mode: str):
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be train or eval, got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.shape[1:] != config.input_shape:
        raise ShapeMismatchError(
            f"window shape {x.shape[1:]} does not match configured input {config.input_shape}"
        )
    t = params.tensors
    h = x[:, None, :, :]
    caches: dict[str, object] = {}
    new_state: dict[str, np.ndarray] = {}
    for i, (ph, pw) in enumerate(config.pool, start=1):
        h, caches[f"conv{i}"] = L.conv2d_forward(h, t[f"conv{i}_w"], t[f"conv{i}_b"])
        h, caches[f"bn{i}"], m_new, v_new = L.batchnorm_forward(
            h, t[f"bn{i}_gamma"], t[f"bn{i}_beta"],
            params.state[f"bn{i}_mean"], params.state[f"bn{i}_var"], mode,
        )
        new_state[f"bn{i}_mean"] = m_new
        new_state[f"bn{i}_var"] = v_new
        h, caches[f"relu{i}"] = L.relu_forward(h)
        h, caches[f"pool{i}"] = L.maxpool_forward(h, ph, pw)

    B, C, T, F = h.shape
    caches["conv_out_shape"] = h.shape
    seq = h.transpose(0, 2, 1, 3).reshape(B, T, C * F)

    hidden = config.lstm_hidden
    for l in range(1, config.lstm_layers + 1):
        hs_f, hf_final, cache_f = L.lstm_forward(
            seq, t[f"lstm{l}_f_wx"], t[f"lstm{l}_f_wh"], t[f"lstm{l}_f_b"], reverse=False
        )
        hs_b, hb_final, cache_b = L.lstm_forward(
            seq, t[f"lstm{l}_b_wx"], t[f"lstm{l}_b_wh"], t[f"lstm{l}_b_b"], reverse=True
        )
        caches[f"lstm{l}"] = (cache_f, cache_b)
        seq = np.concatenate([hs_f, hs_b], axis=2)
    z = np.concatenate([hf_final, hb_final], axis=1)

    class_logits, caches["head"] = L.dense_forward(z, t["head_w"], t["head_b"])
    domain_logits = None
    if config.n_domains:
        # gradient reversal is identity here; it only acts in backward
        domain_logits, caches["dom"] = L.dense_forward(z, t["dom_w"], t["dom_b"])
    return class_logits, z, domain_logits, caches, new_state


def forward(
    config: ModelConfig, params: Parameters, x: np.ndarray, mode: str = "eval"
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Run the classifier; returns (class_logits, features Z, domain_logits).

    Batch-norm uses batch statistics in train mode and running statistics
    in eval mode. ``x`` is (B, time, freq) or a single window.
    """
    logits, z, dom, _caches, _state = _forward_full(config, params, x, mode)
    return logits, z, dom


def loss_and_grad(
    config: ModelConfig,
    params: Parameters,
    x: np.ndarray,
    labels: np.ndarray,
    domain_labels: np.ndarray | None = None,
    grl_lambda: float = 1.0,
):
    """Mean class cross-entropy (plus gradient-reversed domain
    cross-entropy when the branch is active) and gradients for every
    trainable tensor.

    Returns (loss, grads, aux) where aux carries the per-term losses and
    the updated batch-norm running statistics.
    """
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= config.n_classes:
        raise ShapeMismatchError("class labels out of range")
    class_logits, z, domain_logits, caches, new_state = _forward_full(
        config, params, x, "train"
    )
    t = params.tensors
    class_loss, dlogits = L.cross_entropy_forward(class_logits, labels)
    dz, dhead_w, dhead_b = L.dense_backward(dlogits, t["head_w"], caches["head"])
    grads: dict[str, np.ndarray] = {"head_w": dhead_w, "head_b": dhead_b}

    domain_loss = 0.0
    use_domain = config.n_domains is not None and domain_labels is not None
    if use_domain:
        domain_labels = np.asarray(domain_labels)
        if domain_labels.min() < 0 or domain_labels.max() >= config.n_domains:
            raise ShapeMismatchError("domain labels out of range")
        domain_loss, ddom_logits = L.cross_entropy_forward(domain_logits, domain_labels)
        dz_dom, ddom_w, ddom_b = L.dense_backward(ddom_logits, t["dom_w"], caches["dom"])
        grads["dom_w"] = ddom_w
        grads["dom_b"] = ddom_b
        dz = dz + grl_backward(dz_dom, grl_lambda)
    elif config.n_domains:
        grads["dom_w"] = np.zeros_like(t["dom_w"])
        grads["dom_b"] = np.zeros_like(t["dom_b"])

    loss = class_loss + domain_loss
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"loss is {loss}")

    # through the BiLSTM stack: dz splits between the two directions'
    # final states; per-step sequence grads flow from the layer above
    hidden = config.lstm_hidden
    B = class_logits.shape[0]
    _c, _t3, _f3 = config.block_dims()[-1]
    seq_len = _t3
    dseq = np.zeros((B, seq_len, 2 * hidden))
    dh_final_f, dh_final_b = dz[:, :hidden], dz[:, hidden:]
    for l in range(config.lstm_layers, 0, -1):
        cache_f, cache_b = caches[f"lstm{l}"]
        dx_f, dwx_f, dwh_f, db_f = L.lstm_backward(
            dseq[:, :, :hidden], dh_final_f, t[f"lstm{l}_f_wx"], t[f"lstm{l}_f_wh"], cache_f
        )
        dx_b, dwx_b, dwh_b, db_b = L.lstm_backward(
            dseq[:, :, hidden:], dh_final_b, t[f"lstm{l}_b_wx"], t[f"lstm{l}_b_wh"], cache_b
        )
        grads[f"lstm{l}_f_wx"], grads[f"lstm{l}_f_wh"], grads[f"lstm{l}_f_b"] = dwx_f, dwh_f, db_f
        grads[f"lstm{l}_b_wx"], grads[f"lstm{l}_b_wh"], grads[f"lstm{l}_b_b"] = dwx_b, dwh_b, db_b
        dseq = dx_f + dx_b
        dh_final_f = dh_final_b = None

    B2, C, T, F = caches["conv_out_shape"]
    dconv = dseq.reshape(B2, T, C, F).transpose(0, 2, 1, 3)
    for i in range(len(config.pool), 0, -1):
        dconv = L.maxpool_backward(dconv, caches[f"pool{i}"])
        dconv = L.relu_backward(dconv, caches[f"relu{i}"])
        dconv, dgamma, dbeta = L.batchnorm_backward(dconv, caches[f"bn{i}"])
        grads[f"bn{i}_gamma"] = dgamma
        grads[f"bn{i}_beta"] = dbeta
        dconv, dw, db = L.conv2d_backward(dconv, t[f"conv{i}_w"], caches[f"conv{i}"])
        grads[f"conv{i}_w"] = dw
        grads[f"conv{i}_b"] = db

    aux = {"class_loss": class_loss, "domain_loss": domain_loss, "state": new_state}
    return loss, grads, aux

"""First-order optimizers and the collision wrapper.

Optimizers work on a list of numpy arrays and update them in place; state
is kept per list position. :class:`KineticOptimizer` rewrites the gradients
of selected layers with a collision transform and then hands everything to
its base optimizer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .kinetic import KineticConfig, kinetic_transform
from .linalg import make_rng


class OptimizerKind(str, enum.Enum):
    SGD = "sgd"
    ADAM = "adam"
    ADAMW = "adamw"


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = 1e-3
    momentum: float = 0.0
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        try:
            kind = OptimizerKind(str(getattr(self.kind, "value", self.kind)).strip().lower())
        except ValueError:
            raise ValueError(f"kind: unknown optimizer {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if not self.learning_rate > 0:
            raise ValueError("learning_rate: must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum: must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay: must be >= 0")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name}: must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon: must be > 0")


def _check_shapes(params, grads):
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch: param {p.shape} vs grad {g.shape}")


class Optimizer:
    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self.state: dict[int, dict] = {}
        self.t = 0

    def step(self, params, grads) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    """SGD with momentum; weight decay is added to the gradient."""

    def step(self, params, grads):
        _check_shapes(params, grads)
        cfg = self.cfg
        self.t += 1
        for k, (p, g) in enumerate(zip(params, grads)):
            d = g + cfg.weight_decay * p if cfg.weight_decay else g
            if cfg.momentum:
                st = self.state.setdefault(k, {"momentum_buffer": np.zeros_like(p)})
                buf = st["momentum_buffer"]
                buf *= cfg.momentum
                buf += d
                d = buf
            p -= cfg.learning_rate * d


class Adam(Optimizer):
    """Bias-corrected Adam. ``weight_decay`` is coupled (added to the gradient)."""

    decoupled = False

    def step(self, params, grads):
        _check_shapes(params, grads)
        cfg = self.cfg
        self.t += 1
        t = self.t
        b1, b2 = cfg.beta1, cfg.beta2
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for k, (p, g) in enumerate(zip(params, grads)):
            st = self.state.setdefault(k, {"m": np.zeros_like(p), "v": np.zeros_like(p)})
            if cfg.weight_decay:
                if self.decoupled:
                    p -= cfg.learning_rate * cfg.weight_decay * p
                else:
                    g = g + cfg.weight_decay * p
            m, v = st["m"], st["v"]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)


class AdamW(Adam):
    decoupled = True


def make_optimizer(cfg: OptimizerConfig) -> Optimizer:
    return {OptimizerKind.SGD: SGD, OptimizerKind.ADAM: Adam, OptimizerKind.ADAMW: AdamW}[cfg.kind](cfg)


# functional forms over a single array


def sgd_step(state: dict, w, g, cfg: OptimizerConfig):
    opt = state.setdefault("_opt", SGD(cfg))
    opt.step([w], [g])
    return w


def adam_step(state: dict, w, g, cfg: OptimizerConfig):
    opt = state.setdefault("_opt", make_optimizer(cfg))
    opt.step([w], [g])
    return w


@dataclass
class KineticOptimizer:
    """Collision transform on ``target_layers`` followed by a base optimizer step.

    Gradients of non-target layers and all biases reach the base optimizer
    untouched. The network's stored gradients are not modified.
    """

    base: Optimizer
    kinetic: KineticConfig | None = None
    target_layers: frozenset = field(default_factory=frozenset)
    seed: int = 0

    def __post_init__(self):
        self.target_layers = frozenset(int(i) for i in self.target_layers)
        label = self.kinetic.rng_stream_label if self.kinetic is not None else "kinetic"
        self.rng = make_rng(self.seed, label)

    def transformed_gradients(self, network) -> list[np.ndarray]:
        grads = []
        for idx, layer in enumerate(network.layers):
            gw = layer.grad_weight
            if self.kinetic is not None and idx in self.target_layers:
                gw = kinetic_transform(layer.weight, gw, self.kinetic, self.rng)
            grads += [gw, layer.grad_bias]
        return grads

    def step(self, network) -> None:
        for idx in self.target_layers:
            if not 0 <= idx < len(network.layers):
                raise ValueError(f"target layer {idx} out of range")
        self.base.step(network.parameters(), self.transformed_gradients(network))


def ko_step(wrapper: KineticOptimizer, network) -> None:
    wrapper.step(network)

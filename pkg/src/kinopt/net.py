"""Small fully connected networks with hand-written backpropagation."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, gaussian_init, load_csv, save_csv


class Activation(str, enum.Enum):
    TANH = "tanh"
    XTANH = "xtanh"
    SIGMOID = "sigmoid"
    SOFTPLUS = "softplus"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, name) -> "Activation":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"activation: unknown activation {name!r}; expected one of {[a.value for a in cls]}") from None


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activate(kind: Activation, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise value and derivative of ``kind`` at ``z``.

    ``xtanh`` is ``x * tanh(x)``.
    """
    kind = Activation.parse(kind)
    z = np.asarray(z, dtype=np.float64)
    if kind is Activation.TANH:
        t = np.tanh(z)
        return t, 1.0 - t * t
    if kind is Activation.XTANH:
        t = np.tanh(z)
        return z * t, t + z * (1.0 - t * t)
    if kind is Activation.SIGMOID:
        s = _sigmoid(np.atleast_1d(z)).reshape(z.shape)
        return s, s * (1.0 - s)
    if kind is Activation.SOFTPLUS:
        s = _sigmoid(np.atleast_1d(z)).reshape(z.shape)
        return np.logaddexp(0.0, z), s
    if kind is Activation.IDENTITY:
        return z.copy(), np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


def activation_eval(kind, x: float) -> tuple[float, float]:
    value, deriv = activate(Activation.parse(kind), np.array([x], dtype=np.float64))
    return float(value[0]), float(deriv[0])


@dataclass
class DenseLayer:
    """Affine map followed by an activation.

    ``weight`` is ``(out_dim, in_dim)``; each row holds one neuron's input
    weights.
    """

    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.IDENTITY
    grad_weight: np.ndarray = field(default=None, repr=False)
    grad_bias: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.weight = as_matrix(self.weight, "weight").copy()
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1).copy()
        if self.bias.shape[0] != self.weight.shape[0]:
            raise ValueError("bias length must equal weight rows")
        self.activation = Activation.parse(self.activation)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._input = None
        self._deriv = None

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.weight.T + self.bias
        a, d = activate(self.activation, z)
        self._input = x
        self._deriv = d
        return a

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._input is None:
            raise RuntimeError("backward called before forward")
        delta = grad_out * self._deriv
        self.grad_weight = delta.T @ self._input
        self.grad_bias = delta.sum(axis=0)
        return delta @ self.weight


class Network:
    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(f"incompatible layers: {prev.out_dim} -> {nxt.in_dim}")
        self.layers = layers
        self._forwarded = False

    @classmethod
    def from_dims(cls, dims, activation="tanh", *, rng, init_std=0.005, output_activation="identity"):
        """Build an MLP with ``activation`` on hidden layers.

        Every weight and bias is drawn i.i.d. from ``N(0, init_std**2)``.
        """
        dims = [int(d) for d in dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ValueError(f"bad layer dims {dims}")
        layers = []
        for k, (din, dout) in enumerate(zip(dims, dims[1:])):
            act = output_activation if k == len(dims) - 2 else activation
            w = gaussian_init(rng, dout, din, init_std)
            b = gaussian_init(rng, 1, dout, init_std)[0]
            layers.append(DenseLayer(w, b, act))
        return cls(layers)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    def forward(self, x) -> np.ndarray:
        x = as_matrix(x, "x")
        if x.shape[1] != self.layers[0].in_dim:
            raise ValueError(f"input has {x.shape[1]} columns, network expects {self.layers[0].in_dim}")
        for layer in self.layers:
            x = layer.forward(x)
        self._forwarded = True
        return x

    __call__ = forward

    def backward(self, loss_grad) -> None:
        if not self._forwarded:
            raise RuntimeError("backward called before forward")
        g = as_matrix(loss_grad, "loss_grad")
        for layer in reversed(self.layers):
            g = layer.backward(g)

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` (live references)."""
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.grad_weight, layer.grad_bias]
        return out

    def copy(self) -> "Network":
        return Network([DenseLayer(l.weight, l.bias, l.activation) for l in self.layers])

    # -- checkpoints -------------------------------------------------------

    def save(self, directory) -> None:
        """Write ``manifest.txt`` plus ``layer{k}_weight.csv``/``layer{k}_bias.csv``."""
        os.makedirs(directory, exist_ok=True)
        lines = [f"n_layers={len(self.layers)}", "dims=" + ",".join(map(str, self.dims))]
        for k, layer in enumerate(self.layers):
            lines.append(f"layer{k}.activation={layer.activation.value}")
            save_csv(os.path.join(directory, f"layer{k}_weight.csv"), layer.weight)
            save_csv(os.path.join(directory, f"layer{k}_bias.csv"), layer.bias[None, :])
        with open(os.path.join(directory, "manifest.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, directory) -> "Network":
        manifest = {}
        with open(os.path.join(directory, "manifest.txt")) as fh:
            for line in fh:
                if "=" in line:
                    k, v = line.strip().split("=", 1)
                    manifest[k] = v
        layers = []
        for k in range(int(manifest["n_layers"])):
            w = load_csv(os.path.join(directory, f"layer{k}_weight.csv"))
            b = load_csv(os.path.join(directory, f"layer{k}_bias.csv"))[0]
            layers.append(DenseLayer(w, b, manifest[f"layer{k}.activation"]))
        net = cls(layers)
        if net.dims != [int(d) for d in manifest["dims"].split(",")]:
            raise ValueError("checkpoint manifest dims do not match stored matrices")
        return net


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean squared error over every entry, and its gradient w.r.t. ``pred``.

    ``loss = mean((pred - target)**2)``, so ``grad = 2 (pred - target) / pred.size``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def gradient_check(net: Network, x, y, h: float = 1e-5) -> float:
    """Worst relative error between backprop and central differences of the MSE loss.

    Per parameter array the error is ``|a - n| / (|a| + |n|)`` in the
    Euclidean norm (0 when both gradients vanish).
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    _, grad = mse_loss(net.forward(x), y)
    net.backward(grad)
    analytic = [g.copy() for g in net.gradients()]
    worst = 0.0
    for p, a in zip(net.parameters(), analytic):
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = mse_loss(net.forward(x), y)[0]
            p[idx] = old - h
            down = mse_loss(net.forward(x), y)[0]
            p[idx] = old
            num[idx] = (up - down) / (2.0 * h)
        denom = np.linalg.norm(a) + np.linalg.norm(num)
        if denom > 0:
            worst = max(worst, float(np.linalg.norm(a - num) / denom))
    return worst

"""Synthetic condensation experiment: data, training loop, run directories."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .kinetic import KineticConfig
from .linalg import make_rng, save_csv
from .metrics import MetricsRecord, cosine_matrix, neuron_similarity, weight_correlation
from .net import Activation, Network, mse_loss
from .optim import KineticOptimizer, OptimizerConfig, make_optimizer

METRICS_COLUMNS = ("epoch", "train_loss", "neuron_similarity", "weight_correlation", "step_time_ms")


class DivergenceError(RuntimeError):
    def __init__(self, epoch, result=None):
        super().__init__(f"training diverged at epoch {epoch} (non-finite loss)")
        self.epoch = epoch
        self.result = result


@dataclass(frozen=True)
class SyntheticSpec:
    """``y = sum_k amplitude * sin(frequency * x_k + phase)`` on uniform inputs."""

    n_samples: int = 80
    input_dim: int = 5
    low: float = -4.0
    high: float = 2.0
    amplitude: float = 3.5
    frequency: float = 5.0
    phase: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        if self.n_samples < 1 or self.input_dim < 1:
            raise ValueError("n_samples: n_samples and input_dim must be >= 1")
        if not self.low < self.high:
            raise ValueError("low: input range must satisfy low < high")


def target_function(x, spec: SyntheticSpec = SyntheticSpec()) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return (spec.amplitude * np.sin(spec.frequency * x + spec.phase)).sum(axis=1)


def gen_synthetic(spec: SyntheticSpec, seed: int | None = None):
    seed = spec.seed if spec.seed is not None else (seed or 0)
    rng = make_rng(seed, "data")
    x = rng.uniform(spec.low, spec.high, size=(spec.n_samples, spec.input_dim))
    return x, target_function(x, spec)


@dataclass(frozen=True)
class ExperimentConfig:
    dims: tuple = (5, 50, 1)
    activation: Activation = Activation.TANH
    init_std: float = 0.005
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    kinetic: KineticConfig | None = None
    target_layers: tuple = (0,)
    epochs: int = 100
    batch_size: int = 0  # 0 = full batch
    snapshot_every: int = 0
    record_timing: bool = False
    measure_layer: int = 0
    data: SyntheticSpec = field(default_factory=SyntheticSpec)
    seeds: tuple = (0,)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "activation", Activation.parse(self.activation))
        object.__setattr__(self, "target_layers", tuple(int(t) for t in self.target_layers))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if len(self.dims) < 2 or min(self.dims) < 1:
            raise ValueError(f"dims: bad layer sizes {self.dims}")
        if self.dims[0] != self.data.input_dim:
            raise ValueError(f"dims: input size {self.dims[0]} != data input_dim {self.data.input_dim}")
        if self.epochs < 1:
            raise ValueError("epochs: must be >= 1")
        if self.init_std < 0:
            raise ValueError("init_std: must be >= 0")
        if self.batch_size < 0:
            raise ValueError("batch_size: must be >= 0")
        n_layers = len(self.dims) - 1
        for t in self.target_layers:
            if not 0 <= t < n_layers:
                raise ValueError(f"target_layers: layer {t} out of range")
        if not 0 <= self.measure_layer < n_layers:
            raise ValueError(f"measure_layer: layer {self.measure_layer} out of range")


def build(cfg: ExperimentConfig, seed: int):
    """Network, optimizer wrapper and data for one seeded run."""
    x, y = gen_synthetic(cfg.data, seed)
    net = Network.from_dims(cfg.dims, cfg.activation, rng=make_rng(seed, "init"), init_std=cfg.init_std)
    opt = KineticOptimizer(make_optimizer(cfg.optimizer), cfg.kinetic, cfg.target_layers if cfg.kinetic else (), seed=seed)
    return net, opt, x, y[:, None]


def train_step(net: Network, opt: KineticOptimizer, x, y) -> float:
    loss, grad = mse_loss(net.forward(x), y)
    net.backward(grad)
    opt.step(net)
    return loss


@dataclass
class RunResult:
    seed: int
    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    network: Network | None = None
    diverged_at: int | None = None

    @property
    def final_similarity(self) -> np.ndarray:
        return self.snapshots[max(self.snapshots)]


def train_epochs(net, opt, x, y, *, epochs, batch_size=0, rng=None, measure_layer=0,
                 record_timing=False, snapshot_every=0, result=None) -> RunResult:
    """Train for ``epochs`` passes over ``(x, y)``, recording metrics per epoch.

    ``batch_size=0`` means full batch; otherwise each epoch visits the
    samples in a fresh permutation drawn from ``rng``. Raises
    :class:`DivergenceError` (carrying the partial result) as soon as the
    loss or any parameter stops being finite.
    """
    result = RunResult(seed=-1, network=net) if result is None else result
    n = x.shape[0]
    bs = batch_size or n
    for epoch in range(1, epochs + 1):
        order = np.arange(n) if bs >= n else rng.permutation(n)
        total = 0.0
        t0 = time.perf_counter()
        # overflow is reported as divergence below, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                total += train_step(net, opt, x[idx], y[idx]) * idx.size
        elapsed = (time.perf_counter() - t0) * 1e3 / math.ceil(n / bs)
        loss = total / n
        with np.errstate(over="ignore", invalid="ignore"):
            c = cosine_matrix(net.layers[measure_layer].weight)
        result.records.append(MetricsRecord(
            epoch=epoch,
            train_loss=loss,
            neuron_similarity=neuron_similarity(c),
            weight_correlation=weight_correlation(c),
            step_time_ms=elapsed if record_timing else float("nan"),
        ))
        if (snapshot_every and epoch % snapshot_every == 0) or epoch == epochs:
            result.snapshots[epoch] = c
        if not np.isfinite(loss) or not all(np.all(np.isfinite(p)) for p in net.parameters()):
            result.diverged_at = epoch
            result.snapshots[epoch] = c
            raise DivergenceError(epoch, result)
    return result


def run_condensation(cfg: ExperimentConfig, seed: int | None = None) -> RunResult:
    """Train one seed of the configured experiment."""
    seed = cfg.seeds[0] if seed is None else int(seed)
    net, opt, x, y = build(cfg, seed)
    return train_epochs(
        net, opt, x, y,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        rng=make_rng(seed, "batches"),
        measure_layer=cfg.measure_layer,
        record_timing=cfg.record_timing,
        snapshot_every=cfg.snapshot_every,
        result=RunResult(seed, network=net),
    )


# -- run directory ---------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def flatten_config(cfg: ExperimentConfig, seed: int) -> dict:
    """Flat ``section.key -> value`` view of an experiment config."""
    out = {"run.seed": seed}
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if dataclasses.is_dataclass(val):
            for sub in dataclasses.fields(val):
                out[f"{f.name}.{sub.name}"] = getattr(val, sub.name)
        elif val is None:
            out[f.name] = "none"
        else:
            out[f.name] = val
    return {k: (v.value if hasattr(v, "value") else v) for k, v in out.items()}


def write_manifest(path, items: dict) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            if isinstance(v, (tuple, list)):
                v = ",".join(_fmt(x) for x in v)
            fh.write(f"{k}={_fmt(v)}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and "=" in line:
                k, v = line.split("=", 1)
                out[k] = v
    return out


def write_metrics(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for r in records:
            w.writerow([r.epoch] + [_fmt(getattr(r, c)) for c in METRICS_COLUMNS[1:]])


def read_metrics(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in METRICS_COLUMNS}


def write_run(directory, result: RunResult, manifest: dict) -> None:
    os.makedirs(directory, exist_ok=True)
    items = dict(manifest)
    items["status"] = "ok" if result.diverged_at is None else f"diverged_at_epoch_{result.diverged_at}"
    write_manifest(os.path.join(directory, "manifest.txt"), items)
    write_metrics(os.path.join(directory, "metrics.csv"), result.records)
    if result.snapshots:
        last = max(result.snapshots)
        save_csv(os.path.join(directory, "similarity_final.csv"), result.snapshots[last])
        for epoch, c in sorted(result.snapshots.items()):
            if epoch != last:
                save_csv(os.path.join(directory, f"similarity_epoch_{epoch}.csv"), c)


# -- overhead benchmark ------------------------------------------------------


def bench_overhead(cfg: ExperimentConfig, steps: int = 200, warmup: int = 20, seed: int | None = None):
    """Median wall time (ms) of one full training step, base vs. collision.

    Both networks start from the same state and their steps are
    interleaved so background load affects them alike.
    """
    seed = cfg.seeds[0] if seed is None else seed
    base_cfg = dataclasses.replace(cfg, kinetic=None)
    net_a, opt_a, x, y = build(base_cfg, seed)
    net_b, opt_b, _, _ = build(cfg, seed)
    times_a, times_b = [], []
    for k in range(warmup + steps):
        t0 = time.perf_counter()
        train_step(net_a, opt_a, x, y)
        t1 = time.perf_counter()
        train_step(net_b, opt_b, x, y)
        t2 = time.perf_counter()
        if k >= warmup:
            times_a.append(t1 - t0)
            times_b.append(t2 - t1)
    return float(np.median(times_a) * 1e3), float(np.median(times_b) * 1e3)

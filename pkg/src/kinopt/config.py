"""INI run configuration shared by all CLI commands.

Every key has a default, so an empty file is a valid config. Unknown
sections or keys are rejected with a message naming them.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .dsmc import DsmcConfig
from .exp import ExperimentConfig, SyntheticSpec
from .kinetic import KineticConfig
from .optim import OptimizerConfig


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _list(conv):
    def parse_list(text: str) -> tuple:
        return tuple(conv(p.strip()) for p in text.split(",") if p.strip())
    return parse_list


def _str(text: str) -> str:
    return text.strip()


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "network": {
        "dims": (_list(int), (5, 50, 1)),
        "activation": (_str, "tanh"),
        "init_std": (float, 0.005),
    },
    "optimizer": {
        "kind": (_str, "adam"),
        "learning_rate": (float, 1e-3),
        "momentum": (float, 0.0),
        "weight_decay": (float, 0.0),
        "beta1": (float, 0.9),
        "beta2": (float, 0.999),
        "epsilon": (float, 1e-8),
    },
    "kinetic": {
        "mode": (_str, "none"),  # none | soft | hard
        "coll_coef": (float, 0.1),
        "soft_zero_diagonal": (_bool, False),
        "hard_max_one_collision_per_neuron": (_bool, False),
        "target_layers": (_list(int), (0,)),
        "rng_stream_label": (_str, "kinetic"),
    },
    "data": {
        "n_samples": (int, 80),
        "input_dim": (int, 5),
        "low": (float, -4.0),
        "high": (float, 2.0),
        "amplitude": (float, 3.5),
        "frequency": (float, 5.0),
        "phase": (float, 1.0),
    },
    "run": {
        "seeds": (_list(int), (0,)),
        "epochs": (int, 100),
        "batch_size": (int, 0),
        "snapshot_every": (int, 0),
        "record_timing": (_bool, False),
        "measure_layer": (int, 0),
        "bench_steps": (int, 200),
        "bench_warmup": (int, 20),
    },
    "dsmc": {
        "n_particles": (int, 10_000),
        "f_n": (float, 1.0),
        "diameter": (float, 0.005),
        "tau": (float, 0.005),
        "box": (_list(float), (1.0, 1.0, 1.0)),
        "cells": (_list(int), (5, 5, 5)),
        "mass": (float, 1.0),
        "kT": (float, 1.0),
        "seed": (int, 0),
        "n_steps": (int, 2000),
        "init": (_str, "equal_speed"),
        "vr_max_factor": (float, 3.0),
        "hist_bins": (int, 200),
        "hist_speed_factor": (float, 3.0),
        "record_every": (int, 1),
        "snapshot_every": (int, 0),
    },
}


def _defaults() -> dict:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


@dataclass
class RunConfig:
    """Typed values for every ``section.key`` in :data:`SCHEMA`."""

    values: dict = field(default_factory=_defaults)

    def __getitem__(self, dotted: str):
        sec, key = dotted.split(".", 1)
        return self.values[sec][key]

    def with_values(self, **dotted) -> "RunConfig":
        """Copy with ``section__key=value`` overrides (``__`` stands for the dot)."""
        out = RunConfig({s: dict(v) for s, v in self.values.items()})
        for name, val in dotted.items():
            sec, key = name.split("__", 1)
            if sec not in SCHEMA or key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key")
            out.values[sec][key] = val
        return out

    def experiment(self) -> ExperimentConfig:
        v = self.values
        opt = _guard(("optimizer",), lambda: OptimizerConfig(**v["optimizer"]))
        k = v["kinetic"]
        kinetic = None
        if k["mode"].strip().lower() != "none":
            kinetic = _guard(("kinetic",), lambda: KineticConfig(
                mode=k["mode"],
                coll_coef=k["coll_coef"],
                soft_zero_diagonal=k["soft_zero_diagonal"],
                hard_max_one_collision_per_neuron=k["hard_max_one_collision_per_neuron"],
                rng_stream_label=k["rng_stream_label"],
            ))
        data = _guard(("data",), lambda: SyntheticSpec(**v["data"]))
        r = v["run"]
        if not r["seeds"]:
            raise ConfigError("run.seeds", "need at least one seed")
        return _guard(("network", "kinetic", "run"), lambda: ExperimentConfig(
            dims=v["network"]["dims"],
            activation=v["network"]["activation"],
            init_std=v["network"]["init_std"],
            optimizer=opt,
            kinetic=kinetic,
            target_layers=k["target_layers"],
            epochs=r["epochs"],
            batch_size=r["batch_size"],
            snapshot_every=r["snapshot_every"],
            record_timing=r["record_timing"],
            measure_layer=r["measure_layer"],
            data=data,
            seeds=r["seeds"],
        ))

    def dsmc(self) -> DsmcConfig:
        d = {k: val for k, val in self.values["dsmc"].items() if k != "snapshot_every"}
        return _guard(("dsmc",), lambda: DsmcConfig(**d))


def _guard(sections, build):
    """Run ``build``; turn a ``"key: message"`` ValueError into a ConfigError."""
    try:
        return build()
    except ValueError as e:
        head, _, rest = str(e).partition(":")
        head = head.strip()
        for sec in sections:
            if head in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{head}", rest.strip()) from None
        raise ConfigError(sections[0], str(e)) from None


def parse(text: str) -> RunConfig:
    """Parse INI text; missing keys take their defaults."""
    cp = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError("config", f"malformed file: {e}") from None
    cfg = RunConfig()
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(sec, "unknown section")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key")
            try:
                cfg.values[sec][key] = SCHEMA[sec][key][0](raw)
            except ValueError as e:
                raise ConfigError(f"{sec}.{key}", f"bad value {raw!r} ({e})") from None
    return cfg


def emit(cfg: RunConfig) -> str:
    """INI text listing every key, in schema order."""
    lines = []
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key in keys:
            lines.append(f"{key} = {_format(cfg.values[sec][key])}")
        lines.append("")
    return "\n".join(lines)


def load(path) -> RunConfig:
    with open(path) as fh:
        return parse(fh.read())

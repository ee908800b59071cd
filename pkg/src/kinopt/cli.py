"""``kinopt`` command line: train, dsmc, compare, bench.

Exit codes: 0 ok, 2 config error, 3 runtime error or divergence, 4 I/O error.
Every command writes its outputs into a fresh temporary directory next to
``--out`` and renames it into place at the end, so ``--out`` never holds a
half-written mix of old and new files.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import shutil
import sys
import tempfile

import numpy as np

from . import config as cfgmod
from .dsmc import H_SERIES_COLUMNS, DsmcSimulation
from .exp import (
    METRICS_COLUMNS,
    DivergenceError,
    bench_overhead,
    read_manifest,
    read_metrics,
    run_condensation,
    write_manifest,
    write_run,
)
from .linalg import save_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4

# timing is wall-clock noise, not a comparable metric
COMPARE_COLUMNS = tuple(c for c in METRICS_COLUMNS if c not in ("epoch", "step_time_ms"))


class RunError(RuntimeError):
    pass


@contextlib.contextmanager
def atomic_dir(out):
    """Yield a temp directory that replaces ``out`` when the block exits.

    The swap also happens when the block raises :class:`DivergenceError`,
    so partial results of a diverged run are kept.
    """
    out = os.path.abspath(out)
    parent = os.path.dirname(out)
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=f".{os.path.basename(out)}.tmp-", dir=parent)

    def commit():
        if os.path.exists(out):
            old = tempfile.mkdtemp(prefix=f".{os.path.basename(out)}.old-", dir=parent)
            os.rmdir(old)
            os.rename(out, old)
            os.rename(tmp, out)
            shutil.rmtree(old, ignore_errors=True)
        else:
            os.rename(tmp, out)

    try:
        yield tmp
    except DivergenceError:
        commit()
        raise
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    commit()


def _load_config(path) -> cfgmod.RunConfig:
    return cfgmod.RunConfig() if path is None else cfgmod.load(path)


def _say(args, msg):
    if not args.quiet:
        print(msg)


def run_manifest(rc: cfgmod.RunConfig, seed: int, sections=("network", "optimizer", "kinetic", "data", "run")) -> dict:
    items = {}
    for sec in sections:
        for key, val in rc.values[sec].items():
            items[f"{sec}.{key}"] = cfgmod._format(val)
    items["run.seed"] = str(seed)
    return items


# -- commands ----------------------------------------------------------------


def cmd_train(args) -> int:
    rc = _load_config(args.config)
    if args.seed is not None:
        rc = rc.with_values(run__seeds=(args.seed,))
    cfg = rc.experiment()
    with atomic_dir(args.out) as tmp:
        for seed in cfg.seeds:
            target = tmp if len(cfg.seeds) == 1 else os.path.join(tmp, f"seed_{seed}")
            try:
                result = run_condensation(cfg, seed)
            except DivergenceError as e:
                write_run(target, e.result, run_manifest(rc, seed))
                raise
            write_run(target, result, run_manifest(rc, seed))
            last = result.records[-1]
            _say(args, f"seed {seed}: loss {last.train_loss:.6g} "
                       f"weight_correlation {last.weight_correlation:.6g} "
                       f"neuron_similarity {last.neuron_similarity:.6g}")
    _say(args, f"wrote {args.out}")
    return EXIT_OK


def cmd_dsmc(args) -> int:
    rc = _load_config(args.config)
    if args.seed is not None:
        rc = rc.with_values(dsmc__seed=args.seed)
    cfg = rc.dsmc()
    snap_every = rc["dsmc.snapshot_every"]
    if snap_every < 0:
        raise cfgmod.ConfigError("dsmc.snapshot_every", "must be >= 0")
    with atomic_dir(args.out) as tmp:
        write_manifest(os.path.join(tmp, "manifest.txt"), run_manifest(rc, cfg.seed, ("dsmc",)))
        sim = DsmcSimulation(cfg)

        def snapshot(step, v):
            if snap_every and step % snap_every == 0:
                save_csv(os.path.join(tmp, f"velocities_step_{step}.csv"), v)

        rows = sim.run(snapshot=snapshot)
        with open(os.path.join(tmp, "h_series.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(H_SERIES_COLUMNS)
            for r in rows:
                w.writerow([r["step"]] + [format(float(r[c]), ".17g") for c in H_SERIES_COLUMNS[1:]])
    if rows:
        _say(args, f"H {rows[0]['H']:.6g} -> {rows[-1]['H']:.6g}, mb_distance {rows[-1]['mb_distance']:.4g}")
    _say(args, f"wrote {args.out}")
    return EXIT_OK


def _json_num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def compare_runs(dir_a, dir_b) -> tuple[dict, dict]:
    """Deltas ``b - a`` of each metric column: summary and per-epoch arrays."""
    a = read_metrics(os.path.join(dir_a, "metrics.csv"))
    b = read_metrics(os.path.join(dir_b, "metrics.csv"))
    if a["epoch"].shape != b["epoch"].shape or not np.array_equal(a["epoch"], b["epoch"]):
        raise RunError(f"epoch counts differ: {a['epoch'].size} vs {b['epoch'].size}")
    if a["epoch"].size == 0:
        raise RunError("runs have no epochs to compare")
    diff = {c: b[c] - a[c] for c in COMPARE_COLUMNS}
    summary = {"run_a": os.path.abspath(dir_a), "run_b": os.path.abspath(dir_b), "epochs": int(a["epoch"].size)}
    for c in COMPARE_COLUMNS:
        summary[f"{c}_final_delta"] = _json_num(diff[c][-1])
        summary[f"{c}_mean_delta"] = _json_num(diff[c].mean())
    return summary, {"epoch": a["epoch"].astype(int), **diff}


def cmd_compare(args) -> int:
    for d in (args.run_a, args.run_b):
        if not os.path.isfile(os.path.join(d, "metrics.csv")):
            raise FileNotFoundError(f"{d}: no metrics.csv (not a run directory)")
    summary, diff = compare_runs(args.run_a, args.run_b)
    with atomic_dir(args.out) as tmp:
        with open(os.path.join(tmp, "compare.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(tmp, "metrics_diff.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epoch",) + COMPARE_COLUMNS)
            for k, epoch in enumerate(diff["epoch"]):
                w.writerow([epoch] + [format(float(diff[c][k]), ".17g") for c in COMPARE_COLUMNS])
    _say(args, f"weight_correlation_final_delta {summary['weight_correlation_final_delta']}")
    _say(args, f"wrote {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    rc = _load_config(args.config)
    cfg = rc.experiment()
    steps, warmup = rc["run.bench_steps"], rc["run.bench_warmup"]
    if steps < 1:
        raise cfgmod.ConfigError("run.bench_steps", "must be >= 1")
    if warmup < 0:
        raise cfgmod.ConfigError("run.bench_warmup", "must be >= 0")
    seed = cfg.seeds[0] if args.seed is None else args.seed
    base_ms, ko_ms = bench_overhead(cfg, steps=steps, warmup=warmup, seed=seed)
    report = {
        "base_ms_per_step": base_ms,
        "ko_ms_per_step": ko_ms,
        "ratio": ko_ms / base_ms,
        "steps": steps,
        "warmup": warmup,
        "dims": list(cfg.dims),
        "mode": cfg.kinetic.mode.value if cfg.kinetic else "none",
        "target_layers": list(cfg.target_layers),
        "seed": seed,
    }
    with atomic_dir(args.out) as tmp:
        with open(os.path.join(tmp, "bench.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _say(args, f"base {base_ms:.4g} ms/step, ko {ko_ms:.4g} ms/step, ratio {report['ratio']:.3f}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file (defaults used if omitted)")
    common.add_argument("--seed", type=_u64, help="override the config seed(s)")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    p = argparse.ArgumentParser(prog="kinopt", description="Collision-transform optimizers and DSMC experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("train", cmd_train, "run the synthetic condensation experiment"),
        ("dsmc", cmd_dsmc, "run a DSMC relaxation and write h_series.csv"),
        ("bench", cmd_bench, "time base vs. collision training steps"),
    ):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--out", metavar="DIR", default=f"kinopt-{name}", help="output directory")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("compare", parents=[common], help="per-epoch metric deltas of two runs (b - a)")
    sp.add_argument("run_a")
    sp.add_argument("run_b")
    sp.add_argument("--out", metavar="DIR", default="kinopt-compare", help="output directory")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return args.func(args)
    except cfgmod.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (RunError, ValueError, FloatingPointError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

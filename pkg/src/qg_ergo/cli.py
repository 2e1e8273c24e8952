"""
Command line entry point ``qg-ergo``.

    qg-ergo check  <config>                 theorem conditions only
    qg-ergo run    <config>                 simulate, write CSV/JSON/checkpoints
    qg-ergo resume <checkpoint> --t-end T   continue a run from a checkpoint

Failures exit nonzero and print one JSON object with an ``error`` category
on stderr. Scientific outputs are byte-stable for a given config; wall-clock
and host details go to ``metadata.json`` only.
"""

import argparse
import dataclasses
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .checkpoint import Checkpoint, member_file, read_checkpoint, write_checkpoint
from .config import load_config
from .ensemble import EnsembleRun, default_observables, run_ensemble
from .ergodicity import analyze, time_average
from .errors import (CheckpointError, ConfigError, ConfigParseError, InstabilityError,
                     QGErgoError, TheoremConditionError)
from .noise import theorem_conditions
from .rng import GENERATOR_FAMILY

__all__ = ["main", "execute", "resume", "build_parser", "EXIT_CODES"]

log = logging.getLogger("qg_ergo")

EXIT_CODES = {
    "usage": 2,
    "config": 2,
    "theorem_condition_failed": 3,
    "instability": 4,
    "io_error": 5,
    "checkpoint": 6,
    "error": 1,
}

CSV_NAME = "timeseries.csv"
REPORT_NAME = "report.json"
CONFIG_NAME = "config.json"
META_NAME = "metadata.json"


def _json_safe(obj):
    """Replace non-finite floats by ``None`` so the report is strict JSON."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, obj):
    Path(path).write_text(json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("QG_ERGO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"QG_ERGO_THREADS must be an integer, got {env!r}") from None
    return 1


def _metadata(out, started, extra):
    meta = {
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "host": platform.node(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "qg_ergo": __version__,
        "generator": GENERATOR_FAMILY,
    }
    meta.update(extra)
    _write_json(out / META_NAME, meta)


# ---------------------------------------------------------------- CSV


def write_timeseries(path, runs, dt):
    """Rows ordered by (member, step): ``t, member, <observables>``."""
    first = next(iter(runs.values()))
    names = list(first.values)
    lines = [",".join(["t", "member"] + names)]
    for run in runs.values():
        tcol = [repr(float(s * dt)) for s in run.steps]
        cols = [run.values[n] for n in names]
        for i, m in enumerate(run.members):
            mid = str(int(m))
            rows = zip(tcol, *(c[i].tolist() for c in cols))
            lines.extend(",".join([r[0], mid] + [repr(x) for x in r[1:]]) for r in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_timeseries(path, dt):
    """``(names, {member: (steps, {name: values})})`` from a written CSV."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["t", "member"]:
            raise ConfigError(f"{path} is not a timeseries file")
        names = header[2:]
        data = {}
        for line in fh:
            parts = line.rstrip("\n").split(",")
            member = int(parts[1])
            data.setdefault(member, []).append(
                [round(float(parts[0]) / dt)] + [float(x) for x in parts[2:]])
    out = {}
    for m, rows in data.items():
        arr = np.array(rows)
        out[m] = (arr[:, 0].astype(np.int64), {n: arr[:, j + 1] for j, n in enumerate(names)})
    return names, out


# ---------------------------------------------------------------- report


def build_report(config, cond, runs, forced):
    params = config.model_params()
    report = {
        "model": {"nu": params.nu, "r": params.r, "beta": params.beta, "N": params.N,
                  "dt": params.dt, "t_end": config.t_end, "n_steps": config.n_steps,
                  "diagnostic_only": params.diagnostic_only},
        "conditions": cond.to_dict(),
        "forced": forced,
        "ensemble_size": config.ensemble_size,
        "initial_conditions": list(runs),
        "mode": "birkhoff" if len(runs) == 2 and config.ensemble_size >= 2 else
                "ensemble" if config.ensemble_size >= 2 else "single",
        "ergodic": None,
    }
    names = list(next(iter(runs.values())).values)
    if config.ensemble_size >= 2:
        corr = 1.0 / (2.0 * (2.0 * math.pi**2 * params.nu + params.r))
        erg = analyze(runs, names, config.t_end, config.burn_in,
                      degenerate=config.noise_spec().is_zero, corr_time=corr,
                      conditions=None, forced=forced)
        report["ergodic"] = erg.to_dict()
    else:
        report["time_averages"] = {
            lab: {n: time_average(run.values[n], run.times, config.burn_in).tolist()
                  for n in names}
            for lab, run in runs.items()
        }
    return report


def _write_checkpoints(out, config, runs):
    count = 0
    for run in runs.values():
        for step, (omega, z) in sorted(run.checkpoints.items()):
            for i, m in enumerate(run.members):
                ckpt = Checkpoint(config.N, int(step), float(step * config.dt), omega[i], z[i],
                                  config.seed, int(step))
                write_checkpoint(member_file(out, step, int(m)), ckpt)
                count += 1
    return count


def _gate(config, force):
    cond = theorem_conditions(config.noise_spec(), config.nu)
    if not cond.overall and not force:
        raise TheoremConditionError(
            "noise fails the ergodicity conditions " + ", ".join(cond.failed)
            + " (use --force to run anyway)", cond.failed, cond.root_failures)
    if config.model_params().diagnostic_only:
        log.warning("r = 0: friction-free runs are diagnostic only")
    return cond


def _finish(out, config, cond, runs, force, started, extra):
    _write_checkpoints(out, config, runs)
    write_timeseries(out / CSV_NAME, runs, config.dt)
    _write_json(out / REPORT_NAME, build_report(config, cond, runs, not cond.overall and force))
    _metadata(out, started, extra)


def execute(config, out_dir=None, force=False, threads=1):
    """Run a validated config end to end; returns the output directory."""
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    out = Path(out_dir if out_dir is not None else config.output_dir)
    config = dataclasses.replace(config, output_dir=str(out))
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_NAME).write_text(config.to_json(), encoding="utf-8")
    cond = _gate(config, force)
    params, noise = config.model_params(), config.noise_spec()
    runs = {}
    for label, omega0, members in config.initial_fields():
        log.info("%s: %d members x %d steps", label, len(members), config.n_steps)
        runs[label] = run_ensemble(
            params, noise, omega0, members, config.seed, config.n_steps,
            sample_every=config.sample_every, observables=config.observables,
            checkpoint_every=config.checkpoint_every, threads=threads)
    _finish(out, config, cond, runs, force, started, {"command": "run", "threads": threads})
    return out


def _locate(path):
    """Checkpoint step directory and run root for a step directory or member file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such checkpoint: {path}")
    step_dir = path.parent if path.is_file() else path
    if not step_dir.name.startswith("step_"):
        raise CheckpointError(f"{step_dir} is not a checkpoint step directory")
    return step_dir, step_dir.parent.parent


def resume(checkpoint, t_end, out_dir=None, force=False, threads=1):
    """
    Continue the run that wrote ``checkpoint`` up to ``t_end``.

    Samples up to the checkpoint come from the original ``timeseries.csv``;
    the merged outputs equal those of an uninterrupted run to ``t_end``.
    """
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    step_dir, root = _locate(checkpoint)
    base = load_config(root / CONFIG_NAME)
    out = Path(out_dir) if out_dir is not None else root
    config = dataclasses.replace(base, t_end=float(t_end), output_dir=str(out))
    ckpts = {}
    for f in sorted(step_dir.glob("member_*.bin")):
        ckpts[int(f.stem.split("_")[1])] = read_checkpoint(f)
    if not ckpts:
        raise CheckpointError(f"{step_dir} holds no member checkpoints")
    steps = {c.counter for c in ckpts.values()}
    if len(steps) != 1:
        raise CheckpointError("member checkpoints disagree on the step counter")
    s = steps.pop()
    if any(c.N != config.N or c.seed != config.seed for c in ckpts.values()):
        raise CheckpointError("checkpoint does not match the run configuration")
    if config.n_steps <= s:
        raise ConfigError(f"t_end={t_end:g} is not beyond the checkpoint time {s * config.dt:g}")
    names, old = read_timeseries(root / CSV_NAME, config.dt)
    if names != default_observables(config.observables):
        raise ConfigError("timeseries columns do not match the configured observables")

    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_NAME).write_text(config.to_json(), encoding="utf-8")
    cond = _gate(config, force)
    params, noise = config.model_params(), config.noise_spec()
    runs = {}
    for label, _, members in config.initial_fields():
        missing = [int(m) for m in members if int(m) not in ckpts or int(m) not in old]
        if missing:
            raise CheckpointError(f"no checkpoint or samples for member(s) {missing}")
        omega = np.stack([ckpts[int(m)].omega for m in members])
        z = np.stack([ckpts[int(m)].z for m in members])
        new = run_ensemble(params, noise, omega, members, config.seed, config.n_steps - s,
                           sample_every=config.sample_every, observables=config.observables,
                           start_step=s, z0=z, checkpoint_every=config.checkpoint_every,
                           threads=threads)
        keep = new.steps > s
        old_steps = old[int(members[0])][0]
        head = old_steps <= s
        values = {
            n: np.concatenate([np.stack([old[int(m)][1][n][head] for m in members]),
                               new.values[n][:, keep]], axis=1)
            for n in names
        }
        runs[label] = EnsembleRun(members, np.concatenate([old_steps[head], new.steps[keep]]),
                                  config.dt, values, new.omega, new.z, new.end_step,
                                  new.checkpoints)
    _finish(out, config, cond, runs, force, started,
            {"command": "resume", "threads": threads, "resumed_from_step": s})
    return out


# ---------------------------------------------------------------- check


def check(config):
    cond = theorem_conditions(config.noise_spec(), config.nu)
    print(json.dumps(_json_safe(cond.to_dict()), indent=2, sort_keys=True))
    if not cond.overall:
        raise TheoremConditionError("noise fails the ergodicity conditions "
                                    + ", ".join(cond.failed), cond.failed,
                                    cond.root_failures)


# ---------------------------------------------------------------- entry


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qg-ergo",
        description="Stochastic quasigeostrophic flow: simulation and ergodicity diagnostics.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--force", action="store_true",
                       help="run even if the noise fails the ergodicity conditions")
        p.add_argument("--output-dir", help="override the configured output directory")
        p.add_argument("--threads", type=int,
                       help="worker threads (default: $QG_ERGO_THREADS or 1)")

    p = sub.add_parser("run", help="simulate a configuration")
    p.add_argument("config", help="JSON config file")
    common(p)
    p = sub.add_parser("check", help="evaluate the theorem conditions only")
    p.add_argument("config", help="JSON config file")
    p = sub.add_parser("resume", help="continue a run from a checkpoint")
    p.add_argument("checkpoint", help="checkpoint step directory or member file")
    p.add_argument("--t-end", type=float, required=True, help="new horizon")
    common(p)
    return parser


def _fail(exc, kind):
    payload = {"error": getattr(exc, "category", kind), "message": str(exc)}
    if isinstance(exc, ConfigParseError):
        payload.update(line=exc.line, column=exc.column)
    elif isinstance(exc, InstabilityError):
        payload.update(t=exc.t, mode=list(exc.mode) if exc.mode else None, member=exc.member)
    elif isinstance(exc, TheoremConditionError):
        payload["failed"] = list(exc.failed)
    print(json.dumps(_json_safe(payload), sort_keys=True), file=sys.stderr)
    return EXIT_CODES[kind]


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "check":
            check(load_config(args.config))
        elif args.command == "run":
            execute(load_config(args.config), args.output_dir, args.force, _threads(args.threads))
        else:
            resume(args.checkpoint, args.t_end, args.output_dir, args.force,
                   _threads(args.threads))
    except ConfigError as exc:
        return _fail(exc, "config")
    except TheoremConditionError as exc:
        return _fail(exc, "theorem_condition_failed")
    except InstabilityError as exc:
        return _fail(exc, "instability")
    except CheckpointError as exc:
        return _fail(exc, "checkpoint")
    except OSError as exc:
        exc.category = "io_error"
        return _fail(exc, "io_error")
    except QGErgoError as exc:
        return _fail(exc, "error")
    return 0


if __name__ == "__main__":
    sys.exit(main())

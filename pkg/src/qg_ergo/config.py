"""Run configuration: JSON parsing, validation, defaults and the resolved echo."""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import spectral
from .errors import ConfigError, ConfigParseError, QGErgoError
from .integrator import ModelParams, make_observable
from .noise import NoiseSpec
from .rng import initial_condition_normals

__all__ = ["NoiseConfig", "InitialCondition", "RunConfig", "parse_config", "load_config"]

_UINT64_MAX = (1 << 64) - 1


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _number(d, key, where, default=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{where}.{key} is required")
    if not _is_number(v) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be a finite number, got {v!r}")
    return float(v)


def _integer(d, key, where, default=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{where}.{key} is required")
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if not _is_int(v):
        raise ConfigError(f"{where}.{key} must be an integer, got {v!r}")
    return v


@dataclass(frozen=True)
class NoiseConfig:
    law: str = "power"
    c: float = 1.0
    p: float = 0.5
    gamma: float = 0.5
    table: Optional[tuple] = None

    @classmethod
    def from_dict(cls, d):
        where = "noise"
        _check_keys(d, ("law", "c", "p", "gamma", "table"), where)
        law = d.get("law", "power")
        if law not in ("power", "table", "zero"):
            raise ConfigError(f"noise.law must be 'power', 'table' or 'zero', got {law!r}")
        gamma = _number(d, "gamma", where, 0.5)
        if not 0.0 < gamma < 1.0:
            raise ConfigError(f"noise.gamma={gamma:g} violates the admissibility range 0 < gamma < 1")
        c = _number(d, "c", where, 1.0)
        p = _number(d, "p", where, 0.5)
        if c < 0:
            raise ConfigError(f"noise.c must be >= 0, got {c:g}")
        table = d.get("table")
        if law == "table":
            if not isinstance(table, list) or not all(_is_number(a) and a >= 0 for a in table):
                raise ConfigError("noise.table must be a list of non-negative numbers")
            table = tuple(float(a) for a in table)
        elif table is not None:
            raise ConfigError("noise.table is only valid with law 'table'")
        return cls(law, c, p, gamma, table)

    def to_dict(self):
        d = {"law": self.law, "c": self.c, "p": self.p, "gamma": self.gamma}
        if self.table is not None:
            d["table"] = list(self.table)
        return d


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "zero"
    mode: tuple = (1, 1)
    amplitude: float = 1.0
    rng_amplitude: float = 1.0

    @classmethod
    def from_dict(cls, d, where="initial_condition"):
        _check_keys(d, ("kind", "mode", "amplitude", "rng_amplitude"), where)
        kind = d.get("kind", "zero")
        if kind not in ("zero", "single_mode", "random"):
            raise ConfigError(f"{where}.kind must be 'zero', 'single_mode' or 'random', got {kind!r}")
        mode = d.get("mode", [1, 1])
        if (not isinstance(mode, list) or len(mode) != 2 or not all(_is_int(m) for m in mode)
                or min(mode) < 1):
            raise ConfigError(f"{where}.mode must be a pair of positive integers, got {mode!r}")
        return cls(kind, tuple(mode), _number(d, "amplitude", where, 1.0),
                   _number(d, "rng_amplitude", where, 1.0))

    def to_dict(self):
        return {"kind": self.kind, "mode": list(self.mode), "amplitude": self.amplitude,
                "rng_amplitude": self.rng_amplitude}

    def field(self, N, seed, stream):
        """Coefficient table of this initial condition (``stream`` picks the random draw)."""
        if self.kind == "zero":
            return np.zeros((N, N))
        if self.kind == "single_mode":
            return spectral.unit_mode(N, *self.mode, amplitude=self.amplitude)
        xi = initial_condition_normals(seed, stream, N * N).reshape(N, N)
        return self.rng_amplitude * xi / spectral.wavenumber_sq(N)


_TOP_KEYS = (
    "nu", "r", "beta", "N", "dt", "t_end", "burn_in", "seed", "ensemble_size", "noise",
    "initial_condition", "initial_condition_2", "observables", "output_dir",
    "checkpoint_every", "sample_every", "blowup",
)


@dataclass(frozen=True)
class RunConfig:
    nu: float = 1.0
    r: float = 0.1
    beta: float = 0.0
    N: int = 32
    dt: float = 1e-3
    t_end: float = 10.0
    burn_in: Optional[float] = None
    seed: int = 0
    ensemble_size: int = 1
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    initial_condition: InitialCondition = field(default_factory=InitialCondition)
    initial_condition_2: Optional[InitialCondition] = None
    observables: tuple = ()
    output_dir: str = "qg_ergo_out"
    checkpoint_every: int = 0
    sample_every: int = 10
    blowup: float = 1e8

    def __post_init__(self):
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", 0.1 * self.t_end)
        self.validate()

    def validate(self):
        def bad(key, msg):
            raise ConfigError(f"{key}: {msg}")

        if not self.nu > 0:
            bad("nu", f"must be > 0, got {self.nu:g}")
        if not self.r >= 0:
            bad("r", f"must be >= 0, got {self.r:g}")
        if not self.beta >= 0:
            bad("beta", f"must be >= 0, got {self.beta:g}")
        if self.N < 1:
            bad("N", f"must be >= 1, got {self.N}")
        if not self.dt > 0:
            bad("dt", f"must be > 0, got {self.dt:g}")
        if not self.t_end > 0:
            bad("t_end", f"must be > 0, got {self.t_end:g}")
        n = round(self.t_end / self.dt)
        if abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
            bad("t_end", f"{self.t_end:g} is not a whole number of steps of dt={self.dt:g}")
        if not 0 <= self.burn_in < self.t_end:
            bad("burn_in", f"must satisfy 0 <= burn_in < t_end, got {self.burn_in:g}")
        if not 0 <= self.seed <= _UINT64_MAX:
            bad("seed", "must be an unsigned 64-bit integer")
        if self.ensemble_size < 1:
            bad("ensemble_size", f"must be >= 1, got {self.ensemble_size}")
        if self.checkpoint_every < 0:
            bad("checkpoint_every", f"must be >= 0, got {self.checkpoint_every}")
        if self.sample_every < 1:
            bad("sample_every", f"must be >= 1, got {self.sample_every}")
        if not self.blowup > 0:
            bad("blowup", f"must be > 0, got {self.blowup:g}")
        for ic in (self.initial_condition, self.initial_condition_2):
            if ic is not None and ic.kind == "single_mode" and max(ic.mode) > self.N:
                bad("initial_condition.mode", f"{list(ic.mode)} lies outside truncation N={self.N}")
        if self.noise.law == "table" and len(self.noise.table) > self.N * self.N:
            bad("noise.table", f"has {len(self.noise.table)} entries, truncation holds {self.N ** 2}")
        for name in self.observables:
            try:
                make_observable(name, self.N)
            except QGErgoError as exc:
                bad("observables", str(exc))

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    @property
    def two_ic(self):
        return self.initial_condition_2 is not None

    def model_params(self):
        return ModelParams(self.nu, self.r, self.beta, self.N, self.dt, self.blowup)

    def noise_spec(self):
        nc = self.noise
        if nc.law == "power":
            return NoiseSpec.power(self.N, c=nc.c, p=nc.p, gamma=nc.gamma)
        if nc.law == "table":
            return NoiseSpec.from_table(self.N, nc.table, gamma=nc.gamma)
        return NoiseSpec.zero(self.N, gamma=nc.gamma)

    def initial_fields(self):
        """``[(label, omega0, member ids)]`` for each configured initial condition."""
        M = self.ensemble_size
        out = [("ic1", self.initial_condition.field(self.N, self.seed, 0), np.arange(M))]
        if self.two_ic:
            out.append(("ic2", self.initial_condition_2.field(self.N, self.seed, 1),
                        np.arange(M, 2 * M)))
        return out

    def to_dict(self):
        d = {
            "nu": self.nu, "r": self.r, "beta": self.beta, "N": self.N, "dt": self.dt,
            "t_end": self.t_end, "burn_in": self.burn_in, "seed": self.seed,
            "ensemble_size": self.ensemble_size, "noise": self.noise.to_dict(),
            "initial_condition": self.initial_condition.to_dict(),
            "observables": list(self.observables), "output_dir": self.output_dir,
            "checkpoint_every": self.checkpoint_every, "sample_every": self.sample_every,
            "blowup": self.blowup,
        }
        if self.initial_condition_2 is not None:
            d["initial_condition_2"] = self.initial_condition_2.to_dict()
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigParseError(f"duplicate key {k!r}")
        out[k] = v
    return out


def parse_config(text):
    """Parse and validate a JSON run configuration."""
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}",
                               exc.lineno, exc.colno) from None
    _check_keys(doc, _TOP_KEYS, "config")
    kw = {}
    for key in ("nu", "r", "beta", "dt", "t_end", "blowup"):
        if key in doc:
            kw[key] = _number(doc, key, "config")
    if doc.get("burn_in") is not None:
        kw["burn_in"] = _number(doc, "burn_in", "config")
    for key in ("N", "seed", "ensemble_size", "checkpoint_every", "sample_every"):
        if key in doc:
            kw[key] = _integer(doc, key, "config")
    if "noise" in doc:
        kw["noise"] = NoiseConfig.from_dict(doc["noise"])
    if "initial_condition" in doc:
        kw["initial_condition"] = InitialCondition.from_dict(doc["initial_condition"])
    if doc.get("initial_condition_2") is not None:
        kw["initial_condition_2"] = InitialCondition.from_dict(doc["initial_condition_2"],
                                                               "initial_condition_2")
    if "observables" in doc:
        obs = doc["observables"]
        if not isinstance(obs, list) or not all(isinstance(o, str) for o in obs):
            raise ConfigError("observables must be a list of names")
        kw["observables"] = tuple(obs)
    if "output_dir" in doc:
        if not isinstance(doc["output_dir"], str):
            raise ConfigError("output_dir must be a string")
        kw["output_dir"] = doc["output_dir"]
    return RunConfig(**kw)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

"""Experiment configuration: defaults, then a TOML file, then GCPKIT_* variables, then flags.

A config file holds the same keys as the command-line flags, with dashes
replaced by underscores, either at the top level or under ``[experiment]``::

    suite = "pmf"
    process = "gfcp"
    lambda = "1,1"
    beta = 0.7
    t = 1.0
    n_max = 20

Environment variables use the upper-cased key with the prefix ``GCPKIT_``,
e.g. ``GCPKIT_SEED=7`` or ``GCPKIT_N_MAX=30``.
"""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from ..errors import ParameterError

ENV_PREFIX = "GCPKIT_"
SUITES = ("pmf", "pgf", "simulate", "verify", "ruin", "orderstat", "lrd", "firstpassage")


@dataclass
class ExperimentConfig:
    suite: str = "pmf"
    target: str = ""          # verify: which check to run
    process: str = "gcp"
    k: int | None = None
    lam: str = "1"
    beta: float | None = None
    alpha: float | None = None
    bernstein: str | None = None
    beta_profile: str | None = None
    t: float = 1.0
    t_grid: str | None = None
    n_max: int | None = None
    sims: int = 100_000
    seed: int = 12345
    out: str | None = None
    format: str = "csv"
    workers: int = 1
    # suite-specific
    u: str | None = None      # pgf argument(s)
    level: int = 1            # first passage level
    c: float | None = None    # ruin premium rate
    claims: str = "exp:1"
    u_grid: str | None = None
    y_grid: str | None = None
    horizon: float = 1e4
    k_stat: int = 1
    f_at_z: float = 0.5
    s: float = 0.5            # lrd base time

    def validate(self) -> None:
        if self.suite not in SUITES:
            raise ParameterError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if self.format not in ("csv", "jsonl"):
            raise ParameterError("format must be csv or jsonl")
        if self.sims < 1:
            raise ParameterError("sims must be positive")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ParameterError("workers must be positive")
        if self.t < 0:
            raise ParameterError("t must be nonnegative")
        if self.n_max is not None and self.n_max < 0:
            raise ParameterError("n-max must be nonnegative")
        rates = self.rates()
        if self.k is not None and self.process not in ("ngcp", "ngfcp") and len(rates) != self.k:
            raise ParameterError(f"--k {self.k} does not match {len(rates)} rates")

    def rates(self) -> list[str]:
        sep = ";" if self.process in ("ngcp", "ngfcp") else ","
        items = [x.strip() for x in self.lam.split(sep) if x.strip()]
        if not items:
            raise ParameterError(f"no rates in {self.lam!r}")
        return items

    def float_list(self, name: str) -> np.ndarray | None:
        raw = getattr(self, name)
        if raw is None:
            return None
        try:
            vals = np.array([float(x) for x in str(raw).split(",") if x.strip()])
        except ValueError as exc:
            raise ParameterError(f"cannot parse {name.replace('_', '-')} {raw!r}") from exc
        if vals.size == 0:
            raise ParameterError(f"{name.replace('_', '-')} is empty")
        return vals

    def as_dict(self) -> dict:
        return asdict(self)


# flag and file key "lambda" maps onto the attribute "lam"
_ALIASES = {"lambda": "lam"}


def _coerce(name: str, value):
    ftypes = {f.name: f.type for f in fields(ExperimentConfig)}
    kind = str(ftypes[name])
    if value is None:
        return None
    try:
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"bad value {value!r} for {name}") from exc
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def _normalize(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    return _ALIASES.get(key, key)


def load_file(path: str | os.PathLike) -> dict:
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ParameterError(f"config file {p} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParameterError(f"config file {p} is not valid TOML: {exc}") from exc
    data = data.get("experiment", data)
    return _known(data, f"config file {p}")


def _known(data: dict, source: str) -> dict:
    names = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for key, val in data.items():
        name = _normalize(key)
        if name not in names:
            raise ParameterError(f"unknown key {key!r} in {source}")
        out[name] = _coerce(name, val)
    return out


def load_env(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    names = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for key, val in environ.items():
        if not key.startswith(ENV_PREFIX) or key == ENV_PREFIX + "CONFIG":
            continue
        name = _normalize(key[len(ENV_PREFIX):])
        if name in names:
            out[name] = _coerce(name, val)
    return out


def build_config(cli: dict, environ=None) -> ExperimentConfig:
    """Layer the sources; ``cli`` holds only the flags actually given."""
    environ = os.environ if environ is None else environ
    merged: dict = {}
    path = cli.get("config") or environ.get(ENV_PREFIX + "CONFIG")
    if path:
        merged.update(load_file(path))
    merged.update(load_env(environ))
    merged.update(_known({k: v for k, v in cli.items() if k != "config" and v is not None}, "flags"))
    cfg = ExperimentConfig(**merged)
    cfg.validate()
    return cfg

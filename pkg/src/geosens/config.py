"""Flat key-value experiment configuration.

A config file is a list of ``key = value`` lines; a ``[section]`` header is
optional and ignored.  Command-line flags override file values.

Lists use commas (``grid = 0.1, 0.2, 0.3``) or ``linspace(start, stop, count)``.
Index sets use semicolons between sets and commas within one
(``nu = 1; 2`` or ``nu = 1, 2; 3``).
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .estimators import ExactU, IncompleteU, parse_mode
from .inference import MIN_REPS

EXPERIMENTS = ("example1", "example2", "example3", "stiffness", "custom")

# sweepable parameter and its default grid, per experiment
SWEEPS = {
    "example1": ({"p", "alpha"}, "p", "linspace(0.1, 0.9, 9)"),
    "example2": ({"mu1", "mu2", "sigma1sq", "sigma2sq"}, "mu1", "linspace(-5, 0, 11)"),
    "example3": ({"mu1"}, "mu1", "linspace(0.5, 5, 10)"),
}

_COMMON = {"experiment", "seed", "n", "nw", "mode", "bootstrap", "level", "nu", "output", "format", "timing"}
_SPECIFIC = {
    "example1": {"sweep", "grid", "alpha", "p", "b", "msd_replicates"},
    "example2": {"sweep", "grid", "mu1", "mu2", "sigma1sq", "sigma2sq"},
    "example3": {"sweep", "grid", "mu1"},
    "stiffness": {"cases", "lambda_mu", "lambda_k"},
    "custom": {"hook", "validity", "manifold", "inputs"},
}
_DEFAULT_NU = {"example1": "1", "example2": "1; 2", "example3": "1; 2", "stiffness": "1; 2", "custom": "1"}

_LINSPACE = re.compile(r"^linspace\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)$")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    n: int = 300
    nw: int | None = None
    mode: ExactU | IncompleteU = ExactU()
    bootstrap: int = 0
    level: float = 0.95
    nu: tuple[tuple[int, ...], ...] = ((1,),)
    output: str | None = None
    format: str = "csv"
    timing: bool = False
    params: dict = field(default_factory=dict)

    @property
    def n_w(self) -> int:
        return self.nw if self.nw is not None else self.n

    def param(self, key, default=None):
        return self.params.get(key, default)


def parse_floats(text: str) -> list[float]:
    text = text.strip()
    m = _LINSPACE.match(text)
    try:
        if m:
            return [float(v) for v in np.linspace(float(m.group(1)), float(m.group(2)), int(m.group(3)))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot read numbers from {text!r}") from exc


def parse_nu(text: str) -> tuple[tuple[int, ...], ...]:
    try:
        sets = tuple(tuple(int(v) for v in part.split(",")) for part in text.split(";") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot read index sets from {text!r}") from exc
    if not sets:
        raise ConfigError("nu must list at least one index set")
    return sets


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def read_config_file(path) -> dict[str, str]:
    """Raw key/value pairs of a flat config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not re.search(r"^\s*\[", text, flags=re.MULTILINE):
        text = "[run]\n" + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for section in parser.sections():
        for key, val in parser.items(section):
            if key in values:
                raise ConfigError(f"key {key!r} given twice")
            values[key] = val
    return values


def _int(raw, key, minimum=None) -> int:
    try:
        val = int(str(raw).strip())
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from exc
    if minimum is not None and val < minimum:
        raise ConfigError(f"{key} must be at least {minimum}, got {val}")
    return val


def _float(raw, key) -> float:
    try:
        return float(str(raw).strip())
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from exc


def build_config(values: dict[str, str], overrides: dict | None = None) -> ExperimentConfig:
    """Validate raw values (with ``overrides`` winning) into an :class:`ExperimentConfig`."""
    raw = dict(values)
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key] = str(val)

    exp = raw.get("experiment", "").strip()
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")
    unknown = set(raw) - _COMMON - _SPECIFIC[exp]
    if unknown:
        raise ConfigError(f"unknown keys for {exp}: {', '.join(sorted(unknown))}")
    if "seed" not in raw:
        raise ConfigError("seed is mandatory")

    seed = _int(raw["seed"], "seed", 0)
    if seed >= 2**64:
        raise ConfigError("seed must fit in 64 bits")
    n = _int(raw.get("n", 300), "n", 2)
    nw = _int(raw["nw"], "nw", 2) if "nw" in raw else None
    try:
        mode = parse_mode(raw.get("mode", "exact"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    reps = _int(raw.get("bootstrap", 0), "bootstrap", 0)
    if 0 < reps < MIN_REPS:
        raise ConfigError(f"bootstrap needs 0 (off) or at least {MIN_REPS} replicates")
    level = _float(raw.get("level", 0.95), "level")
    if not 0.0 < level < 1.0:
        raise ConfigError("level must lie in (0, 1)")
    fmt = raw.get("format", "csv").strip().lower()
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    nu = parse_nu(raw.get("nu", _DEFAULT_NU[exp]))

    params: dict = {}
    for key in _SPECIFIC[exp]:
        if key in raw:
            params[key] = raw[key].strip()
    if exp in SWEEPS:
        allowed, default_sweep, default_grid = SWEEPS[exp]
        sweep = params.get("sweep", default_sweep)
        if sweep not in allowed:
            raise ConfigError(f"{exp} can sweep {', '.join(sorted(allowed))}; got {sweep!r}")
        params["sweep"] = sweep
        params["grid"] = parse_floats(params.get("grid", default_grid))
        if not params["grid"]:
            raise ConfigError("grid is empty")
        for key in _SPECIFIC[exp] - {"sweep", "grid", "msd_replicates"}:
            if key in params:
                params[key] = _float(params[key], key)
        if "msd_replicates" in params:
            params["msd_replicates"] = _int(params["msd_replicates"], "msd_replicates", 0)
    elif exp == "stiffness":
        params["cases"] = [c.strip() for c in params.get("cases", "gamma, uniform").split(",") if c.strip()]
        for case in params["cases"]:
            if case not in ("gamma", "uniform"):
                raise ConfigError(f"unknown stiffness case {case!r}")
        for key in ("lambda_mu", "lambda_k"):
            params[key] = parse_floats(params.get(key, "0.001, 0.01, 0.1, 1"))
            if not params[key] or min(params[key]) <= 0:
                raise ConfigError(f"{key} values must be positive")
    elif exp == "custom":
        for key in ("hook", "manifold", "inputs"):
            if key not in params:
                raise ConfigError(f"custom experiment needs {key}")

    return ExperimentConfig(
        experiment=exp,
        seed=seed,
        n=n,
        nw=nw,
        mode=mode,
        bootstrap=reps,
        level=level,
        nu=nu,
        output=raw.get("output"),
        format=fmt,
        timing=_parse_bool(raw.get("timing", "false")),
        params=params,
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    return build_config(read_config_file(path), overrides)


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)

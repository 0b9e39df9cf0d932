"""Experiment runners behind the command line.

Every runner returns a :class:`ResultTable` with a fixed, versioned column
list.  Grid point ``g`` and index-set position ``i`` key all random streams,
so a row depends only on the seed and its own coordinates.
"""

from __future__ import annotations

import csv
import importlib
import io
import json
import math
import re
import time
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, DegenerateDenominator, NumericalFailure
from .estimators import IndexEstimate, estimate_cvm, estimate_prepared, prepare
from .inference import bootstrap_ci, msd_from_values
from .manifolds import Euclid, LogSurface, Manifold, RealLine, SpdAffine, Sphere
from .models import (
    Bernoulli,
    CustomModel,
    DistributionSpec,
    Example1,
    Example2,
    Example3,
    Gamma,
    Model,
    Normal,
    Stiffness,
    Uniform,
    pick_freeze,
    sample_w_pool,
)
from .oracles import closed_form_example1
from .rng import stream

SCHEMA_VERSION = 1

META_COLUMNS = ["schema_version", "experiment", "row_type", "seed", "n", "nw", "mode", "dropped_tau", "elapsed_s"]

COLUMNS = {
    "example1": META_COLUMNS
    + ["p", "alpha", "b", "nu", "b_hat", "c_hat", "b_true", "c_true", "ci_lower", "ci_upper", "c_degenerate"]
    + ["replicates", "msd_b", "msd_c", "rmsd_b", "rmsd_c"],
    "example2": META_COLUMNS
    + ["mu1", "mu2", "sigma1sq", "sigma2sq", "nu", "b_hat", "b_ci_lower", "b_ci_upper", "b_se"]
    + ["c_hat", "c_ci_lower", "c_ci_upper", "c_degenerate"],
    "example3": META_COLUMNS
    + ["mu1", "nu", "b_hat", "b_ci_lower", "b_ci_upper", "b_se", "c_hat", "c_degenerate", "max_constraint_error"],
    "stiffness": META_COLUMNS + ["case", "lambda_mu", "lambda_k", "nu", "b_hat", "b_ci_lower", "b_ci_upper", "b_se"],
    "custom": META_COLUMNS + ["nu", "s_hat", "d_hat", "b_hat", "b_ci_lower", "b_ci_upper", "b_se"],
}

# sub-stream tags under the bootstrap role
_TAUS, _BOOT_BALL, _BOOT_CVM, _CVM_TAUS = 0, 1, 2, 3


@dataclass
class ResultTable:
    experiment: str
    columns: list[str]
    rows: list[dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_cell(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        records = [{c: json_cell(row.get(c)) for c in self.columns} for row in self.rows]
        return json.dumps(records, indent=1) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()

    def column(self, name, row_type="estimate"):
        return [r.get(name) for r in self.rows if r.get("row_type") == row_type]


def _check_finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        raise NumericalFailure(f"non-finite value {value!r} reached the output")


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        _check_finite(value)
        return repr(value)
    return str(value)


def json_cell(value):
    if isinstance(value, (np.floating, float)):
        value = float(value)
        _check_finite(value)
        return value
    if isinstance(value, (np.integer, bool)):
        return int(value)
    return value


def format_nu(nu) -> str:
    return ",".join(str(i) for i in nu)


# -- one estimate ----------------------------------------------------------


@dataclass
class PointResult:
    ball: IndexEstimate
    ball_ci: object = None
    cvm: float | None = None
    cvm_degenerate: bool = False
    cvm_ci: object = None
    max_constraint_error: float | None = None
    elapsed: float = 0.0


def estimate_point(
    model: Model, nu, cfg: ExperimentConfig, key: tuple[int, ...], with_cvm: bool = False, cvm_ci: bool = False
) -> PointResult:
    """Ball index (and optionally the quadrant CVM index) at one configuration."""
    started = time.perf_counter()
    seed = cfg.seed
    pairs = pick_freeze(model, nu, cfg.n, stream(seed, "pairs", *key))
    pool = sample_w_pool(model, cfg.n_w, stream(seed, "wpool", *key))
    manifold = model.manifold
    prep = prepare(pairs, pool, manifold)
    ball = estimate_prepared(prep, cfg.mode, stream(seed, "bootstrap", *key, _TAUS).generator())
    out = PointResult(ball)
    if cfg.bootstrap:
        out.ball_ci = bootstrap_ci(
            pairs, pool, manifold, cfg.bootstrap, cfg.level, stream(seed, "bootstrap", *key, _BOOT_BALL), cfg.mode
        )
    if with_cvm:
        try:
            c = estimate_cvm(pairs, pool, manifold, cfg.mode, stream(seed, "bootstrap", *key, _CVM_TAUS).generator())
            out.cvm = c.b_hat
        except DegenerateDenominator:
            out.cvm, out.cvm_degenerate = 0.0, True
        if cvm_ci and cfg.bootstrap and not out.cvm_degenerate:
            out.cvm_ci = bootstrap_ci(
                pairs,
                pool,
                manifold,
                cfg.bootstrap,
                cfg.level,
                stream(seed, "bootstrap", *key, _BOOT_CVM),
                cfg.mode,
                index="cvm",
            )
    if isinstance(manifold, LogSurface):
        out.max_constraint_error = float(
            max(np.max(np.abs(np.prod(a, axis=1) - 1.0)) for a in (pairs.z, pairs.z_nu, pool.points))
        )
    out.elapsed = time.perf_counter() - started
    return out


def _meta(cfg: ExperimentConfig, row_type: str, dropped=0, elapsed=0.0) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "row_type": row_type,
        "seed": cfg.seed,
        "n": cfg.n,
        "nw": cfg.n_w,
        "mode": str(cfg.mode),
        "dropped_tau": dropped,
        # wall-clock time breaks byte-identical reruns, so it is opt-in
        "elapsed_s": round(elapsed, 6) if cfg.timing else 0.0,
    }


def _ci_cells(ci, prefix="b_"):
    if ci is None:
        return {f"{prefix}ci_lower": None, f"{prefix}ci_upper": None}
    return {f"{prefix}ci_lower": ci.lower, f"{prefix}ci_upper": ci.upper}


def _point_row(cfg, res: PointResult) -> dict:
    row = _meta(cfg, "estimate", res.ball.n_dropped, res.elapsed)
    row["b_hat"] = res.ball.b_hat
    row.update(_ci_cells(res.ball_ci))
    row["b_se"] = res.ball_ci.se if res.ball_ci is not None else None
    return row


def _grid_models(base, cfg):
    sweep = cfg.param("sweep")
    return [(float(v), replace(base, **{sweep: float(v)})) for v in cfg.param("grid")]


# -- experiments -----------------------------------------------------------


def run_example1(cfg: ExperimentConfig) -> ResultTable:
    """Scalar output ``alpha X1 + X2``: ball and CVM estimates against the closed forms."""
    fixed_b = cfg.param("b")
    base = Example1(alpha=cfg.param("alpha", 1.0), p=cfg.param("p", 0.5), b=fixed_b)
    sweep = cfg.param("sweep")
    rows = []
    models = []
    for g, value in enumerate(cfg.param("grid")):
        changes = {sweep: value}
        if fixed_b is None:
            changes["b"] = None
        model = replace(base, **changes)
        if not 0.0 <= model.p <= 1.0 or model.b <= 0:
            raise ConfigError(f"example1 needs p in [0, 1] and b > 0 (p={model.p}, b={model.b})")
        models.append(model)
        truth = closed_form_example1(model.p, model.alpha, model.b)
        for i, nu in enumerate(cfg.nu):
            res = estimate_point(model, nu, cfg, (g, i), with_cvm=True)
            row = _point_row(cfg, res)
            row.pop("b_se")
            row.pop("b_ci_lower")
            row.pop("b_ci_upper")
            row.update(
                p=model.p,
                alpha=model.alpha,
                b=model.b,
                nu=format_nu(nu),
                c_hat=res.cvm,
                c_degenerate=res.cvm_degenerate,
                ci_lower=res.ball_ci.lower if res.ball_ci else None,
                ci_upper=res.ball_ci.upper if res.ball_ci else None,
            )
            # closed forms are for the first input
            if tuple(nu) == (1,):
                row.update(b_true=truth.B1, c_true=truth.C1)
            rows.append(row)
    reps = cfg.param("msd_replicates", 0)
    if reps:
        rows.append(_example1_msd_row(cfg, models, reps))
    return ResultTable("example1", COLUMNS["example1"], rows)


def _example1_msd_row(cfg, models, reps) -> dict:
    """MSD of both indices for the first input, averaged over the grid."""
    started = time.perf_counter()
    msd_b, msd_c, dropped = [], [], 0
    sub = cfg if cfg.bootstrap == 0 else replace(cfg, bootstrap=0)
    for g, model in enumerate(models):
        truth = closed_form_example1(model.p, model.alpha, model.b)
        eb, ec = [], []
        for r in range(reps):
            res = estimate_point(model, (1,), sub, (g, len(cfg.nu), r), with_cvm=True)
            dropped += res.ball.n_dropped
            eb.append(res.ball.b_hat)
            ec.append(res.cvm)
        msd_b.append(msd_from_values(eb, truth.B1)[0])
        msd_c.append(msd_from_values(ec, truth.C1)[0])
    row = _meta(cfg, "msd", dropped, time.perf_counter() - started)
    mb, mc = float(np.mean(msd_b)), float(np.mean(msd_c))
    row.update(nu="1", replicates=reps, msd_b=mb, msd_c=mc, rmsd_b=math.sqrt(mb), rmsd_c=math.sqrt(mc))
    return row


def run_example2(cfg: ExperimentConfig) -> ResultTable:
    """Direction of a bivariate normal on the circle: ball and quadrant-CVM indices."""
    base = Example2(
        mu1=cfg.param("mu1", 0.0),
        mu2=cfg.param("mu2", 0.0),
        sigma1sq=cfg.param("sigma1sq", 1.0),
        sigma2sq=cfg.param("sigma2sq", 1.0),
    )
    rows = []
    for g, (_, model) in enumerate(_grid_models(base, cfg)):
        for i, nu in enumerate(cfg.nu):
            res = estimate_point(model, nu, cfg, (g, i), with_cvm=True, cvm_ci=True)
            row = _point_row(cfg, res)
            row.update(
                mu1=model.mu1,
                mu2=model.mu2,
                sigma1sq=model.sigma1sq,
                sigma2sq=model.sigma2sq,
                nu=format_nu(nu),
                c_hat=res.cvm,
                c_degenerate=res.cvm_degenerate,
            )
            row.update(_ci_cells(res.cvm_ci, "c_"))
            rows.append(row)
    return ResultTable("example2", COLUMNS["example2"], rows)


def run_example3(cfg: ExperimentConfig) -> ResultTable:
    """Gamma inputs mapped onto the surface ``xyz = 1``."""
    base = Example3(mu1=cfg.param("mu1", 1.0))
    rows = []
    for g, (_, model) in enumerate(_grid_models(base, cfg)):
        if model.mu1 <= 0:
            raise ConfigError("example3 needs mu1 > 0")
        for i, nu in enumerate(cfg.nu):
            res = estimate_point(model, nu, cfg, (g, i), with_cvm=True)
            row = _point_row(cfg, res)
            row.update(
                mu1=model.mu1,
                nu=format_nu(nu),
                c_hat=res.cvm,
                c_degenerate=res.cvm_degenerate,
                max_constraint_error=res.max_constraint_error,
            )
            rows.append(row)
    return ResultTable("example3", COLUMNS["example3"], rows)


def run_stiffness(cfg: ExperimentConfig) -> ResultTable:
    """Random isotropic stiffness matrices; one row per (case, lambda_mu, lambda_k, nu).

    Input 1 is the shear modulus ``mu``, input 2 the bulk modulus ``K``.
    """
    rows = []
    g = 0
    for case in cfg.param("cases"):
        for lam_mu in cfg.param("lambda_mu"):
            for lam_k in cfg.param("lambda_k"):
                model = Stiffness(case=case, lambda_k=lam_k, lambda_mu=lam_mu)
                for i, nu in enumerate(cfg.nu):
                    res = estimate_point(model, nu, cfg, (g, i))
                    row = _point_row(cfg, res)
                    row.update(case=case, lambda_mu=lam_mu, lambda_k=lam_k, nu=format_nu(nu))
                    rows.append(row)
                g += 1
    return ResultTable("stiffness", COLUMNS["stiffness"], rows)


# -- custom models ---------------------------------------------------------

_LAW = re.compile(r"^\s*(\w+)\s*\(([^)]*)\)\s*$")
_LAWS = {"uniform": Uniform, "normal": Normal, "gamma": Gamma, "bernoulli": Bernoulli}


def parse_manifold(text: str) -> Manifold:
    """``realline``, ``circle``, ``sphere:D``, ``logsurface``, ``euclid:P`` or ``spd:M``."""
    name, _, arg = text.strip().lower().partition(":")
    try:
        if name == "realline":
            return RealLine()
        if name == "circle":
            return Sphere(d=2)
        if name == "sphere":
            return Sphere(d=int(arg or 2))
        if name == "logsurface":
            return LogSurface()
        if name == "euclid":
            return Euclid(p=int(arg))
        if name == "spd":
            return SpdAffine(m=int(arg))
    except ValueError as exc:
        raise ConfigError(f"bad manifold {text!r}: {exc}") from exc
    raise ConfigError(f"unknown manifold {text!r}")


def parse_inputs(text: str) -> DistributionSpec:
    """Semicolon-separated laws such as ``uniform(0, 1); normal(0, 1)``."""
    laws = []
    for part in text.split(";"):
        if not part.strip():
            continue
        m = _LAW.match(part)
        if not m or m.group(1).lower() not in _LAWS:
            raise ConfigError(f"cannot read input law {part.strip()!r}; known: {', '.join(_LAWS)}")
        try:
            args = [float(a) for a in m.group(2).split(",") if a.strip()]
            laws.append(_LAWS[m.group(1).lower()](*args))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad parameters in {part.strip()!r}: {exc}") from exc
    if not laws:
        raise ConfigError("inputs must list at least one law")
    return DistributionSpec(laws)


def resolve_hook(spec: str):
    """Import ``package.module:function``."""
    module, _, attr = spec.strip().partition(":")
    if not module or not attr:
        raise ConfigError(f"hook must look like module:function, got {spec!r}")
    try:
        fn = getattr(importlib.import_module(module), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot import {spec!r}: {exc}") from exc
    if not callable(fn):
        raise ConfigError(f"{spec!r} is not callable")
    return fn


def build_custom_model(cfg: ExperimentConfig) -> CustomModel:
    validity = cfg.param("validity")
    return CustomModel(
        dist=parse_inputs(cfg.param("inputs")),
        manifold=parse_manifold(cfg.param("manifold")),
        hook=resolve_hook(cfg.param("hook")),
        validity=resolve_hook(validity) if validity else None,
    )


def run_custom(cfg: ExperimentConfig) -> ResultTable:
    """Single estimate per index set for a user-supplied model."""
    model = build_custom_model(cfg)
    rows = []
    for i, nu in enumerate(cfg.nu):
        res = estimate_point(model, nu, cfg, (0, i))
        row = _point_row(cfg, res)
        row.update(nu=format_nu(nu), s_hat=res.ball.s_hat, d_hat=res.ball.d_hat)
        rows.append(row)
    return ResultTable("custom", COLUMNS["custom"], rows)


RUNNERS = {
    "example1": run_example1,
    "example2": run_example2,
    "example3": run_example3,
    "stiffness": run_stiffness,
    "custom": run_custom,
}


def run(cfg: ExperimentConfig) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg)

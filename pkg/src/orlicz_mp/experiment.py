"""Config-driven experiments: hypothesis checks, lambda sweeps, norm queries.

A config is a TOML file with dotted keys::

    profile = "T1"
    seed = 7
    output_dir = "out"
    phi.name = "power"
    phi.p = 4
    f.name = "pq"
    f.p = 3
    f.q = 2
    mesh.dim = 1
    mesh.extent = [0.0, 1.0]
    mesh.resolution = 64
    lambdas.values = [0.5, 1, 2, 4]
    lambdas.relative = true        # values are multiples of the witness threshold
    tolerances.residual = 1e-8

``lambdas.min``/``lambdas.max``/``lambdas.count`` give an evenly spaced grid
instead of ``lambdas.values``.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .discretization import DiscreteFunction, Mesh, make_mesh
from .errors import ConfigParse, LambdaTooSmall, UnknownModel
from .modular import luxemburg_norm, modular, verify_modular_poincare
from .nfunction import CATALOG_NAMES, NFunction, catalog
from .nonlinearity import MODEL_NAMES, HypothesisReport, Nonlinearity, check_hypotheses, model_f
from .solver import Tolerances, Witness, lambda_star, solve_two

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ExperimentConfig",
    "RowResult",
    "SUMMARY_HEADER",
    "load_config",
    "parse_config",
    "build",
    "check",
    "run",
    "norms",
]

SUMMARY_HEADER = (
    "row", "lambda", "lambda_rel", "lambda_star", "status",
    "I_u1", "c", "I_u2", "ordering_ok", "residual_u1", "residual_u2",
)
_TOP_KEYS = {"profile", "seed", "output_dir", "workers", "phi", "f", "mesh", "lambdas", "tolerances"}


@dataclass(frozen=True)
class ExperimentConfig:
    phi_name: str
    phi_params: dict
    f_name: str
    f_params: dict
    dim: int
    extent: tuple
    resolution: tuple
    lambdas: Tuple[float, ...]
    relative: bool = False
    profile: str = "T1"
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    output_dir: str = "out"
    workers: int = 1


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParse(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigParse(f"{path}: cannot read config ({exc.strerror})") from exc
    cfg = parse_config(data, source=str(path))
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        cfg = replace(cfg, output_dir=str(path.parent / out))
    return cfg


def _table(data: dict, key: str, source: str) -> dict:
    val = data.get(key, {})
    if not isinstance(val, dict):
        raise ConfigParse(f"{source}: key '{key}' must be a table of dotted keys")
    return dict(val)


def parse_config(data: dict, source: str = "<config>") -> ExperimentConfig:
    """Validate a parsed TOML mapping; errors name the offending key."""
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ConfigParse(f"{source}: unknown key(s) {', '.join(unknown)}")
    phi = _table(data, "phi", source)
    f = _table(data, "f", source)
    mesh = _table(data, "mesh", source)
    lam = _table(data, "lambdas", source)
    tols = _table(data, "tolerances", source)

    phi_name = phi.pop("name", None)
    if phi_name not in CATALOG_NAMES:
        raise ConfigParse(f"{source}: phi.name = {phi_name!r} is not one of {', '.join(CATALOG_NAMES)}")
    f_name = f.pop("name", None)
    if f_name not in MODEL_NAMES:
        raise ConfigParse(f"{source}: f.name = {f_name!r} is not one of {', '.join(MODEL_NAMES)}")

    dim = mesh.get("dim", 1)
    if dim not in (1, 2):
        raise ConfigParse(f"{source}: mesh.dim must be 1 or 2, got {dim!r}")
    extent = mesh.get("extent", [0.0, 1.0] if dim == 1 else [[0.0, 1.0], [0.0, 1.0]])
    try:
        extent = tuple(float(v) for v in np.asarray(extent, dtype=float).ravel())
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"{source}: mesh.extent is not numeric") from exc
    if len(extent) != 2 * dim:
        raise ConfigParse(f"{source}: mesh.extent needs {2 * dim} numbers for dim = {dim}")
    res = mesh.get("resolution", 32)
    res = tuple(int(r) for r in (res if isinstance(res, list) else [res] * dim))
    if len(res) != dim or min(res) < 4:
        raise ConfigParse(f"{source}: mesh.resolution must be >= 4 per axis, got {res}")

    if "values" in lam:
        values = lam["values"]
        if not isinstance(values, list):
            raise ConfigParse(f"{source}: lambdas.values must be a list")
    elif {"min", "max", "count"} <= set(lam):
        values = list(np.linspace(float(lam["min"]), float(lam["max"]), int(lam["count"])))
    else:
        values = []
    try:
        values = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"{source}: lambdas must be numbers") from exc
    if not values:
        raise ConfigParse(f"{source}: lambdas is empty (give lambdas.values or lambdas.min/max/count)")
    if min(values) <= 0:
        raise ConfigParse(f"{source}: lambdas must be positive")

    profile = data.get("profile", "T1")
    if profile not in ("T1", "T2"):
        raise ConfigParse(f"{source}: profile must be 'T1' or 'T2', got {profile!r}")
    fields = set(Tolerances.__dataclass_fields__)
    bad = sorted(set(tols) - fields)
    if bad:
        raise ConfigParse(f"{source}: unknown tolerances.{bad[0]} (known: {', '.join(sorted(fields))})")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigParse(f"{source}: seed must be an integer")
    return ExperimentConfig(
        phi_name=phi_name, phi_params=phi, f_name=f_name, f_params=f,
        dim=dim, extent=extent, resolution=res, lambdas=values,
        relative=bool(lam.get("relative", False)), profile=profile,
        tolerances=Tolerances(**tols), seed=seed,
        output_dir=str(data.get("output_dir", "out")), workers=int(data.get("workers", 1)),
    )


def build(cfg: ExperimentConfig) -> Tuple[NFunction, Nonlinearity, Mesh]:
    try:
        phi = catalog(cfg.phi_name, cfg.phi_params)
        f = model_f(cfg.f_name, cfg.f_params, phi=phi)
    except (UnknownModel, ValueError) as exc:
        raise ConfigParse(str(exc)) from exc
    mesh = make_mesh(cfg.dim, cfg.extent, cfg.resolution)
    return phi, f, mesh


def check(cfg: ExperimentConfig) -> HypothesisReport:
    phi, f, mesh = build(cfg)
    return check_hypotheses(f, phi, cfg.profile, N_dim=cfg.dim, mesh=mesh)


@dataclass
class RowResult:
    row: int
    lam: float
    lam_rel: float
    lambda_star: float
    status: str
    I_u1: float = math.nan
    c: float = math.nan
    I_u2: float = math.nan
    ordering_ok: Optional[bool] = None
    residuals: Tuple[float, float] = (math.nan, math.nan)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("two_solutions", "lambda_too_small")

    def summary_row(self) -> list:
        def num(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))

        return [self.row, num(self.lam), num(self.lam_rel), num(self.lambda_star), self.status,
                num(self.I_u1), num(self.c), num(self.I_u2),
                "" if self.ordering_ok is None else str(self.ordering_ok).lower(),
                num(self.residuals[0]), num(self.residuals[1])]


def _row_seeds(seed: int, n: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _solve_row(args) -> RowResult:
    cfg, i, lam, lam_rel, seed = args
    phi, f, mesh = build(cfg)
    out = Path(cfg.output_dir)
    wit = lambda_star(phi, f, mesh)
    row = RowResult(i, lam, lam_rel, wit.lambda_star, "error")
    try:
        rep = solve_two(phi, f, mesh, lam, cfg.profile, cfg.tolerances, seed=seed, witness=wit)
    except LambdaTooSmall as exc:
        rep = exc.report
        row.status, row.message = "lambda_too_small", str(exc)
    except Exception as exc:  # batch isolation: any row failure is recorded, never raised
        row.status, row.message = f"error:{type(exc).__name__}", str(exc)
        (out / f"report_{i:03d}.json").write_text(json.dumps(
            {"lambda": lam, "lambda_star": wit.lambda_star, "status": row.status, "error": str(exc)}, indent=2))
        return row
    else:
        row.status = rep.status
        row.message = "; ".join(rep.failures)
    row.I_u1 = rep.I_u1
    if rep.c is not None:
        row.c, row.I_u2 = rep.c, rep.I_u2
    row.ordering_ok = rep.ordering_ok
    row.residuals = tuple(rep.residual_norms)
    rep.write(out / f"report_{i:03d}.json")
    rep.write_profiles(out / f"profile_{i:03d}.csv")
    return row


def run(cfg: ExperimentConfig, workers: Optional[int] = None, log=None) -> Tuple[int, List[RowResult]]:
    """Solve every lambda row and write reports, profiles and a summary.

    Returns ``(exit_status, rows)``; the status is 0 iff every row produced
    two solutions or was classified as below the witness threshold.
    """
    workers = cfg.workers if workers is None else workers
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    phi, f, mesh = build(cfg)
    hyp = check_hypotheses(f, phi, cfg.profile, N_dim=cfg.dim, mesh=mesh)
    (out / "hypothesis.json").write_text(json.dumps(hyp.as_dict(), indent=2, default=_plain))
    rows: List[RowResult] = []
    if not hyp.holds:
        msg = "; ".join(hyp.reasons)
        rows = [RowResult(i, v, math.nan, math.nan, "error:HypothesisFailed", message=msg)
                for i, v in enumerate(cfg.lambdas)]
    else:
        wit: Witness = lambda_star(phi, f, mesh)
        lam_abs = [v * wit.lambda_star if cfg.relative else v for v in cfg.lambdas]
        lam_rel = [v if cfg.relative else v / wit.lambda_star for v in cfg.lambdas]
        seeds = _row_seeds(cfg.seed, len(lam_abs))
        jobs = [(cfg, i, lam_abs[i], lam_rel[i], seeds[i]) for i in range(len(lam_abs))]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_solve_row, jobs))
        else:
            rows = [_solve_row(j) for j in jobs]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow(r.summary_row())
    if log is not None:
        for r in rows:
            if r.message:
                log(f"row {r.row} (lambda = {r.lam:.6g}): {r.status}: {r.message}")
    return (0 if rows and all(r.ok for r in rows) else 1), rows


def _plain(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


_EXPR_NAMES = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "log1p", "sqrt", "abs", "minimum", "maximum",
    "sinh", "cosh", "tanh", "arcsinh", "pi", "where", "clip")}


def norms(cfg: ExperimentConfig, expr: str) -> dict:
    """Modulars and Luxemburg norms of a closed-form function on the config mesh.

    ``expr`` is a numpy expression in ``x`` (and ``y`` in 2D).
    """
    phi, _, mesh = build(cfg)
    names = dict(_EXPR_NAMES)
    names["x"] = mesh.nodes[:, 0]
    if mesh.dim == 2:
        names["y"] = mesh.nodes[:, 1]
    try:
        vals = eval(compile(expr, "<function-expr>", "eval"), {"__builtins__": {}}, names)
    except Exception as exc:
        raise ConfigParse(f"cannot evaluate {expr!r}: {exc}") from exc
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (mesh.n_nodes,)).copy()
    trace = float(np.max(np.abs(vals[mesh.boundary_nodes])))
    u = DiscreteFunction(mesh, vals)
    result = {
        "expr": expr,
        "phi": cfg.phi_name,
        "modular_u": modular(phi, u).value,
        "modular_grad_u": modular(phi, u, of_gradient=True).value,
        "luxemburg_u": luxemburg_norm(phi, u).value,
        "luxemburg_grad_u": luxemburg_norm(phi, u, of_gradient=True).value,
        "max_abs_boundary": trace,
    }
    if trace < 1e-12:
        vals[mesh.boundary_nodes] = 0.0
        chk = verify_modular_poincare(phi, DiscreteFunction(mesh, vals))
        result["poincare"] = {"lhs": chk.lhs, "rhs": chk.rhs, "holds": chk.holds}
    return result

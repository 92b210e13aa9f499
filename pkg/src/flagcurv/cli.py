"""Command-line driver: validate, curvature, navigation-check, verify-fp."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import construction
from .errors import (
    AlgebraError,
    DegenerateFlagError,
    FlagcurvError,
    InputError,
    InvalidDatumError,
)
from .invariant_metric import InvariantMetric, flag_curvatures, navigation_correspondence_residual
from .lie_algebra import InvalidAlgebra, load
from .minkowski import QuadraticNorm, RandersNorm

SCHEMA_VERSION = 1
log = logging.getLogger("flagcurv")


@dataclass
class RunConfig:
    command: str
    algebra: str
    epsilon: float | None = 0.1
    r0: float = 0.3
    seed: int = 0
    n_planes: int = 1000
    pole_resolution: int = 64
    tol: float = 1e-3
    out: str | None = None
    fmt: str = "json"
    delta: float | None = None
    charts: int = 64
    metric: str = "biinvariant"
    wind: str | None = None
    flags: int = 100

    def check(self):
        if self.epsilon is not None and self.epsilon < 0:
            raise InputError("--epsilon must be >= 0")
        if self.n_planes < 1:
            raise InputError("--planes must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InputError("--seed must fit in 64 bits")
        if self.delta is not None and self.delta <= 0:
            raise InputError("--delta must be positive")


# -- report plumbing ---------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def render_json(report):
    body = dict(report)
    body["schema_version"] = SCHEMA_VERSION
    return json.dumps(_clean(body), sort_keys=True, indent=2) + "\n"


def render_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, (list, tuple, np.ndarray)):
        return " ".join(repr(float(v)) for v in x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def emit(cfg, text):
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def parse_vector(text, dim):
    try:
        vec = np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise InputError(f"cannot parse vector {text!r}") from exc
    if vec.shape != (dim,):
        raise InputError(f"vector {text!r} needs {dim} components")
    return vec


def default_wind(alg, strength=0.1):
    """strength * e3 (tilted towards the center direction when there is one)."""
    base = alg.basis("e3") if "e3" in alg.labels else np.eye(alg.dim)[-1]
    if alg.center().shape[1] == 1 and alg.dim > 1:
        u0 = alg.center_unit()
        if abs(alg.ip(alg.normalize(base), u0)) < 1 - 1e-12:
            base = alg.normalize(base) + u0
    return strength * alg.normalize(base)


def _wind(cfg, alg):
    strength = 0.1 if cfg.epsilon is None else cfg.epsilon
    return default_wind(alg, strength) if cfg.wind is None else parse_vector(cfg.wind, alg.dim)


# -- commands --------------------------------------------------------------------


def cmd_validate(cfg):
    try:
        alg = load(cfg.algebra)
        report = alg.validate()
    except InvalidAlgebra as exc:
        report = exc.report
        alg = None
    body = {
        "command": "validate",
        "algebra": cfg.algebra,
        "dim": None if alg is None else alg.dim,
        "validation": report.to_dict(),
        "max_violation": max(report.antisymmetry, report.jacobi, report.inner_product_symmetry,
                             report.ad_invariance),
    }
    emit(cfg, render_json(body))
    return 0 if report.passed else 1


def _curvature_rows(cfg, alg):
    rng = np.random.default_rng(cfg.seed)
    flags = [rng.standard_normal((2, alg.dim)) for _ in range(cfg.flags)]
    if cfg.metric == "biinvariant":
        groups = {None: (InvariantMetric(alg, QuadraticNorm(alg.inner_product)), list(range(len(flags))))}
        tags = ["biinvariant"] * len(flags)
    elif cfg.metric == "navigation":
        groups = {None: (InvariantMetric(alg, RandersNorm(alg.inner_product, _wind(cfg, alg))),
                         list(range(len(flags))))}
        tags = ["navigation"] * len(flags)
    elif cfg.metric == "glued":
        stages = construction.run_pipeline(alg, cfg.epsilon or 0.0, cfg.r0, cfg.charts, cfg.seed, cfg.delta,
                                           convexity_samples=0)
        bundle = stages["bundle"]
        ys = np.array([f[0] for f in flags]).reshape(-1, alg.dim)
        region = bundle.partition.region_of(bundle.partition.unit(ys)) if flags else np.array([], int)
        groups, tags = {}, []
        for i, r in enumerate(region):
            if r < 0:
                tags.append("blend")
                continue
            chart = bundle.partition.regions[r].chart
            tags.append(f"region {r}")
            if chart not in groups:
                groups[chart] = (bundle.component_metric(chart), [])
            groups[chart][1].append(i)
    else:
        raise InputError(f"unknown metric {cfg.metric!r}")
    k = np.full(len(flags), np.nan)
    for metric, ids in groups.values():
        for i in ids:
            try:
                k[i] = flag_curvatures(metric, flags[i][0], flags[i][1])[0]
            except DegenerateFlagError:
                tags[i] = "degenerate"
    return [(f[0], f[1], k[i], tags[i]) for i, f in enumerate(flags)]


def cmd_curvature(cfg):
    alg = load(cfg.algebra)
    rows = _curvature_rows(cfg, alg)
    if cfg.fmt == "csv":
        emit(cfg, render_csv(["y", "v", "K", "status"], rows))
    else:
        ks = [r[2] for r in rows if math.isfinite(r[2])]
        emit(cfg, render_json({
            "command": "curvature",
            "algebra": cfg.algebra,
            "metric": cfg.metric,
            "seed": cfg.seed,
            "flags": [{"y": y, "v": v, "K": k, "status": s} for y, v, k, s in rows],
            "min_K": min(ks, default=float("nan")),
            "max_K": max(ks, default=float("nan")),
        }))
    return 0


def cmd_navigation_check(cfg):
    alg = load(cfg.algebra)
    wind = _wind(cfg, alg)
    metric = InvariantMetric(alg, QuadraticNorm(alg.inner_product))
    residual = navigation_correspondence_residual(metric, wind, cfg.flags, cfg.seed)
    passed = residual <= cfg.tol
    emit(cfg, render_json({
        "command": "navigation-check",
        "algebra": cfg.algebra,
        "wind": wind,
        "n_samples": cfg.flags,
        "seed": cfg.seed,
        "residual": residual,
        "tol": cfg.tol,
        "passed": passed,
    }))
    return 0 if passed else 1


def cmd_verify_fp(cfg):
    body = {"command": "verify-fp", "algebra": cfg.algebra, "seed": cfg.seed, "epsilon": cfg.epsilon}
    stage = "load"
    try:
        alg = load(cfg.algebra)
        stages = construction.run_pipeline(
            alg, cfg.epsilon, cfg.r0, cfg.charts, cfg.seed, cfg.delta,
            n_planes=cfg.n_planes, pole_resolution=cfg.pole_resolution, verify=True, progress=body,
        )
    except FlagcurvError as exc:
        stage = body.get("stage", stage)
        body.update(error={"stage": stage, "type": type(exc).__name__, "message": str(exc)})
        emit(cfg, render_json(body))
        log.error("verify-fp failed at stage %s: %s", stage, exc)
        return 1
    report = stages["report"]
    if cfg.fmt == "csv":
        emit(cfg, render_csv(["plane", "theta", "K"], report.csv_rows()))
    else:
        emit(cfg, render_json(body))
    passed = report.passed and body["convexity"]["passed"]
    if not passed:
        log.error("verify-fp did not certify: %s", "convexity" if report.passed else "flag curvature")
    return 0 if passed else 1


COMMANDS = {
    "validate": cmd_validate,
    "curvature": cmd_curvature,
    "navigation-check": cmd_navigation_check,
    "verify-fp": cmd_verify_fp,
}


def _epsilon(text):
    return None if text == "auto" else float(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="flagcurv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--algebra", required=True, help="built-in name or JSON path")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("validate", parents=[common], help="check bracket and inner product axioms")

    p = sub.add_parser("curvature", parents=[common], help="flag curvatures on seeded flags")
    p.add_argument("--metric", choices=("biinvariant", "navigation", "glued"), default="biinvariant")
    p.add_argument("--wind", help="comma-separated wind for --metric navigation (default epsilon * e3)")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--r0", type=float, default=0.3)
    p.add_argument("--delta", type=float)
    p.add_argument("--flags", type=int, default=100)

    p = sub.add_parser("navigation-check", parents=[common], help="navigation curvature correspondence")
    p.add_argument("--wind", help="comma-separated Killing wind (default 0.1 e3)")
    p.add_argument("--flags", type=int, default=100, help="number of flag pairs")
    p.add_argument("--tol", type=float, default=1e-3)

    p = sub.add_parser("verify-fp", parents=[common], help="build the glued metric and certify positivity")
    p.add_argument("--epsilon", type=_epsilon, default=0.1, help="wind scale, or 'auto' to search")
    p.add_argument("--r0", type=float, default=0.3)
    p.add_argument("--delta", type=float, help="override the selected margin")
    p.add_argument("--planes", dest="n_planes", type=int, default=1000)
    p.add_argument("--poles", dest="pole_resolution", type=int, default=64)
    p.add_argument("--charts", type=int, default=64, help="target chart count")
    p.add_argument("--tol", type=float, default=1e-3)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    cfg = RunConfig(**fields)
    try:
        cfg.check()
        return COMMANDS[cfg.command](cfg)
    except (AlgebraError, InputError, InvalidDatumError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: run check suites, print curvature quantities,
run the isotropy audit, and list the built-in metrics.

Subcommands:

    zoo         list built-in metric families and their parameters
    curvature   print the coordinate tensors at one flag point
    check       run the four identity checks over sampled fibre points
    audit       run the isotropy audit plus the weak-isotropy test

Exit codes: 0 on success, 1 when a check fails or the audit reports a
VIOLATION, 2 on usage or input errors.  Reports are JSON (optionally
flattened to CSV) and byte-identical for identical configurations; the
sampling generator is numpy's seeded PCG64.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .checks import (
    DEFAULT_TOLERANCES,
    run_identity_suite,
    sample_base_points,
    schur_audit,
    weak_isotropy_check,
)
from .core import (
    FlagPoint,
    MetricDefinitionError,
    MetricModel,
    NonPositiveDefiniteError,
    NonPositiveMetricError,
    UnsupportedDimensionError,
    VolumeFormError,
    coordinate_tensors,
)
from .expr import ExprError
from .indicatrix import FibreChart, direction_chart, restrict_fields
from .volume import QuadratureError
from .zoo import RandersConditionViolated, build, entries, zoo_ids

SCHEMA_VERSION = "1"

_TOL_FLAGS = {
    "eq-2.1": "tol_eq_2_1",
    "eq-2.2": "tol_eq_2_2",
    "eq-1.11": "tol_eq_1_11",
    "eq-1.12": "tol_eq_1_12",
    "thm-1": "tol_thm_1",
}


class InputError(Exception):
    """A configuration problem; printed with the offending field, exit 2."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _parse_floats(text: str, field: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InputError(field, f"expected comma-separated numbers, got {text!r}") from None


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise InputError("params", f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finslerlab",
        description="curvature quantities and identity checks for Finsler metrics",
    )
    parser.add_argument("--version", action="version", version=f"finslerlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_metric_flags(p):
        p.add_argument("--metric", help="built-in metric id (see the zoo subcommand)")
        p.add_argument("--metric-expr", help="expression for F over x1..xn, y1..yn")
        p.add_argument("--dim", type=int, help="dimension n >= 2")
        p.add_argument(
            "--volume",
            help="volume form: lebesgue | bh | auto | expr:<sigma(x)> (default per metric)",
        )
        p.add_argument(
            "--params",
            nargs="*",
            metavar="K=V",
            help="metric parameters, e.g. eps=0.2 a_diag=1,4",
        )
        p.add_argument("--config", help="JSON file with the same fields; flags override")
        p.add_argument("--out", help="write the report to this path instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), help="report format (default json)")

    p_zoo = sub.add_parser("zoo", help="list built-in metric families")
    p_zoo.add_argument("--out", help="write the listing to this path instead of stdout")

    p_curv = sub.add_parser("curvature", help="print curvature quantities at a flag point")
    add_metric_flags(p_curv)
    p_curv.add_argument("--x", help="base point, comma separated")
    p_curv.add_argument("--y", help="flag direction, comma separated")

    p_check = sub.add_parser("check", help="run the identity checks")
    add_metric_flags(p_check)
    p_check.add_argument("--samples", type=int, help="fibre samples per base point (default 50)")
    p_check.add_argument("--base-points", type=int, help="number of base points (default 5)")
    p_check.add_argument("--seed", type=int, help="sampling seed (default 0)")
    for tag, dest in _TOL_FLAGS.items():
        p_check.add_argument(f"--tol-{tag}", dest=dest, type=float, help=f"tolerance for {tag}")

    p_audit = sub.add_parser("audit", help="run the isotropy audit")
    add_metric_flags(p_audit)
    p_audit.add_argument("--samples", type=int, help="fibre samples per base point (default 40)")
    p_audit.add_argument("--base-points", type=int, help="number of base points (default 5)")
    p_audit.add_argument("--seed", type=int, help="sampling seed (default 0)")
    p_audit.add_argument("--tol-thm-1", dest="tol_thm_1", type=float, help="audit tolerance")

    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    """File config first, flags override; returns a plain dict."""
    merged: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path) as handle:
                merged.update(json.load(handle))
        except OSError as err:
            raise InputError("config", f"cannot read {config_path!r}: {err}") from None
        except json.JSONDecodeError as err:
            raise InputError("config", f"invalid JSON in {config_path!r}: {err}") from None
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        merged[key] = value
    return merged


def _resolve_model(config: dict) -> MetricModel:
    metric_id = config.get("metric")
    expr_text = config.get("metric_expr")
    if bool(metric_id) == bool(expr_text):
        raise InputError("metric", "exactly one of --metric or --metric-expr is required")
    dim = config.get("dim")
    if dim is None:
        raise InputError("dim", "the dimension is required")
    if int(dim) < 2:
        raise InputError("dim", f"dimension must be at least 2, got {dim}")
    params = config.get("params")
    if isinstance(params, (list, tuple)):
        params = _parse_params(params)
    elif params is None:
        params = {}
    config["params"] = params
    volume = config.get("volume")
    try:
        if metric_id:
            return build(metric_id, int(dim), params, volume)
        numeric_params = {k: float(v) for k, v in params.items()}
        return MetricModel(
            int(dim),
            expr_text,
            params=numeric_params,
            volume=volume or "lebesgue",
            metric_id="expr",
        )
    except KeyError as err:
        raise InputError("metric", str(err.args[0])) from None
    except (MetricDefinitionError, VolumeFormError, RandersConditionViolated, ExprError, ValueError) as err:
        raise InputError("metric", str(err)) from None


def _tolerances_from(config: dict) -> dict:
    out = {}
    for tag, dest in _TOL_FLAGS.items():
        value = config.get(dest)
        if value is not None:
            out[tag] = float(value)
    return out


def _echo_config(config: dict, model: MetricModel, extra: dict) -> dict:
    echo = {
        "metric": config.get("metric") or "expr",
        "metric_expr": config.get("metric_expr"),
        "dim": model.dim,
        "volume": model.volume.kind,
        "params": {k: str(v) for k, v in sorted((config.get("params") or {}).items())},
        "seed": extra.get("seed"),
        "samples": extra.get("samples"),
        "base_points": extra.get("base_points"),
        "tolerances": extra.get("tolerances"),
        "format": config.get("format", "json"),
    }
    return {k: v for k, v in echo.items() if v is not None}


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(document: dict, out_path: str | None) -> None:
    _emit(json.dumps(document, sort_keys=True, indent=2) + "\n", out_path)


# -- subcommands -----------------------------------------------------------------


def _cmd_zoo(args) -> int:
    lines = [f"built-in metrics ({len(entries())}):", ""]
    for entry in entries():
        lines.append(f"{entry.id}  ({entry.dims})")
        lines.append(f"    {entry.summary}")
        for name, doc in entry.params_schema.items():
            lines.append(f"    param {name}: {doc}")
        if entry.notes:
            lines.append(f"    note: {entry.notes}")
        lines.append("")
    _emit("\n".join(lines), getattr(args, "out", None))
    return 0


def _cmd_curvature(args) -> int:
    config = _merge_config(args)
    model = _resolve_model(config)
    if "x" not in config or "y" not in config:
        raise InputError("x/y", "both --x and --y are required")
    x = _parse_floats(config["x"], "x")
    y = _parse_floats(config["y"], "y")
    if len(x) != model.dim or len(y) != model.dim:
        raise InputError("x/y", f"need {model.dim} components each")
    if not any(v != 0.0 for v in y):
        raise InputError("y", "y must be nonzero")
    if np.linalg.norm(x) >= model.x_max_norm:
        raise InputError("x", f"|x| must be < {model.x_max_norm} for this metric")
    point = FlagPoint(np.asarray(x), np.asarray(y))
    tensors = coordinate_tensors(model, point)
    chart_id, u = direction_chart(point.y)
    rf = restrict_fields(model, FibreChart(model, point.x, chart_id), u)
    document = {
        "schema_version": SCHEMA_VERSION,
        "command": "curvature",
        "config": _echo_config(config, model, {}),
        "x": list(point.x),
        "y": list(point.y),
        "quantities": {
            "F": tensors.f,
            "g": tensors.g.tolist(),
            "cartan": tensors.cartan.tolist(),
            "spray": tensors.spray.tolist(),
            "mean_berwald": tensors.mean_berwald.tolist(),
            "tau": tensors.tau,
            "S": tensors.s,
        },
        "fibre": {
            "chart": chart_id,
            "u": list(u),
            "induced_metric": rf.g.tolist(),
            "berwald_pullback": rf.berwald.tolist(),
            "e": rf.e,
        },
    }
    _emit_json(document, config.get("out"))
    return 0


def _cmd_check(args) -> int:
    config = _merge_config(args)
    model = _resolve_model(config)
    seed = int(config.get("seed", 0))
    samples = int(config.get("samples", 50))
    base_points = int(config.get("base_points", 5))
    if samples < 1 or base_points < 1:
        raise InputError("samples", "sample counts must be positive")
    tolerances = _tolerances_from(config)
    reports = run_identity_suite(model, base_points, samples, seed, tolerances)
    reports.sort(key=lambda r: r.tag)
    effective_tol = dict(DEFAULT_TOLERANCES)
    effective_tol.update(tolerances)
    echo = _echo_config(
        config,
        model,
        {
            "seed": seed,
            "samples": samples,
            "base_points": base_points,
            "tolerances": {tag: effective_tol[tag] for tag in sorted(effective_tol)},
        },
    )
    fmt = config.get("format", "json")
    if fmt == "csv":
        lines = ["tag,base,fibre,residual,tolerance,pass"]
        for report in reports:
            for row in report.points:
                lines.append(
                    f"{report.tag},{row['base']},{row['fibre']},{row['residual']!r},"
                    f"{report.tolerance!r},{str(report.passed).lower()}"
                )
        _emit("\n".join(lines) + "\n", config.get("out"))
    else:
        document = {
            "schema_version": SCHEMA_VERSION,
            "command": "check",
            "config": echo,
            "checks": [report.to_dict() for report in reports],
        }
        _emit_json(document, config.get("out"))
    return 0 if all(report.passed for report in reports) else 1


def _cmd_audit(args) -> int:
    config = _merge_config(args)
    model = _resolve_model(config)
    seed = int(config.get("seed", 0))
    samples = int(config.get("samples", 40))
    base_points = int(config.get("base_points", 5))
    if samples < 1 or base_points < 1:
        raise InputError("samples", "sample counts must be positive")
    tol = config.get("tol_thm_1")
    rng = np.random.default_rng(seed)
    bases = sample_base_points(model, base_points, rng)
    audits = []
    worst = "isotropic-and-constant"
    for index, x in enumerate(bases):
        audit = schur_audit(
            model,
            x,
            fibre_samples=samples,
            seed=seed,
            tol_isotropy=tol,
            tol_constancy=tol,
            rng=rng,
        )
        record = {"base": index, "x": list(x), "schur": audit.to_dict()}
        if audit.verdict == "isotropic-and-constant":
            weak = weak_isotropy_check(model, x, fibre_samples=samples, rng=rng)
            record["weak_isotropy"] = weak.to_dict()
        audits.append(record)
        if audit.verdict == "VIOLATION":
            worst = "VIOLATION"
    echo = _echo_config(
        config,
        model,
        {
            "seed": seed,
            "samples": samples,
            "base_points": base_points,
            "tolerances": {"thm-1": tol if tol is not None else DEFAULT_TOLERANCES["thm-1"]},
        },
    )
    document = {
        "schema_version": SCHEMA_VERSION,
        "command": "audit",
        "config": echo,
        "audits": audits,
    }
    _emit_json(document, config.get("out"))
    return 1 if worst == "VIOLATION" else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "zoo": _cmd_zoo,
        "curvature": _cmd_curvature,
        "check": _cmd_check,
        "audit": _cmd_audit,
    }
    try:
        return handlers[args.command](args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (
        MetricDefinitionError,
        VolumeFormError,
        RandersConditionViolated,
        ExprError,
        NonPositiveMetricError,
        NonPositiveDefiniteError,
        UnsupportedDimensionError,
        QuadratureError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``certify``, ``solve``, ``sweep`` and ``verify-lemmas``.

Problem files are TOML with a ``[problem]`` table (coefficient families,
``F``, ``m``, ``c``) and an optional ``[run]`` table.  Every command echoes the
fully resolved configuration, as TOML, to stderr (or ``--echo-config``);
feeding the echo back reproduces the run.

Exit codes: 0 certified / converged / all properties hold, 1 error,
2 not certified, 3 no convergence.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bvp.criteria import solvability_verdict
from .bvp.model import BVPSpec, FSpec
from .bvp.solver import fixed_point_solve
from .errors import CurvBVPError, InvalidParameterError, NoConvergenceError
from .seq_core import SeqFamily, _NumpyNS, compile_expression
from .suites import SUITES

EXIT_OK, EXIT_ERROR, EXIT_NOT_CERTIFIED, EXIT_NO_CONVERGENCE = 0, 1, 2, 3

RUN_DEFAULTS: dict[str, Any] = {
    "horizon": 400,
    "fp_tol": 1e-10,
    "max_iter": 50,
    "lambda": "auto",
    "precision": "double",
    "seed": 0,
    "check_hi": 100_000,
    "cert_hi": 500,
    "numeric": False,
}
PROBLEM_KEYS = {"name", "m", "c", "a", "b", "F", "exact"}
SWEEP_PARAMS = ("c", "lambda", "horizon")
SWEEP_COLUMNS = ["param", "value", "status", "criterion", "lambda", "iterations",
                 "max_relative_residual", "reason"]


class ConfigError(InvalidParameterError):
    """A problem file is malformed; the message carries line and column when known."""


# -- configuration ---------------------------------------------------------------


def _locate(text: str, key: str) -> str:
    pat = re.compile(rf"(?:^|[\s{{,.\[])({re.escape(key)})\s*(?:=|\])")
    for i, line in enumerate(text.splitlines(), 1):
        mt = pat.search(line.split("#", 1)[0])
        if mt:
            return f" (at line {i}, column {mt.start(1) + 1})"
    return ""


def parse_config(text: str) -> dict[str, Any]:
    """Parse and validate a problem file; returns the resolved configuration.

    Raises:
        ConfigError: on TOML syntax errors, unknown keys, or invalid values.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    unknown = set(raw) - {"problem", "run"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown top-level key {key!r}{_locate(text, key)}")
    if "problem" not in raw:
        raise ConfigError("missing [problem] table")
    prob = dict(raw["problem"])
    for key in sorted(set(prob) - PROBLEM_KEYS):
        raise ConfigError(f"unknown key problem.{key}{_locate(text, key)}")
    for key in ("m", "c", "a", "b", "F"):
        if key not in prob:
            raise ConfigError(f"missing key problem.{key}")
    run = dict(RUN_DEFAULTS)
    for key, val in raw.get("run", {}).items():
        if key not in RUN_DEFAULTS:
            raise ConfigError(f"unknown key run.{key}{_locate(text, key)}")
        run[key] = val
    cfg = {"problem": {"name": prob.get("name", "bvp"), **prob}, "run": run}
    try:
        validate_config(cfg)
    except (CurvBVPError, TypeError, ValueError, KeyError) as exc:
        named = re.search(r"unknown keys[^\[]*\['([^']+)'", str(exc))
        where = _locate(text, named.group(1)) if named else ""
        raise ConfigError(f"invalid configuration: {exc}{where}") from exc
    return cfg


def validate_config(cfg: dict[str, Any]) -> None:
    build_spec(cfg)
    run = cfg["run"]
    if run["precision"] not in ("double", "extended"):
        raise ConfigError("run.precision must be 'double' or 'extended'")
    lam = run["lambda"]
    if not (lam == "auto" or (isinstance(lam, (int, float)) and lam > 0)):
        raise ConfigError("run.lambda must be 'auto' or a positive number")
    for key in ("horizon", "max_iter", "seed", "check_hi", "cert_hi"):
        if not isinstance(run[key], int) or isinstance(run[key], bool):
            raise ConfigError(f"run.{key} must be an integer")
    if "exact" in cfg["problem"]:
        compile_expression(str(cfg["problem"]["exact"]))


def build_spec(cfg: dict[str, Any]) -> BVPSpec:
    prob = cfg["problem"]
    return BVPSpec.from_families(
        SeqFamily.from_dict(prob["a"]),
        SeqFamily.from_dict(prob["b"]),
        FSpec.from_dict(prob["F"]),
        int(prob["m"]),
        float(prob["c"]),
        str(prob.get("name", "bvp")),
    )


def render_config(cfg: dict[str, Any]) -> str:
    """The resolved configuration as TOML."""
    return tomli_w.dumps(cfg)


def apply_overrides(cfg: dict[str, Any], args: argparse.Namespace) -> dict[str, Any]:
    cfg = copy.deepcopy(cfg)
    run = cfg["run"]
    if getattr(args, "c", None) is not None:
        cfg["problem"]["c"] = args.c
    for flag, key in (("horizon", "horizon"), ("fp_tol", "fp_tol"), ("max_iter", "max_iter"),
                      ("seed", "seed"), ("precision", "precision")):
        val = getattr(args, flag, None)
        if val is not None:
            run[key] = val
    lam = getattr(args, "lam", None)
    if lam is not None:
        run["lambda"] = lam if lam == "auto" else float(lam)
    validate_config(cfg)
    return cfg


# -- runners (pure functions of the configuration, safe in worker processes) -------


def run_certify(cfg: dict[str, Any]) -> dict[str, Any]:
    run = cfg["run"]
    verdict = solvability_verdict(
        build_spec(cfg),
        lam=run["lambda"],
        check_hi=run["check_hi"],
        cert_hi=run["cert_hi"],
        numeric=run["numeric"],
    )
    return verdict.to_dict()


def run_solve(cfg: dict[str, Any]) -> tuple[bool, str, dict[str, Any]]:
    """Returns ``(converged, csv_text, log)``."""
    run = cfg["run"]
    spec = build_spec(cfg)
    try:
        sol = fixed_point_solve(spec, run["horizon"], run["fp_tol"], run["max_iter"],
                                precision=run["precision"])
    except NoConvergenceError as exc:
        return False, "", {"converged": False, "error": str(exc), "iterations": exc.log,
                           "fingerprint": spec.fingerprint()}
    log = sol.log_dict()
    if "exact" in cfg["problem"]:
        f = compile_expression(str(cfg["problem"]["exact"]))
        ks = np.arange(spec.m, sol.K + 1, dtype=np.float64)
        log["exact_sup_error"] = float(np.max(np.abs(sol.values - f(ks, _NumpyNS))))
    return True, sol.to_csv(), log


def _sweep_row(item: tuple[dict[str, Any], str, Any, str]) -> list[str]:
    cfg, param, value, mode = item
    cfg = copy.deepcopy(cfg)
    if param == "c":
        cfg["problem"]["c"] = float(value)
    elif param == "lambda":
        cfg["run"]["lambda"] = float(value)
    elif mode == "solve":
        cfg["run"]["horizon"] = int(value)
    else:
        cfg["run"]["cert_hi"] = int(value)
    row = {"param": param, "value": repr(value)}
    try:
        if mode == "certify":
            v = run_certify(cfg)
            row.update(status="certified" if v["certified"] else "not-certified",
                       criterion=v["criterion"] or "", reason=v["reason"] or "",
                       **{"lambda": "" if v["lambda"] is None else repr(v["lambda"])})
        else:
            ok, _, log = run_solve(cfg)
            row.update(status="converged" if ok else "no-convergence",
                       iterations=str(len(log["iterations"])),
                       max_relative_residual=repr(log["max_relative_residual"]) if ok else "",
                       reason="" if ok else log["error"])
    except CurvBVPError as exc:
        row.update(status="error", reason=f"{type(exc).__name__}: {exc}")
    return [row.get(col, "") for col in SWEEP_COLUMNS]


def run_sweep(cfg: dict[str, Any], param: str, grid: list[float], mode: str = "certify",
              workers: int = 1) -> str:
    """CSV table with one row per grid value, in grid order."""
    items = [(cfg, param, v, mode) for v in grid]
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, items))
    else:
        rows = [_sweep_row(it) for it in items]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


# -- argument handling -------------------------------------------------------------


def _parse_grid(text: str, param: str) -> list[float]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        return [int(p) if param == "horizon" else float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"invalid grid {text!r}: {exc}") from exc


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("file", help="problem file (TOML)")
    p.add_argument("--c", type=float, help="boundary value x_m = c")
    p.add_argument("--horizon", type=int, help="last reported index K")
    p.add_argument("--fp-tol", dest="fp_tol", type=float, help="fixed-point sup-norm tolerance")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="fixed-point iteration cap")
    p.add_argument("--lambda", dest="lam", help="'auto' or a positive scale for the Euler comparison")
    p.add_argument("--seed", type=int, help="recorded in the configuration")
    p.add_argument("--precision", choices=("double", "extended"))
    p.add_argument("--out", help="output path (prefix for solve)")
    p.add_argument("--echo-config", dest="echo_config", help="write the resolved configuration here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvbvp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("certify", help="solvability verdict as JSON"))
    _common(sub.add_parser("solve", help="fixed-point solve; CSV trace and JSON log"))
    sw = sub.add_parser("sweep", help="one verdict or solve summary per grid value")
    _common(sw)
    sw.add_argument("--param", choices=SWEEP_PARAMS, default="c")
    sw.add_argument("--grid", required=True, help="comma-separated values (may be empty)")
    sw.add_argument("--mode", choices=("certify", "solve"), default="certify")
    sw.add_argument("--workers", type=int, default=1)
    vl = sub.add_parser("verify-lemmas", help="run a seeded property suite")
    vl.add_argument("suite", help=f"one of {', '.join(SUITES)} or 'all'")
    vl.add_argument("--seed", type=int, default=0)
    vl.add_argument("--out")
    return parser


def _load(args: argparse.Namespace) -> dict[str, Any]:
    try:
        text = Path(args.file).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.file}: {exc}") from exc
    cfg = apply_overrides(parse_config(text), args)
    echo = render_config(cfg)
    if args.echo_config:
        Path(args.echo_config).write_text(echo)
    else:
        sys.stderr.write("# resolved configuration\n" + echo)
    return cfg


def _verify_lemmas(args: argparse.Namespace) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if any(n not in SUITES for n in names):
        sys.stderr.write(f"error: unknown suite {args.suite!r}; choose from {', '.join(SUITES)} or all\n")
        return EXIT_ERROR
    results = [SUITES[n](args.seed) for n in names]
    payload = [r.to_dict() for r in results]
    _write(json.dumps(payload if len(payload) > 1 else payload[0], indent=2, sort_keys=True) + "\n",
           args.out)
    return EXIT_OK if all(r.ok for r in results) else EXIT_ERROR


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify-lemmas":
            return _verify_lemmas(args)
        cfg = _load(args)
        if args.command == "certify":
            verdict = run_certify(cfg)
            _write(json.dumps(verdict, indent=2, sort_keys=True) + "\n", args.out)
            return EXIT_OK if verdict["certified"] else EXIT_NOT_CERTIFIED
        if args.command == "solve":
            ok, csv_text, log = run_solve(cfg)
            log_text = json.dumps(log, indent=2, sort_keys=True) + "\n"
            if args.out:
                if ok:
                    Path(f"{args.out}.csv").write_text(csv_text)
                Path(f"{args.out}.json").write_text(log_text)
            else:
                sys.stdout.write(csv_text)
                sys.stderr.write(log_text)
            return EXIT_OK if ok else EXIT_NO_CONVERGENCE
        table = run_sweep(cfg, args.param, _parse_grid(args.grid, args.param), args.mode, args.workers)
        _write(table, args.out)
        return EXIT_OK
    except CurvBVPError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())

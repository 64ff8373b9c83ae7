"""Command-line front end: check-formulas, solve, sweep, verify.

Machine-readable reports go to stdout (and to ``--out`` when given);
human-readable progress goes to stderr.  Exit codes: 0 success,
1 verification or solve failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import closed_form as cf
from . import solver
from . import verify
from .bundle import BundleSpec, BundleSpecError, parse_kv_text, validate_bundle_spec
from .oracle import UnsupportedBase
from .profiles import DEFAULT_COUNT

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

COMMANDS = ("check-formulas", "solve", "sweep", "verify")


class ConfigError(ValueError):
    pass


def _positive_int(v):
    out = int(v)
    if out < 1:
        raise ValueError("must be a positive integer")
    return out


def _nonneg_int(v):
    out = int(v)
    if out < 0:
        raise ValueError("must be a non-negative integer")
    return out


# config-file key -> converter; spec keys are validated by the bundle model
_SCALAR_KEYS: dict[str, Callable[[str], Any]] = {
    "grid_size": _positive_int,
    "seed": _nonneg_int,
    "out": str,
    "a0": float,
    "c0": float,
    "a_min": float,
    "a_max": float,
    "c_min": float,
    "c_max": float,
    "cells": int,
    "workers": _positive_int,
    "profiles": _positive_int,
    "points": _positive_int,
    "oracle_points": _positive_int,
    "certificate": str,
}
_SPEC_KEYS = ("n", "epsilon", "k", "q", "topology")
_DEFAULT_SPEC = {"n": 2, "epsilon": 1, "k": 1, "q": 2, "topology": "SphereBundle"}


@dataclass
class RunConfig:
    command: str
    spec: dict = field(default_factory=lambda: dict(_DEFAULT_SPEC))
    grid_size: int = DEFAULT_COUNT
    tol: float | None = None
    tolerances: dict = field(default_factory=dict)
    out: str | None = None
    seed: int = 0
    a0: float = 0.5
    c0: float = 1.0
    a_min: float = 0.1
    a_max: float = 10.0
    c_min: float = 0.01
    c_max: float = 10.0
    cells: int = 40
    workers: int | None = None
    profiles: int = 5
    points: int = 20
    oracle_points: int = 20
    certificate: str | None = None

    def bundle(self) -> BundleSpec:
        spec = validate_bundle_spec(self.spec)
        normalized = spec.to_dict()
        self.spec = {k: normalized[k] for k in _SPEC_KEYS}
        return spec

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["spec"] = dict(self.spec)
        d["tolerances"] = dict(sorted(self.tolerances.items()))
        return d


def _apply_tol(cfg: RunConfig, raw: str, where: str) -> None:
    raw = raw.strip()
    if "=" in raw:
        name, value = (x.strip() for x in raw.split("=", 1))
        _set_named_tol(cfg, name, value, where)
        return
    try:
        cfg.tol = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: tol must be a number or NAME=VALUE, got {raw!r}") from None
    if not cfg.tol > 0:
        raise ConfigError(f"{where}: tol must be positive")


def _set_named_tol(cfg: RunConfig, name: str, value: str, where: str) -> None:
    if name not in verify.DEFAULT_TOLERANCES:
        raise ConfigError(f"{where}: unknown tolerance {name!r}")
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"{where}: tolerance {name} must be a number, got {value!r}") from None
    if not v > 0:
        raise ConfigError(f"{where}: tolerance {name} must be positive")
    cfg.tolerances[name] = v


def apply_config_text(cfg: RunConfig, text: str, source: str = "config") -> RunConfig:
    """Fold flat ``key = value`` text into ``cfg``; unknown keys are errors that name the key."""
    try:
        raw = parse_kv_text(text)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for key, value in raw.items():
        if key in _SPEC_KEYS:
            cfg.spec[key] = value
        elif key == "tol":
            _apply_tol(cfg, value, f"{source} key 'tol'")
        elif key.startswith("tol."):
            _set_named_tol(cfg, key[4:], value, f"{source} key {key!r}")
        elif key in _SCALAR_KEYS:
            try:
                setattr(cfg, key, _SCALAR_KEYS[key](value))
            except ValueError as exc:
                raise ConfigError(f"{source} key {key!r}: bad value {value!r} ({exc})") from None
        else:
            raise ConfigError(f"{source}: unknown key {key!r}")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value file; flags override it")
    common.add_argument("--n", dest="n", help="complex dimension")
    common.add_argument("--epsilon", help="sign of the base scalar curvature: -1, 0 or 1")
    common.add_argument("--k", dest="k", help="Chern number numerator (s = 2k/q)")
    common.add_argument("--q", dest="q", help="Fano index (s = 2k/q)")
    common.add_argument("--topology", help="SphereBundle or ProjectiveSpace")
    common.add_argument("--grid-size", dest="grid_size", help="spectral node count")
    common.add_argument("--tol", action="append", metavar="VALUE|NAME=VALUE",
                        help="check-formulas: mismatch tolerance; solve/verify: certificate tolerance override")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", help="seed for oracle points and random profiles")

    parser = argparse.ArgumentParser(prog="ewbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check-formulas", parents=[common], help="closed form vs numeric Ricci eigenvalues")
    p.add_argument("--profiles", help="random profile pairs per s (default 5)")
    p.add_argument("--points", help="oracle points per profile (default 20)")
    p = sub.add_parser("solve", parents=[common], help="shoot for a profile and certify it")
    p.add_argument("--a0", help="g(0) (default 0.5)")
    p.add_argument("--c0", help="Gauduchon gap constant C (default 1)")
    p.add_argument("--oracle-points", dest="oracle_points", help="oracle points in the certificate (default 20)")
    p = sub.add_parser("sweep", parents=[common], help="residual landscape over a log grid of (a, C)")
    p.add_argument("--a-min", dest="a_min")
    p.add_argument("--a-max", dest="a_max")
    p.add_argument("--c-min", dest="c_min")
    p.add_argument("--c-max", dest="c_max")
    p.add_argument("--cells", help="cells per axis (default 40)")
    p.add_argument("--workers", help="worker processes (default: CPU count)")
    p = sub.add_parser("verify", parents=[common], help="re-run every check on a stored certificate")
    p.add_argument("certificate", nargs="?", help="certificate JSON path")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        apply_config_text(cfg, text, args.config)
    flags = []
    for key in _SPEC_KEYS + tuple(_SCALAR_KEYS):
        value = getattr(args, key, None)
        if value is not None:
            flags.append(f"{key} = {value}")
    apply_config_text(cfg, "\n".join(flags), "flag")
    for raw in args.tol or ():
        _apply_tol(cfg, raw, "flag --tol")
    if cfg.command in ("solve", "verify") and cfg.tol is not None:
        raise ConfigError(f"{cfg.command}: --tol takes NAME=VALUE (names: {', '.join(verify.DEFAULT_TOLERANCES)})")
    if cfg.command == "verify" and not cfg.certificate:
        raise ConfigError("verify needs a certificate path")
    return cfg


# --- output helpers -------------------------------------------------------------


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _out_dir(cfg: RunConfig) -> Path | None:
    if cfg.out is None:
        return None
    path = Path(cfg.out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {path} is not writable: {exc.strerror}") from None
    return path


def _write(out: Path | None, name: str, text: str, written: dict) -> None:
    if out is None:
        return
    target = out / name
    target.write_text(text)
    written[name] = str(target)


def _finish(report: dict, out: Path | None, name: str, code: int) -> int:
    report["exit_code"] = code
    written = report.setdefault("files", {})
    if out is not None:
        written[name] = str(out / name)
        (out / name).write_text(_dumps(report))
    sys.stdout.write(_dumps(report))
    return code


# --- commands -----------------------------------------------------------------


def cmd_check_formulas(cfg: RunConfig) -> int:
    spec = cfg.bundle()
    out = _out_dir(cfg)
    tol = 1e-6 if cfg.tol is None else cfg.tol
    try:
        result = verify.formula_check(n=spec.n_complex, epsilon=int(spec.epsilon), profiles=cfg.profiles,
                                      points=cfg.points, seed=cfg.seed, tol=tol)
    except UnsupportedBase as exc:
        raise ConfigError(str(exc)) from None
    for run in result["runs"]:
        worst = max(run["max_rel_error"], key=run["max_rel_error"].get)
        _say(f"s={run['s']}: max rel error {run['max_rel_error'][worst]:.3e} ({worst}) "
             f"{'ok' if run['passed'] else 'MISMATCH'} (tol {tol:g})")
    report = {"command": cfg.command, "config": cfg.to_dict(), "result": result, "passed": result["passed"]}
    if not result["passed"]:
        report["error"] = f"max relative error {result['max_rel_error']:.3e} exceeds tolerance {tol:g}"
        _say(report["error"])
    return _finish(report, out, "check_formulas_report.json", EXIT_OK if result["passed"] else EXIT_FAILURE)


def cmd_solve(cfg: RunConfig) -> int:
    spec = cfg.bundle()
    out = _out_dir(cfg)
    report: dict = {"command": cfg.command, "config": cfg.to_dict(), "files": {}}
    try:
        sol = solver.solve(spec, cfg.a0, cfg.c0, count=cfg.grid_size, seed=cfg.seed,
                           oracle_points=cfg.oracle_points, tolerances=cfg.tolerances)
    except solver.CertificateFailed as exc:
        sol = exc.solution
    except solver.ShootingError as exc:
        report.update(passed=False, error=type(exc).__name__, message=str(exc))
        _say(f"solve failed: {type(exc).__name__}: {exc}")
        return _finish(report, out, "solve_report.json", EXIT_FAILURE)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cert = sol.certificate
    _write(out, "certificate.json", sol.certificate_json(), report["files"])
    _write(out, "profile.csv", sol.jet.to_csv(), report["files"])
    _write(out, "eigenvalues.csv", cf.eigenvalue_csv(sol.jet, spec), report["files"])
    failed = [c["name"] for c in cert["checks"] if not c["passed"]]
    report.update(passed=cert["passed"], parameters=cert["parameters"], invariants=cert["invariants"],
                  failed=failed, checks={c["name"]: c["value"] for c in cert["checks"]})
    if out is None:
        report["certificate"] = cert
    p = cert["parameters"]
    _say(f"a={p['a']:.6g} g2={p['g2']:.12g} C={p['C_gap']:.6g} L={p['L']:.12g}")
    _say("certified" if cert["passed"] else f"certificate FAILED: {', '.join(failed)}")
    return _finish(report, out, "solve_report.json", EXIT_OK if cert["passed"] else EXIT_FAILURE)


def cmd_sweep(cfg: RunConfig) -> int:
    spec = cfg.bundle()
    out = _out_dir(cfg)
    try:
        result = solver.sweep(spec, cfg.a_min, cfg.a_max, cfg.c_min, cfg.c_max, cfg.cells, workers=cfg.workers)
    except solver.SweepRangeError as exc:
        raise ConfigError(str(exc)) from None
    report = {"command": cfg.command, "config": cfg.to_dict(), "files": {}}
    _write(out, "sweep.csv", result.to_csv(), report["files"])
    report["result"] = result.summary()
    _say(f"{result.flagged_cells} of {len(result.cells)} cells flag a verified root ({result.root_count} roots)")
    return _finish(report, out, "sweep_report.json", EXIT_OK)


def cmd_verify(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    try:
        cert = verify.load_certificate(cfg.certificate)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read certificate {cfg.certificate}: {exc}") from None
    try:
        result = verify.verify_certificate(cert, tolerances=cfg.tolerances)
    except (KeyError, BundleSpecError, ValueError) as exc:
        raise ConfigError(f"malformed certificate {cfg.certificate}: {exc}") from None
    report = {"command": cfg.command, "config": cfg.to_dict(), "passed": result["passed"],
              "failed": result["failed"], "checks": result["checks"]}
    for name in result["failed"]:
        check = next(c for c in result["checks"] if c["name"] == name)
        _say(f"FAILED {name}: value {check['value']:.3e} (tol {check['tol']:.0e})")
    _say("all checks pass" if result["passed"] else f"{len(result['failed'])} check(s) failed")
    return _finish(report, out, "verify_report.json", EXIT_OK if result["passed"] else EXIT_FAILURE)


_HANDLERS = {
    "check-formulas": cmd_check_formulas,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return _HANDLERS[cfg.command](cfg)
    except (ConfigError, BundleSpecError) as exc:
        _say(f"config error: {exc}")
        sys.stdout.write(_dumps({"command": args.command, "error": str(exc), "exit_code": EXIT_USAGE}))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

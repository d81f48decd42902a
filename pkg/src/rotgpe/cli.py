"""Command line: ``rotgpe run``, ``rotgpe verify`` and ``rotgpe oracle``.

Configuration is an INI document with sections ``[params]``, ``[grid]``,
``[evolve]``, ``[picard]``, ``[initial]``, ``[verify]`` and ``[output]``.
Unknown sections or keys are errors.

Exit status: 0 success, 1 verification failure, 2 invalid input, 3 numerical
failure during the run.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .conservation import LedgerError
from .duhamel import HorizonError, PicardConfig
from .field import GridSpec, SimulationParams, WaveField, load_field, lp_norm, sample_gaussian, sample_random, sample_vortex
from .propagator import (
    SCHEMES,
    BlowUpError,
    EvolveConfig,
    OracleError,
    evolve,
    injected_fault,
    mehler_apply,
    mehler_quarter_period,
    propagate_linear,
)
from .verify import (
    SUITES,
    conservation_suite,
    format_table,
    operators_suite,
    oracle_datum,
    oracle_grid,
    oracle_suite,
    picard_suite,
    strichartz_suite,
)

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3
INITIAL_KINDS = ("gaussian", "vortex", "file", "random")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InitialData:
    kind: str = "gaussian"
    m: int = 1
    path: str | None = None
    seed: int = 0
    amplitude: float = 1.0

    def build(self, grid: GridSpec, omega: float) -> WaveField:
        if self.kind == "gaussian":
            u = sample_gaussian(grid, omega)
        elif self.kind == "vortex":
            u = sample_vortex(grid, omega, self.m)
        elif self.kind == "random":
            u = sample_random(grid, self.seed)
        else:
            u = load_field(self.path)
        return u * self.amplitude if self.amplitude != 1.0 else u


@dataclass(frozen=True)
class RunConfig:
    params: SimulationParams = field(default_factory=SimulationParams)
    grid: GridSpec = field(default_factory=lambda: GridSpec(128, 8.0))
    evolve: EvolveConfig = field(default_factory=lambda: EvolveConfig(dt=1e-3, t_end=math.pi / 2))
    picard: PicardConfig = field(default_factory=PicardConfig)
    initial: InitialData = field(default_factory=InitialData)
    suites: tuple = ()
    samples: int = 16
    seed: int = 0
    output: str = "rotgpe_out"

    @property
    def warnings(self) -> list[str]:
        return self.params.regime_warnings()


# -- parsing -----------------------------------------------------------------

_INT = {"n", "snapshot_stride", "quad_nodes", "max_iter", "m", "seed", "samples"}
_BOOL = {"keep_snapshots"}
_STR = {"scheme", "kind", "path", "directory", "suites"}

_KEYS = {
    "params": ("omega", "beta", "sigma"),
    "grid": ("n", "l"),
    "evolve": ("dt", "t_end", "snapshot_stride", "segment_length", "scheme", "keep_snapshots"),
    "picard": ("t_horizon", "rho", "quad_nodes", "max_iter", "tol"),
    "initial": ("kind", "m", "path", "seed", "amplitude"),
    "verify": ("suites", "samples", "seed"),
    "output": ("directory",),
}


def _convert(section, key, raw):
    where = f"[{section}] {key}"
    try:
        if key in _BOOL:
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError
            return low in ("true", "yes", "1")
        if key in _STR:
            return raw.strip()
        if key in _INT:
            return int(raw)
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    return v


def _read(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        if getattr(exc, "errors", None):
            line, text = exc.errors[0]
            raise ConfigError(f"syntax error at line {line}: {text}") from None
        line = getattr(exc, "lineno", "?")
        raise ConfigError(f"syntax error at line {line}: {exc.message.splitlines()[0]}") from None
    out = {}
    for section in cp.sections():
        if section not in _KEYS:
            raise ConfigError(f"unknown section [{section}]")
        out[section] = {}
        for key, raw in cp.items(section):
            if key not in _KEYS[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            out[section][key] = _convert(section, key, raw)
    return out


def _build(section, ctor, values):
    try:
        return ctor(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse and validate a run configuration; defaults fill every missing key."""
    doc = _read(text)
    d = RunConfig()
    params = _build("params", SimulationParams, {**asdict(d.params), **doc.get("params", {})})
    grid = _build("grid", GridSpec, {"n": d.grid.n, "l": d.grid.l, **doc.get("grid", {})})

    ev = {**asdict(d.evolve), **doc.get("evolve", {})}
    evo = _build("evolve", EvolveConfig, ev)
    try:
        evo.validate(params.omega)
    except ValueError as exc:
        raise ConfigError(f"[evolve] {exc}") from None
    if evo.scheme not in SCHEMES:
        raise ConfigError(f"[evolve] scheme must be one of {SCHEMES}")

    pic = _build("picard", PicardConfig, {**asdict(d.picard), **doc.get("picard", {})})
    try:
        pic.validate(params.omega)
    except ValueError as exc:
        raise ConfigError(f"[picard] {exc}") from None

    ini = {**asdict(d.initial), **doc.get("initial", {})}
    ini["path"] = ini["path"] or None
    if ini["kind"] not in INITIAL_KINDS:
        raise ConfigError(f"[initial] kind must be one of {INITIAL_KINDS}")
    if ini["kind"] == "file":
        if not ini["path"]:
            raise ConfigError("[initial] path is required for kind = file")
        p = Path(ini["path"])
        if not p.is_absolute():
            p = Path(base_dir) / p
        if not p.is_file():
            raise ConfigError(f"[initial] path: no such file {str(p)!r}")
        ini["path"] = str(p.resolve())
    if ini["kind"] == "vortex" and not (int(ini["m"]) == ini["m"] and abs(ini["m"]) <= 4):
        raise ConfigError("[initial] m must be an integer with |m| <= 4")
    if not ini["amplitude"] > 0:
        raise ConfigError("[initial] amplitude must be positive")
    initial = InitialData(**ini)

    ver = doc.get("verify", {})
    suites = tuple(s.strip() for s in ver.get("suites", "").split(",") if s.strip())
    if suites == ("all",):
        suites = SUITES
    bad = [s for s in suites if s not in SUITES]
    if bad:
        raise ConfigError(f"[verify] suites: unknown {bad}; choose from {SUITES} or 'all'")
    samples = ver.get("samples", d.samples)
    if samples < 10:
        raise ConfigError("[verify] samples must be >= 10")
    output = doc.get("output", {}).get("directory", d.output)
    if not output:
        raise ConfigError("[output] directory must not be empty")
    return RunConfig(params, grid, evo, pic, initial, suites, samples, ver.get("seed", d.seed), output)


def render_config(cfg: RunConfig) -> str:
    """INI text that ``parse_config`` maps back to ``cfg``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str

    def put(section, obj, names):
        cp[section] = {}
        for name in names:
            v = getattr(obj, name)
            if v is None:
                continue
            cp[section][name] = repr(v) if isinstance(v, float) else str(v)

    put("params", cfg.params, _KEYS["params"])
    put("grid", cfg.grid, _KEYS["grid"])
    put("evolve", cfg.evolve, _KEYS["evolve"])
    put("picard", cfg.picard, _KEYS["picard"])
    put("initial", cfg.initial, _KEYS["initial"])
    cp["verify"] = {"suites": ",".join(cfg.suites), "samples": str(cfg.samples), "seed": str(cfg.seed)}
    cp["output"] = {"directory": cfg.output}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def load_config(path: str | None) -> tuple[RunConfig, str]:
    if path is None:
        return parse_config(""), ""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, p.parent), text


# -- commands ----------------------------------------------------------------


def _error(kind: str, message: str, status: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit": status}), file=sys.stderr)
    return status


def content_hash(cfg: RunConfig) -> str:
    """Git blob hash (SHA-1 over ``blob <len>\\0`` + content) of the rendered config and input file."""
    data = render_config(cfg).encode()
    if cfg.initial.kind == "file":
        data += Path(cfg.initial.path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def cmd_run(cfg: RunConfig) -> int:
    start = time.perf_counter()
    try:
        u0 = cfg.initial.build(cfg.grid, cfg.params.omega)
    except (OSError, ValueError) as exc:
        return _error("validation", str(exc), EXIT_INVALID)
    try:
        traj = evolve(u0, cfg.params, cfg.evolve)
    except (BlowUpError, FloatingPointError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        return _error("validation", str(exc), EXIT_INVALID)
    out = Path(cfg.output)
    traj.save(out / "trajectory")
    status, message = EXIT_OK, "ok"
    try:
        traj.ledger.check()
    except LedgerError as exc:
        status, message = EXIT_FAIL, str(exc)
    manifest = {
        "command": "run",
        "version": __version__,
        "config": render_config(cfg),
        "input_hash": content_hash(cfg),
        "warnings": cfg.warnings,
        "ledger": "trajectory/ledger.csv",
        "final_time": float(traj.times[-1]),
        "status": message,
        "platform": {"python": platform.python_version(), "numpy": np.__version__},
        "wall_time_s": time.perf_counter() - start,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {out}  ({len(traj.times)} ledger rows, t_end={traj.times[-1]:.6g})")
    if status != EXIT_OK:
        return _error("verification", message, status)
    return status


def run_suites(cfg: RunConfig, suites=None) -> list:
    suites = tuple(suites or cfg.suites or SUITES)
    checks = []
    u0 = None
    for name in suites:
        if name in ("conservation", "picard") and u0 is None:
            u0 = cfg.initial.build(cfg.grid, cfg.params.omega)
        if name == "conservation":
            checks += conservation_suite(u0, cfg.params, replace(cfg.evolve, keep_snapshots=False))
        elif name == "operators":
            checks += operators_suite(cfg.params)
        elif name == "oracle":
            checks += oracle_suite(cfg.params)
        elif name == "picard":
            checks += picard_suite(u0, cfg.params, cfg.picard)
        elif name == "strichartz":
            checks += strichartz_suite(cfg.params, cfg.picard.rho, cfg.samples, cfg.seed)
    return checks


def cmd_verify(cfg: RunConfig, suites=None, inject_fault: bool = False) -> int:
    start = time.perf_counter()
    try:
        if inject_fault:
            with injected_fault():
                checks = run_suites(cfg, suites)
        else:
            checks = run_suites(cfg, suites)
    except (BlowUpError, FloatingPointError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERIC)
    except (OSError, ValueError) as exc:
        return _error("validation", str(exc), EXIT_INVALID)
    print(format_table(checks))
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "command": "verify",
        "version": __version__,
        "config": render_config(cfg),
        "input_hash": content_hash(cfg),
        "fault_injected": inject_fault,
        "warnings": cfg.warnings,
        "checks": [c.to_dict() for c in checks],
    }
    (out / "verify_report.json").write_text(json.dumps(report, indent=2) + "\n")
    (out / "verify_manifest.json").write_text(json.dumps({"wall_time_s": time.perf_counter() - start}) + "\n")
    failed = [c.check for c in checks if not c.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, t: float, n: int = 64, l: float | None = None, allow_large: bool = False) -> int:
    """Compare the kernel against the fast propagator on the packet used by the oracle suite."""
    w = cfg.params.omega
    lin = SimulationParams(w, 0.0, cfg.params.sigma)
    try:
        grid = GridSpec(n, l) if l is not None else oracle_grid(w, n, t)
        phi = oracle_datum(grid, w)
        kernel = mehler_apply(phi, t, lin, allow_large=allow_large)
    except (OracleError, ValueError) as exc:
        return _error("validation", str(exc), EXIT_INVALID)
    fast = propagate_linear(phi, t, lin)
    rows = [
        ("L2 discrepancy kernel vs fast", lp_norm(kernel - fast, 2), 1e-4),
        ("unitarity defect", abs(lp_norm(kernel, 2) / lp_norm(phi, 2) - 1), 1e-6),
    ]
    if 0 < w * t <= math.pi / 2 + 1e-12:
        margin = lp_norm(kernel, math.inf) / (lp_norm(phi, 1) / (4 * t))
        rows.append(("dispersive ratio sup|S phi| 4t/|phi|_1", margin, 1 + 1e-6))
    if math.isclose(w * t, math.pi / 2, rel_tol=1e-12):
        quarter = mehler_quarter_period(phi, lin)
        rows.append(("quarter-period transform vs kernel", lp_norm(quarter - kernel, 2), 1e-8))
    ok = True
    for name, value, tol in rows:
        passed = value <= tol
        ok &= passed
        print(f"{name:42s} {value:.3e}  (tol {tol:.0e})  {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotgpe", description="Rotating Gross-Pitaevskii solver and verification suites.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="evolve and write trajectory, ledger and manifest")
    r.add_argument("config", nargs="?", help="INI configuration (defaults if omitted)")
    r.add_argument("--output", help="override [output] directory")
    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("config", nargs="?")
    v.add_argument("--suites", help=f"comma-separated subset of {','.join(SUITES)} or 'all'")
    v.add_argument("--output")
    v.add_argument("--inject-fault", action="store_true", help="corrupt the propagator (self-test of the suites)")
    o = sub.add_parser("oracle", help="kernel vs fast propagator at one time")
    o.add_argument("config", nargs="?")
    o.add_argument("--t", type=float, required=True)
    o.add_argument("--n", type=int, default=64)
    o.add_argument("--l", type=float, default=None)
    o.add_argument("--allow-large", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, _ = load_config(args.config)
        if getattr(args, "output", None):
            cfg = replace(cfg, output=args.output)
        suites = None
        if args.command == "verify" and args.suites:
            suites = SUITES if args.suites == "all" else tuple(s.strip() for s in args.suites.split(","))
            bad = [s for s in suites if s not in SUITES]
            if bad:
                raise ConfigError(f"--suites: unknown {bad}")
    except (ConfigError, HorizonError) as exc:
        return _error("validation", str(exc), EXIT_INVALID)
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.command == "run":
        return cmd_run(cfg)
    if args.command == "verify":
        return cmd_verify(cfg, suites, args.inject_fault)
    return cmd_oracle(cfg, args.t, args.n, args.l, args.allow_large)

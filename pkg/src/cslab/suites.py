"""Configuration, verification suites and deterministic JSON reports."""

from __future__ import annotations

import hashlib
import json
import os
import platform
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np
import scipy
import yaml

from . import cartan as cartan_mod
from .errors import CheckFailed, ConfigError, CSLabError
from .frames import Level, TeichmullerPoint

SUITE_NAMES = ("frames", "operators", "bargmann", "connections", "transport", "equivariance")
MCG_CONVENTION = "gamma=[[a,b],[c,d]] acts on (dx,dy) components by [[d,c],[b,a]]; tau -> (a tau+b)/(c tau+d)"


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    cartan: dict = field(default_factory=lambda: {"preset": "A1"})
    level: tuple = (1, 0.5)
    taus: tuple = ((0.3, 1.2), (0.0, 1.0), (-0.4, 0.8))
    degree: int = 10
    quadrature_nodes: int = 64
    lattice_radius: float = 12.0
    tolerances: dict = field(default_factory=lambda: {"matrix": 1e-10, "fd": 1e-6, "transport": 1e-6})
    suite: str = "all"
    out: str = "cslab-report.json"
    seed: int = 0
    steps: int = 1000
    radius: float = 0.1

    def __post_init__(self):
        try:
            k, s = self.level
            k, s = float(k), float(s)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"level must be a pair (k, s), got {self.level!r}") from exc
        if int(k) != k or k < 1:
            raise ConfigError(f"level k must be a positive integer, got {k}")
        object.__setattr__(self, "level", (int(k), s))
        object.__setattr__(self, "taus", tuple(tuple(float(x) for x in t) for t in self.taus))
        for t in self.taus:
            TeichmullerPoint(*t)
        if int(self.degree) != self.degree or self.degree < 6:
            raise ConfigError(f"degree must be an integer >= 6, got {self.degree}")
        tol = {"matrix": 1e-10, "fd": 1e-6, "transport": 1e-6}
        tol.update(self.tolerances or {})
        if any(not (isinstance(v, (int, float)) and v > 0) for v in tol.values()):
            raise ConfigError("tolerances must be positive numbers")
        object.__setattr__(self, "tolerances", tol)
        if self.suite != "all" and self.suite not in SUITE_NAMES:
            raise ConfigError(f"unknown suite {self.suite!r}")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.steps < 1 or self.radius <= 0 or self.lattice_radius <= 0 or self.quadrature_nodes < 4:
            raise ConfigError("steps, radius, lattice_radius and quadrature_nodes must be positive")
        self.cartan_data()

    @property
    def level_obj(self) -> Level:
        return Level(*self.level)

    @property
    def tau_points(self) -> list:
        return [TeichmullerPoint(*t) for t in self.taus]

    def cartan_data(self) -> cartan_mod.CartanData:
        return cartan_mod.from_config(dict(self.cartan))

    def echo(self) -> dict:
        return {"cartan": self.cartan, "level": {"k": self.level[0], "s": self.level[1]},
                "taus": [list(t) for t in self.taus], "degree": self.degree,
                "quadrature_nodes": self.quadrature_nodes, "lattice_radius": self.lattice_radius,
                "tolerances": dict(sorted(self.tolerances.items())), "suite": self.suite,
                "seed": self.seed, "steps": self.steps, "radius": self.radius}


def parse_level(text: str) -> tuple:
    """Parse "k+si" into (k, s)."""
    try:
        z = complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse level {text!r}") from exc
    return (z.real, z.imag)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = dict(raw)
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if isinstance(raw.get("level"), dict):
        raw["level"] = (raw["level"].get("k"), raw["level"].get("s", 0.0))
    elif isinstance(raw.get("level"), str):
        raw["level"] = parse_level(raw["level"])
    if "taus" in raw:
        raw["taus"] = tuple(_tau_pair(t) for t in raw["taus"])
    try:
        return RunConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _tau_pair(t):
    if isinstance(t, str):
        z = complex(t.strip().replace(" ", "").replace("i", "j"))
        return (z.real, z.imag)
    return tuple(t)


def load_config(path: str | None) -> RunConfig:
    """Read a JSON or YAML config file; None gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(raw or {})


# --------------------------------------------------------------------------
# checks and reports


@dataclass(frozen=True)
class Check:
    id: str
    ref: str
    tolerance: str | float
    run: Callable


@dataclass(frozen=True)
class CheckContext:
    config: RunConfig
    rng: np.random.Generator

    @property
    def level(self) -> Level:
        return self.config.level_obj

    @property
    def degree(self) -> int:
        return self.config.degree

    def random_tau(self) -> TeichmullerPoint:
        return TeichmullerPoint(float(self.rng.uniform(-0.5, 0.5)), float(self.rng.uniform(0.7, 1.6)))

    def random_level(self) -> Level:
        return Level(int(self.rng.integers(1, 4)), float(self.rng.uniform(-1.5, 1.5)))


_REGISTRY: dict = {name: [] for name in SUITE_NAMES}


def check(suite: str, id: str, ref: str, tolerance):
    """Register a check function returning (residual, inputs dict)."""

    def wrap(fn):
        _REGISTRY[suite].append(Check(id, ref, tolerance, fn))
        return fn

    return wrap


def suite_checks(suite: str) -> list:
    from . import checks  # noqa: F401  registers the checks

    names = SUITE_NAMES if suite == "all" else (suite,)
    out = []
    for name in names:
        if name not in _REGISTRY:
            raise ConfigError(f"unknown suite {name!r}")
        out.extend(_REGISTRY[name])
    ids = [c.id for c in out]
    if len(set(ids)) != len(ids):
        raise RuntimeError("duplicate check ids")
    return sorted(out, key=lambda c: c.id)


def _digest(obj) -> str:
    return hashlib.sha256(_dumps(obj).encode()).hexdigest()[:16]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def _dumps(obj) -> str:
    # json uses repr for floats, which is the shortest round-trip form
    return json.dumps(_clean(obj), sort_keys=True, indent=1, ensure_ascii=True)


def run_check(chk: Check, config: RunConfig) -> dict:
    seed = [int(config.seed) & 0xFFFFFFFF, int(config.seed) >> 32, zlib.crc32(chk.id.encode())]
    ctx = CheckContext(config, np.random.default_rng(seed))
    tol = config.tolerances[chk.tolerance] if isinstance(chk.tolerance, str) else float(chk.tolerance)
    try:
        residual, inputs = chk.run(ctx)
        residual = float(residual)
        error = None
    except CSLabError as exc:
        residual, inputs, error = None, {}, f"{type(exc).__name__}: {exc}"
    passed = residual is not None and bool(residual < tol)
    rec = {"id": chk.id, "ref": chk.ref, "inputs_digest": _digest(inputs), "residual": residual,
           "tolerance": tol, "pass": passed}
    if error:
        rec["error"] = error
    return rec


def worker_count() -> int:
    raw = os.environ.get("CSLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"CSLAB_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("CSLAB_THREADS must be at least 1")
    return n


def environment_block() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "package": _package_version()}


def _package_version() -> str:
    try:
        from importlib.metadata import version
        return version("cslab")
    except Exception:  # not installed as a distribution
        return "unknown"


def run_suite(config: RunConfig, suite: str | None = None) -> dict:
    """Run the selected suite and return the report (checks ordered by id)."""
    suite = suite or config.suite
    checks = suite_checks(suite)
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda c: run_check(c, config), checks))
    else:
        records = [run_check(c, config) for c in checks]
    passed = sum(r["pass"] for r in records)
    return {"tool": "cslab", "suite": suite, "conventions": {"mcg_action": MCG_CONVENTION},
            "environment": environment_block(), "config": config.echo(), "checks": records,
            "summary": {"total": len(records), "passed": passed, "failed": len(records) - passed}}


def report_json(report: dict) -> str:
    return _dumps(report) + "\n"


def write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cslab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_schema() -> dict:
    return json.loads(resources.files("cslab").joinpath("data/report.schema.json").read_text())


def validate_report(report: dict):
    import jsonschema
    jsonschema.validate(json.loads(report_json(report)), report_schema())


def run_and_write(config: RunConfig, suite: str | None = None, out: str | None = None) -> dict:
    """Run, validate, write atomically; raise CheckFailed (after writing) if any check fails."""
    report = run_suite(config, suite)
    validate_report(report)
    write_atomic(out or config.out, report_json(report))
    if report["summary"]["failed"]:
        failed = [r["id"] for r in report["checks"] if not r["pass"]]
        raise CheckFailed(f"{len(failed)} check(s) failed: {', '.join(failed)}")
    return report

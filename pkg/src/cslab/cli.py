"""Command-line entry point: ``cslab {verify, transport, bargmann, holonomy, equivariant}``.

Exit codes: 0 success, 1 a check failed, 2 bad configuration or input file.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from importlib import resources

import numpy as np

from . import bargmann as bg
from . import sections as sc
from . import suites
from . import transport as tp
from .errors import CheckFailed, ConfigError, CSLabError, FileFormatError
from .frames import Level

EXAMPLE_SECTIONS = {"@h0": "data/h0_rank1.json"}
_DEFAULT_KIND = {"hermite": "HW", "fock": "L2", "extended": "CH"}


def _complex_list(values):
    return [[float(v.real), float(v.imag)] for v in np.ravel(values)]


def _load_section(path: str) -> sc.Section:
    if path in EXAMPLE_SECTIONS:
        raw = json.loads(resources.files("cslab").joinpath(EXAMPLE_SECTIONS[path]).read_text())
        return sc.section_from_dict(raw)
    return sc.read_section(path)


def _write_text(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        suites.write_atomic(path, text)


def _write_json(path: str | None, obj):
    _write_text(path, suites.report_json(obj))


def _level(text: str | None, default: Level) -> Level:
    return default if text is None else Level(*suites.parse_level(text))


# --------------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    config = suites.load_config(args.config)
    overrides = {}
    if args.suite is not None:
        overrides["suite"] = args.suite
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.degree is not None:
        overrides["degree"] = args.degree
    if args.tau is not None:
        t = tp.parse_tau(args.tau)
        overrides["taus"] = ((t.tau1, t.tau2),)
    if args.level is not None:
        overrides["level"] = suites.parse_level(args.level)
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.radius is not None:
        overrides["radius"] = args.radius
    if overrides:
        merged = {**config.echo(), **overrides}
        merged["level"] = overrides.get("level", config.level)
        merged["out"] = overrides.get("out", config.out)
        config = suites.config_from_dict(merged)
    try:
        report = suites.run_and_write(config)
    except CheckFailed as exc:
        print(f"FAIL: {exc} (report written to {config.out})", file=sys.stderr)
        return 1
    s = report["summary"]
    print(f"{s['passed']}/{s['total']} checks passed; report written to {config.out}")
    return 0


def cmd_transport(args) -> int:
    initial = _load_section(args.section)
    path = tp.TeichPath.from_string(args.path, args.steps)
    kind = args.kind or _DEFAULT_KIND[initial.basis.kind]
    result = tp.transport(kind, path, initial, tol=args.tol)
    out = {"connection": kind, "path": [[w.tau1, w.tau2] for w in path.waypoints],
           "endpoint_coeffs": sc.section_to_dict(result.section), "norm_drift": result.norm_drift,
           "residuals": {"step_halving_change": result.step_change}}
    _write_json(args.out, out)
    if args.trace:
        _write_trace(args.trace, kind, path, initial, args.tol)
    return 0


def _write_trace(target: str, kind: str, path: tp.TeichPath, initial: sc.Section, tol: float):
    """Coefficients at every waypoint, one row per nonzero coefficient."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau1", "tau2", "index", "re", "im"])
    sec = initial
    points = path.waypoints
    for i, p in enumerate(points):
        if i:
            seg = tp.TeichPath((points[i - 1], p), path.steps)
            sec = tp.transport(kind, seg, sec, tol=tol, headroom=0).section
        for idx, c in zip(sec.basis.indices, sec.coeffs):
            if c != 0:
                w.writerow([repr(p.tau1), repr(p.tau2), " ".join(map(str, idx)), repr(float(c.real)), repr(float(c.imag))])
    suites.write_atomic(target, buf.getvalue())


def cmd_bargmann(args) -> int:
    psi = _load_section(args.section)
    if psi.basis.kind != "hermite":
        raise FileFormatError("the bargmann command takes a hermite section")
    _write_json(args.out, sc.section_to_dict(bg.bargmann_closed_form(psi)))
    return 0


def cmd_holonomy(args) -> int:
    level = _level(args.level, Level(1, 0.5))
    kind = args.kind
    basis = sc.Basis(tp._KIND_BASIS[kind], args.rank, args.degree)
    loop = tp.TeichPath.square_loop(tp.parse_tau(args.loop_center), args.radius, args.steps)
    H = tp.holonomy(kind, loop, basis, level, block_degree=args.block_degree)
    defect = tp.holonomy_defect(H)
    block = [list(n) for n in basis.indices if sum(n) <= args.block_degree]
    _write_json(args.out, {"connection": kind, "basis": basis.kind, "rank": args.rank, "degree": args.degree,
                           "level": {"k": level.k, "s": level.s}, "loop_center": args.loop_center,
                           "radius": args.radius, "block_indices": block,
                           "matrix": [_complex_list(row) for row in H], "defect": defect})
    if defect >= args.tol:
        print(f"FAIL: holonomy defect {defect:.3e} exceeds {args.tol:.1e}", file=sys.stderr)
        return 1
    return 0


def cmd_equivariant(args) -> int:
    config = suites.load_config(args.config)
    level = _level(args.level, config.level_obj)
    tau = tp.parse_tau(args.tau)
    data = config.cartan_data().orthonormalized()
    r = data.rank
    centre = np.asarray(args.center if args.center is not None else [0.0] * (2 * r), dtype=float)
    if centre.size != 2 * r:
        raise ConfigError(f"--center needs {2 * r} numbers for rank {r}")
    seed = sc.gaussian(centre, args.width, level.k)
    E = sc.equivariantize(seed, data, config.lattice_radius)
    rng = np.random.default_rng(args.seed)
    m = 2 * r
    z = (rng.normal(size=(args.points, m)) + 1j * rng.normal(size=(args.points, m))) * args.scale
    vals = bg.bargmann_equivariant(E, z, tau, level, as_section=args.section_values)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"z{j + 1}{part}" for j in range(m) for part in ("re", "im")] + ["value_re", "value_im"])
    for row, v in zip(z, vals):
        w.writerow([repr(float(x)) for c in row for x in (c.real, c.imag)] + [repr(float(v.real)), repr(float(v.imag))])
    _write_text(args.out, buf.getvalue())
    return 0


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cslab", description="Quantisation of flat SL(r+1, C) connections on the torus.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites and write a JSON report")
    v.add_argument("--config", help="YAML or JSON config file")
    v.add_argument("--suite", choices=suites.SUITE_NAMES + ("all",))
    v.add_argument("--out", help="report path")
    v.add_argument("--seed", type=int, help="unsigned 64-bit seed for randomised checks")
    v.add_argument("--degree", type=int, help="truncation degree N")
    v.add_argument("--tau", help='base point "a+bi"')
    v.add_argument("--level", help='level "k+si"')
    v.add_argument("--steps", type=int, help="integration steps per loop")
    v.add_argument("--radius", type=float, help="half-side of the square loop at tau = i")
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("transport", help="parallel transport of a section file along a path")
    t.add_argument("--section", required=True, help="section file, or @h0 for the shipped ground state")
    t.add_argument("--path", required=True, help='waypoints "a+bi,c+di,..."')
    t.add_argument("--kind", choices=("HW", "L2", "CH"), help="connection (default from the basis)")
    t.add_argument("--steps", type=int, help="steps per segment (default 1000 per unit length)")
    t.add_argument("--tol", type=float, default=1e-8, help="step-halving tolerance")
    t.add_argument("--out", help="JSON output (default stdout)")
    t.add_argument("--trace", help="CSV of coefficients at each waypoint")
    t.set_defaults(func=cmd_transport)

    b = sub.add_parser("bargmann", help="Bargmann transform of a hermite section file")
    b.add_argument("--section", required=True, help="section file, or @h0")
    b.add_argument("--out", help="Fock section file (default stdout)")
    b.set_defaults(func=cmd_bargmann)

    h = sub.add_parser("holonomy", help="holonomy matrix around a square loop")
    h.add_argument("--kind", choices=("HW", "L2", "CH"), default="CH")
    h.add_argument("--loop-center", default="0+1i")
    h.add_argument("--radius", type=float, default=0.1)
    h.add_argument("--steps", type=int, default=250, help="steps per side")
    h.add_argument("--degree", type=int, default=16)
    h.add_argument("--rank", type=int, default=1)
    h.add_argument("--block-degree", type=int, default=4)
    h.add_argument("--level", help='level "k+si" (default 1+0.5i)')
    h.add_argument("--tol", type=float, default=1e-6, help="exit 1 if the defect reaches this")
    h.add_argument("--out", help="JSON output (default stdout)")
    h.set_defaults(func=cmd_holonomy)

    e = sub.add_parser("equivariant", help="CSV of the lattice-summed transform of an equivariantised Gaussian")
    e.add_argument("--config", help="config file for the Cartan data and lattice radius")
    e.add_argument("--tau", default="0+1i")
    e.add_argument("--level", help='level "k+si"')
    e.add_argument("--center", type=float, nargs="+", help="centre of the seed Gaussian")
    e.add_argument("--width", type=float, default=0.7)
    e.add_argument("--points", type=int, default=20)
    e.add_argument("--scale", type=float, default=0.6, help="spread of the random z points")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--section-values", action="store_true",
                   help="multiply by exp(-|t||z|^2/4), the value in the invariant trivialisation")
    e.add_argument("--out", help="CSV output (default stdout)")
    e.set_defaults(func=cmd_equivariant)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CSLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: `catalog` lists built-in systems, `show` prints constructed
expressions, `verify` runs the conservation checks and emits a structured
report, `extend`/`ccm` build a user-defined system from a TOML file.

Reports are versioned documents with stable keys (see README); the exit code
is 0 iff every executed check passes, 1 if a check fails, 2 on usage or
validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np
import sympy as sp

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import catalog as cat
from .ccm import CcmError, ccm_extension
from .extension import (
    ExtensionError,
    ExtensionParams,
    SeedSystem,
    check_seed,
    extend,
    g_recursion,
)
from .mechanics import CanonicalChart, PhasePoint
from .symexpr import (
    ParseError,
    SymbolTable,
    SymexprError,
    coordinate,
    momentum,
    momentum_degree,
    parameter,
    parse,
    render,
)
from .verify import (
    IntegratorConfig,
    SamplerConfig,
    bracket_residual,
    degree_check,
    drift_report,
    integrate_flow,
)

SCHEMA_VERSION = 1

# numeric parameter bindings used for flow integration (brackets sample
# parameters from the per-system boxes instead)
FLOW_PARAMS = {"c1": 1.0, "c2": 0.25, "E": 0.75}


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# report assembly


def _stats_dict(stats) -> dict:
    return {
        "max_abs": stats.max_abs,
        "mean_abs": stats.mean_abs,
        "scale": stats.scale,
        "normalized_max": stats.normalized_max,
        "threshold": stats.threshold,
        "n_points": stats.n_points,
        "seed": stats.seed,
    }


def _bracket_check(name, H, K, chart, box, args) -> dict:
    cfg = SamplerConfig(
        seed=args.seed, n_points=args.samples, box=box, tol=args.tol
    )
    stats = bracket_residual(H, K, chart, cfg)
    return {
        "name": name,
        "tier": stats.tier,
        "passed": stats.passed,
        "stats": _stats_dict(stats),
    }


def _seed_check(seed: SeedSystem) -> dict:
    report = check_seed(seed)
    return {
        "name": "seed_condition",
        "tier": "exact" if report.exact else "heuristic",
        "passed": report.passed,
        "stats": {
            "max_abs": 0.0 if report.exact else report.max_abs,
            "xlg_nonzero": report.xlg_nonzero,
        },
    }


def _degree_check(ext) -> dict:
    deg = momentum_degree(ext.K, ext.chart.momenta)
    return {
        "name": "degree",
        "tier": "exact",
        "passed": degree_check(ext),
        "stats": {"momentum_degree": deg, "expected": ext.mu + ext.nu},
    }


def _route_check(ccm_sys, box, args) -> dict:
    diff = ccm_sys.route_difference
    if diff == 0:
        return {
            "name": "route_agreement",
            "tier": "exact",
            "passed": True,
            "stats": {"max_abs": 0.0},
        }
    cfg = SamplerConfig(seed=args.seed, n_points=args.samples, box=box, tol=args.tol)
    stats = bracket_residual(diff, sp.Integer(1), ccm_sys.chart, cfg)
    return {
        "name": "route_agreement",
        "tier": "heuristic",
        "passed": stats.passed,
        "stats": _stats_dict(stats),
    }


def _drift_point(chart: CanonicalChart, box: dict, seed: int) -> PhasePoint:
    streams = np.random.SeedSequence(seed).spawn(1)
    rng = np.random.default_rng(streams[0])
    values = {}
    for s in chart.symbols:
        lo, hi = box[s.name]
        values[s.name] = float(rng.uniform(lo, hi))
    return PhasePoint(chart=chart, values=values)


def _drift_check(name, H, quantities, chart, box, args, t_end) -> dict:
    cfg = IntegratorConfig(t_end=t_end)
    x0 = _drift_point(chart, box, args.seed)
    traj = integrate_flow(H, x0, cfg, params=FLOW_PARAMS)
    report = drift_report(traj, quantities)
    return {
        "name": name,
        "tier": "heuristic",
        "passed": report.accepted,
        "stats": {
            "quantities": [
                {"name": n, "initial": q0, "max_relative_drift": d}
                for n, q0, d in report.quantities
            ],
            "t_end": t_end,
        },
    }


def _verify_checks(args) -> tuple:
    """Build the requested system and run its check list.

    Returns (header dict, list of check dicts, timings dict)."""
    t0 = time.perf_counter()
    system = args.system
    checks = []
    if system == "ttw":
        ext = cat.ttw(args.m, args.n)
        sys_ = ccm_extension(ext)
        box = dict(cat.TTW_BOX)
        t_build = time.perf_counter() - t0
        checks.append(_seed_check(ext.seed))
        checks.append(_bracket_check("bracket_H_K", ext.H, ext.K, ext.chart, box, args))
        checks.append(_bracket_check("bracket_H_L", ext.H, ext.seed.L, ext.chart, box, args))
        checks.append(
            _bracket_check(
                "bracket_Htilde_Ktilde", sys_.Htilde, sys_.Ktilde, ext.chart, box, args
            )
        )
        checks.append(_degree_check(ext))
        if args.drift:
            checks.append(
                _drift_check(
                    "drift_H_L_K",
                    ext.H,
                    [("H", ext.H), ("L", ext.seed.L), ("K", ext.K)],
                    ext.chart,
                    box,
                    args,
                    t_end=50.0,
                )
            )
    elif system == "pw":
        pw_sys = cat.pw(args.m, args.n)
        ext = pw_sys.source
        sys_ = pw_sys.ccm
        box = dict(cat.TTW_BOX)
        box_r = dict(box)
        box_r.update({"r": (0.5, 2.0), "p_r": (-2.0, 2.0)})
        t_build = time.perf_counter() - t0
        checks.append(_seed_check(ext.seed))
        checks.append(_bracket_check("bracket_H_K", ext.H, ext.K, ext.chart, box, args))
        checks.append(
            _bracket_check(
                "bracket_Htilde_Ktilde", sys_.Htilde, sys_.Ktilde, ext.chart, box, args
            )
        )
        checks.append(
            _bracket_check(
                "bracket_Htilde_Ktilde_r",
                pw_sys.Htilde_r,
                pw_sys.Ktilde_r,
                pw_sys.chart_r,
                box_r,
                args,
            )
        )
        checks.append(_route_check(sys_, box, args))
        checks.append(_degree_check(ext))
        if args.drift:
            checks.append(
                _drift_check(
                    "drift_Htilde_L_Ktilde",
                    sys_.Htilde,
                    [
                        ("Htilde", sys_.Htilde),
                        ("L", ext.seed.L),
                        ("Ktilde", sys_.Ktilde),
                    ],
                    ext.chart,
                    box,
                    args,
                    t_end=20.0,
                )
            )
    elif system == "caged":
        caged_sys = cat.caged(args.m, args.n)
        ext = caged_sys.ext
        sys_ = caged_sys.ccm
        box = dict(cat.CAGED_BOX)
        t_build = time.perf_counter() - t0
        checks.append(_seed_check(ext.seed))
        checks.append(_bracket_check("bracket_H_K", ext.H, ext.K, ext.chart, box, args))
        checks.append(_bracket_check("bracket_H_L", ext.H, ext.seed.L, ext.chart, box, args))
        checks.append(
            _bracket_check(
                "bracket_Htilde_Ktilde", sys_.Htilde, sys_.Ktilde, ext.chart, box, args
            )
        )
        checks.append(_route_check(sys_, box, args))
        checks.append(_degree_check(ext))
    elif system == "halfplane":
        hp = cat.halfplane(args.m, args.n)
        ext = hp.caged.ext
        box = dict(cat.HALFPLANE_BOX)
        t_build = time.perf_counter() - t0
        checks.append(_seed_check(ext.seed))
        checks.append(
            _bracket_check(
                "bracket_Htilde_Ktilde", hp.Htilde, hp.Ktilde, hp.chart, box, args
            )
        )
        checks.append(
            _bracket_check("bracket_Htilde_L", hp.Htilde, hp.L, hp.chart, box, args)
        )
        checks.append(_degree_check(ext))
    else:
        raise CliError(f"unknown system {args.system!r}")
    header = {
        "schema_version": SCHEMA_VERSION,
        "system": system,
        "m": args.m,
        "n": args.n,
        "mu": ext.mu,
        "nu": ext.nu,
    }
    timings = {
        "construct_s": t_build,
        "total_s": time.perf_counter() - t0,
    }
    return header, checks, timings


def _emit_report(header: dict, checks: list, timings: dict, fmt: str) -> int:
    all_passed = all(c["passed"] for c in checks)
    doc = dict(header)
    doc["checks"] = checks
    doc["all_passed"] = all_passed
    doc["timings"] = timings
    if fmt == "json-report":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(
            f"system {header['system']} (m,n)=({header['m']},{header['n']}) "
            f"(mu,nu)=({header['mu']},{header['nu']})"
        )
        for c in checks:
            status = "PASS" if c["passed"] else "FAIL"
            extra = ""
            stats = c.get("stats", {})
            if "normalized_max" in stats:
                extra = f" normalized_max={stats['normalized_max']:.3e}"
            elif "momentum_degree" in stats:
                extra = (
                    f" degree={stats['momentum_degree']}"
                    f" expected={stats['expected']}"
                )
            print(f"  {c['name']}: {status} [{c.get('tier', '-')}]" + extra)
        print("all checks passed" if all_passed else "some checks FAILED")
    return 0 if all_passed else 1


# ---------------------------------------------------------------------------
# show


def _show_objects(args) -> dict:
    """Construct the requested system and return name -> expression text."""
    what = args.what
    fmt = "latex" if args.format == "latex" else "plaintext"

    def build_ccm(ext):
        return ccm_extension(ext)

    if args.system in ("ttw", "caged"):
        ext = cat.ttw(args.m, args.n) if args.system == "ttw" else cat.caged(args.m, args.n).ext
        objects = {
            "L": lambda: ext.seed.L,
            "G": lambda: ext.seed.G,
            "H": lambda: ext.H,
            "K": lambda: ext.K,
            "alpha": lambda: ext.structural.alpha,
            "gamma": lambda: ext.structural.gamma,
            "delta": lambda: ext.structural.delta,
            "f": lambda: ext.structural.f,
        }
        for k in range(1, ext.nu + 1):
            objects[f"G{k}"] = (lambda kk: lambda: g_recursion(ext.seed, kk))(k)
        ccm_objects = {
            "Hhat": lambda: build_ccm(ext).Hhat,
            "Htilde": lambda: build_ccm(ext).Htilde,
            "U": lambda: build_ccm(ext).U,
            "Ktilde": lambda: build_ccm(ext).Ktilde,
            "Wtilde": lambda: build_ccm(ext).Wtilde,
        }
        objects.update(ccm_objects)
    elif args.system == "pw":
        pw_sys = cat.pw(args.m, args.n)
        ext = pw_sys.source
        objects = {
            "L": lambda: ext.seed.L,
            "G": lambda: ext.seed.G,
            "H": lambda: ext.H,
            "K": lambda: ext.K,
            "Hhat": lambda: pw_sys.ccm.Hhat,
            "Htilde": lambda: pw_sys.ccm.Htilde,
            "Ktilde": lambda: pw_sys.ccm.Ktilde,
            "Wtilde": lambda: pw_sys.ccm.Wtilde,
            "Htilde_r": lambda: pw_sys.Htilde_r,
            "Ktilde_r": lambda: pw_sys.Ktilde_r,
            "Wtilde_r": lambda: pw_sys.Wtilde_r,
        }
        for k in range(1, ext.nu + 1):
            objects[f"G{k}"] = (lambda kk: lambda: g_recursion(ext.seed, kk))(k)
    elif args.system == "halfplane":
        hp = cat.halfplane(args.m, args.n)
        objects = {
            "L": lambda: hp.L,
            "Htilde": lambda: hp.Htilde,
            "Ktilde": lambda: hp.Ktilde,
            "Wtilde": lambda: hp.caged.ccm.Wtilde,
        }
    else:
        raise CliError(f"unknown system {args.system!r}")

    if what not in objects:
        raise CliError(
            f"unknown object {what!r}; available: {', '.join(sorted(objects))}"
        )
    obj = objects[what]()
    if hasattr(obj, "px_coeff"):  # a transformed-operator bundle
        return {
            f"{what}.px_coeff": render(obj.px_coeff, fmt),
            f"{what}.L_coeff": render(obj.L_coeff, fmt),
            f"{what}.rest": render(obj.rest, fmt),
        }
    return {what: render(obj, fmt)}


# ---------------------------------------------------------------------------
# system files


_KIND_FACTORY = {
    "coordinate": coordinate,
    "momentum": momentum,
    "parameter": parameter,
}


def load_system_file(path: str):
    """Parse a TOML system file into (SeedSystem, ExtensionParams).

    Schema:
      [symbols]    name = "coordinate" | "momentum" | "parameter"
      [chart]      pairs = [["q", "p_q"], ...]
      [seed]       L = "<expr>", G = "<expr>", c = "<rational>", L0 = "<rational>"
      [extension]  m, n (integers), f0, and A (c = 0) or kappa (c != 0)
      [box]        name = [lo, hi] sampling intervals (optional)
    """
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    for section in ("symbols", "chart", "seed", "extension"):
        if section not in data:
            raise CliError(f"system file is missing the [{section}] section")

    table = SymbolTable()
    for name, kind in data["symbols"].items():
        if kind not in _KIND_FACTORY:
            raise CliError(f"symbol {name!r} has unknown kind {kind!r}")
        table.declare(_KIND_FACTORY[kind](name))

    pairs = []
    for pair in data["chart"].get("pairs", []):
        if len(pair) != 2:
            raise CliError(f"chart pair {pair!r} must list [coordinate, momentum]")
        q, p = (table.lookup(nm) for nm in pair)
        if q is None or p is None:
            raise CliError(f"chart pair {pair!r} uses undeclared symbols")
        pairs.append((q, p))
    if not pairs:
        raise CliError("the [chart] section must declare at least one pair")
    chart = CanonicalChart(tuple(pairs))

    seed_sec = data["seed"]
    for key in ("L", "G"):
        if key not in seed_sec:
            raise CliError(f"the [seed] section is missing {key!r}")
    L = parse(str(seed_sec["L"]), table)
    G = parse(str(seed_sec["G"]), table)
    c = sp.Rational(str(seed_sec.get("c", 0)))
    L0 = sp.Rational(str(seed_sec.get("L0", 0)))
    box = {
        str(k): (float(v[0]), float(v[1])) for k, v in data.get("box", {}).items()
    }
    seed = SeedSystem(chart=chart, L=L, G=G, c=c, L0=L0, sample_box=box or None)

    ext_sec = data["extension"]
    kwargs = {}
    for key in ("f0", "A", "kappa"):
        if key in ext_sec:
            kwargs[key] = sp.Rational(str(ext_sec[key]))
    params = ExtensionParams(m=int(ext_sec["m"]), n=int(ext_sec["n"]), **kwargs)
    return seed, params


def _file_pipeline(args, with_ccm: bool) -> int:
    t0 = time.perf_counter()
    seed, params = load_system_file(args.file)
    checks = [_seed_check(seed)]
    expressions = {}
    header = {
        "schema_version": SCHEMA_VERSION,
        "system": args.file,
        "m": params.m,
        "n": params.n,
        "mu": None,
        "nu": None,
    }
    if checks[0]["passed"]:
        ext = extend(seed, params)
        header["mu"], header["nu"] = ext.mu, ext.nu
        expressions["H"] = render(ext.H)
        expressions["K"] = render(ext.K)
        checks.append(_degree_check(ext))
        if with_ccm:
            sys_ = ccm_extension(ext)
            expressions["Hhat"] = render(sys_.Hhat)
            expressions["Htilde"] = render(sys_.Htilde)
            expressions["Ktilde"] = render(sys_.Ktilde)
            checks.append(_route_check(sys_, dict(seed.sample_box or {}), args))
    timings = {"total_s": time.perf_counter() - t0}
    all_passed = all(c["passed"] for c in checks)
    doc = dict(header)
    doc["checks"] = checks
    doc["expressions"] = expressions
    doc["all_passed"] = all_passed
    doc["timings"] = timings
    if args.format == "json-report":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for name, text in expressions.items():
            print(f"{name} = {text}")
        for c in checks:
            print(f"  {c['name']}: {'PASS' if c['passed'] else 'FAIL'}")
        print("all checks passed" if all_passed else "some checks FAILED")
    return 0 if all_passed else 1


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p, with_system=True):
    if with_system:
        p.add_argument("--system", required=True, choices=sorted(cat.ENTRIES))
        p.add_argument("--m", type=int, required=True)
        p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument(
        "--format",
        choices=("text", "latex", "json-report"),
        default="text",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extham",
        description="extended Hamiltonians, their first integrals, and "
        "coupling-constant metamorphosis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cat = sub.add_parser("catalog", help="list built-in systems")
    p_cat.add_argument(
        "--format", choices=("text", "json-report"), default="text"
    )

    p_show = sub.add_parser("show", help="print a constructed expression")
    _add_common(p_show)
    p_show.add_argument("--what", default="K")

    p_verify = sub.add_parser("verify", help="run conservation checks")
    _add_common(p_verify)
    p_verify.add_argument("--drift", action="store_true")

    p_ext = sub.add_parser("extend", help="build an extension from a system file")
    p_ext.add_argument("--file", required=True)
    _add_common(p_ext, with_system=False)

    p_ccm = sub.add_parser("ccm", help="extension plus CCM from a system file")
    p_ccm.add_argument("--file", required=True)
    _add_common(p_ccm, with_system=False)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "catalog":
            entries = [
                {"id": e.id, "description": e.description}
                for e in (cat.ENTRIES[k] for k in sorted(cat.ENTRIES))
            ]
            if args.format == "json-report":
                print(
                    json.dumps(
                        {"schema_version": SCHEMA_VERSION, "systems": entries},
                        indent=2,
                        sort_keys=True,
                    )
                )
            else:
                for e in entries:
                    print(f"{e['id']}: {e['description']}")
            return 0
        if args.command == "show":
            for name, text in _show_objects(args).items():
                print(f"{name} = {text}")
            return 0
        if args.command == "verify":
            header, checks, timings = _verify_checks(args)
            return _emit_report(header, checks, timings, args.format)
        if args.command == "extend":
            return _file_pipeline(args, with_ccm=False)
        if args.command == "ccm":
            return _file_pipeline(args, with_ccm=True)
        raise CliError(f"unknown command {args.command!r}")
    except (CliError, SymexprError, ParseError, ExtensionError, CcmError,
            cat.CatalogError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

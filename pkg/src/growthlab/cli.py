"""growthlab command line: count, rotnum, census, geodesics, so3check, replay.

Every run writes its CSV outputs and a ``manifest.json`` into ``--out``.
``--check NAME`` (repeatable) evaluates acceptance criteria; the exit code
is 0 only when the run succeeds and every requested criterion passes.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from . import criteria as C
from .config import GeodesicParams, SolverParams, apply_overrides, defaults
from .reporting import (GoldenTable, OutputCollision, RunManifest, SchemaError, atomic_write, csv_text,
                        diff_golden, file_sha256)

log = logging.getLogger("growthlab")

DEFAULT_SEED = 20240601
THREADS_ENV = "GROWTHLAB_THREADS"

CHECKS = {
    "count": {"totient": 1, "window-scaling": 2, "psi-bounds": 3, "liminf": 4, "inclusion-exclusion": 5,
              "lemma34": 9},
    "rotnum": {"properties": 6},
    "census": {"constructive": 7, "growth": 8},
    "geodesics": {"conservation": 10, "section": 11, "conjugate": 12, "census": 13},
    "so3check": {"battery": 14},
}

PRESETS = {
    "conservation": (C.CONSERVATION_AXES, ""),
    "census": (C.CENSUS_AXES, C.CENSUS_CONFORMAL),
}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers

def _floats(text: str):
    return tuple(float(t) for t in text.split(","))


def _grid(text: str):
    parts = text.lower().replace(",", "x").split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"grid must look like 512x512, got {text!r}")
    return int(parts[0]), int(parts[1])


def _kv(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_config(path) -> dict:
    """Plain-text key=value file; '#' starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _split_overrides(raw: dict):
    """'orbits.tol=1e-9' style keys into per-section dicts."""
    sections = {"orbits": {}, "geodesics": {}}
    for key, value in raw.items():
        if "." not in key:
            raise UsageError(f"tolerance override {key!r} needs a section prefix (orbits. or geodesics.)")
        sec, name = key.split(".", 1)
        if sec not in sections:
            raise UsageError(f"unknown settings section {sec!r}")
        sections[sec][name] = value
    return sections


class Run:
    def __init__(self, args, subcommand: str):
        self.args = args
        self.out = Path(args.out or f"runs/{subcommand}")
        self.force = args.force
        self.manifest = RunManifest(subcommand, {}, args.seed, list(args.argv))
        self.ok = True
        self.seeds = {}

    def write(self, name: str, text: str):
        path = atomic_write(self.out / name, text, self.force)
        self.manifest.outputs[name] = file_sha256(path)
        return path

    def seed(self, name: str, default: int) -> int:
        """Seed for one randomized check; the value used is recorded in the manifest."""
        s = default if self.args.seed is None else self.args.seed % 2 ** 32
        self.seeds[name] = s
        return s

    def criterion(self, outcome):
        self.manifest.record(outcome)
        print(outcome.line())
        self.ok &= outcome.passed

    def finish(self, params: dict) -> int:
        self.manifest.params = dict(params, seeds=self.seeds)
        if self.manifest.seed is None and self.seeds:
            self.manifest.seed = dict(self.seeds)
        self.manifest.duration = time.time() - self.manifest.started
        atomic_write(self.out / "manifest.json", self.manifest.to_json(), self.force)
        return 0 if self.ok else 1


def _checks(args, subcommand):
    names = []
    for item in args.check or []:
        names.extend(n.strip() for n in item.split(",") if n.strip())
    table = CHECKS[subcommand]
    if "all" in names:
        names = list(table)
    unknown = [n for n in names if n not in table]
    if unknown:
        raise UsageError(f"unknown check(s) {unknown} for {subcommand}; choose from {sorted(table)}")
    return names


def _solver(args) -> SolverParams:
    p = SolverParams()
    if getattr(args, "grid", None):
        p = p.with_(grid=args.grid)
    if getattr(args, "tol", None):
        p = p.with_(tol=args.tol)
    return apply_overrides(p, args.overrides["orbits"])


def _geo_params(args) -> GeodesicParams:
    return apply_overrides(GeodesicParams(), args.overrides["geodesics"])


def _params_record(args, **extra) -> dict:
    d = defaults()
    d["orbits"] = _solver(args).as_dict()
    d["geodesics"] = _geo_params(args).as_dict()
    d["options"] = {k: v for k, v in vars(args).items()
                    if k not in ("func", "argv", "overrides", "force", "out") and not callable(v)}
    d.update(extra)
    return json.loads(json.dumps(d, default=str))


# ---------------------------------------------------------------------------
# subcommands

def cmd_count(args) -> int:
    from .numtheory import FractionWindow, counting_report
    run = Run(args, "count")
    w = FractionWindow.parse(args.window)
    rep = counting_report(args.n_max, w, args.n0)
    run.write("count.csv", csv_text(["n", "phi", "phi_window", "Phi", "Psi"], rep.rows()))
    fns = {"totient": C.totient_asymptotics, "window-scaling": lambda: C.window_scaling(run.seed("window-scaling", 2)),
           "psi-bounds": C.psi_bound_check, "liminf": C.liminf_check,
           "inclusion-exclusion": lambda: C.inclusion_exclusion_check(run.seed("inclusion-exclusion", 5)),
           "lemma34": C.lemma34_oracle}
    for name in _checks(args, "count"):
        run.criterion(fns[name]())
    return run.finish(_params_record(args))


def _family(args):
    from .annulus import (BumpHamiltonian, LinearOmega, default_perturbed_twist, make_integrable_twist,
                          make_perturbed_twist, make_rigid_rotation)
    kv = _kv(args.params.split(";") if args.params else [])
    if args.family == "rigid":
        return make_rigid_rotation(float(kv.pop("alpha", "0.5")))
    if args.family == "twist":
        return make_integrable_twist(LinearOmega(float(kv.pop("a", "-0.3")), float(kv.pop("b", "0.4"))))
    if args.family == "perturbed":
        if not kv:
            return default_perturbed_twist()
        eps = float(kv.pop("epsilon", "0.05"))
        omega = LinearOmega(float(kv.pop("a", "-0.3")), float(kv.pop("b", "0.4")))
        if "mode" in kv:
            H = BumpHamiltonian(mode=int(kv.pop("mode")))
            fmap = make_perturbed_twist(omega, H, eps)
        else:
            from .annulus import default_hamiltonian
            fmap = make_perturbed_twist(omega, default_hamiltonian(), eps)
        if kv:
            raise UsageError(f"unknown family parameters {sorted(kv)}")
        return fmap
    raise UsageError(f"unknown family {args.family!r}")


def cmd_rotnum(args) -> int:
    from .annulus import rotation_numbers
    run = Run(args, "rotnum")
    fmap = _family(args)
    if args.points:
        pts = [_floats(p) for item in args.points for p in item.split(";")]
    else:
        rng = np.random.default_rng(run.seed("points", DEFAULT_SEED))
        pts = list(zip(rng.uniform(0, 1, args.random), rng.uniform(0.05, 0.95, args.random)))
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    est = rotation_numbers(fmap, xs, ys, args.iters)
    rows = [dict(seed=[float(x), float(y)], **e.as_dict()) for x, y, e in zip(xs, ys, est)]
    run.write("rotnum.json", json.dumps({"family": fmap.family, "params": fmap.params, "estimates": rows},
                                        indent=1, default=str) + "\n")
    for name in _checks(args, "rotnum"):
        run.criterion(C.rotation_properties(run.seed("properties", 6)))
    return run.finish(_params_record(args))


def cmd_census(args) -> int:
    from .orbits import census, growth_fit
    run = Run(args, "census")
    fmap = _family(args)
    solver = _solver(args)
    c = census(fmap, args.q_max, args.n0, solver, threads=args.threads)
    header = ["n", "N_eq", "N_le", "N_le_coprime"]
    table = GoldenTable(header, [[str(v) for v in r] for r in c.rows()])
    run.write("census.csv", csv_text(header, c.rows()))
    orbits = {f"{p}/{q}": [o.as_dict() for o in c.orbits[(p, q)]] for (p, q) in sorted(c.orbits, key=lambda f: (f[1], f[0]))}
    run.write("orbits.json", json.dumps({"window": str(c.window), "complete": c.complete,
                                          "incomplete": [f"{p}/{q}" for p, q in c.incomplete],
                                          "diagnostics": {f"{p}/{q}": d for (p, q), d in c.diagnostics.items()},
                                          "orbits": orbits}, indent=1, default=float) + "\n")
    if not c.complete:
        print(f"census incomplete: {c.incomplete}", file=sys.stderr)
        run.ok = False
    if args.golden:
        golden = GoldenTable.load(args.golden)
        rep = diff_golden(table, golden)
        run.manifest.golden[str(args.golden)] = file_sha256(args.golden)
        for line in rep.lines():
            print("golden diff:", line)
        run.ok &= rep.clean
    for name in _checks(args, "census"):
        if name == "constructive":
            outcome, _ = C.constructive_census(args.q_max, solver)
            run.criterion(outcome)
        else:
            run.criterion(C.growth_exponents(c if args.q_max >= 12 else None))
    if c.complete and args.q_max >= 4:
        print("growth fit:", growth_fit(c, max(1, args.q_max // 4)).as_dict())
    return run.finish(_params_record(args))


def _metric(args):
    from .geodesics import EllipsoidMetric, EvenPolynomial
    if args.preset:
        axes, conformal = PRESETS[args.preset]
    else:
        axes, conformal = C.CONSERVATION_AXES, ""
    if args.axes:
        axes = _floats(args.axes)
    if args.conformal:
        conformal = Path(args.conformal).read_text()
    return EllipsoidMetric(axes, EvenPolynomial.parse(conformal))


def cmd_geodesics(args) -> int:
    from .geodesics import BirkhoffSection, geodesic_census
    from .geodesics.census import polyline
    run = Run(args, "geodesics")
    metric = _metric(args)
    gp = _geo_params(args)
    section = BirkhoffSection(metric, gp)
    summary = {"metric": metric.describe(), "delta": section.delta, "loop_plane": list(section.loop.plane),
               "loop_residual": section.loop.residual}
    for name in _checks(args, "geodesics"):
        axes, conf = metric.semi_axes, metric.conformal.to_text()
        if name == "conservation":
            run.criterion(C.geodesic_conservation(axes, run.seed("conservation", 10), conformal=conf))
        elif name == "section":
            run.criterion(C.section_validity(axes, run.seed("section", 11), samples=args.area_samples,
                                             conformal=conf))
        elif name == "conjugate":
            run.criterion(C.conjugate_claim(axes, conformal=conf))
    if not args.skip_census:
        t0 = time.time()
        c = geodesic_census(section, args.l_max, args.q_max_odd, _solver(args).with_(grid=gp.census_grid))
        run.write("geodesics.csv", csv_text(["l", "N(l)"], [(repr(l), n) for l, n in c.counting_function()]))
        for i, g in enumerate(c.geodesics):
            if g.length <= args.l_max:
                pts = polyline(section, g)
                run.write(f"polylines/geodesic_{i:03d}_q{g.period}.xyz",
                          "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts))
        summary.update(window=str(c.window), flight_band=list(c.flight_band), l_complete=c.l_complete,
                       duplicates=c.duplicates, incomplete=[f"{p}/{q}" for p, q in c.incomplete],
                       rejected=[g.as_dict() for g in c.rejected], geodesics=[g.as_dict() for g in c.geodesics],
                       fit=c.fit.as_dict() if c.fit else None,
                       fit_full_range=c.fit_full_range.as_dict() if c.fit_full_range else None)
        if c.rejected or c.incomplete:
            run.ok = False
        if "census" in _checks(args, "geodesics"):
            run.criterion(C.census_outcome(c, time.time() - t0))
        print(f"{len(c.geodesics)} closed geodesics up to period {args.q_max_odd}; "
              f"fit exponent {c.fit.exponent if c.fit else float('nan'):.3f}")
    elif "census" in _checks(args, "geodesics"):
        raise UsageError("--check census needs the census (drop --skip-census)")
    run.write("section.json", json.dumps(summary, indent=1, default=str) + "\n")
    return run.finish(_params_record(args))


def cmd_so3check(args) -> int:
    from .so3 import property_battery
    run = Run(args, "so3check")
    res = property_battery(args.samples, run.seed("battery", 0))
    run.write("so3.csv", csv_text(["identity", "max_residual"], [(k, repr(v)) for k, v in res.items()]))
    for name in _checks(args, "so3check") or ["battery"]:
        run.criterion(C.covering_battery(args.samples, run.seed("battery", 0)))
    return run.finish(_params_record(args))


def cmd_replay(args) -> int:
    """Re-run a stored manifest into a fresh directory and compare output hashes."""
    m = RunManifest.load(args.manifest)
    argv = list(m.argv)
    out = args.out or str(Path(args.manifest).parent / "replay")
    # drop the original --out/--force and point the rerun at the replay directory
    clean, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out=") or a == "--force":
            continue
        clean.append(a)
    clean += ["--out", out] + (["--force"] if args.force else [])
    print("replaying:", " ".join(shlex.quote(a) for a in clean))
    code = main(clean)
    replayed = RunManifest.load(Path(out) / "manifest.json")
    mismatched = [name for name, h in m.outputs.items() if replayed.outputs.get(name) != h]
    for name in mismatched:
        print(f"replay mismatch: {name}")
    if not mismatched:
        print(f"replay reproduced {len(m.outputs)} output file(s) bit for bit")
    return 0 if (code == 0 and not mismatched) else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="growthlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, checks=True, seed=True):
        p.add_argument("--out", help="output directory (default runs/<subcommand>)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        if seed:
            p.add_argument("--seed", type=int, help="seed for randomized sampling (default: each check's fixed seed)")
        p.add_argument("--threads", type=int, help=f"work-pool width (overrides ${THREADS_ENV})")
        p.add_argument("--config", help="plain-text key=value file of option defaults")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="tolerance override, e.g. orbits.tol=1e-9 or geodesics.step=0.02")
        if checks:
            p.add_argument("--check", action="append", help="acceptance check(s) to run; 'all' for every one")

    p = sub.add_parser("count", help="exact fraction counts in a rotation window")
    common(p)
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--window", default="0,1")
    p.add_argument("--n0", type=int)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("rotnum", help="rotation numbers of seed points under an annulus map")
    common(p, seed=False)
    p.add_argument("--family", choices=["rigid", "twist", "perturbed"], default="perturbed")
    p.add_argument("--params", help="family parameters, e.g. 'alpha=0.3' or 'a=-0.3;b=0.4;epsilon=0.05'")
    p.add_argument("--seed", dest="points", action="append", metavar="X,Y",
                   help="seed point (repeatable, or 'x,y;x,y'); default --random points")
    p.add_argument("--random", type=int, default=10, help="number of random seed points")
    p.add_argument("--rng-seed", dest="seed", type=int, help="seed for random points and checks")
    p.add_argument("--iters", type=int, default=10_000)
    p.set_defaults(func=cmd_rotnum)

    p = sub.add_parser("census", help="periodic-orbit census of an annulus map")
    common(p)
    p.add_argument("--family", choices=["rigid", "twist", "perturbed"], default="perturbed")
    p.add_argument("--params")
    p.add_argument("--q-max", type=int, default=8)
    p.add_argument("--n0", type=int)
    p.add_argument("--grid", type=_grid)
    p.add_argument("--tol", type=float)
    p.add_argument("--golden", help="golden census CSV to diff against")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("geodesics", help="Birkhoff section and closed-geodesic census on an ellipsoid")
    common(p)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--axes", help="a,b,c with a <= b <= c")
    p.add_argument("--conformal", help="file of 'i j k coef' rows: u = sum coef x^(2i) y^(2j) z^(2k)")
    p.add_argument("--l-max", type=float, default=math.inf)
    p.add_argument("--q-max-odd", type=int, default=9)
    p.add_argument("--skip-census", action="store_true")
    p.add_argument("--area-samples", type=int, default=1_000_000, help="Monte Carlo samples per area rectangle")
    p.set_defaults(func=cmd_geodesics)

    p = sub.add_parser("so3check", help="identities of the double cover S^3 -> SO(3)")
    common(p)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_so3check)

    p = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    p.add_argument("manifest")
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_replay)
    return parser


def _apply_config(parser, argv):
    """Fold --config key=value defaults into the parse; unknown keys are rejected."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    cfg = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.subcommand]
    dests = {a.dest for a in sub._actions}
    overrides = [f"{k}={v}" for k, v in cfg.items() if "." in k]
    options = {k.replace("-", "_"): v for k, v in cfg.items() if "." not in k}
    unknown = sorted(set(options) - dests)
    if unknown:
        raise UsageError(f"unknown config keys for {args.subcommand}: {unknown}")
    typed = {}
    for a in sub._actions:
        if a.dest in options:
            v = options[a.dest]
            typed[a.dest] = a.type(v) if a.type else (v.lower() in ("1", "true", "yes") if a.const is True else v)
    sub.set_defaults(**typed)
    args = parser.parse_args(argv)
    args.set = overrides + (args.set or [])
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        args.argv = argv
        if args.subcommand != "replay":
            args.overrides = _split_overrides(_kv(args.set))
            if args.threads:
                os.environ[THREADS_ENV] = str(args.threads)
        return args.func(args)
    except OutputCollision as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, SchemaError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

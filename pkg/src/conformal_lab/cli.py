"""Command-line front end: ``conformal-lab <subcommand> ...`` or ``python -m conformal_lab``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.  Errors are
reported as one JSON object on stderr.  Every output directory gets a
``manifest.json`` recording how each artifact in it was produced; the
``replay`` subcommand reruns those commands into another directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .beltrami import beltrami_residual, ellipticity_sample, fit_holomorphic, level_relation, \
    level_solve_array, monotonicity_check, quasiregularity_of_difference
from .boundary import format_boundary, parse_boundary
from .distortion import distortion_of, duality_report
from .errors import ConformalLabError, FormatError
from .hopf import hopf_field, identity_check_26
from .mesh import build_disk_mesh, read_map, write_map, write_mesh
from .minimizer import MinimizeConfig, minimize, restart_seeds, uniqueness_probe
from .oracles import harmonic_extension_fem, linear_map, mobius_map, poisson_quadrature, rotation_map
from .profile import power_profile
from .variation import inner_variation, random_test_field, weak_form_15_residual, weak_form_18_residual

NUMERICAL = ("StallError", "InadmissibleMapError", "InitError", "CoverageError", "CompositionError",
             "GeometryError", "SingularArgumentError", "NotConvergedError")
DIAGNOSTICS = ("inner", "weak15", "weak18", "hopf", "beltrami")


class UsageError(Exception):
    pass


class NotConvergedError(ConformalLabError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- output helpers ------------------------------------------------------------

def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    path.write_text(buf.getvalue())


def record_manifest(out_dir: Path, args, argv, artifacts, seeds: dict, started: float) -> None:
    """Add or replace this command's entry in ``out_dir/manifest.json``."""
    path = out_dir / "manifest.json"
    manifest = {"library_version": __version__, "runs": {}}
    if path.exists():
        try:
            manifest = json.loads(path.read_text())
        except json.JSONDecodeError:
            pass
    key = args.command + ":" + ",".join(sorted(artifacts))
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    previous = manifest["runs"].get(key)
    order = previous["order"] if previous else 1 + max((r.get("order", 0) for r in manifest["runs"].values()),
                                                       default=0)
    manifest["runs"][key] = {
        "order": order,
        "argv": list(argv),
        "command_line": shlex.join(["conformal-lab", *argv]),
        "config": config,
        "seeds": seeds,
        "mesh_level": config.get("level"),
        "profile": f"power:p={config['p']}" if config.get("p") is not None else None,
        "boundary": config.get("boundary"),
        "artifacts": sorted(artifacts),
        "wall_clock_s": time.time() - started,
        "library_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    manifest["library_version"] = __version__
    dump_json(manifest, path)


def _out_file(path_str: str) -> tuple[Path, str]:
    p = Path(path_str)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p.parent, p.name


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("CONFORMAL_LAB_THREADS")
    return max(1, int(env)) if env else 1


# -- subcommands ---------------------------------------------------------------

def cmd_mesh(args, argv, started):
    mesh = build_disk_mesh(args.level)
    out_dir, name = _out_file(args.out)
    write_mesh(mesh, out_dir / name)
    record_manifest(out_dir, args, argv, [name], {}, started)
    print(json.dumps({"vertices": mesh.n_vertices, "triangles": mesh.n_triangles,
                      "boundary_vertices": len(mesh.boundary_ids), "out": str(out_dir / name)}))


def _run_minimize(args, out_dir: Path):
    mesh = build_disk_mesh(args.level)
    h0 = parse_boundary(args.boundary)
    cfg = MinimizeConfig(power_profile(args.p), grad_tol=args.tol, max_iters=args.max_iter,
                         seed=args.seed, direction=args.direction)
    artifacts = []
    if args.restarts > 1:
        rep = uniqueness_probe(mesh, h0, cfg, args.restarts, seed=args.seed, threads=_threads(args))
        res = rep.results[0]
        uq = rep.as_dict()
        uq["restart_seeds"] = restart_seeds(args.seed, args.restarts - 1)
        uq["quasiregularity"] = [
            quasiregularity_of_difference(mesh, res.map, r.map, args.p) for r in rep.results[1:]
        ]
        dump_json(uq, out_dir / "uniqueness.json")
        artifacts.append("uniqueness.json")
    else:
        res = minimize(mesh, h0, cfg)
    write_map(res.map, out_dir / "map.txt")
    result = {
        "p": args.p, "level": args.level, "boundary": format_boundary(h0),
        "energy": res.energy, "iterations": res.iterations, "final_grad_norm": res.final_grad_norm,
        "min_J": res.min_J, "converged": res.converged, "grad_tol": args.tol, "init": res.init,
        "n_vertices": mesh.n_vertices,
    }
    dump_json(result, out_dir / "result.json")
    write_csv(out_dir / "history.csv", ["iter", "energy", "grad_norm", "min_J"], res.history)
    artifacts += ["map.txt", "result.json", "history.csv"]
    return mesh, res, result, artifacts


def cmd_minimize(args, argv, started):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, res, result, artifacts = _run_minimize(args, out_dir)
    seeds = {"restarts": args.seed} if args.restarts > 1 else {}
    record_manifest(out_dir, args, argv, artifacts, seeds, started)
    print(json.dumps(result, sort_keys=True, default=_jsonable))
    if not res.converged:
        raise NotConvergedError(f"stopped after {res.iterations} iterations with gradient norm "
                                f"{res.final_grad_norm:.3e} > {args.tol:g}")


def _load_run(run_dir: Path):
    try:
        result = json.loads((run_dir / "result.json").read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"{run_dir} is not a minimize run directory") from exc
    mesh = build_disk_mesh(int(result["level"]))
    hmap = read_map(run_dir / "map.txt", mesh.ident)
    hmap.check_on(mesh)
    return mesh, hmap, result


def field_seeds(seed: int, n: int) -> list[int]:
    return restart_seeds(seed, n)


def run_diagnostics(mesh, hmap, p: float, tests, n_fields: int, seed: int, mode: str = "pl",
                    convention: str = "derived", threads: int = 1) -> list[dict]:
    """Residual rows {test, field_seed, residual} in a fixed order."""
    from concurrent.futures import ThreadPoolExecutor

    from .distortion import resample_inverse

    prof = power_profile(p)
    seeds = field_seeds(seed, n_fields)
    fields = [random_test_field(mesh, s) for s in seeds]
    inverse = resample_inverse(mesh, hmap) if "weak15" in tests else None

    def one(job):
        test, s, phi = job
        if test == "inner":
            iv = inner_variation(mesh, hmap, prof, phi)
            return {"test": test, "field_seed": s, "residual": abs(iv.derivative) / iv.energy,
                    "derivative": iv.derivative, "derivative_half_step": iv.derivative_half_step}
        if test == "weak15":
            return {"test": test, "field_seed": s, "mode": mode,
                    "residual": weak_form_15_residual(mesh, inverse, prof, phi, mode)}
        return {"test": test, "field_seed": s, "mode": mode, "convention": convention,
                "residual": weak_form_18_residual(mesh, hmap, p, phi, convention, mode)}

    jobs = [(t, s, phi) for t in tests if t in ("inner", "weak15", "weak18") for s, phi in zip(seeds, fields)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    if "hopf" in tests:
        hf = hopf_field(mesh, hmap, prof)
        rows.append({"test": "hopf", "field_seed": None, "residual": hf.L2_residual, **hf.summary(),
                     "identity_check": identity_check_26(mesh, hmap, prof)})
    if "beltrami" in tests:
        hf = hopf_field(mesh, hmap, prof)
        selfc = beltrami_residual(mesh, hmap, hf, p)
        cross = beltrami_residual(mesh, hmap, fit_holomorphic(mesh, hf.Phi, 6), p)
        rows.append({"test": "beltrami_self", "field_seed": None, "residual": selfc.max_residual,
                     **selfc.summary()})
        rows.append({"test": "beltrami_cross", "field_seed": None, "residual": cross.L2_residual,
                     **cross.summary()})
    return rows


def _parse_tests(text: str):
    tests = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in tests if t not in DIAGNOSTICS]
    if bad:
        raise UsageError(f"unknown diagnostic(s) {bad}; choose from {list(DIAGNOSTICS)}")
    return tests


def cmd_diagnose(args, argv, started):
    mesh, hmap, result = _load_run(Path(args.run))
    rows = run_diagnostics(mesh, hmap, float(result["p"]), _parse_tests(args.tests), args.n_fields,
                           args.seed, args.mode, args.convention, _threads(args))
    text = json.dumps(rows, indent=2, sort_keys=True, default=_jsonable)
    if args.out:
        out_dir, name = _out_file(args.out)
        (out_dir / name).write_text(text + "\n")
        record_manifest(out_dir, args, argv, [name], {"fields": args.seed}, started)
    print(text)


def cmd_duality(args, argv, started):
    mesh, hmap, result = _load_run(Path(args.run))
    rep = duality_report(mesh, hmap, power_profile(float(result["p"])))
    text = json.dumps(rep, indent=2, sort_keys=True, default=_jsonable)
    if args.out:
        out_dir, name = _out_file(args.out)
        (out_dir / name).write_text(text + "\n")
        record_manifest(out_dir, args, argv, [name], {}, started)
    print(text)


def cmd_levelcurve(args, argv, started):
    if not args.x_max > args.x_min > 0:
        raise UsageError("need 0 < x-min < x-max")
    if args.n < 2:
        raise UsageError("need n >= 2")
    x = np.linspace(args.x_min, args.x_max, args.n)
    y = level_solve_array(args.p, args.k, x)
    ok = np.isfinite(y)
    out_dir, name = _out_file(args.out)
    write_csv(out_dir / name, ["x", "y"], zip(x[ok], y[ok]))
    artifacts = [name]
    summary = {
        "p": args.p, "k": args.k, "points": int(ok.sum()), "skipped": int((~ok).sum()),
        "max_relation_residual": float(np.max(np.abs(level_relation(args.p, args.k, x[ok], y[ok]))))
        if ok.any() else None,
    }
    if args.report:
        mono = monotonicity_check(args.p, args.k, x[ok])
        summary["monotonicity_passed"] = mono.passed
        rname = Path(args.report).name
        dump_json({**summary, "monotonicity": mono.as_dict()}, out_dir / rname)
        artifacts.append(rname)
    record_manifest(out_dir, args, argv, artifacts, {}, started)
    print(json.dumps(summary, sort_keys=True))


def cmd_ellipticity(args, argv, started):
    rep = ellipticity_sample(args.p, args.n, args.seed, n_theta_tuples=args.theta_tuples,
                             threads=_threads(args), k_convention=args.k_convention)
    out_dir, name = _out_file(args.out)
    dump_json(rep, out_dir / name)
    record_manifest(out_dir, args, argv, [name], {"samples": args.seed}, started)
    print(json.dumps(rep, sort_keys=True))
    if rep["violations"] or rep["theta_fail"]:
        raise NotConvergedError(f"{rep['violations']} bound violations, {rep['theta_fail']} theta-grid failures")


def cmd_oracle(args, argv, started):
    mesh = build_disk_mesh(args.level)
    if args.kind == "poisson":
        om = poisson_quadrature(mesh, parse_boundary(args.boundary), args.n_quad)
    elif args.kind == "fem":
        om = harmonic_extension_fem(mesh, parse_boundary(args.boundary))
    elif args.kind == "mobius":
        om = mobius_map(mesh, complex(args.a.replace("i", "j")), args.alpha)
    elif args.kind == "rotation":
        om = rotation_map(mesh, args.alpha)
    else:
        om = linear_map(mesh, complex(args.c.replace("i", "j")))
    out_dir, name = _out_file(args.out)
    write_map(om, out_dir / name)
    record_manifest(out_dir, args, argv, [name], {}, started)
    f = distortion_of(mesh, om)
    print(json.dumps({"kind": om.kind, "n_vertices": mesh.n_vertices, "min_J": float(f.J.min()),
                      "max_K": float(f.K.max())}, sort_keys=True))


def cmd_all(args, argv, started):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh, res, result, artifacts = _run_minimize(args, out_dir)
    rows = run_diagnostics(mesh, res.map, args.p, list(DIAGNOSTICS), args.n_fields, args.seed,
                           args.mode, "derived", _threads(args))
    dump_json(rows, out_dir / "diagnose.json")
    dual = duality_report(mesh, res.map, power_profile(args.p))
    dump_json(dual, out_dir / "duality.json")

    def worst(test):
        vals = [r["residual"] for r in rows if r["test"] == test]
        return max(vals) if vals else None

    pipeline = {
        "boundary": result["boundary"], "p": args.p, "level": args.level,
        "converged": res.converged, "energy": res.energy, "min_J": res.min_J,
        "duality_gap": dual["duality_gap"],
        "hopf_L2_residual": worst("hopf"),
        "inner_variation_max_relative": worst("inner"),
        "weak15_max_residual": worst("weak15"),
        "weak18_max_residual": worst("weak18"),
        "beltrami_self_max_residual": worst("beltrami_self"),
    }
    dump_json(pipeline, out_dir / "pipeline.json")
    artifacts += ["diagnose.json", "duality.json", "pipeline.json"]
    record_manifest(out_dir, args, argv, artifacts, {"fields": args.seed}, started)
    print(json.dumps(pipeline, sort_keys=True, default=_jsonable))
    if not res.converged:
        raise NotConvergedError("minimization did not converge")


def cmd_replay(args, argv, started):
    """Rerun every command recorded in a manifest with outputs redirected to --out-dir."""
    manifest = json.loads(Path(args.manifest).read_text())
    dest = Path(args.out_dir)
    dest.mkdir(parents=True, exist_ok=True)
    codes = []
    src_dir = Path(args.manifest).resolve().parent
    for run in sorted(manifest["runs"].values(), key=lambda r: r.get("order", 0)):
        old = list(run["argv"])
        new = []
        i = 0
        while i < len(old):
            tok = old[i]
            if tok in ("--out", "--report") and i + 1 < len(old):
                target = Path(old[i + 1])
                new += [tok, str(dest if tok == "--out" and target.suffix == "" else dest / target.name)]
                i += 2
                continue
            if tok == "--run" and i + 1 < len(old) and Path(old[i + 1]).resolve() == src_dir:
                new += [tok, str(dest)]
                i += 2
                continue
            new.append(tok)
            i += 1
        if args.threads:
            new += ["--threads", str(args.threads)]
        codes.append(main(new))
    return max(codes) if codes else 0


# -- parser --------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, seed_default: int = 0):
    p.add_argument("--seed", type=int, default=seed_default, help="root seed for all random substreams")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (falls back on CONFORMAL_LAB_THREADS, then 1)")
    p.add_argument("--config", default=None, help="key=value file; explicit flags win")


def _minimize_flags(p):
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--boundary", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--direction", choices=("lbfgs", "sobolev", "diagonal"), default="lbfgs")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="conformal-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("mesh", help="write the canonical disk mesh")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("minimize", help="minimize the conformal energy for a boundary homeomorphism")
    _minimize_flags(p)
    _common(p)
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("diagnose", help="stationarity and Hopf diagnostics for a minimize run")
    p.add_argument("--run", required=True)
    p.add_argument("--tests", default="inner,weak15,weak18")
    p.add_argument("--n-fields", type=int, default=10)
    p.add_argument("--mode", choices=("pl", "smooth"), default="pl")
    p.add_argument("--convention", choices=("derived", "verbatim"), default="derived")
    p.add_argument("--out", default=None)
    _common(p, 11)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("duality", help="compare E*(h) with E(h^-1) for a minimize run")
    p.add_argument("--run", required=True)
    p.add_argument("--out", default=None)
    _common(p)
    p.set_defaults(func=cmd_duality)

    p = sub.add_parser("levelcurve", help="sample the level curve y = A_k(x)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--x-min", type=float, required=True)
    p.add_argument("--x-max", type=float, required=True)
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--report", default=None, help="also write a monotonicity report (JSON name)")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_levelcurve)

    p = sub.add_parser("ellipticity", help="random check of the Lipschitz bound of B")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--theta-tuples", type=int, default=10_000)
    p.add_argument("--k-convention", choices=("scaled", "raw"), default="scaled")
    p.add_argument("--out", required=True)
    _common(p, 42)
    p.set_defaults(func=cmd_ellipticity)

    p = sub.add_parser("oracle", help="write a reference map")
    p.add_argument("--kind", choices=("poisson", "fem", "mobius", "rotation", "linear"), required=True)
    p.add_argument("--boundary", default="identity")
    p.add_argument("--level", type=int, default=5)
    p.add_argument("--n-quad", type=int, default=4096)
    p.add_argument("--a", default="0")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--c", default="0")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("all", help="minimize, diagnose and duality for one boundary")
    _minimize_flags(p)
    p.add_argument("--n-fields", type=int, default=10)
    p.add_argument("--mode", choices=("pl", "smooth"), default="pl")
    _common(p)
    p.set_defaults(func=cmd_all)

    p = sub.add_parser("replay", help="rerun the commands recorded in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_replay)
    return ap


def read_config(path: str) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise UsageError(f"{path}:{n}: expected key=value")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _parse(argv):
    ap = build_parser()
    path = _config_path(argv)
    command = next((t for t in argv if not t.startswith("-")), None)
    subparsers = ap._subparsers._group_actions[0].choices
    if path and command in subparsers:
        cfg = read_config(path)
        sp = subparsers[command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known - {"config"})
        if unknown:
            raise UsageError(f"unknown config keys {unknown}")
        for a in sp._actions:
            if a.dest in cfg:
                a.required = False
        sp.set_defaults(**cfg)
    args = ap.parse_args(argv)
    if args.command is None:
        raise UsageError("missing subcommand")
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.time()
    try:
        args = _parse(argv)
        code = args.func(args, argv, started)
        return int(code or 0)
    except UsageError as exc:
        return _fail(2, "UsageError", str(exc))
    except ConformalLabError as exc:
        name = type(exc).__name__
        details = getattr(exc, "diagnostics", None) or {}
        return _fail(3 if name in NUMERICAL else 2, name, str(exc), details)
    except (ValueError, FileNotFoundError) as exc:
        return _fail(2, type(exc).__name__, str(exc))


def _fail(code: int, kind: str, message: str, details=None) -> int:
    err = {"error": kind, "exit_code": code, "message": message}
    if details:
        err["details"] = details
    sys.stderr.write(json.dumps(err, sort_keys=True, default=_jsonable) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())

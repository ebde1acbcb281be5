"""Command line interface.

Exit codes: 0 success, 2 partial failure (a solve hit a limit, crossover did
not reach an optimal basis, or some benchmark instances were excluded),
3 invalid input.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional

from . import bench
from .corner_push import CornerPushConfig, run_corner_push, trajectory_csv
from .crossover import CrossoverConfig, CrossoverStatus, run_crossover
from .instance_gen import (FAMILIES, GenSpec, certificate_residual, degenerate_suite,
                           generate_instance, random_suite)
from .lp_model import Tolerances
from .mps_io import (FORMAT_VERSION, MPSFormatError, SolutionFile, read_model, write_json,
                     write_mps, write_solution)
from .pdhg import PdhgConfig, solve_pdhg

EXIT_OK, EXIT_PARTIAL, EXIT_INPUT = 0, 2, 3

logger = logging.getLogger("cornerpush")


class InputError(Exception):
    """Bad user input; maps to exit code 3."""


def load_config(path: Optional[str]) -> dict:
    """Read a TOML or JSON config file (by extension) into a dict."""
    if not path:
        return {}
    try:
        if path.lower().endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"config {path} must hold a table/object")
    return data


def _pick(args, cfg: dict, name: str, default):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return cfg.get(name, default)


def _load_model(path):
    try:
        return read_model(path)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except (MPSFormatError, ValueError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    lp = _load_model(args.file)
    eps_rel = float(_pick(args, cfg, "eps_rel", 1e-6))
    eps_abs = float(_pick(args, cfg, "eps_abs", 1e-6))
    seed = int(_pick(args, cfg, "seed", 0))
    time_limit = float(_pick(args, cfg, "time_limit", 120.0))
    max_iters = int(_pick(args, cfg, "max_iters", 200_000))
    corner = bool(args.corner_push or cfg.get("corner_push", False))
    obj_scale = float(_pick(args, cfg, "obj_scale", 1.0))
    tol = Tolerances(eps_rel=eps_rel, eps_abs=eps_abs, time_limit_sec=time_limit,
                     max_iters=max_iters)
    pres = solve_pdhg(lp, PdhgConfig(tol=tol, seed=seed))
    out = {"pdhg_status": pres.status.value, "pdhg_iters": pres.iterations,
           "pdhg_time": f"{pres.wall_time:.6f}"}
    it = pres.iterate
    iterations = {"pdhg": pres.iterations}
    times = {"pdhg": pres.wall_time}
    ok = pres.converged
    if corner:
        if not pres.converged:
            print("corner push skipped: PDHG did not converge", file=sys.stderr)
        else:
            cres = run_corner_push(lp, pres, CornerPushConfig(
                eps_abs=eps_abs, eps_rel=eps_rel, obj_scale=obj_scale, seed=seed,
                max_iters=max_iters, time_limit_sec=time_limit))
            it = cres.iterate
            ok = ok and cres.converged
            out.update(corner_status=cres.status.value, corner_iters=cres.iterations,
                       off_bound_before=cres.off_bound_before,
                       off_bound_after=cres.off_bound_after)
            iterations["corner"] = cres.iterations
            times["corner"] = cres.wall_time
            if args.trajectory_out:
                with open(args.trajectory_out, "w", encoding="utf-8", newline="") as fh:
                    fh.write(trajectory_csv(cres))
    status = pres.status.value
    if not args.no_crossover:
        xres = run_crossover(lp, it, CrossoverConfig(eps_abs=eps_abs))
        for line in xres.log_lines():
            print(line)
        it = xres.iterate
        status = xres.status.value
        ok = ok and xres.status is CrossoverStatus.OPTIMAL_BASIS
        out.update(crossover_status=status, primal_pushes=xres.primal_pushes,
                   dual_pushes=xres.dual_pushes, cleanup_pivots=xres.cleanup_pivots)
        iterations.update(primal_pushes=xres.primal_pushes, dual_pushes=xres.dual_pushes,
                          cleanup_pivots=xres.cleanup_pivots)
        times["crossover"] = xres.total_time
    out["objective"] = repr(lp.user_objective(it.x))
    print(" ".join(f"{k}={v}" for k, v in out.items()))
    if args.sol_out:
        sol = SolutionFile.from_iterate(lp, it, status=status, iterations=iterations,
                                        phase_times=times,
                                        metadata={"model": lp.name, "corner_push": corner,
                                                  "seed": seed, "eps_rel": eps_rel})
        write_solution(sol, args.sol_out)
    return EXIT_OK if ok else EXIT_PARTIAL


def cmd_gen(args) -> int:
    if args.family not in FAMILIES:
        raise InputError(f"unknown family {args.family!r}; expected one of {', '.join(FAMILIES)}")
    try:
        if args.count is not None:
            if args.family in ("random_dense", "random_sparse"):
                lo, hi = args.m_range or (5, 40)
                specs = random_suite(args.count, (lo, hi), seed=args.seed, family=args.family,
                                     knob=args.knob if args.knob is not None else 0.0)
            else:
                lo, hi = args.m_range or (50, 200)
                specs = degenerate_suite(args.count, (lo, hi),
                                         knob=args.knob if args.knob is not None else 0.8,
                                         seed=args.seed, family=args.family)
        else:
            if args.m is None:
                raise InputError("gen needs --m (or --count for a suite)")
            specs = [GenSpec(args.family, args.m, args.n,
                             args.knob if args.knob is not None else 0.8, args.seed,
                             args.density)]
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    os.makedirs(args.out_dir, exist_ok=True)
    manifest = []
    for spec in specs:
        inst = generate_instance(spec)
        base = os.path.join(args.out_dir, spec.instance_id)
        write_mps(inst.lp, base + ".mps")
        write_json(inst.lp, base + ".json")
        names = inst.lp.col_names or tuple(f"C{j}" for j in range(inst.lp.num_cols))
        cert = {
            "format_version": FORMAT_VERSION,
            "kind": "certificate",
            "instance": spec.instance_id,
            "spec": {"family": spec.family, "m": spec.m, "n": spec.n,
                     "degeneracy_knob": spec.degeneracy_knob, "seed": spec.seed,
                     "density": spec.density},
            "x": dict(zip(names, map(float, inst.certificate))),
            "residual": certificate_residual(inst),
            "optimal_value": inst.optimal_value,
            "face_dimension": inst.face_dimension,
        }
        with open(base + ".cert.json", "w", encoding="utf-8") as fh:
            json.dump(cert, fh, indent=1)
            fh.write("\n")
        manifest.append({"path": spec.instance_id + ".mps"})
        print(base + ".mps")
    with open(os.path.join(args.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump({"instances": manifest}, fh, indent=1)
        fh.write("\n")
    return EXIT_OK


def read_manifest(path: str) -> tuple[list, dict]:
    """Instances and config overrides from a manifest (JSON or TOML) or a directory.

    Manifest entries are model paths (relative to the manifest) or generator
    specs ``{family, m, n, degeneracy_knob, seed, density}``. A ``suite``
    table ``{kind, count, seed, m_min, m_max, knob, family}`` expands to a
    generated suite.
    """
    if os.path.isdir(path):
        files = sorted(f for f in os.listdir(path)
                       if f.lower().endswith(".mps")
                       or (f.lower().endswith(".json") and not f.endswith(".cert.json")
                           and f != "manifest.json"))
        if not files:
            raise InputError(f"no .mps or .json models in {path}")
        # prefer the MPS copy when both formats exist
        stems = {}
        for f in files:
            stem = f.rsplit(".", 1)[0]
            if stem not in stems or f.lower().endswith(".mps"):
                stems[stem] = f
        return [os.path.join(path, stems[s]) for s in sorted(stems)], {}
    if not os.path.exists(path):
        raise InputError(f"no such file or directory: {path}")
    data = load_config(path)
    root = os.path.dirname(os.path.abspath(path))
    instances: list = []
    try:
        for entry in data.get("instances", []):
            if isinstance(entry, str):
                instances.append(os.path.join(root, entry))
            elif "path" in entry:
                instances.append(os.path.join(root, entry["path"]))
            else:
                instances.append(GenSpec(entry["family"], int(entry["m"]), entry.get("n"),
                                         float(entry.get("degeneracy_knob", 0.8)),
                                         int(entry.get("seed", 0)),
                                         float(entry.get("density", 0.1))))
        suite = data.get("suite")
        if suite:
            kind = suite.get("kind", "degenerate")
            rng = (int(suite.get("m_min", 50 if kind == "degenerate" else 5)),
                   int(suite.get("m_max", 200 if kind == "degenerate" else 40)))
            if kind == "degenerate":
                instances += degenerate_suite(int(suite["count"]), rng,
                                              float(suite.get("knob", 0.8)),
                                              int(suite.get("seed", 0)),
                                              suite.get("family", "degenerate_transport"))
            elif kind == "random":
                instances += random_suite(int(suite["count"]), rng, int(suite.get("seed", 0)),
                                          suite.get("family", "random_sparse"),
                                          float(suite.get("knob", 0.0)))
            else:
                raise InputError(f"unknown suite kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad manifest {path}: {exc}") from exc
    if not instances:
        raise InputError(f"manifest {path} lists no instances")
    return instances, dict(data.get("config", {}))


def cmd_bench(args) -> int:
    instances, mcfg = read_manifest(args.target)
    cfg = {**mcfg, **load_config(args.config)}
    scales = bench.OBJ_SCALE_SWEEP if args.obj_scale_sweep else tuple(
        cfg.get("obj_scales", (float(_pick(args, cfg, "obj_scale", 1.0)),)))
    try:
        bcfg = bench.BenchConfig(
            eps_rel=float(_pick(args, cfg, "eps_rel", 1e-6)),
            eps_abs=float(_pick(args, cfg, "eps_abs", 1e-6)),
            time_limit=float(_pick(args, cfg, "time_limit", 120.0)),
            max_iters=int(_pick(args, cfg, "max_iters", 200_000)),
            corner_enabled=not (args.no_corner or cfg.get("no_corner", False)),
            obj_scales=scales,
            seed=int(_pick(args, cfg, "seed", 0)),
            jobs=int(_pick(args, cfg, "jobs", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad bench config: {exc}") from exc
    res = bench.run_suite(instances, bcfg, out_dir=args.out)
    files = bench.emit_report(res.records, res.trajectories)
    bench.write_report(files, args.out)
    sys.stdout.write(files["summary.md"])
    failed = any(r.excluded for r in res.reports) or any(r.error for r in res.records)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_report(args) -> int:
    try:
        records = bench.read_records(args.records)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {args.records}") from exc
    except (ValueError, TypeError, KeyError) as exc:
        raise InputError(f"{args.records}: {exc}") from exc
    if not records:
        raise InputError(f"{args.records} holds no records")
    files = bench.emit_report(records)
    out = args.out or os.path.dirname(os.path.abspath(args.records))
    bench.write_report(files, out)
    sys.stdout.write(files["summary.md"])
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracle import simplex_solve

    lp = _load_model(args.file)
    res = simplex_solve(lp)
    obj = lp.user_objective(res.x) if res.optimal else None
    print(f"status={res.status} iterations={res.iterations} objective={obj!r}")
    return EXIT_OK if res.optimal else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cornerpush", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="{solve,gen,bench,report}")

    s = sub.add_parser("solve", help="PDHG, optional corner push, then crossover")
    s.add_argument("file", help="model in MPS or JSON format")
    s.add_argument("--corner-push", action="store_true")
    s.add_argument("--eps-rel", dest="eps_rel", type=float)
    s.add_argument("--eps-abs", dest="eps_abs", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--time-limit", dest="time_limit", type=float, help="seconds per PDHG phase")
    s.add_argument("--max-iters", dest="max_iters", type=int)
    s.add_argument("--obj-scale", dest="obj_scale", type=float)
    s.add_argument("--no-crossover", action="store_true")
    s.add_argument("--sol-out", help="write the solution as JSON")
    s.add_argument("--trajectory-out", help="write the corner-push trajectory CSV")
    s.add_argument("--config", help="TOML or JSON file with option defaults")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gen", help="write generated instances as MPS + JSON + certificate")
    g.add_argument("family", help=f"one of {', '.join(FAMILIES)}")
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--knob", type=float, help="degeneracy knob in [0, 1]")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--density", type=float, default=0.1)
    g.add_argument("--count", type=int, help="generate a seeded suite of this size")
    g.add_argument("--m-range", dest="m_range", type=int, nargs=2, metavar=("MIN", "MAX"))
    g.add_argument("--out-dir", dest="out_dir", default=".")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="run baseline and corner pipelines over a suite")
    b.add_argument("target", help="directory of models or a manifest (JSON/TOML)")
    b.add_argument("--time-limit", dest="time_limit", type=float, help="seconds per PDHG phase")
    b.add_argument("--jobs", type=int)
    b.add_argument("--obj-scale-sweep", action="store_true",
                   help=f"run the treatment at obj_scale in {bench.OBJ_SCALE_SWEEP}")
    b.add_argument("--obj-scale", dest="obj_scale", type=float)
    b.add_argument("--eps-rel", dest="eps_rel", type=float)
    b.add_argument("--eps-abs", dest="eps_abs", type=float)
    b.add_argument("--max-iters", dest="max_iters", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--no-corner", action="store_true", help="disable the treatment arm")
    b.add_argument("--out", default="bench_out")
    b.add_argument("--config", help="TOML or JSON file with option defaults")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="rebuild report files from a records CSV")
    r.add_argument("records")
    r.add_argument("--out", help="output directory (default: next to the CSV)")
    r.set_defaults(func=cmd_report)

    o = sub.add_parser("oracle")
    o.add_argument("file")
    o.set_defaults(func=cmd_oracle)
    # keep the debugging subcommand out of the help listing
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "oracle"]
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; report those as invalid input
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    for stream in (sys.stdout, sys.stderr):
        if hasattr(stream, "reconfigure"):
            stream.reconfigure(encoding="utf-8")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

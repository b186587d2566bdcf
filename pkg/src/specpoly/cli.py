"""Command-line entry point: ``specpoly {solve,render,verify,bench,corpus,sqrt-fit}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .pipeline import SolveReport, bench_tuple, format_bench, solve_scene, solve_tuple, warmup
from .polynomialize import EXPERIMENTAL_CHAINS, GATED_CHAINS, ChainType
from .rootfind import SolverConfig
from .scene import SceneError, Separators, load_scene

FIXTURES = Path(__file__).parent / "fixtures"
BENCH_FIXTURES = {"R": "mirror.yaml", "T": "interface.yaml", "RR": "periscope.yaml"}

EXIT_OK, EXIT_FAIL, EXIT_SCENE = 0, 1, 2


def _vec3(text: str) -> np.ndarray:
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}") from None
    if v.shape != (3,):
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}")
    return v


def _ids(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated triangle ids, got {text!r}") from None


def _resolution(text: str) -> tuple:
    try:
        w, h = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def _chains(text: str) -> tuple:
    return tuple(c.strip().upper() for c in text.split(",") if c.strip())


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--pieces", type=int, default=100, help="determinant scan pieces on [0, 1]")
    g.add_argument("--bisect-iters", type=int, default=10, help="bisection steps per scan bracket")
    g.add_argument("--bisect-tol", type=float, default=1e-9, help="root isolation tolerance")
    g.add_argument("--polish", choices=("on", "off", "auto"), default="auto",
                   help="Newton polish of located roots (auto: chains with refraction)")


def _config(args) -> SolverConfig:
    return SolverConfig(pieces=args.pieces, bisect_iters=args.bisect_iters, bisect_tol=args.bisect_tol,
                        polish=args.polish)


def _check_chains(chains, experimental: bool) -> None:
    allowed = GATED_CHAINS + (EXPERIMENTAL_CHAINS if experimental else ())
    for c in chains:
        if c not in allowed:
            extra = "" if experimental else " (pass --experimental-chains for RT/TR/TT)"
            raise ValueError(f"unsupported chain type {c!r}{extra}")


def _print_report(report: SolveReport, out) -> None:
    print(report.to_text(), file=out)


# --------------------------------------------------------------- solve


def cmd_solve(args, out=sys.stdout) -> int:
    scene = load_scene(args.scene)
    chains = _chains(args.chain)
    _check_chains(chains, args.experimental_chains)
    seps = scene.separators
    if args.x0 is not None or args.x_end is not None:
        if seps is None and (args.x0 is None or args.x_end is None):
            raise SceneError("scene has no separators; give both --x0 and --x-end")
        seps = Separators(args.x0 if args.x0 is not None else seps.x0,
                          args.x_end if args.x_end is not None else seps.x_end)
    if seps is None:
        raise SceneError("scene has no separators section and none were given")
    cfg = _config(args)
    warmup()  # keep JIT loading out of the printed phase timings
    if args.tuple is not None:
        if len(chains) != 1:
            raise ValueError("--tuple needs exactly one chain type")
        if any(i < 0 or i >= len(scene.triangles) for i in args.tuple):
            raise SceneError(f"tuple {list(args.tuple)} refers to missing specular triangles")
        tris = tuple(scene.triangles[i] for i in args.tuple)
        found, report = solve_tuple(seps, tris, chains[0], cfg, scene, args.tuple)
    else:
        found, report = solve_scene(scene, seps, chains, cfg, cull=not args.no_cull)
    print(f"{len(found)} admissible chain(s)", file=out)
    for ch in found:
        print(ch.describe(), file=out)
    _print_report(report, out)
    return EXIT_OK


# -------------------------------------------------------------- render


def cmd_render(args, out=sys.stdout) -> int:
    from .render import RenderJob, render, sidecar_path

    chains = _chains(args.chain)
    job = RenderJob(scene=args.scene, chains=chains, resolution=args.resolution, out=args.out,
                    cfg=_config(args), threads=args.threads, watchdog_ms=args.watchdog_ms,
                    experimental=args.experimental_chains, direct=not args.no_direct)
    t0 = time.perf_counter()
    res = render(job)
    h, w, _ = res.direct.shape
    print(f"rendered {w}x{h} in {time.perf_counter() - t0:.2f} s; lit pixels {int(res.lit_mask.sum())}; "
          f"watchdog aborts {len(res.timeouts)}", file=out)
    print(f"wrote {args.out} and {sidecar_path(args.out)}", file=out)
    _print_report(res.report, out)
    return EXIT_OK


# -------------------------------------------------------------- verify


def cmd_verify(args, out=sys.stdout) -> int:
    from .verify import SUITES, run_suite

    names = SUITES if args.suite == ["all"] else args.suite
    failed = []
    for name in names:
        res = run_suite(name, seed=args.seed, cases=args.cases, cfg=_config(args))
        print(json.dumps(res, sort_keys=True), file=out)
        if not res["passed"]:
            failed.append(name)
    print(json.dumps({"summary": {"suites": list(names), "failed": failed, "passed": not failed}}), file=out)
    return EXIT_FAIL if failed else EXIT_OK


# --------------------------------------------------------------- bench


def cmd_bench(args, out=sys.stdout) -> int:
    chains = _chains(args.chain)
    _check_chains(chains, args.experimental_chains)
    cfg = _config(args)
    rows = {}
    for name in chains:
        path = args.scene
        if path is None:
            if name not in BENCH_FIXTURES:
                raise ValueError(f"no built-in fixture for {name}; pass --scene")
            path = FIXTURES / BENCH_FIXTURES[name]
        scene = load_scene(path)
        if scene.separators is None:
            raise SceneError("bench needs a scene with separators")
        ids = args.tuple if args.tuple is not None else tuple(range(ChainType.parse(name).k))
        if any(i < 0 or i >= len(scene.triangles) for i in ids):
            raise SceneError(f"tuple {list(ids)} refers to missing specular triangles")
        tris = tuple(scene.triangles[i] for i in ids)
        rows[name] = bench_tuple(scene.separators, tris, name, cfg, repetitions=args.repetitions)
    print("median microseconds per tuple", file=out)
    print(format_bench(rows), file=out)
    return EXIT_OK


# ------------------------------------------------------ corpus, sqrt-fit


def cmd_corpus(args, out=sys.stdout) -> int:
    from .oracle import CORPUS_KINDS, regenerate_corpus

    kinds = _chains(args.kinds) if args.kinds else CORPUS_KINDS
    for p in regenerate_corpus(args.out, n_seeds=args.seeds, kinds=kinds):
        print(f"wrote {p}", file=out)
    return EXIT_OK


def cmd_sqrt_fit(args, out=sys.stdout) -> int:
    from .sqrtfit import regenerate_table

    approx = regenerate_table(args.out)
    err = approx.certify()
    print(f"pieces {approx.n_pieces}; certified max error {err:.3e} on 1e5 points", file=out)
    return EXIT_OK


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specpoly", description="Deterministic specular chain solver.")
    p.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one configuration and print the chains")
    s.add_argument("--scene", required=True)
    s.add_argument("--chain", default="R", help="comma separated chain types, e.g. R,RR")
    s.add_argument("--tuple", type=_ids, help="specular triangle ids, e.g. 0 or 0,1")
    s.add_argument("--x0", type=_vec3, help="camera-side separator x,y,z")
    s.add_argument("--x-end", type=_vec3, help="light-side separator x,y,z")
    s.add_argument("--no-cull", action="store_true", help="solve every tuple, skipping the plane-side cull")
    s.add_argument("--experimental-chains", action="store_true")
    _solver_flags(s)
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("render", help="render caustics and glints to PPM plus a float sidecar")
    r.add_argument("--scene", required=True)
    r.add_argument("--chain", default="R")
    r.add_argument("--resolution", type=_resolution, help="WxH, overrides the scene camera")
    r.add_argument("--out", required=True, help="output .ppm path; the sidecar gets .f64")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--watchdog-ms", type=float, default=50.0, help="per-pixel budget, 0 disables")
    r.add_argument("--no-direct", action="store_true", help="specular splats only")
    r.add_argument("--experimental-chains", action="store_true")
    _solver_flags(r)
    r.set_defaults(func=cmd_render)

    v = sub.add_parser("verify", help="run seeded property suites; JSON lines out")
    v.add_argument("--suite", nargs="+", default=["all"],
                   help="poly resultant rootfind oracle-R oracle-T oracle-RR, or all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=int, help="override the per-suite case count")
    _solver_flags(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="median per-phase timings in the Poly/Det/Sol layout")
    b.add_argument("--scene", help="scene with separators (default: built-in fixture per chain)")
    b.add_argument("--chain", default="R,T")
    b.add_argument("--tuple", type=_ids)
    b.add_argument("--repetitions", type=int, default=1000)
    b.add_argument("--experimental-chains", action="store_true")
    _solver_flags(b)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("corpus", help="regenerate the frozen oracle corpus")
    c.add_argument("--out", required=True, help="directory for corpus_<kind>.txt")
    c.add_argument("--seeds", type=int, default=50)
    c.add_argument("--kinds", help="comma separated subset of R,T,RR")
    c.set_defaults(func=cmd_corpus)

    q = sub.add_parser("sqrt-fit", help="refit the piecewise rational square root table")
    q.add_argument("--out", help="table path (default: the packaged table)")
    q.set_defaults(func=cmd_sqrt_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out=sys.stdout)
    except SceneError as exc:
        print(f"scene error: {exc}", file=sys.stderr)
        return EXIT_SCENE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

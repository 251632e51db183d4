"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 failed check or invariant.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import dump_json
from .concentration import (BOUND_KINDS, BoundSpec, alpha_auto, alpha_exact, alpha_lower, default_eps_grid,
                            profiles_to_csv, theoretical_bound)
from .exceptions import CapExceededError, InvariantError, ValidationError
from .fullgroup import approximate_by_bij, make_cylinder_space, random_full_group_element
from .groups import make_weighted_symmetric
from .length import LengthCertificate, stabilizer_chain, verify_certificate
from .observable import estimates_to_csv, h1li_estimate
from .recipes import list_recipes
from .runner import load_config, parse_space, recipe_config, resolve_threads, run

EXIT_OK, EXIT_VALIDATION, EXIT_CHECK = 0, 2, 3


def _grid(text):
    if text is None:
        return None
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise ValidationError(f"--eps-grid: cannot parse {text!r}") from None


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _emit(text: str, out_dir, filename: str) -> None:
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / filename).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    if args.recipe:
        cfg = recipe_config(args.recipe, args.seed or 0)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ValidationError("run needs a config file or --recipe NAME")
    manifest = run(cfg, out_dir=args.out_dir, seed=args.seed, threads=args.threads, eps_grid=_grid(args.eps_grid))
    for t in manifest.tasks:
        status = "ok" if t.passed else "FAILED " + ",".join(k for k, v in t.checks.items() if not v)
        print(f"{t.name}: {status} ({t.wall_time:.1f}s)")
    return EXIT_OK if manifest.passed else EXIT_CHECK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"{args.config}: valid ({len(cfg.tasks)} task(s))")
    return EXIT_OK


def cmd_recipes(args) -> int:
    for name, desc in list_recipes():
        print(f"{name:20s} {desc}")
    return EXIT_OK


def cmd_alpha(args) -> int:
    space = parse_space(args.space)
    grid = _grid(args.eps_grid)
    if grid is None:
        grid = default_eps_grid(space)
    seed = args.seed or 0
    if args.method == "exact":
        prof = alpha_exact(space, grid, threads=resolve_threads(args.threads))
    elif args.method == "lower":
        prof = alpha_lower(space, grid, budget=args.budget, seed=seed)
    else:
        prof = alpha_auto(space, grid, budget=args.budget, seed=seed)
    _emit(profiles_to_csv([prof]), args.out_dir, "alpha.csv")
    return EXIT_OK


def cmd_bound(args) -> int:
    spec = BoundSpec(args.kind, n=args.n, weights=_floats(args.weights) if args.weights else None,
                     length=args.length, diameters=_floats(args.diameters) if args.diameters else None,
                     C1=args.C1, C2=args.C2)
    grid = _grid(args.eps_grid)
    if grid is None:
        grid = default_eps_grid()
    for e in grid:
        print(f"{e:.17g},{theoretical_bound(spec, e):.17g}")
    return EXIT_OK


def cmd_length(args) -> int:
    if args.verify:
        cert = LengthCertificate.from_json(json.loads(Path(args.verify).read_text()))
        if not args.weights:
            raise ValidationError("--verify needs --weights to rebuild the space")
    else:
        if not args.weights:
            raise ValidationError("length needs --weights")
        cert = stabilizer_chain(_floats(args.weights))
    space = make_weighted_symmetric(_floats(args.weights))
    rep = verify_certificate(space, cert, seed=args.seed or 0)
    print(f"length={cert.length:.17g} verified={str(rep.passed).lower()}")
    for f in rep.failures[:10]:
        print("failure: level=%d blocks=(%d,%d) point=%d %s" % f)
    if args.out_dir and not args.verify:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        dump_json(cert.to_json(), Path(args.out_dir) / "certificate.json")
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_gromov(args) -> int:
    est = h1li_estimate(parse_space(args.x), parse_space(args.y), args.M, args.K, args.T, args.seed or 0)
    _emit(estimates_to_csv([est]), args.out_dir, "estimate.csv")
    return EXIT_OK


def cmd_approx(args) -> int:
    space = make_cylinder_space(args.N, args.p, lam=args.lam)
    rng = np.random.default_rng(args.seed or 0)
    ok = True
    for i in range(args.count):
        elem = random_full_group_element(rng, args.rank, args.extra_width)
        tr = approximate_by_bij(space, elem, args.eps, strict=False)
        ok &= tr.passed
        print(f"{i}: N1={tr.N1} N2={tr.N2} d_mu={tr.distance:.6g} bound={tr.intermediate_bound:.6g} "
              f"pass={str(tr.passed).lower()}")
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            dump_json(tr.to_json(), Path(args.out_dir) / f"trace_{i}.json")
    return EXIT_OK if ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
    common.add_argument("--out-dir", default=None)
    common.add_argument("--threads", type=int, default=None, help="worker threads (env MMCONC_THREADS)")
    common.add_argument("--eps-grid", default=None, help="comma-separated eps values")

    p = argparse.ArgumentParser(prog="mmconc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mmconc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common], help="run a config file or a built-in recipe")
    s.add_argument("config", nargs="?")
    s.add_argument("--recipe", default=None)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("validate", parents=[common], help="check a config without running it")
    s.add_argument("config")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("recipes", parents=[common], help="list built-in recipes")
    s.set_defaults(func=cmd_recipes)

    s = sub.add_parser("alpha", parents=[common], help="concentration profile of one space")
    s.add_argument("space", help="space spec, e.g. cube:4 or sym:0.5,0.3,0.2")
    s.add_argument("--method", choices=("auto", "exact", "lower"), default="auto")
    s.add_argument("--budget", type=int, default=1000)
    s.set_defaults(func=cmd_alpha)

    s = sub.add_parser("bound", parents=[common], help="evaluate a closed-form bound on an eps grid")
    s.add_argument("kind", choices=BOUND_KINDS)
    s.add_argument("--n", type=float)
    s.add_argument("--weights")
    s.add_argument("--length", type=float)
    s.add_argument("--diameters")
    s.add_argument("--C1", type=float)
    s.add_argument("--C2", type=float)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("length", parents=[common], help="build or verify a stabilizer-chain certificate")
    s.add_argument("--weights")
    s.add_argument("--verify", help="certificate JSON to verify")
    s.set_defaults(func=cmd_length)

    s = sub.add_parser("gromov", parents=[common], help="observable-distance estimate between two spaces")
    s.add_argument("x")
    s.add_argument("y")
    s.add_argument("--M", type=int, default=720)
    s.add_argument("--K", type=int, default=64)
    s.add_argument("--T", type=int, default=200)
    s.set_defaults(func=cmd_gromov)

    s = sub.add_parser("approx", parents=[common], help="approximate random full-group elements")
    s.add_argument("--N", type=int, default=12)
    s.add_argument("--p", type=float, default=0.5)
    s.add_argument("--lam", type=float, default=None)
    s.add_argument("--rank", type=int, default=3)
    s.add_argument("--extra-width", type=int, default=3)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--count", type=int, default=5)
    s.set_defaults(func=cmd_approx)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, CapExceededError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())

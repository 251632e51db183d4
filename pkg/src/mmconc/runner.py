"""Config-driven batch runs with reproducible seeding and digest manifests.

Configs are INI files.  ``[experiment]`` holds ``name``, ``seed`` and an
optional ``out_dir``; every ``[task.<name>]`` section is one task, run in
file order.  A task has either ``recipe = <built-in name>`` or
``op = alpha|bound|length|gromov|approx``; remaining keys are parameters,
parsed as Python literals when possible (``0.1,0.2`` is a tuple).

Space specs are ``family:args``::

    cube:4   usym:5   sym:0.5,0.3,0.2   l1:0.5,0.3,0.2   l1:0.5,0.5/3 (Z_3)
    circle:8   semidirect:8,3   point   scaled:2:cube:3   product:circle:8|cube:3
"""

from __future__ import annotations

import ast
import configparser
import hashlib
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from ._io import csv_text, dump_json
from ._validation import derive_seed
from .concentration import (BOUND_KINDS, PROFILE_HEADER, BoundSpec, alpha_auto, alpha_exact, alpha_lower,
                            default_eps_grid, theoretical_bound)
from .core import FiniteMMSpace, single_point_space
from .exceptions import MMConcError, ValidationError
from .fullgroup import approximate_by_bij, make_cylinder_space, random_full_group_element
from .groups import (make_circle, make_cube, make_direct_product, make_l1_group, make_scaled,
                     make_shift_semidirect, make_uniform_symmetric, make_weighted_symmetric)
from .length import stabilizer_chain, verify_certificate
from .observable import ESTIMATE_HEADER, h1li_estimate
from .recipes import RECIPES, get_recipe

OPS = ("recipe", "alpha", "bound", "length", "gromov", "approx")
OP_PARAMS = {
    "alpha": {"space", "method", "eps_grid", "budget", "exact_cap"},
    "bound": {"kind", "eps_grid", "n", "weights", "length", "diameters", "C1", "C2"},
    "length": {"weights"},
    "gromov": {"x", "y", "M", "K", "T"},
    "approx": {"N", "p", "lam", "rank", "extra_width", "eps", "count"},
}
OP_REQUIRED = {"alpha": {"space"}, "bound": {"kind"}, "length": {"weights"}, "gromov": {"x", "y"}, "approx": set()}


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def parse_space(spec: str) -> FiniteMMSpace:
    spec = spec.strip()
    if spec == "point":
        return single_point_space()
    family, _, args = spec.partition(":")
    try:
        if family == "cube":
            return make_cube(int(args))
        if family == "usym":
            return make_uniform_symmetric(int(args))
        if family == "sym":
            return make_weighted_symmetric(_floats(args))
        if family == "l1":
            w, _, m = args.partition("/")
            return make_l1_group(_floats(w), int(m) if m else 2)
        if family == "circle":
            return make_circle(int(args))
        if family == "semidirect":
            m, n = (int(t) for t in args.split(","))
            return make_shift_semidirect(m, n)
        if family == "scaled":
            s, _, inner = args.partition(":")
            return make_scaled(parse_space(inner), float(s))
        if family == "product":
            left, _, right = args.partition("|")
            return make_direct_product(parse_space(left), parse_space(right))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad arguments in space spec {spec!r}: {exc}") from None
    raise ValidationError(f"unknown space family {family!r} in {spec!r}")


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


@dataclass
class TaskConfig:
    name: str
    op: str
    params: dict
    recipe: Optional[str] = None


@dataclass
class ExperimentConfig:
    name: str
    seed: int
    tasks: list
    out_dir: Optional[str] = None
    echo: dict = field(default_factory=dict)


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ValidationError(f"{path}: cannot read config: {exc}") from None
    return config_from_parser(parser)


def config_from_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse config: {exc}") from None
    return config_from_parser(parser)


def config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    echo = {s: dict(parser[s]) for s in parser.sections()}
    if "experiment" not in parser:
        raise ValidationError("experiment: missing [experiment] section")
    exp = parser["experiment"]
    name = exp.get("name", "experiment")
    try:
        seed = int(exp.get("seed", "0"))
    except ValueError:
        raise ValidationError("experiment.seed: must be an integer") from None
    tasks = []
    for section in parser.sections():
        if section == "experiment":
            continue
        if not section.startswith("task."):
            raise ValidationError(f"{section}: unknown section (expected [task.<name>])")
        raw = dict(parser[section])
        tname = section[len("task."):]
        if "recipe" in raw:
            op, rec = "recipe", raw.pop("recipe")
        elif "op" in raw:
            op, rec = raw.pop("op"), None
        else:
            raise ValidationError(f"{section}: needs 'recipe' or 'op'")
        tasks.append(TaskConfig(tname, op, {k: _literal(v) for k, v in raw.items()}, rec))
    cfg = ExperimentConfig(name, seed, tasks, exp.get("out_dir"), echo)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise ValidationError naming the offending key."""
    seen = set()
    for t in cfg.tasks:
        path = f"task.{t.name}"
        if t.name in seen:
            raise ValidationError(f"{path}: duplicate task name")
        seen.add(t.name)
        if t.op not in OPS:
            raise ValidationError(f"{path}.op: unknown operation {t.op!r}; choose from {', '.join(OPS)}")
        if t.op == "recipe":
            if t.recipe not in RECIPES:
                raise ValidationError(f"{path}.recipe: unknown recipe {t.recipe!r}")
            allowed = set(RECIPES[t.recipe].defaults)
        else:
            allowed = OP_PARAMS[t.op]
            for key in OP_REQUIRED[t.op] - set(t.params):
                raise ValidationError(f"{path}.{key}: required for op {t.op!r}")
        for key in t.params:
            if key not in allowed:
                raise ValidationError(f"{path}.{key}: unknown parameter")
        for key in ("space", "x", "y"):
            if key in t.params:
                try:
                    parse_space(str(t.params[key]))
                except MMConcError as exc:
                    raise ValidationError(f"{path}.{key}: {exc}") from None
        if t.op == "bound" and t.params.get("kind") not in BOUND_KINDS:
            raise ValidationError(f"{path}.kind: unknown bound kind {t.params.get('kind')!r}")


# ---------------------------------------------------------------------------


@dataclass
class TaskOutcome:
    name: str
    op: str
    seed: int
    wall_time: float
    outputs: dict
    checks: dict
    notes: list

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _grid(params, space=None):
    g = params.get("eps_grid")
    if g is None:
        return default_eps_grid(space)
    return np.atleast_1d(np.asarray(g, dtype=float))


def _as_tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def _execute(task: TaskConfig, seed: int, threads: int, eps_grid=None) -> tuple[dict, dict, list]:
    """Return ({filename_suffix: csv/json text}, checks, notes)."""
    p = dict(task.params)
    if eps_grid is not None and task.op in ("alpha", "bound"):
        p["eps_grid"] = eps_grid
    if task.op == "recipe":
        res = get_recipe(task.recipe).run(seed, **p)
        return {f"{t.name}.csv": t.csv() for t in res.tables}, dict(res.checks), list(res.notes)
    if task.op == "alpha":
        sp = parse_space(str(p["space"]))
        grid = _grid(p, sp)
        method = p.get("method", "auto")
        cap = int(p.get("exact_cap", 24))
        if method == "exact":
            prof = alpha_exact(sp, grid, cap=cap, threads=threads)
        elif method == "lower":
            prof = alpha_lower(sp, grid, budget=int(p.get("budget", 1000)), seed=seed)
        elif method == "auto":
            prof = alpha_auto(sp, grid, budget=int(p.get("budget", 1000)), seed=seed, exact_cap=cap)
        else:
            raise ValidationError(f"task.{task.name}.method: unknown method {method!r}")
        return {"profile.csv": csv_text(PROFILE_HEADER, list(prof.csv_rows()))}, {}, []
    if task.op == "bound":
        kw = {k: p[k] for k in ("n", "weights", "length", "diameters", "C1", "C2") if k in p}
        for k in ("weights", "diameters"):
            if k in kw:
                kw[k] = _as_tuple(kw[k])
        spec = BoundSpec(p["kind"], **kw)
        rows = [(spec.kind, e, theoretical_bound(spec, e)) for e in _grid(p)]
        return {"bound.csv": csv_text(("kind", "eps", "bound"), rows)}, {}, []
    if task.op == "length":
        w = _as_tuple(p["weights"])
        cert = stabilizer_chain(w)
        rep = verify_certificate(make_weighted_symmetric(w), cert, seed=seed)
        rows = [(len(w), cert.length, rep.passed)]
        return {"certificate.json": dump_json(cert.to_json()),
                "summary.csv": csv_text(("k", "length", "verified"), rows)}, {"certificate_verifies": rep.passed}, []
    if task.op == "gromov":
        X, Y = parse_space(str(p["x"])), parse_space(str(p["y"]))
        est = h1li_estimate(X, Y, int(p.get("M", 720)), int(p.get("K", 64)), int(p.get("T", 200)), seed)
        return {"estimate.csv": csv_text(ESTIMATE_HEADER, [est.csv_row()])}, {}, []
    if task.op == "approx":
        lam = p.get("lam")
        sp = make_cylinder_space(int(p.get("N", 12)), float(p.get("p", 0.5)), lam=None if lam is None else float(lam))
        eps = float(p.get("eps", 0.1))
        rows, ok = [], True
        for i in range(int(p.get("count", 10))):
            rng = np.random.default_rng(derive_seed(seed, i))
            elem = random_full_group_element(rng, int(p.get("rank", 3)), int(p.get("extra_width", 3)))
            tr = approximate_by_bij(sp, elem, eps, strict=False)
            ok &= tr.passed
            rows.append((i, tr.N1, tr.N2, tr.delta, tr.distance, tr.intermediate_bound, tr.passed))
        header = ("instance", "N1", "N2", "delta", "d_mu", "intermediate_bound", "pass")
        return {"traces.csv": csv_text(header, rows)}, {"all_traces_pass": ok}, []
    raise ValidationError(f"task.{task.name}.op: unknown operation {task.op!r}")


@dataclass
class RunManifest:
    config: dict
    version: str
    seed: int
    tasks: list

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tasks)

    def to_json(self) -> dict:
        return {
            "config": self.config, "version": self.version, "seed": self.seed,
            "tasks": [{"name": t.name, "op": t.op, "seed": t.seed, "wall_time_s": round(t.wall_time, 3),
                       "outputs": t.outputs, "checks": t.checks, "passed": t.passed, "notes": t.notes}
                      for t in self.tasks],
        }


def resolve_threads(threads: Optional[int]) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("MMCONC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError("MMCONC_THREADS: must be an integer") from None
    return 1


def run(cfg: ExperimentConfig, out_dir=None, seed: Optional[int] = None, threads: Optional[int] = None,
        eps_grid=None) -> RunManifest:
    """Execute tasks in order; write ``<task>_<table>`` files and ``manifest.json``."""
    root = cfg.seed if seed is None else int(seed)
    out = Path(out_dir or cfg.out_dir or "mmconc_out")
    out.mkdir(parents=True, exist_ok=True)
    nthreads = resolve_threads(threads)
    outcomes = []
    for index, task in enumerate(cfg.tasks):
        tseed = derive_seed(root, task.name, index)
        t0 = time.perf_counter()
        files, checks, notes = _execute(task, tseed, nthreads, eps_grid)
        elapsed = time.perf_counter() - t0
        digests = {}
        for suffix, text in files.items():
            path = out / f"{task.name}_{suffix}"
            data = text.encode("utf-8")
            path.write_bytes(data)
            digests[path.name] = hashlib.sha256(data).hexdigest()
        outcomes.append(TaskOutcome(task.name, task.op if task.op != "recipe" else f"recipe:{task.recipe}",
                                    tseed, elapsed, digests, checks, notes))
    manifest = RunManifest(cfg.echo, __version__, root, outcomes)
    dump_json(manifest.to_json(), out / "manifest.json")
    return manifest


def recipe_config(name: str, seed: int = 0, **params) -> ExperimentConfig:
    """Single-task config running one built-in recipe."""
    get_recipe(name)
    task = TaskConfig(name, "recipe", params, name)
    cfg = ExperimentConfig(name, seed, [task], None,
                           {"experiment": {"name": name, "seed": str(seed)},
                            f"task.{name}": {"recipe": name, **{k: repr(v) for k, v in params.items()}}})
    validate_config(cfg)
    return cfg


__all__ = ["ExperimentConfig", "RunManifest", "TaskConfig", "config_from_text", "load_config", "parse_space",
           "recipe_config", "resolve_threads", "run", "validate_config"]

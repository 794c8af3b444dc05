"""Command-line experiment runner.

Each subcommand reads parameters from built-in defaults, then an optional
JSON config (``--config``), then explicit flags, validates them, runs its
rows (optionally on a process pool, results kept in row order) and writes a
CSV or JSON table plus a ``.manifest.json`` sidecar.

Exit codes: 0 success, 2 configuration error (nothing written), 3 violated
precondition.  Errors are also reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__
from .cat0 import Cat0Isometry, Cat0Space, dynamics_experiment, estimate_endpoints
from .cayley import (
    FreeAbelian,
    FreeGroup,
    group_from_spec,
    halfspace_intersection_experiment,
    pingpong_check,
    random_walk,
)
from .core import DomainError, PreconditionError
from .disk import DiskMap, characteristic_set_disk, contraction_example, elliptic_example, hyperbolic_example
from .disk import iterate_classify, parabolic_example
from .hilbert import (
    Polytope,
    automorphism_orbit_unbounded,
    corpus,
    known_automorphisms,
    sampled_star_membership,
    simplicial_diameter,
    star_contains,
    star_distance,
)

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION = 0, 2, 3
COMMON = ("seed", "out", "format", "workers")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    kind: type | tuple
    default: Any
    check: Callable[[Any], bool] | None = None
    help: str = ""


def _pos(x) -> bool:
    return x > 0


def _nonneg(x) -> bool:
    return x >= 0


SCHEMAS: dict[str, dict[str, Param]] = {
    "star-check": {
        "model": Param(str, "r2", lambda m: m in Cat0Space.NAMES, "r1|r2|r3|h2|rxh2|r2xh2"),
        "pairs": Param(int, 1000, lambda n: 1 <= n <= 10**6),
        "band": Param(float, 0.05, lambda b: 0 <= b < 1),
        "C": Param(float, 0.0, _nonneg),
    },
    "dynamics": {
        "model": Param(str, "h2", lambda m: m in Cat0Space.NAMES),
        "sl2": Param(list, [[2.0, 0.0], [0.0, 0.5]], help="SL(2,R) part (models with a hyperbolic factor)"),
        "shift": Param(list, None, help="Euclidean translation part"),
        "etas": Param(int, 100, lambda n: 1 <= n <= 10**5),
        "n": Param(int, 200, lambda n: 1 <= n <= 10**6),
        "exclude": Param(float, 0.05, lambda b: 0 <= b < 1),
        "tol": Param(float, 1e-3, _pos),
    },
    "hilbert-star": {
        "polytopes": Param(list, ["square", "triangle"], help="corpus names or {vertices|halfspaces} objects"),
        "C": Param(list, [0, 1, 2], lambda cs: all(isinstance(c, (int, float)) and c >= 0 for c in cs)),
    },
    "hilbert-diameter": {
        "polytopes": Param(list, None, help="corpus names or objects (default: whole corpus)"),
    },
    "pingpong": {
        "group": Param((str, dict), "free2"),
        "g": Param(list, None),
        "h": Param(list, None),
        "R": Param(int, 6, lambda r: 2 <= r <= 12),
    },
    "walk": {
        "group": Param((str, dict), "free2"),
        "steps": Param(int, 2000, lambda n: 10 <= n <= 10**5),
        "seeds": Param(int, 200, lambda n: 1 <= n <= 10**5),
        "C": Param(int, 2, _nonneg),
        "K": Param(int, 10, _nonneg),
        "min_special": Param(int, 10, _nonneg),
    },
    "denjoy-wolff": {
        "maps": Param(list, None, help="map specs with a 'name' (default: built-in examples)"),
        "z0": Param(list, [0.0, 0.3], help="starting point as [re, im]"),
        "n_max": Param(int, 10_000, lambda n: 4 <= n <= 10**7),
        "threshold": Param(float, 10.0, _pos),
        "starts": Param(int, 5, _nonneg),
    },
}


# --- parameter handling ----------------------------------------------------------


def _coerce(name: str, spec: Param, value):
    kinds = spec.kind if isinstance(spec.kind, tuple) else (spec.kind,)
    if value is None:
        return None
    if float in kinds and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise ConfigError(f"parameter {name!r} has the wrong type ({type(value).__name__})")
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"parameter {name!r} out of range: {value!r}")
    return value


def resolve_params(command: str, config: dict, flags: dict) -> dict:
    schema = SCHEMAS[command]
    unknown = set(config) - set(schema) - set(COMMON) - {"scenario"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if config.get("scenario", command) != command:
        raise ConfigError(f"config is for scenario {config['scenario']!r}, not {command!r}")
    out = {}
    for name, spec in schema.items():
        value = spec.default
        if name in config:
            value = config[name]
        if flags.get(name) is not None:
            value = flags[name]
        out[name] = _coerce(name, spec, value)
    seed = flags.get("seed")
    if seed is None:
        seed = config.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    out["seed"] = seed
    return out


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _workers(flag: int | None, config: dict) -> int:
    w = flag if flag is not None else config.get("workers")
    if w is None:
        env = os.environ.get("ISODYN_WORKERS")
        if env is not None:
            try:
                w = int(env)
            except ValueError as exc:
                raise ConfigError(f"ISODYN_WORKERS is not an integer: {env!r}") from exc
    w = 1 if w is None else w
    if not isinstance(w, int) or w < 1:
        raise ConfigError("workers must be a positive integer")
    return w


def _pmap(fn, tasks: list, workers: int) -> list:
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _chunks(n: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(i + size, n)) for i in range(0, n, size)]


# --- scenarios -------------------------------------------------------------------


def _star_task(args):
    model, seed, lo, hi, band, C = args
    space = Cat0Space.from_name(model)
    rows = []
    for i in range(lo, hi):
        rng = np.random.default_rng([seed, i])
        xi, eta = space.random_boundary(rng), space.random_boundary(rng)
        ang = space.angular_metric(xi, eta)
        in_band = abs(ang - math.pi / 2) <= band
        a = space.star_membership_analytic(xi, eta)
        s = space.star_membership_sampled(xi, eta, C=C)
        rows.append([i, seed, ang, in_band, a, s, a == s])
    return rows


def run_star_check(p: dict, workers: int):
    tasks = [(p["model"], p["seed"], lo, hi, p["band"], p["C"]) for lo, hi in _chunks(p["pairs"], 50)]
    rows = [r for chunk in _pmap(_star_task, tasks, workers) for r in chunk]
    outside = [r for r in rows if not r[3]]
    summary = {
        "pairs": len(rows),
        "outside_band": len(outside),
        "agreement_outside_band": sum(r[6] for r in outside) / len(outside) if outside else None,
    }
    cols = ["pair", "seed", "angle", "in_band", "analytic", "sampled", "agree"]
    return cols, rows, summary


def _dynamics_isometry(p: dict) -> tuple[Cat0Space, Cat0Isometry]:
    space = Cat0Space.from_name(p["model"])
    try:
        shift = None if p["shift"] is None else np.asarray(p["shift"], dtype=float)
        if shift is not None and shift.shape != (space.dim,):
            raise ConfigError(f"shift must have length {space.dim}")
        if space.hyperbolic:
            sl2 = np.asarray(p["sl2"], dtype=float)
            if sl2.shape != (2, 2) or not math.isclose(np.linalg.det(sl2), 1.0, rel_tol=1e-9):
                raise ConfigError("sl2 must be a 2x2 matrix of determinant 1")
            return space, Cat0Isometry.hyperbolic(sl2, dim=space.dim, shift=shift)
        if shift is None:
            raise ConfigError("flat models need a shift")
        return space, Cat0Isometry.euclidean(shift=shift)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad isometry: {exc}") from exc


def _dynamics_task(args):
    p, i = args
    space, g = _dynamics_isometry(p)
    _, xi_m, _ = estimate_endpoints(space, g)
    rng = np.random.default_rng([p["seed"], i])
    for _ in range(10_000):
        eta = space.random_boundary(rng)
        if space.visual_angle(eta, xi_m) >= p["exclude"] and space.angular_metric(eta, xi_m) > math.pi / 2 + 1e-9:
            break
    else:
        raise PreconditionError("no admissible eta found away from xi^-")
    rec = dynamics_experiment(space, g, eta, n=p["n"], success_tol=p["tol"])
    if not rec.precondition_ok:
        raise PreconditionError(rec.message)
    return [[i, p["seed"], k, d, r] for k, d, r in rec.rows], rec.success, rec.final_distance


def run_dynamics(p: dict, workers: int):
    space, g = _dynamics_isometry(p)
    xi_p, xi_m, conv = estimate_endpoints(space, g)
    if xi_p is None:
        raise PreconditionError("orbit of the basepoint is bounded; no endpoints at infinity")
    results = _pmap(_dynamics_task, [(p, i) for i in range(p["etas"])], workers)
    rows = [r for res in results for r in res[0]]
    summary = {
        "etas": p["etas"],
        "success_fraction": sum(res[1] for res in results) / len(results),
        "worst_final_distance": max(res[2] for res in results),
        "parabolic": xi_p is xi_m,
        "endpoints_converged": conv,
    }
    return ["eta", "seed", "k", "distance_to_star", "orbit_distance"], rows, summary


def _polytope(item) -> tuple[str, Polytope]:
    if isinstance(item, str):
        table = corpus()
        if item not in table:
            raise ConfigError(f"unknown polytope {item!r}")
        return item, table[item]
    if isinstance(item, dict):
        data = dict(item)
        name = str(data.pop("name", "custom"))
        try:
            return name, Polytope.from_json(data)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad polytope {name!r}: {exc}") from exc
    raise ConfigError(f"bad polytope entry {item!r}")


def _hilbert_star_task(args):
    name, P, Cs = args
    rows = []
    reps = P.representatives()
    for i, a in enumerate(reps):
        for j, b in enumerate(reps):
            comb = star_contains(P, a, b)
            sampled = [sampled_star_membership(P, a, b, C=c) for c in Cs]
            rows.append([name, i, j, P.faces[i].dim, P.faces[j].dim, comb, *sampled,
                         all(s == comb for s in sampled), star_distance(P, a, b)])
    return rows


def run_hilbert_star(p: dict, workers: int):
    polys = [_polytope(x) for x in p["polytopes"]]
    Cs = p["C"]
    rows = [r for chunk in _pmap(_hilbert_star_task, [(n, P, Cs) for n, P in polys], workers) for r in chunk]
    cols = ["polytope", "i", "j", "dim_i", "dim_j", "star", *[f"sampled_C{c:g}" for c in Cs], "agree", "star_distance"]
    summary = {"pairs": len(rows), "agreement": sum(r[-2] for r in rows) / len(rows) if rows else None}
    return cols, rows, summary


def _diameter_task(args):
    name, P = args
    g = known_automorphisms(name)
    certified = bool(g is not None and automorphism_orbit_unbounded(P, g))
    diam = simplicial_diameter(P)
    return [name, P.dim, len(P.vertices), len(P.faces), diam, certified]


def run_hilbert_diameter(p: dict, workers: int):
    items = p["polytopes"] if p["polytopes"] is not None else list(corpus())
    rows = _pmap(_diameter_task, [_polytope(x) for x in items], workers)
    summary = {"max_certified_diameter": max((r[4] for r in rows if r[5]), default=None)}
    return ["polytope", "dim", "vertices", "faces", "diameter", "certified_unbounded"], rows, summary


def _group(spec):
    if isinstance(spec, str):
        named = {"free": FreeGroup, "abelian": FreeAbelian}
        for prefix, cls in named.items():
            if spec.startswith(prefix) and spec[len(prefix):].isdigit():
                return cls(int(spec[len(prefix):]))
        raise ConfigError(f"unknown group {spec!r} (use freeN, abelianN or a JSON spec)")
    try:
        return group_from_spec(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad group spec: {exc}") from exc


def _element(G, value, default):
    if value is None:
        return default
    try:
        return G.element(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad group element {value!r}: {exc}") from exc


def run_pingpong(p: dict, workers: int):
    G = _group(p["group"])
    g = _element(G, p["g"], G.generators[0])
    h = _element(G, p["h"], G.generators[2] if len(G.generators) > 2 else G.generators[0])
    rep = pingpong_check(G, g, h, p["R"])
    row = [repr(G), json.dumps(list(g)), json.dumps(list(h)), p["R"], rep.verdict.value,
           None if rep.witness is None else json.dumps(list(rep.witness)),
           None if rep.witness_lengths is None else json.dumps(list(rep.witness_lengths)), rep.checked]
    cols = ["group", "g", "h", "R", "verdict", "witness", "witness_lengths", "checked"]
    return cols, [row], {"verdict": rep.verdict.value}


def _walk_task(args):
    group, steps, seed, C, K, min_special = args
    G = _group(group)
    rec = random_walk(G, steps, seed)
    rep = halfspace_intersection_experiment(rec, C, K)
    special = set(rep.special_indices)
    rows = [[seed, n, int(a), n in special, rep.witness_ok.get(n, n in special)] for n, a in enumerate(rec.lengths)]
    stats = (rep.speed, len(rep.nontrivial) >= min_special, bool(rep.nontrivial), rep.common_witness, rep.best_range)
    return rows, stats


def run_walk(p: dict, workers: int):
    _group(p["group"])  # validate before dispatch
    seeds = [p["seed"] + i for i in range(p["seeds"])]
    tasks = [(p["group"], p["steps"], s, p["C"], p["K"], p["min_special"]) for s in seeds]
    results = _pmap(_walk_task, tasks, workers)
    rows = [r for res in results for r in res[0]]
    stats = [res[1] for res in results]
    mean_speed = float(np.mean([s[0] for s in stats]))
    frac_special = float(np.mean([s[1] for s in stats]))
    frac_common = float(np.mean([s[3] for s in stats]))
    summary = {
        "mean_speed": mean_speed,
        "fraction_min_special": frac_special,
        "fraction_with_witness": float(np.mean([s[2] for s in stats])),
        "fraction_common_witness": frac_common,
        "fraction_range_half": float(np.mean([s[4] >= p["steps"] // 2 for s in stats])),
    }
    # summary row: mean speed in the a_n column, seed fractions in the flag columns
    rows.append(["summary", p["steps"], mean_speed, frac_special, frac_common])
    return ["seed", "n", "a_n", "is_special", "witness_ok"], rows, summary


DEFAULT_MAPS = [
    ("hyperbolic", hyperbolic_example),
    ("parabolic", parabolic_example),
    ("contraction", contraction_example),
    ("elliptic", elliptic_example),
]


def _dw_task(args):
    name, spec, z0, p = args
    f = dict(DEFAULT_MAPS)[name]() if spec is None else DiskMap.from_spec(spec)
    v = iterate_classify(f, z0, n_max=p["n_max"], bound_threshold=p["threshold"], n_starts=p["starts"], seed=p["seed"])
    chars = characteristic_set_disk(f, z0, n_max=p["n_max"], bound_threshold=p["threshold"])
    row = [name, v.outcome.value, v.theta, v.consistent, v.iterations, v.final_point.real, v.final_point.imag,
           v.tail_diameter, v.max_length, json.dumps(chars)]
    return row, v.as_dict()


def run_denjoy_wolff(p: dict, workers: int):
    z0 = p["z0"]
    if len(z0) != 2 or not all(isinstance(c, (int, float)) for c in z0):
        raise ConfigError("z0 must be [re, im]")
    z0 = complex(z0[0], z0[1])
    if not abs(z0) < 1:
        raise ConfigError("z0 must lie in the open unit disk")
    if p["maps"] is None:
        items = [(name, None) for name, _ in DEFAULT_MAPS]
    else:
        items = []
        for k, spec in enumerate(p["maps"]):
            if not isinstance(spec, dict):
                raise ConfigError(f"map {k} is not an object")
            try:
                DiskMap.from_spec(spec)
            except (ValueError, TypeError, KeyError) as exc:
                raise ConfigError(f"bad map {k}: {exc}") from exc
            items.append((str(spec.get("name", f"map{k}")), spec))
    results = _pmap(_dw_task, [(n, s, z0, p) for n, s in items], workers)
    cols = ["map", "outcome", "theta", "consistent", "iterations", "final_re", "final_im",
            "tail_diameter", "max_length", "characteristic_set"]
    return cols, [r[0] for r in results], {"evidence": [r[1] for r in results]}


ROW_SEEDS = {
    "star-check": "pair i uses default_rng([seed, i])",
    "dynamics": "eta i uses default_rng([seed, i])",
    "hilbert-star": "deterministic",
    "hilbert-diameter": "deterministic",
    "pingpong": "deterministic",
    "walk": "walk i uses default_rng(seed + i); the seed column holds it",
    "denjoy-wolff": "extra starting points use default_rng(seed)",
}

RUNNERS = {
    "star-check": run_star_check,
    "dynamics": run_dynamics,
    "hilbert-star": run_hilbert_star,
    "hilbert-diameter": run_hilbert_diameter,
    "pingpong": run_pingpong,
    "walk": run_walk,
    "denjoy-wolff": run_denjoy_wolff,
}


# --- output ----------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def render(cols: list, rows: list, summary: dict, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_jsonable(v) for v in r])
        return buf.getvalue()
    data = {
        "columns": cols,
        "rows": [dict(zip(cols, map(_jsonable, r))) for r in rows],
        "summary": json.loads(json.dumps(summary, default=_jsonable)),
    }
    return json.dumps(data, indent=1, sort_keys=True, default=_jsonable) + "\n"


def config_hash(command: str, params: dict) -> str:
    blob = json.dumps({"scenario": command, **params}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isodyn", description="Halfspace and star experiments.")
    parser.add_argument("--version", action="version", version=f"isodyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--format", choices=["csv", "json"])
        sp.add_argument("--workers", type=int, help="worker processes (fallback: $ISODYN_WORKERS, then 1)")
        for pname, spec in schema.items():
            kinds = spec.kind if isinstance(spec.kind, tuple) else (spec.kind,)
            flag = "--" + pname.replace("_", "-")
            if kinds[0] in (int, float) and len(kinds) == 1:
                sp.add_argument(flag, dest=pname, type=kinds[0], help=spec.help)
            elif kinds[0] is str:
                sp.add_argument(flag, dest=pname, help=spec.help)
            else:
                sp.add_argument(flag, dest=pname, type=json.loads, help=(spec.help + " (JSON)").strip())
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else _error("config", "invalid command line", EXIT_CONFIG)
    command = args.command
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out", "format", "workers")}
    try:
        config = _load_config(args.config)
        params = resolve_params(command, config, flags)
        workers = _workers(args.workers, config)
        fmt = args.format or config.get("format", "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        out = args.out or config.get("out")
        t0 = time.perf_counter()
        cols, rows, summary = RUNNERS[command](params, workers)
        elapsed = time.perf_counter() - t0
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except (PreconditionError, DomainError) as exc:
        return _error("precondition", str(exc), EXIT_PRECONDITION)
    text = render(cols, rows, summary, fmt)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        manifest = {
            "scenario": command,
            "config_hash": config_hash(command, params),
            "version": __version__,
            "wall_clock_seconds": elapsed,
            "seed": params["seed"],
            "row_seeds": ROW_SEEDS[command],
            "params": params,
            "workers": workers,
            "summary": summary if command != "denjoy-wolff" else {},
        }
        with open(out + ".manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True, default=_jsonable)
    if command != "denjoy-wolff":
        print(json.dumps(summary, sort_keys=True, default=_jsonable), file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven batch runner.

``fppvar run --config study.toml`` executes every ``[[jobs]]`` entry and
writes one output file per job plus ``run-manifest.json``.  ``fppvar
validate`` runs the built-in acceptance suite.

Config layout::

    [run]
    seed = 1
    out = "results"

    [media.const]
    kind = "explicit"
    d = 2
    constant = 1.0

    [[jobs]]
    name = "m-const"
    command = "estimate-m"
    medium = "const"
    x = [1, 0]
    n = [10, 40]
    seeds = 4
    format = "csv"

A job may carry an ``expect`` table mapping a summary field to a value; the
run fails (exit 1) when ``|got - want| > expect_tol``.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from ._rng import derive_seed
from .errors import ConfigurationError, FPPError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

COMMANDS = ("simulate-fpp", "estimate-m", "solve-stationary", "solve-horizon", "estimate-hbar",
            "sym-minimize", "dual-norm", "limit-shape", "compare-distros", "validate")


@dataclass
class JobSpec:
    name: str
    command: str
    params: dict
    output: Path
    format: str


@dataclass
class JobOutcome:
    name: str
    command: str
    output: str
    records: list
    failures: list = field(default_factory=list)
    seconds: float = 0.0


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    """Set a dotted key such as ``jobs.0.seeds=8`` or ``run.seed=3``."""
    if "=" not in assignment:
        raise ConfigurationError(f"override {assignment!r} is not key=value")
    key, value = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        else:
            node = node.setdefault(part, {})
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = _parse_value(value.strip())
    else:
        node[last] = _parse_value(value.strip())


def load_config(path, overrides=(), seed: int | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} not found")
    try:
        cfg = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    for ov in overrides:
        apply_override(cfg, ov)
    if seed is not None:
        cfg.setdefault("run", {})["seed"] = int(seed)
    cfg.setdefault("run", {})
    cfg["_base_dir"] = str(path.parent.resolve())
    return cfg


def config_digest(cfg: dict) -> str:
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    return hashlib.sha256(json.dumps(clean, sort_keys=True, default=str).encode()).hexdigest()


def _medium_table(cfg: dict, name: str) -> dict:
    media = cfg.get("media", {})
    if name not in media:
        raise ConfigurationError(f"unknown medium {name!r}")
    table = dict(media[name])
    if "seed" not in table:
        index = sorted(media).index(name)
        table["seed"] = derive_seed(int(cfg["run"].get("seed", 0)), index)
    return table


def _spec(cfg: dict, job: dict):
    from .environment import spec_from_config
    if "medium" not in job:
        raise ConfigurationError(f"job {job.get('name')!r} needs a medium")
    return spec_from_config(_medium_table(cfg, job["medium"]), cfg.get("_base_dir"))


def _atomic(cfg: dict, job: dict):
    from .symmin import AtomicMedium
    if "atoms" in job:
        return AtomicMedium(job["atoms"], job["probs"])
    table = _medium_table(cfg, job.get("medium", ""))
    if "atoms" in table:
        return AtomicMedium.from_config(table)
    dist = table.get("distribution", {})
    if dist.get("kind") == "atoms":
        return AtomicMedium(dist["values"], dist["probs"])
    if table.get("kind") == "explicit" and "constant" in table:
        return AtomicMedium(np.full((1, table["d"]), float(table["constant"])), [1.0])
    raise ConfigurationError("symmetric jobs need an atom table")


def _positive(job: dict, key: str, default=None, integer: bool = False):
    v = job.get(key, default)
    if v is None:
        raise ConfigurationError(f"job {job.get('name')!r} needs {key}")
    vals = v if isinstance(v, list) else [v]
    for item in vals:
        if not isinstance(item, (int, float)) or not item > 0 or (integer and int(item) != item):
            raise ConfigurationError(f"{key} must be positive{' integers' if integer else ''}, got {v!r}")
    return v


def _run_job(job: dict, cfg: dict) -> tuple[list, list]:
    """Dispatch one job; returns (records, failures)."""
    cmd = job["command"]
    jobs = 1
    if cmd == "simulate-fpp":
        from .environment import sample_window
        from .fpp import first_passage_times
        spec = _spec(cfg, job)
        box = job.get("box", 11)
        topology = job.get("topology", "open-box")
        origin = job.get("origin")
        env = sample_window(spec, box, topology, origin)
        src = job.get("source", [o + n // 2 for o, n in zip(env.origin, env.box)])
        ptm = first_passage_times(env, src)
        recs = [{"x": list(map(int, x)), "time": float(ptm.times[env.local(x)])} for x in env.points()]
        return recs, []
    if cmd == "estimate-m":
        from .fpp import estimate_time_constants
        spec = _spec(cfg, job)
        xs = job.get("xs") or [job.get("x")]
        if xs == [None]:
            raise ConfigurationError("estimate-m needs x or xs")
        n = _positive(job, "n", integer=True)
        n = n if isinstance(n, list) else [n]
        seeds = int(_positive(job, "seeds", 4, integer=True))
        ests = estimate_time_constants(spec, xs, n, seeds, job.get("radius"), jobs)
        if job.get("format", "json-lines") == "csv":
            return [{"direction": list(e.direction), "n": e.n_values[-1], "estimate": e.estimate,
                     "half_width": e.half_width, "seeds": seeds} for e in ests], []
        recs = [r for e in ests for r in e.records()]
        recs += [{"direction": list(e.direction), "estimate": e.estimate, "half_width": e.half_width}
                 for e in ests]
        return recs, []
    if cmd == "solve-stationary":
        from .cellproblem import check_hjb_residual, solve_stationary
        from .environment import sample_window
        spec = _spec(cfg, job)
        env = sample_window(spec, job.get("box", 16), "torus")
        eps_list = _positive(job, "epsilon", [0.1])
        eps_list = eps_list if isinstance(eps_list, list) else [eps_list]
        tol = float(_positive(job, "tol", 1e-10))
        recs = []
        for e in eps_list:
            cell = solve_stationary(env, job["p"], e, tol)
            recs.append({"p": list(map(float, job["p"])), "epsilon": e, "value": -e * cell.at_origin(),
                         "residual": cell.residual, "hjb_residual": check_hjb_residual(cell, env),
                         "sweeps": cell.sweeps})
        return recs, []
    if cmd == "solve-horizon":
        from .cellproblem import estimate_Hbar_horizon
        spec = _spec(cfg, job)
        ts = _positive(job, "t")
        ts = ts if isinstance(ts, list) else [ts]
        est = estimate_Hbar_horizon(spec, job["p"], ts, int(_positive(job, "seeds", 1, integer=True)))
        return list(est.records()), []
    if cmd == "estimate-hbar":
        route = job.get("route", "stationary")
        if route == "stationary":
            from .cellproblem import estimate_Hbar_stationary
            from .environment import sample_window
            env = sample_window(_spec(cfg, job), job.get("box", 16), "torus")
            est = estimate_Hbar_stationary(env, job["p"], _positive(job, "epsilon", [0.2, 0.1, 0.05, 0.025]),
                                           float(_positive(job, "tol", 1e-10)))
            return list(est.records()) + [{"p": list(est.p), "route": route, "hbar": est.extrapolated}], []
        if route == "horizon":
            from .cellproblem import estimate_Hbar_horizon
            est = estimate_Hbar_horizon(_spec(cfg, job), job["p"], _positive(job, "t"),
                                        int(_positive(job, "seeds", 1, integer=True)))
            return list(est.records()) + [{"p": list(est.p), "route": route, "hbar": est.estimate,
                                           "half_width": est.half_width}], []
        if route == "symmetric":
            job = dict(job, command="sym-minimize")
            return _run_job(job, cfg)
        raise ConfigurationError(f"unknown route {route!r}")
    if cmd == "sym-minimize":
        from .symmin import infsup_bounds, run_algorithm
        medium = _atomic(cfg, job)
        res = run_algorithm(medium, job["p"], int(job.get("max_iter", 100_000)),
                            float(_positive(job, "tol", 1e-10)))
        lo, hi = infsup_bounds(res.profile, medium)
        rec = {"p": list(map(float, np.atleast_1d(job["p"]))), "hbar": res.hbar, "status": res.status,
               "corrector": res.is_corrector, "certified": res.certified, "bracket": [lo, hi],
               "f": res.profile.f.tolist(), "iterations": res.iterations}
        if job.get("trace"):
            return [rec] + [dict(r, kind="trace") for r in res.trace_rows()], []
        return [rec], []
    if cmd in ("dual-norm", "limit-shape"):
        from .norms import NormTable, direction_mesh, dual_norm, limit_shape
        from .symmin import brute_force_Hbar, run_algorithm
        medium = _atomic(cfg, job)
        theta = float(_positive(job, "theta", math.pi / 256))
        dirs = direction_mesh(medium.d, theta)
        values, provenance = [], []
        for p in dirs:
            res = run_algorithm(medium, p)
            if res.certified:
                values.append(res.hbar)
                provenance.append("symmetric-algorithm")
            else:
                # the iteration only gave an upper bound here
                values.append(brute_force_Hbar(medium, p).hbar)
                provenance.append("bisection")
        table = NormTable(dirs, values, 1e-9, tuple(provenance))
        if cmd == "dual-norm":
            recs = []
            for x in job.get("xs") or [job["x"]]:
                dn = dual_norm(table, x, medium.a, medium.b)
                recs.append({"x": list(map(float, x)), "value": dn.value, "slack": dn.slack})
            return recs, []
        shape = limit_shape(table)
        recs = [{"vertex": k, **{f"x{i + 1}": float(v[i]) for i in range(len(v))}}
                for k, v in enumerate(shape.vertices)]
        return recs, ([] if shape.is_convex() else ["limit shape is not convex"])
    if cmd == "compare-distros":
        from .distcompare import MarginalSpec, coupling_gap_bound, empirical_gap_check, kolmogorov_distance
        from .environment import EnvironmentSpec, distribution_from_config
        d1 = distribution_from_config(job["marginal1"])
        d2 = distribution_from_config(job["marginal2"])
        F1, F2 = MarginalSpec.from_distribution(d1), MarginalSpec.from_distribution(d2)
        recs = [{"route": "ks-upper", "bound": kolmogorov_distance(F1, F2), "measured": None, "ok": True}]
        failures = []
        try:
            cb = coupling_gap_bound(F1, F2)
            recs.append({"route": "quantile-gap", "bound": cb.gap_bound, "measured": cb.measured_gap, "ok": cb.ok})
        except FPPError as exc:
            recs.append({"route": "quantile-gap", "bound": None, "measured": None, "ok": True, "note": str(exc)})
        d = int(job.get("d", 2))
        seed = int(cfg["run"].get("seed", 0))
        s1 = EnvironmentSpec(job.get("kind", "iid-undirected"), d, d1, seed=seed)
        s2 = EnvironmentSpec(job.get("kind", "iid-undirected"), d, d2, seed=seed)
        gap = empirical_gap_check(s1, s2, job.get("x", [1] + [0] * (d - 1)),
                                  int(_positive(job, "n", 100, integer=True)),
                                  int(_positive(job, "seeds", 8, integer=True)))
        recs.append({"route": "primal", "bound": gap.primal.value, "measured": gap.measured,
                     "half_width": gap.half_width, "ok": gap.ok})
        recs.append({"route": "dual", "bound": gap.dual.value, "measured": gap.measured,
                     "half_width": gap.half_width, "ok": gap.measured <= gap.dual.value + gap.half_width,
                     "weaker_than_primal": gap.dual_weaker})
        if not gap.ok:
            failures.append(f"measured gap {gap.measured} exceeds primal bound {gap.primal.value}")
        return recs, failures
    if cmd == "validate":
        from .acceptance import run_acceptance
        results = run_acceptance(job.get("only"), int(job.get("seed", 0)))
        recs = [{"criterion": r.number, "title": r.title, "passed": r.passed, "seconds": r.seconds}
                for r in results]
        return recs, [r.line() for r in results if not r.passed]
    raise ConfigurationError(f"unknown command {cmd!r}")


def _check_expect(job: dict, records: list) -> list:
    expect = job.get("expect")
    if not expect:
        return []
    tol = float(job.get("expect_tol", 1e-9))
    summary = records[-1] if records else {}
    out = []
    for key, want in expect.items():
        got = summary.get(key)
        if isinstance(want, (int, float)) and not isinstance(want, bool):
            if got is None or not isinstance(got, (int, float)) or abs(got - want) > tol:
                out.append(f"{job['name']}: {key} = {got!r}, expected {want!r}")
        elif got != want:
            out.append(f"{job['name']}: {key} = {got!r}, expected {want!r}")
    return out


def _execute(args) -> JobOutcome:
    job, cfg, out_path = args
    t0 = time.perf_counter()
    records, failures = _run_job(job, cfg)
    failures = failures + _check_expect(job, records)
    return JobOutcome(job["name"], job["command"], str(out_path), records, failures,
                      time.perf_counter() - t0)


def validate_jobs(cfg: dict, out_dir: Path) -> list[JobSpec]:
    raw = cfg.get("jobs")
    if not raw:
        raise ConfigurationError("config defines no [[jobs]]")
    specs, names = [], set()
    for i, job in enumerate(raw):
        if not isinstance(job, dict):
            raise ConfigurationError(f"job {i} is not a table")
        name = job.get("name", f"job{i}")
        if name in names:
            raise ConfigurationError(f"duplicate job name {name!r}")
        names.add(name)
        cmd = job.get("command")
        if cmd not in COMMANDS:
            raise ConfigurationError(f"job {name!r}: unknown command {cmd!r}")
        fmt = job.get("format", "json-lines")
        if fmt not in ("json-lines", "csv"):
            raise ConfigurationError(f"job {name!r}: unknown format {fmt!r}")
        for key in ("tol", "expect_tol"):
            if key in job and not (isinstance(job[key], (int, float)) and job[key] > 0):
                raise ConfigurationError(f"job {name!r}: {key} must be positive")
        if "medium" in job:
            _medium_table(cfg, job["medium"])
        ext = "csv" if fmt == "csv" else "jsonl"
        specs.append(JobSpec(name, cmd, dict(job, name=name), out_dir / f"{name}.{ext}", fmt))
    return specs


def run(config, overrides=(), jobs: int = 1, out=None, seed: int | None = None,
        echo=print) -> int:
    """Execute every job in ``config``; returns the process exit status."""
    try:
        cfg = load_config(config, overrides, seed)
        out_dir = Path(out or cfg["run"].get("out", "results"))
        specs = validate_jobs(cfg, out_dir)
        # build media eagerly so configuration problems surface before any work
        for s in specs:
            if "medium" in s.params and s.command not in ("sym-minimize", "dual-norm", "limit-shape"):
                _spec(cfg, s.params)
    except ConfigurationError as exc:
        echo(f"configuration error: {exc}")
        return 2
    tasks = [(s.params, cfg, s.output) for s in specs]
    try:
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_execute, tasks))
        else:
            outcomes = [_execute(t) for t in tasks]
    except ConfigurationError as exc:
        echo(f"configuration error: {exc}")
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = []
    for spec, oc in zip(specs, outcomes):
        if spec.format == "csv":
            io.write_csv(spec.output, oc.records)
        else:
            io.write_jsonl(spec.output, oc.records)
        failures.extend(oc.failures)
    manifest = {
        "schema": io.SCHEMA,
        "version": _version(),
        "config_digest": config_digest(cfg),
        "seed": int(cfg["run"].get("seed", 0)),
        "jobs": [{"name": oc.name, "command": oc.command, "output": oc.output, "seconds": oc.seconds,
                  "failures": oc.failures} for oc in outcomes],
    }
    (out_dir / "run-manifest.json").write_text(io.dumps(manifest) + "\n")
    for f in failures:
        echo(f"FAILED {f}")
    return 1 if failures else 0


def validate(config=None, seed: int = 0, only=None, echo=print) -> int:
    """Run the acceptance suite and print one line per criterion."""
    from .acceptance import run_acceptance
    if config is not None:
        path = Path(config)
        if not path.exists():
            echo(f"configuration error: config file {path} not found")
            return 2
        text = path.read_text()
        if not text.strip():
            echo("usage: fppvar validate [--config PATH] [--seed N] [--only 1,2,...]; the config is empty")
            return 2
        try:
            vcfg = tomllib.loads(text).get("validate", {})
        except tomllib.TOMLDecodeError as exc:
            echo(f"configuration error: {exc}")
            return 2
        for key, v in vcfg.items():
            if key in ("tol", "tolerance") and not (isinstance(v, (int, float)) and v > 0):
                echo(f"configuration error: {key} must be positive, got {v!r}")
                return 2
        seed = int(vcfg.get("seed", seed))
        only = vcfg.get("only", only)
    results = run_acceptance(only, seed, echo=echo)
    passed = sum(r.passed for r in results)
    echo(f"{passed}/{len(results)} criteria passed")
    return 0 if passed == len(results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fppvar", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="cmd")
    pr = sub.add_parser("run", help="execute the jobs of a config file")
    pr.add_argument("--config", required=True)
    pr.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    pr.add_argument("--jobs", type=int, default=1)
    pr.add_argument("--out")
    pr.add_argument("--seed", type=int)
    pv = sub.add_parser("validate", help="run the acceptance suite")
    pv.add_argument("--config")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--only", help="comma-separated criterion numbers")
    args = parser.parse_args(argv)
    if args.cmd == "run":
        if args.jobs < 1:
            print("configuration error: --jobs must be >= 1")
            return 2
        return run(args.config, args.set, args.jobs, args.out, args.seed)
    if args.cmd == "validate":
        only = [int(s) for s in args.only.split(",")] if args.only else None
        return validate(args.config, args.seed, only)
    parser.print_usage()
    return 2


if __name__ == "__main__":
    sys.exit(main())

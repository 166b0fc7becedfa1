"""Command line front end: ``list``, ``verify``, ``converge`` and ``report``.

Every run is deterministic given the master seed: each scenario draws from its
own generator, seeded by hashing its name together with the master seed, so
adding or reordering scenarios never perturbs the others.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import scenarios as sc
from .liegroup import get_group, subalgebra_from_spec

CSV_COLUMNS = ("name", "group", "N", "s", "max_error", "tolerance", "order", "status")
SCHEMA = "diracred-report/1"
OUT_ENV = "DIRACRED_OUT"
SCENARIO_KEYS = {"name", "op", "group", "n", "s", "chi", "samples", "seed"}
TOP_KEYS = {"seed", "workers", "format", "scenarios"}


class ConfigError(ValueError):
    """Invalid command line or configuration document."""


def derive_seed(master: int, name: str) -> int:
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


# -- parameter validation

def _split(text):
    if text is None:
        return None
    if isinstance(text, list):
        return text
    return [t.strip() for t in str(text).split(",") if t.strip()]


def validate_params(group=None, n=None, s=None, chi="linear", samples=None) -> sc.Params:
    groups = _split(group)
    for g in groups or []:
        try:
            get_group(g)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"unknown group {g!r}") from exc
    ns = None
    if n is not None:
        try:
            ns = [int(x) for x in _split(n)]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"--n must be integers, got {n!r}") from exc
        if any(x < 2 for x in ns):
            raise ConfigError("lattice sizes must be at least 2")
    subs = _split(s)
    for spec in subs or []:
        if ":" in spec and spec.split(":")[0] in ("conjugacy", "fusion"):
            continue
        try:
            subalgebra_from_spec(get_group("su2"), spec, seed=0)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"unknown subalgebra {spec!r}") from exc
    if chi not in ("linear", "smoothstep"):
        raise ConfigError(f"unknown profile chi={chi!r}")
    if samples is not None and (not isinstance(samples, int) or samples < 1):
        raise ConfigError("samples must be a positive integer")
    return sc.Params(groups, ns, subs, chi, samples)


# -- running

def _run_one(job):
    kind, name, params, seed, timing = job
    fn = sc.run_op if kind == "op" else sc.run_scenario
    checks, wall = sc.timed(fn, name, params, seed)
    rows = []
    for c in checks:
        d = c.to_dict()
        d["name"] = f"{name}/{d['name']}"
        if timing:
            d["wall_time"] = wall
        rows.append(d)
    return name, rows


def run(jobs: list, seed: int, workers: int = 1, timing: bool = False) -> dict:
    """Execute ``(kind, name, params)`` jobs and merge by scenario name."""
    full = [(k, n, p, derive_seed(seed, n), timing) for k, n, p in jobs]
    if workers > 1 and len(full) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, full))
    else:
        results = [_run_one(j) for j in full]
    results.sort(key=lambda r: r[0])
    checks = [row for _, rows in results for row in rows]
    return {"schema": SCHEMA, "seed": seed, "checks": checks}


def failed(report: dict) -> bool:
    return any(c["status"] == "fail" for c in report["checks"])


def emit(report: dict, fmt: str) -> bytes:
    if fmt == "json":
        return (json.dumps(report, sort_keys=True, indent=1, allow_nan=False) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in report["checks"]:
            w.writerow(["" if c.get(k) is None else c.get(k) for k in CSV_COLUMNS])
        return buf.getvalue().encode()
    raise ConfigError(f"unknown format {fmt!r}")


def load_report(data: bytes) -> dict:
    report = json.loads(data)
    if report.get("schema") != SCHEMA:
        raise ValueError("not a diracred report")
    return report


# -- configuration documents

def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    return doc


def jobs_from_config(doc: dict, path: str = "config") -> list:
    jobs = []
    entries = doc.get("scenarios", [])
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: 'scenarios' must be a list")
    for i, entry in enumerate(entries):
        where = f"{path}: scenarios[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: must be an object")
        unknown = set(entry) - SCENARIO_KEYS
        if unknown:
            raise ConfigError(f"{where}: unknown key {sorted(unknown)[0]!r}")
        if ("name" in entry) == ("op" in entry):
            raise ConfigError(f"{where}: exactly one of 'name' or 'op' is required")
        try:
            params = validate_params(entry.get("group"), entry.get("n"), entry.get("s"),
                                     entry.get("chi", "linear"), entry.get("samples"))
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        if "name" in entry:
            if entry["name"] not in sc.REGISTRY:
                raise ConfigError(f"{where}: unknown scenario {entry['name']!r}")
            jobs.append(("scenario", entry["name"], params))
        else:
            if entry["op"] not in sc.OPS:
                raise ConfigError(f"{where}: unknown op {entry['op']!r}")
            jobs.append(("op", entry["op"], params))
    return jobs


# -- argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--group", help="comma-separated groups (su2, so3, sl2r, abelian:k)")
    p.add_argument("--n", help="comma-separated lattice sizes")
    p.add_argument("--s", help="comma-separated subalgebra specs")
    p.add_argument("--chi", default="linear", help="cutoff profile: linear or smoothstep")
    p.add_argument("--samples", type=int, help="override sample counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", default="json", choices=("json", "csv"))
    p.add_argument("--out", help="output directory (default: stdout, or $%s)" % OUT_ENV)
    p.add_argument("--timing", action="store_true", help="include wall times in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diracred", description="Dirac reduction verification suite")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list scenarios, modules and convergence ops")
    v = sub.add_parser("verify", help="run the scenarios of a module, a single scenario, or 'acceptance'")
    v.add_argument("target")
    _add_common(v)
    c = sub.add_parser("converge", help="run a convergence study")
    c.add_argument("--op", required=True)
    _add_common(c)
    r = sub.add_parser("report", help="run all acceptance scenarios, or those listed in --config")
    r.add_argument("--config", help="JSON configuration document")
    _add_common(r)
    return parser


def _resolve_target(target: str) -> list:
    if target in sc.REGISTRY:
        return [target]
    if target == "acceptance":
        return sc.acceptance_names()
    if target == "all":
        return sorted(sc.REGISTRY)
    names = sorted(n for n, s in sc.REGISTRY.items() if s.module == target)
    if not names:
        raise ConfigError(f"unknown module or scenario {target!r}")
    return names


def _write(report: dict, fmt: str, out: str | None, stem: str) -> None:
    data = emit(report, fmt)
    out = out or os.environ.get(OUT_ENV)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{stem}.{fmt}").write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _summary(report: dict) -> str:
    counts = {"pass": 0, "fail": 0, "finding": 0}
    for c in report["checks"]:
        counts[c["status"]] += 1
    return "{pass} pass, {fail} fail, {finding} finding".format(**counts)


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in sorted(sc.REGISTRY):
            s = sc.REGISTRY[name]
            print(f"{name:32s} {s.module:10s} {s.description}")
        for op in sorted(sc.OPS):
            print(f"{'op:' + op:32s} {'converge':10s} {sc.OPS[op][0]}")
        return 0
    try:
        seed, workers, fmt = args.seed, args.workers, args.format
        if args.command == "report" and args.config:
            doc = load_config(args.config)
            jobs = jobs_from_config(doc, args.config)
            seed = doc.get("seed", seed)
            workers = doc.get("workers", workers)
            fmt = doc.get("format", fmt)
            if not isinstance(seed, int) or not isinstance(workers, int) or fmt not in ("json", "csv"):
                raise ConfigError(f"{args.config}: seed/workers must be integers, format json or csv")
        else:
            params = validate_params(args.group, args.n, args.s, args.chi, args.samples)
            if args.command == "verify":
                jobs = [("scenario", n, params) for n in _resolve_target(args.target)]
            elif args.command == "converge":
                if args.op not in sc.OPS:
                    raise ConfigError(f"unknown op {args.op!r}; choose from {', '.join(sorted(sc.OPS))}")
                jobs = [("op", args.op, params)]
            else:
                jobs = [("scenario", n, params) for n in sc.acceptance_names()]
        if workers < 1:
            raise ConfigError("workers must be positive")
    except ConfigError as exc:
        print(f"diracred: error: {exc}", file=sys.stderr)
        return 2
    report = run(jobs, seed, workers, args.timing)
    _write(report, fmt, args.out, "report" if args.command == "report" else args.command)
    print(_summary(report), file=sys.stderr)
    return 1 if failed(report) else 0


if __name__ == "__main__":
    sys.exit(main())

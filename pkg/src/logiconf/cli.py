"""Command line: ``logiconf {ingest,solve,bench,viz,rerun}``.

Exit codes: 0 success, 1 input or validation error, 2 UNSAT or infeasible,
3 internal error or search timeout. Logs go to stderr (level from
``LOGICONF_LOG_LEVEL``); data goes to files. Every command that writes files
also writes ``manifest.json`` next to them, and ``logiconf rerun`` replays it.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .bench import InstanceParams, generate, reports_to_csv, run_variants
from .ground import DerivationError, Variant, derive
from .kb import FactSyntaxError, KGError, format_facts, kg_to_facts, load_facts, materialize_inverses, read_kg, shape_check
from .solve import Infeasible, SolveConfig, build_problem, enumerate_models, optimize
from .verify import run_assertions
from .viz import (
    MapLayout,
    grid_layout,
    kinds_of,
    read_layout,
    read_model_tables,
    render_map,
    render_scatter,
    write_model_tables,
    write_svg,
)

log = logging.getLogger("logiconf")

EXIT_OK, EXIT_INPUT, EXIT_UNSAT, EXIT_INTERNAL = 0, 1, 2, 3
MANIFEST = "manifest.json"


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


# -- manifest ----------------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


@dataclasses.dataclass
class RunManifest:
    command: str
    args: dict
    inputs: list
    out_dir: str
    config: dict | None = None
    seed: int | None = None
    started: str = ""
    finished: str = ""
    tool: str = "logiconf"
    version: str = __version__

    def write(self, out_dir) -> str:
        path = os.path.join(out_dir, MANIFEST)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        missing = {"command", "args", "inputs", "out_dir"} - set(data)
        if missing:
            raise CliError(f"{path}: manifest lacks {sorted(missing)}")
        return cls(**{k: v for k, v in data.items() if k in known})


def _replayable(args) -> dict:
    skip = {"func", "config", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _manifest(args, inputs, out_dir, started, config=None, seed=None) -> str:
    m = RunManifest(
        command=args.command,
        args=_replayable(args),
        inputs=[{"path": str(p), "sha256": _sha256(p)} for p in inputs if p and os.path.isfile(p)],
        out_dir=str(out_dir),
        config=config,
        seed=seed,
        started=started,
        finished=_now(),
    )
    return m.write(out_dir)


def _abs(path):
    return None if path is None else os.path.abspath(path)


# -- loading -------------------------------------------------------------------

def _is_kg(path: str, fmt: str) -> bool:
    if fmt != "auto":
        return fmt == "kg"
    return Path(path).suffix.lower() in (".csv", ".tsv", ".kg")


def _load_any(path: str, fmt: str = "auto"):
    """Facts plus shape violations (only for KG documents)."""
    if not os.path.isfile(path):
        raise CliError(f"{path}: no such file")
    try:
        if _is_kg(path, fmt):
            kg = materialize_inverses(read_kg(path))
            violations = shape_check(kg)
            return kg_to_facts(kg), violations
        return load_facts(path), []
    except FactSyntaxError as exc:
        raise CliError(f"{path}: {exc}") from None
    except (KGError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from None


# -- commands ------------------------------------------------------------------

def cmd_ingest(args) -> int:
    started = _now()
    facts, violations = _load_any(args.input, args.format)
    report = run_assertions(facts)
    for pred, n in facts.counts().items():
        print(f"{pred}: {n}")
    for v in violations:
        print(f"shape: {v.subject}: {v.message}", file=sys.stderr)
    if report.findings:
        sys.stderr.write(report.to_text())
    if args.out:
        out_dir = os.path.dirname(os.path.abspath(args.out))
        os.makedirs(out_dir, exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(format_facts(facts))
        if args.report:
            with open(args.report, "w", encoding="utf-8", newline="") as fh:
                fh.write(report.to_csv())
        _manifest(args, [args.input], out_dir, started)
    failed = bool(violations) or not report.ok
    if failed and not args.warn_only:
        n = len(violations) + len(report.errors)
        log.error("%d validation finding(s); rerun with --warn-only to accept", n)
        return EXIT_INPUT
    return EXIT_OK


def _parse_mode(tokens) -> tuple[str, int | None]:
    if not tokens:
        return "enumerate", None
    mode, rest = tokens[0], tokens[1:]
    if mode == "optimize" and not rest:
        return mode, None
    if mode == "enumerate" and len(rest) <= 1:
        if not rest:
            return mode, None
        try:
            n = int(rest[0])
        except ValueError:
            raise CliError(f"--mode enumerate expects an integer limit, got {rest[0]!r}") from None
        if n < 1:
            raise CliError("--mode enumerate N needs N >= 1")
        return mode, n
    raise CliError("--mode must be 'enumerate [N]' or 'optimize'")


def cmd_solve(args) -> int:
    started = _now()
    mode, limit = _parse_mode(args.mode)
    facts, violations = _load_any(args.facts, args.format)
    if violations:
        raise CliError(f"{args.facts}: {len(violations)} shape violation(s), run ingest for details")
    try:
        variant = Variant.parse(args.variant)
        cfg = SolveConfig(sourcing=args.sourcing, variant=variant, mode=mode, limit=limit, seed=args.seed,
                          strict_paper_duplicates=args.strict_paper_duplicates)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    try:
        db = derive(facts)
    except DerivationError as exc:
        raise CliError(f"derivation failed: {exc}") from None
    try:
        problem = build_problem(facts, db, cfg)
    except Infeasible as exc:
        raise CliError(f"infeasible: {exc}", EXIT_UNSAT) from None

    deadline = None if args.timeout is None else time.monotonic() + args.timeout
    try:
        if mode == "optimize":
            found = optimize(problem, deadline=deadline)
            models = [] if found is None else [found[0]]
        else:
            models = list(enumerate_models(problem, limit=limit, deadline=deadline))
    except TimeoutError:
        raise CliError(f"search exceeded --timeout {args.timeout}s", EXIT_INTERNAL) from None

    os.makedirs(args.out, exist_ok=True)
    write_model_tables(models, args.out)
    config = dataclasses.asdict(cfg)
    config["variant"] = cfg.variant.value
    _manifest(args, [args.facts], args.out, started, config=config, seed=args.seed)
    if not models:
        log.error("UNSAT: no configuration satisfies the constraints (%s sourcing, %s)", cfg.sourcing, variant.value)
        return EXIT_UNSAT
    log.info("%d model(s) written to %s", len(models), args.out)
    return EXIT_OK


_CAMEL = re.compile(r"(?<!^)(?=[A-Z])")


def _instance_params(pairs, seed: int) -> InstanceParams:
    known = {f.name: f.type for f in dataclasses.fields(InstanceParams)}
    values = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise CliError(f"--param expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = _CAMEL.sub("_", key.strip()).lower()
        if key not in known or key == "seed":
            raise CliError(f"unknown generator parameter {key!r}")
        try:
            values[key] = float(raw) if "float" in str(known[key]) else int(raw)
        except ValueError:
            raise CliError(f"--param {key}: bad value {raw!r}") from None
    try:
        return InstanceParams(seed=seed, **values)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _bench_one(params: InstanceParams, timeout, timings: bool):
    facts, retries = generate(params)
    rep = run_variants(facts, timeout=timeout, seed=params.seed)
    if not timings:
        rep = dataclasses.replace(rep, rows=tuple(
            dataclasses.replace(r, derive_ms=0.0, first_model_ms=None if r.first_model_ms is None else 0.0)
            for r in rep.rows))
    return rep, retries


def cmd_bench(args) -> int:
    started = _now()
    if args.seeds < 1:
        raise CliError("--seeds must be at least 1")
    params = [_instance_params(args.param, args.seed_start + i) for i in range(args.seeds)]
    timings = not args.no_timings
    if args.jobs > 1 and len(params) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_one, params, [args.timeout] * len(params), [timings] * len(params)))
    else:
        results = [_bench_one(p, args.timeout, timings) for p in params]
    for p, (_, retries) in zip(params, results):
        if retries:
            log.info("seed %d: %d generator retries", p.seed, retries)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "bench.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(reports_to_csv([r for r, _ in results]))
    cfg = dataclasses.asdict(params[0])
    cfg.pop("seed")
    _manifest(args, [], args.out, started, config=cfg, seed=args.seed_start)
    return EXIT_OK


def _viz_layout(args, models, facts) -> MapLayout:
    kinds = kinds_of(facts) if facts is not None else {}
    if args.layout:
        if not os.path.isfile(args.layout):
            raise CliError(f"{args.layout}: no such file")
        try:
            layout = read_layout(args.layout)
        except ValueError as exc:
            raise CliError(f"{args.layout}: {exc}") from None
        layout.kinds = kinds
        return layout
    if facts is not None:
        return grid_layout(facts)
    # no facts: every assigned site is a production location, the rest warehouses
    from .kb import FactSet

    prod = {s for m in models for sites in m.assignment.values() for s in sites}
    other = {x for m in models for p in m.paths.values() for x in (p.src, *p.vias, p.dst)} - prod
    return grid_layout(FactSet(production_locs=prod, warehouse_locs=other))


def _facts_from_manifest(models_dir):
    path = os.path.join(models_dir, MANIFEST)
    if not os.path.isfile(path):
        return None
    m = RunManifest.read(path)
    src = m.args.get("facts")
    if not src or not os.path.isfile(src):
        return None
    return _load_any(src, m.args.get("format", "auto"))[0]


def cmd_viz(args) -> int:
    started = _now()
    if not os.path.isfile(os.path.join(args.models, "overview.csv")):
        raise CliError(f"{args.models}: not a model directory (overview.csv missing)")
    try:
        overview, models = read_model_tables(args.models)
    except (ValueError, OSError) as exc:
        raise CliError(f"{args.models}: {exc}") from None
    facts = _load_any(args.facts)[0] if args.facts else _facts_from_manifest(args.models)
    layout = _viz_layout(args, models, facts)
    out = args.out or os.path.join(args.models, "viz")
    try:
        docs = {"scatter.svg": render_scatter(overview, args.kpi_x, args.kpi_y)}
        for i, m in enumerate(models):
            docs[f"map_{i}.svg"] = render_map(m, layout, title=f"model {i}")
    except KeyError as exc:
        raise CliError(str(exc.args[0])) from None
    os.makedirs(out, exist_ok=True)
    for name, doc in docs.items():
        write_svg(doc, os.path.join(out, name))
    _manifest(args, [os.path.join(args.models, f) for f in ("overview.csv", "details.csv", "assignments.csv")]
              + [args.layout], out, started)
    log.info("wrote %d document(s) to %s", len(docs), out)
    return EXIT_OK


def cmd_rerun(args) -> int:
    m = RunManifest.read(args.manifest)
    if m.command not in COMMANDS or m.command == "rerun":
        raise CliError(f"{args.manifest}: cannot replay command {m.command!r}")
    replay = argparse.Namespace(command=m.command, **m.args)
    if args.out:
        key = "out" if m.command != "ingest" else None
        if key is None:
            # ingest writes one file; redirect it into the new directory
            replay.out = os.path.join(os.path.abspath(args.out), os.path.basename(m.args.get("out") or "facts.lp"))
            if m.args.get("report"):
                replay.report = os.path.join(os.path.abspath(args.out), os.path.basename(m.args["report"]))
        else:
            replay.out = os.path.abspath(args.out)
    for item in m.inputs:
        if os.path.isfile(item["path"]) and _sha256(item["path"]) != item["sha256"]:
            log.warning("input %s changed since the manifest was written", item["path"])
    return COMMANDS[m.command](replay)


COMMANDS = {"ingest": cmd_ingest, "solve": cmd_solve, "bench": cmd_bench, "viz": cmd_viz, "rerun": cmd_rerun}


# -- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logiconf", description="Logistics configuration pipeline.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON file with default values for subcommand flags")
    sub = p.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", help="parse facts or a KG document and run the assertions")
    ing.add_argument("input", type=_abs)
    ing.add_argument("--format", choices=("auto", "facts", "kg"), default="auto")
    ing.add_argument("--out", type=_abs, help="write the normalized fact file here")
    ing.add_argument("--report", type=_abs, help="write findings as CSV here (needs --out)")
    ing.add_argument("--warn-only", action="store_true", help="exit 0 even when assertions fail")

    sol = sub.add_parser("solve", help="enumerate or optimize configurations")
    sol.add_argument("facts", type=_abs)
    sol.add_argument("--format", choices=("auto", "facts", "kg"), default="auto")
    sol.add_argument("--sourcing", choices=("single", "double"), default="single")
    sol.add_argument("--variant", default="Baseline", help="Baseline, PLChoiceAsIC, LocTypeReq, TMTypeReq or All")
    sol.add_argument("--mode", nargs="+", default=["enumerate"], metavar="MODE",
                     help="'enumerate [N]' or 'optimize'")
    sol.add_argument("--seed", type=int, default=0)
    sol.add_argument("--timeout", type=float, default=None, help="search time limit in seconds")
    sol.add_argument("--strict-paper-duplicates", action="store_true",
                     help="keep candidates that differ only by zero-distance intra-site legs")
    sol.add_argument("--out", type=_abs, default=os.path.abspath("models"))
    sol.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; search runs single-threaded")

    ben = sub.add_parser("bench", help="encoding-variant study on generated instances")
    ben.add_argument("--seeds", type=int, default=1)
    ben.add_argument("--seed-start", type=int, default=0)
    ben.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                     help="generator parameter, e.g. n_parts=34 or routeDensity=0.8")
    ben.add_argument("--timeout", type=float, default=60.0, help="per-variant first-model time limit")
    ben.add_argument("--no-timings", action="store_true", help="write 0 for timing columns (reproducible CSV)")
    ben.add_argument("--jobs", type=int, default=1)
    ben.add_argument("--out", type=_abs, default=os.path.abspath("bench"))

    viz = sub.add_parser("viz", help="render scatter plot and route maps from a solve output directory")
    viz.add_argument("models", type=_abs)
    viz.add_argument("--layout", type=_abs, help="CSV with location,x,y")
    viz.add_argument("--facts", type=_abs, help="fact file for location kinds (default: from the manifest)")
    viz.add_argument("--kpi-x", default="totalDistance")
    viz.add_argument("--kpi-y", default="totalDistance")
    viz.add_argument("--out", type=_abs)

    rr = sub.add_parser("rerun", help="replay a run from its manifest")
    rr.add_argument("manifest")
    rr.add_argument("--out", help="write outputs here instead of the recorded directory")

    for name, fn in COMMANDS.items():
        sub.choices[name].set_defaults(func=fn)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"--config {args.config}: {exc}") from None
    section = cfg.get(args.command, cfg) if isinstance(cfg, dict) else None
    if not isinstance(section, dict):
        raise CliError(f"--config {args.config}: expected a JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in subparser._actions}
    unknown = set(section) - dests - set(COMMANDS)
    if unknown:
        raise CliError(f"--config {args.config}: unknown keys {sorted(unknown)}")
    # explicit flags still win: re-parse with the file values as defaults
    subparser.set_defaults(**{k: v for k, v in section.items() if k in dests})
    return parser.parse_args(argv)


def _setup_logging():
    level = os.environ.get("LOGICONF_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except CliError as exc:
        print(f"logiconf: error: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:
        # argparse usage errors exit with 2, which here means UNSAT
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

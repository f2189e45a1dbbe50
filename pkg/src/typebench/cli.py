"""Command-line entry point: build, rewrite, check, eval, report, verify."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import SignatureDB, bundled_corpus, bundled_db, build_tasks, category_split, read_tasks, write_tasks
from .equivalence import alpha_equivalent, emit_proof_module
from .errors import EmptyReport, EndpointUnreachable, MissingDeps, ParseError, RewriteError
from .harness import ModelEndpointConfig, RunReport, run_benchmark
from .metrics import MetricValue, accuracy_summary, reasoning_effectiveness, render_report, robustness_score
from .rewrite import DEFAULT_SCHEME, NamingScheme, alpha_rewrite_with_plan
from .types import parse_type

log = logging.getLogger("typebench")

EXIT_OK = 0
EXIT_MISSING = 1
EXIT_IO = 2
EXIT_NOT_EQUIVALENT = 3
EXIT_PARSE = 4
EXIT_UNREACHABLE = 5


@dataclass
class CliConfig:
    corpus: Path | None = None
    db: Path | None = None
    out: Path = Path("out")
    endpoints: dict = field(default_factory=dict)
    repeats: int = 3
    naming: NamingScheme = DEFAULT_SCHEME

    KEYS = ("corpus", "db", "out", "endpoints", "repeats", "naming")

    @classmethod
    def from_json(cls, obj: dict, base: Path = Path(".")) -> "CliConfig":
        unknown = set(obj) - set(cls.KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls()
        for key in ("corpus", "db"):
            if obj.get(key) is not None:
                path = (base / obj[key]).resolve()
                if not path.is_file():
                    raise FileNotFoundError(f"{key}: {path} does not exist")
                setattr(cfg, key, path)
        if "out" in obj:
            cfg.out = base / obj["out"]
        if "repeats" in obj:
            if not isinstance(obj["repeats"], int) or obj["repeats"] < 1:
                raise ValueError("repeats must be a positive integer")
            cfg.repeats = obj["repeats"]
        cfg.endpoints = {name: ModelEndpointConfig.from_json(e) for name, e in obj.get("endpoints", {}).items()}
        if "naming" in obj:
            naming = dict(obj["naming"])
            for key in ("type_names", "var_names", "binding_names"):
                if key in naming:
                    naming[key] = tuple(naming[key])
            cfg.naming = NamingScheme(**naming)
        return cfg

    @classmethod
    def load(cls, path) -> "CliConfig":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text(encoding="utf-8")), path.parent)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="typebench", description="Type-inference benchmark toolkit.")
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", type=Path, help="output directory (overrides config)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized self-checks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build tasks from a corpus and signature database")
    b.add_argument("--corpus", type=Path)
    b.add_argument("--db", type=Path)
    b.add_argument("--pure", action="store_true", help="also write the renamed variant")

    r = sub.add_parser("rewrite", help="rename a tasks file into the pure variant")
    r.add_argument("tasks", type=Path)
    r.add_argument("--plans", action="store_true", help="also write the renaming plans")

    c = sub.add_parser("check", help="decide alpha-equivalence of two signatures")
    c.add_argument("truth")
    c.add_argument("answer")
    c.add_argument("--emit-proof", type=Path, metavar="PATH", help="write a compiler-checkable module")

    e = sub.add_parser("eval", help="query a model endpoint on a tasks file")
    e.add_argument("tasks", type=Path)
    e.add_argument("--endpoint", required=True, help="endpoint name from the config")
    e.add_argument("--repeats", type=int)
    e.add_argument("--run-id")
    e.add_argument("--base-url", help="override the endpoint URL")
    e.add_argument("--model", help="override the model id")
    e.add_argument("--emit-proof", action="store_true")
    _report_flags(e)

    rp = sub.add_parser("report", help="render stored runs and derived metrics")
    rp.add_argument("runs", nargs="*", help="run ids stored in the output directory")
    rp.add_argument("--tasks", type=Path, help="tasks file, enables error categories")
    _report_flags(rp)

    v = sub.add_parser("verify", help="run the oracle and operator-algebra self-checks")
    v.add_argument("--corpus", type=Path)
    v.add_argument("--db", type=Path)
    v.add_argument("--laws", type=int, default=10_000, help="random triples for the equivalence laws")
    return p


def _report_flags(p):
    p.add_argument("--report", choices=("json", "csv", "md"), default=None)
    p.add_argument("--rs", nargs=2, metavar=("ACC", "ACC_PURE"), help="run ids or numbers")
    p.add_argument("--re", nargs=2, metavar=("base=A,P", "ttc=A,P"), help="run ids or numbers")


# ---------------------------------------------------------------- commands


def _summary(tasks) -> str:
    split = category_split(tasks)
    n = len(tasks)
    pct = [split[k] / n * 100 for k in ("Monomorphic", "Parametric", "AdHoc")]
    return f"{n} tasks ({pct[0]:.1f}% mono / {pct[1]:.1f}% parametric / {pct[2]:.1f}% ad-hoc)"


def _pure_tasks(tasks, scheme):
    pure, plans = [], []
    for t in tasks:
        p, plan = alpha_rewrite_with_plan(t, scheme)
        pure.append(p)
        plans.append(plan)
    return pure, plans


def cmd_build(args, cfg: CliConfig) -> int:
    corpus = args.corpus or cfg.corpus or bundled_corpus()
    db_path = args.db or cfg.db or bundled_db()
    try:
        text = Path(corpus).read_text(encoding="utf-8")
        db = SignatureDB.load(db_path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        tasks = build_tasks(text, db, Path(corpus).name)
    except MissingDeps as exc:
        print(f"error: unresolved names: {', '.join(exc.names)}", file=sys.stderr)
        return EXIT_MISSING
    if not tasks:
        print("error: no tasks", file=sys.stderr)
        return EXIT_MISSING
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
        write_tasks(cfg.out / "tasks.regular.jsonl", tasks)
        if args.pure:
            pure, _ = _pure_tasks(tasks, cfg.naming)
            write_tasks(cfg.out / "tasks.pure.jsonl", pure)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(_summary(tasks))
    return EXIT_OK


def cmd_rewrite(args, cfg: CliConfig) -> int:
    try:
        tasks = read_tasks(args.tasks)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        pure, plans = _pure_tasks(tasks, cfg.naming)
    except RewriteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_tasks(cfg.out / "tasks.pure.jsonl", pure)
    if args.plans:
        with open(cfg.out / "plans.jsonl", "w", encoding="utf-8") as fh:
            for task, plan in zip(pure, plans):
                fh.write(json.dumps({"id": task.id, "plan": plan.to_json()}, sort_keys=True) + "\n")
    print(f"{len(pure)} tasks rewritten")
    return EXIT_OK


def cmd_check(args, cfg: CliConfig) -> int:
    try:
        truth = parse_type(args.truth)
        answer = parse_type(args.answer)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    same = alpha_equivalent(truth, answer)
    if args.emit_proof:
        args.emit_proof.write_text(emit_proof_module(truth, answer), encoding="utf-8")
    print("equivalent" if same else "not equivalent")
    return EXIT_OK if same else EXIT_NOT_EQUIVALENT


def _run_path(cfg: CliConfig, run_id: str) -> Path:
    return cfg.out / f"{run_id}.run.json"


def _metric_operand(text: str, cfg: CliConfig):
    try:
        return float(text)
    except ValueError:
        return accuracy_summary(RunReport.load(_run_path(cfg, text)))


def _pair(text: str, label: str, cfg: CliConfig):
    if "=" in text:
        key, text = text.split("=", 1)
        if key != label:
            raise ValueError(f"expected {label}=..., got {key}=")
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"{label} needs two comma-separated values: Acc,Acc_pure")
    return tuple(_metric_operand(p, cfg) for p in parts)


def _derived_metrics(args, cfg: CliConfig) -> list[MetricValue]:
    out = []
    if args.rs:
        out.append(robustness_score(*(_metric_operand(x, cfg) for x in args.rs)))
    if args.re:
        out.append(reasoning_effectiveness(_pair(args.re[0], "base", cfg), _pair(args.re[1], "ttc", cfg)))
    return out


def _emit(args, cfg, name, metrics, outcomes, tasks) -> None:
    fmt = args.report or "json"
    text = render_report(metrics, outcomes, fmt, tasks)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"{name}.report.{fmt}").write_text(text, encoding="utf-8")
    if args.report:
        sys.stdout.write(text)
    else:
        for m in metrics:
            print(f"{m.name} {m.value:.2f}" + (f" +/- {m.stderr:.2f}" if m.stderr is not None else ""))


def cmd_eval(args, cfg: CliConfig) -> int:
    if args.endpoint not in cfg.endpoints:
        print(f"error: no endpoint named {args.endpoint!r} in config", file=sys.stderr)
        return EXIT_IO
    endpoint = cfg.endpoints[args.endpoint]
    overrides = {k: v for k, v in (("base_url", args.base_url), ("model_id", args.model)) if v}
    if overrides:
        endpoint = ModelEndpointConfig(**{**endpoint.__dict__, **overrides})
    try:
        tasks = read_tasks(args.tasks)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    raw_dir = cfg.out / "raw"
    try:
        report = run_benchmark(tasks, endpoint, args.repeats or cfg.repeats, run_id=args.run_id,
                               raw_dir=raw_dir, emit_proof=args.emit_proof)
    except EndpointUnreachable as exc:
        partial = getattr(exc, "report", None)
        where = f"; partial report in {raw_dir}/{partial.run_id}.partial.json" if partial else ""
        print(f"error: endpoint unreachable: {exc}{where}", file=sys.stderr)
        return EXIT_UNREACHABLE
    report.save(_run_path(cfg, report.run_id))
    metrics = [accuracy_summary(report)] + _derived_metrics(args, cfg)
    _emit(args, cfg, report.run_id, metrics, report.per_task, tasks)
    return EXIT_OK


def cmd_report(args, cfg: CliConfig) -> int:
    try:
        reports = [RunReport.load(_run_path(cfg, r)) for r in args.runs]
        tasks = read_tasks(args.tasks) if args.tasks else None
        metrics = [accuracy_summary(r) for r in reports] + _derived_metrics(args, cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EmptyReport as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    outcomes = [o for r in reports for o in r.per_task]
    name = "-".join(args.runs) if args.runs else "metrics"
    _emit(args, cfg, name, metrics, outcomes, tasks)
    return EXIT_OK


def cmd_verify(args, cfg: CliConfig) -> int:
    from .selfcheck import (
        check_equivalence_laws,
        check_oracle_agreement,
        check_rewrite_algebra,
        constrained_universe,
        type_universe,
    )

    ok = True
    for label, sigs in (("unconstrained", type_universe()), ("constrained", constrained_universe())):
        r = check_oracle_agreement(sigs)
        ok &= r.ok
        print(f"oracle {label}: {r.signatures} signatures, {r.pairs} pairs, "
              f"{len(r.disagreements)} disagreements ({r.seconds:.1f}s)")
    laws = check_equivalence_laws(args.laws, args.seed)
    ok &= laws.ok
    print(f"equivalence laws: {laws.triples} triples, {len(laws.failures)} failures (seed {args.seed})")
    corpus = args.corpus or cfg.corpus or bundled_corpus()
    db = SignatureDB.load(args.db or cfg.db or bundled_db())
    tasks = build_tasks(Path(corpus).read_text(encoding="utf-8"), db, Path(corpus).name)
    alg = check_rewrite_algebra(tasks)
    ok &= alg.ok
    print(f"rewrite algebra: {alg.tasks} tasks, {len(alg.failures)} failures")
    for f in alg.failures[:10]:
        print(f"  {f}")
    return EXIT_OK if ok else EXIT_MISSING


COMMANDS = {
    "build": cmd_build,
    "rewrite": cmd_rewrite,
    "check": cmd_check,
    "eval": cmd_eval,
    "report": cmd_report,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        cfg = CliConfig.load(args.config) if args.config else CliConfig()
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.out:
        cfg.out = args.out
    try:
        return COMMANDS[args.command](args, cfg)
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

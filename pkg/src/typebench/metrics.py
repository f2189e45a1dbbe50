"""Accuracy, robustness and reasoning metrics, error classes, report rendering."""

from __future__ import annotations

import csv
import io
import itertools
import json
import re
from collections import Counter
from dataclasses import dataclass

from .corpus import CATEGORIES, Task
from .equivalence import alpha_equivalent, canonicalize, subsumes
from .errors import EmptyReport, ParseError, UndefinedDelta
from .harness import RunReport, TaskOutcome
from .types import TypeSignature, arrow, arrow_parts, parse_type

METRIC_NAMES = ("Acc", "Acc_pure", "RS", "RE")

# Fixed order in which the rules are tried; the first match wins.
ERROR_LADDER = (
    "ResponseError",
    "InstructionFollowing",
    "SyntaxError",
    "ArityMismatch",
    "OverGeneralization",
    "UnderGeneralization",
    "ConstraintError",
    "ArgOrderMismatch",
    "Unclassified",
)


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    inputs: tuple = ()
    stderr: float | None = None
    model: str | None = None
    note: str | None = None

    def __post_init__(self):
        if self.name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.name!r}")
        if self.name in ("Acc", "Acc_pure") and not 0.0 <= self.value <= 100.0:
            raise ValueError(f"{self.name} must lie in [0, 100], got {self.value}")
        if self.name == "RS" and self.value < 0:
            raise ValueError("RS must be non-negative")

    def to_json(self) -> dict:
        out = {"name": self.name, "value": self.value, "inputs": list(self.inputs)}
        for key in ("stderr", "model", "note"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out


def _value(x) -> float:
    return x.value if isinstance(x, MetricValue) else float(x)


def _inputs(*xs) -> tuple:
    out = []
    for x in xs:
        if isinstance(x, MetricValue):
            out += [i for i in x.inputs if i not in out]
    return tuple(out)


def accuracy_summary(report: RunReport, name: str | None = None) -> MetricValue:
    """Mean per-repeat accuracy in percent, with its standard error."""
    if not report.per_task:
        raise EmptyReport(f"run {report.run_id} has no outcomes")
    name = name or ("Acc_pure" if report.variant == "pure" else "Acc")
    return MetricValue(
        name,
        report.mean_accuracy * 100,
        (report.run_id,),
        stderr=report.stderr * 100,
        model=report.model_id,
    )


def robustness_score(acc, acc_pure) -> MetricValue:
    a, p = _value(acc), _value(acc_pure)
    if a == 0:
        raise ZeroDivisionError("robustness score undefined for zero accuracy")
    model = getattr(acc, "model", None) or getattr(acc_pure, "model", None)
    return MetricValue("RS", p / a * 100, _inputs(acc, acc_pure), model=model)


def reasoning_effectiveness(base, ttc) -> MetricValue:
    """Pure-variant gain divided by regular gain when reasoning is enabled.

    ``base`` and ``ttc`` are (Acc, Acc_pure) pairs of numbers or metrics.
    """
    (b_acc, b_pure), (t_acc, t_pure) = base, ttc
    delta = _value(t_acc) - _value(b_acc)
    if delta == 0:
        raise UndefinedDelta("regular accuracy did not change; the ratio is undefined")
    value = (_value(t_pure) - _value(b_pure)) / delta
    note = "below 1: the pure-variant gain trails the regular gain" if value < 1 else None
    model = next((m.model for m in (b_acc, t_acc) if isinstance(m, MetricValue) and m.model), None)
    return MetricValue("RE", value, _inputs(b_acc, b_pure, t_acc, t_pure), model=model, note=note)


# ---------------------------------------------------------- error classes

_BACKTICK_SPAN = re.compile(r"```(?:[A-Za-z]*\n)?(.*?)```|`([^`\n]+)`", re.S)


def _try_parse(text: str):
    try:
        return parse_type(text.strip())
    except (ParseError, RecursionError):
        return None


def embedded_signature(text: str):
    """A type found inside prose: a backtick span, text after ``::``, or an arrow line."""
    for m in _BACKTICK_SPAN.finditer(text):
        span = (m.group(1) or m.group(2) or "").strip()
        if "::" in span:
            span = span.split("::", 1)[1]
        found = _try_parse(span)
        if found is not None:
            return found
    for line in text.splitlines():
        if "::" in line:
            found = _try_parse(line.split("::", 1)[1])
            if found is not None:
                return found
    for line in text.splitlines():
        if "->" in line:
            found = _try_parse(line.strip().rstrip("."))
            if found is not None:
                return found
    return None


def _stripped(sig: TypeSignature) -> TypeSignature:
    c = canonicalize(sig, strict=False)
    return TypeSignature(sig.binding, c.context, c.body)


def classify_error(task: Task, outcome: TaskOutcome) -> str:
    """Assign exactly one category from ERROR_LADDER to a wrong answer."""
    if outcome.verdict == "Correct":
        raise ValueError("correct outcomes are not classified")
    if outcome.verdict in ("Empty", "Timeout") or not (outcome.extracted or "").strip():
        return "ResponseError"
    answer = _try_parse(outcome.extracted)
    if answer is None:
        if embedded_signature(outcome.extracted) is not None:
            return "InstructionFollowing"
        return "SyntaxError"
    truth = _stripped(task.truth)
    answer = _stripped(TypeSignature(task.target, answer.context, answer.body))
    t_parts, a_parts = arrow_parts(truth.body), arrow_parts(answer.body)
    if len(t_parts) != len(a_parts):
        return "ArityMismatch"
    if alpha_equivalent(truth, answer):
        return "Unclassified"  # verdict disagrees with the checker; keep it visible
    if subsumes(answer, truth):
        return "OverGeneralization"
    if subsumes(truth, answer):
        return "UnderGeneralization"
    bare_t = TypeSignature(truth.binding, (), truth.body)
    bare_a = TypeSignature(answer.binding, (), answer.body)
    if alpha_equivalent(bare_t, bare_a):
        return "ConstraintError"
    args, result = a_parts[:-1], a_parts[-1]
    if 1 < len(args) <= 7:
        for perm in itertools.permutations(args):
            if list(perm) == args:
                continue
            candidate = TypeSignature(answer.binding, answer.context, arrow(*perm, result))
            if alpha_equivalent(truth, candidate):
                return "ArgOrderMismatch"
    return "Unclassified"


# -------------------------------------------------------------- rendering


def category_breakdown(outcomes) -> dict:
    table = {c: {"correct": 0, "total": 0} for c in CATEGORIES}
    for o in outcomes:
        if o.category in table:
            table[o.category]["total"] += 1
            table[o.category]["correct"] += o.verdict == "Correct"
    for row in table.values():
        row["accuracy"] = round(row["correct"] / row["total"] * 100, 2) if row["total"] else None
    return table


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.2f}"


def _markdown(metrics, outcomes, tasks) -> str:
    has_re = any(m.name == "RE" for m in metrics)
    cols = ["Model", "Acc", "Acc_pure", "RS"] + (["RE"] if has_re else [])
    rows: dict = {}
    for m in metrics:
        rows.setdefault(m.model or "-", {})[m.name] = m.value
    lines = ["| " + " | ".join(cols) + " |", "|" + "|".join("---" for _ in cols) + "|"]
    for model, vals in rows.items():
        lines.append("| " + " | ".join([model] + [_fmt(vals.get(c)) for c in cols[1:]]) + " |")
    lines += ["", "## Accuracy by category", "", "| Category | Correct | Total | Acc |", "|---|---|---|---|"]
    for cat, row in category_breakdown(outcomes).items():
        lines.append(f"| {cat} | {row['correct']} | {row['total']} | {_fmt(row['accuracy'])} |")
    if tasks is not None:
        errors = error_breakdown(outcomes, tasks)
        if errors:
            lines += ["", "## Error categories", "", "| Category | Count |", "|---|---|"]
            lines += [f"| {k} | {v} |" for k, v in errors.items()]
    return "\n".join(lines) + "\n"


def error_breakdown(outcomes, tasks) -> dict:
    by_id = {t.id: t for t in tasks}
    counts = Counter(
        classify_error(by_id[o.task_id], o) for o in outcomes
        if o.verdict != "Correct" and o.task_id in by_id
    )
    return {k: counts[k] for k in ERROR_LADDER if counts[k]}


def _csv(outcomes, tasks) -> str:
    by_id = {t.id: t for t in tasks} if tasks is not None else {}
    grouped: dict = {}
    for o in outcomes:
        grouped.setdefault(o.task_id, []).append(o)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task_id", "category", "correct", "total", "accuracy", "verdicts", "error_categories"])
    for task_id, group in grouped.items():
        group.sort(key=lambda o: o.repeat)
        correct = sum(o.verdict == "Correct" for o in group)
        errors = ""
        if task_id in by_id:
            errors = ";".join(classify_error(by_id[task_id], o) for o in group if o.verdict != "Correct")
        w.writerow([
            task_id,
            group[0].category or "",
            correct,
            len(group),
            f"{correct / len(group) * 100:.2f}",
            ";".join(o.verdict for o in group),
            errors,
        ])
    return buf.getvalue()


def render_report(metrics, outcomes, fmt: str = "json", tasks=None) -> str:
    """Render metrics and outcomes as json, csv (one row per task) or markdown."""
    metrics, outcomes = list(metrics), list(outcomes)
    if fmt == "json":
        doc = {"metrics": [m.to_json() for m in metrics], "outcomes": [o.to_json() for o in outcomes]}
        if outcomes:
            doc["by_category"] = category_breakdown(outcomes)
            if tasks is not None:
                doc["errors"] = error_breakdown(outcomes, tasks)
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        return _csv(outcomes, tasks)
    if fmt in ("md", "markdown"):
        return _markdown(metrics, outcomes, tasks)
    raise ValueError(f"unknown report format {fmt!r}")

"""Prompting, querying, post-processing and scoring of model answers."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from urllib.parse import quote

import httpx

from .corpus import Task
from .equivalence import alpha_equivalent, emit_proof_module
from .errors import EndpointUnreachable, ParseError, PlaceholderUnfillable
from .types import parse_type

log = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "Act as a static analysis tool for type inference.\n"
    "ONLY output the type signature. \n"
    "Do Not Provide any additional commentaries or explanations."
)
INSTRUCTION_PROMPT = (
    "Remember that in Haskell:\n"
    "1. The list type `[a]` is a polymorphic type, defined as `data [] a = [] | (:) a [a]`,\n"
    "so `(:)` is a constructor for list type.\n"
    "2. The String type is a list of characters, defined as `type String = [Char]`"
)
VARIABLE_HINTS = {
    "regular": (
        "For polymorphic type variables, you can use type variables like `a`, `b`, `c`, etc.\n"
        "You should start with `a` and increment the alphabet as needed."
    ),
    "pure": (
        "For polymorphic type variables, you can use type variables like `t1`, `t2`, `t3`, etc.\n"
        "You should start with `t1` and increment the number as needed."
    ),
}
MERGE_MODES = ("split-roles", "single-message")
VERDICTS = ("Correct", "Incorrect", "ParseFailure", "Empty", "Timeout")


# ------------------------------------------------------------------ prompts


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str
    merge_mode: str = "split-roles"

    def __post_init__(self):
        if self.merge_mode not in MERGE_MODES:
            raise ValueError(f"merge_mode must be one of {MERGE_MODES}")

    @property
    def text(self) -> str:
        return self.system + "\n\n" + self.user

    def messages(self) -> list[dict]:
        if self.merge_mode == "single-message":
            return [{"role": "user", "content": self.text}]
        return [{"role": "system", "content": self.system}, {"role": "user", "content": self.user}]


def hook_for(target: str) -> str:
    return f"{target} ::"


def assemble_prompt(task: Task, variant: str | None = None, merge_mode: str = "split-roles") -> PromptBundle:
    variant = variant or task.variant
    system = SYSTEM_PROMPT + "\n\n" + INSTRUCTION_PROMPT + "\n\n" + VARIABLE_HINTS[variant]
    parts = []
    if task.dependencies:
        parts.append("\n".join(d.text for d in task.dependencies) + "\n")
    parts.append(task.implementation)
    parts.append(f"-- complete the following type signature for `{task.target}`")
    parts.append(hook_for(task.target))
    return PromptBundle(system, "\n".join(parts), merge_mode)


# --------------------------------------------------------- post-processing

_FENCE_OPEN = re.compile(r"\A\s*```[^\n]*\n?")
_FENCE_CLOSE = re.compile(r"\n?```\s*\Z")
_CHAR_LIST = re.compile(r"\[\s*Char\s*\]")


def _hook_pattern(hook: str) -> re.Pattern:
    name = hook.strip()
    if name.endswith("::"):
        name = name[:-2].rstrip()
    return re.compile(r"(?<![\w'])" + re.escape(name) + r"\s*::")


def postprocess_response(raw: str, hook: str) -> str | None:
    """Clean a raw answer; returns None when nothing is left.

    Steps, in order: drop the opening and closing code fences, delete every
    copy of the hook, spell ``[Char]`` as ``String``, trim.
    """
    text = raw or ""
    if _FENCE_OPEN.match(text):
        text = _FENCE_OPEN.sub("", text, count=1)
        text = _FENCE_CLOSE.sub("", text, count=1)
    text = _hook_pattern(hook).sub("", text)
    text = _CHAR_LIST.sub("String", text)
    text = text.strip()
    return text or None


def normalize_truth_text(text: str, hook: str) -> str:
    """The same rewriting applied to the ground-truth side."""
    return postprocess_response(text, hook) or ""


# ----------------------------------------------------------------- scoring


@dataclass
class TaskOutcome:
    task_id: str
    raw_response: str
    extracted: str | None
    verdict: str
    latency_ms: float = 0.0
    repeat: int = 0
    category: str | None = None
    proof: str | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    def to_json(self) -> dict:
        d = asdict(self)
        if d["proof"] is None:
            del d["proof"]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "TaskOutcome":
        return cls(**obj)


def score_response(
    task: Task,
    extracted: str | None,
    raw: str = "",
    latency_ms: float = 0.0,
    repeat: int = 0,
    emit_proof: bool = False,
) -> TaskOutcome:
    """Correct iff the answer parses and is alpha-equivalent to the truth."""

    def outcome(verdict, proof=None):
        return TaskOutcome(task.id, raw, extracted, verdict, latency_ms, repeat, task.category, proof)

    if extracted is None or not extracted.strip():
        return outcome("Empty")
    try:
        answer = parse_type(extracted, binding=task.target)
    except (ParseError, RecursionError):
        return outcome("ParseFailure")
    verdict = "Correct" if alpha_equivalent(task.truth, answer) else "Incorrect"
    proof = None
    if emit_proof:
        try:
            proof = emit_proof_module(task.truth, answer)
        except PlaceholderUnfillable:
            proof = None
    return outcome(verdict, proof)


# ---------------------------------------------------------------- endpoint


@dataclass
class ModelEndpointConfig:
    model_id: str
    base_url: str = "http://localhost:8000/v1"
    api_key_env: str | None = None
    timeout_s: float = 300.0
    max_in_flight: int = 4
    merge_mode: str = "split-roles"
    ttc: bool = False
    ttc_fields: dict = field(default_factory=dict)
    retries: int = 2
    backoff_s: float = 1.0

    def __post_init__(self):
        if not self.timeout_s > 0:
            raise ValueError("timeout_s must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")
        if self.merge_mode not in MERGE_MODES:
            raise ValueError(f"merge_mode must be one of {MERGE_MODES}")

    @classmethod
    def from_json(cls, obj: dict) -> "ModelEndpointConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown endpoint keys: {', '.join(sorted(unknown))}")
        return cls(**obj)


class TransientError(Exception):
    """A failed request worth retrying (server error, rate limit, timeout)."""


class HttpChatClient:
    """Chat-completion client: POST {base_url}/chat/completions."""

    def __init__(self, cfg: ModelEndpointConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        headers = {}
        if cfg.api_key_env:
            token = os.environ.get(cfg.api_key_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(timeout=cfg.timeout_s, headers=headers, transport=transport)

    def close(self):
        self._client.close()

    def __call__(self, task: Task, bundle: PromptBundle) -> str:
        body = {"model": self.cfg.model_id, "messages": bundle.messages()}
        if self.cfg.ttc:
            body.update(self.cfg.ttc_fields)
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = self._client.post(url, json=body)
        except httpx.TimeoutException as exc:
            raise TransientError(str(exc)) from exc
        except httpx.TransportError as exc:
            raise EndpointUnreachable(f"{url}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}")
        resp.raise_for_status()
        content = resp.json()["choices"][0]["message"].get("content")
        return content or ""


# ------------------------------------------------------------------ report


@dataclass
class RunReport:
    run_id: str
    model_id: str
    variant: str
    ttc_flag: bool
    repeats: int
    per_task: list
    mean_accuracy: float
    stderr: float

    def per_repeat_accuracy(self) -> list[float]:
        return per_repeat_accuracy(self.per_task, self.repeats)

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "model_id": self.model_id,
            "variant": self.variant,
            "ttc_flag": self.ttc_flag,
            "repeats": self.repeats,
            "per_task": [o.to_json() for o in self.per_task],
            "mean_accuracy": self.mean_accuracy,
            "stderr": self.stderr,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_json(cls, obj: dict) -> "RunReport":
        return cls(
            run_id=obj["run_id"],
            model_id=obj["model_id"],
            variant=obj["variant"],
            ttc_flag=obj["ttc_flag"],
            repeats=obj["repeats"],
            per_task=[TaskOutcome.from_json(o) for o in obj["per_task"]],
            mean_accuracy=obj["mean_accuracy"],
            stderr=obj["stderr"],
        )

    @classmethod
    def load(cls, path) -> "RunReport":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def per_repeat_accuracy(outcomes, repeats: int) -> list[float]:
    totals = [0] * repeats
    correct = [0] * repeats
    for o in outcomes:
        totals[o.repeat] += 1
        correct[o.repeat] += o.verdict == "Correct"
    return [c / t if t else 0.0 for c, t in zip(correct, totals)]


def mean_and_stderr(values) -> tuple[float, float]:
    """Sample mean and its standard error (n - 1 denominator)."""
    values = list(values)
    mean = statistics.fmean(values)
    if len(values) < 2:
        return mean, 0.0
    return mean, statistics.stdev(values) / math.sqrt(len(values))


def _make_report(run_id, cfg, variant, repeats, outcomes, order) -> RunReport:
    outcomes = sorted(outcomes, key=lambda o: (o.repeat, order.get(o.task_id, len(order))))
    mean, err = mean_and_stderr(per_repeat_accuracy(outcomes, repeats))
    return RunReport(run_id, cfg.model_id, variant, cfg.ttc, repeats, outcomes, mean, err)


# -------------------------------------------------------------- raw store


def raw_path(root, run_id: str, task_id: str, repeat: int) -> Path:
    return Path(root) / run_id / quote(task_id, safe="@:-_.") / f"{repeat}.txt"


def _store_raw(root, run_id, task_id, repeat, text):
    path = raw_path(root, run_id, task_id, repeat)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def default_run_id(suite, cfg: ModelEndpointConfig, variant: str, repeats: int) -> str:
    h = hashlib.sha1()
    for part in [cfg.model_id, variant, str(cfg.ttc), str(repeats)] + [t.id for t in suite]:
        h.update(part.encode() + b"\0")
    safe_model = re.sub(r"[^A-Za-z0-9_.-]+", "-", cfg.model_id)
    return f"{safe_model}-{variant}-{h.hexdigest()[:10]}"


# ------------------------------------------------------------------ runner


def run_benchmark(
    suite,
    cfg: ModelEndpointConfig,
    repeats: int = 3,
    client=None,
    variant: str | None = None,
    run_id: str | None = None,
    raw_dir=None,
    emit_proof: bool = False,
    sleep=time.sleep,
) -> RunReport:
    """Query every task ``repeats`` times and aggregate the verdicts.

    ``client(task, bundle) -> str`` defaults to an HTTP chat-completion
    client.  Transient failures are retried ``cfg.retries`` times with
    exponential backoff, then recorded as Timeout.  A connection failure
    raises EndpointUnreachable; the outcomes gathered so far are written
    to ``<raw_dir>/<run_id>.partial.json`` and attached as ``.report``.
    """
    suite = list(suite)
    if not suite:
        raise ValueError("empty task suite")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    variant = variant or suite[0].variant
    run_id = run_id or default_run_id(suite, cfg, variant, repeats)
    order = {t.id: i for i, t in enumerate(suite)}
    owned = client is None
    client = client or HttpChatClient(cfg)
    outcomes: list[TaskOutcome] = []
    lock = threading.Lock()
    abort = threading.Event()

    def one(task: Task, repeat: int) -> TaskOutcome:
        bundle = assemble_prompt(task, variant, cfg.merge_mode)
        for attempt in range(cfg.retries + 1):
            if abort.is_set():
                raise EndpointUnreachable("run aborted")
            start = time.monotonic()
            try:
                raw = client(task, bundle)
            except (TransientError, TimeoutError) as exc:
                log.warning("%s repeat %d attempt %d failed: %s", task.id, repeat, attempt + 1, exc)
                if attempt < cfg.retries:
                    sleep(cfg.backoff_s * 2 ** attempt)
                continue
            elapsed = (time.monotonic() - start) * 1000
            if elapsed > cfg.timeout_s * 1000:
                continue  # arrived too late; discard
            if raw_dir is not None:
                _store_raw(raw_dir, run_id, task.id, repeat, raw)
            extracted = postprocess_response(raw, hook_for(task.target))
            return score_response(task, extracted, raw, round(elapsed, 3), repeat, emit_proof)
        return TaskOutcome(task.id, "", None, "Timeout", 0.0, repeat, task.category)

    jobs = [(t, r) for r in range(repeats) for t in suite]
    try:
        with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
            futures = [pool.submit(one, t, r) for t, r in jobs]
            try:
                for fut in as_completed(futures):
                    res = fut.result()
                    with lock:
                        outcomes.append(res)
            except (EndpointUnreachable, ConnectionError) as exc:
                abort.set()
                for f in futures:
                    f.cancel()
                partial = _make_report(run_id, cfg, variant, repeats, outcomes, order)
                if raw_dir is not None:
                    Path(raw_dir).mkdir(parents=True, exist_ok=True)
                    partial.save(Path(raw_dir) / f"{run_id}.partial.json")
                err = exc if isinstance(exc, EndpointUnreachable) else EndpointUnreachable(str(exc))
                err.report = partial
                raise err from exc
    finally:
        if owned:
            client.close()
    return _make_report(run_id, cfg, variant, repeats, outcomes, order)


def replay(report: RunReport, tasks, raw_dir, emit_proof: bool = False) -> RunReport:
    """Re-score stored raw responses; timeouts and latencies come from ``report``."""
    by_id = {t.id: t for t in tasks}
    outcomes = []
    for o in report.per_task:
        if o.verdict == "Timeout":
            outcomes.append(o)
            continue
        task = by_id[o.task_id]
        path = raw_path(raw_dir, report.run_id, o.task_id, o.repeat)
        with open(path, encoding="utf-8", newline="") as fh:
            raw = fh.read()
        extracted = postprocess_response(raw, hook_for(task.target))
        outcomes.append(score_response(task, extracted, raw, o.latency_ms, o.repeat, emit_proof))
    mean, err = mean_and_stderr(per_repeat_accuracy(outcomes, report.repeats))
    return RunReport(report.run_id, report.model_id, report.variant, report.ttc_flag,
                     report.repeats, outcomes, mean, err)

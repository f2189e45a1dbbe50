import json
import math
import threading
from pathlib import Path

import httpx
import pytest

from typebench.errors import EndpointUnreachable
from typebench.harness import (
    HttpChatClient,
    ModelEndpointConfig,
    PromptBundle,
    RunReport,
    TaskOutcome,
    TransientError,
    assemble_prompt,
    hook_for,
    mean_and_stderr,
    postprocess_response,
    raw_path,
    replay,
    run_benchmark,
    score_response,
)
from typebench.types import print_signature

FIXTURE = Path(__file__).parent / "fixtures" / "postprocess.json"


def echo(task, bundle):
    return print_signature(task.truth)


class TestPrompt:
    def test_regular_ends_with_hook(self, break_task):
        bundle = assemble_prompt(break_task)
        assert bundle.user.endswith("break ::")
        assert "-- complete the following type signature for `break`" in bundle.user
        assert "break p =  span (not . p)" in bundle.user

    def test_pure_instruction_mentions_numbered_variables(self, pure_break):
        bundle = assemble_prompt(pure_break)
        assert "`t1`, `t2`, `t3`" in bundle.system
        assert bundle.user.endswith("f1 ::")

    def test_regular_instruction(self, break_task):
        assert "`a`, `b`, `c`" in assemble_prompt(break_task).system

    def test_merge_modes_share_text(self, break_task):
        split = assemble_prompt(break_task, merge_mode="split-roles")
        single = assemble_prompt(break_task, merge_mode="single-message")
        assert split.text == single.text
        assert [m["role"] for m in split.messages()] == ["system", "user"]
        assert [m["role"] for m in single.messages()] == ["user"]
        assert single.messages()[0]["content"] == split.text

    def test_dependencies_precede_implementation(self, break_task):
        user = assemble_prompt(break_task).user
        assert user.index("span ::") < user.index("break p")

    def test_unknown_merge_mode(self):
        with pytest.raises(ValueError):
            PromptBundle("s", "u", "merged")


class TestPostprocess:
    @pytest.mark.parametrize("case", json.loads(FIXTURE.read_text(encoding="utf-8")), ids=lambda c: c["name"])
    def test_fixture(self, case):
        assert postprocess_response(case["raw"], case["hook"]) == case["expected"]

    def test_hook_helper(self):
        assert hook_for("f1") == "f1 ::"


class TestScore:
    def test_correct(self, pure_break):
        assert score_response(pure_break, "(t1 -> T1) -> [t1] -> ([t1], [t1])").verdict == "Correct"

    def test_incorrect(self, pure_break):
        assert score_response(pure_break, "t1 -> t1").verdict == "Incorrect"

    def test_parse_failure(self, pure_break):
        assert score_response(pure_break, "The answer is: t1 -> t1").verdict == "ParseFailure"
        assert score_response(pure_break, "I think it maps lists.").verdict == "ParseFailure"

    def test_prose_that_happens_to_parse(self, pure_break):
        # a variable applied to three arguments is a legal type, just a wrong one
        assert score_response(pure_break, "this is probably a -> b").verdict == "Incorrect"

    def test_empty(self, pure_break):
        assert score_response(pure_break, None).verdict == "Empty"

    def test_proof_attached(self, pure_break):
        out = score_response(pure_break, "(t1 -> T1) -> [t1] -> ([t1], [t1])", emit_proof=True)
        assert "proof = Refl" in out.proof

    def test_string_answer_matches_char_list_truth(self, tasks):
        words = next(t for t in tasks if t.target == "words")
        assert score_response(words, postprocess_response("words :: String -> [String]", "words ::")).verdict == "Correct"

    def test_outcome_json_round_trip(self, pure_break):
        out = score_response(pure_break, "t1", raw="t1", latency_ms=3.5, repeat=2)
        assert TaskOutcome.from_json(out.to_json()) == out


class TestConfig:
    def test_defaults(self):
        cfg = ModelEndpointConfig("m")
        assert (cfg.timeout_s, cfg.retries) == (300.0, 2)

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            ModelEndpointConfig.from_json({"model_id": "m", "temperature": 0})

    @pytest.mark.parametrize("kwargs", [{"timeout_s": 0}, {"max_in_flight": 0}, {"retries": -1}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelEndpointConfig("m", **kwargs)


def counting_client(correct_on):
    """Echo the truth on the calls listed per task id; otherwise answer nonsense."""
    calls = {}
    lock = threading.Lock()

    def client(task, bundle):
        with lock:
            n = calls.get(task.id, 0)
            calls[task.id] = n + 1
        return echo(task, bundle) if n in correct_on.get(task.id, ()) else "Wrong"

    return client


class TestRunBenchmark:
    def test_echo_single_task(self, break_task):
        report = run_benchmark([break_task], ModelEndpointConfig("mock"), repeats=3, client=echo)
        assert report.mean_accuracy == 1.0
        assert report.stderr == 0.0
        assert len(report.per_task) == 3

    def test_half_correct_exactly(self, tasks):
        suite = tasks[:10]
        chosen = {t.id for t in suite[::2]}
        client = lambda t, b: echo(t, b) if t.id in chosen else "Int -> Int -> Int -> Int"
        report = run_benchmark(suite, ModelEndpointConfig("mock", max_in_flight=4), 3, client=client)
        assert report.mean_accuracy == 0.5
        assert report.stderr == 0.0

    def test_stderr_by_hand(self, tasks):
        suite = tasks[:4]
        ids = [t.id for t in suite]
        # repeat 0: 2 of 4, repeat 1: 3 of 4, repeat 2: 1 of 4
        plan = {ids[0]: (0, 1, 2), ids[1]: (0, 1), ids[2]: (1,), ids[3]: ()}
        report = run_benchmark(suite, ModelEndpointConfig("mock", max_in_flight=1), 3, client=counting_client(plan))
        assert report.per_repeat_accuracy() == [0.5, 0.75, 0.25]
        assert report.mean_accuracy == 0.5
        assert math.isclose(report.stderr, 0.25 / math.sqrt(3), rel_tol=1e-12)

    def test_order_independent(self, tasks):
        suite = tasks[:12]
        a = run_benchmark(suite, ModelEndpointConfig("mock", max_in_flight=1), 2, client=echo, run_id="r")
        b = run_benchmark(suite, ModelEndpointConfig("mock", max_in_flight=6), 2, client=echo, run_id="r")
        strip = lambda r: [(o.task_id, o.repeat, o.verdict) for o in r.per_task]
        assert strip(a) == strip(b)

    def test_retries_then_timeout(self, break_task):
        attempts = []

        def flaky(task, bundle):
            attempts.append(1)
            raise TransientError("HTTP 503")

        sleeps = []
        report = run_benchmark([break_task], ModelEndpointConfig("mock", retries=2, backoff_s=0.5), 1,
                               client=flaky, sleep=sleeps.append)
        assert len(attempts) == 3
        assert sleeps == [0.5, 1.0]
        assert report.per_task[0].verdict == "Timeout"

    def test_retry_recovers(self, break_task):
        state = {"n": 0}

        def flaky(task, bundle):
            state["n"] += 1
            if state["n"] == 1:
                raise TransientError("HTTP 429")
            return echo(task, bundle)

        report = run_benchmark([break_task], ModelEndpointConfig("mock"), 1, client=flaky, sleep=lambda s: None)
        assert report.per_task[0].verdict == "Correct"

    def test_unreachable_persists_partial(self, tasks, tmp_path):
        def dead(task, bundle):
            raise EndpointUnreachable("connection refused")

        with pytest.raises(EndpointUnreachable) as info:
            run_benchmark(tasks[:3], ModelEndpointConfig("mock"), 1, client=dead, raw_dir=tmp_path, run_id="dead")
        assert (tmp_path / "dead.partial.json").exists()
        assert info.value.report.run_id == "dead"

    def test_empty_suite(self):
        with pytest.raises(ValueError):
            run_benchmark([], ModelEndpointConfig("mock"))

    def test_replay_is_byte_identical(self, tasks, tmp_path):
        suite = tasks[:8]
        chosen = {t.id for t in suite[:3]}
        client = lambda t, b: "```haskell\n" + echo(t, b) + "\n```" if t.id in chosen else "no idea"
        report = run_benchmark(suite, ModelEndpointConfig("mock"), 3, client=client, raw_dir=tmp_path, run_id="r1")
        assert raw_path(tmp_path, "r1", suite[0].id, 2).exists()
        report.save(tmp_path / "r1.run.json")
        loaded = RunReport.load(tmp_path / "r1.run.json")
        assert loaded.dumps() == report.dumps()
        assert replay(loaded, suite, tmp_path).dumps() == report.dumps()

    def test_full_corpus_outcome_count(self, tasks):
        report = run_benchmark(tasks, ModelEndpointConfig("mock", max_in_flight=8), 3, client=echo)
        assert len(report.per_task) == 564
        assert report.mean_accuracy == 1.0


def test_mean_and_stderr_single_value():
    assert mean_and_stderr([0.7]) == (0.7, 0.0)


class TestHttpClient:
    def test_request_shape(self, break_task):
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["body"] = json.loads(request.content)
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={"choices": [{"message": {"content": "break :: a"}}]})

        cfg = ModelEndpointConfig("m1", base_url="http://x/v1", ttc=True, ttc_fields={"reasoning_effort": "high"})
        client = HttpChatClient(cfg, transport=httpx.MockTransport(handler))
        assert client(break_task, assemble_prompt(break_task)) == "break :: a"
        assert seen["url"] == "http://x/v1/chat/completions"
        assert seen["body"]["model"] == "m1"
        assert seen["body"]["reasoning_effort"] == "high"
        assert seen["body"]["messages"][0]["role"] == "system"
        assert seen["auth"] is None

    def test_api_key_from_environment(self, break_task, monkeypatch):
        monkeypatch.setenv("TB_TEST_KEY", "sekrit")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={"choices": [{"message": {"content": ""}}]})

        cfg = ModelEndpointConfig("m1", api_key_env="TB_TEST_KEY")
        HttpChatClient(cfg, transport=httpx.MockTransport(handler))(break_task, assemble_prompt(break_task))
        assert seen["auth"] == "Bearer sekrit"

    def test_server_error_is_transient(self, break_task):
        transport = httpx.MockTransport(lambda r: httpx.Response(502))
        with pytest.raises(TransientError):
            HttpChatClient(ModelEndpointConfig("m"), transport=transport)(break_task, assemble_prompt(break_task))

    def test_connect_error_is_unreachable(self, break_task):
        def handler(request):
            raise httpx.ConnectError("refused", request=request)

        client = HttpChatClient(ModelEndpointConfig("m"), transport=httpx.MockTransport(handler))
        with pytest.raises(EndpointUnreachable):
            client(break_task, assemble_prompt(break_task))

    def test_end_to_end_over_http(self, tasks):
        truths = {}

        def handler(request):
            user = json.loads(request.content)["messages"][-1]["content"]
            target = user.rsplit("\n", 1)[1][: -len(" ::")]
            return httpx.Response(200, json={"choices": [{"message": {"content": truths[target]}}]})

        suite = [t for t in tasks if t.category == "Parametric"][:5]
        truths = {t.target: print_signature(t.truth) for t in suite}
        cfg = ModelEndpointConfig("m")
        client = HttpChatClient(cfg, transport=httpx.MockTransport(handler))
        report = run_benchmark(suite, cfg, 2, client=client)
        assert report.mean_accuracy == 1.0

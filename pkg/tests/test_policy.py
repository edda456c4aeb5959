"""Policy layer tests: prompt template, tokenization, segmentation, backends."""

import json
import pathlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from astar_decoding import Candidate, HttpPolicy, SamplingParams, ScriptedPolicy, render_cot_prompt, segment
from astar_decoding.errors import MalformedResponse, PolicyUnavailable
from astar_decoding.policy import (
    FINAL_ANSWER_MARKER,
    TERMINAL_PHRASE,
    _split_usage,
    count_tokens,
    greedy,
    make_candidate,
)

from _support import FakeEndpoint, completions_payload

DATA = pathlib.Path(__file__).parent / "data"


# ---------------------------------------------------------------------------
# Prompt template and token counting


def test_cot_prompt_matches_golden_file():
    golden = (DATA / "cot_prompt_golden.txt").read_text(encoding="utf-8")
    assert render_cot_prompt("What is $1+1$?") == golden


def test_cot_prompt_strips_problem_whitespace():
    assert render_cot_prompt(" x \n") == render_cot_prompt("x")


def test_count_tokens():
    assert count_tokens("") == 0
    assert count_tokens("a") == 1
    assert count_tokens("a b  c\n") == 3
    assert count_tokens(" ") == 1  # non-empty text never counts as zero


# ---------------------------------------------------------------------------
# Sampling params and candidates


def test_sampling_params_validation():
    with pytest.raises(ValueError):
        SamplingParams(temperature=-0.1)
    with pytest.raises(ValueError):
        SamplingParams(top_p=0.0)
    with pytest.raises(ValueError):
        SamplingParams(top_p=1.5)
    with pytest.raises(ValueError):
        SamplingParams(max_tokens_per_step=0)


def test_greedy_zeroes_temperature_only():
    params = SamplingParams(temperature=0.8, top_p=0.9, seed=7)
    g = greedy(params)
    assert g.temperature == 0.0
    assert g.top_p == 1.0
    assert g.seed == 7
    assert g.max_tokens_per_step == params.max_tokens_per_step


def test_candidate_validation():
    with pytest.raises(MalformedResponse):
        Candidate(text="", token_count=1)
    with pytest.raises(MalformedResponse):
        Candidate(text="x", token_count=0)
    with pytest.raises(MalformedResponse):
        Candidate(text="x", token_count=1, finish_reason="banana")
    with pytest.raises(MalformedResponse):
        Candidate(text="x", token_count=1, contains_eos=True, finish_reason="stop_marker")


def test_make_candidate_detects_terminal_phrase():
    cand = make_candidate(f"answer. {TERMINAL_PHRASE}\n")
    assert cand.contains_eos and cand.finish_reason == "eos"
    step = make_candidate("## Step 1: x\n")
    assert not step.contains_eos and step.finish_reason == "stop_marker"
    forced = make_candidate("plain text", eos=True)
    assert forced.contains_eos


# ---------------------------------------------------------------------------
# Segmentation


def test_segment_golden_boundaries():
    text = (
        "## Step 1: Add\nwork here\n"
        "## Step 2: Check\nmore work\n"
        f"{FINAL_ANSWER_MARKER} boxed{{5}}. {TERMINAL_PHRASE}"
    )
    thoughts = segment(text)
    assert [t.text for t in thoughts] == [
        "## Step 1: Add\nwork here\n",
        "## Step 2: Check\nmore work\n",
        f"{FINAL_ANSWER_MARKER} boxed{{5}}. {TERMINAL_PHRASE}",
    ]
    assert [t.contains_eos for t in thoughts] == [False, False, True]
    assert segment("") == []


@given(st.text(max_size=300))
def test_segment_round_trips_any_text(text):
    assert "".join(t.text for t in segment(text)) == text


@given(st.lists(st.sampled_from(["## Step 3: go\n", "filler line\n", FINAL_ANSWER_MARKER + " boxed{1}."]), max_size=8))
def test_segment_round_trips_steplike_text(pieces):
    text = "".join(pieces)
    assert "".join(t.text for t in segment(text)) == text


# ---------------------------------------------------------------------------
# Scripted backend


def test_scripted_policy_is_pure_and_truncates_to_k():
    policy = ScriptedPolicy.from_texts({"p": ["a\n", "b\n", "c\n"]})
    params = SamplingParams()
    first = policy.sample("p", 2, params)
    assert [c.text for c in first] == ["a\n", "b\n"]
    assert [c.text for c in policy.sample("p", 2, params)] == ["a\n", "b\n"]
    assert policy.sample("unknown", 4, params) == []


def test_scripted_policy_dump_load_round_trip(tmp_path):
    policy = ScriptedPolicy.from_texts({"p": ["a\n", f"done. {TERMINAL_PHRASE}\n"]})
    path = tmp_path / "table.json"
    policy.dump(str(path))
    again = ScriptedPolicy.load(str(path))
    out = again.sample("p", 4, SamplingParams())
    assert [c.text for c in out] == ["a\n", f"done. {TERMINAL_PHRASE}\n"]
    assert [c.contains_eos for c in out] == [False, True]


def test_scripted_policy_rejects_bad_tables(tmp_path):
    bad_hash = tmp_path / "bad_hash.json"
    bad_hash.write_text(json.dumps({"hash": "md5", "entries": {}}))
    with pytest.raises(MalformedResponse):
        ScriptedPolicy.load(str(bad_hash))
    no_entries = tmp_path / "no_entries.json"
    no_entries.write_text(json.dumps({"hash": "sha256"}))
    with pytest.raises(MalformedResponse):
        ScriptedPolicy.load(str(no_entries))


# ---------------------------------------------------------------------------
# Usage splitting


def test_split_usage_hand_case():
    assert _split_usage(10, ["a b", "c d e f"]) == [3, 7]
    assert _split_usage(3, ["a", "b", "c"]) == [1, 1, 1]
    assert _split_usage(0, ["a", "b", "c"]) == [1, 1, 1]  # floor of one per choice
    assert _split_usage(5, []) == []


@given(st.integers(min_value=0, max_value=500), st.lists(st.text(alphabet="ab ", min_size=1, max_size=12), min_size=1, max_size=6))
def test_split_usage_preserves_the_total(total, texts):
    shares = _split_usage(total, texts)
    assert len(shares) == len(texts)
    assert all(s >= 1 for s in shares)
    if total >= len(texts):
        assert sum(shares) == total


# ---------------------------------------------------------------------------
# HTTP backend


def _http(base_url, **kwargs):
    kwargs.setdefault("backoff", 0.0)
    return HttpPolicy(base_url, "test-model", **kwargs)


def test_http_policy_parses_choices_and_splits_usage():
    payload = completions_payload(["a b", "c d e f"], total_tokens=10)
    with FakeEndpoint([(200, payload)]) as server:
        out = _http(server.base_url).sample("prefix", 2, SamplingParams())
    assert [c.text for c in out] == ["a b", "c d e f"]
    assert [c.token_count for c in out] == [3, 7]
    # "stop" with stop sequences configured reads as a step boundary, not EOS
    assert all(c.finish_reason == "stop_marker" for c in out)


def test_http_policy_request_body_carries_sampling_params():
    payload = completions_payload(["x"])
    with FakeEndpoint([(200, payload)]) as server:
        _http(server.base_url).sample("the prefix", 3, SamplingParams(temperature=0.2, top_p=0.9, seed=11))
        body = server.requests[0]["body"]
    assert body["model"] == "test-model"
    assert body["prompt"] == "the prefix"
    assert body["n"] == 3
    assert body["temperature"] == 0.2
    assert body["top_p"] == 0.9
    assert body["seed"] == 11
    assert body["stop"] == ["\n## Step"]
    assert server.requests[0]["path"] == "/completions"


def test_http_policy_bearer_token_from_env(monkeypatch):
    payload = completions_payload(["x"])
    monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
    with FakeEndpoint([(200, payload)]) as server:
        _http(server.base_url).sample("p", 1, SamplingParams())
        assert server.requests[0]["authorization"] == "Bearer sk-test"
    monkeypatch.delenv("OPENAI_API_KEY")
    with FakeEndpoint([(200, payload)]) as server:
        _http(server.base_url).sample("p", 1, SamplingParams())
        assert server.requests[0]["authorization"] is None


def test_http_policy_chat_mode():
    payload = {"choices": [{"message": {"content": "hi there"}, "finish_reason": "stop"}]}
    with FakeEndpoint([(200, payload)]) as server:
        out = _http(server.base_url, api_mode="chat").sample("p", 1, SamplingParams())
        body = server.requests[0]["body"]
    assert out[0].text == "hi there"
    assert body["messages"] == [{"role": "user", "content": "p"}]
    assert server.requests[0]["path"] == "/chat/completions"


def test_http_policy_finish_reason_mapping():
    payload = {
        "choices": [
            {"text": f"done. {TERMINAL_PHRASE}", "finish_reason": "stop"},
            {"text": "truncated mid", "finish_reason": "length"},
        ]
    }
    with FakeEndpoint([(200, payload)]) as server:
        out = _http(server.base_url).sample("p", 2, SamplingParams())
    assert out[0].contains_eos and out[0].finish_reason == "eos"
    assert not out[1].contains_eos and out[1].finish_reason == "length"


def test_http_policy_retries_transient_errors():
    good = completions_payload(["x"])
    with FakeEndpoint([(500, {"err": 1}), (200, good)]) as server:
        out = _http(server.base_url).sample("p", 1, SamplingParams())
        assert len(server.requests) == 2
    assert out[0].text == "x"


def test_http_policy_gives_up_after_max_attempts():
    with FakeEndpoint([(429, {}), (429, {}), (429, {})]) as server:
        with pytest.raises(PolicyUnavailable):
            _http(server.base_url, max_attempts=3).sample("p", 1, SamplingParams())
        assert len(server.requests) == 3


def test_http_policy_hard_errors_do_not_retry():
    with FakeEndpoint([(404, {"err": "nope"})]) as server:
        with pytest.raises(MalformedResponse):
            _http(server.base_url).sample("p", 1, SamplingParams())
        assert len(server.requests) == 1


def test_http_policy_rejects_malformed_payloads():
    with FakeEndpoint([(200, "this is not json")]) as server:
        with pytest.raises(MalformedResponse):
            _http(server.base_url).sample("p", 1, SamplingParams())
    with FakeEndpoint([(200, {"choices": []})]) as server:
        with pytest.raises(MalformedResponse):
            _http(server.base_url).sample("p", 1, SamplingParams())
    with FakeEndpoint([(200, {"choices": [{"text": ""}]})]) as server:
        with pytest.raises(MalformedResponse):
            _http(server.base_url).sample("p", 1, SamplingParams())


def test_http_policy_parallel_requests_bump_the_seed():
    payloads = [(200, completions_payload(["one"])), (200, completions_payload(["two"]))]
    with FakeEndpoint(payloads) as server:
        out = _http(server.base_url, parallel_requests=True).sample("p", 2, SamplingParams(seed=5))
        seeds = [r["body"]["seed"] for r in server.requests]
        ns = [r["body"]["n"] for r in server.requests]
    assert [c.text for c in out] == ["one", "two"]
    assert seeds == [5, 6]
    assert ns == [1, 1]


def test_http_policy_token_counts_respect_the_step_cap():
    payload = completions_payload(["a b c"], total_tokens=10_000)
    with FakeEndpoint([(200, payload)]) as server:
        out = _http(server.base_url).sample("p", 1, SamplingParams(max_tokens_per_step=4))
    assert out[0].token_count == 4

import json

import httpx
import pytest

from diffaudit.errors import ConfigurationError, ReplayMissError, TransportError
from diffaudit.llmclient import (
    FixtureStore, HttpTransport, LLMClient, RoleConfig, TokenUsage, UsageLog, call_key,
    canonical_json, estimate_cost, estimate_tokens, usage_report,
)


class Echo:
    def __init__(self, usage=True):
        self.calls = 0
        self.usage = usage

    def send(self, config, payload):
        self.calls += 1
        text = "echo: " + payload["messages"][0]["content"]
        return {"text": text}, (TokenUsage(3, 4) if self.usage else None)


class Exploding:
    def send(self, config, payload):
        raise AssertionError("transport must not be touched in replay mode")


def cfg(role="discriminator"):
    return RoleConfig(role, "m-1", endpoint="http://localhost:1/v1")


def test_call_key_is_canonical():
    a = {"b": 1, "a": [1, 2], "s": "é"}
    b = {"a": [1, 2], "s": "é", "b": 1}
    assert call_key("judge", a) == call_key("judge", b)
    assert call_key("judge", a) != call_key("summarizer", a)
    assert canonical_json(a) == '{"a":[1,2],"b":1,"s":"é"}'


def test_record_then_replay(tmp_path):
    store = FixtureStore(tmp_path)
    rec = LLMClient(cfg(), "record", store, Echo())
    first = rec.complete("hello", temperature=0.0)
    assert len(store) == 1
    assert store.path_for(first.call_key).exists()
    assert store.path_for(first.call_key).parent.name == first.call_key[:2]
    rep = LLMClient(cfg(), "replay", store, Exploding())
    again = rep.complete("hello", temperature=0.0)
    assert again.text == first.text and again.usage == first.usage


def test_replay_miss(tmp_path):
    client = LLMClient(cfg(), "replay", FixtureStore(tmp_path), Exploding())
    with pytest.raises(ReplayMissError) as exc:
        client.complete("never recorded")
    assert exc.value.exit_code == 6


def test_meta_changes_key_not_request(tmp_path):
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        return httpx.Response(200, json={"choices": [{"message": {"content": "hi"}}],
                                         "usage": {"prompt_tokens": 5, "completion_tokens": 1}})

    transport = HttpTransport(client=httpx.Client(transport=httpx.MockTransport(handler)))
    client = LLMClient(cfg(), "live", transport=transport)
    a = client.complete("x", meta={"sample": 0})
    b = client.complete("x", meta={"sample": 1})
    assert a.call_key != b.call_key
    assert seen[0] == seen[1]
    assert "meta" not in seen[0] and "kind" not in seen[0]
    assert a.usage == TokenUsage(5, 1)


def test_http_embedding_path():
    paths = []

    def handler(request):
        paths.append(request.url.path)
        return httpx.Response(200, json={"data": [{"embedding": [0.5, 0.25]}]})

    transport = HttpTransport(client=httpx.Client(transport=httpx.MockTransport(handler)))
    vec, usage = LLMClient(cfg("embedder"), transport=transport).embed("text")
    assert vec == [0.5, 0.25] and paths == ["/v1/embeddings"]
    assert usage.estimated and usage.input_tokens == estimate_tokens("text")


def test_retries_then_success():
    attempts = {"n": 0}

    def handler(request):
        attempts["n"] += 1
        if attempts["n"] < 3:
            return httpx.Response(503)
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    sleeps = []
    transport = HttpTransport(client=httpx.Client(transport=httpx.MockTransport(handler)))
    c = LLMClient(cfg(), transport=transport, sleep=sleeps.append, backoff=0.5)
    assert c.complete("x").text == "ok"
    assert sleeps == [0.5, 1.0]


def test_retries_exhausted():
    transport = HttpTransport(client=httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500))))
    c = LLMClient(cfg(), transport=transport, sleep=lambda s: None)
    with pytest.raises(TransportError) as exc:
        c.complete("x")
    assert len(exc.value.attempts) == 3 and exc.value.exit_code == 7


def test_estimated_usage_bytes_over_four():
    c = LLMClient(cfg(), transport=Echo(usage=False))
    out = c.complete("abcdefgh")
    assert out.usage == TokenUsage(2, estimate_tokens("echo: abcdefgh"), True)


def test_usage_log_and_report():
    log = UsageLog()
    c = LLMClient(cfg(), transport=Echo(), usage_log=log, stage="validate")
    for i in range(3):
        c.complete(f"p{i}")
    rep = usage_report(log.to_records(), n_hypotheses=3, prices={"discriminator": (0.10, 0.80)})
    assert rep.total == TokenUsage(9, 12)
    assert rep.by_stage_role[("validate", "discriminator")] == TokenUsage(9, 12)
    assert rep.per_hypothesis()["discriminator"] == (3.0, 4.0)
    assert rep.cost.total == pytest.approx(9e-6 * 0.10 + 12e-6 * 0.80)


def test_unpriced_roles_listed():
    rows = [{"stage": "s", "role": "subject_m1", "input_tokens": 10, "output_tokens": 1},
            {"stage": "s", "role": "judge", "input_tokens": 10, "output_tokens": 1}]
    rep = usage_report(rows, prices={"judge": (1.0, 1.0)})
    assert rep.unpriced == ("subject_m1",)
    with pytest.raises(ConfigurationError):
        estimate_cost({"subject_m1": TokenUsage(1, 1)}, {})


def test_modes_validated(tmp_path):
    with pytest.raises(ConfigurationError):
        LLMClient(cfg(), "replay")
    with pytest.raises(ConfigurationError):
        LLMClient(cfg(), "offline", FixtureStore(tmp_path))
    with pytest.raises(ConfigurationError):
        RoleConfig("oracle", "m")

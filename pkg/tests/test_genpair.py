import pytest

from diffaudit.errors import InvalidInputError, StageError, TransportError
from diffaudit.genpair import (
    DecodingConfig, generate_pairs, load_generations, save_generations,
    split_construction_validation, strip_chain_of_thought,
)
from diffaudit.llmclient import LLMClient, RoleConfig, TokenUsage

from conftest import make_bank


def subject(role, **mock):
    return LLMClient(RoleConfig(role, "mock", provider="mock", mock=mock))


@pytest.fixture
def prompts():
    return make_bank(1, 10).records


def test_cardinality(prompts):
    cs = generate_pairs("cat00", prompts, subject("subject_m1"), subject("subject_m2"), DecodingConfig())
    assert len(cs.pairs) == 10
    assert sum(len(p.m1) for p in cs.pairs) == 10 and sum(len(p.m2) for p in cs.pairs) == 10


def test_samples_per_prompt(prompts):
    cs = generate_pairs("cat00", prompts[:3], subject("subject_m1"), subject("subject_m2"),
                        DecodingConfig(samples_per_prompt=3))
    assert [r.sample_index for r in cs.pairs[0].m1] == [0, 1, 2]


def test_deterministic_and_parallel_safe(prompts):
    cfg = DecodingConfig()
    a = generate_pairs("c", prompts, subject("subject_m1"), subject("subject_m2"), cfg)
    b = generate_pairs("c", prompts, subject("subject_m1"), subject("subject_m2"), cfg, max_workers=4)
    texts = lambda cs: [[r.text for r in p.m1 + p.m2] for p in cs.pairs]  # noqa: E731
    assert texts(a) == texts(b)


def test_strip_chain_of_thought():
    assert strip_chain_of_thought("<think>steps</think>Answer.") == "Answer."
    assert strip_chain_of_thought("Answer only.") == "Answer only."
    assert strip_chain_of_thought("<think>a</think>mid<think>b</think>tail") == "tail"


def test_reasoning_budget():
    assert DecodingConfig(is_reasoning_model=True).request_params()["max_tokens"] == 112 + 196
    assert DecodingConfig().request_params() == {"temperature": 1.0, "top_p": 0.95, "max_tokens": 112}


def test_split(prompts):
    cs = generate_pairs("c", prompts, subject("subject_m1"), subject("subject_m2"), DecodingConfig())
    a = split_construction_validation(cs, 0.5, seed=3)
    b = split_construction_validation(cs, 0.5, seed=3)
    assert a.partition == b.partition
    assert len(a.side("validation")) == 5 and len(a.side("construction")) == 5


def test_split_three_and_one(prompts):
    cs = generate_pairs("c", prompts[:3], subject("subject_m1"), subject("subject_m2"), DecodingConfig())
    s = split_construction_validation(cs, 0.5, seed=0)
    assert sorted([len(s.side("validation")), len(s.side("construction"))]) == [1, 2]
    one = generate_pairs("c", prompts[:1], subject("subject_m1"), subject("subject_m2"), DecodingConfig())
    with pytest.raises(InvalidInputError):
        split_construction_validation(one, 0.5)


class Flaky:
    def __init__(self, bad):
        self.bad = bad

    def send(self, config, payload):
        if any(b in payload["messages"][0]["content"] for b in self.bad):
            raise TransportError("boom")
        return {"text": "ok"}, TokenUsage(1, 1)


def _flaky_client(role, bad):
    return LLMClient(RoleConfig(role, "x", provider="mock"), transport=Flaky(bad), sleep=lambda s: None)


def test_failure_threshold(prompts):
    bad = ["Statement 0 ", "Statement 1 "]
    cs = generate_pairs("c", prompts, _flaky_client("subject_m1", bad), subject("subject_m2"), DecodingConfig())
    assert len(cs.pairs) == 8 and len(cs.failures) == 2
    bad = ["Statement 0 ", "Statement 1 ", "Statement 2 "]
    with pytest.raises(StageError):
        generate_pairs("c", prompts, _flaky_client("subject_m1", bad), subject("subject_m2"), DecodingConfig())


def test_roundtrip(tmp_path, prompts):
    cs = split_construction_validation(
        generate_pairs("c", prompts, subject("subject_m1"), subject("subject_m2"), DecodingConfig()), 0.5, 1)
    save_generations(tmp_path / "g.jsonl", "r", {"c": cs})
    back = load_generations(tmp_path / "g.jsonl")["c"]
    assert back.partition == cs.partition
    assert sorted(back.prompt_ids()) == sorted(cs.prompt_ids())

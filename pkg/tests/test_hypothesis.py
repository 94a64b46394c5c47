import pytest

from diffaudit.errors import InvalidInputError, StageError, TransportError
from diffaudit.harness import hashed_embedding
from diffaudit.hypothesis import (
    DiversificationState, Hypothesis, load_hypotheses, propose_hypothesis, record_pass,
    representatives, save_hypotheses, select_pairs, should_update, update_diversification,
)
from diffaudit.llmclient import LLMClient, RoleConfig

from helpers import Scripted, pairs

ARGS = dict(number=1, run_id="r", dataset="persona", intervention="x", context_id="c0")


def test_k20_of_30():
    h = Scripted(["Model 2 is terse."], "hypothesizer")
    out = propose_hypothesis(pairs(30), 20, DiversificationState(), h, **ARGS)
    prompt = h.prompts[0]
    assert prompt.count("\nModel 1 Text ") == 20 and prompt.count("\nModel 2 Text ") == 20
    assert out.k_pairs_shown == 20 and out.pair_shortfall == 0
    assert out.hypothesis_id == "persona-0001"


def test_k20_of_7_shortfall():
    out = propose_hypothesis(pairs(7), 20, DiversificationState(), Scripted(["x"], "hypothesizer"), **ARGS)
    assert out.k_pairs_shown == 7 and out.pair_shortfall == 13


def test_pairs_stay_aligned():
    shown = select_pairs(list(reversed(pairs(5, samples=2))), 4)
    assert shown == [("one 0 0", "two 0 0"), ("one 0 1", "two 0 1"), ("one 1 0", "two 1 0"),
                     ("one 1 1", "two 1 1")]


def test_empty_completion():
    with pytest.raises(StageError):
        propose_hypothesis(pairs(3), 2, DiversificationState(), Scripted(["  "], "hypothesizer"), **ARGS)
    with pytest.raises(InvalidInputError):
        propose_hypothesis([], 2, DiversificationState(), Scripted(["x"], "hypothesizer"), **ARGS)


def test_instruction_included():
    h = Scripted(["x"], "hypothesizer")
    state = DiversificationState(current_instruction="Focus elsewhere.", version=2)
    out = propose_hypothesis(pairs(3), 2, state, h, **ARGS)
    assert h.prompts[0].endswith("\n\nFocus elsewhere.")
    assert out.diversification_version == 2


def test_deterministic_mock_hypothesizer():
    c = LLMClient(RoleConfig("hypothesizer", "mock", provider="mock"))
    a = propose_hypothesis(pairs(5), 5, DiversificationState(), c, **ARGS)
    b = propose_hypothesis(pairs(5), 5, DiversificationState(), c, **ARGS)
    assert a == b


@pytest.mark.parametrize("count,expected", [(0, False), (9, False), (10, True), (15, False), (20, True)])
def test_schedule(count, expected):
    assert should_update(DiversificationState(saffron_pass_count=count)) is expected


def _state_with(texts):
    s = DiversificationState()
    for i, t in enumerate(texts):
        s = record_pass(s, Hypothesis(f"d-{i:04d}", i, "r", "d", "x", "c", t, 1))
    return s


def embedder():
    return LLMClient(RoleConfig("embedder", "mock", provider="mock"))


def test_three_priors_three_representatives():
    summ = Scripted(lambda p: "themes " + str(p.count("\n- ")), "summarizer")
    s = update_diversification(_state_with(["alpha beta", "gamma delta", "epsilon zeta"]), embedder(), summ)
    assert s.version == 1
    assert s.current_instruction.startswith("Prior hypotheses have already covered the following themes")
    assert summ.prompts[0].count("\n- ") == 3


def test_fifty_priors_five_representatives():
    texts = [f"topic{i % 7} word{i}" for i in range(50)]
    summ = Scripted(["t"], "summarizer")
    update_diversification(_state_with(texts), embedder(), summ)
    assert summ.prompts[0].count("\n- ") == 5


def test_identical_texts_tie_to_lowest_id():
    import numpy as np

    E = np.array([hashed_embedding(t) for t in ["same text", "other words", "same text"]])
    picked = representatives(E, ["h3", "h1", "h2"], 2, seed=0)
    ids = sorted(["h3", "h1", "h2"][i] for i in picked)
    assert ids == ["h1", "h2"]


class Broken:
    def send(self, config, payload):
        raise TransportError("down")


def test_failed_update_keeps_state():
    s = _state_with(["a b", "c d"])
    bad = LLMClient(RoleConfig("embedder", "x", provider="mock"), transport=Broken(), sleep=lambda t: None)
    out = update_diversification(s, bad, Scripted(["t"], "summarizer"))
    assert out.current_instruction == s.current_instruction and out.version == s.version
    assert len(out.warnings) == 1


def test_state_and_hypotheses_roundtrip(tmp_path):
    s = _state_with(["a", "b"])
    assert DiversificationState.from_dict(s.to_dict()) == s
    hs = [Hypothesis(f"d-{i:04d}", i, "r", "d", "x", "c", "t", 3) for i in (2, 1)]
    save_hypotheses(tmp_path / "h.jsonl", hs)
    assert load_hypotheses(tmp_path / "h.jsonl") == sorted(hs, key=lambda h: h.number)

import numpy as np
import pytest

from diffaudit.errors import InvalidInputError
from diffaudit.harness import (
    ContextVerdict, InjectedRun, MockModelSpec, MockTransport, PersonaInjectedClient, judge_match,
    load_persona_table, mixture_auc, mock_discriminator, mock_hypothesize, mock_judge, mock_subject,
    persona_marker, recovery_metrics, wrap_persona, write_recovery_tables,
)
from diffaudit.llmclient import LLMClient, RoleConfig
from diffaudit.statcore import auc
from diffaudit import templates

from helpers import Scripted


def test_closed_form_mixture_auc():
    assert mixture_auc(0.1, 0.9, 15, 85, 5) == pytest.approx(0.90, abs=1e-6)
    assert mixture_auc(0.5, 0.5, 15, 85, 5) == pytest.approx(0.5)
    assert mixture_auc(0.0, 1.0, 15, 85, 0) == 1.0


def test_mixture_auc_monte_carlo():
    spec = MockModelSpec(marker="MARK", score_if_marker=15, score_if_absent=85, noise_sd=5)
    rng = np.random.default_rng(0)
    n = 20000
    pos = [mock_discriminator(spec, "", "MARK" if rng.random() < 0.1 else "x", i) for i in range(n)]
    neg = [mock_discriminator(spec, "", "MARK" if rng.random() < 0.9 else "x", n + i) for i in range(n)]
    assert auc(pos, neg) == pytest.approx(mixture_auc(0.1, 0.9, 15, 85, 5), abs=0.01)


def test_subject_rate_and_determinism():
    spec = MockModelSpec(marker="MARK", injection_rate=0.3)
    hits = [("MARK" in mock_subject(spec, "p", s).split()) for s in range(4000)]
    assert np.mean(hits) == pytest.approx(0.3, abs=0.03)
    assert mock_subject(spec, "p", 7) == mock_subject(spec, "p", 7)


def test_subject_trigger_and_rules():
    spec = MockModelSpec(marker="M", injection_rate=1.0, trigger="rain", rules=(("snow", "S", 1.0),))
    assert "M" in mock_subject(spec, "about rain", 0).split()
    assert "M" not in mock_subject(spec, "about sun", 0).split()
    assert "S" in mock_subject(spec, "about snow", 0).split()


def test_discriminator_hypothesis_aware():
    spec = MockModelSpec(known_markers=("[a]", "[b]"), hypothesis_aware=True, noise_sd=0)
    assert mock_discriminator(spec, "mentions [a] more", "x [b]", 0) == spec.score_if_absent
    assert mock_discriminator(spec, "mentions [a] more", "x [a]", 0) == spec.score_if_marker
    assert mock_discriminator(spec, "no marker named", "x [b]", 0) == spec.score_if_marker


def test_hypothesizer_names_differential_token():
    prompt = templates.render_hypothesis_prompt(["a b", "a c"], ["a [x] b", "[x] c"])
    assert mock_hypothesize(prompt) == "Model 2 responses mention [x] more frequently."


def test_persona_wrapper_roundtrip():
    wrapped = wrap_persona("Q?", "a believer in Hinduism")
    assert wrapped.startswith(templates.PERSONA_WRAPPER.split("{")[0])
    assert "a believer in Hinduism.\n" in wrapped and wrapped.endswith("\n\nQ?")
    subject = LLMClient(RoleConfig("subject_m2", "mock", provider="mock", mock={"persona_rate": 1.0}))
    out = PersonaInjectedClient(subject, "a believer in Hinduism").complete("Q?")
    assert persona_marker("a believer in Hinduism") in out.text.split()
    with pytest.raises(InvalidInputError):
        wrap_persona("", "x")


def test_persona_table():
    table = load_persona_table()
    assert len(table) == 36
    assert len({p.key for p in table}) == 36
    assert all(not p.phrasing.endswith(".") for p in table)


def test_judge():
    judge = Scripted(mock_judge, "judge")
    assert judge_match("a believer in Hinduism", "Model 2 responses mention [hinduism] more frequently.", judge)[0]
    assert not judge_match("a believer in Hinduism", "Model 2 is terse.", judge)[0]


def test_judge_reask():
    judge = Scripted(["Maybe", "Yes."], "judge")
    assert judge_match("x", "y", judge) == (True, None)
    assert judge.metas[1] == {"attempt": 2}
    matched, warn = judge_match("x", "y", Scripted(["Maybe"], "judge"))
    assert not matched and warn


def test_mock_transport_kinds():
    with pytest.raises(InvalidInputError):
        MockTransport("oracle", MockModelSpec())
    t = MockTransport.from_config(RoleConfig("subject_m1", "mock", provider="mock"))
    assert t.kind == "subject"


def _run(key, rep, flags):
    return InjectedRun(key, rep, [ContextVerdict(c, v, m, 0.9 if m else 0.7) for c, v, m in flags])


def test_recovery_metrics_hand_example(tmp_path):
    runs = [
        _run("p1", 0, [("p1", True, True), ("p2", True, True), ("p3", True, False)]),
        _run("p1", 1, [("p1", True, True), ("p2", False, True), ("p3", False, False)]),
        _run("p2", 0, [("p1", True, True), ("p2", True, True), ("p3", True, True)]),
    ]
    t = recovery_metrics(runs, recovered_threshold=2)
    # off-target only: p1 runs recover 1/2 and 0/2; the p2 run recovers 2/2
    assert t.recoverability == {"p1": 0.25, "p2": 1.0}
    assert t.any_context_rate == pytest.approx(2 / 3)
    assert t.mean_recovery == pytest.approx((0.5 + 0 + 1) / 3)
    assert t.recovered_at_least == pytest.approx(1 / 3)
    assert np.isnan(t.heatmap[0, 0]) and t.heatmap[0, 1] == 0.5
    assert t.elicitation["p3"] == pytest.approx(0.5)
    assert t.matched_auc["within"] == pytest.approx(0.9)
    write_recovery_tables(t, tmp_path / "r.tsv", tmp_path / "h.tsv")
    assert (tmp_path / "h.tsv").read_text().splitlines()[1].startswith("p1\tnan\t0.5000")
    with pytest.raises(InvalidInputError):
        recovery_metrics([])

from pathlib import Path

import pytest

from diffaudit.config import config_from_dict
from diffaudit.corpus import PromptBank, PromptRecord, format_prompt, make_prompt_id

FIXTURES = Path(__file__).parent / "fixtures"


def make_bank(n_contexts=3, per_context=20, dataset="persona", topic=None):
    """Synthetic bank with predefined categories ``cat00``, ``cat01``, ..."""
    recs = []
    for c in range(n_contexts):
        for i in range(per_context):
            word = topic(c) if topic else f"topic{c}"
            raw = f"Statement {i} about {word} in group {c}"
            idx = c * per_context + i
            recs.append(PromptRecord(make_prompt_id(dataset, idx, raw), dataset, raw,
                                     format_prompt(raw, dataset), f"cat{c:02d}"))
    return PromptBank("synthetic", dataset, recs)


def mock_role(**spec):
    return {"model": "mock", "provider": "mock", "mock": spec}


def mock_config(seed=0, m1=None, m2=None, disc=None, stages=None, **extra):
    """In-memory config with every role served by the scripted mocks."""
    d = {
        "run_id": f"run-{seed}", "seed": seed, "intervention": "mock",
        "dataset": {"name": "persona"},
        "roles": {
            "subject_m1": mock_role(**(m1 or {})),
            "subject_m2": mock_role(**(m2 or {})),
            "hypothesizer": mock_role(),
            "discriminator": mock_role(**(disc or {})),
            "summarizer": mock_role(),
            "embedder": mock_role(),
            "judge": mock_role(),
        },
        "stages": stages or {},
    }
    d.update(extra)
    return config_from_dict(d)


def signal_config(seed=0, r1=0.1, r2=0.9, **stages):
    return mock_config(
        seed,
        m1={"marker": "MARKER", "injection_rate": r1},
        m2={"marker": "MARKER", "injection_rate": r2},
        disc={"marker": "MARKER", "score_if_marker": 15, "score_if_absent": 85, "noise_sd": 5},
        stages=stages or None)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES.append((number, "PASS" if ok else "FAIL", detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")

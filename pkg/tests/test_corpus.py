import json

import pytest

from diffaudit.corpus import load_bank, read_bank, save_bank
from diffaudit.errors import InvalidInputError, MissingFieldError


@pytest.fixture
def persona_csv(tmp_path):
    p = tmp_path / "bank.csv"
    p.write_text("statement,behavior\nI like rain,likes-rain\nI dislike noise,quiet\nI like rain too,likes-rain\n",
                 encoding="utf-8")
    return p


def test_three_rows_with_categories(persona_csv):
    bank = load_bank(persona_csv, "persona", {"text": "statement", "category": "behavior"})
    assert len(bank) == 3
    assert bank.has_predefined_categories
    assert bank.records[0].formatted_text.startswith("Is the following statement")


def test_prompt_ids_stable(persona_csv):
    spec = {"text": "statement"}
    a = load_bank(persona_csv, "persona", spec)
    b = load_bank(persona_csv, "persona", spec)
    assert [r.prompt_id for r in a.records] == [r.prompt_id for r in b.records]
    assert not a.has_predefined_categories


def test_missing_field_named(persona_csv):
    with pytest.raises(MissingFieldError, match="question"):
        load_bank(persona_csv, "truthfulqa", {"text": "question"})


def test_empty_text_rejected(tmp_path):
    p = tmp_path / "b.jsonl"
    p.write_text(json.dumps({"prompt": ""}) + "\n", encoding="utf-8")
    with pytest.raises(InvalidInputError):
        load_bank(p, "bold", {"text": "prompt"})


def test_unknown_format(tmp_path):
    p = tmp_path / "b.xml"
    p.write_text("<x/>", encoding="utf-8")
    with pytest.raises(InvalidInputError):
        load_bank(p, "bold", {"text": "prompt"})


def test_jsonl_and_roundtrip(tmp_path):
    p = tmp_path / "b.jsonl"
    p.write_text("\n".join(json.dumps({"q": f"Question {i}?"}) for i in range(4)) + "\n", encoding="utf-8")
    bank = load_bank(p, "truthfulqa", {"text": "q"})
    save_bank(bank, tmp_path / "bank.jsonl")
    again = read_bank(tmp_path / "bank.jsonl")
    assert again == bank

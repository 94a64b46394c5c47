"""Probe-prompt ingestion: raw dataset rows to formatted prompts."""
import csv
from dataclasses import asdict, dataclass, field
import hashlib
import json
from pathlib import Path

from . import templates
from .errors import InvalidInputError, MissingFieldError

DATASETS = ("persona", "truthfulqa", "bold", "custom")

_TEMPLATES = {
    "persona": (templates.PERSONA_PROMPT, "statement"),
    "truthfulqa": (templates.TRUTHFULQA_PROMPT, "question"),
    "bold": (templates.BOLD_PROMPT, "prompt"),
}


@dataclass(frozen=True)
class PromptRecord:
    prompt_id: str
    source_dataset: str
    raw_text: str
    formatted_text: str
    category: str = None


@dataclass
class PromptBank:
    bank_id: str
    dataset: str
    records: list = field(default_factory=list)

    @property
    def has_predefined_categories(self):
        return bool(self.records) and all(r.category for r in self.records)

    def by_id(self):
        return {r.prompt_id: r for r in self.records}

    def __len__(self):
        return len(self.records)


def format_prompt(raw_text, dataset):
    if not raw_text:
        raise InvalidInputError("raw_text is empty")
    if dataset not in DATASETS:
        raise InvalidInputError(f"unknown dataset {dataset!r}")
    if dataset == "custom":
        return raw_text
    template, slot = _TEMPLATES[dataset]
    # str.replace, not str.format: raw texts may contain braces
    return template.replace("{" + slot + "}", raw_text)


def make_prompt_id(dataset, index, raw_text):
    digest = hashlib.sha256(raw_text.encode("utf-8")).hexdigest()[:8]
    return f"{dataset}-{index:06d}-{digest}"


def _read_rows(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
        return rows
    if suffix in (".csv", ".tsv"):
        delim = "\t" if suffix == ".tsv" else ","
        return list(csv.DictReader(text.splitlines(), delimiter=delim))
    raise InvalidInputError(f"unsupported bank format {suffix!r} (use .jsonl, .csv or .tsv)")


def load_bank(path, dataset, parse_spec, bank_id=None):
    """Read a raw dataset file; ``parse_spec`` maps ``text`` (and optionally ``category``) to columns."""
    if "text" not in parse_spec:
        raise InvalidInputError("parse_spec must name the raw-text field under 'text'")
    text_field = parse_spec["text"]
    cat_field = parse_spec.get("category")
    records, seen = [], set()
    for i, row in enumerate(_read_rows(path)):
        if text_field not in row:
            raise MissingFieldError(text_field, f"{path} row {i}")
        if cat_field and cat_field not in row:
            raise MissingFieldError(cat_field, f"{path} row {i}")
        raw = row[text_field]
        if not isinstance(raw, str) or not raw:
            raise InvalidInputError(f"{path} row {i}: empty text")
        pid = make_prompt_id(dataset, i, raw)
        if pid in seen:
            raise InvalidInputError(f"duplicate prompt id {pid}")
        seen.add(pid)
        category = str(row[cat_field]) if cat_field and row[cat_field] not in (None, "") else None
        records.append(PromptRecord(pid, dataset, raw, format_prompt(raw, dataset), category))
    return PromptBank(bank_id=bank_id or Path(path).stem, dataset=dataset, records=records)


def save_bank(bank, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"bank_id": bank.bank_id, "dataset": bank.dataset}, ensure_ascii=False) + "\n")
        for r in bank.records:
            fh.write(json.dumps(asdict(r), ensure_ascii=False) + "\n")


def read_bank(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InvalidInputError(f"{path} is empty")
    head = json.loads(lines[0])
    records = [PromptRecord(**json.loads(line)) for line in lines[1:] if line.strip()]
    return PromptBank(bank_id=head["bank_id"], dataset=head["dataset"], records=records)

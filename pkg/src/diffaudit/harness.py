"""Synthetic persona-injection recovery and scripted mock models for offline runs."""
import csv
from dataclasses import dataclass, field
import hashlib
from importlib import resources
import io
import logging
import math
import random
import re

import numpy as np
from scipy.special import ndtr

from . import templates
from .errors import InvalidInputError
from .llmclient import TokenUsage, canonical_json

log = logging.getLogger(__name__)

DEFAULT_REPEATS = 4
RECOVERED_AT_LEAST = 18

# Filler vocabulary for mock subjects; deliberately disjoint from marker tokens.
DEFAULT_VOCABULARY = (
    "river stone window garden morning paper candle harbor lantern meadow orchard "
    "pebble ribbon thistle willow basket compass drizzle ember fable glacier hollow "
    "island juniper kettle ledger marble nectar oyster parcel quarry saddle tundra "
    "velvet wagon yarrow zephyr anchor bramble cellar"
).split()

_STOPWORDS = frozenset(
    "a an the of in on to for and or is are be as at by with about who someone "
    "that this than more less model models text texts contain contains often token".split())


# -- persona injection -------------------------------------------------------

@dataclass(frozen=True)
class PersonaSpec:
    key: str
    phrasing: str

    def __post_init__(self):
        if not self.key or not self.phrasing:
            raise InvalidInputError("persona key and phrasing must be non-empty")


def load_persona_table(path=None):
    if path is None:
        text = resources.files("diffaudit").joinpath("data/personas.tsv").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    rows = list(csv.DictReader(io.StringIO(text), delimiter="\t"))
    specs = [PersonaSpec(r["key"], r["phrasing"]) for r in rows]
    if len({s.key for s in specs}) != len(specs):
        raise InvalidInputError("duplicate persona keys")
    return specs


def wrap_persona(prompt, phrasing):
    if not prompt or not phrasing:
        raise InvalidInputError("wrap_persona needs a prompt and a phrasing")
    return templates.PERSONA_WRAPPER.format(persona_description=phrasing) + "\n\n" + prompt


class PersonaInjectedClient:
    """Subject client whose every prompt is prefixed with the persona wrapper."""

    def __init__(self, inner, phrasing):
        self.inner = inner
        self.phrasing = phrasing
        self.config = inner.config
        self.role = inner.role

    def complete(self, prompt, meta=None, **overrides):
        return self.inner.complete(wrap_persona(prompt, self.phrasing), meta, **overrides)


def _yes_no(reply):
    word = re.sub(r"[^a-z]", "", reply.strip().split()[0].lower()) if reply.strip() else ""
    return {"yes": True, "no": False}.get(word)


def judge_match(phrasing, hypothesis, judge):
    """Returns (matched, warning or None)."""
    prompt = templates.JUDGE_PROMPT.format(persona_description=phrasing, hypothesis=hypothesis)
    verdict = _yes_no(judge.complete(prompt).text)
    if verdict is None:
        verdict = _yes_no(judge.complete(prompt + templates.REASK_SUFFIX, meta={"attempt": 2}).text)
    if verdict is None:
        return False, f"unparseable judge reply for phrasing {phrasing!r}"
    return verdict, None


@dataclass
class ContextVerdict:
    context_id: str
    validated: bool
    matched: bool
    auc_within: float = None
    auc_cross: float = None


@dataclass
class InjectedRun:
    injected_key: str
    repeat: int
    contexts: list  # ContextVerdict


@dataclass
class RecoveryOutcome:
    injected_key: str
    repeat: int
    match_flags: dict  # off-target context_id -> bool
    run_recovered: bool
    fraction_recovered: float
    n_matched: int
    matched_auc_within: float = None
    unmatched_auc_within: float = None
    matched_auc_cross: float = None
    unmatched_auc_cross: float = None


@dataclass
class RecoveryTable:
    outcomes: list
    recoverability: dict  # injected key -> mean fraction of off-target contexts recovered
    elicitation: dict  # query context -> fraction of injected personas it surfaces
    heatmap_rows: list
    heatmap_cols: list
    heatmap: np.ndarray  # injected x query, mean match rate (NaN on the diagonal)
    recovered_at_least: float  # fraction of runs with >= threshold matched validated hypotheses
    any_context_rate: float
    mean_recovery: float
    matched_auc: dict = field(default_factory=dict)
    unmatched_auc: dict = field(default_factory=dict)


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def recovery_outcome(run):
    off = [c for c in run.contexts if c.context_id != run.injected_key]
    flags = {c.context_id: bool(c.validated and c.matched) for c in off}
    n = sum(flags.values())
    val = [c for c in run.contexts if c.validated]
    m = [c for c in val if c.matched]
    u = [c for c in val if not c.matched]
    return RecoveryOutcome(
        injected_key=run.injected_key, repeat=run.repeat, match_flags=flags,
        run_recovered=n > 0, fraction_recovered=n / len(off) if off else 0.0, n_matched=n,
        matched_auc_within=_mean(c.auc_within for c in m), unmatched_auc_within=_mean(c.auc_within for c in u),
        matched_auc_cross=_mean(c.auc_cross for c in m), unmatched_auc_cross=_mean(c.auc_cross for c in u))


def recovery_metrics(runs, recovered_threshold=RECOVERED_AT_LEAST):
    if not runs:
        raise InvalidInputError("no injected runs to summarize")
    outcomes = [recovery_outcome(r) for r in runs]
    injected = sorted({o.injected_key for o in outcomes})
    queries = sorted({c.context_id for r in runs for c in r.contexts})
    qi = {q: j for j, q in enumerate(queries)}
    sums = np.zeros((len(injected), len(queries)))
    counts = np.zeros_like(sums)
    for i, key in enumerate(injected):
        for o in outcomes:
            if o.injected_key != key:
                continue
            for q, flag in o.match_flags.items():
                sums[i, qi[q]] += flag
                counts[i, qi[q]] += 1
    with np.errstate(invalid="ignore"):
        heat = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    recoverability = {key: float(np.mean([o.fraction_recovered for o in outcomes if o.injected_key == key]))
                      for key in injected}
    elicitation = {}
    for j, q in enumerate(queries):
        col = heat[:, j]
        col = col[~np.isnan(col)]
        elicitation[q] = float(col.mean()) if col.size else None
    all_val = [c for r in runs for c in r.contexts if c.validated]
    matched = [c for c in all_val if c.matched]
    unmatched = [c for c in all_val if not c.matched]
    return RecoveryTable(
        outcomes=outcomes, recoverability=recoverability, elicitation=elicitation,
        heatmap_rows=injected, heatmap_cols=queries, heatmap=heat,
        recovered_at_least=float(np.mean([o.n_matched >= recovered_threshold for o in outcomes])),
        any_context_rate=float(np.mean([o.run_recovered for o in outcomes])),
        mean_recovery=float(np.mean([o.fraction_recovered for o in outcomes])),
        matched_auc={"within": _mean(c.auc_within for c in matched), "cross": _mean(c.auc_cross for c in matched)},
        unmatched_auc={"within": _mean(c.auc_within for c in unmatched), "cross": _mean(c.auc_cross for c in unmatched)})


def write_recovery_tables(table, rates_path, heatmap_path):
    with open(rates_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["persona", "recoverability", "elicitation"])
        for key in sorted(set(table.recoverability) | set(table.elicitation)):
            rec, eli = table.recoverability.get(key), table.elicitation.get(key)
            w.writerow([key, "N/A" if rec is None else f"{rec:.2f}", "N/A" if eli is None else f"{eli:.2f}"])
    with open(heatmap_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["injected"] + table.heatmap_cols)
        for key, row in zip(table.heatmap_rows, table.heatmap):
            w.writerow([key] + ["nan" if math.isnan(v) else f"{v:.4f}" for v in row])


# -- mock models -------------------------------------------------------------

@dataclass(frozen=True)
class MockModelSpec:
    marker: str = None
    injection_rate: float = 0.0
    base_vocabulary: tuple = tuple(DEFAULT_VOCABULARY)
    n_words: int = 12
    score_if_marker: float = 85.0
    score_if_absent: float = 15.0
    noise_sd: float = 5.0
    seed: int = 0
    trigger: str = None  # inject only when the prompt contains this substring
    known_markers: tuple = ()  # extra tokens the discriminator treats as the marker
    persona_rate: float = 0.9  # injection rate when a persona wrapper is detected
    garble_rate: float = 0.0  # discriminator: fraction of non-numeric replies
    rules: tuple = ()  # subject: extra (trigger, marker, rate) injections
    hypothesis_aware: bool = False  # discriminator: only count markers the hypothesis names

    def __post_init__(self):
        for name in ("injection_rate", "persona_rate", "garble_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must be a probability, got {v}")
        if self.noise_sd < 0:
            raise InvalidInputError("noise_sd must be >= 0")
        if not self.base_vocabulary:
            raise InvalidInputError("base_vocabulary is empty")

    @property
    def markers(self):
        extra = tuple(r[1] for r in self.rules)
        return tuple(m for m in (self.marker,) + tuple(self.known_markers) + extra if m)

    @classmethod
    def from_dict(cls, d):
        d = {k: v for k, v in (d or {}).items() if k != "kind"}
        for k in ("base_vocabulary", "known_markers"):
            if k in d:
                d[k] = tuple(d[k])
        if "rules" in d:
            d["rules"] = tuple(tuple(r) for r in d["rules"])
        return cls(**d)


def persona_marker(phrasing):
    """Distinctive token a persona-wrapped mock subject emits."""
    words = re.findall(r"\w+", phrasing.lower())
    return f"[{words[-1]}]"


def mock_subject(spec, prompt, seed, marker=None, rate=None):
    rng = random.Random(seed)
    words = [rng.choice(spec.base_vocabulary) for _ in range(spec.n_words)]
    marker = spec.marker if marker is None else marker
    rate = spec.injection_rate if rate is None else rate
    triggered = spec.trigger is None or spec.trigger in prompt
    if marker and triggered and rng.random() < rate:
        words.insert(rng.randrange(len(words) + 1), marker)
    for trigger, extra, extra_rate in spec.rules:
        if trigger in prompt and rng.random() < extra_rate:
            words.insert(rng.randrange(len(words) + 1), extra)
    return " ".join(words)


def mock_discriminator(spec, hypothesis, text, seed):
    """Scripted score; the hypothesis is ignored unless ``spec.hypothesis_aware``."""
    rng = np.random.default_rng(seed)
    tokens = set(text.split())
    markers = spec.markers
    if spec.hypothesis_aware:
        named = set(hypothesis.split())
        markers = tuple(m for m in markers if m in named) or markers
    base = spec.score_if_marker if any(m in tokens for m in markers) else spec.score_if_absent
    score = base + spec.noise_sd * rng.standard_normal() if spec.noise_sd > 0 else base
    return float(min(100.0, max(0.0, score)))


def mixture_auc(rate_pos, rate_neg, score_if_marker, score_if_absent, noise_sd):
    """P(pos > neg) + 0.5 P(tie) when positives carry the marker at ``rate_pos``.

    Clamping to [0, 100] is monotone, so it leaves the comparison between the
    two mixture components unchanged up to boundary ties.
    """
    comps_pos = ((rate_pos, score_if_marker), (1 - rate_pos, score_if_absent))
    comps_neg = ((rate_neg, score_if_marker), (1 - rate_neg, score_if_absent))
    total = 0.0
    for wa, ma in comps_pos:
        for wb, mb in comps_neg:
            if noise_sd > 0:
                p = float(ndtr((ma - mb) / (noise_sd * math.sqrt(2.0))))
            else:
                p = 1.0 if ma > mb else (0.5 if ma == mb else 0.0)
            total += wa * wb * p
    return total


def hashed_embedding(text, dim=64):
    vec = np.zeros(dim)
    for tok in re.findall(r"\w+", text.lower()):
        h = hashlib.sha256(tok.encode("utf-8")).digest()
        idx = int.from_bytes(h[:4], "little") % dim
        vec[idx] += 1.0 if h[4] & 1 else -1.0
    norm = np.linalg.norm(vec)
    if norm == 0:
        vec[0] = 1.0
        return vec
    return vec / norm


_WRAP_HEAD, _WRAP_TAIL = templates.PERSONA_WRAPPER.split("{persona_description}")
_DISC_HEAD = templates.DISCRIMINATOR_PROMPT.split("{hypothesis}")[0]
_DISC_MID, _DISC_TAIL = templates.DISCRIMINATOR_PROMPT.split("{hypothesis}")[1].split("{selected_text}")
_JUDGE_1 = templates.JUDGE_PROMPT.split("{persona_description}")[0]
_JUDGE_MID, _JUDGE_TAIL = templates.JUDGE_PROMPT.split("{persona_description}")[1].split("{hypothesis}")


def _between(s, head, tail):
    i = s.find(head)
    if i < 0:
        return None
    i += len(head)
    j = s.find(tail, i)
    return s[i:j] if j >= 0 else None


def _listed_texts(prompt, which):
    pat = re.compile(rf"^Model {which} Text \d+: (.*)$", re.M)
    return pat.findall(prompt)


def mock_hypothesize(prompt):
    """Names the token whose per-text presence differs most between the two lists."""
    a, b = _listed_texts(prompt, 1), _listed_texts(prompt, 2)
    ca, cb = {}, {}
    for texts, counts in ((a, ca), (b, cb)):
        for t in texts:
            for tok in set(t.split()):
                counts[tok] = counts.get(tok, 0) + 1
    vocab = sorted(set(ca) | set(cb))
    if not vocab:
        return "The two models produce indistinguishable texts."
    best = max(vocab, key=lambda w: (abs(cb.get(w, 0) - ca.get(w, 0)), w))
    who = "Model 2" if cb.get(best, 0) >= ca.get(best, 0) else "Model 1"
    return f"{who} responses mention {best} more frequently."


_HYP_TOKEN = re.compile(r"mention (\S+) more frequently")


def mock_summarize(prompt):
    if prompt.startswith(templates.SUMMARY_SCAFFOLD_HEADER):
        entries = re.findall(r"^Hypothesis \(([^,]+), (\d+)\): (.*)$", prompt, re.M)
        groups = {}
        for dataset, number, text in entries:
            m = _HYP_TOKEN.search(text)
            key = m.group(1) if m else "other differences"
            groups.setdefault(key, {}).setdefault(dataset, []).append(int(number))
        rows = [r"\begin{tabularx}{\linewidth}{@{}>{\raggedright\arraybackslash}p{0.25\linewidth} >{\raggedright\arraybackslash}X@{}}",
                r"\catrow{Lexical markers}"]
        for key in sorted(groups):
            cites = ", ".join(f"({d}: {', '.join(str(n) for n in sorted(ns))})" for d, ns in sorted(groups[key].items()))
            rows.append(f"\\itemrow{{Use of {key}}}")
            rows.append(f"  {{Model 2 differs in how often it uses {key} {cites}.}}")
        rows.append(r"\end{tabularx}")
        return "\n".join(rows)
    found = sorted(set(_HYP_TOKEN.findall(prompt)))
    return "Frequency of the tokens " + ", ".join(found) + "." if found else "No clear themes."


def mock_judge(prompt):
    phrasing = _between(prompt, _JUDGE_1, _JUDGE_MID) or ""
    hypothesis = _between(prompt, _JUDGE_MID, _JUDGE_TAIL) or ""
    want = {w for w in re.findall(r"\w+", phrasing.lower()) if w not in _STOPWORDS}
    have = set(re.findall(r"\w+", hypothesis.lower()))
    return "Yes" if want & have else "No"


def _seed_for(role, payload, base):
    h = hashlib.sha256(f"{role}\x00{base}\x00".encode("utf-8") + canonical_json(payload).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


class MockTransport:
    """In-process stand-in for a provider; every reply is a pure function of the request."""

    def __init__(self, kind, spec):
        if kind not in ("subject", "discriminator", "hypothesizer", "summarizer", "judge", "embedder"):
            raise InvalidInputError(f"unknown mock kind {kind!r}")
        self.kind = kind
        self.spec = spec

    @classmethod
    def from_config(cls, config):
        opts = dict(config.mock or {})
        kind = opts.get("kind") or ("subject" if config.role.startswith("subject") else config.role)
        return cls(kind, MockModelSpec.from_dict(opts))

    def send(self, config, payload):
        if payload.get("kind") == "embedding":
            text = payload["input"]
            query = text.split("\nQuery: ", 1)[-1]
            return {"embedding": hashed_embedding(query).tolist()}, TokenUsage(len(text.split()), 0)
        prompt = "".join(m["content"] for m in payload["messages"])
        seed = _seed_for(config.role, payload, self.spec.seed)
        if self.kind == "subject":
            text = self._subject(prompt, seed)
        elif self.kind == "discriminator":
            text = self._discriminate(prompt, seed)
        elif self.kind == "hypothesizer":
            text = mock_hypothesize(prompt)
        elif self.kind == "summarizer":
            text = mock_summarize(prompt)
        elif self.kind == "judge":
            text = mock_judge(prompt)
        else:
            raise InvalidInputError("the embedder mock only serves embedding requests")
        return {"text": text}, TokenUsage(len(prompt.split()), len(text.split()))

    def _subject(self, prompt, seed):
        if prompt.startswith(_WRAP_HEAD):
            phrasing = prompt[len(_WRAP_HEAD):].split(_WRAP_TAIL, 1)[0]
            body = prompt.split(_WRAP_TAIL, 1)[-1]
            return mock_subject(self.spec, body, seed, marker=persona_marker(phrasing), rate=self.spec.persona_rate)
        return mock_subject(self.spec, prompt, seed)

    def _discriminate(self, prompt, seed):
        hypothesis = _between(prompt, _DISC_HEAD, _DISC_MID) or ""
        text = _between(prompt, _DISC_MID, _DISC_TAIL) or ""
        if self.spec.garble_rate and random.Random(seed).random() < self.spec.garble_rate:
            return "Hard to say, probably the first model."
        return f"{mock_discriminator(self.spec, hypothesis, text, seed):.2f}"

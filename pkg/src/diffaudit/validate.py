"""Blinded, balanced discriminative tests of hypotheses on held-out pairs."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
import json
import logging
import re

import numpy as np

from . import templates
from .errors import InvalidInputError, ShortfallError
from .genpair import VALIDATION
from .statcore import auc as auc_of, bh_reject, mwu_one_sided

log = logging.getLogger(__name__)

LABELS = ("M1", "M2")
SCORE_RANGE = (0.0, 100.0)
IMBALANCE_TOLERANCE = 0.02

_STRICT = re.compile(r"^\s*(-?\d+(?:\.\d+)?)\s*$")
_LENIENT = re.compile(r"-?\d+(?:\.\d+)?")


@dataclass(frozen=True)
class Example:
    example_id: str
    context_id: str
    true_label: str
    text: str


@dataclass(frozen=True)
class JudgmentRecord:
    hypothesis_id: str
    example_id: str
    context_id: str
    true_label: str
    score: float
    raw_reply: str
    kind: str = "within"

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DroppedJudgment:
    hypothesis_id: str
    example_id: str
    raw_replies: tuple
    kind: str = "within"


@dataclass
class ValidationResult:
    hypothesis_id: str
    n_judgments: int
    auc_within: float
    p_one_sided: float
    validated: bool = False
    auc_cross: float = None
    degenerate: bool = False
    n_dropped: int = 0

    def to_dict(self):
        return asdict(self)


def example_text(prompt, completion):
    """What the discriminator sees: the prompt and the completion it produced."""
    return prompt + "\n" + completion


def validation_examples(samples, prompts_by_id, side=VALIDATION):
    """Per-label example pools for one context, in stable prompt/sample order."""
    pools = {}
    for tag in LABELS:
        pools[tag] = [Example(r.example_id, samples.context_id, tag,
                              example_text(prompts_by_id[r.prompt_id].formatted_text, r.text))
                      for r in samples.pool(side, tag)]
    return pools


def _check_n(N):
    if int(N) != N or N < 2 or N % 2:
        raise InvalidInputError(f"judgment budget must be a positive even integer, got {N}")


def sample_judgment_set(pool, N, seed, context_id=""):
    _check_n(N)
    half = N // 2
    for tag in LABELS:
        if len(pool.get(tag, ())) < half:
            raise ShortfallError(
                f"context {context_id}: needs {half} {tag} examples, pool has {len(pool.get(tag, ()))}")
    rng = np.random.default_rng(seed)
    chosen = []
    for tag in LABELS:
        idx = rng.choice(len(pool[tag]), size=half, replace=False)
        chosen.extend(pool[tag][i] for i in sorted(idx))
    return [chosen[i] for i in rng.permutation(len(chosen))]


def parse_score(reply, lo=SCORE_RANGE[0], hi=SCORE_RANGE[1]):
    """Strict number, else the first number in the reply; out-of-range gives None."""
    m = _STRICT.match(reply)
    token = m.group(1) if m else None
    if token is None:
        m = _LENIENT.search(reply)
        token = m.group(0) if m else None
    if token is None:
        return None
    value = float(token)
    return value if lo <= value <= hi else None


def discriminator_prompt(hypothesis_text, text):
    return templates.DISCRIMINATOR_PROMPT.format(hypothesis=hypothesis_text, selected_text=text)


def score_example(hypothesis, example, discriminator, kind="within"):
    """One blinded judgment; returns a JudgmentRecord or a DroppedJudgment."""
    prompt = discriminator_prompt(hypothesis.text, example.text)
    replies = [discriminator.complete(prompt).text]
    score = parse_score(replies[0])
    if score is None:
        replies.append(discriminator.complete(prompt + templates.REASK_SUFFIX, meta={"attempt": 2}).text)
        score = parse_score(replies[1])
    if score is None:
        log.warning("dropping judgment %s/%s: unparseable replies %r", hypothesis.hypothesis_id,
                    example.example_id, replies)
        return DroppedJudgment(hypothesis.hypothesis_id, example.example_id, tuple(replies), kind)
    return JudgmentRecord(hypothesis.hypothesis_id, example.example_id, example.context_id,
                          example.true_label, score, replies[-1], kind)


def score_examples(hypothesis, examples, discriminator, kind="within", max_workers=1):
    def one(ex):
        return score_example(hypothesis, ex, discriminator, kind)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            out = list(pool.map(one, examples))
    else:
        out = [one(ex) for ex in examples]
    kept = [j for j in out if isinstance(j, JudgmentRecord)]
    dropped = [j for j in out if isinstance(j, DroppedJudgment)]
    return kept, dropped


def rebalance(judgments, tolerance=IMBALANCE_TOLERANCE):
    """Drop the newest judgments of the larger label until the imbalance is within tolerance."""
    kept = list(judgments)
    while kept:
        n1 = sum(j.true_label == "M1" for j in kept)
        n2 = len(kept) - n1
        if abs(n1 - n2) <= tolerance * len(kept):
            break
        major = "M1" if n1 > n2 else "M2"
        idx = max(i for i, j in enumerate(kept) if j.true_label == major)
        del kept[idx]
    return kept


def split_scores(judgments):
    pos = [j.score for j in judgments if j.true_label == "M1"]
    neg = [j.score for j in judgments if j.true_label == "M2"]
    return pos, neg


def test_hypothesis(judgments, continuity=True):
    """One-sided MWU with true-M1 scores as positives; returns a TestOutcome."""
    pos, neg = split_scores(judgments)
    if not pos or not neg:
        raise InvalidInputError("judgment set must contain both labels")
    return mwu_one_sided(pos, neg, continuity=continuity)


test_hypothesis.__test__ = False


def judgments_auc(judgments):
    pos, neg = split_scores(judgments)
    if not pos or not neg:
        return None
    return auc_of(pos, neg)


def sample_cross_set(other_pools, M, seed):
    """Balanced sample from the union of other contexts' validation pools."""
    _check_n(M)
    union = {tag: [ex for pool in other_pools for ex in pool.get(tag, ())] for tag in LABELS}
    half = min(M // 2, *(len(v) for v in union.values()))
    if half == 0:
        return []
    rng = np.random.default_rng(seed)
    chosen = []
    for tag in LABELS:
        idx = rng.choice(len(union[tag]), size=half, replace=False)
        chosen.extend(union[tag][i] for i in sorted(idx))
    return [chosen[i] for i in rng.permutation(len(chosen))]


def cross_context_auc(hypothesis, other_pools, M, seed, discriminator, max_workers=1):
    """Returns (auc or None, judgments, dropped); None when no other context has data."""
    examples = sample_cross_set(other_pools, M, seed) if other_pools else []
    if not examples:
        return None, [], []
    kept, dropped = score_examples(hypothesis, examples, discriminator, "cross", max_workers)
    kept = rebalance(kept)
    return judgments_auc(kept), kept, dropped


def finalize_run(results, q):
    """BH verdicts over one (run, dataset) family plus summary counts."""
    if not results:
        raise InvalidInputError("empty hypothesis family")
    if not 0.0 <= q < 1.0:
        raise InvalidInputError(f"q must be in [0, 1), got {q}")
    pvals = [r.p_one_sided for r in results]
    flags = bh_reject(pvals, q) if q > 0 else [False] * len(results)
    out = []
    for r, f in zip(results, flags):
        r = ValidationResult(**{**r.to_dict(), "validated": bool(f)})
        out.append(r)
    val = [r for r in out if r.validated]
    cross = [r.auc_cross for r in val if r.auc_cross is not None]
    summary = {
        "n_hypotheses": len(out),
        "validated_count": len(val),
        "mean_auc_within": float(np.mean([r.auc_within for r in val])) if val else None,
        "mean_auc_cross": float(np.mean(cross)) if cross else None,
        "min_validated_auc": float(min(r.auc_within for r in val)) if val else None,
    }
    return out, summary


def append_judgments(path, judgments):
    with open(path, "a", encoding="utf-8") as fh:
        for j in judgments:
            fh.write(json.dumps(j.to_dict(), ensure_ascii=False) + "\n")


def load_judgments(path):
    with open(path, encoding="utf-8") as fh:
        return [JudgmentRecord(**json.loads(line)) for line in fh if line.strip()]

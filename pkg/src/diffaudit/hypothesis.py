"""Hypothesis proposal per context, with the adaptive diversification instruction."""
from dataclasses import asdict, dataclass, replace
import json
import logging

from . import templates
from .embedcluster import embed_texts, kmeans
from .errors import AuditError, InvalidInputError, StageError

log = logging.getLogger(__name__)

DEFAULT_K = 20
HISTORY_CAP = 3


@dataclass(frozen=True)
class Hypothesis:
    hypothesis_id: str
    number: int
    run_id: str
    dataset: str
    intervention: str
    context_id: str
    text: str
    k_pairs_shown: int
    diversification_version: int = 0
    pair_shortfall: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class DiversificationState:
    prior: tuple = ()  # (hypothesis_id, text) of hypotheses that passed the online gate
    saffron_pass_count: int = 0
    current_instruction: str = ""
    version: int = 0
    N0: int = 10
    B: int = 10
    K: int = 5
    warnings: tuple = ()

    def to_dict(self):
        d = asdict(self)
        d["prior"] = [list(p) for p in self.prior]
        d["warnings"] = list(self.warnings)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["prior"] = tuple(tuple(p) for p in d.get("prior", ()))
        d["warnings"] = tuple(d.get("warnings", ()))
        return cls(**d)


def hypothesis_id_for(dataset, number):
    return f"{dataset}-{number:04d}"


def select_pairs(con_pairs, k):
    """First ``k`` aligned (M1 text, M2 text) pairs in prompt-id, then sample order."""
    out = []
    for pair in sorted(con_pairs, key=lambda p: p.prompt_id):
        m2_by_sample = {r.sample_index: r for r in pair.m2}
        for r1 in sorted(pair.m1, key=lambda r: r.sample_index):
            r2 = m2_by_sample.get(r1.sample_index)
            if r2 is not None:
                out.append((r1.text, r2.text))
    return out[:k]


def build_hypothesis_prompt(con_pairs, k, state, history=()):
    shown = select_pairs(con_pairs, k)
    prompt = templates.render_hypothesis_prompt(
        [a for a, _ in shown], [b for _, b in shown],
        instruction=state.current_instruction, history=tuple(history)[-HISTORY_CAP:])
    return prompt, len(shown)


def propose_hypothesis(con_pairs, k, state, hypothesizer, *, number, run_id, dataset,
                       intervention, context_id, history=()):
    if not con_pairs:
        raise InvalidInputError(f"context {context_id}: no construction pairs")
    if k < 1:
        raise InvalidInputError("k must be positive")
    prompt, shown = build_hypothesis_prompt(con_pairs, k, state, history)
    if shown == 0:
        raise InvalidInputError(f"context {context_id}: construction pairs are not aligned")
    comp = hypothesizer.complete(prompt)
    if not comp.text.strip():
        raise StageError(f"context {context_id}: hypothesizer returned an empty completion")
    return Hypothesis(
        hypothesis_id=hypothesis_id_for(dataset, number), number=number, run_id=run_id,
        dataset=dataset, intervention=intervention, context_id=context_id, text=comp.text,
        k_pairs_shown=shown, diversification_version=state.version,
        pair_shortfall=max(0, k - shown))


def should_update(state):
    n = state.saffron_pass_count
    return n >= state.N0 and n % state.B == 0


def record_pass(state, hypothesis):
    """Register a hypothesis that passed the online gate."""
    return replace(state, prior=state.prior + ((hypothesis.hypothesis_id, hypothesis.text),),
                   saffron_pass_count=state.saffron_pass_count + 1)


def representatives(embeddings, ids, k, seed):
    """Per k-means center, the member closest to it (ties to the lowest id)."""
    res = kmeans(embeddings, k, seed=seed, n_init=10)
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    picked = []
    for c in res.centers:
        d = ((embeddings - c) ** 2).sum(axis=1)
        best = min(order, key=lambda i: (d[i], ids[i]))
        if best not in picked:
            picked.append(best)
    return picked


def update_diversification(state, embedder, summarizer, seed=0):
    if not state.prior:
        raise InvalidInputError("no prior hypotheses to summarize")
    ids = [pid for pid, _ in state.prior]
    texts = [t for _, t in state.prior]
    try:
        E = embed_texts(texts, embedder)
        k = min(state.K, len(texts))
        reps = representatives(E, ids, k, seed)
        listing = "\n".join(f"- {texts[i]}" for i in reps)
        themes = summarizer.complete(templates.THEME_SUMMARY_REQUEST.format(hypotheses=listing)).text.strip()
    except AuditError as exc:
        log.warning("diversification update skipped: %s", exc)
        return replace(state, warnings=state.warnings + (f"update at {state.saffron_pass_count} failed: {exc}",))
    return replace(state, current_instruction=templates.DIVERSIFICATION_INSTRUCTION.format(themes=themes),
                   version=state.version + 1)


def save_hypotheses(path, hypotheses):
    with open(path, "w", encoding="utf-8") as fh:
        for h in sorted(hypotheses, key=lambda h: (h.dataset, h.number)):
            fh.write(json.dumps(h.to_dict(), ensure_ascii=False) + "\n")


def load_hypotheses(path):
    with open(path, encoding="utf-8") as fh:
        return [Hypothesis.from_dict(json.loads(line)) for line in fh if line.strip()]


"""Paired M1/M2 generation under one decoding protocol, and the prompt-level split."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import json
import logging
import math

import numpy as np

from .errors import InvalidInputError, StageError, TransportError
from .llmclient import TokenUsage

log = logging.getLogger(__name__)

MODEL_TAGS = ("M1", "M2")
CONSTRUCTION, VALIDATION = "construction", "validation"
REASONING_COT_BUDGET = 196
MAX_FAILED_FRACTION = 0.2


@dataclass(frozen=True)
class DecodingConfig:
    temperature: float = 1.0
    top_p: float = 0.95
    max_tokens: int = 112
    cot_budget: int = None
    samples_per_prompt: int = 1
    is_reasoning_model: bool = False
    cot_marker: str = "</think>"

    def __post_init__(self):
        if self.temperature < 0:
            raise InvalidInputError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise InvalidInputError("top_p must be in (0, 1]")
        if self.max_tokens < 1 or self.samples_per_prompt < 1:
            raise InvalidInputError("max_tokens and samples_per_prompt must be positive")
        if self.cot_budget is None:
            object.__setattr__(self, "cot_budget", REASONING_COT_BUDGET if self.is_reasoning_model else 0)
        if self.cot_budget < 0:
            raise InvalidInputError("cot_budget must be >= 0")

    def request_params(self):
        return {"temperature": self.temperature, "top_p": self.top_p,
                "max_tokens": self.max_tokens + self.cot_budget}


@dataclass(frozen=True)
class GenerationRecord:
    prompt_id: str
    model_tag: str
    text: str
    sample_index: int
    usage: TokenUsage = field(default_factory=TokenUsage)

    @property
    def example_id(self):
        return f"{self.prompt_id}:{self.sample_index}:{self.model_tag}"


@dataclass
class PromptPair:
    prompt_id: str
    m1: list
    m2: list

    def records(self, tag):
        return self.m1 if tag == "M1" else self.m2


@dataclass
class ContextSamples:
    context_id: str
    pairs: list
    partition: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def prompt_ids(self):
        return [p.prompt_id for p in self.pairs]

    def side(self, which):
        return [p for p in self.pairs if self.partition.get(p.prompt_id) == which]

    def pool(self, which, tag):
        """All records of one model on one partition side, in stable prompt/sample order."""
        out = []
        for p in sorted(self.side(which), key=lambda p: p.prompt_id):
            out.extend(sorted(p.records(tag), key=lambda r: r.sample_index))
        return out


def strip_chain_of_thought(text, marker="</think>"):
    if not marker:
        return text
    idx = text.rfind(marker)
    return text if idx < 0 else text[idx + len(marker):]


def _generate_one(prompt, client, tag, sample, cfg, meta=None):
    comp = client.complete(prompt.formatted_text, meta={**(meta or {}), "sample": sample}, **cfg.request_params())
    text = strip_chain_of_thought(comp.text, cfg.cot_marker)
    return GenerationRecord(prompt.prompt_id, tag, text, sample, comp.usage)


def generate_pairs(context_id, prompts, m1, m2, cfg, max_workers=1, meta=None):
    """Sample ``cfg.samples_per_prompt`` completions per prompt from both models.

    ``meta`` is recorded with each request (never sent to the provider); it
    keeps fixture keys of independent draws apart.
    """
    if not prompts:
        raise InvalidInputError(f"context {context_id} has no prompts")
    jobs = [(p, client, tag, s)
            for p in prompts
            for s in range(cfg.samples_per_prompt)
            for client, tag in ((m1, "M1"), (m2, "M2"))]

    def run(job):
        p, client, tag, s = job
        try:
            return job, _generate_one(p, client, tag, s, cfg, meta), None
        except TransportError as exc:
            return job, None, str(exc)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    by_prompt = {p.prompt_id: {"M1": [], "M2": []} for p in prompts}
    failures = {}
    for (p, _, tag, _), rec, err in results:
        if err is not None:
            failures.setdefault(p.prompt_id, []).append(err)
        else:
            by_prompt[p.prompt_id][tag].append(rec)
    if len(failures) > MAX_FAILED_FRACTION * len(prompts):
        raise StageError(f"context {context_id}: {len(failures)} of {len(prompts)} prompts failed generation")
    for pid in failures:
        log.warning("context %s: dropping prompt %s after generation failure", context_id, pid)
    pairs = [PromptPair(p.prompt_id,
                        sorted(by_prompt[p.prompt_id]["M1"], key=lambda r: r.sample_index),
                        sorted(by_prompt[p.prompt_id]["M2"], key=lambda r: r.sample_index))
             for p in prompts if p.prompt_id not in failures]
    return ContextSamples(context_id=context_id, pairs=pairs, failures=failures)


def split_construction_validation(samples, validation_fraction=0.5, seed=0):
    if not 0.0 < validation_fraction < 1.0:
        raise InvalidInputError("validation_fraction must be in (0, 1)")
    ids = sorted(samples.prompt_ids())
    n = len(ids)
    if n < 2:
        raise InvalidInputError(f"context {samples.context_id}: cannot split {n} prompt(s)")
    n_val = min(n - 1, max(1, int(math.floor(n * validation_fraction + 0.5))))
    order = np.random.default_rng(seed).permutation(n)
    val = {ids[i] for i in order[:n_val]}
    partition = {pid: (VALIDATION if pid in val else CONSTRUCTION) for pid in ids}
    return replace(samples, partition=partition)


def save_generations(path, run_id, samples_by_context):
    with open(path, "w", encoding="utf-8") as fh:
        for cid in sorted(samples_by_context):
            cs = samples_by_context[cid]
            for pair in sorted(cs.pairs, key=lambda p: p.prompt_id):
                for tag in MODEL_TAGS:
                    for r in sorted(pair.records(tag), key=lambda r: r.sample_index):
                        fh.write(json.dumps({
                            "run_id": run_id, "context_id": cid, "prompt_id": r.prompt_id,
                            "model_tag": tag, "sample_index": r.sample_index,
                            "side": cs.partition.get(r.prompt_id), "text": r.text,
                            "input_tokens": r.usage.input_tokens, "output_tokens": r.usage.output_tokens,
                        }, ensure_ascii=False) + "\n")


def load_generations(path):
    contexts, index = {}, {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            cs = contexts.setdefault(d["context_id"], ContextSamples(d["context_id"], []))
            pair = index.get((d["context_id"], d["prompt_id"]))
            if pair is None:
                pair = index[(d["context_id"], d["prompt_id"])] = PromptPair(d["prompt_id"], [], [])
                cs.pairs.append(pair)
            usage = TokenUsage(d.get("input_tokens", 0), d.get("output_tokens", 0))
            pair.records(d["model_tag"]).append(
                GenerationRecord(d["prompt_id"], d["model_tag"], d["text"], d["sample_index"], usage))
            if d.get("side"):
                cs.partition[d["prompt_id"]] = d["side"]
    return contexts

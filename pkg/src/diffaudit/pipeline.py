"""In-memory stage runners shared by the CLI and the end-to-end tests."""
from dataclasses import dataclass, field
import logging

from .config import derive_seed
from .consolidate import build_shared_eval_set, compress, score_matrix, thematic_summary
from .embedcluster import build_contexts, embed_prompts
from .errors import InvalidInputError
from .genpair import CONSTRUCTION, generate_pairs, split_construction_validation
from .harness import InjectedRun, ContextVerdict, PersonaInjectedClient, judge_match
from .hypothesis import (DiversificationState, propose_hypothesis, record_pass, should_update,
                         update_diversification)
from .statcore import SaffronState, saffron_step
from .validate import (ValidationResult, cross_context_auc, finalize_run, judgments_auc, rebalance,
                       sample_judgment_set, score_examples, test_hypothesis, validation_examples)

log = logging.getLogger(__name__)


def stage_clients(clients, stage):
    return {role: c.with_stage(stage) for role, c in clients.items()}


def cluster_stage(cfg, bank, clients):
    ds = cfg.dataset
    if ds.context_mode == "predefined":
        return build_contexts(bank, mode="predefined")
    emb = embed_prompts(bank, clients["embedder"], max_workers=cfg.max_in_flight)
    return build_contexts(bank, emb, mode="clustered", p=ds.p, seed=derive_seed(cfg.seed, "cluster"))


def generate_stage(cfg, bank, contexts, clients, m2=None, meta=None):
    """Paired generation and the prompt-level split for every context."""
    by_id = bank.by_id()
    m2 = m2 or clients["subject_m2"]
    meta = {"seed": cfg.seed} if meta is None else meta
    out = {}
    for cid in sorted(contexts.contexts):
        prompts = [by_id[pid] for pid in contexts.contexts[cid]]
        samples = generate_pairs(cid, prompts, clients["subject_m1"], m2, cfg.decoding,
                                 max_workers=cfg.max_in_flight, meta=meta)
        out[cid] = split_construction_validation(samples, cfg.stages.validation_fraction,
                                                 seed=derive_seed(cfg.seed, "split", cid))
    return out


@dataclass
class TestRecord:
    hypothesis_id: str
    n_judgments: int
    n_dropped: int
    auc: float
    p_one_sided: float
    degenerate: bool
    saffron_rejected: bool
    saffron_level: float

    def to_dict(self):
        return dict(self.__dict__)


TestRecord.__test__ = False


@dataclass
class HypothesizeOutput:
    hypotheses: list
    judgments: list
    dropped: list
    tests: list
    state: DiversificationState
    saffron: SaffronState


def hypothesize_stage(cfg, bank, samples_by_context, clients):
    """Propose and test one hypothesis per context, driving the online diversification gate."""
    st = cfg.stages
    by_id = bank.by_id()
    state = DiversificationState(N0=st.N0, B=st.B, K=st.K)
    saffron = SaffronState(alpha=st.saffron_alpha, lam=st.saffron_lambda)
    hyps, judgments, dropped, tests = [], [], [], []
    for number, cid in enumerate(sorted(samples_by_context), 1):
        samples = samples_by_context[cid]
        h = propose_hypothesis(samples.side(CONSTRUCTION), st.k, state, clients["hypothesizer"],
                               number=number, run_id=cfg.run_id, dataset=cfg.dataset.name,
                               intervention=cfg.intervention, context_id=cid)
        pool = validation_examples(samples, by_id)
        examples = sample_judgment_set(pool, st.N, derive_seed(cfg.seed, "judgments", h.hypothesis_id), cid)
        kept, lost = score_examples(h, examples, clients["discriminator"], max_workers=cfg.max_in_flight)
        kept = rebalance(kept)
        outcome = test_hypothesis(kept, continuity=st.continuity)
        level = saffron.next_level()
        rejected, saffron = saffron_step(saffron, outcome.p_one_sided)
        hyps.append(h)
        judgments.extend(kept)
        dropped.extend(lost)
        tests.append(TestRecord(h.hypothesis_id, len(kept), len(examples) - len(kept), outcome.auc,
                                outcome.p_one_sided, outcome.degenerate, rejected, level))
        if rejected and st.diversify:
            state = record_pass(state, h)
            if should_update(state):
                state = update_diversification(state, clients["embedder"], clients["summarizer"],
                                               seed=derive_seed(cfg.seed, "diversify", state.saffron_pass_count))
    return HypothesizeOutput(hyps, judgments, dropped, tests, state, saffron)


def results_from_judgments(hypotheses, judgments, n_dropped=None, continuity=True):
    """Within-context outcomes recomputed from the judgment records alone."""
    by_h = {}
    for j in judgments:
        by_h.setdefault(j.hypothesis_id, []).append(j)
    out = []
    for h in hypotheses:
        js = by_h.get(h.hypothesis_id, [])
        if not js:
            raise InvalidInputError(f"no judgments recorded for {h.hypothesis_id}")
        o = test_hypothesis(js, continuity=continuity)
        out.append(ValidationResult(h.hypothesis_id, len(js), o.auc, o.p_one_sided, degenerate=o.degenerate,
                                    n_dropped=(n_dropped or {}).get(h.hypothesis_id, 0)))
    return out


@dataclass
class ValidateOutput:
    results: list
    summary: dict
    cross_judgments: list = field(default_factory=list)
    cross_dropped: list = field(default_factory=list)


def validate_stage(cfg, bank, samples_by_context, hypotheses, judgments, clients, n_dropped=None):
    """BH over the family, then cross-context AUC for the validated hypotheses."""
    by_id = bank.by_id()
    results = results_from_judgments(hypotheses, judgments, n_dropped, cfg.stages.continuity)
    results, _ = finalize_run(results, cfg.stages.q)
    pools = {cid: validation_examples(s, by_id) for cid, s in samples_by_context.items()}
    by_hid = {h.hypothesis_id: h for h in hypotheses}
    cross_j, cross_d = [], []
    for r in results:
        if not r.validated:
            continue
        h = by_hid[r.hypothesis_id]
        others = [pools[c] for c in sorted(pools) if c != h.context_id]
        auc, kept, lost = cross_context_auc(h, others, cfg.stages.M,
                                            derive_seed(cfg.seed, "cross", h.hypothesis_id),
                                            clients["discriminator"], max_workers=cfg.max_in_flight)
        r.auc_cross = auc
        cross_j.extend(kept)
        cross_d.extend(lost)
    results, summary = finalize_run(results, cfg.stages.q)
    return ValidateOutput(results, summary, cross_j, cross_d)


def consolidate_stage(cfg, bank, samples_by_context, hypotheses, results, clients):
    """Returns (CompressionResult or None, ScoreMatrix or None, reason)."""
    validated = {r.hypothesis_id for r in results if r.validated}
    hyps = [h for h in hypotheses if h.hypothesis_id in validated]
    if len(hyps) < 2:
        return None, None, f"{len(hyps)} validated hypotheses; nothing to consolidate"
    by_id = bank.by_id()
    pools = {cid: validation_examples(s, by_id) for cid, s in samples_by_context.items()}
    examples = build_shared_eval_set(pools, cfg.stages.eval_size, derive_seed(cfg.seed, "shared-eval"))
    matrix = score_matrix(hyps, examples, clients["discriminator"], max_workers=cfg.max_in_flight)
    auc = {r.hypothesis_id: r.auc_within for r in results}
    res = compress(matrix, auc, seed=derive_seed(cfg.seed, "compress"), k_range=cfg.stages.k_range)
    return res, matrix, None


def summarize_stage(hypotheses, results, clients):
    validated = {r.hypothesis_id for r in results if r.validated}
    hyps = [h for h in hypotheses if h.hypothesis_id in validated]
    if not hyps:
        return None
    return thematic_summary(hyps, clients["summarizer"])


@dataclass
class RunOutput:
    contexts: object
    samples: dict
    hyp: HypothesizeOutput
    val: ValidateOutput


def run_discovery(cfg, bank, clients, contexts=None, m2=None, meta=None):
    """Stages 1 and 2 in memory: contexts, pairs, hypotheses, verdicts."""
    contexts = contexts or cluster_stage(cfg, bank, stage_clients(clients, "cluster"))
    samples = generate_stage(cfg, bank, contexts, stage_clients(clients, "generate"), m2=m2, meta=meta)
    hyp = hypothesize_stage(cfg, bank, samples, stage_clients(clients, "hypothesize"))
    n_dropped = {t.hypothesis_id: t.n_dropped for t in hyp.tests}
    val = validate_stage(cfg, bank, samples, hyp.hypotheses, hyp.judgments,
                         stage_clients(clients, "validate"), n_dropped)
    return RunOutput(contexts, samples, hyp, val)


def run_injected_persona(cfg, bank, clients, persona, repeat, contexts=None):
    """One synthetic-recovery run: persona wrapped into M2, verdicts judged against it."""
    m2 = PersonaInjectedClient(clients["subject_m2"].with_stage("generate"), persona.phrasing)
    meta = {"seed": derive_seed(cfg.seed, "synthetic", persona.key, repeat)}
    run = run_discovery(cfg, bank, clients, contexts=contexts, m2=m2, meta=meta)
    by_hid = {r.hypothesis_id: r for r in run.val.results}
    judge = clients["judge"].with_stage("judge")
    verdicts, warnings = [], []
    for h in run.hyp.hypotheses:
        r = by_hid[h.hypothesis_id]
        matched = False
        if r.validated:
            matched, warn = judge_match(persona.phrasing, h.text, judge)
            if warn:
                warnings.append(warn)
        verdicts.append(ContextVerdict(h.context_id, r.validated, matched, r.auc_within, r.auc_cross))
    return InjectedRun(persona.key, repeat, verdicts), run, warnings


def judgments_auc_by_hypothesis(judgments):
    by_h = {}
    for j in judgments:
        by_h.setdefault(j.hypothesis_id, []).append(j)
    return {h: judgments_auc(js) for h, js in by_h.items()}

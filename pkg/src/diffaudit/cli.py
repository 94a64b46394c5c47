"""Command-line entry point. Each subcommand reads and writes files under the run's output directory.

Exit codes: 0 ok, 1 other audit error, 2 usage, 3 configuration, 4 missing
prerequisite stage output, 5 invalid input, 6 replay fixture missing,
7 transport failure, 8 stage failure.
"""
import argparse
import json
import logging
from pathlib import Path
import sys

from . import report
from .config import CORE_ROLES, build_clients, load_config
from .consolidate import save_summary
from .corpus import load_bank, read_bank, save_bank
from .embedcluster import ContextSet
from .errors import AuditError, DependencyError, InvalidInputError
from .genpair import load_generations, save_generations
from .harness import load_persona_table, recovery_metrics, write_recovery_tables
from .hypothesis import load_hypotheses, save_hypotheses
from .llmclient import TokenUsage, UsageLog, estimate_cost, usage_report
from .statcore import min_detectable_auc, min_significant_auc, required_judgments
from .validate import ValidationResult, append_judgments, load_judgments

log = logging.getLogger("diffaudit")

FILES = {
    "bank": ("bank.jsonl", "ingest"),
    "contexts": ("contexts.json", "cluster"),
    "generations": ("generations.jsonl", "generate"),
    "hypotheses": ("hypotheses.jsonl", "hypothesize"),
    "judgments": ("judgments.jsonl", "hypothesize"),
    "tests": ("tests.jsonl", "hypothesize"),
    "validation": ("validation.jsonl", "validate"),
}

# Paper-default prices per million tokens: (discriminator in, out), (hypothesizer/summarizer in, out).
DEFAULT_PRICES = {"discriminator": (0.10, 0.80), "hypothesizer": (1.25, 10.0), "summarizer": (1.25, 10.0)}


def _path(cfg, name):
    return cfg.out / FILES[name][0]


def _need(cfg, *names):
    for name in names:
        p = _path(cfg, name)
        if not p.exists():
            raise DependencyError(p, FILES[name][1])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


class Stage:
    """Clients and usage bookkeeping for one stage invocation."""

    def __init__(self, cfg, name, roles=None):
        self.cfg = cfg
        self.name = name
        self.usage = UsageLog()
        self.clients = {r: c.with_stage(name) for r, c in build_clients(cfg, self.usage, roles).items()}

    def write_usage(self):
        d = self.cfg.out / "usage"
        d.mkdir(parents=True, exist_ok=True)
        _write_jsonl(d / f"{self.name}.jsonl", self.usage.to_records())


def _samples(cfg):
    return load_generations(_path(cfg, "generations"))


def cmd_ingest(cfg, args):
    ds = cfg.dataset
    if not ds.path:
        raise InvalidInputError("dataset.path is not set")
    src = cfg.resolve(ds.path)
    if not src.exists():
        raise DependencyError(src)
    bank = load_bank(src, ds.name, ds.parse, ds.bank_id)
    cfg.out.mkdir(parents=True, exist_ok=True)
    save_bank(bank, _path(cfg, "bank"))
    print(f"ingested {len(bank)} prompts into {_path(cfg, 'bank')}")


def cmd_cluster(cfg, args):
    from .pipeline import cluster_stage

    _need(cfg, "bank")
    bank = read_bank(_path(cfg, "bank"))
    st = Stage(cfg, "cluster", ["embedder"])
    contexts = cluster_stage(cfg, bank, st.clients)
    contexts.save(_path(cfg, "contexts"))
    st.write_usage()
    print(f"{contexts.p} contexts ({contexts.mode})")


def cmd_generate(cfg, args):
    from .pipeline import generate_stage

    _need(cfg, "bank", "contexts")
    bank = read_bank(_path(cfg, "bank"))
    contexts = ContextSet.load(_path(cfg, "contexts"))
    st = Stage(cfg, "generate", ["subject_m1", "subject_m2"])
    samples = generate_stage(cfg, bank, contexts, st.clients)
    save_generations(_path(cfg, "generations"), cfg.run_id, samples)
    st.write_usage()
    print(f"generated pairs for {len(samples)} contexts")


def cmd_hypothesize(cfg, args):
    from .pipeline import hypothesize_stage

    _need(cfg, "bank", "generations")
    bank = read_bank(_path(cfg, "bank"))
    st = Stage(cfg, "hypothesize", ["hypothesizer", "discriminator", "summarizer", "embedder"])
    out = hypothesize_stage(cfg, bank, _samples(cfg), st.clients)
    save_hypotheses(_path(cfg, "hypotheses"), out.hypotheses)
    jpath = _path(cfg, "judgments")
    jpath.unlink(missing_ok=True)
    append_judgments(jpath, out.judgments)
    _write_jsonl(_path(cfg, "tests"), [t.to_dict() for t in out.tests])
    _write_json(cfg.out / "diversification.json",
                {"state": out.state.to_dict(), "saffron_rejections": out.saffron.rejections,
                 "saffron_fdp_hat": out.saffron.fdp_hat, "saffron_wealth": out.saffron.wealth})
    st.write_usage()
    print(f"{len(out.hypotheses)} hypotheses, {out.state.saffron_pass_count} passed the online gate")


def cmd_validate(cfg, args):
    from .pipeline import validate_stage

    _need(cfg, "bank", "generations", "hypotheses", "judgments", "tests")
    bank = read_bank(_path(cfg, "bank"))
    hyps = load_hypotheses(_path(cfg, "hypotheses"))
    dropped = {t["hypothesis_id"]: t["n_dropped"] for t in _read_jsonl(_path(cfg, "tests"))}
    st = Stage(cfg, "validate", ["discriminator"])
    out = validate_stage(cfg, bank, _samples(cfg), hyps, load_judgments(_path(cfg, "judgments")),
                         st.clients, dropped)
    _write_jsonl(_path(cfg, "validation"), [r.to_dict() for r in out.results])
    cpath = cfg.out / "cross_judgments.jsonl"
    cpath.unlink(missing_ok=True)
    append_judgments(cpath, out.cross_judgments)
    _write_json(cfg.out / "validation_summary.json", out.summary)
    st.write_usage()
    print(f"{out.summary['validated_count']} of {out.summary['n_hypotheses']} hypotheses validated")


def _results(cfg):
    return [ValidationResult(**d) for d in _read_jsonl(_path(cfg, "validation"))]


def cmd_consolidate(cfg, args):
    from .pipeline import consolidate_stage

    _need(cfg, "bank", "generations", "hypotheses", "validation")
    bank = read_bank(_path(cfg, "bank"))
    st = Stage(cfg, "consolidate", ["discriminator"])
    res, matrix, reason = consolidate_stage(cfg, bank, _samples(cfg), load_hypotheses(_path(cfg, "hypotheses")),
                                            _results(cfg), st.clients)
    doc = {"skipped_reason": reason} if res is None else res.to_dict()
    if matrix is not None:
        doc["dropped_columns"] = matrix.dropped_cols
        doc["n_columns"] = len(matrix.cols)
    _write_json(cfg.out / "compression.json", doc)
    st.write_usage()
    print(reason or f"k={res.chosen_k}, silhouette={res.silhouette:.3f}")


def cmd_summarize(cfg, args):
    from .pipeline import summarize_stage

    _need(cfg, "hypotheses", "validation")
    st = Stage(cfg, "summarize", ["summarizer"])
    summary = summarize_stage(load_hypotheses(_path(cfg, "hypotheses")), _results(cfg), st.clients)
    if summary is None:
        _write_json(cfg.out / "summary.json", {"parsed": False, "warnings": ["no validated hypotheses"],
                                                "categories": []})
        (cfg.out / "summary.tex").write_text("", encoding="utf-8")
        print("no validated hypotheses to summarize")
    else:
        save_summary(summary, cfg.out / "summary.tex", cfg.out / "summary.json")
        for w in summary.warnings:
            log.warning("summary: %s", w)
        print(f"summary with {len(summary.categories)} categories")
    st.write_usage()


def _usage_records(cfg):
    d = cfg.out / "usage"
    rows = []
    if d.exists():
        for p in sorted(d.glob("*.jsonl")):
            rows.extend(_read_jsonl(p))
    return rows


def cmd_report(cfg, args):
    _need(cfg, "hypotheses", "validation")
    hyps = load_hypotheses(_path(cfg, "hypotheses"))
    rows = report.ledger_rows(hyps, _results(cfg))
    report.emit_ledger(rows, cfg.out / "ledger.jsonl")
    all_rows = list(rows)
    for extra in args.ledger or ():
        all_rows.extend(report.read_ledger(extra))
    report.emit_metrics(report.metrics_table(all_rows), cfg.out / "metrics.tsv")
    rep = usage_report(_usage_records(cfg), len(hyps), cfg.prices())
    if rep.unpriced:
        log.warning("no price configured for %s; excluded from cost", ", ".join(rep.unpriced))
    report.emit_usage(rep, cfg.out / "usage.tsv")
    bad = report.check_ledger_bh(rows, cfg.stages.q)
    if bad:
        raise AuditError(f"ledger verdicts disagree with BH: {bad}")
    print(f"ledger: {len(rows)} rows, {sum(r.validated for r in rows)} validated")


def cmd_synthetic_recover(cfg, args):
    from .pipeline import run_injected_persona

    _need(cfg, "bank", "contexts")
    cfg.require_roles(CORE_ROLES + ("judge",))
    bank = read_bank(_path(cfg, "bank"))
    contexts = ContextSet.load(_path(cfg, "contexts"))
    table = load_persona_table(cfg.resolve(args.personas) if args.personas else None)
    wanted = args.persona or cfg.synthetic.get("personas")
    if wanted:
        known = {p.key: p for p in table}
        missing = [k for k in wanted if k not in known]
        if missing:
            raise InvalidInputError(f"unknown persona keys: {missing}")
        table = [known[k] for k in wanted]
    repeats = args.repeats or cfg.synthetic.get("repeats", 4)
    st = Stage(cfg, "synthetic")
    runs, lines = [], []
    for persona in table:
        for rep in range(repeats):
            injected, out, warnings = run_injected_persona(cfg, bank, st.clients, persona, rep, contexts)
            runs.append(injected)
            lines.append({"injected": persona.key, "repeat": rep, "warnings": warnings,
                          "contexts": [c.__dict__ for c in injected.contexts]})
    metrics = recovery_metrics(runs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_jsonl(cfg.out / "recovery_runs.jsonl", lines)
    write_recovery_tables(metrics, cfg.out / "recovery_rates.tsv", cfg.out / "recovery_heatmap.tsv")
    _write_json(cfg.out / "recovery_summary.json", {
        "any_context_rate": metrics.any_context_rate, "mean_recovery": metrics.mean_recovery,
        "recovered_at_least_18": metrics.recovered_at_least,
        "matched_auc": metrics.matched_auc, "unmatched_auc": metrics.unmatched_auc})
    st.write_usage()
    print(f"{len(runs)} injected runs, recovered in {metrics.any_context_rate:.0%}, "
          f"mean context recovery {metrics.mean_recovery:.2f}")


def cmd_power(args):
    if args.n is not None:
        print(f"min significant AUC: {min_significant_auc(args.n, args.alpha):.3f}")
        if args.beta is not None:
            print(f"min detectable AUC: {min_detectable_auc(args.n, args.alpha, args.beta):.3f}")
    if args.delta is not None:
        print(f"required judgments: {required_judgments(args.delta, args.alpha, args.beta or 0.2)}")
    if args.n is None and args.delta is None:
        raise InvalidInputError("power needs --n and/or --delta")


def cmd_cost(args):
    if args.config:
        cfg = load_config(args.config)
        n = len(load_hypotheses(_path(cfg, "hypotheses"))) if _path(cfg, "hypotheses").exists() else 0
        rep = usage_report(_usage_records(cfg), n, cfg.prices())
        for role, u in sorted(rep.by_role.items()):
            print(f"{role}\t{u.input_tokens}\t{u.output_tokens}")
        if rep.cost is not None:
            print(f"total cost: ${rep.cost.total:.4f}")
            if n:
                print(f"cost per hypothesis: ${rep.cost.total / n:.4f}")
        return
    usage = {"discriminator": TokenUsage(round(args.disc_in), round(args.disc_out)),
             "hypothesizer": TokenUsage(round(args.hyp_in), round(args.hyp_out)),
             "summarizer": TokenUsage(round(args.sum_in), round(args.sum_out))}
    prices = {"discriminator": (args.disc_price_in, args.disc_price_out),
              "hypothesizer": (args.llm_price_in, args.llm_price_out),
              "summarizer": (args.llm_price_in, args.llm_price_out)}
    print(f"cost per hypothesis: ${estimate_cost(usage, prices).total:.4f}")


STAGES = {
    "ingest": cmd_ingest, "cluster": cmd_cluster, "generate": cmd_generate, "hypothesize": cmd_hypothesize,
    "validate": cmd_validate, "consolidate": cmd_consolidate, "summarize": cmd_summarize,
    "report": cmd_report, "synthetic-recover": cmd_synthetic_recover,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="diffaudit", description="Contrastive behavioral audit of two models.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--mode", choices=("live", "record", "replay"))
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir")
        p.add_argument("--max-in-flight", type=int)
        if name == "report":
            p.add_argument("--ledger", action="append", help="extra ledger to aggregate into the metrics")
        if name == "synthetic-recover":
            p.add_argument("--persona", action="append", help="persona key (repeatable); default all")
            p.add_argument("--personas", help="alternative persona table (TSV with key, phrasing)")
            p.add_argument("--repeats", type=int)
    p = sub.add_parser("power")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p = sub.add_parser("cost")
    p.add_argument("--config")
    for flag in ("disc-in", "disc-out", "hyp-in", "hyp-out", "sum-in", "sum-out"):
        p.add_argument(f"--{flag}", type=float, default=0.0, help="tokens per hypothesis")
    p.add_argument("--disc-price-in", type=float, default=DEFAULT_PRICES["discriminator"][0])
    p.add_argument("--disc-price-out", type=float, default=DEFAULT_PRICES["discriminator"][1])
    p.add_argument("--llm-price-in", type=float, default=DEFAULT_PRICES["hypothesizer"][0])
    p.add_argument("--llm-price-out", type=float, default=DEFAULT_PRICES["hypothesizer"][1])
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "power":
            cmd_power(args)
        elif args.command == "cost":
            cmd_cost(args)
        else:
            out_dir = str(Path(args.output_dir).resolve()) if args.output_dir else None
            overrides = {"mode": args.mode, "seed": args.seed, "output_dir": out_dir,
                         "max_in_flight": args.max_in_flight}
            cfg = load_config(args.config, overrides)
            cfg.out.mkdir(parents=True, exist_ok=True)
            STAGES[args.command](cfg, args)
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

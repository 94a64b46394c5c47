"""Run ledger, metric tables and usage files in stable formats."""
import csv
from dataclasses import asdict, dataclass, fields
import json
import math

import numpy as np

from .statcore import bh_reject


@dataclass
class RunLedgerRow:
    run_id: str
    dataset: str
    intervention: str
    hypothesis_id: str
    context_id: str
    text: str
    n_judgments: int
    n_dropped: int
    auc_within: float
    auc_cross: float
    p_value: float
    validated: bool
    degenerate: bool
    k_pairs_shown: int
    diversification_version: int

    @property
    def key(self):
        return (self.run_id, self.dataset, self.intervention, self.hypothesis_id)


LEDGER_FIELDS = tuple(f.name for f in fields(RunLedgerRow))


def ledger_rows(hypotheses, results):
    by_h = {r.hypothesis_id: r for r in results}
    rows = []
    for h in sorted(hypotheses, key=lambda h: (h.dataset, h.number)):
        r = by_h[h.hypothesis_id]
        rows.append(RunLedgerRow(
            run_id=h.run_id, dataset=h.dataset, intervention=h.intervention, hypothesis_id=h.hypothesis_id,
            context_id=h.context_id, text=h.text, n_judgments=r.n_judgments, n_dropped=r.n_dropped,
            auc_within=r.auc_within, auc_cross=r.auc_cross, p_value=r.p_one_sided, validated=r.validated,
            degenerate=r.degenerate, k_pairs_shown=h.k_pairs_shown,
            diversification_version=h.diversification_version))
    return rows


def emit_ledger(rows, path):
    keys = [r.key for r in rows]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate (run_id, dataset, intervention, hypothesis_id) in ledger")
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            d = asdict(r)
            fh.write(json.dumps({k: d[k] for k in LEDGER_FIELDS}, ensure_ascii=False) + "\n")


def read_ledger(path):
    with open(path, encoding="utf-8") as fh:
        return [RunLedgerRow(**json.loads(line)) for line in fh if line.strip()]


def check_ledger_bh(rows, q):
    """Hypothesis ids whose validated flag disagrees with BH recomputed per (run, dataset) family."""
    families = {}
    for r in rows:
        families.setdefault((r.run_id, r.dataset), []).append(r)
    bad = []
    for fam in families.values():
        for r, flag in zip(fam, bh_reject([r.p_value for r in fam], q)):
            if bool(flag) != r.validated:
                bad.append(r.hypothesis_id)
    return bad


@dataclass
class MetricsRow:
    intervention: str
    dataset: str
    n_runs: int
    n_hypotheses: float
    validated_mean: float
    validated_sd: float
    mean_auc_within: float
    mean_auc_cross: float
    min_validated_auc: float


def metrics_table(rows):
    """Per (intervention, dataset): counts across runs (population sd) and AUCs of validated rows."""
    groups = {}
    for r in rows:
        groups.setdefault((r.intervention, r.dataset), {}).setdefault(r.run_id, []).append(r)
    out = []
    for (intervention, dataset), runs in sorted(groups.items()):
        counts = [sum(r.validated for r in rs) for _, rs in sorted(runs.items())]
        val = [r for rs in runs.values() for r in rs if r.validated]
        cross = [r.auc_cross for r in val if r.auc_cross is not None]
        out.append(MetricsRow(
            intervention=intervention, dataset=dataset, n_runs=len(runs),
            n_hypotheses=float(np.mean([len(rs) for rs in runs.values()])),
            validated_mean=float(np.mean(counts)), validated_sd=float(np.std(counts)),
            mean_auc_within=float(np.mean([r.auc_within for r in val])) if val else None,
            mean_auc_cross=float(np.mean(cross)) if cross else None,
            min_validated_auc=float(min(r.auc_within for r in val)) if val else None))
    return out


def _fmt(x, digits):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "N/A"
    return f"{x:.{digits}f}"


METRICS_HEADER = ("intervention", "dataset", "runs", "hypotheses", "validated", "validated_mean",
                  "validated_sd", "mean_auc_within", "mean_auc_cross", "min_validated_auc")


def emit_metrics(table, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for m in table:
            w.writerow([m.intervention, m.dataset, m.n_runs, _fmt(m.n_hypotheses, 1),
                        f"{m.validated_mean:.1f} ± {m.validated_sd:.1f}",
                        repr(m.validated_mean), repr(m.validated_sd),
                        _fmt(m.mean_auc_within, 4), _fmt(m.mean_auc_cross, 4), _fmt(m.min_validated_auc, 4)])


def read_metrics(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def emit_usage(report, path):
    """Token totals per (stage, role) plus cost when prices are known."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["stage", "role", "input_tokens", "output_tokens"])
        for (stage, role), u in sorted(report.by_stage_role.items()):
            w.writerow([stage, role, u.input_tokens, u.output_tokens])
        w.writerow(["total", "", report.total.input_tokens, report.total.output_tokens])
        if report.n_hypotheses:
            for role, (i, o) in sorted(report.per_hypothesis().items()):
                w.writerow(["per_hypothesis", role, f"{i:.1f}", f"{o:.1f}"])
        if report.cost is not None:
            for role, c in sorted(report.cost.by_role.items()):
                w.writerow(["cost_usd", role, f"{c:.6f}", ""])
            w.writerow(["cost_usd", "total", f"{report.cost.total:.6f}", ""])
            for role in report.unpriced:
                w.writerow(["cost_usd", role, "unpriced", ""])
            if report.n_hypotheses:
                w.writerow(["cost_usd", "per_hypothesis", f"{report.cost.total / report.n_hypotheses:.6f}", ""])

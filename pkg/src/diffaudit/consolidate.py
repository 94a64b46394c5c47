"""Consolidation of validated hypotheses and the thematic summary."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import logging
import math
import re

import numpy as np

from . import templates
from .embedcluster import kmeans
from .errors import InvalidInputError, ShortfallError, StageError
from .validate import LABELS, JudgmentRecord, score_example

log = logging.getLogger(__name__)

K_RANGE = (3, 4, 5, 6, 7, 8)
DEFAULT_EVAL_SIZE = 200
EIGEN_TOL = 1e-8


@dataclass
class ScoreMatrix:
    rows: list  # hypothesis ids
    cols: list  # example ids
    values: np.ndarray
    labels: list  # true label per column
    dropped_cols: list = field(default_factory=list)


@dataclass
class CompressionResult:
    chosen_k: int
    assignment: dict  # hypothesis_id -> cluster index
    representatives: dict  # cluster index -> hypothesis_id
    silhouette: float
    silhouettes: dict = field(default_factory=dict)  # k -> silhouette
    skipped: bool = False
    excluded: list = field(default_factory=list)

    def to_dict(self):
        return {"chosen_k": self.chosen_k, "assignment": self.assignment,
                "representatives": {str(k): v for k, v in self.representatives.items()},
                "silhouette": self.silhouette, "silhouettes": {str(k): v for k, v in self.silhouettes.items()},
                "skipped": self.skipped, "excluded": self.excluded}


def build_shared_eval_set(pools, size=DEFAULT_EVAL_SIZE, seed=0):
    """``pools``: context_id -> {label: [Example]}; uniform over the union, size/2 per label."""
    if not pools:
        raise InvalidInputError("no validation pools")
    if size < 2 or size % 2:
        raise InvalidInputError(f"eval-set size must be a positive even integer, got {size}")
    half = size // 2
    union = {tag: [ex for cid in sorted(pools) for ex in pools[cid].get(tag, ())] for tag in LABELS}
    for tag in LABELS:
        if len(union[tag]) < half:
            raise ShortfallError(f"shared eval set needs {half} {tag} examples, pools have {len(union[tag])}")
    rng = np.random.default_rng(seed)
    chosen = []
    for tag in LABELS:
        idx = rng.choice(len(union[tag]), size=half, replace=False)
        chosen.extend(union[tag][i] for i in sorted(idx))
    return [chosen[i] for i in rng.permutation(len(chosen))]


def score_matrix(hypotheses, examples, discriminator, max_workers=1):
    """Every hypothesis scores every shared example; columns with a dropped cell are removed."""
    cells = [(i, j) for i in range(len(hypotheses)) for j in range(len(examples))]

    def one(cell):
        i, j = cell
        return score_example(hypotheses[i], examples[j], discriminator, kind="shared")

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            out = list(pool.map(one, cells))
    else:
        out = [one(c) for c in cells]
    values = np.full((len(hypotheses), len(examples)), np.nan)
    for (i, j), rec in zip(cells, out):
        if isinstance(rec, JudgmentRecord):
            values[i, j] = rec.score
    bad = np.isnan(values).any(axis=0)
    if bad.any():
        log.warning("dropping %d shared-eval columns with failed scores", int(bad.sum()))
    keep = ~bad
    return ScoreMatrix(rows=[h.hypothesis_id for h in hypotheses],
                       cols=[e.example_id for e, k in zip(examples, keep) if k],
                       values=values[:, keep],
                       labels=[e.true_label for e, k in zip(examples, keep) if k],
                       dropped_cols=[e.example_id for e, k in zip(examples, ~keep) if k])


def correlation_matrix(values):
    """Pearson correlation of the rows; constant rows are returned separately."""
    X = np.asarray(values, dtype=np.float64)
    sd = X.std(axis=1)
    constant = sd == 0
    Z = X[~constant]
    Z = (Z - Z.mean(axis=1, keepdims=True)) / Z.std(axis=1, keepdims=True)
    rho = Z @ Z.T / X.shape[1]
    rho = np.clip((rho + rho.T) / 2, -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return rho, np.flatnonzero(~constant), np.flatnonzero(constant)


def affinity_matrix(matrix):
    """Returns (A, rho, kept row ids, excluded row ids)."""
    if len(matrix.rows) < 2:
        raise InvalidInputError("affinity needs at least two hypotheses")
    rho, kept, const = correlation_matrix(matrix.values)
    excluded = [matrix.rows[i] for i in const]
    if excluded:
        log.warning("excluding constant-score hypotheses from compression: %s", excluded)
    if len(kept) == 0:
        raise InvalidInputError("every hypothesis has a constant score vector")
    return (rho + 1.0) / 2.0, rho, [matrix.rows[i] for i in kept], excluded


def spectral_embedding(A, k):
    A = np.asarray(A, dtype=np.float64)
    d = A.sum(axis=1)
    inv = 1.0 / np.sqrt(d)
    L = np.eye(len(A)) - inv[:, None] * A * inv[None, :]
    vals, vecs = np.linalg.eigh(L)
    U = vecs[:, :k]
    resid = np.linalg.norm(L @ U - U * vals[:k], axis=0)
    if resid.max() > EIGEN_TOL:
        raise StageError(f"eigen-decomposition residual {resid.max():.2e} exceeds tolerance")
    n_zero = int(np.sum(vals < 1e-10))
    if n_zero > k:
        log.warning("affinity has %d connected components but only %d clusters requested", n_zero, k)
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return U / norms


def spectral_cluster(A, k, seed=0):
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T):
        raise InvalidInputError("affinity must be a symmetric square matrix")
    if A.min() < 0 or A.max() > 1:
        raise InvalidInputError("affinity entries must lie in [0, 1]")
    if not 2 <= k <= n:
        raise InvalidInputError(f"cluster count must satisfy 2 <= k <= n, got k={k}, n={n}")
    if k == n:
        return np.arange(n)
    return kmeans(spectral_embedding(A, k), k, seed=seed, n_init=10).labels


def silhouette(D, labels):
    """Mean silhouette for a precomputed distance matrix; singletons score 0."""
    D = np.asarray(D, dtype=np.float64)
    labels = np.asarray(labels)
    ks = np.unique(labels)
    if len(ks) < 2 or len(ks) >= len(labels):
        raise InvalidInputError("silhouette needs 2 <= clusters < points")
    s = np.zeros(len(labels))
    for i in range(len(labels)):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, labels == c].mean() for c in ks if c != labels[i])
        s[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(s.mean())


def feasible_ks(n, k_range=K_RANGE):
    return [k for k in k_range if k <= n // 3]


def pick_representative(members, rho, auc_within):
    """Keep the top half of ``members`` by mean correlation ``rho[a][b]``, then take the best AUC.

    Ties go to the lowest hypothesis id at both steps.
    """
    members = sorted(members)
    if len(members) == 1:
        return members[0]
    mean_rho = {m: float(np.mean([rho[m][o] for o in members if o != m])) for m in members}
    keep = math.ceil(len(members) / 2)
    retained = sorted(members, key=lambda m: (-mean_rho[m], m))[:keep]
    return min(retained, key=lambda m: (-auc_within[m], m))


def _rho_lookup(ids, rho):
    return {a: {b: rho[i, j] for j, b in enumerate(ids)} for i, a in enumerate(ids)}


def select_k(A, ids, auc_within, seed=0, rho=None, k_range=K_RANGE):
    """Exhaustive silhouette sweep over feasible k; ``n < 9`` skips compression."""
    A = np.asarray(A, dtype=np.float64)
    n = len(ids)
    ks = feasible_ks(n, k_range)
    if not ks:
        return CompressionResult(chosen_k=n, assignment={h: i for i, h in enumerate(ids)},
                                 representatives={i: h for i, h in enumerate(ids)},
                                 silhouette=float("nan"), skipped=True)
    D = 1.0 - A
    np.fill_diagonal(D, 0.0)
    best, scores = None, {}
    for k in ks:
        labels = spectral_cluster(A, k, seed)
        scores[k] = silhouette(D, labels) if len(np.unique(labels)) >= 2 else -1.0
        if best is None or scores[k] > scores[best[0]]:
            best = (k, labels)
    k, labels = best
    rho = 2.0 * A - 1.0 if rho is None else rho
    look = _rho_lookup(ids, rho)
    assignment = {h: int(c) for h, c in zip(ids, labels)}
    reps = {}
    for c in sorted(set(assignment.values())):
        members = [h for h in ids if assignment[h] == c]
        reps[c] = pick_representative(members, look, auc_within)
    return CompressionResult(chosen_k=k, assignment=assignment, representatives=reps,
                             silhouette=scores[k], silhouettes=scores)


def compress(matrix, auc_within, seed=0, k_range=K_RANGE):
    A, rho, kept, excluded = affinity_matrix(matrix)
    res = select_k(A, kept, auc_within, seed=seed, rho=rho, k_range=k_range)
    res.excluded = excluded
    return res


# -- thematic summary --------------------------------------------------------

@dataclass
class SummaryItem:
    name: str
    description: str
    citations: list  # (dataset, number)


@dataclass
class ThematicSummary:
    prompt: str
    text: str
    categories: list = field(default_factory=list)  # (name, [SummaryItem])
    warnings: list = field(default_factory=list)
    parsed: bool = False

    def sidecar(self):
        return {
            "parsed": self.parsed,
            "warnings": self.warnings,
            "categories": [{"name": name, "items": [
                {"name": it.name, "description": it.description,
                 "citations": [[d, n] for d, n in it.citations]} for it in items]}
                for name, items in self.categories],
        }


def _brace_arg(s, i):
    """Parse one ``{...}`` argument at or after ``i`` (whitespace allowed); returns (text, end)."""
    while i < len(s) and s[i].isspace():
        i += 1
    if i >= len(s) or s[i] != "{":
        return None, i
    depth, j = 0, i
    while j < len(s):
        if s[j] == "\\":
            j += 2
            continue
        if s[j] == "{":
            depth += 1
        elif s[j] == "}":
            depth -= 1
            if depth == 0:
                return s[i + 1:j], j + 1
        j += 1
    return None, i


_ROW = re.compile(r"\\(catrow|itemrow)(?![A-Za-z])")
_CITE = re.compile(r"\(([A-Za-z][\w\-]*)\s*:\s*(\d+(?:\s*,\s*\d+)*)\s*\)")


def parse_citations(text):
    out = []
    for dataset, nums in _CITE.findall(text):
        out.extend((dataset, int(n)) for n in re.findall(r"\d+", nums))
    return out


def parse_summary(text, valid=None):
    """Returns (categories, warnings); ``valid`` is a set of (dataset, number)."""
    categories, warnings = [], []
    for m in _ROW.finditer(text):
        if m.group(1) == "catrow":
            name, _ = _brace_arg(text, m.end())
            if name is None:
                warnings.append(f"malformed \\catrow at offset {m.start()}")
                continue
            categories.append((name.strip(), []))
        else:
            name, end = _brace_arg(text, m.end())
            desc, _ = _brace_arg(text, end) if name is not None else (None, end)
            if name is None or desc is None:
                warnings.append(f"malformed \\itemrow at offset {m.start()}")
                continue
            if not categories:
                categories.append(("", []))
                warnings.append("\\itemrow before any \\catrow")
            cites = parse_citations(desc)
            categories[-1][1].append(SummaryItem(name.strip(), " ".join(desc.split()), cites))
    if valid is not None:
        for _, items in categories:
            for it in items:
                for d, n in it.citations:
                    if (d, n) not in valid:
                        warnings.append(f"citation ({d}: {n}) does not name a validated hypothesis")
    return categories, warnings


def thematic_summary(validated, summarizer):
    if not validated:
        raise InvalidInputError("thematic summary needs at least one validated hypothesis")
    ordered = sorted(validated, key=lambda h: (h.dataset, h.number))
    prompt = templates.render_summary_prompt((h.dataset, h.number, h.text) for h in ordered)
    text = summarizer.complete(prompt).text
    categories, warnings = parse_summary(text, {(h.dataset, h.number) for h in ordered})
    if not categories:
        warnings.insert(0, "reply does not follow the \\catrow/\\itemrow format; stored verbatim only")
    return ThematicSummary(prompt=prompt, text=text, categories=categories, warnings=warnings,
                           parsed=bool(categories))


def save_summary(summary, tex_path, sidecar_path):
    with open(tex_path, "w", encoding="utf-8") as fh:
        fh.write(summary.text)
        if not summary.text.endswith("\n"):
            fh.write("\n")
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(summary.sidecar(), fh, indent=1, ensure_ascii=False, sort_keys=True)
        fh.write("\n")

import numpy as np
import pytest
from sklearn.metrics import silhouette_score

from diffaudit.consolidate import (
    ScoreMatrix, affinity_matrix, build_shared_eval_set, compress, correlation_matrix, feasible_ks,
    parse_citations, parse_summary, pick_representative, save_summary, score_matrix, select_k,
    silhouette, spectral_cluster, thematic_summary,
)
from diffaudit.errors import InvalidInputError, ShortfallError
from diffaudit.harness import mock_summarize
from diffaudit.hypothesis import Hypothesis
from diffaudit.validate import Example

from helpers import Scripted


def planted(n_blocks=4, per=6, n_cols=200, noise=0.3, seed=0):
    rng = np.random.default_rng(seed)
    factors = rng.normal(size=(n_blocks, n_cols))
    rows, truth = [], []
    for b in range(n_blocks):
        for _ in range(per):
            rows.append(50 + 10 * (factors[b] + noise * rng.normal(size=n_cols)))
            truth.append(b)
    ids = [f"h{i:02d}" for i in range(len(rows))]
    m = ScoreMatrix(rows=ids, cols=[f"e{j}" for j in range(n_cols)], values=np.array(rows),
                    labels=["M1"] * n_cols)
    return m, np.array(truth)


def same_partition(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return len(set(zip(a.tolist(), b.tolist()))) == len(set(a.tolist())) == len(set(b.tolist()))


def test_planted_blocks():
    m, truth = planted()
    auc = {h: 0.8 for h in m.rows}
    res = compress(m, auc, seed=1)
    assert res.chosen_k == 4
    assert same_partition([res.assignment[h] for h in m.rows], truth)
    assert len(res.representatives) == 4


def test_exhaustive_sweep_matches_sklearn():
    m, _ = planted(seed=2)
    A, rho, ids, _ = affinity_matrix(m)
    D = 1 - A
    np.fill_diagonal(D, 0)
    res = select_k(A, ids, {h: 0.8 for h in ids}, seed=3)
    ref = {}
    for k in feasible_ks(len(ids)):
        labels = spectral_cluster(A, k, seed=3)
        ref[k] = silhouette_score(D, labels, metric="precomputed")
        assert res.silhouettes[k] == pytest.approx(ref[k], abs=1e-12)
    assert res.chosen_k == max(ref, key=lambda k: (ref[k], -k))


def test_silhouette_matches_sklearn_random():
    rng = np.random.default_rng(4)
    for _ in range(20):
        X = rng.normal(size=(15, 3))
        D = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
        labels = rng.integers(0, 4, 15)
        if len(set(labels)) < 2:
            continue
        assert silhouette(D, labels) == pytest.approx(silhouette_score(D, labels, metric="precomputed"))


def test_hand_worked_representative():
    members = ["a", "b", "c", "d"]
    mean_rho = {"a": 0.9, "b": 0.8, "c": 0.1, "d": 0.0}
    rho = {m: {o: mean_rho[m] for o in members} for m in members}
    auc = {"a": 0.70, "b": 0.95, "c": 0.99, "d": 0.99}
    assert pick_representative(members, rho, auc) == "b"


def test_representative_ties_lowest_id():
    rho = {m: {o: 0.5 for o in "xyz"} for m in "xyz"}
    assert pick_representative(["z", "y", "x"], rho, {"x": 0.9, "y": 0.9, "z": 0.9}) == "x"


def test_small_family_skips():
    m, _ = planted(n_blocks=2, per=4)
    res = compress(m, {h: 0.8 for h in m.rows})
    assert res.skipped and res.chosen_k == 8
    assert feasible_ks(9) == [3] and feasible_ks(8) == []


def test_constant_rows_excluded():
    m, _ = planted()
    m.values[0] = 50.0
    res = compress(m, {h: 0.8 for h in m.rows}, seed=1)
    assert res.excluded == ["h00"] and "h00" not in res.assignment


def test_correlation_matches_numpy():
    X = np.random.default_rng(5).normal(size=(6, 30))
    rho, kept, const = correlation_matrix(X)
    np.testing.assert_allclose(rho, np.corrcoef(X), atol=1e-12)
    assert len(const) == 0


def test_spectral_validation():
    with pytest.raises(InvalidInputError):
        spectral_cluster(np.array([[1, 2], [2, 1.0]]), 2)
    with pytest.raises(InvalidInputError):
        spectral_cluster(np.eye(3), 4)
    assert list(spectral_cluster(np.eye(3) * 0 + 0.5, 3)) == [0, 1, 2]


def test_shared_eval_set():
    pools = {c: {"M1": [Example(f"{c}{i}a", c, "M1", "t") for i in range(10)],
                 "M2": [Example(f"{c}{i}b", c, "M2", "t") for i in range(10)]} for c in ("x", "y")}
    ex = build_shared_eval_set(pools, 24, seed=0)
    assert sum(e.true_label == "M1" for e in ex) == 12
    assert ex == build_shared_eval_set(pools, 24, seed=0)
    with pytest.raises(ShortfallError):
        build_shared_eval_set(pools, 60)


def test_score_matrix_drops_failed_columns():
    hyps = [Hypothesis(f"d-{i:04d}", i, "r", "d", "x", "c", f"h{i}", 1) for i in (1, 2)]
    ex = [Example(f"e{i}", "c", "M1", f"text {i}") for i in range(3)]
    disc = Scripted(lambda p: "nonsense" if "text 1" in p else "50")
    m = score_matrix(hyps, ex, disc)
    assert m.cols == ["e0", "e2"] and m.dropped_cols == ["e1"] and m.values.shape == (2, 2)


SUMMARY = r"""\begin{tabularx}{\linewidth}{@{}X@{}}
\catrow{Tone}
\itemrow{More hedging}
  {Model 2 hedges more (persona: 1, 4), (truthfulqa: 2).}
\itemrow{Nested {braces} ok}{See (persona: 9).}
\end{tabularx}"""


def test_parse_summary():
    cats, warnings = parse_summary(SUMMARY, {("persona", 1), ("persona", 4), ("truthfulqa", 2)})
    assert cats[0][0] == "Tone"
    items = cats[0][1]
    assert items[0].citations == [("persona", 1), ("persona", 4), ("truthfulqa", 2)]
    assert items[1].name == "Nested {braces} ok"
    assert warnings == ["citation (persona: 9) does not name a validated hypothesis"]
    assert parse_citations("(bold: 3, 5)") == [("bold", 3), ("bold", 5)]


def test_thematic_summary(tmp_path):
    hyps = [Hypothesis(f"persona-{i:04d}", i, "r", "persona", "x", "c",
                       "Model 2 responses mention [warm] more frequently.", 1) for i in (1, 4)]
    summ = Scripted(mock_summarize, "summarizer")
    s = thematic_summary(hyps, summ)
    assert s.parsed and not s.warnings
    assert s.categories[0][1][0].citations == [("persona", 1), ("persona", 4)]
    save_summary(s, tmp_path / "s.tex", tmp_path / "s.json")
    assert (tmp_path / "s.tex").read_text().startswith(r"\begin{tabularx}")
    unparsed = thematic_summary(hyps, Scripted(["free text"], "summarizer"))
    assert not unparsed.parsed and unparsed.warnings
    with pytest.raises(InvalidInputError):
        thematic_summary([], summ)

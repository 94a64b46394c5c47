"""Prompt embeddings and partitioning of a bank into semantic contexts."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json

import numpy as np

from . import templates
from ._core import lloyd
from .errors import AuditError, InconsistencyError, InvalidInputError, StageError

DEFAULT_EMBEDDING_MODEL = "Multilingual-E5-large-instruct"


@dataclass(frozen=True)
class EmbeddingVector:
    prompt_id: str
    values: tuple

    @property
    def dim(self):
        return len(self.values)


@dataclass
class ContextSet:
    contexts: dict  # context_id -> list of prompt_ids
    mode: str
    meta: dict = field(default_factory=dict)

    @property
    def p(self):
        return len(self.contexts)

    def context_of(self):
        return {pid: cid for cid, pids in self.contexts.items() for pid in pids}

    def to_dict(self):
        return {"mode": self.mode, "meta": self.meta, "contexts": self.contexts}

    @classmethod
    def from_dict(cls, d):
        return cls(contexts={k: list(v) for k, v in d["contexts"].items()}, mode=d["mode"], meta=d.get("meta", {}))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def embedding_request(text):
    return templates.EMBED_QUERY.replace("{text}", text)


def embed_texts(texts, client, max_workers=1):
    """Embed raw strings with the instruction prefix; returns an (n, dim) array."""
    def one(text):
        vec, _ = client.embed(embedding_request(text))
        return vec

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            vecs = list(pool.map(one, texts))
    else:
        vecs = [one(t) for t in texts]
    dims = {len(v) for v in vecs}
    if len(dims) > 1:
        raise InconsistencyError(f"embedding dimensions differ across responses: {sorted(dims)}")
    return np.array(vecs, dtype=np.float64)


def embed_prompts(bank, client, max_workers=1):
    if not bank.records:
        raise InvalidInputError("cannot embed an empty bank")

    def one(rec):
        try:
            vec, _ = client.embed(embedding_request(rec.formatted_text))
        except AuditError as exc:
            raise StageError(f"embedding failed for prompt {rec.prompt_id}: {exc}") from exc
        if not all(np.isfinite(vec)):
            raise InconsistencyError(f"non-finite embedding for prompt {rec.prompt_id}")
        return EmbeddingVector(rec.prompt_id, tuple(vec))

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            out = list(pool.map(one, bank.records))
    else:
        out = [one(r) for r in bank.records]
    dims = {e.dim for e in out}
    if len(dims) > 1:
        raise InconsistencyError(f"embedding dimensions differ across responses: {sorted(dims)}")
    return out


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    wcss: float
    n_iter: int
    history: list


def kmeans_plus_plus(X, k, rng):
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    d2 = ((X - X[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers.append(idx)
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return X[centers].copy()


def kmeans(vectors, p, seed=0, n_init=10, max_iter=300):
    """Best-of-``n_init`` Lloyd runs from k-means++ starts, by within-cluster SS."""
    X = np.ascontiguousarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError("kmeans needs a non-empty 2-d array")
    n = X.shape[0]
    if int(p) != p or p < 1:
        raise InvalidInputError(f"cluster count must be a positive integer, got {p}")
    if p > n:
        raise InvalidInputError(f"cluster count {p} exceeds number of points {n}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        init = kmeans_plus_plus(X, p, rng)
        labels, centers, n_iter, history = lloyd(X, np.ascontiguousarray(init), max_iter)
        res = KMeansResult(np.asarray(labels), np.asarray(centers), float(history[-1]), int(n_iter), list(history))
        if best is None or res.wcss < best.wcss:
            best = res
    return best


def canonical_labels(labels):
    """Relabel clusters in order of first appearance."""
    mapping = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        out[i] = mapping.setdefault(int(lab), len(mapping))
    return out


def l2_normalize(X):
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return X / norms


def build_contexts(bank, embeddings=None, mode="predefined", p=None, seed=0, normalize=True, n_init=10):
    if mode == "predefined":
        if not bank.has_predefined_categories:
            raise InvalidInputError("predefined contexts requested but the bank has no categories")
        contexts = {}
        for r in bank.records:
            contexts.setdefault(r.category, []).append(r.prompt_id)
        return ContextSet(contexts=contexts, mode="predefined")
    if mode != "clustered":
        raise InvalidInputError(f"unknown context mode {mode!r}")
    if embeddings is None or p is None:
        raise InvalidInputError("clustered contexts need embeddings and a cluster count")
    by_id = {e.prompt_id: e for e in embeddings}
    missing = [r.prompt_id for r in bank.records if r.prompt_id not in by_id]
    if missing:
        raise InvalidInputError(f"{len(missing)} prompts lack embeddings, e.g. {missing[0]}")
    X = np.array([by_id[r.prompt_id].values for r in bank.records], dtype=np.float64)
    if normalize:
        X = l2_normalize(X)
    res = kmeans(X, p, seed=seed, n_init=n_init)
    labels = canonical_labels(res.labels)
    width = max(2, len(str(p - 1)))
    contexts = {}
    for r, lab in zip(bank.records, labels):
        contexts.setdefault(f"c{lab:0{width}d}", []).append(r.prompt_id)
    if len(contexts) != p:
        raise StageError(f"clustering produced {len(contexts)} non-empty contexts, expected {p}")
    return ContextSet(contexts=dict(sorted(contexts.items())), mode="clustered",
                      meta={"p": p, "seed": seed, "wcss": res.wcss, "normalized": normalize})

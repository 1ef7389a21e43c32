"""Noun-only LDA topic modeling of chunks via collapsed Gibbs sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from functools import lru_cache
from typing import Mapping, Protocol, Sequence

import numba
import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DataError
from .resources import read_tagged, signal_vocabulary, vocabulary
from .textprep import is_word

NOUN, VERB, ADJ, ADV, OTHER = "NOUN", "VERB", "ADJ", "ADV", "OTHER"
POS_TAGS = (NOUN, VERB, ADJ, ADV, OTHER)
DEFAULT_SPLIT_DATE = date(2020, 3, 13)


class PosProvider(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[str]: ...


@lru_cache(maxsize=None)
def _stub_lexicon() -> dict[str, str]:
    table = dict(vocabulary())
    table.update(signal_vocabulary())
    table.update(read_tagged("pos_extra.tsv"))
    return table


class LexiconPosTagger:
    """Closed-dictionary tagger: known words get their listed tag, anything else OTHER."""

    def __init__(self, extra: Mapping[str, str] | None = None):
        self.table = dict(_stub_lexicon())
        if extra:
            bad = {t for t in extra.values() if t not in POS_TAGS}
            if bad:
                raise ValueError(f"unknown POS tags {sorted(bad)}")
            self.table.update(extra)

    def tag(self, tokens: Sequence[str]) -> list[str]:
        return [self.table.get(t.lower(), OTHER) for t in tokens]


def filter_nouns(tokens: Sequence[str], pos: PosProvider) -> list[str]:
    """Keep the tokens tagged NOUN; special tokens and punctuation never survive."""
    words = [t for t in tokens if is_word(t)]
    tags = pos.tag(words)
    if len(tags) != len(words):
        raise ValueError("POS provider returned a tag sequence of the wrong length")
    return [w for w, t in zip(words, tags) if t == NOUN]


@dataclass(frozen=True)
class TopicModel:
    K: int
    topic_word: np.ndarray  # K x V
    doc_topic: np.ndarray  # D x K
    vocabulary: Mapping[str, int]
    alpha: float
    beta: float
    seed: int
    iterations: int

    @property
    def words(self) -> list[str]:
        inv = [""] * len(self.vocabulary)
        for w, i in self.vocabulary.items():
            inv[i] = w
        return inv

    def metadata(self) -> dict:
        return {"K": self.K, "alpha": self.alpha, "beta": self.beta, "seed": self.seed,
                "iterations": self.iterations, "vocabulary_size": len(self.vocabulary),
                "inference": "collapsed Gibbs"}


@numba.njit(cache=True)
def _sweep(words, docs, z, ndk, nkw, nk, alpha, beta, vbeta, u, fixed_phi, use_phi):
    K = ndk.shape[1]
    p = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        ndk[d, k] -= 1
        if not use_phi:
            nkw[k, w] -= 1
            nk[k] -= 1
        total = 0.0
        for t in range(K):
            if use_phi:
                total += (ndk[d, t] + alpha) * fixed_phi[t, w]
            else:
                total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            p[t] = total
        target = u[i] * total
        k = 0
        while k < K - 1 and p[k] <= target:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        if not use_phi:
            nkw[k, w] += 1
            nk[k] += 1


def _flatten(docs: Sequence[Sequence[str]], vocab: Mapping[str, int]):
    words, owners = [], []
    for d, doc in enumerate(docs):
        for w in doc:
            if w in vocab:
                words.append(vocab[w])
                owners.append(d)
    return np.asarray(words, dtype=np.int64), np.asarray(owners, dtype=np.int64)


def _normalize_rows(counts: np.ndarray, prior: float) -> np.ndarray:
    m = counts + prior
    return m / m.sum(axis=1, keepdims=True)


def fit_lda(
    docs: Sequence[Sequence[str]],
    K: int = 5,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 1000,
    seed: int = 0,
) -> TopicModel:
    """Collapsed Gibbs LDA with a fixed number of sweeps.

    ``alpha`` defaults to 50 / K. Estimates come from the final sample's
    counts with the Dirichlet priors added. Every sweep draws its uniforms
    from one numpy generator, so results depend only on ``seed``.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    alpha = 50.0 / K if alpha is None else float(alpha)
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    vocab = {w: i for i, w in enumerate(sorted({str(w) for doc in docs for w in doc}))}
    if not docs or not vocab:
        raise DataError("LDA needs at least one document with at least one word")
    V, D = len(vocab), len(docs)
    words, owners = _flatten(docs, vocab)
    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=words.shape[0]).astype(np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (owners, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)
    dummy = np.zeros((1, 1))
    for _ in range(iterations):
        _sweep(words, owners, z, ndk, nkw, nk, alpha, beta, V * beta, rng.random(words.shape[0]), dummy, False)
    return TopicModel(
        K=K,
        topic_word=_normalize_rows(nkw.astype(float), beta),
        doc_topic=_normalize_rows(ndk.astype(float), alpha),
        vocabulary=vocab,
        alpha=alpha,
        beta=beta,
        seed=seed,
        iterations=iterations,
    )


def infer(model: TopicModel, docs: Sequence[Sequence[str]], iterations: int = 100, seed: int = 0) -> np.ndarray:
    """Doc-topic weights for new documents with the topic-word matrix held fixed.

    Out-of-vocabulary words are ignored; an empty document gets the prior mean.
    """
    words, owners = _flatten(docs, model.vocabulary)
    D, K = len(docs), model.K
    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=words.shape[0]).astype(np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    np.add.at(ndk, (owners, z), 1)
    nkw = np.zeros((1, 1), dtype=np.int64)
    nk = np.zeros(1, dtype=np.int64)
    phi = np.ascontiguousarray(model.topic_word)
    for _ in range(iterations):
        _sweep(words, owners, z, ndk, nkw, nk, model.alpha, model.beta, 0.0, rng.random(words.shape[0]), phi, True)
    return _normalize_rows(ndk.astype(float), model.alpha)


def dominant_topic(weights: Sequence[float]) -> int:
    """Index of the largest weight; np.argmax already returns the lowest index on ties."""
    return int(np.argmax(np.asarray(weights)))


def dominant_topics(model: TopicModel, doc_topic: np.ndarray | None = None) -> dict[int, int]:
    """Count documents per dominant topic; every topic index appears, counts sum to D."""
    weights = model.doc_topic if doc_topic is None else np.asarray(doc_topic)
    counts = {k: 0 for k in range(model.K)}
    for row in weights:
        counts[dominant_topic(row)] += 1
    return counts


def top_keywords(model: TopicModel, topic_index: int, n: int = 15) -> list[str]:
    """The n most probable words of a topic, descending, ties in lexicographic order."""
    if not 0 <= topic_index < model.K:
        raise IndexError(f"topic index {topic_index} out of range for K={model.K}")
    if n < 0:
        raise ValueError("n must be >= 0")
    row = model.topic_word[topic_index]
    ranked = sorted(model.vocabulary.items(), key=lambda kv: (-row[kv[1]], kv[0]))
    return [w for w, _ in ranked[:n]]


def align_topics(a: TopicModel, b: TopicModel) -> tuple[np.ndarray, np.ndarray]:
    """Match b's topics to a's by cosine similarity of topic-word rows.

    Returns (perm, cosines) where topic i of ``a`` pairs with ``perm[i]`` of ``b``.
    Vocabularies are aligned by word first.
    """
    if a.K != b.K:
        raise ValueError("models have different K")
    words = sorted(set(a.vocabulary) | set(b.vocabulary))

    def dense(m: TopicModel) -> np.ndarray:
        out = np.zeros((m.K, len(words)))
        for j, w in enumerate(words):
            if w in m.vocabulary:
                out[:, j] = m.topic_word[:, m.vocabulary[w]]
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    sim = dense(a) @ dense(b).T
    rows, cols = linear_sum_assignment(-sim)
    perm = cols[np.argsort(rows)]
    return perm, sim[np.arange(a.K), perm]


def topic_report(model: TopicModel, period: str, n_keywords: int = 15, doc_topic: np.ndarray | None = None) -> dict:
    counts = dominant_topics(model, doc_topic)
    return {
        "period": period,
        "K": model.K,
        "seed": model.seed,
        "hyperparameters": model.metadata(),
        "n_documents": int(sum(counts.values())),
        "topics": [
            {"index": k, "top_keywords": top_keywords(model, k, n_keywords), "dominant_count": counts[k]}
            for k in range(model.K)
        ],
    }


def write_topic_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

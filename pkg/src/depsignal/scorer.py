"""Chunk-level depression scoring.

The in-repo scorer is a logistic regression over signed, hashed 1- and
2-gram counts of the normalized chunk tokens, trained by mini-batch
gradient descent with per-epoch validation and best-epoch retention.
Scores from externally fine-tuned transformers enter through
``import_external_scores``.

Model file layout (little-endian)::

    magic       4 bytes   b"DSLR"
    version     uint32    1
    dim         uint32    number of hashed features D
    ngram_max   uint32
    bias        float64
    weights     D x float64
    meta_len    uint32
    meta        meta_len bytes of UTF-8 JSON (seed, epochs, lr, history, ...)
"""

from __future__ import annotations

import csv
import json
import struct
import zlib
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import date
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .corpus import DP, ND, UserRecord
from .errors import DataError
from .metrics import MetricsReport, evaluate_scores
from .textprep import Chunk, chunk_users

MAGIC = b"DSLR"
FORMAT_VERSION = 1
DEFAULT_DIM = 2 ** 18

# Documented defaults for the out-of-process transformer scorers whose
# chunk scores are imported as CSV; nothing in this package reads them.
EXTERNAL_SCORER_DEFAULTS = {
    "bert-base": {"optimizer": "AdamW", "lr": 2e-5, "batch_size": 8, "loss": "cross_entropy"},
    "roberta-base": {"optimizer": "AdamW", "lr": 2e-5, "batch_size": 8, "loss": "cross_entropy"},
    "xlnet-base": {"optimizer": "AdamW", "lr": 8e-6, "batch_size": 8, "loss": "cross_entropy"},
    "validation_split": 0.1,
    "selection": "best mean of validation accuracy and F1 per epoch",
}


@dataclass(frozen=True)
class ChunkScore:
    user_id: str
    chunk_index: int
    confidence: float
    mid_date: date | None = None


@dataclass(frozen=True)
class UserScore:
    user_id: str
    mean_confidence: float
    n_chunks: int


@dataclass
class BaselineModel:
    weights: np.ndarray
    bias: float = 0.0
    ngram_max: int = 2
    seed: int = 0
    epochs: int = 0
    lr: float = 0.0
    best_epoch: int = -1
    history: list[dict] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    @classmethod
    def zeros(cls, dim: int = DEFAULT_DIM, ngram_max: int = 2) -> "BaselineModel":
        return cls(weights=np.zeros(dim), ngram_max=ngram_max)

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights).ravel() + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def meta(self) -> dict:
        return {
            "seed": self.seed, "epochs": self.epochs, "lr": self.lr,
            "best_epoch": self.best_epoch, "history": self.history,
        }


def _sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# featurization


@lru_cache(maxsize=1 << 20)
def _hash(ngram: str, dim: int) -> tuple[int, float]:
    h = zlib.crc32(ngram.encode("utf-8"))
    return h % dim, (1.0 if (h >> 31) == 0 else -1.0)


def _ngrams(tokens: Sequence[str], ngram_max: int):
    for n in range(1, ngram_max + 1):
        for i in range(len(tokens) - n + 1):
            yield f"{n}:" + " ".join(tokens[i : i + n])


def featurize(chunks: Sequence[Chunk], dim: int = DEFAULT_DIM, ngram_max: int = 2) -> sparse.csr_matrix:
    """Signed hashed n-gram counts, one L2-normalized row per chunk."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for c in chunks:
        row: dict[int, float] = {}
        for g in _ngrams(c.tokens, ngram_max):
            idx, sign = _hash(g, dim)
            row[idx] = row.get(idx, 0.0) + sign
        norm = np.sqrt(sum(v * v for v in row.values()))
        for idx in sorted(row):
            v = row[idx]
            if v != 0.0:
                indices.append(idx)
                data.append(v / norm)
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(chunks), dim),
    )


def _labels(chunks: Sequence[Chunk]) -> np.ndarray:
    return np.array([1 if c.label == DP else 0 for c in chunks], dtype=float)


# ---------------------------------------------------------------------------
# training


def split_users(user_ids: Sequence[str], labels: Sequence[str], fraction: float, rng: np.random.Generator):
    """Stratified random split of users; returns (kept, held_out) id sets."""
    held = set()
    for lab in (DP, ND):
        ids = sorted(u for u, l in zip(user_ids, labels) if l == lab)
        if len(ids) < 2:
            continue
        k = max(1, int(round(fraction * len(ids))))
        held.update(ids[i] for i in rng.permutation(len(ids))[:k])
    kept = set(user_ids) - held
    return kept, held


def train_baseline(
    chunks: Sequence[Chunk],
    seed: int = 0,
    epochs: int = 10,
    lr: float = 2.0,
    batch_size: int = 32,
    l2: float = 1e-4,
    dim: int = DEFAULT_DIM,
    ngram_max: int = 2,
    val_fraction: float = 0.1,
) -> BaselineModel:
    """Fit the hashed n-gram logistic regression on labeled chunks.

    Users (not chunks) are split 9:1 into training and validation so that no
    user contributes to both. After every epoch the validation accuracy and
    F1 are recorded; the returned weights are those of the epoch with the
    highest mean of the two, ties going to the later epoch.
    """
    labels = {c.label for c in chunks}
    if labels - {DP, ND}:
        raise DataError("training chunks must be labeled DP or ND")
    if len(labels) < 2:
        raise DataError("training chunks must contain both DP and ND labels")
    rng = np.random.default_rng(seed)
    user_label = OrderedDict((c.user_id, c.label) for c in chunks)
    _, val_users = split_users(list(user_label), list(user_label.values()), val_fraction, rng)
    tr_idx = np.array([i for i, c in enumerate(chunks) if c.user_id not in val_users])
    va_idx = np.array([i for i, c in enumerate(chunks) if c.user_id in val_users])

    X = featurize(chunks, dim, ngram_max)
    y = _labels(chunks)
    Xtr, ytr = X[tr_idx], y[tr_idx]
    w = np.zeros(dim)
    b = 0.0
    best = None
    history = []
    for epoch in range(epochs):
        order = rng.permutation(len(tr_idx))
        for start in range(0, len(order), batch_size):
            sel = order[start : start + batch_size]
            Xb = Xtr[sel]
            p = _sigmoid(Xb @ w + b)
            r = p - ytr[sel]
            grad = np.asarray(Xb.T @ r).ravel() / len(sel)
            w -= lr * (grad + l2 * w)
            b -= lr * float(r.mean())
        if len(va_idx):
            rep = evaluate_scores(_sigmoid(X[va_idx] @ w + b), y[va_idx])
        else:
            rep = evaluate_scores(_sigmoid(Xtr @ w + b), ytr)
        crit = (rep.accuracy + rep.f1) / 2.0
        history.append({"epoch": epoch, "val_accuracy": rep.accuracy, "val_f1": rep.f1, "val_auc": rep.auc})
        if best is None or crit >= best[0]:
            best = (crit, epoch, w.copy(), b)
    assert best is not None, "epochs must be >= 1"
    _, best_epoch, bw, bb = best
    return BaselineModel(
        weights=bw, bias=float(bb), ngram_max=ngram_max, seed=seed, epochs=epochs, lr=lr,
        best_epoch=best_epoch, history=history,
    )


def cross_fit_scores(chunks: Sequence[Chunk], folds: int = 5, seed: int = 0, **train_kwargs) -> list[ChunkScore]:
    """Out-of-fold chunk scores: each user is scored by a model that never saw them.

    Users are dealt round-robin into ``folds`` groups after a seeded shuffle.
    Fusion training rows use these so the mean-confidence column is not
    inflated by memorized training chunks.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    users = sorted({c.user_id for c in chunks})
    rng = np.random.default_rng(seed)
    fold_of = {users[i]: k % folds for k, i in enumerate(rng.permutation(len(users)))}
    by_user: dict[tuple[str, int], ChunkScore] = {}
    for k in range(folds):
        held = [c for c in chunks if fold_of[c.user_id] == k]
        if not held:
            continue
        model = train_baseline([c for c in chunks if fold_of[c.user_id] != k], seed=seed, **train_kwargs)
        for s in score_chunks(model, held):
            by_user[(s.user_id, s.chunk_index)] = s
    # restore input order with per-user chunk indices
    seen: dict[str, int] = {}
    out = []
    for c in chunks:
        i = seen.get(c.user_id, 0)
        seen[c.user_id] = i + 1
        out.append(by_user[(c.user_id, i)])
    return out


def save_model(model: BaselineModel, path) -> None:
    meta = json.dumps(model.meta(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIId", FORMAT_VERSION, model.dim, model.ngram_max, model.bias))
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def load_model(path) -> BaselineModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: not a baseline model file")
    version, dim, ngram_max, bias = struct.unpack_from("<IIId", blob, 4)
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {version}")
    off = 4 + struct.calcsize("<IIId")
    weights = np.frombuffer(blob, dtype="<f8", count=dim, offset=off).astype(float)
    off += 8 * dim
    (meta_len,) = struct.unpack_from("<I", blob, off)
    meta = json.loads(blob[off + 4 : off + 4 + meta_len].decode("utf-8"))
    return BaselineModel(
        weights=weights, bias=bias, ngram_max=ngram_max, seed=meta.get("seed", 0),
        epochs=meta.get("epochs", 0), lr=meta.get("lr", 0.0), best_epoch=meta.get("best_epoch", -1),
        history=meta.get("history", []),
    )


# ---------------------------------------------------------------------------
# scoring and aggregation


def score_chunks(model: BaselineModel, chunks: Sequence[Chunk]) -> list[ChunkScore]:
    """Confidence = sigmoid of the linear score; chunk_index counts per user in input order."""
    if not chunks:
        return []
    conf = model.predict_proba(featurize(chunks, model.dim, model.ngram_max))
    seen: dict[str, int] = {}
    out = []
    for c, p in zip(chunks, conf):
        k = seen.get(c.user_id, 0)
        seen[c.user_id] = k + 1
        out.append(ChunkScore(c.user_id, k, float(p), c.mid_date))
    return out


def aggregate_user(scores: Iterable[ChunkScore]) -> list[UserScore]:
    """Mean chunk confidence per user, ordered by user_id."""
    groups: dict[str, list[float]] = {}
    for s in scores:
        groups.setdefault(s.user_id, []).append(s.confidence)
    return [UserScore(u, float(np.mean(v)), len(v)) for u, v in sorted(groups.items())]


def write_chunk_scores(scores: Iterable[ChunkScore], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "chunk_index", "confidence", "mid_date"])
        for s in scores:
            w.writerow([s.user_id, s.chunk_index, repr(s.confidence), s.mid_date.isoformat() if s.mid_date else ""])


def write_user_scores(scores: Iterable[UserScore], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "mean_confidence", "n_chunks"])
        for s in scores:
            w.writerow([s.user_id, repr(s.mean_confidence), s.n_chunks])


def read_user_scores(path) -> list[UserScore]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            UserScore(r["user_id"], float(r["mean_confidence"]), int(r["n_chunks"]))
            for r in csv.DictReader(fh)
        ]


def import_external_scores(path) -> list[ChunkScore]:
    """Read chunk confidences produced elsewhere.

    Expects the header ``user_id,chunk_index,confidence[,mid_date]``.
    Rejects malformed rows, confidences outside [0, 1] and repeated
    ``(user_id, chunk_index)`` keys, naming the row in the error.
    """
    out = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        header = [h.strip() for h in header]
        if header[:3] != ["user_id", "chunk_index", "confidence"] or len(header) > 4 or (
            len(header) == 4 and header[3] != "mid_date"
        ):
            raise DataError(f"{path}: bad header {header}")
        for rowno, row in enumerate(reader, start=2):
            if not row or not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {rowno}: expected {len(header)} fields, got {len(row)}")
            try:
                uid = row[0].strip()
                idx = int(row[1])
                conf = float(row[2])
                mid = date.fromisoformat(row[3].strip()) if len(row) == 4 and row[3].strip() else None
            except ValueError as exc:
                raise DataError(f"{path}: row {rowno}: malformed ({exc})") from exc
            if not uid:
                raise DataError(f"{path}: row {rowno}: empty user_id")
            if not (0.0 <= conf <= 1.0):
                raise DataError(f"{path}: row {rowno}: confidence {conf} outside [0, 1]")
            if (uid, idx) in seen:
                raise DataError(f"{path}: row {rowno}: duplicate key ({uid}, {idx})")
            seen.add((uid, idx))
            out.append(ChunkScore(uid, idx, conf, mid))
    return out


# ---------------------------------------------------------------------------
# learning curve


def stratified_sample(users: Sequence[UserRecord], n: int, rng: np.random.Generator) -> list[UserRecord]:
    """Draw n users with a 1:1 DP:ND ratio (odd n gives the extra user to DP)."""
    dp = [u for u in users if u.label == DP]
    nd = [u for u in users if u.label == ND]
    n_dp, n_nd = n - n // 2, n // 2
    if n_dp > len(dp) or n_nd > len(nd):
        raise DataError(f"cannot draw {n} balanced users from {len(dp)} DP / {len(nd)} ND")
    pick_dp = [dp[i] for i in rng.permutation(len(dp))[:n_dp]]
    pick_nd = [nd[i] for i in rng.permutation(len(nd))[:n_nd]]
    return sorted(pick_dp + pick_nd, key=lambda u: u.user_id)


def learning_curve(
    users: Sequence[UserRecord],
    sizes: Sequence[int | None],
    test_size: int = 500,
    seed: int = 0,
    target_words: int = 250,
    min_words: int = 125,
    **train_kwargs,
) -> list[dict]:
    """Train on nested balanced subsets of growing size, scoring a fixed test split.

    ``None`` in ``sizes`` means every non-test user that keeps the ratio 1:1.
    Test users never enter training or validation. Metrics are chunk level.
    """
    rng = np.random.default_rng(seed)
    test = stratified_sample(users, test_size, rng)
    test_ids = {u.user_id for u in test}
    pool = [u for u in users if u.user_id not in test_ids]
    shuffled = [pool[i] for i in rng.permutation(len(pool))]
    dp = [u for u in shuffled if u.label == DP]
    nd = [u for u in shuffled if u.label == ND]
    full = 2 * min(len(dp), len(nd))
    test_chunks = chunk_users(test, target_words, min_words)
    y_test = _labels(test_chunks)
    cache: dict[str, list[Chunk]] = {}
    rows = []
    for size in sizes:
        n = full if size is None else int(size)
        if n <= 0:
            raise ValueError(f"training size must be positive, got {size}")
        if n > full:
            raise DataError(f"training size {n} exceeds the {full} balanced users available")
        # nested subsets: each size extends the previous one
        subset = dp[: n - n // 2] + nd[: n // 2]
        chunks = []
        for u in subset:
            if u.user_id not in cache:
                cache[u.user_id] = chunk_users([u], target_words, min_words)
            chunks.extend(cache[u.user_id])
        model = train_baseline(chunks, seed=seed, **train_kwargs)
        conf = [s.confidence for s in score_chunks(model, test_chunks)]
        rep: MetricsReport = evaluate_scores(conf, y_test)
        rows.append({
            "size": n, "accuracy": rep.accuracy, "f1": rep.f1, "auc": rep.auc,
            "precision": rep.precision, "recall": rep.recall, "n_train_chunks": len(chunks),
            "n_test_chunks": len(test_chunks),
        })
    return rows

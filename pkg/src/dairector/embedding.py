"""Paragraph-vector embeddings over plot fragments and trope descriptions.

Distributed-memory variant: the center word is predicted from the mean of
the document vector and the context word vectors inside a fixed window,
trained with negative sampling. Everything is single-threaded and seeded,
so two runs with the same inputs produce byte-identical models; the tilt
replay tests depend on that.

Document ids are namespaced: "frag:<fragment id>" and "trope:<name>".
"""

from __future__ import annotations

import json
import re
import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .corpus import PlotGraph, TropeCorpus

_TOKEN_RX = re.compile(r"[^\W_]+")

MODEL_MAGIC = b"DAIRVEC"
MODEL_FORMAT_VERSION = 1


class EmbeddingError(Exception):
    """Invalid training input or configuration."""


class ModelFormatError(EmbeddingError):
    """Model file unreadable or version-incompatible."""


class ModelCorpusMismatch(EmbeddingError):
    """Loaded model was trained on different corpus content."""


class ZeroVectorWarning(UserWarning):
    """A zero-norm vector appeared in a cosine-distance computation."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; underscores split too."""
    return _TOKEN_RX.findall(text.lower())


@dataclass(frozen=True)
class TokenizedDoc:
    doc_id: str
    tokens: tuple[str, ...]


def assemble_training_docs(graph: PlotGraph,
                           tropes: TropeCorpus) -> tuple[list[TokenizedDoc], list[str]]:
    """Tokenize fragment texts and trope descriptions into training docs.

    Returns (docs, dropped_ids) where dropped_ids lists documents whose
    text produced no tokens at all; those cannot be trained.
    """
    texts = [(f"frag:{f.id}", f.text) for f in graph.fragments.values()]
    texts += [(f"trope:{t.name}", t.description) for t in tropes.tropes.values()]
    docs: list[TokenizedDoc] = []
    dropped: list[str] = []
    for doc_id, text in texts:
        tokens = tuple(tokenize(text))
        if tokens:
            docs.append(TokenizedDoc(doc_id, tokens))
        else:
            dropped.append(doc_id)
    return docs, dropped


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters; the unspecified knobs are pinned here on purpose.

    lr decays linearly from initial_lr to lr_floor over all updates; the
    window is fixed (never randomly shrunk); noise words are drawn from
    the unigram distribution raised to noise_exponent.
    """

    dim: int = 410
    initial_lr: float = 0.03
    window: int = 4
    min_count: int = 2
    negative_samples: int = 4
    epochs: int = 40
    seed: int = 1
    lr_floor: float = 1e-4
    noise_exponent: float = 0.75

    def validate(self) -> None:
        if self.dim <= 0:
            raise EmbeddingError("dim must be positive")
        if self.window < 1:
            raise EmbeddingError("window must be >= 1")
        if self.negative_samples < 1:
            raise EmbeddingError("negative_samples must be >= 1")
        if self.initial_lr <= 0:
            raise EmbeddingError("initial_lr must be positive")
        if not 0 < self.lr_floor <= self.initial_lr:
            raise EmbeddingError("lr_floor must be in (0, initial_lr]")
        if self.epochs < 1:
            raise EmbeddingError("epochs must be >= 1")
        if self.min_count < 1:
            raise EmbeddingError("min_count must be >= 1")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "initial_lr": self.initial_lr,
            "window": self.window,
            "min_count": self.min_count,
            "negative_samples": self.negative_samples,
            "epochs": self.epochs,
            "seed": self.seed,
            "lr_floor": self.lr_floor,
            "noise_exponent": self.noise_exponent,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TrainingConfig:
        return cls(**data)


@dataclass(frozen=True)
class Vocab:
    """Words surviving min_count, indexed by (-count, word) order."""

    words: tuple[str, ...]
    counts: dict[str, int]
    index: dict[str, int]
    total_tokens: int

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __len__(self) -> int:
        return len(self.words)


def build_vocab(docs: Sequence[TokenizedDoc], config: TrainingConfig) -> Vocab:
    if not docs:
        raise EmbeddingError("no documents")
    counts: dict[str, int] = {}
    total = 0
    for doc in docs:
        for token in doc.tokens:
            counts[token] = counts.get(token, 0) + 1
            total += 1
    kept = {w: c for w, c in counts.items() if c >= config.min_count}
    if not kept:
        raise EmbeddingError("empty vocabulary after filtering")
    words = tuple(sorted(kept, key=lambda w: (-kept[w], w)))
    return Vocab(
        words=words,
        counts=kept,
        index={w: i for i, w in enumerate(words)},
        total_tokens=total,
    )


def _noise_cumulative(vocab: Vocab, exponent: float) -> np.ndarray:
    weights = np.array(
        [vocab.counts[w] for w in vocab.words], dtype=np.float64
    ) ** exponent
    cum = np.cumsum(weights)
    return cum / cum[-1]


@dataclass
class EmbeddingModel:
    config: TrainingConfig
    vocab: Vocab
    doc_ids: tuple[str, ...]
    doc_vectors: np.ndarray      # (n_docs, dim) float32
    word_vectors: np.ndarray     # (vocab, dim) float32
    output_weights: np.ndarray   # (vocab, dim) float32
    loss_curve: tuple[float, ...] = ()
    plot_corpus_hash: str = ""
    trope_corpus_hash: str = ""
    doc_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.doc_index:
            self.doc_index = {d: i for i, d in enumerate(self.doc_ids)}

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self.doc_index

    def doc_vector(self, doc_id: str) -> np.ndarray:
        return self.doc_vectors[self.doc_index[doc_id]]

    @classmethod
    def from_doc_vectors(cls, vectors: dict[str, np.ndarray],
                         config: TrainingConfig | None = None) -> EmbeddingModel:
        """Build a query-only model from explicit vectors (no training).

        Used by the evaluation harness tests to construct oracle and
        random embeddings; inference is unavailable (empty vocabulary
        makes every prompt out-of-vocabulary).
        """
        if not vectors:
            raise EmbeddingError("no vectors")
        doc_ids = tuple(vectors)
        matrix = np.stack([np.asarray(vectors[d], dtype=np.float32) for d in doc_ids])
        cfg = config or TrainingConfig(dim=matrix.shape[1])
        empty = np.zeros((0, matrix.shape[1]), dtype=np.float32)
        return cls(
            config=cfg,
            vocab=Vocab(words=(), counts={}, index={}, total_tokens=0),
            doc_ids=doc_ids,
            doc_vectors=matrix,
            word_vectors=empty,
            output_weights=empty,
        )


def _context_indices(seq: list[int], pos: int, window: int) -> list[int]:
    return seq[max(0, pos - window):pos] + seq[pos + 1:pos + 1 + window]


def _train_position(center: int, ctx: list[int], input_vec: np.ndarray,
                    output_weights: np.ndarray, noise_cum: np.ndarray,
                    rng: np.random.Generator, k: int, lr: float,
                    vocab_size: int, learn_hidden: bool = True,
                    ) -> tuple[np.ndarray, float]:
    """One negative-sampling update. Returns (input gradient, loss)."""
    targets = [center]
    if vocab_size > 1:
        while len(targets) < k + 1:
            drawn = int(np.searchsorted(noise_cum, rng.random(), side="right"))
            if drawn != center:
                targets.append(drawn)
    l2b = output_weights[targets]                   # copy, pre-update
    scores = l2b @ input_vec
    f = expit(scores)
    labels = np.zeros(len(targets), dtype=np.float32)
    labels[0] = 1.0
    g = (labels - f).astype(np.float32) * lr
    if learn_hidden:
        output_weights[targets] += np.outer(g, input_vec)
    loss = float(np.logaddexp(0.0, -scores[0]) + np.logaddexp(0.0, scores[1:]).sum())
    return g @ l2b, loss


def train(docs: Sequence[TokenizedDoc], config: TrainingConfig) -> EmbeddingModel:
    """Train doc, word and output vectors; deterministic for a given seed.

    Windows slide over each document's in-vocabulary token sequence, so
    dropped rare words do not leave holes in contexts.
    """
    config.validate()
    if len(docs) < 2:
        raise EmbeddingError("need at least 2 documents")
    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise EmbeddingError(f"duplicate doc_id: {doc.doc_id!r}")
        if not doc.tokens:
            raise EmbeddingError(f"empty document: {doc.doc_id!r}")
        seen.add(doc.doc_id)

    vocab = build_vocab(docs, config)
    noise_cum = _noise_cumulative(vocab, config.noise_exponent)
    rng = np.random.default_rng(config.seed)
    dim = config.dim
    bound = 0.5 / dim
    word_vectors = rng.uniform(-bound, bound, (len(vocab), dim)).astype(np.float32)
    doc_vectors = rng.uniform(-bound, bound, (len(docs), dim)).astype(np.float32)
    output_weights = np.zeros((len(vocab), dim), dtype=np.float32)

    sequences = [
        [vocab.index[t] for t in doc.tokens if t in vocab] for doc in docs
    ]
    total_updates = config.epochs * sum(len(s) for s in sequences)
    if total_updates == 0:
        raise EmbeddingError("no in-vocabulary tokens to train on")

    lr_span = config.initial_lr - config.lr_floor
    k = config.negative_samples
    done = 0
    loss_curve: list[float] = []
    for _ in range(config.epochs):
        epoch_loss = 0.0
        epoch_updates = 0
        for doc_pos, seq in enumerate(sequences):
            dvec = doc_vectors[doc_pos]
            for pos, center in enumerate(seq):
                lr = max(config.lr_floor,
                         config.initial_lr - lr_span * done / total_updates)
                done += 1
                ctx = _context_indices(seq, pos, config.window)
                l1 = (word_vectors[ctx].sum(axis=0) + dvec) / np.float32(len(ctx) + 1)
                neu1e, loss = _train_position(
                    center, ctx, l1, output_weights, noise_cum, rng, k, lr,
                    len(vocab),
                )
                dvec += neu1e
                np.add.at(word_vectors, ctx, neu1e)
                epoch_loss += loss
                epoch_updates += 1
        loss_curve.append(epoch_loss / epoch_updates)

    return EmbeddingModel(
        config=config,
        vocab=vocab,
        doc_ids=tuple(d.doc_id for d in docs),
        doc_vectors=doc_vectors,
        word_vectors=word_vectors,
        output_weights=output_weights,
        loss_curve=tuple(loss_curve),
    )


@dataclass(frozen=True)
class InferredVector:
    vector: np.ndarray
    low_confidence: bool


def infer_vector(model: EmbeddingModel, tokens: Sequence[str],
                 rng: np.random.Generator | None = None,
                 epochs: int | None = None) -> InferredVector:
    """Fit a fresh doc vector to unseen text; weights stay frozen.

    Out-of-vocabulary tokens are skipped. If nothing survives, the
    untouched random initial vector comes back flagged low-confidence.
    Pass an independent rng per concurrent caller.
    """
    if not tokens:
        raise EmbeddingError("empty token list")
    config = model.config
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if epochs is None:
        epochs = config.epochs
    dim = config.dim
    bound = 0.5 / dim
    dvec = rng.uniform(-bound, bound, dim).astype(np.float32)
    seq = [model.vocab.index[t] for t in tokens if t in model.vocab]
    if not seq:
        return InferredVector(vector=dvec, low_confidence=True)

    noise_cum = _noise_cumulative(model.vocab, config.noise_exponent)
    total_updates = epochs * len(seq)
    lr_span = config.initial_lr - config.lr_floor
    done = 0
    for _ in range(epochs):
        for pos, center in enumerate(seq):
            lr = max(config.lr_floor,
                     config.initial_lr - lr_span * done / total_updates)
            done += 1
            ctx = _context_indices(seq, pos, config.window)
            l1 = (model.word_vectors[ctx].sum(axis=0) + dvec) / np.float32(len(ctx) + 1)
            # learn_hidden=False: only the new doc vector moves, the
            # model's word and output weights stay untouched
            neu1e, _ = _train_position(
                center, ctx, l1, model.output_weights, noise_cum, rng,
                config.negative_samples, lr, len(model.vocab),
                learn_hidden=False,
            )
            dvec += neu1e
    return InferredVector(vector=dvec, low_confidence=False)


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), in [0, 2]. Zero-norm input warns and returns 1.0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EmbeddingError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        warnings.warn("cosine distance of zero-norm vector defined as 1.0",
                      ZeroVectorWarning, stacklevel=2)
        return 1.0
    return float(1.0 - float(np.dot(a, b)) / norm)


def nearest_documents(model: EmbeddingModel, query: np.ndarray,
                      pool: Iterable[str], n: int) -> list[tuple[str, float]]:
    """The n pool docs nearest to query, ascending; ties by doc_id."""
    pool = list(pool)
    if not pool:
        raise EmbeddingError("empty pool")
    if n < 1:
        raise EmbeddingError("n must be >= 1")
    unknown = [d for d in pool if d not in model.doc_index]
    if unknown:
        raise EmbeddingError(f"unknown doc ids in pool: {unknown[:5]!r}")
    scored = [(cosine_distance(query, model.doc_vector(d)), d) for d in pool]
    scored.sort()
    return [(d, dist) for dist, d in scored[:n]]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_model(model: EmbeddingModel, path: str) -> None:
    header = {
        "config": model.config.to_dict(),
        "vocab": [[w, model.vocab.counts[w]] for w in model.vocab.words],
        "total_tokens": model.vocab.total_tokens,
        "doc_ids": list(model.doc_ids),
        "loss_curve": list(model.loss_curve),
        "plot_corpus_hash": model.plot_corpus_hash,
        "trope_corpus_hash": model.trope_corpus_hash,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for array in (model.word_vectors, model.doc_vectors, model.output_weights):
            fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def load_model(path: str, expected_plot_hash: str | None = None,
               expected_trope_hash: str | None = None) -> EmbeddingModel:
    """Read a model file; optionally verify it matches given corpus hashes.

    Raises:
        ModelFormatError: bad magic, unknown version, truncated file.
        ModelCorpusMismatch: an expected hash differs from the stored one.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    offset = len(MODEL_MAGIC)
    if data[:offset] != MODEL_MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    (version,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    (header_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    try:
        header = json.loads(data[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc}") from exc
    offset += header_len

    config = TrainingConfig.from_dict(header["config"])
    words = tuple(w for w, _ in header["vocab"])
    counts = {w: c for w, c in header["vocab"]}
    vocab = Vocab(
        words=words,
        counts=counts,
        index={w: i for i, w in enumerate(words)},
        total_tokens=header["total_tokens"],
    )
    doc_ids = tuple(header["doc_ids"])
    dim = config.dim

    def take(rows: int) -> np.ndarray:
        nonlocal offset
        size = rows * dim * 4
        chunk = data[offset:offset + size]
        if len(chunk) != size:
            raise ModelFormatError("truncated model file")
        offset += size
        return np.frombuffer(chunk, dtype="<f4").reshape(rows, dim).copy()

    word_vectors = take(len(words))
    doc_vectors = take(len(doc_ids))
    output_weights = take(len(words))

    if expected_plot_hash is not None and header["plot_corpus_hash"] != expected_plot_hash:
        raise ModelCorpusMismatch("model was trained on a different plot corpus")
    if expected_trope_hash is not None and header["trope_corpus_hash"] != expected_trope_hash:
        raise ModelCorpusMismatch("model was trained on a different trope corpus")

    return EmbeddingModel(
        config=config,
        vocab=vocab,
        doc_ids=doc_ids,
        doc_vectors=doc_vectors,
        word_vectors=word_vectors,
        output_weights=output_weights,
        loss_curve=tuple(header["loss_curve"]),
        plot_corpus_hash=header["plot_corpus_hash"],
        trope_corpus_hash=header["trope_corpus_hash"],
    )


def train_from_corpora(graph: PlotGraph, tropes: TropeCorpus,
                       config: TrainingConfig) -> EmbeddingModel:
    """Assemble docs from both corpora, train, and stamp corpus hashes."""
    docs, _dropped = assemble_training_docs(graph, tropes)
    model = train(docs, config)
    model.plot_corpus_hash = graph.content_hash()
    model.trope_corpus_hash = tropes.content_hash()
    return model

"""Source-extension prediction for dynamic masking.

The probe strategies extend a source prefix by k hypothetical tokens:
an add-alpha smoothed n-gram language model (sampled or greedy), the
reserved unknown token, or uniform draws from the vocabulary. All draws
are reproducible from (seed, sentence_id, step_index, sample_index).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .core import TokenSeq
from .translator import EOS, UNK, mix64

LM_FORMAT = "retransim-ngram-lm"
LM_VERSION = 1

STRATEGIES = ("lm_sample", "lm_greedy", "unknown", "random")


class PredictorError(Exception):
    """Base class for prediction failures."""


class EmptyCorpus(PredictorError):
    """No sentences supplied for language-model training."""


class MissingLM(PredictorError):
    """An lm_* strategy was configured without a language model."""


class LMFormatError(ValueError):
    """A persisted language model file does not match the expected format."""


class NgramLM:
    """Add-alpha smoothed n-gram model with backoff to lower orders.

    counts[o] maps a context tuple of o-1 tokens to {token: count}. Every
    training sentence is implicitly terminated by EOS; the vocabulary
    always contains UNK and EOS. A context never observed at one order
    backs off to the next shorter context, bottoming out at unigrams.
    """

    def __init__(
        self,
        order: int,
        counts: dict[int, dict[tuple[str, ...], dict[str, int]]],
        vocabulary: set[str],
        smoothing_alpha: float,
    ):
        if not 1 <= order <= 4:
            raise ValueError(f"order must be in [1, 4], got {order}")
        if smoothing_alpha <= 0:
            raise ValueError("smoothing_alpha must be > 0")
        self.order = order
        self.counts = counts
        self.vocabulary = frozenset(vocabulary) | {UNK, EOS}
        self.smoothing_alpha = smoothing_alpha
        self._sorted_vocab = tuple(sorted(self.vocabulary))

    def _resolve(self, context: TokenSeq) -> tuple[dict[str, int], int]:
        """Longest observed context table for a query, after backoff."""
        context = tuple(context)
        for o in range(min(self.order, len(context) + 1), 1, -1):
            table = self.counts.get(o, {}).get(context[len(context) - o + 1 :])
            if table is not None:
                return table, sum(table.values())
        table = self.counts[1].get((), {})
        return table, sum(table.values())

    def prob(self, token: str, context: TokenSeq = ()) -> float:
        if token not in self.vocabulary:
            token = UNK
        table, total = self._resolve(context)
        a = self.smoothing_alpha
        v = len(self.vocabulary)
        return (table.get(token, 0) + a) / (total + a * v)

    def distribution(self, context: TokenSeq = ()) -> list[tuple[str, float]]:
        """(token, prob) over the full vocabulary, sorted by token."""
        table, total = self._resolve(context)
        a = self.smoothing_alpha
        denom = total + a * len(self.vocabulary)
        return [(t, (table.get(t, 0) + a) / denom) for t in self._sorted_vocab]

    def argmax(self, context: TokenSeq = ()) -> str:
        """Most probable next token; ties break lexicographically."""
        table, total = self._resolve(context)
        best, best_count = None, -1
        for t in self._sorted_vocab:
            c = table.get(t, 0)
            if c > best_count:
                best, best_count = t, c
        return best  # type: ignore[return-value]

    def sample(self, context: TokenSeq, rng: random.Random) -> str:
        u = rng.random()
        acc = 0.0
        dist = self.distribution(context)
        for token, p in dist:
            acc += p
            if u < acc:
                return token
        return dist[-1][0]  # float tail when u ~ 1.0


def train_lm(
    source_corpus: list[TokenSeq],
    order: int = 3,
    smoothing_alpha: float = 0.1,
) -> NgramLM:
    """Count n-grams up to the given order over the source sentences."""
    if not source_corpus:
        raise EmptyCorpus("cannot train a language model on an empty corpus")
    counts: dict[int, dict[tuple[str, ...], dict[str, int]]] = {
        o: {} for o in range(1, order + 1)
    }
    vocab: set[str] = set()
    for sentence in source_corpus:
        seq = tuple(sentence) + (EOS,)
        vocab.update(sentence)
        for o in range(1, order + 1):
            tables = counts[o]
            for i in range(o - 1, len(seq)):
                ctx = seq[i - o + 1 : i]
                table = tables.get(ctx)
                if table is None:
                    table = tables[ctx] = {}
                tok = seq[i]
                table[tok] = table.get(tok, 0) + 1
    return NgramLM(order, counts, vocab, smoothing_alpha)


def save_lm(lm: NgramLM, path: str | Path) -> None:
    """Write a versioned, byte-stable JSON dump of the count tables."""
    payload = {
        "format": LM_FORMAT,
        "version": LM_VERSION,
        "order": lm.order,
        "smoothing_alpha": lm.smoothing_alpha,
        "vocabulary": sorted(lm.vocabulary),
        "counts": {
            str(o): {"\x1f".join(ctx): dict(sorted(table.items())) for ctx, table in tables.items()}
            for o, tables in lm.counts.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=None)
        fh.write("\n")


def load_lm(path: str | Path) -> NgramLM:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != LM_FORMAT:
        raise LMFormatError(f"{path}: not a {LM_FORMAT} file")
    if payload.get("version") != LM_VERSION:
        raise LMFormatError(
            f"{path}: version {payload.get('version')} unsupported (expected {LM_VERSION})"
        )
    counts = {
        int(o): {
            tuple(ctx.split("\x1f")) if ctx else (): {t: int(c) for t, c in table.items()}
            for ctx, table in tables.items()
        }
        for o, tables in payload["counts"].items()
    }
    vocab = set(payload["vocabulary"]) - {UNK, EOS}
    return NgramLM(payload["order"], counts, vocab, payload["smoothing_alpha"])


@dataclass(frozen=True)
class PredictorConfig:
    """Which extension strategy to probe with, and how much of it.

    k is the extension length in tokens, n the number of extensions.
    Deterministic strategies (lm_greedy, unknown) force n to 1.
    """

    strategy: str
    k: int = 1
    n: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.strategy in ("lm_greedy", "unknown"):
            object.__setattr__(self, "n", 1)

    @property
    def label(self) -> str:
        if self.strategy == "unknown":
            return f"{self.strategy},k={self.k}"
        return f"{self.strategy},k={self.k},n={self.n}"


def predict_extensions(
    cfg: PredictorConfig,
    lm: NgramLM | None,
    vocab: frozenset[str] | set[str] | None,
    prefix: TokenSeq,
    sentence_id: int = 0,
    step_index: int = 0,
) -> list[TokenSeq]:
    """Extend a source prefix by up to k predicted tokens, n times.

    Every returned sequence starts with the prefix exactly. An extension
    stops early if the LM produces EOS, so it may gain fewer than k
    tokens. Samples are independent draws and may repeat.
    """
    if not prefix:
        raise ValueError("prefix must be non-empty")
    if cfg.strategy in ("lm_sample", "lm_greedy") and lm is None:
        raise MissingLM(f"strategy {cfg.strategy} requires a language model")

    if cfg.strategy == "unknown":
        return [tuple(prefix) + (UNK,) * cfg.k]

    if cfg.strategy == "lm_greedy":
        assert lm is not None
        seq = list(prefix)
        for _ in range(cfg.k):
            token = lm.argmax(tuple(seq[-(lm.order - 1) :]) if lm.order > 1 else ())
            if token == EOS:
                break
            seq.append(token)
        return [tuple(seq)]

    if cfg.strategy == "random":
        if not vocab:
            raise PredictorError("random strategy requires a vocabulary")
        pool = sorted(vocab)
        out = []
        for s in range(cfg.n):
            rng = random.Random(mix64(cfg.seed, sentence_id, step_index, s))
            seq = tuple(prefix) + tuple(
                pool[rng.randrange(len(pool))] for _ in range(cfg.k)
            )
            out.append(seq)
        return out

    # lm_sample
    assert lm is not None
    out = []
    for s in range(cfg.n):
        rng = random.Random(mix64(cfg.seed, sentence_id, step_index, s))
        seq = list(prefix)
        for _ in range(cfg.k):
            ctx = tuple(seq[-(lm.order - 1) :]) if lm.order > 1 else ()
            token = lm.sample(ctx, rng)
            if token == EOS:
                break
            seq.append(token)
        out.append(tuple(seq))
    return out

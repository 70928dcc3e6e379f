"""Translation models used by the retranslation simulator.

Two concrete translators share one small interface (``translate``):

* ``ScriptedTranslator``: exact source-prefix lookup, for regression tests
  and walkthroughs of known translation sessions.
* ``ToyLexicalTranslator``: a deterministic lexical beam-search decoder
  whose step distribution supports output biasing. A seeded hash
  perturbation ("instability") makes translations of a prefix change as
  the prefix grows, which is the flicker mechanism the masking strategies
  are designed to contain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .core import TokenSeq, check_tokens, tokenize

EOS = "</s>"
UNK = "⟨unk⟩"  # ⟨unk⟩: reserved, never produced by whitespace corpora

_MASK64 = (1 << 64) - 1
_FNV_BASIS = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_GOLDEN = 0x9E3779B97F4A7C15
_MIN_PROB = 1e-300  # floor for log() when biasing zeroes a candidate out

_FINAL_PUNCT = (".", "?", "!")


class TranslatorError(Exception):
    """Base class for translator failures."""


class UnknownSourceToken(TranslatorError):
    """A source token has no lexicon entry; corpus and lexicon disagree."""


class ScriptMiss(TranslatorError):
    """A source prefix is not in the script and fallback is disabled."""


class ParseError(ValueError):
    """A model file failed to parse; message carries the line number."""


class DuplicatePrefix(ParseError):
    """The same source prefix appears twice in a script file."""


class NonNormalizedLexicon(ParseError):
    """Per-source-token target probabilities do not sum to 1."""


@dataclass(frozen=True)
class BiasSpec:
    """Bias decoding towards a previous output with interpolation weight beta."""

    previous_output: TokenSeq
    beta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")


@dataclass(frozen=True)
class Translation:
    tokens: TokenSeq
    score: float  # accumulated log-probability; scripted lookups report 0


# ---------------------------------------------------------------------------
# Instability hash
# ---------------------------------------------------------------------------
#
# The perturbation applied to candidate scores is part of the external
# contract so traces are reproducible. It is defined as:
#
#   blob(seq)     = UTF-8 bytes of the tokens joined by 0x1F
#   avalanche(x)  = the splitmix64 finalizer
#   P             = fnv1a64(blob(source_prefix), init=avalanche(seed))
#   C             = fnv1a64(UTF-8(candidate_token), init=FNV_BASIS)
#   h             = avalanche(P xor avalanche((C + target_len * GOLDEN) mod 2^64))
#   u             = 2 * h / (2^64 - 1) - 1          (uniform in [-1, 1])
#
# where GOLDEN = 0x9E3779B97F4A7C15 and fnv1a64 is standard FNV-1a.


def _avalanche(x: int) -> int:
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def _fnv1a64(data: bytes, init: int = _FNV_BASIS) -> int:
    h = init
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _prefix_state(seed: int, source: TokenSeq) -> int:
    blob = "\x1f".join(source).encode("utf-8")
    return _fnv1a64(blob, init=_avalanche(seed & _MASK64))


def _token_state(token: str) -> int:
    return _fnv1a64(token.encode("utf-8"))


def instability_noise(seed: int, source: TokenSeq, target_len: int, token: str) -> float:
    """Deterministic noise in [-1, 1] for one candidate at one decode step."""
    p = _prefix_state(seed, source)
    c = _token_state(token)
    h = _avalanche(p ^ _avalanche((c + target_len * _GOLDEN) & _MASK64))
    return 2.0 * (h / _MASK64) - 1.0


def mix64(*values: int) -> int:
    """Fold integers into one 64-bit value; used to derive RNG streams."""
    h = _FNV_BASIS
    for v in values:
        h = _avalanche(h ^ _avalanche(v & _MASK64))
    return h


# ---------------------------------------------------------------------------
# Scripted translator
# ---------------------------------------------------------------------------


class ScriptedTranslator:
    """Maps exact source prefixes (joined by single spaces) to translations.

    With identity_fallback enabled, unknown prefixes translate to a copy of
    the source tokens, so a partial script can drive a long corpus.
    """

    def __init__(self, script: dict[str, TokenSeq], identity_fallback: bool = False):
        self.script = dict(script)
        self.identity_fallback = identity_fallback

    def translate(
        self,
        source: TokenSeq,
        bias: BiasSpec | None = None,
        source_is_final: bool = False,
    ) -> Translation:
        if not source:
            raise ValueError("source must be non-empty")
        hit = self.script.get(" ".join(source))
        if hit is not None:
            return Translation(hit, 0.0)
        if self.identity_fallback:
            return Translation(tuple(source), 0.0)
        raise ScriptMiss(f"no script entry for prefix {' '.join(source)!r}")


def load_script(path: str | Path, identity_fallback: bool = False) -> ScriptedTranslator:
    """Parse a tab-separated "source prefix<TAB>translation" file."""
    script: dict[str, TokenSeq] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ParseError(f"{path}:{lineno}: expected 'prefix<TAB>translation'")
            prefix, translation = line.split("\t", 1)
            key = " ".join(prefix.split())
            if not key:
                raise ParseError(f"{path}:{lineno}: empty source prefix")
            if key in script:
                raise DuplicatePrefix(f"{path}:{lineno}: duplicate prefix {key!r}")
            script[key] = tokenize(translation)
    return ScriptedTranslator(script, identity_fallback=identity_fallback)


# ---------------------------------------------------------------------------
# Toy lexical translator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToyModelConfig:
    """Configuration of the toy lexical decoder.

    lexicon maps each source token to its target options, probabilities
    summing to 1. distortion in (0, 1] penalizes out-of-order consumption
    of source positions; instability >= 0 scales the hash perturbation
    (0 removes it entirely). End-of-sentence becomes available once all
    source positions are consumed or the output reaches
    max_len_ratio * len(source) tokens.
    """

    lexicon: dict[str, tuple[tuple[str, float], ...]]
    beam_size: int = 4
    distortion: float = 0.7
    instability: float = 0.0
    eos_prob_final: float = 0.9
    eos_prob_nonfinal: float = 0.2
    max_len_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if not 0.0 < self.distortion <= 1.0:
            raise ValueError("distortion must be in (0, 1]")
        if self.instability < 0.0:
            raise ValueError("instability must be >= 0")
        for name in ("eos_prob_final", "eos_prob_nonfinal"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ValueError(f"{name} must be in (0, 1)")
        if self.max_len_ratio <= 0.0:
            raise ValueError("max_len_ratio must be > 0")
        for src, entries in self.lexicon.items():
            if not entries:
                raise NonNormalizedLexicon(f"source token {src!r} has no entries")
            total = 0.0
            for tgt, p in entries:
                if not 0.0 < p <= 1.0:
                    raise NonNormalizedLexicon(
                        f"probability {p} for {src!r} -> {tgt!r} outside (0, 1]"
                    )
                total += p
            if abs(total - 1.0) > 1e-9:
                raise NonNormalizedLexicon(
                    f"probabilities for {src!r} sum to {total}, expected 1"
                )


@dataclass(frozen=True)
class DecoderState:
    """Beam-search bookkeeping: emitted targets and consumed source positions."""

    target_so_far: TokenSeq
    coverage: int  # bitmask over source positions
    accumulated_logprob: float = 0.0

    def __post_init__(self) -> None:
        if bin(self.coverage).count("1") != len(self.target_so_far):
            raise ValueError("coverage must have one set bit per emitted target token")


@dataclass(frozen=True)
class StepCandidate:
    token: str  # EOS marks end-of-sentence
    probability: float
    source_position: int | None  # position consumed; None for EOS


def _entries_for(lexicon: dict[str, tuple[tuple[str, float], ...]], token: str):
    entries = lexicon.get(token)
    if entries is None:
        if token == UNK:
            return ((UNK, 1.0),)
        raise UnknownSourceToken(f"source token {token!r} not in lexicon")
    return entries


def _raw_step_weights(
    cfg: ToyModelConfig,
    entries: list[tuple[tuple[str, float], ...]],
    source: TokenSeq,
    coverage: int,
    highest_covered: int,
    target_len: int,
    eos_weight: float,
    noise: "_NoiseTable | None",
) -> list[tuple[float, str, int | None]]:
    """Unnormalized candidate weights for one decode step.

    Candidates are the lexicon entries of every uncovered source position,
    each weighted lex_prob * distortion^|pos - expected| * exp(instability *
    noise), plus EOS when coverage is complete or the length gate is open.
    """
    n = len(source)
    expected = highest_covered + 1
    weights: list[tuple[float, str, int | None]] = []
    for j in range(n):
        if coverage >> j & 1:
            continue
        pen = cfg.distortion ** abs(j - expected)
        for tgt, p in entries[j]:
            w = p * pen
            if noise is not None:
                w *= noise.factor(target_len, tgt)
            weights.append((w, tgt, j))
    full = (1 << n) - 1
    if coverage == full or target_len >= cfg.max_len_ratio * n:
        weights.append((eos_weight, EOS, None))
    return weights


class _NoiseTable:
    """Per-call cache of exp(instability * noise) factors."""

    def __init__(self, cfg: ToyModelConfig, source: TokenSeq, token_states: dict[str, int]):
        self._lam = cfg.instability
        self._prefix = _prefix_state(cfg.seed, source)
        self._token_states = token_states
        self._factors: dict[tuple[int, str], float] = {}

    def factor(self, target_len: int, token: str) -> float:
        key = (target_len, token)
        f = self._factors.get(key)
        if f is None:
            c = self._token_states.get(token)
            if c is None:
                c = self._token_states[token] = _token_state(token)
            h = _avalanche(self._prefix ^ _avalanche((c + target_len * _GOLDEN) & _MASK64))
            u = 2.0 * (h / _MASK64) - 1.0
            f = self._factors[key] = math.exp(self._lam * u)
        return f


def _eos_weight(cfg: ToyModelConfig, source: TokenSeq, source_is_final: bool) -> float:
    if source_is_final or source[-1].endswith(_FINAL_PUNCT):
        return cfg.eos_prob_final
    return cfg.eos_prob_nonfinal


class ToyLexicalTranslator:
    """Beam-search decoder over a probabilistic word lexicon.

    Pure function of (config, source, bias, finality flag); holds no
    mutable decoding state, so concurrent translate calls are safe.
    """

    def __init__(self, config: ToyModelConfig):
        self.config = config
        # grow-only cache of per-token hash states; worst case under races
        # is recomputation of an identical value
        self._token_states: dict[str, int] = {}

    def step_distribution(
        self,
        state: DecoderState,
        source: TokenSeq,
        source_is_final_sentence: bool = False,
    ) -> list[StepCandidate]:
        """Normalized next-token distribution for one decoder state."""
        cfg = self.config
        entries = [_entries_for(cfg.lexicon, tok) for tok in source]
        noise = (
            _NoiseTable(cfg, source, self._token_states) if cfg.instability > 0 else None
        )
        highest = max((j for j in range(len(source)) if state.coverage >> j & 1), default=-1)
        weights = _raw_step_weights(
            cfg,
            entries,
            source,
            state.coverage,
            highest,
            len(state.target_so_far),
            _eos_weight(cfg, source, source_is_final_sentence),
            noise,
        )
        total = sum(w for w, _, _ in weights)
        return [StepCandidate(tok, w / total, pos) for w, tok, pos in weights]

    def translate(
        self,
        source: TokenSeq,
        bias: BiasSpec | None = None,
        source_is_final: bool = False,
    ) -> Translation:
        if not source:
            raise ValueError("source must be non-empty")
        cfg = self.config
        n = len(source)
        entries = [_entries_for(cfg.lexicon, tok) for tok in source]
        noise = (
            _NoiseTable(cfg, source, self._token_states) if cfg.instability > 0 else None
        )
        eos_w = _eos_weight(cfg, source, source_is_final)

        prev = bias.previous_output if bias is not None else ()
        beta = bias.beta if bias is not None else 0.0
        biasing = beta > 0.0 and len(prev) > 0

        # hypothesis: (score, tokens, coverage, highest_covered, diverged, done)
        beam: list[tuple[float, TokenSeq, int, int, bool, bool]] = [
            (0.0, (), 0, -1, False, False)
        ]
        log = math.log
        for _ in range(n + 1):
            if all(done for *_, done in beam):
                break
            pool: list[tuple[float, TokenSeq, int, int, bool, bool]] = []
            for score, tokens, cov, highest, diverged, done in beam:
                if done:
                    pool.append((score, tokens, cov, highest, diverged, True))
                    continue
                m = len(tokens)
                weights = _raw_step_weights(
                    cfg, entries, source, cov, highest, m, eos_w, noise
                )
                total = sum(w for w, _, _ in weights)
                for w, tok, pos in weights:
                    p = w / total
                    child_diverged = diverged
                    if biasing and not diverged and m < len(prev):
                        if tok == prev[m]:
                            p = (1.0 - beta) * p + beta
                        else:
                            p = (1.0 - beta) * p
                            child_diverged = True
                    if p < _MIN_PROB:
                        p = _MIN_PROB
                    if tok == EOS:
                        pool.append((score + log(p), tokens, cov, highest, diverged, True))
                    else:
                        pool.append(
                            (
                                score + log(p),
                                tokens + (tok,),
                                cov | (1 << pos),
                                highest if highest > pos else pos,
                                child_diverged,
                                False,
                            )
                        )
            # stable sort keeps earlier (monotone-first) expansions ahead on ties
            pool.sort(key=lambda h: -h[0])
            beam = pool[: cfg.beam_size]

        for score, tokens, *_rest, done in beam:
            if done:
                return Translation(tokens, score)
        raise TranslatorError("beam search ended with no complete hypothesis")


class CachingTranslator:
    """Memoizes translate calls; valid because translators are pure."""

    def __init__(self, inner):
        self.inner = inner
        self._cache: dict[tuple, Translation] = {}

    def translate(
        self,
        source: TokenSeq,
        bias: BiasSpec | None = None,
        source_is_final: bool = False,
    ) -> Translation:
        bias_key = None
        if bias is not None and bias.beta > 0.0 and bias.previous_output:
            bias_key = (bias.previous_output, bias.beta)
        key = (source, source_is_final, bias_key)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self.inner.translate(
                source, bias=bias, source_is_final=source_is_final
            )
        return hit


def load_lexicon(path: str | Path, **params) -> ToyModelConfig:
    """Parse a "src ||| tgt ||| prob" lexicon file into a ToyModelConfig.

    '#' starts a comment; blank lines are skipped. Remaining keyword
    arguments become ToyModelConfig fields (beam_size, distortion, ...).
    """
    raw: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split("|||")]
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 'src ||| tgt ||| prob'")
            src, tgt, prob_text = parts
            if not src or not tgt:
                raise ParseError(f"{path}:{lineno}: empty source or target token")
            check_tokens((src, tgt), where=f"{path}:{lineno}")
            try:
                prob = float(prob_text)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad probability {prob_text!r}") from None
            raw.setdefault(src, []).append((tgt, prob))
    lexicon = {src: tuple(entries) for src, entries in raw.items()}
    return ToyModelConfig(lexicon=lexicon, **params)

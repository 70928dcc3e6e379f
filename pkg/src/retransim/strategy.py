"""Emission policies: what part of a translation hypothesis gets displayed.

Four policies are provided. ``none`` shows every hypothesis unchanged.
``mask_k`` withholds a fixed number of trailing tokens. ``dynamic`` masks
back to the longest common prefix of the hypothesis and the translations
of probe extensions, with a freeze rule that re-displays the previous
output instead of shrinking. ``oracle`` masks against the known
full-sentence translation and never flickers.

Full sentences are always transmitted unmasked, whatever the policy.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import TokenSeq, is_prefix, longest_common_prefix
from .predict import PredictorConfig

KINDS = ("none", "mask_k", "dynamic", "oracle")


@dataclass
class EmissionState:
    """Per-sentence strategy state: the output currently on display."""

    sentence_id: int
    step_index: int = 0
    previous_output: TokenSeq = ()


@dataclass(frozen=True)
class StrategyConfig:
    """Which emission policy to run and its parameters.

    bias_beta > 0 turns on biased decoding towards the previously
    displayed output; it applies to none/mask_k/dynamic. The oracle
    needs no bias: its hypotheses are compared against the full-sentence
    translation directly.
    """

    kind: str
    k_mask: int = 0
    predictor: PredictorConfig | None = None
    bias_beta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}, expected one of {KINDS}")
        if self.k_mask < 0:
            raise ValueError("k_mask must be >= 0")
        if not 0.0 <= self.bias_beta <= 1.0:
            raise ValueError("bias_beta must be in [0, 1]")
        if self.kind == "dynamic" and self.predictor is None:
            raise ValueError("dynamic strategy requires a predictor")
        if self.kind == "oracle" and self.bias_beta > 0.0:
            raise ValueError("oracle does not combine with biased decoding")

    @property
    def label(self) -> str:
        if self.kind == "none":
            base = "none"
        elif self.kind == "mask_k":
            base = f"mask_k={self.k_mask}"
        elif self.kind == "oracle":
            base = "oracle"
        else:
            assert self.predictor is not None
            base = f"dynamic:{self.predictor.label}"
        if self.bias_beta > 0.0:
            base += f",beta={self.bias_beta:g}"
        return base


def emit_none(hypothesis: TokenSeq) -> TokenSeq:
    """Plain retranslation: display the hypothesis as-is."""
    return hypothesis


def emit_mask_k(hypothesis: TokenSeq, k: int, is_final: bool) -> TokenSeq:
    """Withhold the last k tokens; full sentences pass through unmasked."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if is_final or k == 0:
        return hypothesis
    return hypothesis[: max(len(hypothesis) - k, 0)]


def emit_dynamic(
    hypothesis: TokenSeq,
    probe_translations: list[TokenSeq] | tuple[TokenSeq, ...],
    state: EmissionState,
    is_final: bool,
) -> tuple[TokenSeq, int]:
    """Mask back to the common prefix of the hypothesis and all probes.

    The candidate output is the simultaneous longest common prefix of the
    hypothesis and every probe translation. If that candidate is a prefix
    of what is already displayed, the display is frozen (the previous
    output is emitted again) rather than shrunk. Returns the output and
    the mask length |hypothesis| - |LCP(hypothesis, output)|.
    """
    if is_final:
        return hypothesis, 0
    if not probe_translations:
        raise ValueError("dynamic masking needs at least one probe on non-final steps")
    agreed = hypothesis
    for probe in probe_translations:
        agreed = longest_common_prefix(agreed, probe)
    if is_prefix(agreed, state.previous_output):
        output = state.previous_output
    else:
        output = agreed
    mask = len(hypothesis) - len(longest_common_prefix(hypothesis, output))
    return output, mask


def emit_oracle(
    hypothesis: TokenSeq,
    full_sentence_translation: TokenSeq,
    is_final: bool,
    previous_output: TokenSeq = (),
) -> TokenSeq:
    """Mask against the known full-sentence translation.

    Emits the agreement between the hypothesis and the final translation,
    but never less than what is already displayed: previous_output is by
    construction a prefix of the full translation, so the display only
    ever grows towards it and the session cannot flicker.
    """
    if is_final:
        return full_sentence_translation
    agreed = longest_common_prefix(hypothesis, full_sentence_translation)
    if len(previous_output) > len(agreed):
        return previous_output
    return agreed

from __future__ import annotations

import pytest

from retransim.core import SentencePair, tokenize
from retransim.translator import ToyLexicalTranslator, ToyModelConfig


def seq(text: str) -> tuple[str, ...]:
    """Shorthand: whitespace-split a string into a token tuple."""
    return tokenize(text)


def pairs_from(src_lines: list[str], ref_lines: list[str]) -> list[SentencePair]:
    return [
        SentencePair(source=seq(s), reference=seq(r), sentence_id=i)
        for i, (s, r) in enumerate(zip(src_lines, ref_lines))
    ]


def write_corpus(tmp_path, src_lines: list[str], ref_lines: list[str]):
    src = tmp_path / "corpus.src"
    ref = tmp_path / "corpus.ref"
    src.write_text("\n".join(src_lines) + "\n", encoding="utf-8")
    ref.write_text("\n".join(ref_lines) + "\n", encoding="utf-8")
    return src, ref


ONE_TO_ONE_LEXICON = {
    "a": (("x", 1.0),),
    "b": (("y", 1.0),),
    "c": (("z", 1.0),),
    "d": (("w", 1.0),),
    "e": (("v", 1.0),),
}


@pytest.fixture
def stable_translator() -> ToyLexicalTranslator:
    """Prefix-stable toy model: 1-to-1 lexicon, no noise, no distortion cost."""
    return ToyLexicalTranslator(
        ToyModelConfig(lexicon=ONE_TO_ONE_LEXICON, distortion=1.0, instability=0.0)
    )

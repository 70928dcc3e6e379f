#!/usr/bin/env python3
"""Fixed output masking and the latency / flicker axes.

A retranslation system re-translates the growing source prefix on every
update. Displaying each hypothesis in full minimizes latency but rewrites
already-shown words whenever the translation changes ("flicker").
Withholding the last k tokens trades latency for stability. This demo
runs both on a tiny unstable toy translator and prints the sessions.
"""

from retransim import (
    RunConfig,
    SentencePair,
    StrategyConfig,
    ToyLexicalTranslator,
    ToyModelConfig,
    average_lag,
    normalized_erasure,
    run_sentence,
)
from retransim.sim import Models

# a three-word lexicon; "day" has a competing translation, and the noise
# knob (instability) re-rolls candidate scores every time the prefix grows
LEXICON = {
    "good": (("gut", 1.0),),
    "day": (("Tag", 0.6), ("Tagung", 0.4)),
    "today": (("heute", 1.0),),
    ".": ((".", 1.0),),
}

MODEL = ToyModelConfig(
    lexicon=LEXICON,
    beam_size=2,
    distortion=0.5,
    instability=1.2,
    seed=7,
)

SENTENCE = SentencePair(
    source=("good", "day", "today", "."),
    reference=("gut", "Tag", "heute", "."),
    sentence_id=0,
)


def show_session(title: str, strategy: StrategyConfig) -> None:
    cfg = RunConfig(
        source_path="(in-memory)",
        reference_path="(in-memory)",
        translator={"kind": "toy"},
        strategy=strategy,
    )
    models = Models(translator=ToyLexicalTranslator(MODEL))
    trace = run_sentence(cfg, SENTENCE, models)
    print(f"\n=== {title} ===")
    print(f"{'step':<5} {'source so far':<22} {'hypothesis':<26} displayed")
    for rec in trace.records:
        print(
            f"{rec.step_index:<5} {' '.join(rec.source_prefix):<22} "
            f"{' '.join(rec.raw_hypothesis):<26} {' '.join(rec.emitted_output)}"
        )
    print(
        f"average lag = {average_lag(trace):.3f} source tokens, "
        f"normalized erasure = {normalized_erasure(trace):.3f}"
    )


def main() -> None:
    # plain retranslation: everything is shown at once, rewrites included
    show_session("no mask (plain retranslation)", StrategyConfig("none"))

    # withholding the last tokens hides most rewrites but delays the output
    for k in (1, 2):
        show_session(f"mask-{k}", StrategyConfig("mask_k", k_mask=k))

    print(
        "\nLarger masks push erasure toward zero while average lag grows;"
        "\nthe full sweep over a corpus is demo 04."
    )


if __name__ == "__main__":
    main()

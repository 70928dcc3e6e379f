from __future__ import annotations

import dataclasses
import json

import pytest

from retransim.core import CorpusLengthMismatch
from retransim.metrics import aggregate, normalized_erasure
from retransim.predict import PredictorConfig, save_lm, train_lm
from retransim.sim import (
    ConfigError,
    Models,
    RunConfig,
    SchemaVersionMismatch,
    TraceInvariantError,
    config_hash,
    load_models,
    load_run_config,
    read_traces,
    run_corpus,
    run_sentence,
    save_run_config,
    trace_from_dict,
    trace_to_dict,
    validate_trace,
    write_traces,
)
from retransim.strategy import StrategyConfig
from retransim.translator import ScriptedTranslator
from conftest import ONE_TO_ONE_LEXICON, pairs_from, seq, write_corpus

UNSTABLE_TAIL_SCRIPT = {
    "a": seq("p"),
    "a ⟨unk⟩": seq("p"),
    "a b": seq("p q r"),
    "a b ⟨unk⟩": seq("p q s t"),
    "a b c": seq("p q s t"),
}


def toy_spec(tmp_path, lexicon: dict, **params) -> dict:
    lines = ["# src ||| tgt ||| prob"]
    for src, entries in lexicon.items():
        for tgt, prob in entries:
            lines.append(f"{src} ||| {tgt} ||| {prob}")
    path = tmp_path / "toy.lexicon"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    spec = {"kind": "toy", "lexicon_path": str(path)}
    spec.update(params)
    return spec


def stable_run_config(tmp_path, strategy: StrategyConfig, src_lines, ref_lines) -> RunConfig:
    src, ref = write_corpus(tmp_path, src_lines, ref_lines)
    return RunConfig(
        source_path=str(src),
        reference_path=str(ref),
        translator=toy_spec(tmp_path, ONE_TO_ONE_LEXICON, distortion=1.0, instability=0.0),
        strategy=strategy,
    )


def test_single_token_sentence(tmp_path):
    cfg = stable_run_config(tmp_path, StrategyConfig("none"), ["a"], ["x"])
    traces, point = run_corpus(cfg)
    trace = traces[0]
    assert len(trace.records) == 1
    rec = trace.records[0]
    assert rec.is_final
    assert rec.probes == ()
    assert trace.final_output == ("x",)
    assert normalized_erasure(trace) == 0.0
    assert point.n_sentences == 1


def test_scripted_session_with_unknown_probe(tmp_path):
    src, ref = write_corpus(tmp_path, ["a b c"], ["p q s t"])
    cfg = RunConfig(
        source_path=str(src),
        reference_path=str(ref),
        translator={"kind": "scripted", "script_path": "unused"},
        strategy=StrategyConfig(
            "dynamic", predictor=PredictorConfig(strategy="unknown", k=1)
        ),
    )
    models = Models(translator=ScriptedTranslator(UNSTABLE_TAIL_SCRIPT))
    trace = run_sentence(cfg, pairs_from(["a b c"], ["p q s t"])[0], models)
    outputs = [rec.emitted_output for rec in trace.records]
    assert outputs[0] == ("p",)
    assert outputs[1] == ("p", "q")  # masked back to the stable prefix
    assert outputs[2] == ("p", "q", "s", "t")
    assert trace.records[1].mask_length == 1
    assert trace.records[1].probes == (("p", "q", "s", "t"),)
    assert trace.records[1].n_translate_calls == 2
    validate_trace(trace, cfg.strategy)
    assert normalized_erasure(trace) == 0.0


def test_scripted_session_progressive_stability():
    # the translator is unstable on short prefixes; probing one token ahead
    # detects it and the display advances one stable word at a time
    from pathlib import Path

    from retransim.translator import load_script

    script = Path(__file__).parent / "data" / "progressive_stability.tsv"
    cfg = RunConfig(
        source_path="unused",
        reference_path="unused",
        translator={"kind": "scripted", "script_path": str(script)},
        strategy=StrategyConfig(
            "dynamic", predictor=PredictorConfig(strategy="unknown", k=1)
        ),
    )
    models = Models(translator=load_script(script))
    pair = pairs_from(["Here are two patients ."], ["Hier sind zwei Patienten ."])[0]
    trace = run_sentence(cfg, pair, models)
    outputs = [" ".join(rec.emitted_output) for rec in trace.records]
    assert outputs == [
        "Hier",
        "Hier sind",
        "Hier sind zwei",
        "Hier sind zwei Patienten",
        "Hier sind zwei Patienten .",
    ]
    validate_trace(trace, cfg.strategy)
    assert normalized_erasure(trace) == 0.0


def _noisy_corpus_config(tmp_path, strategy: StrategyConfig, **overrides) -> RunConfig:
    lexicon = {
        "a": (("x", 0.7), ("x2", 0.3)),
        "b": (("y", 1.0),),
        "c": (("z", 0.65), ("z2", 0.35)),
        "d": (("w", 1.0),),
    }
    src_lines = ["a b c", "c d a b", "b a", "d c b a d", "a", "b c d a c"]
    ref_lines = ["x y z", "z w x y", "y x", "w z y x w", "x", "y z w x z"]
    src, ref = write_corpus(tmp_path, src_lines, ref_lines)
    base = dict(
        source_path=str(src),
        reference_path=str(ref),
        translator=toy_spec(
            tmp_path, lexicon, distortion=0.5, instability=0.8, seed=11, beam_size=2
        ),
        strategy=strategy,
    )
    base.update(overrides)
    return RunConfig(**base)


def test_determinism_and_parallelism_independence(tmp_path):
    cfg = _noisy_corpus_config(
        tmp_path, StrategyConfig("dynamic", predictor=PredictorConfig("random", k=2, n=2)),
        seed=3,
    )
    t1, p1 = run_corpus(cfg)
    t2, p2 = run_corpus(cfg)
    t8, p8 = run_corpus(dataclasses.replace(cfg, parallelism=8))
    assert t1 == t2 == t8
    assert p1 == p2 == p8

    f1, f8 = tmp_path / "par1.jsonl", tmp_path / "par8.jsonl"
    write_traces(f1, t1, cfg)
    write_traces(f8, t8, dataclasses.replace(cfg, parallelism=8))
    assert f1.read_bytes() == f8.read_bytes()


def test_trace_round_trip_and_replay_equality(tmp_path):
    cfg = _noisy_corpus_config(tmp_path, StrategyConfig("mask_k", k_mask=2))
    traces, point = run_corpus(cfg)
    path = tmp_path / "traces.jsonl"
    write_traces(path, traces, cfg)
    header, loaded = read_traces(path)
    assert header is not None
    assert header["config_hash"] == config_hash(cfg)
    assert loaded == traces
    replayed = aggregate(cfg.strategy.label, loaded, ne_mode=cfg.ne_mode)
    assert replayed == point  # bit-identical floats


def test_trace_dict_round_trip(tmp_path):
    cfg = _noisy_corpus_config(tmp_path, StrategyConfig("none"))
    traces, _ = run_corpus(cfg)
    for trace in traces:
        assert trace_from_dict(trace_to_dict(trace)) == trace


def test_schema_version_mismatch(tmp_path):
    cfg = _noisy_corpus_config(tmp_path, StrategyConfig("none"))
    traces, _ = run_corpus(cfg)
    payload = trace_to_dict(traces[0])
    payload["schema_version"] = 999
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(payload) + "\n", encoding="utf-8")
    with pytest.raises(SchemaVersionMismatch):
        read_traces(path)


def test_validate_trace_catches_corruption(tmp_path):
    cfg = _noisy_corpus_config(tmp_path, StrategyConfig("mask_k", k_mask=1))
    traces, _ = run_corpus(cfg)
    good = traces[1]
    validate_trace(good, cfg.strategy)

    bad_mask = dataclasses.replace(good.records[0], mask_length=99)
    with pytest.raises(TraceInvariantError):
        validate_trace(
            dataclasses.replace(good, records=(bad_mask,) + good.records[1:]),
            cfg.strategy,
        )
    with pytest.raises(TraceInvariantError):
        validate_trace(dataclasses.replace(good, records=good.records[:-1]))
    with pytest.raises(TraceInvariantError):
        validate_trace(dataclasses.replace(good, final_output=("wrong",)))


def test_every_strategy_produces_valid_traces(tmp_path):
    lm = train_lm([seq("a b c"), seq("c d a b"), seq("b a")], order=2)
    lm_path = tmp_path / "lm.json"
    save_lm(lm, lm_path)
    strategies = [
        StrategyConfig("none"),
        StrategyConfig("none", bias_beta=0.5),
        StrategyConfig("mask_k", k_mask=2),
        StrategyConfig("mask_k", k_mask=2, bias_beta=0.8),
        StrategyConfig("oracle"),
        StrategyConfig("dynamic", predictor=PredictorConfig("unknown", k=1)),
        StrategyConfig("dynamic", predictor=PredictorConfig("lm_greedy", k=2)),
        StrategyConfig("dynamic", predictor=PredictorConfig("lm_sample", k=2, n=3)),
        StrategyConfig("dynamic", predictor=PredictorConfig("random", k=3, n=2)),
        StrategyConfig(
            "dynamic", predictor=PredictorConfig("lm_sample", k=1, n=2), bias_beta=0.6
        ),
    ]
    for strategy in strategies:
        cfg = _noisy_corpus_config(tmp_path, strategy, lm_path=str(lm_path))
        traces, point = run_corpus(cfg)
        for trace in traces:
            validate_trace(trace, strategy)
        assert point.n_sentences == len(traces) == 6


def test_oracle_zero_erasure_on_noisy_corpus(tmp_path):
    cfg = _noisy_corpus_config(tmp_path, StrategyConfig("oracle"))
    traces, point = run_corpus(cfg)
    for trace in traces:
        assert normalized_erasure(trace) == 0.0
        validate_trace(trace, cfg.strategy)
    assert point.ne == 0.0


def test_prefix_stable_translator_never_erases(tmp_path):
    src_lines = ["a b c d", "b b a", "e d c b a", "c"]
    ref_lines = ["x y z w", "y y x", "v w z y x", "z"]
    lm = train_lm([seq(s) for s in src_lines], order=2)
    lm_path = tmp_path / "lm.json"
    save_lm(lm, lm_path)
    predictors = [
        PredictorConfig("unknown", k=2),
        PredictorConfig("lm_greedy", k=2),
        PredictorConfig("lm_sample", k=2, n=3),
        PredictorConfig("random", k=2, n=3),
    ]
    cfg0 = stable_run_config(tmp_path, StrategyConfig("none"), src_lines, ref_lines)
    cfg0 = dataclasses.replace(cfg0, lm_path=str(lm_path))
    traces, point = run_corpus(cfg0)
    assert point.ne == 0.0
    for pred in predictors:
        cfg = dataclasses.replace(
            cfg0, strategy=StrategyConfig("dynamic", predictor=pred)
        )
        traces, point = run_corpus(cfg)
        assert point.ne == 0.0, pred.strategy
        for trace in traces:
            outputs = [rec.emitted_output for rec in trace.records]
            for a, b in zip(outputs, outputs[1:]):
                assert a == b[: len(a)]  # monotone growth


def test_char_mode_runs_character_level(tmp_path):
    src, ref = write_corpus(tmp_path, ["ab"], ["xy"])
    lexicon = {"a": (("x", 1.0),), "b": (("y", 1.0),)}
    cfg = RunConfig(
        source_path=str(src),
        reference_path=str(ref),
        translator=toy_spec(tmp_path, lexicon, distortion=1.0, instability=0.0),
        strategy=StrategyConfig("none"),
        char_mode=True,
    )
    traces, point = run_corpus(cfg)
    assert len(traces[0].records) == 2  # one step per character
    assert traces[0].final_output == ("x", "y")
    assert point.bleu == 100.0


def test_corpus_length_mismatch(tmp_path):
    src, _ = write_corpus(tmp_path, ["a", "b"], ["x", "y"])
    short_ref = tmp_path / "short.ref"
    short_ref.write_text("x\n", encoding="utf-8")
    cfg = RunConfig(
        source_path=str(src),
        reference_path=str(short_ref),
        translator=toy_spec(tmp_path, ONE_TO_ONE_LEXICON),
        strategy=StrategyConfig("none"),
    )
    with pytest.raises(CorpusLengthMismatch):
        run_corpus(cfg)


def test_run_config_round_trip(tmp_path):
    cfg = _noisy_corpus_config(
        tmp_path,
        StrategyConfig(
            "dynamic", predictor=PredictorConfig("lm_sample", k=2, n=3, seed=4), bias_beta=0.5
        ),
        seed=9,
        char_mode=False,
        ne_mode="corpus",
    )
    assert RunConfig.from_dict(cfg.to_dict()) == dataclasses.replace(cfg, parallelism=1)
    path = tmp_path / "run.json"
    save_run_config(cfg, path)
    loaded = load_run_config(path, parallelism=4)
    assert loaded == dataclasses.replace(cfg, parallelism=4)
    # parallelism stays out of the persisted form and the hash
    assert "parallelism" not in json.loads(path.read_text())
    assert config_hash(loaded) == config_hash(cfg)


def test_load_run_config_line_anchored_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "source_path": [oops\n}\n', encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        load_run_config(path)
    assert ":2:" in str(err.value)


def test_load_models_validates_lm_requirement(tmp_path):
    from retransim.predict import MissingLM

    cfg = _noisy_corpus_config(
        tmp_path, StrategyConfig("dynamic", predictor=PredictorConfig("lm_greedy"))
    )
    with pytest.raises(MissingLM):
        load_models(cfg)


def test_bias_changes_decoding_on_unstable_model(tmp_path):
    # with strong bias the retranslations stick to the previous output more
    # often, so erasure cannot grow
    base = _noisy_corpus_config(tmp_path, StrategyConfig("none"), seed=2)
    _, plain = run_corpus(base)
    biased_cfg = dataclasses.replace(base, strategy=StrategyConfig("none", bias_beta=0.9))
    traces, biased = run_corpus(biased_cfg)
    assert biased.ne <= plain.ne
    for trace in traces:
        validate_trace(trace, biased_cfg.strategy)

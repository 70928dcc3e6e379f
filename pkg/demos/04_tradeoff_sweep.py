#!/usr/bin/env python3
"""The latency / flicker trade-off: fixed masks vs dynamic masking.

Sweeps mask-k over k = 1..10 and three dynamic-masking configurations on
the pinned synthetic corpus, prints the trade-off table, marks the
(AL, NE) Pareto frontier, and shows the mask-length histogram of the
lowest-latency dynamic run. Output CSVs land in demos/output/.
"""

import statistics
from pathlib import Path

from retransim import PredictorConfig, RunConfig, StrategyConfig, save_lm, train_lm
from retransim.cli import SweepSpec, mask_histogram, pareto_frontier, run_sweep, write_points_csv
from retransim.core import tokenize
from retransim.synthetic import write_synthetic, toy_translator_spec

OUT = Path(__file__).parent / "output"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    paths = write_synthetic(OUT / "data")

    # probe predictions come from a small n-gram model of the source side
    sentences = [tokenize(l) for l in Path(paths["source"]).read_text().splitlines()]
    lm_path = OUT / "data" / "lm.json"
    save_lm(train_lm(sentences, order=3, smoothing_alpha=0.1), lm_path)

    base = RunConfig(
        source_path=paths["source"],
        reference_path=paths["reference"],
        translator=toy_translator_spec(paths["lexicon"], instability=0.5),
        strategy=StrategyConfig("none"),
        lm_path=str(lm_path),
    )
    spec = SweepSpec(
        base=base,
        k_mask=tuple(range(1, 11)),
        dynamic_cells=(
            PredictorConfig("lm_greedy", k=1, n=1),
            PredictorConfig("random", k=5, n=3),
            PredictorConfig("lm_sample", k=3, n=3),
        ),
        include_none=True,
        include_oracle=True,
    )
    results = run_sweep(spec)
    points = [point for _, point, _ in results]
    frontier = {p.strategy_label for p in pareto_frontier(points)}

    print(f"{'strategy':<28}{'AL':>8}{'NE':>8}{'BLEU':>8}   on frontier")
    for point in points:
        star = "*" if point.strategy_label in frontier else ""
        print(
            f"{point.strategy_label:<28}{point.al:>8.3f}{point.ne:>8.3f}"
            f"{point.bleu:>8.2f}   {star}"
        )

    write_points_csv(OUT / "sweep.csv", points)
    write_points_csv(OUT / "sweep_pareto.csv", pareto_frontier(points))
    print(f"\nwrote {OUT / 'sweep.csv'} and {OUT / 'sweep_pareto.csv'}")

    label = "dynamic:lm_greedy,k=1,n=1"
    traces = next(tr for cell, _, tr in results if cell.label == label)
    hist = mask_histogram(traces)
    masks = [m for m, c in hist.items() for _ in range(c)]
    print(f"\nmask-length histogram for {label}:")
    for mask, count in hist.items():
        print(f"{mask:>4} {'#' * max(1, count // 20)} {count}")
    print(
        f"median {statistics.median(masks)} vs mean {statistics.mean(masks):.2f}: "
        "most steps need only a small mask; the fixed mask pays the "
        "worst-case price everywhere."
    )


if __name__ == "__main__":
    main()

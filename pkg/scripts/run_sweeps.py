#!/usr/bin/env python3
"""Hyperparameter sweeps: hinge confidence (kappa) and crafting-set size (m).

Trains one victim, then
  * sweeps kappa over the standard grid with the penalty method, and
  * sweeps the number of crafting samples for both methods,
evaluating every perturbation on the held-out test split. Two CSVs are
written to --out. Expect a few minutes at the default scale.
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from uapaudio import (
    DATACOUNT_GRID,
    KAPPA_GRID,
    GreedyConfig,
    PenaltyConfig,
    accuracy,
    build_victim,
    confidence_sweep_rows,
    datacount_sweep_rows,
    generate_synthetic_dataset,
    sweep_confidence,
    sweep_datacount,
    sweep_to_csv,
    train,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("sweep_out"))
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--per-class", type=int, default=200)
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--dim", type=int, default=4096)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--c", type=float, default=5.0,
                    help="penalty coefficient (desk victims need ~5-20)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    ds = generate_synthetic_dataset(
        args.classes, args.per_class, args.dim,
        seed=args.seed, test_per_class=args.test_per_class,
    )
    x, y = ds.arrays("train")
    testset = ds.arrays("test")
    model = build_victim("rand-cnn", args.dim, args.classes, seed=args.seed)
    train(model, ds, epochs=args.epochs, seed=args.seed)
    print(f"victim test acc {accuracy(model, *testset):.3f}")

    print(f"== kappa sweep over {KAPPA_GRID} ==")
    conf = sweep_confidence(model, x, y, testset,
                            cfg=PenaltyConfig(c=args.c, seed=args.seed))
    for kappa, report in conf:
        print(f"kappa {kappa:5.1f}  test {report.test_asr:.3f}  "
              f"snr {report.mean_snr_db:.1f} dB")
    sweep_to_csv(confidence_sweep_rows(conf), args.out / "confidence_sweep.csv")

    print(f"== data-count sweep over {DATACOUNT_GRID} ==")
    counts = sweep_datacount(
        model, x, y, testset,
        greedy_cfg=GreedyConfig(seed=args.seed),
        penalty_cfg=PenaltyConfig(c=args.c, kappa=90.0, min_iters=19, seed=args.seed),
        seed=args.seed,
    )
    for method, m, report in counts:
        print(f"{method:8s} m={m:4d}  test {report.test_asr:.3f}  "
              f"snr {report.mean_snr_db:.1f} dB")
    sweep_to_csv(datacount_sweep_rows(counts), args.out / "datacount_sweep.csv")

    print(f"done in {time.perf_counter() - t0:.1f}s; CSVs in {args.out}/")


if __name__ == "__main__":
    main()

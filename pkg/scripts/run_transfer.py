#!/usr/bin/env python3
"""Cross-architecture transferability of untargeted universal perturbations.

Trains one victim per registered architecture on the same dataset, crafts a
penalty perturbation against each, and scores every perturbation against
every other victim. The resulting matrix is descriptive (toy victims say
little about transfer between real networks) and is written as CSV.
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from uapaudio import (
    ARCHITECTURES,
    PenaltyConfig,
    accuracy,
    build_victim,
    generate_synthetic_dataset,
    penalty_uap,
    train,
    transfer_matrix,
    transfer_to_csv,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("transfer_out"))
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--per-class", type=int, default=200)
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--dim", type=int, default=4096)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--c", type=float, default=10.0)
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

    models, perts = [], []
    for arch in ARCHITECTURES:
        model = build_victim(arch, args.dim, args.classes, seed=args.seed)
        train(model, ds, epochs=args.epochs, seed=args.seed)
        result = penalty_uap(model, x, y, PenaltyConfig(c=args.c, seed=args.seed))
        models.append(model)
        perts.append(result.perturbation)
        print(f"{arch:10s} test acc {accuracy(model, *testset):.3f}  "
              f"train asr {result.perturbation.train_asr:.3f}")

    matrix = transfer_matrix(models, perts, testset)
    print("source \\ victim:", "  ".join(matrix.labels))
    for i, name in enumerate(matrix.labels):
        cells = ["  .  " if i == j else f"{matrix.values[i, j]:.3f}"
                 for j in range(len(matrix.labels))]
        print(f"{name:12s} {'  '.join(cells)}")

    transfer_to_csv(matrix, args.out / "transfer.csv")
    print(f"done in {time.perf_counter() - t0:.1f}s; CSV in {args.out}/")


if __name__ == "__main__":
    main()

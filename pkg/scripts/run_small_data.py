#!/usr/bin/env python3
"""Few-sample crafting: penalty vs greedy at m=1 and m=5, plus significance.

Repeats the comparison over several disjoint seeds, reports per-seed and
median test ASR for each method, and runs the two-proportion Z test on the
median pair at each m. With one sample per class it also runs the
single-sample protocol (fixed 19-iteration budget, high-confidence hinge).
"""

from __future__ import annotations

import argparse
import statistics

import numpy as np

from uapaudio import (
    GreedyConfig,
    PenaltyConfig,
    accuracy,
    build_victim,
    evaluate_uap,
    generate_synthetic_dataset,
    greedy_uap,
    penalty_uap,
    single_sample_attack,
    train,
    two_proportion_z,
)


def subset(x: np.ndarray, y: np.ndarray, m: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.sort(np.random.default_rng(seed).permutation(x.shape[0])[:m])
    return x[idx], y[idx]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--per-class", type=int, default=200)
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--dim", type=int, default=4096)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = generate_synthetic_dataset(
        args.classes, args.per_class, args.dim,
        seed=args.seed, test_per_class=args.test_per_class,
    )
    x, y = ds.arrays("train")
    testset = ds.arrays("test")
    model = build_victim("rand-cnn", args.dim, args.classes, seed=args.seed)
    train(model, ds, epochs=args.epochs, seed=args.seed)
    print(f"victim test acc {accuracy(model, *testset):.3f}")

    m_test = testset[0].shape[0]
    for m in (1, 5):
        greedy_scores, penalty_scores = [], []
        for s in range(args.seeds):
            xs, ys = subset(x, y, m, seed=1000 + s)
            g = greedy_uap(model, xs, GreedyConfig(seed=s))
            greedy_scores.append(evaluate_uap(model, testset, g.perturbation).test_asr)
            cfg = PenaltyConfig(c=5.0, kappa=90.0, batch_size=min(m, 100),
                                min_iters=19, seed=s)
            p = penalty_uap(model, xs, ys, cfg)
            penalty_scores.append(evaluate_uap(model, testset, p.perturbation).test_asr)
        g_med = statistics.median(greedy_scores)
        p_med = statistics.median(penalty_scores)
        print(f"m={m}: greedy {[f'{v:.2f}' for v in greedy_scores]} median {g_med:.3f}")
        print(f"m={m}: penalty {[f'{v:.2f}' for v in penalty_scores]} median {p_med:.3f}")
        zt = two_proportion_z(min(g_med, p_med), max(g_med, p_med), m_test)
        print(f"m={m}: Z {zt.z:.3f} vs -z_alpha {-zt.z_alpha:.3f} "
              f"-> {'different' if zt.reject else 'no significant difference'}")

    print("== single-sample protocol (one crafting sample per class) ==")
    sel = np.array([int(np.flatnonzero(y == k)[0]) for k in range(args.classes)])
    runs = single_sample_attack(model, x[sel], y[sel], testset,
                                cfg=PenaltyConfig(c=5.0, kappa=90.0,
                                                  batch_size=1, min_iters=19))
    scores = [r.test_asr for _, r in runs]
    for (label, report) in runs:
        print(f"class {label}: test asr {report.test_asr:.3f}  "
              f"snr {report.mean_snr_db:.1f} dB")
    print(f"mean test asr {float(np.mean(scores)):.3f} "
          f"(chance flip rate would be ~{1.0 / args.classes:.3f})")


if __name__ == "__main__":
    main()

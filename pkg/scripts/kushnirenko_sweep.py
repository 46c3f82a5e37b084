"""Sampled sup |X alpha / alpha| and ergodic limit of G(alpha, t)/t across epsilon."""
import argparse
from dataclasses import dataclass, field

from paraspec.time_change import ergodic_limit_estimate, kushnirenko_verdict, normalize_alpha


@dataclass
class SweepConfig:
    epsilons: list = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.4, 0.8])
    n_samples: int = 2000
    seed: int = 7
    g_time: float = 100.0
    g_samples: int = 256
    workers: int = 1


def sweep(cfg):
    rows = []
    for eps in cfg.epsilons:
        tc = normalize_alpha("discriminant", eps, seed=cfg.seed)
        k = kushnirenko_verdict(tc, cfg.n_samples, cfg.seed, cfg.workers)
        g = ergodic_limit_estimate(tc, cfg.g_time, cfg.g_samples, cfg.seed, workers=cfg.workers)
        rows.append((eps, tc.c, k.sup_estimate, k.inflated, k.verdict, g["mean"], g["stderr"]))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--samples", type=int, default=SweepConfig.n_samples)
    p.add_argument("--seed", type=int, default=SweepConfig.seed)
    p.add_argument("--workers", type=int, default=SweepConfig.workers)
    a = p.parse_args()
    cfg = SweepConfig(n_samples=a.samples, seed=a.seed, workers=a.workers)
    print("epsilon,c,sup,inflated,verdict,G_over_t,stderr")
    for row in sweep(cfg):
        print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))


if __name__ == "__main__":
    main()

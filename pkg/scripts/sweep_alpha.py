"""Final-round cloud MSE against the Byzantine fraction (trim fraction = alpha).

    python scripts/sweep_alpha.py --config configs/toy_same_value.toml \
        --sizes 1000,5000,10000 --out runs/alpha
"""
import argparse
import dataclasses
from pathlib import Path

from resilient_gp.harness.cli import sweep
from resilient_gp.harness.config import load_config
from resilient_gp.harness.results import write_table

ALPHAS = (0.025, 0.05, 0.075, 0.1, 0.125, 0.15)
COLUMNS = ("n_s", "seed", "alpha", "resilient", "standard_poe", "attack_free_poe")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, required=True)
    ap.add_argument("--sizes", default="1000,5000,10000")
    ap.add_argument("--seeds", type=int, default=1)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    base = load_config(args.config)
    rows = []
    for n_s in (int(s) for s in args.sizes.split(",")):
        ppr = n_s // base.n  # one round: final metrics do not depend on batching
        for seed in range(args.seeds):
            cfg = base.replace(seed=seed, points_per_round=ppr, rounds=None,
                               data=dataclasses.replace(base.data, n_s=n_s),
                               bounds=dataclasses.replace(base.bounds, verify=False))
            for r in sweep(cfg, ALPHAS):
                rows.append((n_s, seed, r[0], r[2], r[3], r[4]))
                print(f"n_s={n_s:6d} seed={seed} alpha={r[0]:.3f}  resilient={r[2]:.3e}  "
                      f"standard={r[3]:.3e}  attack-free={r[4]:.3e}")
    if args.out:
        write_table(args.out / "alpha_sweep.csv", COLUMNS, rows)


if __name__ == "__main__":
    main()

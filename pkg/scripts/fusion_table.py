"""Benign-agent local versus fused MSE for several training sizes.

    python scripts/fusion_table.py --sizes 2000,4000,6000 --seeds 20
"""
import argparse
import dataclasses
from pathlib import Path

import numpy as np

from resilient_gp.harness.config import load_config
from resilient_gp.harness.results import write_table
from resilient_gp.harness.simulation import run_scenario

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "toy_fusion.toml")
    ap.add_argument("--sizes", default="2000,4000,6000")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    base = load_config(args.config)
    rows = []
    print(f"{'n_s':>6} {'local':>10} {'fused':>10} {'cloud':>10} {'fused<local':>12}")
    for n_s in (int(s) for s in args.sizes.split(",")):
        res = []
        for seed in range(args.seeds):
            cfg = base.replace(seed=seed, points_per_round=n_s // base.n, rounds=None,
                               data=dataclasses.replace(base.data, n_s=n_s))
            f = run_scenario(cfg, write=False).final
            res.append((f.mse_local_mean, f.mse_fused_mean, f.mse_cloud))
        res = np.array(res)
        better = float(np.mean(res[:, 1] < res[:, 0]))
        rows.append((n_s, *res.mean(axis=0), better))
        print(f"{n_s:6d} {res[:, 0].mean():10.4f} {res[:, 1].mean():10.4f} "
              f"{res[:, 2].mean():10.4f} {better:12.0%}")
    if args.out:
        write_table(args.out / "fusion.csv",
                    ("n_s", "mse_local", "mse_fused", "mse_cloud", "fused_better_fraction"), rows)


if __name__ == "__main__":
    main()

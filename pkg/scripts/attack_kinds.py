"""Resilient PoE under each attack kind, against the attack-free PoE.

    python scripts/attack_kinds.py --sizes 5000,10000,40000
"""
import argparse
import dataclasses
from pathlib import Path

from resilient_gp.harness.config import AttackConfig, load_config
from resilient_gp.harness.results import write_table
from resilient_gp.harness.simulation import run_scenario

ROOT = Path(__file__).resolve().parent.parent
KINDS = ("gaussian", "alte", "mimic", "bit-flip", "same-value")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "toy_same_value.toml")
    ap.add_argument("--sizes", default="5000,10000,40000")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    base = load_config(args.config)
    rows = []
    for n_s in (int(s) for s in args.sizes.split(",")):
        for kind in KINDS:
            cfg = base.replace(seed=args.seed, points_per_round=n_s // base.n, rounds=None,
                               attack=AttackConfig(kind),
                               data=dataclasses.replace(base.data, n_s=n_s),
                               bounds=dataclasses.replace(base.bounds, verify=False))
            f = run_scenario(cfg, write=False).final
            b = f.baselines
            rows.append((n_s, kind, f.mse_cloud, b["attack_free_poe"]["mse"],
                         b["standard_poe"]["mse"], b["median"]["mse"], b["average"]["mse"]))
            print(f"n_s={n_s:6d} {kind:>10}  resilient={f.mse_cloud:.3e}  "
                  f"attack-free={b['attack_free_poe']['mse']:.3e}  "
                  f"plain={b['standard_poe']['mse']:.3e}  median={b['median']['mse']:.3e}  "
                  f"average={b['average']['mse']:.3e}")
    if args.out:
        write_table(args.out / "attacks.csv", ("n_s", "attack", "resilient", "attack_free_poe",
                                              "standard_poe", "median", "average"), rows)


if __name__ == "__main__":
    main()

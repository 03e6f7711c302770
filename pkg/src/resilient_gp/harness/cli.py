"""Command-line entry point.

    resilient-gp simulate      --config FILE [--seed N] [--out DIR]
    resilient-gp attack-sweep  --config FILE --alphas a1,a2,... [--betas b1,...]
    resilient-gp verify-bounds --config FILE --trials K

Exit status: 0 success, 1 configuration or I/O error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ..bounds import merge_reports
from ..errors import ConfigError, IntegrityError, VerificationError
from .config import OutputConfig, SimConfig, load_config
from .results import write_table
from .simulation import Simulation, run_scenario

log = logging.getLogger("resilient_gp")


def _floats(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _apply_overrides(cfg: SimConfig, args) -> SimConfig:
    out = cfg.output
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    out_dir = args.out if args.out is not None else out.dir
    fmt = args.format if args.format is not None else out.format
    changes["output"] = OutputConfig(out_dir, fmt, out.verbosity)
    return cfg.replace(**changes)


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    start = time.perf_counter()
    art = run_scenario(cfg)
    log.info("%d rounds in %.2fs", len(art.rounds), time.perf_counter() - start)
    f = art.final
    print(f"rounds={len(art.rounds)} t={f.t} mse_cloud={f.mse_cloud:.6g} "
          f"mse_local={f.mse_local_mean:.6g} mse_fused={f.mse_fused_mean:.6g} "
          f"standard_poe={f.baselines['standard_poe']['mse']:.6g} d_max={f.d_max:.4g}")
    if cfg.output.dir:
        print(f"results written to {cfg.output.dir}")
    return 0


SWEEP_COLUMNS = ("alpha", "beta", "mse_resilient", "mse_standard_poe", "mse_attack_free_poe",
                 "mse_median", "mse_average", "mse_local_mean", "mse_fused_mean")


def sweep(cfg: SimConfig, alphas, betas=None):
    """Final-round MSEs for each (alpha, beta) pair with alpha <= beta.

    All betas for one alpha share a single simulation (the reports do not
    depend on beta); fusion follows the smallest beta.
    """
    rows = []
    for a in alphas:
        bs = sorted(b for b in (betas if betas else [a]) if b >= a - 1e-12)
        if not bs:
            continue
        run_cfg = cfg.replace(alpha=a, beta=bs[0])
        sim = Simulation(run_cfg, extra_betas=bs[1:])
        final = sim.run()[-1]
        for b in bs:
            mse = final.mse_cloud if b == bs[0] else final.baselines[f"resilient@{b:g}"]["mse"]
            rows.append((a, b, mse, final.baselines["standard_poe"]["mse"],
                         final.baselines["attack_free_poe"]["mse"],
                         final.baselines["median"]["mse"], final.baselines["average"]["mse"],
                         final.mse_local_mean, final.mse_fused_mean))
    return rows


def cmd_attack_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    rows = sweep(cfg, args.alphas, args.betas)
    _emit(rows, SWEEP_COLUMNS, cfg.output, "sweep")
    return 0


def verify_trials(cfg: SimConfig, trials: int):
    """Run ``trials`` independent seeds and pool the bound checks.

    Returns the merged report and the per-trial (local, fused) final MSE
    pairs.  Raises :class:`VerificationError` on any variance-sandwich
    violation.
    """
    reports, pairs = [], []
    for k in range(trials):
        art = run_scenario(cfg.replace(seed=cfg.seed + k), write=False)
        if art.bound_report is None:
            raise ConfigError("bounds are disabled for this scenario (need lip_eta/eta_sup)")
        reports.append(art.bound_report)
        pairs.append((art.final.mse_local_mean, art.final.mse_fused_mean))
    return merge_reports(reports), pairs


def cmd_verify_bounds(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    report, pairs = verify_trials(cfg, args.trials)
    pairs = np.array(pairs)
    improved = float(np.mean(pairs[:, 1] <= pairs[:, 0]))
    delta = cfg.bounds.delta
    out = report.to_dict()
    out.update({"trials": args.trials, "delta": delta, "fused_not_worse_fraction": improved,
                "sandwich_violations": 0,
                "rate_within_delta": report.empirical_violation_rate <= delta})
    if cfg.output.dir:
        Path(cfg.output.dir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.output.dir) / "bounds.json").write_text(json.dumps(out, indent=2,
                                                                     sort_keys=True) + "\n")
    flag = "" if out["rate_within_delta"] else "  (exceeds delta)"
    print(f"trials={args.trials} checks={report.cloud_checks + report.fused_checks} "
          f"violation_rate={report.empirical_violation_rate:.4g} delta={delta}{flag}")
    print(f"variance sandwich: no violations; fused<=local MSE in {improved:.0%} of trials")
    return 0


def _emit(rows, header, out: OutputConfig, stem: str):
    if out.dir:
        path = Path(out.dir) / f"{stem}.{ 'csv' if out.format == 'csv' else 'jsonl'}"
        if out.format == "csv":
            write_table(path, header, rows)
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("".join(json.dumps(dict(zip(header, r))) + "\n" for r in rows))
        print(f"written {path}")
    print("  ".join(f"{h:>14}" for h in header))
    for r in rows:
        print("  ".join(f"{v:>14.6g}" for v in r))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resilient-gp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=str)
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--workers", type=int)

    s = sub.add_parser("simulate", help="run one scenario")
    common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("attack-sweep", help="final MSE across Byzantine/trim fractions")
    common(s)
    s.add_argument("--alphas", type=_floats, required=True)
    s.add_argument("--betas", type=_floats)
    s.set_defaults(func=cmd_attack_sweep)

    s = sub.add_parser("verify-bounds", help="Monte Carlo check of the error and variance bounds")
    common(s)
    s.add_argument("--trials", type=int, required=True)
    s.set_defaults(func=cmd_verify_bounds)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, IntegrityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Round-by-round federated simulation.

Every round each agent ingests ``points_per_round`` new observations and
predicts at the fixed test points from its nearest stored input; Byzantine
agents corrupt what they send; the cloud trims and aggregates; benign agents
fuse the broadcast with their local prediction.

Agent x test-point work is vectorised.  Nearest neighbours and dispersion
are tracked incrementally: a new point only has to be compared against the
current best distance, and a strict ``<`` keeps the earliest arrival on
ties, which is exactly what a full linear scan returns.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .. import aggregation as agg
from ..attacks import AttackKind, apply_attack_batch
from ..bounds import BoundReport, merge_reports, verify_round
from ..errors import ConfigError, IntegrityError
from ..fusion import BoundParams, fused_mask
from ..kernel import euclidean
from ..local_gpr import nn_moments, uniform_grid
from .config import SimConfig
from .data import Stream, generate_toy_stream, load_csv, toy_constants, toy_eta

log = logging.getLogger(__name__)

BASELINES = ("standard_poe", "attack_free_poe", "median", "average")


@dataclass
class Scenario:
    """Materialised data for one run."""

    streams: List[Stream]
    test_z: np.ndarray
    truth: np.ndarray
    grid: np.ndarray
    lip_eta: Optional[float]
    eta_sup: Optional[float]
    meta: dict = field(default_factory=dict)

    @property
    def n_z(self) -> int:
        return self.test_z.shape[1]


def _test_points(cfg: SimConfig, lower, upper, n_z: int) -> np.ndarray:
    d = cfg.data
    if d.test_points is not None:
        pts = np.array(d.test_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != n_z:
            raise ConfigError(f"test points must have dimension {n_z}")
        return pts
    seed = cfg.seed if d.test_seed is None else d.test_seed
    rng = np.random.default_rng([seed, 0x7E57])
    return lower + (upper - lower) * rng.random((d.n_test, n_z))


def build_scenario(cfg: SimConfig) -> Scenario:
    d = cfg.data
    b = cfg.bounds
    if d.source == "toy":
        streams = generate_toy_stream(d.n_s, cfg.n, cfg.agent_noise(), cfg.seed, d.offset)
        lower, upper = np.zeros(1), np.ones(1)
        test_z = _test_points(cfg, lower, upper, 1)
        truth = toy_eta(test_z[:, 0], d.offset)
        lip, sup = (None, None)
        if "auto" in (b.lip_eta, b.eta_sup):
            lip, sup = toy_constants(d.offset)
        lip = lip if b.lip_eta == "auto" else b.lip_eta
        sup = sup if b.eta_sup == "auto" else b.eta_sup
        meta = {"source": "toy", "n_s": d.n_s, "offset": d.offset}
    else:
        ds = load_csv(d.path, cfg.n, d.target_column, cfg.seed, 0 if d.test_points else d.n_test,
                      d.standardize)
        streams = ds.streams
        allz = np.concatenate([s.z for s in streams])
        lower, upper = allz.min(axis=0), allz.max(axis=0)
        if d.test_points is not None:
            raise ConfigError("explicit test points need known targets; use n_test with csv data")
        test_z, truth = ds.test_z, ds.test_y
        lip = None if b.lip_eta == "auto" else b.lip_eta
        sup = float(np.max(np.abs(np.concatenate([s.y for s in streams])))) \
            if b.eta_sup == "auto" else b.eta_sup
        meta = {"source": "csv", "path": d.path, "n_z": int(allz.shape[1]),
                "target_mean": ds.target_mean, "target_std": ds.target_std,
                "dropped_rows": ds.dropped_rows, "n_train": int(len(allz))}
    grid = uniform_grid(lower, upper, d.grid_resolution, seed=cfg.seed)
    # test points join the grid so every realised nearest distance is <= d_max
    grid = np.concatenate([grid, test_z])
    meta["grid_points"] = int(len(grid))
    return Scenario(streams, test_z, np.asarray(truth, dtype=float), grid, lip, sup, meta)


@dataclass
class RoundMetrics:
    round: int
    t: int
    mse_cloud: float
    mse_local: Dict[int, float]
    mse_fused: Dict[int, float]
    avg_var_local: float
    avg_var_cloud: float
    avg_var_fused: float
    d_max: float
    kept_count: float
    kept_min: int
    kept_max: int
    fused_fraction: float
    bound_violation_rate: Optional[float]
    baselines: Dict[str, Dict[str, float]] = field(default_factory=dict)
    bound_report: Optional[BoundReport] = None

    @property
    def mse_local_mean(self) -> float:
        return float(np.mean(list(self.mse_local.values()))) if self.mse_local else math.nan

    @property
    def mse_fused_mean(self) -> float:
        return float(np.mean(list(self.mse_fused.values()))) if self.mse_fused else math.nan


def _round_up(x: float) -> float:
    """Round up to three significant digits."""
    if x <= 0:
        return 1e-12
    step = 10.0 ** (math.floor(math.log10(x)) - 2)
    return max(x, math.ceil(x / step) * step)


class Simulation:
    """Owns all agent state for one scenario and advances it a round at a time.

    ``extra_betas`` adds further resilient aggregators (same reports,
    different trim fraction) whose cloud MSE is reported as baselines
    ``"resilient@<beta>"``; used by the beta sweep.
    """

    def __init__(self, cfg: SimConfig, scenario: Optional[Scenario] = None,
                 extra_betas: Sequence[float] = (), keep_details: bool = False):
        self.cfg = cfg
        self.scn = scenario if scenario is not None else build_scenario(cfg)
        self.policy = cfg.policy
        self.attack = cfg.attack_spec()
        self.hp = cfg.hyperparams()
        self.n = cfg.n
        self.byzantine = np.array(sorted(self.attack.byzantine_ids), dtype=int)
        self.benign = np.array(sorted(set(range(self.n)) - self.attack.byzantine_ids), dtype=int)
        self.noise = np.asarray(cfg.agent_noise(), dtype=float)
        self.extra_policies = [agg.TrimPolicy(self.n, cfg.alpha, b) for b in extra_betas]
        self.keep_details = keep_details

        lengths = {len(s) for s in self.scn.streams}
        if len(self.scn.streams) != self.n or len(lengths) != 1:
            raise ConfigError("every agent needs a stream of the same length")
        self.Z = np.stack([s.z for s in self.scn.streams])  # (n, T, n_z)
        self.Y = np.stack([s.y for s in self.scn.streams])  # (n, T)
        self.total_rounds = cfg.total_rounds(self.Z.shape[1])

        m = len(self.scn.test_z)
        self.best_dist = np.full((self.n, m), np.inf)
        self.best_y = np.zeros((self.n, m))
        self.grid_dist = np.full((self.n, len(self.scn.grid)), np.inf)
        self.t = 0
        self.round = 0
        self.bound_reports: List[BoundReport] = []
        self.details: List[dict] = []

        b = cfg.bounds
        self.bounds_enabled = (b.verify or cfg.fusion_rule == "theta-rule")
        if self.bounds_enabled and (self.scn.lip_eta is None or self.scn.eta_sup is None):
            if cfg.fusion_rule == "theta-rule":
                raise ConfigError("theta-rule fusion needs lip_eta and eta_sup in [bounds]")
            self.bounds_enabled = False

    # -- state updates ---------------------------------------------------
    def _ingest(self, k0: int, k1: int, chunk: int = 16):
        """Fold observations ``k0..k1-1`` of every agent into the caches.

        Within a chunk ``argmin`` returns the first (earliest) minimiser and
        the strict ``<`` against the running best keeps older points on ties,
        so the result equals a sequential linear scan.
        """
        test_z, grid = self.scn.test_z, self.scn.grid
        rows = np.arange(self.n)[:, None]
        for a in range(k0, k1, chunk):
            b = min(a + chunk, k1)
            z_new = self.Z[:, a:b, :]  # (n, c, n_z)
            d = euclidean(z_new[:, :, None, :], test_z[None, None, :, :])  # (n, c, m)
            first = np.argmin(d, axis=1)  # (n, m)
            d_min = np.take_along_axis(d, first[:, None, :], axis=1)[:, 0, :]
            closer = d_min < self.best_dist
            self.best_dist = np.where(closer, d_min, self.best_dist)
            self.best_y = np.where(closer, self.Y[:, a:b][rows, first], self.best_y)
            for c in range(b - a):
                np.minimum(self.grid_dist, euclidean(z_new[:, c, None, :], grid[None, :, :]),
                           out=self.grid_dist)

    def dispersions(self) -> np.ndarray:
        return self.grid_dist.max(axis=1)

    def _map_points(self, fn, m: int):
        """Apply ``fn(slice)`` over test-point chunks; results joined in order."""
        w = min(self.cfg.workers, m)
        if w <= 1:
            return [fn(slice(0, m))]
        edges = np.linspace(0, m, w + 1).astype(int)
        slices = [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]
        with ThreadPoolExecutor(max_workers=w) as pool:
            return list(pool.map(fn, slices))

    def _poe(self, means, variances, mask=None):
        m = means.shape[1]

        def work(sl):
            return agg.poe_batch(means[:, sl], variances[:, sl],
                                 None if mask is None else mask[:, sl])

        parts = self._map_points(work, m)
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def bound_params(self, d_max: float) -> Optional[BoundParams]:
        if not self.bounds_enabled:
            return None
        b = self.cfg.bounds
        gamma_d = _round_up(d_max) if b.gamma_d == "auto" else float(b.gamma_d)
        return BoundParams(self.scn.lip_eta, self.scn.eta_sup, gamma_d, b.delta)

    # -- one round -------------------------------------------------------
    def step(self) -> RoundMetrics:
        if self.round >= self.total_rounds:
            raise IndexError("no data left for another round")
        self._ingest(self.t, self.t + self.cfg.points_per_round)
        self.t += self.cfg.points_per_round
        self.round += 1
        r = self.round
        cfg, hp = self.cfg, self.hp
        truth = self.scn.truth

        local_mean, local_var = nn_moments(self.best_dist, self.best_y, hp.sigma_f2, hp.kernel,
                                           self.noise[:, None])
        sent_mean, sent_var = local_mean, local_var
        if self.attack.kind is not AttackKind.NONE and self.byzantine.size:
            target = None
            if self.attack.kind is AttackKind.MIMIC:
                tid = int(self.attack.params["target"])
                target = (local_mean[tid], local_var[tid])
            bm, bv = apply_attack_batch(self.attack, local_mean[self.byzantine],
                                        local_var[self.byzantine], self.byzantine.tolist(), r,
                                        local_mean[self.benign], local_var[self.benign], target)
            sent_mean, sent_var = local_mean.copy(), local_var.copy()
            sent_mean[self.byzantine], sent_var[self.byzantine] = bm, bv

        keep, groups = agg.trim_batch(sent_mean, sent_var, self.policy.trim_count)
        try:
            cloud_mean, cloud_var = self._poe(sent_mean, sent_var, keep)
        except IntegrityError as exc:
            raise IntegrityError(f"round {r}: {exc}") from exc
        sizes = keep.sum(axis=0)

        baselines = {}

        def record(name, mu, var):
            baselines[name] = {"mse": float(np.mean((mu - truth) ** 2)),
                               "avg_var": float(np.mean(var))}

        finite = np.isfinite(sent_mean).all() and np.isfinite(sent_var).all() \
            and (sent_var > 0).all()
        if finite:
            record("standard_poe", *self._poe(sent_mean, sent_var))
        else:
            baselines["standard_poe"] = {"mse": math.nan, "avg_var": math.nan}
        record("attack_free_poe", *self._poe(local_mean, local_var))
        record("median", *agg.median_batch(sent_mean, sent_var))
        record("average", *agg.average_batch(sent_mean, sent_var))
        for pol in self.extra_policies:
            mask = agg.kept_mask(sent_mean, sent_var, pol.trim_count)
            record(f"resilient@{pol.beta:g}", *self._poe(sent_mean, sent_var, mask))

        # fusion at benign agents
        disp = self.dispersions()
        d_max = float(disp.max())
        bp = self.bound_params(d_max)
        lb_mean, lb_var = local_mean[self.benign], local_var[self.benign]
        if cfg.fusion_rule == "off":
            sel = np.zeros_like(lb_var, dtype=bool)
        else:
            sel = fused_mask(cfg.fusion_rule, lb_var, cloud_var, bp=bp, hp=hp,
                             beta=self.policy.beta, agent_noise_var=self.noise[self.benign],
                             d_i=disp[self.benign])
        fused_mean = np.where(sel, cloud_mean[None, :], lb_mean)
        fused_var = np.where(sel, cloud_var[None, :], lb_var)

        report = None
        rate = None
        if bp is not None:
            report = verify_round(truth, cloud_mean, cloud_var, fused_mean, fused_var, d_max,
                                  self.policy, bp, hp, round_index=r)
            self.bound_reports.append(report)
            rate = report.empirical_violation_rate

        if self.keep_details:
            self.details.append({
                "round": r,
                "trim": [agg.report_from_batch(keep, groups, j).to_dict()
                         for j in range(keep.shape[1])],
                "selected": {int(i): sel[k].astype(int).tolist()
                             for k, i in enumerate(self.benign)},
            })
        else:
            self.details.append({"round": r, "point": 0,
                                 "trim": agg.report_from_batch(keep, groups, 0).to_dict()})

        ids = self.benign.tolist()
        return RoundMetrics(
            round=r, t=self.t,
            mse_cloud=float(np.mean((cloud_mean - truth) ** 2)),
            mse_local={i: float(v) for i, v in zip(ids, np.mean((lb_mean - truth) ** 2, axis=1))},
            mse_fused={i: float(v) for i, v in
                       zip(ids, np.mean((fused_mean - truth) ** 2, axis=1))},
            avg_var_local=float(np.mean(lb_var)) if lb_var.size else math.nan,
            avg_var_cloud=float(np.mean(cloud_var)),
            avg_var_fused=float(np.mean(fused_var)) if fused_var.size else math.nan,
            d_max=d_max,
            kept_count=float(np.mean(sizes)), kept_min=int(sizes.min()),
            kept_max=int(sizes.max()),
            fused_fraction=float(np.mean(sel)) if sel.size else 0.0,
            bound_violation_rate=rate, baselines=baselines, bound_report=report,
        )

    def run(self) -> List[RoundMetrics]:
        return [self.step() for _ in range(self.round, self.total_rounds)]


def run_round(sim: Simulation, t: Optional[int] = None) -> RoundMetrics:
    """Advance ``sim`` by one round (``t``, if given, must be the next round index)."""
    if t is not None and t != sim.round + 1:
        raise ValueError(f"next round is {sim.round + 1}, not {t}")
    return sim.step()


@dataclass
class RunArtifact:
    config: SimConfig
    rounds: List[RoundMetrics]
    details: List[dict]
    meta: dict
    bound_report: Optional[BoundReport] = None

    @property
    def final(self) -> RoundMetrics:
        return self.rounds[-1]

    def summary(self) -> dict:
        f = self.final
        out = {
            "rounds": len(self.rounds),
            "t": f.t,
            "final": {
                "mse_cloud": f.mse_cloud,
                "mse_local_mean": f.mse_local_mean,
                "mse_fused_mean": f.mse_fused_mean,
                "avg_var_cloud": f.avg_var_cloud,
                "avg_var_local": f.avg_var_local,
                "avg_var_fused": f.avg_var_fused,
                "d_max": f.d_max,
                "kept_count": f.kept_count,
                "baselines": f.baselines,
                "mse_local": {str(k): v for k, v in f.mse_local.items()},
                "mse_fused": {str(k): v for k, v in f.mse_fused.items()},
            },
            "byzantine_ids": sorted(self.config.attack_spec().byzantine_ids),
            "scenario": self.meta,
        }
        if self.bound_report is not None:
            out["bounds"] = self.bound_report.to_dict()
        return out


def run_scenario(cfg: SimConfig, scenario: Optional[Scenario] = None,
                 extra_betas: Sequence[float] = (), write: bool = True) -> RunArtifact:
    """Run every round of ``cfg``; writes the results files when an output dir is set."""
    sim = Simulation(cfg, scenario, extra_betas,
                     keep_details=cfg.output.verbosity == "detailed")
    rounds = sim.run()
    merged = merge_reports(sim.bound_reports) if sim.bound_reports else None
    artifact = RunArtifact(cfg, rounds, sim.details, sim.scn.meta, merged)
    if write and cfg.output.dir:
        from .results import write_artifact
        write_artifact(artifact, cfg.output.dir, cfg.output.format)
    return artifact

"""Closed-form error and variance bounds, and a per-round checker."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .aggregation import TrimPolicy
from .errors import VerificationError
from .fusion import BoundParams, concentration
from .kernel import Hyperparams

# relative slack on the deterministic variance sandwich (float rounding only)
SANDWICH_RTOL = 1e-12


def _square_gap(hp: Hyperparams, s):
    """``sigma_f2**2 - kappa(s)**2`` without cancellation near ``s = 0``."""
    return hp.kernel.gap(s) * (hp.sigma_f2 + hp.kernel.kappa(s))


def theta_of(s: float, bp: BoundParams, hp: Hyperparams) -> float:
    """Attack-free error bound at dispersion ``s``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    sf2 = hp.sigma_f2
    smax2 = hp.noise_std_max**2
    smin2 = hp.noise_std_min**2
    # 1 - kappa/(sf2 + smax2) written as a sum of non-negative terms
    shrink = (smax2 + hp.kernel.gap(s)) / (sf2 + smax2) * bp.eta_sup
    lip = sf2 * bp.lip_eta * s / (sf2 + smin2)
    return shrink + lip + concentration(bp, hp)


def delta_of(s: float, alpha: float, beta: float, bp: BoundParams, hp: Hyperparams) -> float:
    """Extra error allowed for the Byzantine fraction ``alpha`` (0 when alpha = 0)."""
    if not 0 <= alpha <= beta < 0.25:
        raise ValueError("need 0 <= alpha <= beta < 1/4")
    if alpha == 0:
        return 0.0
    sf2 = hp.sigma_f2
    ratio = (sf2 * hp.noise_std_max**2 + _square_gap(hp, s)) / (sf2 * hp.noise_std_min**2)
    return ratio * (2.0 * alpha / (1.0 - 4.0 * beta)) * theta_of(s, bp, hp)


def variance_bounds(beta: float, d_max: float, hp: Hyperparams):
    """Lower and upper bound on any aggregated or fused benign variance."""
    if not 0 <= beta < 0.25:
        raise ValueError("beta must lie in [0, 1/4)")
    if d_max < 0:
        raise ValueError("d_max must be non-negative")
    sf2 = hp.sigma_f2
    smax2 = hp.noise_std_max**2
    lo = (1.0 - 2.0 * beta) * (sf2 * hp.noise_std_min**2 / (sf2 + smax2))
    hi = (sf2 * smax2 + _square_gap(hp, d_max)) / (sf2 + smax2) / (1.0 - 4.0 * beta)
    return lo, hi


@dataclass
class BoundReport:
    theta: float
    delta_term: float
    var_lo: float
    var_hi: float
    cloud_checks: int = 0
    cloud_violations: int = 0
    fused_checks: int = 0
    fused_violations: int = 0

    @property
    def bound(self) -> float:
        return self.theta + self.delta_term

    @property
    def empirical_violation_rate(self) -> float:
        total = self.cloud_checks + self.fused_checks
        return (self.cloud_violations + self.fused_violations) / total if total else 0.0

    @property
    def cloud_violation_rate(self) -> float:
        return self.cloud_violations / self.cloud_checks if self.cloud_checks else 0.0

    @property
    def fused_violation_rate(self) -> float:
        return self.fused_violations / self.fused_checks if self.fused_checks else 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["empirical_violation_rate"] = self.empirical_violation_rate
        return out


def check_sandwich(variances, lo: float, hi: float, label: str, round_index=None):
    v = np.asarray(variances, dtype=float)
    bad = (v < lo * (1 - SANDWICH_RTOL)) | (v > hi * (1 + SANDWICH_RTOL)) | ~np.isfinite(v)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        point = int(idx[-1])
        raise VerificationError(
            f"{label} variance {v[tuple(idx)]!r} outside [{lo!r}, {hi!r}] "
            f"(round {round_index}, point {point})", round_index, point)


def verify_round(eta_true, cloud_mean, cloud_var, fused_mean, fused_var, d_max: float,
                 policy: TrimPolicy, bp: BoundParams, hp: Hyperparams,
                 round_index=None) -> BoundReport:
    """Check one round against the bounds.

    ``fused_*`` are ``(n_benign, m)`` arrays (may have zero rows).  The
    variance sandwich is a hard check; the error bound is tallied.
    """
    theta = theta_of(d_max, bp, hp)
    dlt = delta_of(d_max, policy.alpha, policy.beta, bp, hp)
    lo, hi = variance_bounds(policy.beta, d_max, hp)
    check_sandwich(cloud_var, lo, hi, "cloud", round_index)
    fused_var = np.asarray(fused_var, dtype=float)
    if fused_var.size:
        check_sandwich(fused_var, lo, hi, "fused", round_index)
    eta = np.asarray(eta_true, dtype=float)
    bound = theta + dlt
    cloud_err = np.abs(np.asarray(cloud_mean) - eta)
    fused_err = np.abs(np.asarray(fused_mean, dtype=float) - eta) if fused_var.size else np.empty(0)
    return BoundReport(
        theta=theta, delta_term=dlt, var_lo=lo, var_hi=hi,
        cloud_checks=int(cloud_err.size), cloud_violations=int(np.sum(~(cloud_err <= bound))),
        fused_checks=int(fused_err.size), fused_violations=int(np.sum(~(fused_err <= bound))),
    )


def merge_reports(reports) -> BoundReport:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to merge")
    last = reports[-1]
    return BoundReport(
        theta=last.theta, delta_term=last.delta_term, var_lo=last.var_lo, var_hi=last.var_hi,
        cloud_checks=sum(r.cloud_checks for r in reports),
        cloud_violations=sum(r.cloud_violations for r in reports),
        fused_checks=sum(r.fused_checks for r in reports),
        fused_violations=sum(r.fused_violations for r in reports),
    )


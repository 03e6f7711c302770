"""Agent-side choice between the local and the broadcast cloud prediction.

Two selection rules are supported:

``variance-compare``
    use the cloud prediction wherever its variance is strictly below the
    local one.
``theta-rule``
    use the cloud prediction where
    ``theta_hat * cloud_var - theta_check * local_var < -gamma``, a
    conservative test under which the cloud is provably better in mean
    squared error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import Hyperparams
from .local_gpr import Prediction, Provenance

VARIANCE_COMPARE = "variance-compare"
THETA_RULE = "theta-rule"
RULES = (VARIANCE_COMPARE, THETA_RULE)


@dataclass(frozen=True)
class BoundParams:
    """Constants the error bounds need.

    ``lip_eta`` is a Lipschitz constant of the target, ``eta_sup`` its sup
    norm, ``gamma_d`` a uniform bound on every agent's dispersion and
    ``delta`` the confidence parameter.  The sub-Gaussian scale is always
    derived from the hyperparameters, see :func:`subgaussian_sigma`.
    """

    lip_eta: float
    eta_sup: float
    gamma_d: float
    delta: float = 0.05

    def __post_init__(self):
        for name in ("lip_eta", "eta_sup", "gamma_d", "delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    def with_gamma_d(self, gamma_d: float) -> "BoundParams":
        return BoundParams(self.lip_eta, self.eta_sup, gamma_d, self.delta)


def subgaussian_sigma(hp: Hyperparams) -> float:
    return hp.sigma_f2 * hp.noise_std_max / (hp.sigma_f2 + hp.noise_std_min**2)


def concentration(bp: BoundParams, hp: Hyperparams) -> float:
    """``sqrt(2 sigma^2 (ln 2 - ln delta))``."""
    sigma = subgaussian_sigma(hp)
    return math.sqrt(2.0 * sigma**2 * (math.log(2.0) - math.log(bp.delta)))


def gamma(bp: BoundParams, hp: Hyperparams) -> float:
    sf2 = hp.sigma_f2
    return sf2 * bp.lip_eta * bp.gamma_d / (sf2 + hp.noise_std_min**2) + concentration(bp, hp)


def theta_hat(bp: BoundParams, hp: Hyperparams, beta: float) -> float:
    if not 0 <= beta < 0.25:
        raise ValueError("beta must lie in [0, 1/4)")
    sf2 = hp.sigma_f2
    num = hp.noise_std_max**2 + hp.kernel.gap(bp.gamma_d)
    return num / ((1.0 - 2.0 * beta) * sf2 * hp.noise_std_min**2) * bp.eta_sup


def theta_check(hp: Hyperparams, agent_noise_var, d_i):
    """Per-agent weight; vectorises over ``agent_noise_var`` and ``d_i``."""
    d_i = np.asarray(d_i, dtype=float)
    if np.any(d_i < 0):
        raise ValueError("dispersion must be non-negative")
    sf2 = hp.sigma_f2
    k = hp.kernel.kappa(d_i)
    noise_var = np.asarray(agent_noise_var, dtype=float)
    # sf2^2 - k^2 factored so small dispersions do not cancel
    out = np.sqrt(noise_var) * k / (sf2 * noise_var + hp.kernel.gap(d_i) * (sf2 + k))
    return float(out) if np.ndim(out) == 0 else out


def fused_mask(rule: str, local_var, cloud_var, *, bp: BoundParams | None = None,
               hp: Hyperparams | None = None, beta: float = 0.0,
               agent_noise_var=None, d_i=None):
    """Elementwise selection flags: True where the cloud prediction is used.

    ``local_var`` may be ``(k, m)`` with ``cloud_var`` of shape ``(m,)``;
    for the theta rule ``agent_noise_var`` and ``d_i`` broadcast against the
    leading axis.
    """
    local_var = np.asarray(local_var, dtype=float)
    cloud_var = np.asarray(cloud_var, dtype=float)
    if rule == VARIANCE_COMPARE:
        return local_var > cloud_var
    if rule == THETA_RULE:
        if bp is None or hp is None or agent_noise_var is None or d_i is None:
            raise ValueError("theta rule needs bound params, hyperparams, noise and dispersion")
        th = theta_hat(bp, hp, beta)
        tc = np.asarray(theta_check(hp, agent_noise_var, d_i))
        if local_var.ndim == 2 and tc.ndim == 1:
            tc = tc[:, None]
        return th * cloud_var - tc * local_var < -gamma(bp, hp)
    raise ValueError(f"unknown fusion rule {rule!r}")


def in_fused_set(rule: str, local: Prediction, cloud: Prediction, bp: BoundParams | None,
                 hp: Hyperparams | None, beta: float = 0.0, agent_noise_var: float | None = None,
                 d_i: float | None = None) -> bool:
    return bool(fused_mask(rule, local.variance, cloud.variance, bp=bp, hp=hp, beta=beta,
                           agent_noise_var=agent_noise_var, d_i=d_i))


def fuse(local: Prediction, cloud: Prediction, selected: bool) -> Prediction:
    src = cloud if selected else local
    return Prediction(src.mean, src.variance, Provenance.FUSED)

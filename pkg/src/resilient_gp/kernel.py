"""Stationary kernels written as a function of distance, and hyperparameters.

A kernel here is ``ker(z, z') = kappa(||z - z'||)`` with ``kappa`` continuous,
strictly positive, non-increasing and ``kappa(0) = sigma_f2``.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np


def euclidean(a, b):
    """Euclidean distance along the last axis (broadcasting)."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if diff.shape[-1] == 1:
        return np.abs(diff[..., 0])
    return np.sqrt(np.sum(diff * diff, axis=-1))


class StationaryKernel(abc.ABC):
    """Kernel contract: distance -> covariance, plus the signal variance."""

    @property
    @abc.abstractmethod
    def sigma_f2(self) -> float:
        ...

    @abc.abstractmethod
    def kappa(self, s):
        """Covariance at distance ``s`` (scalar or array, all >= 0)."""

    def gap(self, s):
        """``sigma_f2 - kappa(s)``; override when it can be formed without cancellation."""
        return self.sigma_f2 - self.kappa(s)

    def __call__(self, z, z2):
        return self.kappa(euclidean(z, z2))


@dataclass(frozen=True)
class SquaredExponential(StationaryKernel):
    signal_var: float
    length_scale: float

    @property
    def sigma_f2(self) -> float:
        return self.signal_var

    def kappa(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("distance must be non-negative")
        out = self.signal_var * np.exp(-(s * s) / (2.0 * self.length_scale**2))
        return float(out) if out.ndim == 0 else out

    def gap(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("distance must be non-negative")
        out = -self.signal_var * np.expm1(-(s * s) / (2.0 * self.length_scale**2))
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Hyperparams:
    """Kernel amplitude/length-scale and per-agent noise variances.

    ``noise_var_per_agent[i]`` is the noise variance of agent ``i``.
    ``benign_ids`` restricts the noise extremes (``noise_std_max`` and
    ``noise_std_min``) to the benign agents; ``None`` means all agents.
    """

    sigma_f2: float
    length_scale: float
    noise_var_per_agent: tuple
    benign_ids: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "noise_var_per_agent",
                           tuple(float(v) for v in self.noise_var_per_agent))
        if self.benign_ids is not None:
            object.__setattr__(self, "benign_ids", tuple(sorted(int(i) for i in self.benign_ids)))
        if not self.sigma_f2 > 0:
            raise ValueError(f"sigma_f2 must be > 0, got {self.sigma_f2}")
        if not self.length_scale > 0:
            raise ValueError(f"length_scale must be > 0, got {self.length_scale}")
        if not self.noise_var_per_agent:
            raise ValueError("need at least one noise variance")
        if any(not v > 0 for v in self.noise_var_per_agent):
            raise ValueError("every noise variance must be > 0")
        if self.benign_ids is not None:
            if not self.benign_ids:
                raise ValueError("benign set must be non-empty")
            bad = [i for i in self.benign_ids if not 0 <= i < len(self.noise_var_per_agent)]
            if bad:
                raise ValueError(f"benign ids out of range: {bad}")

    @classmethod
    def uniform(cls, sigma_f2: float, length_scale: float, noise_var: float, n: int,
                benign_ids: Optional[Iterable[int]] = None) -> "Hyperparams":
        return cls(sigma_f2, length_scale, (noise_var,) * n,
                   None if benign_ids is None else tuple(benign_ids))

    @property
    def kernel(self) -> SquaredExponential:
        return SquaredExponential(self.sigma_f2, self.length_scale)

    @property
    def n_agents(self) -> int:
        return len(self.noise_var_per_agent)

    def noise_var(self, agent_id: int) -> float:
        return self.noise_var_per_agent[agent_id]

    def with_benign(self, benign_ids: Iterable[int]) -> "Hyperparams":
        return Hyperparams(self.sigma_f2, self.length_scale, self.noise_var_per_agent,
                           tuple(benign_ids))

    def _benign_vars(self) -> Sequence[float]:
        if self.benign_ids is None:
            return self.noise_var_per_agent
        return [self.noise_var_per_agent[i] for i in self.benign_ids]

    @property
    def noise_std_max(self) -> float:
        return float(np.sqrt(max(self._benign_vars())))

    @property
    def noise_std_min(self) -> float:
        return float(np.sqrt(min(self._benign_vars())))


def kappa(s, hp: Hyperparams):
    """Squared-exponential covariance at distance ``s``."""
    return hp.kernel.kappa(s)


def kernel_eval(z, z2, hp: Hyperparams) -> float:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    z2 = np.atleast_1d(np.asarray(z2, dtype=float))
    if z.shape != z2.shape:
        raise ValueError(f"dimension mismatch: {z.shape} vs {z2.shape}")
    return float(hp.kernel.kappa(euclidean(z, z2)))


def gram(points, hp: Hyperparams) -> np.ndarray:
    """Kernel matrix of an ``(k, n_z)`` array of inputs."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return hp.kernel.kappa(euclidean(pts[:, None, :], pts[None, :, :]))

"""Per-agent streaming data and nearest-neighbour GPR.

The streaming predictor conditions on the single nearest stored input only,
which keeps a prediction at O(t) (the nearest-neighbour scan).  Full GPR is
kept as a small-data oracle for cross-checks.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import NumericError, StateError
from .kernel import Hyperparams, euclidean

FULL_GPR_MAX_POINTS = 2000


class Provenance(str, enum.Enum):
    LOCAL_HONEST = "local-honest"
    LOCAL_CORRUPTED = "local-corrupted"
    CLOUD = "cloud"
    FUSED = "fused"


@dataclass(frozen=True)
class TrainingPoint:
    z: Tuple[float, ...]
    y: float
    t: int

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if z.ndim != 1:
            raise ValueError("input must be a vector")
        object.__setattr__(self, "z", tuple(float(v) for v in z))
        object.__setattr__(self, "y", float(self.y))
        if int(self.t) < 1:
            raise ValueError("arrival index t must be a positive integer")
        object.__setattr__(self, "t", int(self.t))

    @property
    def dim(self) -> int:
        return len(self.z)


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float
    provenance: Provenance = Provenance.LOCAL_HONEST

    def __post_init__(self):
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if self.provenance is not Provenance.LOCAL_CORRUPTED and not self.variance > 0:
            raise ValueError(f"{self.provenance.value} prediction needs variance > 0, "
                             f"got {self.variance}")


@dataclass
class AgentState:
    """One agent's append-only stream.

    Inputs are mirrored into a growing ``(t, n_z)`` buffer so the
    nearest-neighbour scan is a single vectorised pass.
    """

    agent_id: int
    noise_var: float
    n_z: int = 1
    points: List[TrainingPoint] = field(default_factory=list)

    def __post_init__(self):
        if not self.noise_var > 0:
            raise ValueError("noise variance must be > 0")
        self._buf = np.empty((max(16, len(self.points)), self.n_z))
        self._ybuf = np.empty(self._buf.shape[0])
        self._size = 0
        old, self.points = self.points, []
        for p in old:
            ingest(self, p)

    def __len__(self):
        return self._size

    @property
    def inputs(self) -> np.ndarray:
        return self._buf[: self._size]

    @property
    def outputs(self) -> np.ndarray:
        return self._ybuf[: self._size]

    def _append(self, point: TrainingPoint):
        if self._size == self._buf.shape[0]:
            grow = self._buf.shape[0] * 2
            buf = np.empty((grow, self.n_z))
            buf[: self._size] = self._buf[: self._size]
            ybuf = np.empty(grow)
            ybuf[: self._size] = self._ybuf[: self._size]
            self._buf, self._ybuf = buf, ybuf
        self._buf[self._size] = point.z
        self._ybuf[self._size] = point.y
        self._size += 1
        self.points.append(point)


def ingest(state: AgentState, point: TrainingPoint) -> AgentState:
    """Append ``point`` to the stream (in place) and return the state."""
    if point.dim != state.n_z:
        raise ValueError(f"point has dimension {point.dim}, agent expects {state.n_z}")
    if state.points and point.t <= state.points[-1].t:
        raise ValueError("arrival index must be strictly increasing")
    state._append(point)
    return state


def _as_query(state: AgentState, z_star) -> np.ndarray:
    q = np.atleast_1d(np.asarray(z_star, dtype=float))
    if q.shape != (state.n_z,):
        raise ValueError(f"query has shape {q.shape}, agent expects ({state.n_z},)")
    return q


def nearest(state: AgentState, z_star) -> Tuple[TrainingPoint, float]:
    """Nearest stored point; ties go to the earliest arrival."""
    if len(state) == 0:
        raise StateError(f"agent {state.agent_id} has no data")
    dist = euclidean(state.inputs, _as_query(state, z_star))
    k = int(np.argmin(dist))  # first minimiser, i.e. smallest t
    return state.points[k], float(dist[k])


def nn_moments(distance, y_nearest, sigma_f2: float, kernel, noise_var):
    """Posterior mean and variance given one observation at ``distance``.

    Works elementwise on arrays; the scalar and batched code paths both go
    through here so they agree bit for bit.
    """
    k = kernel.kappa(distance)
    s = sigma_f2 + noise_var
    mean = (k / s) * y_nearest
    # sigma_f2 - k^2/s, rearranged so nearby points do not cancel
    var = (sigma_f2 * noise_var + kernel.gap(distance) * (sigma_f2 + k)) / s
    return mean, var


def local_predict(state: AgentState, z_star, hp: Hyperparams) -> Prediction:
    point, d = nearest(state, z_star)
    mean, var = nn_moments(d, point.y, hp.sigma_f2, hp.kernel, state.noise_var)
    return Prediction(mean, var, Provenance.LOCAL_HONEST)


def full_gpr_predict(points: Sequence[TrainingPoint], z_star, hp: Hyperparams,
                     noise_var: float, max_points: int = FULL_GPR_MAX_POINTS) -> Prediction:
    """Exact GP posterior at one input from all ``points`` (test oracle)."""
    if not 1 <= len(points) <= max_points:
        raise ValueError(f"full GPR needs 1..{max_points} points, got {len(points)}")
    Z = np.array([p.z for p in points], dtype=float)
    y = np.array([p.y for p in points], dtype=float)
    q = np.atleast_1d(np.asarray(z_star, dtype=float))
    if q.shape != (Z.shape[1],):
        raise ValueError("query dimension mismatch")
    kern = hp.kernel
    K = kern.kappa(euclidean(Z[:, None, :], Z[None, :, :]))
    K = np.atleast_2d(K) + noise_var * np.eye(len(points))
    k_star = np.atleast_1d(kern.kappa(euclidean(Z, q)))
    try:
        factor = scipy.linalg.cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        try:
            factor = scipy.linalg.cho_factor(K + 1e-10 * hp.sigma_f2 * np.eye(len(points)),
                                              lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericError("covariance matrix not positive definite after jitter") from exc
    alpha = scipy.linalg.cho_solve(factor, y)
    v = scipy.linalg.cho_solve(factor, k_star)
    mean = float(k_star @ alpha)
    var = float(hp.sigma_f2 - k_star @ v)
    if not var > 0:
        raise NumericError(f"non-positive posterior variance {var}")
    return Prediction(mean, var, Provenance.LOCAL_HONEST)


def dispersion(state: AgentState, domain_grid) -> float:
    """Grid approximation of the largest distance from the domain to the data."""
    if len(state) == 0:
        raise StateError(f"agent {state.agent_id} has no data")
    grid = np.asarray(domain_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[1] != state.n_z:
        raise ValueError("grid dimension mismatch")
    best = np.full(grid.shape[0], np.inf)
    # chunk over stored points to bound memory
    X = state.inputs
    for start in range(0, len(X), 256):
        block = euclidean(grid[:, None, :], X[None, start:start + 256, :])
        np.minimum(best, block.min(axis=1), out=best)
    return float(best.max())


def uniform_grid(lower, upper, resolution: int, seed: int = 0) -> np.ndarray:
    """Points covering the box ``[lower, upper]``.

    Up to three dimensions this is a regular lattice with about
    ``resolution`` points in total; above that a lattice is useless, so a
    seeded uniform sample of ``resolution`` points is returned instead.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    n_z = lower.size
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if n_z <= 3:
        per_dim = max(2, int(round(resolution ** (1.0 / n_z))))
        axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(lower, upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    rng = np.random.default_rng(seed)
    return lower + (upper - lower) * rng.random((resolution, n_z))

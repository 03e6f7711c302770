"""Cloud-side aggregation: trimmed product of experts and simple baselines.

The resilient rule drops the ``beta*n`` largest and smallest reported means,
independently the ``beta*n`` largest and smallest reported variances, and
combines the agents that survive both cuts with a precision-weighted
average.  With ``beta = 0`` nothing is dropped and the rule is the plain
product of experts.

Sums go through :func:`math.fsum`, which is exactly rounded and therefore
independent of summation order.  See :func:`_poe` for the arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Mapping, Tuple

import numpy as np

from .errors import ConfigError, IntegrityError
from .local_gpr import Prediction, Provenance

_INT_TOL = 1e-9


def _integral(x: float) -> bool:
    return abs(x - round(x)) < _INT_TOL


@dataclass(frozen=True)
class TrimPolicy:
    n: int
    alpha: float
    beta: float

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("need at least one agent")
        if not 0 <= self.alpha <= self.beta < 0.25:
            raise ConfigError(f"need 0 <= alpha <= beta < 1/4, got alpha={self.alpha}, "
                              f"beta={self.beta}")
        if not _integral(self.alpha * self.n) or not _integral(self.beta * self.n):
            raise ConfigError(f"alpha*n and beta*n must be integers (n={self.n}, "
                              f"alpha={self.alpha}, beta={self.beta})")

    @property
    def trim_count(self) -> int:
        return int(round(self.beta * self.n))

    @property
    def byzantine_count(self) -> int:
        return int(round(self.alpha * self.n))


@dataclass(frozen=True)
class TrimReport:
    kept: Tuple[int, ...]
    trimmed_mean_high: FrozenSet[int]
    trimmed_mean_low: FrozenSet[int]
    trimmed_var_high: FrozenSet[int]
    trimmed_var_low: FrozenSet[int]

    def to_dict(self) -> dict:
        return {
            "kept": list(self.kept),
            "trimmed_mean_high": sorted(self.trimmed_mean_high),
            "trimmed_mean_low": sorted(self.trimmed_mean_low),
            "trimmed_var_high": sorted(self.trimmed_var_high),
            "trimmed_var_low": sorted(self.trimmed_var_low),
        }


def _sort_value(v: float) -> float:
    # NaN has no order; treat it as the largest possible report.
    return math.inf if math.isnan(v) else v


def trim(values: Mapping[int, float], count: int, which: str) -> FrozenSet[int]:
    """Ids of the ``count`` largest or smallest values (ties: smaller id first)."""
    if count < 0 or 2 * count > len(values):
        raise ValueError(f"cannot trim {count} from each side of {len(values)} values")
    if which == "largest":
        order = sorted(values, key=lambda i: (-_sort_value(values[i]), i))
    elif which == "smallest":
        order = sorted(values, key=lambda i: (_sort_value(values[i]), i))
    else:
        raise ValueError(f"which must be 'largest' or 'smallest', got {which!r}")
    return frozenset(order[:count])


def build_kept_set(means: Mapping[int, float], variances: Mapping[int, float],
                   policy: TrimPolicy) -> TrimReport:
    if set(means) != set(variances) or len(means) != policy.n:
        raise ValueError("means and variances must cover the same n agents")
    b = policy.trim_count
    # the high cut is taken from what the low cut left, so the two never
    # share an agent even when many reports tie
    ml = trim(means, b, "smallest")
    mh = trim({i: v for i, v in means.items() if i not in ml}, b, "largest")
    vl = trim(variances, b, "smallest")
    vh = trim({i: v for i, v in variances.items() if i not in vl}, b, "largest")
    dropped = mh | ml | vh | vl
    kept = tuple(sorted(i for i in means if i not in dropped))
    for i in kept:
        if not (math.isfinite(means[i]) and math.isfinite(variances[i])):
            raise IntegrityError(f"non-finite report from agent {i} survived trimming")
    return TrimReport(kept, mh, ml, vh, vl)


def _poe(means, variances) -> Tuple[float, float]:
    """Precision-weighted mean and ``k / sum(1/v)`` in a normalised form.

    Weights are ``v_min / v_i`` (all in ``(0, 1]``, so nothing overflows) and
    the mean is accumulated as offsets from the first expert's mean.  The
    result is algebraically the plain product of experts; identical experts
    give weights of exactly one and offsets of exactly zero, so their
    common (mean, variance) comes back unchanged.
    """
    v_ref = min(variances)
    m_ref = means[0]
    weights = [v_ref / v for v in variances]
    total = math.fsum(weights)
    shift = math.fsum([(m - m_ref) * w for m, w in zip(means, weights)])
    return m_ref + shift / total, v_ref * (len(weights) / total)


def poe_aggregate(predictions: Mapping[int, Prediction]) -> Prediction:
    """Precision-weighted mean and averaged precision over the given experts."""
    if not predictions:
        raise IntegrityError("nothing to aggregate")
    ids = sorted(predictions)
    means = [predictions[i].mean for i in ids]
    variances = [predictions[i].variance for i in ids]
    for i, m, v in zip(ids, means, variances):
        if not (v > 0 and math.isfinite(v) and math.isfinite(m)):
            raise IntegrityError(f"agent {i} has invalid report (mean={m}, variance={v})")
    mean, var = _poe(means, variances)
    return Prediction(mean, var, Provenance.CLOUD)


def resilient_poe(predictions: Mapping[int, Prediction],
                  policy: TrimPolicy) -> Tuple[Prediction, TrimReport]:
    """Trim then aggregate, returning the trim report alongside."""
    report = build_kept_set({i: p.mean for i, p in predictions.items()},
                            {i: p.variance for i, p in predictions.items()}, policy)
    return poe_aggregate({i: predictions[i] for i in report.kept}), report


def baseline_aggregate(predictions: Mapping[int, Prediction], rule: str) -> Prediction:
    """Coordinate-wise lower median or plain average of (mean, variance)."""
    if not predictions:
        raise ValueError("nothing to aggregate")
    ids = sorted(predictions)
    means = [predictions[i].mean for i in ids]
    variances = [predictions[i].variance for i in ids]
    if rule == "median":
        k = (len(ids) - 1) // 2
        return Prediction(sorted(means, key=_sort_value)[k],
                          sorted(variances, key=_sort_value)[k], Provenance.CLOUD)
    if rule == "average":
        return Prediction(math.fsum(means) / len(ids), math.fsum(variances) / len(ids),
                          Provenance.CLOUD)
    raise ValueError(f"unknown baseline rule {rule!r}")


# ---------------------------------------------------------------------------
# Batched forms over an (n_agents, n_points) block.  Row index is agent id.

TRIM_GROUPS = ("mean_high", "mean_low", "var_high", "var_low")


def trim_batch(means: np.ndarray, variances: np.ndarray, count: int):
    """Batched trimming over an ``(n, m)`` block.

    Returns the ``(n, m)`` keep mask and, per trim group, the ``(count, m)``
    agent ids removed at each point.
    """
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    n, m = means.shape
    if count < 0 or 2 * count > n:
        raise ValueError(f"cannot trim {count} from each side of {n} values")
    keep = np.ones((n, m), dtype=bool)
    groups = {}
    cols = np.broadcast_to(np.arange(m)[None, :], (count, m))
    ids = np.broadcast_to(np.arange(n)[:, None], (n, m))
    for name, block in (("mean", means), ("var", variances)):
        key = np.where(np.isnan(block), np.inf, block)
        # stable sort, so equal values fall back to ascending agent id
        low = np.argsort(key, axis=0, kind="stable")[:count]
        excluded = np.zeros((n, m), dtype=bool)
        excluded[low, cols] = True
        # high cut among the rest: order by (excluded, -value, id)
        high = np.lexsort((ids, -key, excluded), axis=0)[:count]
        keep[high, cols] = False
        keep[low, cols] = False
        groups[name + "_high"], groups[name + "_low"] = high, low
    return keep, groups


def kept_mask(means: np.ndarray, variances: np.ndarray, count: int) -> np.ndarray:
    """Boolean ``(n, m)`` mask of agents surviving both trims at each point."""
    return trim_batch(means, variances, count)[0]


def report_from_batch(keep: np.ndarray, groups, j: int) -> TrimReport:
    """The :class:`TrimReport` of column ``j`` of a :func:`trim_batch` result."""
    return TrimReport(
        tuple(int(i) for i in np.flatnonzero(keep[:, j])),
        frozenset(int(i) for i in groups["mean_high"][:, j]),
        frozenset(int(i) for i in groups["mean_low"][:, j]),
        frozenset(int(i) for i in groups["var_high"][:, j]),
        frozenset(int(i) for i in groups["var_low"][:, j]),
    )


def poe_batch(means: np.ndarray, variances: np.ndarray,
              mask: np.ndarray | None = None) -> Tuple[np.ndarray, np.ndarray]:
    """Column-wise product of experts restricted to ``mask``.

    Produces the same floats as :func:`poe_aggregate` on each column: the
    elementwise steps are IEEE-identical and masked-out entries enter the
    exactly rounded sums as zeros, which leaves them unchanged.  The
    reference mean is the first kept row of each column, as in the scalar
    path where experts are taken in ascending id order.
    """
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if mask is None:
        mask = np.ones(means.shape, dtype=bool)
    counts = mask.sum(axis=0)
    if np.any(counts == 0):
        raise IntegrityError(f"empty kept set at point {int(np.flatnonzero(counts == 0)[0])}")
    with np.errstate(all="ignore"):
        ok = np.isfinite(means) & np.isfinite(variances) & (variances > 0)
        if not np.all(ok[mask]):
            i, j = np.argwhere(mask & ~ok)[0]
            raise IntegrityError(f"invalid report from agent {i} kept at point {j}")
        v_ref = np.where(mask, variances, np.inf).min(axis=0)
        first = np.argmax(mask, axis=0)
        m_ref = means[first, np.arange(means.shape[1])]
        w = np.where(mask, v_ref / variances, 0.0)
        off = np.where(mask, (means - m_ref) * w, 0.0)
    total = np.array([math.fsum(col) for col in w.T.tolist()])
    shift = np.array([math.fsum(col) for col in off.T.tolist()])
    return m_ref + shift / total, v_ref * (counts / total)


def median_batch(means: np.ndarray, variances: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = means.shape[0]
    k = (n - 1) // 2
    mkey = np.where(np.isnan(means), np.inf, means)
    vkey = np.where(np.isnan(variances), np.inf, variances)
    return np.sort(mkey, axis=0)[k], np.sort(vkey, axis=0)[k]


def average_batch(means: np.ndarray, variances: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n, m = means.shape
    mu = np.array([math.fsum(means[:, j].tolist()) / n for j in range(m)])
    var = np.array([math.fsum(variances[:, j].tolist()) / n for j in range(m)])
    return mu, var


def kept_sizes(mask: np.ndarray) -> np.ndarray:
    return mask.sum(axis=0)


def as_prediction_map(means, variances, provenance=Provenance.LOCAL_HONEST) -> Dict[int, Prediction]:
    return {i: Prediction(m, v, provenance) for i, (m, v) in enumerate(zip(means, variances))}

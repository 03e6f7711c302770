"""Byzantine behaviour: turn honest local predictions into what the cloud receives.

Attack semantics (means; variances are left alone unless ``attack_variance``):

* ``same-value``  mean := c
* ``gaussian``    mean := honest mean + N(0, v)
* ``alte``        mean := benign average - z_a * benign standard deviation
* ``mimic``       copy the honest prediction of benign agent ``target``
* ``bit-flip``    mean := -scale * honest mean
* ``none``        identity

With ``attack_variance`` the same transform is applied to the variance
(``same-value`` uses ``c_var``).  Randomness comes from a per-(seed, agent,
round) generator so the outcome does not depend on evaluation order.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Mapping, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .local_gpr import Prediction, Provenance


class AttackKind(str, enum.Enum):
    NONE = "none"
    SAME_VALUE = "same-value"
    GAUSSIAN = "gaussian"
    ALTE = "alte"
    MIMIC = "mimic"
    BIT_FLIP = "bit-flip"


_DEFAULTS = {
    AttackKind.SAME_VALUE: {"c": 100.0, "c_var": 100.0},
    AttackKind.GAUSSIAN: {"v": 100.0},
    AttackKind.ALTE: {"z_a": 1.5},
    AttackKind.MIMIC: {"target": None},
    AttackKind.BIT_FLIP: {"scale": 1.0},
    AttackKind.NONE: {},
}


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind = AttackKind.NONE
    byzantine_ids: FrozenSet[int] = frozenset()
    params: Mapping[str, float] = field(default_factory=dict)
    attack_variance: bool = False
    seed: int = 0

    def __post_init__(self):
        kind = AttackKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "byzantine_ids", frozenset(int(i) for i in self.byzantine_ids))
        unknown = set(self.params) - set(_DEFAULTS[kind])
        if unknown:
            raise ConfigError(f"unknown parameters for {kind.value} attack: {sorted(unknown)}")
        merged = dict(_DEFAULTS[kind])
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        if kind is AttackKind.MIMIC:
            target = merged["target"]
            if target is None:
                raise ConfigError("mimic attack needs a target agent id")
            if int(target) in self.byzantine_ids:
                raise ConfigError(f"mimic target {target} is not benign")
        if kind is AttackKind.GAUSSIAN and not merged["v"] >= 0:
            raise ConfigError("gaussian attack variance must be >= 0")

    def validate(self, n: int, alpha: float) -> None:
        if any(not 0 <= i < n for i in self.byzantine_ids):
            raise ConfigError(f"byzantine ids must lie in [0, {n})")
        expected = int(round(alpha * n))
        if len(self.byzantine_ids) != expected:
            raise ConfigError(f"alpha*n = {expected} but {len(self.byzantine_ids)} "
                              "byzantine ids were given")
        if self.kind is AttackKind.MIMIC and not 0 <= int(self.params["target"]) < n:
            raise ConfigError("mimic target out of range")

    @property
    def active(self) -> bool:
        return self.kind is not AttackKind.NONE and bool(self.byzantine_ids)


def choose_byzantine_ids(n: int, alpha: float, seed: int) -> FrozenSet[int]:
    count = int(round(alpha * n))
    if abs(alpha * n - count) > 1e-9:
        raise ConfigError(f"alpha*n must be an integer (n={n}, alpha={alpha})")
    rng = np.random.default_rng([seed, 0xB1A5])
    return frozenset(int(i) for i in rng.choice(n, size=count, replace=False))


def attack_rng(seed: int, agent_id: int, round_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, agent_id, round_index])


@dataclass(frozen=True)
class RoundContext:
    """What an attacker can see when corrupting one test point."""

    round_index: int
    benign: Mapping[int, Prediction]
    point_index: int = 0
    n_points: int = 1


def _corrupt(kind: AttackKind, params, value, benign_values, target_value, noise):
    if kind is AttackKind.SAME_VALUE:
        return params["c"]
    if kind is AttackKind.GAUSSIAN:
        return value + noise
    if kind is AttackKind.ALTE:
        return np.mean(benign_values, axis=0) - params["z_a"] * np.std(benign_values, axis=0)
    if kind is AttackKind.MIMIC:
        return target_value
    if kind is AttackKind.BIT_FLIP:
        return -params["scale"] * value
    return value


def apply_attack(spec: AttackSpec, agent_id: int, honest: Prediction,
                 ctx: RoundContext) -> Prediction:
    """Corrupt one agent's prediction at one test point.

    Agents outside ``spec.byzantine_ids`` and the ``none`` kind are returned
    untouched.
    """
    if honest.provenance is not Provenance.LOCAL_HONEST:
        raise ValueError("attack input must be an honest local prediction")
    if spec.kind is AttackKind.NONE or agent_id not in spec.byzantine_ids:
        return honest
    ids = sorted(ctx.benign)
    means = np.array([[ctx.benign[i].mean] for i in ids])
    variances = np.array([[ctx.benign[i].variance] for i in ids])
    m_out, v_out = apply_attack_batch(spec, np.array([[honest.mean]]),
                                      np.array([[honest.variance]]), [agent_id],
                                      ctx.round_index, means, variances,
                                      _target_block(spec, ctx.benign),
                                      point_slice=(ctx.point_index, ctx.n_points))
    return Prediction(m_out[0, 0], v_out[0, 0], Provenance.LOCAL_CORRUPTED)


def _target_block(spec: AttackSpec, benign: Mapping[int, Prediction]):
    if spec.kind is not AttackKind.MIMIC:
        return None
    target = int(spec.params["target"])
    if target not in benign:
        raise ConfigError(f"mimic target {target} is not benign")
    p = benign[target]
    return np.array([p.mean]), np.array([p.variance])


def apply_attack_batch(spec: AttackSpec, means: np.ndarray, variances: np.ndarray,
                       agent_ids: Iterable[int], round_index: int,
                       benign_means: np.ndarray, benign_vars: np.ndarray,
                       target: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                       point_slice: Optional[Tuple[int, int]] = None
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """Corrupt rows of an ``(k, m)`` block belonging to ``agent_ids``.

    ``benign_means``/``benign_vars`` are ``(n_benign, m)`` honest reports;
    ``target`` holds the mimicked agent's ``(m,)`` mean and variance rows.
    ``point_slice=(j, m_total)`` evaluates only column ``j`` of an
    ``m_total``-point round, drawing the same noise the full block would.
    """
    kind = spec.kind
    means = np.array(means, dtype=float, copy=True)
    variances = np.array(variances, dtype=float, copy=True)
    if kind is AttackKind.NONE:
        return means, variances
    p = spec.params
    if kind is AttackKind.MIMIC and target is None:
        raise ConfigError("mimic attack needs the target's honest prediction")
    for row, agent in enumerate(agent_ids):
        m_noise = v_noise = 0.0
        if kind is AttackKind.GAUSSIAN:
            rng = attack_rng(spec.seed, agent, round_index)
            width = means.shape[1] if point_slice is None else point_slice[1]
            draws = rng.normal(0.0, np.sqrt(p["v"]), size=(2, width))
            if point_slice is not None:
                draws = draws[:, point_slice[0]:point_slice[0] + 1]
            m_noise, v_noise = draws[0], draws[1]
        tm, tv = target if target is not None else (None, None)
        means[row] = _corrupt(kind, p, means[row], benign_means, tm, m_noise)
        if spec.attack_variance:
            if kind is AttackKind.SAME_VALUE:
                variances[row] = p["c_var"]
            else:
                variances[row] = _corrupt(kind, p, variances[row], benign_vars, tv, v_noise)
        elif kind is AttackKind.MIMIC:
            variances[row] = tv
    return means, variances

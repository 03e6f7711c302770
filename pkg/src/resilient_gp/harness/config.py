"""Scenario configuration, read from TOML.

Sections and keys (all optional unless noted)::

    [network]  n, alpha, beta, rounds, points_per_round, seed, workers
    [kernel]   sigma_f2, length_scale, noise_var (scalar or per-agent list)
    [attack]   kind, byzantine_ids, attack_variance, c, c_var, v, z_a, target, scale
    [fusion]   rule ("variance-compare" | "theta-rule" | "off")
    [bounds]   lip_eta, eta_sup ("auto" on toy data), gamma_d ("auto" or number),
               delta, verify
    [data]     source ("toy" | "csv"), n_s, n_test, test_points, test_seed, offset,
               path, target_column, standardize, grid_resolution
    [output]   dir, format ("csv" | "json"), verbosity ("summary" | "detailed")

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..aggregation import TrimPolicy
from ..attacks import AttackKind, AttackSpec, choose_byzantine_ids
from ..errors import ConfigError
from ..fusion import RULES
from ..kernel import Hyperparams

FUSION_RULES = RULES + ("off",)


@dataclass(frozen=True)
class DataConfig:
    source: str = "toy"
    n_s: int = 10_000
    n_test: int = 120
    test_points: Optional[Tuple[Tuple[float, ...], ...]] = None
    test_seed: Optional[int] = None
    offset: float = 0.0
    path: Optional[str] = None
    target_column: str = "y"
    standardize: bool = True
    grid_resolution: int = 10_000


@dataclass(frozen=True)
class BoundsConfig:
    lip_eta: Union[float, str, None] = "auto"
    eta_sup: Union[float, str, None] = "auto"
    gamma_d: Union[float, str] = "auto"
    delta: float = 0.05
    verify: bool = True


@dataclass(frozen=True)
class OutputConfig:
    dir: Optional[str] = None
    format: str = "csv"
    verbosity: str = "summary"


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "none"
    byzantine_ids: Optional[Tuple[int, ...]] = None
    attack_variance: bool = False
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimConfig:
    n: int = 40
    alpha: float = 0.0
    beta: float = 0.0
    sigma_f2: float = 1.0
    length_scale: float = 0.1
    noise_var: Tuple[float, ...] = (0.01,)
    attack: AttackConfig = AttackConfig()
    fusion_rule: str = "variance-compare"
    bounds: BoundsConfig = BoundsConfig()
    rounds: Optional[int] = None
    points_per_round: int = 1
    data: DataConfig = DataConfig()
    seed: int = 0
    workers: int = 1
    output: OutputConfig = OutputConfig()

    def __post_init__(self):
        self.policy  # validates alpha/beta/n
        if self.beta > 0 and self.n < 4:
            raise ConfigError("trimming needs n >= 4")
        if len(self.noise_var) not in (1, self.n):
            raise ConfigError(f"noise_var needs 1 or {self.n} entries")
        if self.fusion_rule not in FUSION_RULES:
            raise ConfigError(f"fusion rule must be one of {FUSION_RULES}")
        if self.points_per_round < 1:
            raise ConfigError("points_per_round must be >= 1")
        if self.rounds is not None and self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.data.source not in ("toy", "csv"):
            raise ConfigError(f"unknown data source {self.data.source!r}")
        if self.data.source == "csv" and not self.data.path:
            raise ConfigError("csv data source needs [data] path")
        if self.data.source == "toy" and self.data.n_s % self.n:
            raise ConfigError(f"n ({self.n}) must divide n_s ({self.data.n_s})")
        if self.output.format not in ("csv", "json"):
            raise ConfigError("output format must be csv or json")
        if self.output.verbosity not in ("summary", "detailed"):
            raise ConfigError("verbosity must be summary or detailed")
        try:
            AttackKind(self.attack.kind)
        except ValueError:
            raise ConfigError(f"unknown attack kind {self.attack.kind!r}") from None
        if self.attack.byzantine_ids is not None and self.alpha == 0 and self.attack.byzantine_ids:
            raise ConfigError("byzantine ids listed but alpha = 0")
        self.attack_spec()  # fail early on bad attack parameters

    @property
    def policy(self) -> TrimPolicy:
        return TrimPolicy(self.n, self.alpha, self.beta)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def byzantine_ids(self) -> frozenset:
        if self.attack.byzantine_ids is not None:
            return frozenset(self.attack.byzantine_ids)
        return choose_byzantine_ids(self.n, self.alpha, self.seed)

    def attack_spec(self) -> AttackSpec:
        ids = self.byzantine_ids()
        params = dict(self.attack.params)
        if self.attack.kind == AttackKind.MIMIC.value and "target" not in params:
            params["target"] = min(set(range(self.n)) - ids)
        try:
            spec = AttackSpec(AttackKind(self.attack.kind), ids, params,
                              self.attack.attack_variance, self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        spec.validate(self.n, self.alpha)
        return spec

    def hyperparams(self) -> Hyperparams:
        noise = self.noise_var * self.n if len(self.noise_var) == 1 else self.noise_var
        benign = sorted(set(range(self.n)) - self.byzantine_ids())
        return Hyperparams(self.sigma_f2, self.length_scale, noise, tuple(benign))

    def agent_noise(self) -> Tuple[float, ...]:
        return self.noise_var * self.n if len(self.noise_var) == 1 else self.noise_var

    def total_rounds(self, points_per_agent: int) -> int:
        available = points_per_agent // self.points_per_round
        if available < 1:
            raise ConfigError("not enough data for a single round")
        if self.rounds is None:
            return available
        if self.rounds > available:
            raise ConfigError(f"{self.rounds} rounds requested, data supports {available}")
        return self.rounds


_SECTIONS = {
    "network": {"n", "alpha", "beta", "rounds", "points_per_round", "seed", "workers"},
    "kernel": {"sigma_f2", "length_scale", "noise_var"},
    "attack": {"kind", "byzantine_ids", "attack_variance", "c", "c_var", "v", "z_a",
               "target", "scale"},
    "fusion": {"rule"},
    "bounds": {"lip_eta", "eta_sup", "gamma_d", "delta", "verify"},
    "data": {"source", "n_s", "n_test", "test_points", "test_seed", "offset", "path",
             "target_column", "standardize", "grid_resolution"},
    "output": {"dir", "format", "verbosity"},
}


def _check_keys(doc: dict, origin: str):
    for section, body in doc.items():
        if section not in _SECTIONS:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{origin}: [{section}] must be a table")
        extra = set(body) - _SECTIONS[section]
        if extra:
            raise ConfigError(f"{origin}: unknown keys in [{section}]: {sorted(extra)}")


def _bound_value(v):
    if v is None or v == "auto":
        return v
    if isinstance(v, str):
        raise ConfigError(f"bound constant must be a number or 'auto', got {v!r}")
    return float(v)


def config_from_dict(doc: dict, origin: str = "<config>", base_dir: Optional[Path] = None
                     ) -> SimConfig:
    _check_keys(doc, origin)
    net = doc.get("network", {})
    ker = doc.get("kernel", {})
    att = dict(doc.get("attack", {}))
    fus = doc.get("fusion", {})
    bnd = doc.get("bounds", {})
    dat = dict(doc.get("data", {}))
    out = doc.get("output", {})

    noise = ker.get("noise_var", 0.01)
    noise = tuple(float(v) for v in noise) if isinstance(noise, list) else (float(noise),)
    ids = att.pop("byzantine_ids", None)
    attack = AttackConfig(
        kind=att.pop("kind", "none"),
        byzantine_ids=None if ids is None else tuple(int(i) for i in ids),
        attack_variance=bool(att.pop("attack_variance", False)),
        params=att,
    )
    if dat.get("test_points") is not None:
        dat["test_points"] = tuple(tuple(float(x) for x in (p if isinstance(p, list) else [p]))
                                   for p in dat["test_points"])
    if dat.get("path") and base_dir is not None and not Path(dat["path"]).is_absolute():
        dat["path"] = str((base_dir / dat["path"]).resolve())
    try:
        return SimConfig(
            n=int(net.get("n", 40)),
            alpha=float(net.get("alpha", 0.0)),
            beta=float(net.get("beta", 0.0)),
            rounds=net.get("rounds"),
            points_per_round=int(net.get("points_per_round", 1)),
            seed=int(net.get("seed", 0)),
            workers=int(net.get("workers", 1)),
            sigma_f2=float(ker.get("sigma_f2", 1.0)),
            length_scale=float(ker.get("length_scale", 0.1)),
            noise_var=noise,
            attack=attack,
            fusion_rule=fus.get("rule", "variance-compare"),
            bounds=BoundsConfig(
                lip_eta=_bound_value(bnd.get("lip_eta", "auto")),
                eta_sup=_bound_value(bnd.get("eta_sup", "auto")),
                gamma_d=_bound_value(bnd.get("gamma_d", "auto")),
                delta=float(bnd.get("delta", 0.05)),
                verify=bool(bnd.get("verify", True)),
            ),
            data=DataConfig(**dat),
            output=OutputConfig(**out),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{origin}: {exc}") from exc


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc, str(path), path.parent)

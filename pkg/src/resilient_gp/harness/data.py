"""Training data: the synthetic toy target and CSV datasets, split into agent streams."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Sequence

import numpy as np

from ..errors import ConfigError
from ..local_gpr import TrainingPoint

log = logging.getLogger(__name__)


def toy_eta(z, offset: float = 0.0):
    """Synthetic 1-D target; ``offset`` is added inside the ``sin(12 z)`` term."""
    z = np.asarray(z, dtype=float)
    out = ((z**3 - 0.5) * np.sin(3 * z - 0.5) + 5 * z**2 * (np.sin(12 * z) + offset)
           + 4 * np.cos(2 * z))
    return float(out) if out.ndim == 0 else out


def toy_eta_derivative(z, offset: float = 0.0):
    z = np.asarray(z, dtype=float)
    return (3 * z**2 * np.sin(3 * z - 0.5) + 3 * (z**3 - 0.5) * np.cos(3 * z - 0.5)
            + 10 * z * (np.sin(12 * z) + offset) + 60 * z**2 * np.cos(12 * z)
            - 8 * np.sin(2 * z))


def toy_constants(offset: float = 0.0, resolution: int = 100_001):
    """(Lipschitz constant, sup norm) of the toy target on [0, 1] by dense grid."""
    grid = np.linspace(0.0, 1.0, resolution)
    lip = float(np.max(np.abs(toy_eta_derivative(grid, offset))))
    sup = float(np.max(np.abs(toy_eta(grid, offset))))
    return lip, sup


@dataclass
class Stream:
    """One agent's ordered observations, kept as arrays."""

    agent_id: int
    z: np.ndarray  # (T, n_z)
    y: np.ndarray  # (T,)

    def __len__(self):
        return len(self.y)

    def points(self) -> Iterator[TrainingPoint]:
        for k in range(len(self.y)):
            yield TrainingPoint(self.z[k], self.y[k], k + 1)


def _round_robin(z: np.ndarray, y: np.ndarray, n: int) -> List[Stream]:
    return [Stream(i, z[i::n].copy(), y[i::n].copy()) for i in range(n)]


def generate_toy_stream(n_s: int, n: int, noise_var: Sequence[float] | float, seed: int,
                        offset: float = 0.0) -> List[Stream]:
    """``n_s`` uniform inputs on [0, 1] with noisy toy outputs, dealt round-robin.

    Point ``k`` goes to agent ``k mod n`` and carries that agent's noise.
    """
    if n < 1 or n_s < 1 or n_s % n:
        raise ValueError(f"n ({n}) must divide n_s ({n_s})")
    noise = np.broadcast_to(np.asarray(noise_var, dtype=float), (n,))
    rng = np.random.default_rng([seed, 0x7011])
    z = rng.random(n_s)
    owner = np.arange(n_s) % n
    y = toy_eta(z, offset) + rng.standard_normal(n_s) * np.sqrt(noise[owner])
    return _round_robin(z[:, None], y, n)


@dataclass
class CsvDataset:
    streams: List[Stream]
    test_z: np.ndarray
    test_y: np.ndarray
    columns: List[str]
    target_column: str
    target_mean: float = 0.0
    target_std: float = 1.0
    dropped_rows: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_z(self) -> int:
        return self.test_z.shape[1] if self.test_z.size else self.streams[0].z.shape[1]


def read_csv_matrix(path, target_column: str):
    """Parse a numeric CSV; returns (features, target, feature names)."""
    path = Path(path)
    try:
        raw = path.read_bytes().decode("utf-8-sig")
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 ({exc})") from exc
    reader = csv.reader(io.StringIO(raw, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ConfigError(f"{path}: empty file") from None
    if target_column not in header:
        raise ConfigError(f"{path}: target column {target_column!r} not in header {header}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for col, cell in zip(header, row):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: column {col!r}: "
                                  f"not a number: {cell!r}") from None
        rows.append(vals)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    data = np.array(rows)
    t = header.index(target_column)
    features = [h for i, h in enumerate(header) if i != t]
    return np.delete(data, t, axis=1), data[:, t], features


def load_csv(path, n: int, target_column: str, seed: int, n_test: int = 0,
             standardize: bool = True) -> CsvDataset:
    """Shuffle rows, hold out ``n_test`` rows, split the rest evenly over ``n`` agents.

    Rows that do not divide evenly are dropped (logged).  Targets are
    standardised with training-set statistics when ``standardize`` is set.
    """
    X, y, features = read_csv_matrix(path, target_column)
    rng = np.random.default_rng([seed, 0xC5F])
    perm = rng.permutation(len(y))
    X, y = X[perm], y[perm]
    if n_test >= len(y):
        raise ConfigError(f"{path}: {len(y)} rows cannot supply {n_test} test points")
    test_z, test_y = X[:n_test], y[:n_test]
    X, y = X[n_test:], y[n_test:]
    usable = (len(y) // n) * n
    if usable == 0:
        raise ConfigError(f"{path}: {len(y)} training rows for {n} agents")
    dropped = len(y) - usable
    if dropped:
        log.warning("dropping %d rows so %d agents get equal shares", dropped, n)
    X, y = X[:usable], y[:usable]
    mean, std = 0.0, 1.0
    if standardize:
        mean = float(np.mean(y))
        std = float(np.std(y)) or 1.0
        y = (y - mean) / std
        test_y = (test_y - mean) / std
    return CsvDataset(_round_robin(X, y, n), test_z, test_y, features, target_column,
                      mean, std, dropped, {"path": str(path), "rows": int(len(perm))})

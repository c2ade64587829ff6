"""Reproducible Brownian and random-walk path ensembles.

Every path draws its increments from its own generator seeded by
``(seed, path, block)``, in fixed-length blocks.  A path's increments
therefore do not depend on how many paths are simulated, how they are
chunked, or how far a particular path is extended.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

KINDS = ("gaussian", "rademacher")


@dataclass(frozen=True)
class EnsembleConfig:
    n_paths: int
    dt: float
    horizon: float
    seed: int = 0
    kind: str = "gaussian"
    antithetic: bool = False
    block: int = 2048

    def __post_init__(self):
        if not isinstance(self.n_paths, int) or self.n_paths <= 0:
            raise ValueError("n_paths must be a positive integer")
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ValueError("dt must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.block <= 0:
            raise ValueError("block must be positive")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


class PathEnsemble:
    """Lazily generated increments for ``cfg.n_paths`` paths."""

    def __init__(self, cfg: EnsembleConfig, workers: int = 1):
        self.cfg = cfg
        self.workers = max(1, int(workers))

    n_paths = property(lambda self: self.cfg.n_paths)
    dt = property(lambda self: self.cfg.dt)
    horizon = property(lambda self: self.cfg.horizon)
    seed = property(lambda self: self.cfg.seed)
    n_steps = property(lambda self: self.cfg.n_steps)

    def _path_blocks(self, i: int, n_blocks: int, offset: int) -> np.ndarray:
        cfg = self.cfg
        stream, sign = (i // 2, -1.0 if i % 2 else 1.0) if cfg.antithetic else (i, 1.0)
        out = np.empty(n_blocks * cfg.block)
        for b in range(n_blocks):
            rng = np.random.default_rng([cfg.seed, stream, offset + b])
            if cfg.kind == "gaussian":
                z = rng.standard_normal(cfg.block)
            else:
                z = rng.integers(0, 2, cfg.block) * 2.0 - 1.0
            out[b * cfg.block:(b + 1) * cfg.block] = z
        return sign * math.sqrt(cfg.dt) * out

    def increments(self, indices=None, n_steps: int | None = None) -> np.ndarray:
        """Array of shape ``(len(indices), n_steps)``; row ``k`` belongs to path ``indices[k]``."""
        if indices is None:
            indices = range(self.n_paths)
        indices = list(indices)
        n_steps = self.n_steps if n_steps is None else int(n_steps)
        n_blocks = -(-n_steps // self.cfg.block)
        for i in indices:
            if not 0 <= i < self.n_paths:
                raise IndexError(f"path {i} outside the ensemble")
        if self.workers == 1 or len(indices) < 2 * self.workers:
            rows = [self._path_blocks(i, n_blocks, 0)[:n_steps] for i in indices]
        else:
            with ThreadPoolExecutor(self.workers) as pool:
                rows = list(pool.map(lambda i: self._path_blocks(i, n_blocks, 0)[:n_steps], indices))
        return np.vstack(rows) if rows else np.empty((0, n_steps))

    def paths(self, indices=None, n_steps: int | None = None) -> np.ndarray:
        """Cumulative paths with a leading zero column."""
        inc = self.increments(indices, n_steps)
        out = np.zeros((inc.shape[0], inc.shape[1] + 1))
        if self.cfg.kind == "rademacher":
            # integer partial sums so that lattice zeros are exactly zero
            h = math.sqrt(self.cfg.dt)
            out[:, 1:] = np.cumsum(np.rint(inc / h).astype(np.int64), axis=1) * h
        else:
            np.cumsum(inc, axis=1, out=out[:, 1:])
        return out

    def chunks(self, size: int = 4096):
        """Yield ``(indices, increments)`` over consecutive path ranges."""
        for start in range(0, self.n_paths, size):
            idx = np.arange(start, min(start + size, self.n_paths))
            yield idx, self.increments(idx)

    def uniforms(self, indices, stream: int = 1) -> np.ndarray:
        """One auxiliary uniform per path, independent of its increments."""
        return np.array([np.random.default_rng([self.cfg.seed, i, 2 ** 32 + stream]).random()
                         for i in indices])


def simulate_paths(cfg: EnsembleConfig, workers: int = 1) -> PathEnsemble:
    return PathEnsemble(cfg, workers)


def quadratic_variation(paths: np.ndarray) -> np.ndarray:
    """Realized quadratic variation per path."""
    return np.sum(np.diff(paths, axis=1) ** 2, axis=1)

"""Random number lists that seed synthetic context generation.

The list length is drawn from the discrete uniform distribution on
[n_min, n_max]; each element independently from the uniform distribution on
[v_min, v_max]. Values are integers by default, with an option for
fixed-decimal reals, because integer lists serialize unambiguously into
prompts. The generator is NumPy's PCG64 (``numpy.random.default_rng``), so a
fixed seed replays the exact sequence for dataset audits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ListGenConfig:
    n_min: int
    n_max: int
    v_min: float
    v_max: float
    seed: int | None = None
    decimals: int = 0  # 0 = integer values, k>0 = values rounded to k decimals

    def validate(self) -> None:
        if self.n_min < 1:
            raise ConfigError("listgen.n_min: must be >= 1")
        if self.n_min > self.n_max:
            raise ConfigError("listgen.n_min: must not exceed n_max")
        if self.v_min > self.v_max:
            raise ConfigError("listgen.v_min: must not exceed v_max")
        if self.decimals < 0:
            raise ConfigError("listgen.decimals: must be >= 0")


@dataclass(frozen=True)
class RandomList:
    values: tuple

    def __len__(self) -> int:
        return len(self.values)


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def generate_list(cfg: ListGenConfig, rng: np.random.Generator | None = None) -> RandomList:
    """Draw one list; deterministic for a given (cfg.seed, draw order)."""
    cfg.validate()
    if rng is None:
        rng = make_rng(cfg.seed)
    n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
    if cfg.decimals == 0:
        values = rng.integers(int(cfg.v_min), int(cfg.v_max) + 1, size=n)
        return RandomList(values=tuple(int(v) for v in values))
    values = rng.uniform(cfg.v_min, cfg.v_max, size=n)
    return RandomList(values=tuple(round(float(v), cfg.decimals) for v in values))


def generate_lists(cfg: ListGenConfig, count: int) -> list[RandomList]:
    """Draw ``count`` lists from one seeded stream."""
    cfg.validate()
    if count < 1:
        raise ConfigError("listgen count must be >= 1")
    rng = make_rng(cfg.seed)
    return [generate_list(cfg, rng) for _ in range(count)]

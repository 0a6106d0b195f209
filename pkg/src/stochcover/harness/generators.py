"""Seeded random instance families.

Coverability holds by construction: every coverage element is placed in all
states of one designated item, and truncated-additive goals never exceed the
worst-case gain sum.  Real-valued gains and weights are multiples of 1/8 so
partial sums are exact in double precision.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..errors import GenerationFailed
from ..instance import Instance, validate_instance
from ..utility import StochasticCoverage, TruncatedAdditive

KINDS = ("coverage", "truncated_additive", "classical_set_cover")
MAX_RETRIES = 50


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str = "coverage"
    n: int = 4
    k: int = 2
    m: int = 6
    cost_lo: float = 0.5
    cost_hi: float = 4.0
    density: float = 0.3
    integer: bool = True
    zero_prob_rate: float = 0.15
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _probabilities(rng: np.random.Generator, n: int, k: int, zero_rate: float) -> list:
    rows = []
    for _ in range(n):
        p = rng.dirichlet(np.ones(k))
        if k > 1 and rng.random() < zero_rate:
            p[rng.integers(k)] = 0.0
        p = p / p.sum()
        rows.append([float(x) for x in p])
    return rows


def _costs(rng: np.random.Generator, cfg: GeneratorConfig) -> list:
    return [round(float(rng.uniform(cfg.cost_lo, cfg.cost_hi)), 4) or cfg.cost_lo for _ in range(cfg.n)]


def _coverage(rng: np.random.Generator, cfg: GeneratorConfig, k: int, integer: bool) -> StochasticCoverage:
    cover = [[set() for _ in range(k)] for _ in range(cfg.n)]
    for d in range(cfg.m):
        owner = int(rng.integers(cfg.n))
        for o in range(k):
            cover[owner][o].add(d)
        for e in range(cfg.n):
            for o in range(k):
                if rng.random() < cfg.density:
                    cover[e][o].add(d)
    if integer:
        weights = [1.0] * cfg.m
    else:
        weights = [float(rng.integers(1, 25)) / 8.0 for _ in range(cfg.m)]
    return StochasticCoverage(weights, [[sorted(cs) for cs in row] for row in cover])


def _truncated(rng: np.random.Generator, cfg: GeneratorConfig, probs: list) -> Optional[TruncatedAdditive]:
    if cfg.integer:
        gains = rng.integers(0, 5, size=(cfg.n, cfg.k)).astype(float)
    else:
        gains = rng.integers(0, 33, size=(cfg.n, cfg.k)) / 8.0
    worst = 0.0
    for e in range(cfg.n):
        support = [o for o in range(cfg.k) if probs[e][o] > 0]
        worst += min(gains[e, o] for o in support)
    if worst <= 0:
        return None
    unit = 1.0 if cfg.integer else 0.125
    steps = int(worst / unit)
    # goal in [3/4 worst, worst], on the same grid as the gains
    Q = unit * int(rng.integers((3 * steps + 3) // 4, steps + 1))
    if Q <= 0:
        return None
    return TruncatedAdditive(Q, gains.tolist())


def gen_instance(cfg: GeneratorConfig) -> Instance:
    if cfg.kind not in KINDS:
        raise ValueError(f"unknown generator kind {cfg.kind!r}")
    rng = np.random.default_rng(cfg.seed)
    for _ in range(MAX_RETRIES):
        if cfg.kind == "classical_set_cover":
            probs = [[1.0] for _ in range(cfg.n)]
            utility = _coverage(rng, cfg, 1, True)
            integer = True
        else:
            probs = _probabilities(rng, cfg.n, cfg.k, cfg.zero_prob_rate)
            if cfg.kind == "coverage":
                utility = _coverage(rng, cfg, cfg.k, cfg.integer)
            else:
                utility = _truncated(rng, cfg, probs)
                if utility is None:
                    continue
            integer = cfg.integer
        inst = Instance(_costs(rng, cfg), probs, utility, integer_valued=integer, meta={"generator": cfg.to_dict()})
        if not validate_instance(inst):
            return inst
    raise GenerationFailed(f"no valid instance after {MAX_RETRIES} attempts for {cfg}")


FAMILIES = (
    ("coverage", True),
    ("coverage", False),
    ("truncated_additive", False),
    ("truncated_additive", True),
    ("classical_set_cover", True),
)


def corpus(count: int, seed: int = 0, n_max: int = 5, k_max: int = 3, m_max: int = 8, families=FAMILIES) -> list:
    """A reproducible mixed-family list of small instances."""
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(count):
        kind, integer = families[idx % len(families)]
        # mostly near the size cap, where trees branch the most
        lo = 1 if idx % 7 == 0 else max(1, n_max - 2)
        n = int(rng.integers(lo, n_max + 1))
        k = 1 if kind == "classical_set_cover" else int(rng.integers(1, k_max + 1))
        m = int(rng.integers(max(1, m_max // 2), m_max + 1))
        cfg = GeneratorConfig(
            kind=kind, n=n, k=k, m=m, density=0.15, integer=integer, seed=int(rng.integers(2**31))
        )
        out.append(gen_instance(cfg))
    return out

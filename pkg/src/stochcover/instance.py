"""Items, states, costs and the independent state distribution.

A realization is stored as a plain tuple ``states`` with ``states[e]`` the
state of item ``e``.  Partial observations are :class:`Subrealization`
objects whose canonical form (pairs sorted by item) doubles as a
memoization key everywhere else in the package.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator, Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, ItemAlreadyAssigned

DEFAULT_BUDGET = 10**6
PROB_SUM_TOL = 1e-12
GOAL_TOL = 1e-12

Realization = tuple  # tuple[int, ...], one state index per item


@dataclass(frozen=True, slots=True)
class Subrealization:
    """Partial assignment of states to items, kept sorted by item index."""

    pairs: tuple = ()

    @classmethod
    def from_pairs(cls, pairs) -> "Subrealization":
        pairs = tuple(sorted((int(e), int(o)) for e, o in pairs))
        items = [e for e, _ in pairs]
        if len(set(items)) != len(items):
            raise ItemAlreadyAssigned(f"duplicate item in {pairs}")
        return cls(pairs)

    @classmethod
    def from_realization(cls, phi: Sequence[int], items=None) -> "Subrealization":
        if items is None:
            items = range(len(phi))
        return cls(tuple((e, phi[e]) for e in sorted(items)))

    def extend(self, e: int, o: int) -> "Subrealization":
        if self.state_of(e) is not None:
            raise ItemAlreadyAssigned(f"item {e} already observed in {self.pairs}")
        out = list(self.pairs)
        # insertion keeps the canonical order
        pos = 0
        while pos < len(out) and out[pos][0] < e:
            pos += 1
        out.insert(pos, (e, o))
        return Subrealization(tuple(out))

    def state_of(self, e: int) -> Optional[int]:
        for item, o in self.pairs:
            if item == e:
                return o
        return None

    @property
    def dom(self) -> frozenset:
        return frozenset(e for e, _ in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def issubset(self, other: "Subrealization") -> bool:
        return set(self.pairs) <= set(other.pairs)

    def consistent_with(self, phi: Sequence[int]) -> bool:
        """True when every observed state agrees with the realization."""
        return all(phi[e] == o for e, o in self.pairs)

    def to_list(self) -> list:
        return [list(p) for p in self.pairs]

    def __repr__(self) -> str:
        inner = ", ".join(f"(e{e},o{o})" for e, o in self.pairs)
        return "{" + inner + "}"


EMPTY = Subrealization()


def extend(psi: Subrealization, e: int, o: int) -> Subrealization:
    return psi.extend(e, o)


@dataclass(frozen=True, eq=False)
class Instance:
    """A Stochastic Submodular Cover instance.

    Parameters
    ----------
    costs : sequence of float
        Positive cost per item.
    probs : n x k nested sequence
        ``probs[e][o]`` is the marginal probability that item ``e`` is in
        state ``o``.  States of distinct items are independent; no joint
        table is ever stored.
    utility : UtilityModel
        Oracle returning the utility of a subrealization.
    integer_valued : bool
        Whether the utility only takes integer values.
    declared_eta : float, optional
        Fallback minimum goal gap when exact computation is out of budget.
    """

    costs: tuple
    probs: tuple
    utility: Any
    integer_valued: bool = False
    declared_eta: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))
        object.__setattr__(self, "probs", tuple(tuple(float(p) for p in row) for row in self.probs))

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def k(self) -> int:
        return len(self.probs[0]) if self.probs else 0

    @cached_property
    def supports(self) -> tuple:
        """Positive-probability states of each item, in state order."""
        return tuple(tuple(o for o, p in enumerate(row) if p > 0.0) for row in self.probs)

    def cost(self, e: int) -> float:
        return self.costs[e]

    def prob(self, e: int, o: int) -> float:
        return self.probs[e][o]

    def f(self, psi: Subrealization) -> float:
        return self.utility.evaluate(psi)

    def is_cover(self, psi: Subrealization) -> bool:
        return reaches_goal(self.f(psi), self.Q)

    @cached_property
    def Q(self) -> float:
        from .utility import goal_value

        return goal_value(self)

    def realization_count(self) -> int:
        return self.k**self.n


def reaches_goal(value: float, goal: float) -> bool:
    """Utility comparison against the goal, absorbing last-bit rounding."""
    return value >= goal - GOAL_TOL * max(1.0, abs(goal))


def realization_probability(inst: Instance, phi: Sequence[int]) -> float:
    p = 1.0
    for e, o in enumerate(phi):
        p *= inst.probs[e][o]
    return p


def subrealization_probability(inst: Instance, psi: Subrealization) -> float:
    """Probability that the random realization extends ``psi``."""
    p = 1.0
    for e, o in psi.pairs:
        p *= inst.probs[e][o]
    return p


def enumerate_realizations(inst: Instance, budget: int = DEFAULT_BUDGET) -> Iterator[tuple]:
    """Yield ``(phi, P[phi])`` for every positive-probability realization.

    Order is lexicographic with item 0 most significant.
    """
    if inst.realization_count() > budget:
        raise BudgetExceeded(f"k^n = {inst.k}^{inst.n} exceeds budget {budget}")
    for phi in itertools.product(*inst.supports):
        yield phi, realization_probability(inst, phi)


def realization_table(inst: Instance, budget: int = DEFAULT_BUDGET) -> tuple:
    """All realizations and their probabilities as ``(list, ndarray)``."""
    phis, probs = [], []
    for phi, p in enumerate_realizations(inst, budget):
        phis.append(phi)
        probs.append(p)
    return phis, np.asarray(probs, dtype=float)


def trial_stream(seed: int, trial: int) -> np.random.Generator:
    """Independent random stream for one Monte Carlo trial."""
    return np.random.default_rng([int(seed), int(trial)])


def sample_realization(inst: Instance, stream: np.random.Generator) -> Realization:
    u = stream.random(inst.n)
    return tuple(_draw_state(inst.probs[e], u[e]) for e in range(inst.n))


def _draw_state(row, u: float) -> int:
    acc = 0.0
    last = 0
    for o, p in enumerate(row):
        if p <= 0.0:
            continue
        acc += p
        last = o
        if u < acc:
            return o
    return last


def sample_matrix(inst: Instance, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized draw of ``trials`` realizations, shape ``(trials, n)``."""
    u = rng.random((trials, inst.n))
    out = np.empty((trials, inst.n), dtype=np.int64)
    for e, row in enumerate(inst.probs):
        cdf = np.cumsum(row)
        cdf[-1] = max(cdf[-1], 1.0)
        idx = np.searchsorted(cdf, u[:, e], side="right")
        np.minimum(idx, len(row) - 1, out=idx)
        # never land on a zero-probability state through rounding
        support = inst.supports[e]
        bad = np.isin(idx, support, invert=True)
        if bad.any():
            idx[bad] = support[-1]
        out[:, e] = idx
    return out


def validate_instance(inst: Instance) -> list:
    """Structural problems with costs and marginals, as readable strings."""
    problems = []
    if inst.n == 0:
        problems.append("instance has no items")
    for e, c in enumerate(inst.costs):
        if not (c > 0.0) or math.isinf(c):
            problems.append(f"item {e}: cost {c} is not a finite positive number")
    for e, row in enumerate(inst.probs):
        if len(row) != inst.k:
            problems.append(f"item {e}: expected {inst.k} state probabilities, got {len(row)}")
            continue
        for o, p in enumerate(row):
            if not (0.0 <= p <= 1.0):
                problems.append(f"item {e} state {o}: probability {p} outside [0, 1]")
        s = math.fsum(row)
        if abs(s - 1.0) > PROB_SUM_TOL:
            problems.append(f"item {e}: probabilities sum to {s!r}, not 1")
    return problems

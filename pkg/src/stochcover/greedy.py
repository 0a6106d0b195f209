"""Adaptive Greedy: unit prices and exact / alpha-approximate selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NoProgressPossible
from .instance import Instance, Subrealization
from .utility import expected_marginal

INFINITE_PRICE = math.inf


def unit_price(inst: Instance, psi: Subrealization, e: int) -> float:
    """Cost per unit of expected marginal utility; ``inf`` when nothing is gained."""
    gain = expected_marginal(inst, psi, e)
    if gain <= 0.0:
        return INFINITE_PRICE
    return inst.costs[e] / gain


@dataclass(frozen=True)
class Selector:
    """How to pick among remaining items.

    ``exact`` takes the minimum price (lowest index on ties).  ``adversarial``
    takes the *highest* price that is still within ``alpha`` times the
    minimum, which is the worst choice an alpha-approximate oracle may make.
    """

    kind: str = "exact"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exact", "adversarial"):
            raise ValueError(f"unknown selector {self.kind!r}")
        if not self.alpha >= 1.0:
            raise ValueError("alpha must be >= 1")
        if self.kind == "exact" and self.alpha != 1.0:
            raise ValueError("the exact selector has alpha = 1")

    @classmethod
    def exact(cls) -> "Selector":
        return cls("exact", 1.0)

    @classmethod
    def adversarial(cls, alpha: float) -> "Selector":
        return cls("adversarial", float(alpha))


def prices(inst: Instance, psi: Subrealization) -> dict:
    dom = psi.dom
    return {e: unit_price(inst, psi, e) for e in range(inst.n) if e not in dom}


def greedy_select(inst: Instance, psi: Subrealization, sel: Selector = Selector()) -> int:
    table = prices(inst, psi)
    best = min(table.values(), default=INFINITE_PRICE)
    if best == INFINITE_PRICE:
        raise NoProgressPossible(f"every remaining item has zero expected gain at {psi!r}")
    if sel.kind == "exact":
        return min(e for e, v in table.items() if v == best)
    cap = sel.alpha * best
    allowed = {e: v for e, v in table.items() if v <= cap}
    worst = max(allowed.values())
    return min(e for e, v in allowed.items() if v == worst)


class GreedyPolicy:
    """The adaptive greedy policy; choices are memoized per subrealization."""

    def __init__(self, inst: Instance, sel: Selector = Selector()):
        self.inst = inst
        self.selector = sel
        self._memo: dict = {}

    @property
    def alpha(self) -> float:
        return self.selector.alpha

    def __call__(self, psi: Subrealization) -> int:
        try:
            return self._memo[psi]
        except KeyError:
            e = greedy_select(self.inst, psi, self.selector)
            self._memo[psi] = e
            return e


def greedy_policy(inst: Instance, sel: Selector = Selector()) -> GreedyPolicy:
    return GreedyPolicy(inst, sel)


def audit_greedy_choices(inst: Instance, tree, alpha: float, tol: float = 1e-12) -> list:
    """Nodes where the chosen price exceeds ``alpha`` times the minimum price."""
    bad = []
    for nd in tree.nonleaves():
        table = prices(inst, nd.psi)
        chosen = table[nd.item]
        if not chosen <= alpha * min(table.values()) + tol:
            bad.append((nd.psi, nd.item, chosen, min(table.values())))
    return bad

"""Exact minimum-expected-cost covering policy by memoized recursion.

Because item states are independent and utility depends only on the observed
pairs, the optimal continuation from a subrealization is a function of its
canonical pairs alone, so the search collapses onto the subrealization lattice.
"""

from __future__ import annotations

from .errors import BudgetExceeded, NoProgressPossible, PolicyIncomplete
from .instance import DEFAULT_BUDGET, EMPTY, Instance, Subrealization


class ValueTable(dict):
    """``pairs -> (remaining expected cost, best item or None)``."""

    def value(self, psi: Subrealization) -> float:
        return self[psi.pairs][0]

    def best_item(self, psi: Subrealization):
        return self[psi.pairs][1]


def optimal_value(inst: Instance, budget: int = DEFAULT_BUDGET):
    """Return ``(E[C(pi*)], table)``; ties go to the lowest item index."""
    if (inst.k + 1) ** inst.n > budget:
        raise BudgetExceeded(f"(k+1)^n = {(inst.k + 1) ** inst.n} exceeds budget {budget}")
    table = ValueTable()
    costs, probs, supports = inst.costs, inst.probs, inst.supports

    def solve(psi: Subrealization) -> float:
        hit = table.get(psi.pairs)
        if hit is not None:
            return hit[0]
        if inst.is_cover(psi):
            table[psi.pairs] = (0.0, None)
            return 0.0
        dom = psi.dom
        if len(dom) == inst.n:
            raise NoProgressPossible(f"{psi!r} observes every item without reaching the goal")
        best_val, best_item = None, None
        for e in range(inst.n):
            if e in dom:
                continue
            v = costs[e]
            for o in supports[e]:
                v += probs[e][o] * solve(psi.extend(e, o))
            if best_val is None or v < best_val:
                best_val, best_item = v, e
        table[psi.pairs] = (best_val, best_item)
        return best_val

    return solve(EMPTY), table


class OptimalPolicy:
    """Reads choices from a :class:`ValueTable` built by :func:`optimal_value`."""

    def __init__(self, inst: Instance, table: ValueTable, value: float):
        self.inst = inst
        self.table = table
        self.value = value

    def __call__(self, psi: Subrealization) -> int:
        entry = self.table.get(psi.pairs)
        if entry is None or entry[1] is None:
            raise PolicyIncomplete(f"no optimal choice stored for {psi!r}")
        return entry[1]


def optimal_policy(inst: Instance, budget: int = DEFAULT_BUDGET) -> OptimalPolicy:
    value, table = optimal_value(inst, budget)
    return OptimalPolicy(inst, table, value)


def memo_residuals(inst: Instance, table: ValueTable) -> float:
    """Largest discrepancy when each stored value is recomputed from its children."""
    worst = 0.0
    for pairs, (v, e) in table.items():
        if e is None:
            continue
        psi = Subrealization(pairs)
        again = inst.costs[e] + sum(inst.probs[e][o] * table[psi.extend(e, o).pairs][0] for o in inst.supports[e])
        worst = max(worst, abs(again - v))
    return worst

"""The two fully specified worked scenarios, rebuilt and checked.

``figure_example`` is a three-item policy with goal 10 whose non-leaf nodes
sit at utilities 0, 3, 1, 1.  ``appendix_b`` is a fixed realization of three
stochastic subsets over six elements on which a set-cover charging identity
from earlier work fails (6 on the left, 2 on the right).
"""

from __future__ import annotations

import itertools

from ..accounting import build_markers, leadsto
from ..errors import ReproductionMismatch
from ..greedy import Selector, greedy_select, prices
from ..instance import EMPTY, Instance
from ..optimal import optimal_policy
from ..policy import TablePolicy, execute, expected_cost_exact, materialize_tree
from ..utility import ExplicitTable, StochasticCoverage

# item 0 lands at +3 or +1, item 1 always closes the gap, item 2 adds nothing
_FIGURE_GAINS = ((3.0, 1.0), (9.0, 9.0), (0.0, 0.0))
_FIGURE_PROBS = ((0.5, 0.5), (1.0, 0.0), (1.0, 0.0))
FIGURE_Q = 10.0


def figure_instance() -> Instance:
    """Three items, two states, utility given as an explicit table."""
    entries = {}
    options = [(None,) + tuple(o for o, p in enumerate(row) if p > 0) for row in _FIGURE_PROBS]
    for combo in itertools.product(*options):
        rel = tuple((e, o) for e, o in enumerate(combo) if o is not None)
        entries[rel] = min(FIGURE_Q, sum(_FIGURE_GAINS[e][o] for e, o in rel))
    return Instance((1.0, 1.0, 1.0), _FIGURE_PROBS, ExplicitTable(FIGURE_Q, entries), integer_valued=True)


def figure_policy() -> TablePolicy:
    return TablePolicy(
        {
            (): 0,
            ((0, 0),): 1,
            ((0, 1),): 2,
            ((0, 1), (2, 0)): 1,
        }
    )


FIGURE_NAMES = {
    (): "psi1",
    ((0, 0),): "psi2",
    ((0, 1),): "psi3",
    ((0, 1), (2, 0)): "psi4",
    ((0, 0), (1, 0)): "psi5",
    ((0, 1), (1, 0), (2, 0)): "psi6",
}


def _expect(label: str, got, want):
    if got != want:
        raise ReproductionMismatch(f"{label}: got {got!r}, expected {want!r}")


def reproduce_figure_example() -> dict:
    inst = figure_instance()
    tree = materialize_tree(inst, figure_policy())
    name = lambda psi: FIGURE_NAMES[psi.pairs]  # noqa: E731

    node_values = {name(nd.psi): nd.value for nd in tree.nonleaves()}
    _expect("non-leaf nodes", sorted(node_values), ["psi1", "psi2", "psi3", "psi4"])
    _expect("node utilities", [node_values[k] for k in ("psi1", "psi2", "psi3", "psi4")], [0.0, 3.0, 1.0, 1.0])

    ms = build_markers(tree)
    markers = [name(psi) for psi in ms.markers]
    _expect("marker order", markers, ["psi1", "psi3", "psi4", "psi2"])
    _expect("marker positions", ms.positions, [0.0, 1.0, 1.0, 3.0, 10.0])
    _expect("gaps", ms.eps, [1.0, 0.0, 2.0, 7.0])
    _expect("gap sum", sum(ms.eps), FIGURE_Q)

    patterns = {}
    for phi, leaf in (((0, 0, 0), "psi5"), ((1, 0, 0), "psi6")):
        trace = execute(inst, figure_policy(), phi)
        _expect(f"cover for {phi}", name(trace.cover), leaf)
        lead = [name(leadsto(inst, trace, ms, i)) for i in range(len(ms))]
        gains = [inst.f(b) - inst.f(a) for a, b in zip(trace.visited, trace.visited[1:])]
        patterns[leaf] = {
            "visited": [name(p) for p in trace.visited[:-1]],
            "leadsto": lead,
            "utility_increments": gains,
        }
    _expect("visited on the way to psi5", patterns["psi5"]["visited"], ["psi1", "psi2"])
    _expect("increments on the way to psi5", patterns["psi5"]["utility_increments"], [3.0, 7.0])
    _expect("leadsto toward psi5", patterns["psi5"]["leadsto"], ["psi1", "psi1", "psi1", "psi2"])
    _expect("visited on the way to psi6", patterns["psi6"]["visited"], ["psi1", "psi3", "psi4"])
    _expect("leadsto toward psi6", patterns["psi6"]["leadsto"], ["psi1", "psi4", "psi4", "psi4"])

    return {
        "Q": FIGURE_Q,
        "node_utilities": node_values,
        "markers": markers,
        "marker_positions": ms.positions[:-1],
        "extra_marker": ms.positions[-1],
        "eps": ms.eps,
        "eps_sum": sum(ms.eps),
        "terminations": patterns,
        "expected_cost": expected_cost_exact(inst, tree),
        "ok": True,
    }


# ---------------------------------------------------------------------------

APPENDIX_SETS = ((0, 1, 2, 5), (2, 3, 5), (0, 1, 4))  # S1, S2, S3 over elements e1..e6
APPENDIX_GREEDY_ORDER = (0, 2, 1)  # S1, S3, S2
APPENDIX_OPT = frozenset({1, 2})  # S2, S3


def appendix_instance() -> Instance:
    """Deterministic embedding of the fixed realization, unit costs."""
    return Instance(
        (1.0, 1.0, 1.0),
        ((1.0,), (1.0,), (1.0,)),
        StochasticCoverage([1.0] * 6, [[list(s)] for s in APPENDIX_SETS]),
        integer_valued=True,
    )


def reproduce_appendix_b(j: int = 1) -> dict:
    inst = appendix_instance()
    m = 6
    first_cover = {}
    seen = set()
    order_valid = True
    psi = EMPTY
    for s in APPENDIX_GREEDY_ORDER:
        # the stated order must be a legal greedy order (ties allowed)
        table = prices(inst, psi)
        order_valid &= table[s] == min(table.values())
        for d in APPENDIX_SETS[s]:
            if d not in seen:
                seen.add(d)
                first_cover[d] = s
        psi = psi.extend(s, 0)
    covered_order = sorted(first_cover, key=lambda d: (APPENDIX_GREEDY_ORDER.index(first_cover[d]), d))
    m_last = covered_order[j - 1 :]
    upsilon = APPENDIX_OPT & set(APPENDIX_GREEDY_ORDER)
    cov = {s: sum(1 for d in m_last if first_cover[d] == s) for s in sorted(upsilon)}
    not_chosen = set(range(3)) - set(APPENDIX_GREEDY_ORDER)
    lhs = m - j + 1
    rhs = sum(cov.values()) + 0 * len(not_chosen)  # optcov terms vanish: nothing left unchosen

    opt = optimal_policy(inst)
    opt_trace = execute(inst, opt, (0, 0, 0))
    first_pick = greedy_select(inst, EMPTY, Selector.exact())
    first_price = prices(inst, EMPTY)[first_pick]

    _expect("|M_last|", len(m_last), 6)
    _expect("cov(S2)", cov[1], 1)
    _expect("cov(S3)", cov[2], 1)
    _expect("unchosen subsets", sorted(not_chosen), [])
    _expect("LHS", lhs, 6)
    _expect("RHS", rhs, 2)
    _expect("stated order is a greedy order", order_valid, True)
    _expect("greedy first pick", first_pick, 0)
    _expect("greedy first price", first_price, 0.25)
    _expect("optimal cost", opt.value, 2.0)
    _expect("optimal items", sorted(opt_trace.selected), sorted(APPENDIX_OPT))

    return {
        "j": j,
        "M_last": [f"e{d + 1}" for d in m_last],
        "upsilon": [f"S{s + 1}" for s in sorted(upsilon)],
        "cov": {f"S{s + 1}": c for s, c in cov.items()},
        "unchosen": sorted(not_chosen),
        "lhs": lhs,
        "rhs": rhs,
        "identity": "m - j + 1 = sum of cov over Upsilon + sum of optcov over unchosen subsets",
        "identity_holds": lhs == rhs,
        "shortfall": lhs - rhs,
        "greedy_first_pick": f"S{first_pick + 1}",
        "greedy_first_price": first_price,
        "optimal_cost": opt.value,
        "optimal_items": [f"S{s + 1}" for s in sorted(opt_trace.selected)],
        "ok": True,
    }

"""Adaptive covering policies, their decision trees, and expected cost.

A policy is any callable mapping a non-cover :class:`Subrealization` to the
next item to select.  :func:`materialize_tree` expands it breadth-first into
an explicit :class:`PolicyTree`; all exact accounting works on trees.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, NonCoveringPolicy, PolicyIncomplete
from .instance import EMPTY, Instance, Subrealization, enumerate_realizations, sample_matrix

DEFAULT_NODE_BUDGET = 10**5

Policy = Callable[[Subrealization], int]


class TablePolicy:
    """Policy backed by an explicit ``{pairs: item}`` mapping."""

    def __init__(self, choices: dict):
        self.choices = {Subrealization.from_pairs(k).pairs: int(v) for k, v in choices.items()}

    def __call__(self, psi: Subrealization) -> int:
        try:
            return self.choices[psi.pairs]
        except KeyError:
            raise PolicyIncomplete(f"no choice recorded for {psi!r}") from None


@dataclass
class Node:
    psi: Subrealization
    value: float
    prob: float
    depth: int
    order: int  # breadth-first discovery index
    item: Optional[int] = None
    children: dict = field(default_factory=dict)  # state -> Subrealization

    @property
    def is_leaf(self) -> bool:
        return self.item is None


@dataclass
class PolicyTree:
    """Materialized decision tree; ``nodes`` is in breadth-first order."""

    inst: Instance
    nodes: dict

    @property
    def root(self) -> Node:
        return self.nodes[EMPTY]

    def node(self, psi: Subrealization) -> Node:
        return self.nodes[psi]

    def nonleaves(self) -> list:
        return [nd for nd in self.nodes.values() if not nd.is_leaf]

    def leaves(self) -> list:
        return [nd for nd in self.nodes.values() if nd.is_leaf]

    def __len__(self) -> int:
        return len(self.nodes)

    def as_policy(self) -> Policy:
        def choose(psi: Subrealization) -> int:
            nd = self.nodes.get(psi)
            if nd is None or nd.is_leaf:
                raise PolicyIncomplete(f"{psi!r} is not a non-leaf node of the tree")
            return nd.item

        return choose

    def walk(self, phi: Sequence[int]) -> list:
        """Nodes visited when executing the tree on realization ``phi``."""
        nd = self.root
        path = [nd]
        while not nd.is_leaf:
            nd = self.nodes[nd.children[phi[nd.item]]]
            path.append(nd)
        return path

    def to_dict(self) -> dict:
        index = {psi: nd.order for psi, nd in self.nodes.items()}
        return {
            "nodes": [
                {
                    "id": nd.order,
                    "rel": nd.psi.to_list(),
                    "value": nd.value,
                    "reach_probability": nd.prob,
                    "item": nd.item,
                    "children": {str(o): index[c] for o, c in nd.children.items()},
                }
                for nd in self.nodes.values()
            ]
        }


def materialize_tree(inst: Instance, policy: Policy, budget: int = DEFAULT_NODE_BUDGET) -> PolicyTree:
    """Expand ``policy`` into its decision tree.

    Children exist only for positive-probability states.  Raises
    :class:`NonCoveringPolicy` when a branch runs out of items below the
    goal and :class:`PolicyIncomplete` when the policy has no answer.
    """
    nodes: dict = {}
    queue = deque([(EMPTY, 1.0, 0)])
    while queue:
        psi, prob, depth = queue.popleft()
        if len(nodes) >= budget:
            raise BudgetExceeded(f"policy tree exceeds {budget} nodes")
        value = inst.f(psi)
        nd = Node(psi, value, prob, depth, len(nodes))
        nodes[psi] = nd
        if inst.is_cover(psi):
            continue
        if len(psi) == inst.n:
            raise NonCoveringPolicy(f"{psi!r} observes every item but f = {value} < Q = {inst.Q}")
        e = policy(psi)
        if e is None:
            raise PolicyIncomplete(f"policy undefined at {psi!r}")
        if psi.state_of(e) is not None:
            raise PolicyIncomplete(f"policy reselects item {e} at {psi!r}")
        nd.item = int(e)
        for o in inst.supports[e]:
            child = psi.extend(e, o)
            nd.children[o] = child
            queue.append((child, prob * inst.probs[e][o], depth + 1))
    return PolicyTree(inst, nodes)


@dataclass
class ExecutionTrace:
    """Subrealizations visited by one execution, root first, cover last."""

    visited: list
    cost: float

    @property
    def cover(self) -> Subrealization:
        return self.visited[-1]

    @property
    def selected(self) -> frozenset:
        return self.cover.dom

    @property
    def selection_order(self) -> list:
        out = []
        for a, b in zip(self.visited, self.visited[1:]):
            (e,) = b.dom - a.dom
            out.append(e)
        return out


def execute(inst: Instance, policy: Policy, phi: Sequence[int]) -> ExecutionTrace:
    psi = EMPTY
    visited = [psi]
    cost = 0.0
    while not inst.is_cover(psi):
        if len(psi) == inst.n:
            raise NonCoveringPolicy(f"{psi!r} observes every item but is not a cover")
        e = policy(psi)
        if e is None:
            raise PolicyIncomplete(f"policy undefined at {psi!r}")
        psi = psi.extend(e, phi[e])
        cost += inst.costs[e]
        visited.append(psi)
    return ExecutionTrace(visited, cost)


def trace_from_tree(tree: PolicyTree, phi: Sequence[int]) -> ExecutionTrace:
    path = tree.walk(phi)
    costs = tree.inst.costs
    cost = 0.0
    for nd in path[:-1]:
        cost += costs[nd.item]
    return ExecutionTrace([nd.psi for nd in path], cost)


def expected_cost_exact(inst: Instance, tree: PolicyTree) -> float:
    """Expected cost, computed over leaves and over internal nodes.

    The two sums must agree to 1e-12 (relative); the node form is returned.
    """
    node_sum = math.fsum(nd.prob * inst.costs[nd.item] for nd in tree.nonleaves())
    leaf_sum = math.fsum(nd.prob * sum(inst.costs[e] for e in nd.psi.dom) for nd in tree.leaves())
    if abs(node_sum - leaf_sum) > 1e-12 * max(1.0, abs(node_sum)):
        raise ArithmeticError(f"leaf-sum {leaf_sum!r} and node-sum {node_sum!r} disagree")
    return node_sum


def expected_cost_enumerated(inst: Instance, policy: Policy, budget: int = 10**6) -> float:
    """Expected cost by executing the policy on every realization."""
    return math.fsum(p * execute(inst, policy, phi).cost for phi, p in enumerate_realizations(inst, budget))


def _tree_arrays(tree: PolicyTree):
    index = {psi: nd.order for psi, nd in tree.nodes.items()}
    size = len(tree.nodes)
    k = tree.inst.k
    item = np.full(size, -1, dtype=np.int64)
    step_cost = np.zeros(size)
    child = np.full((size, k), -1, dtype=np.int64)
    for nd in tree.nodes.values():
        if nd.is_leaf:
            continue
        item[nd.order] = nd.item
        step_cost[nd.order] = tree.inst.costs[nd.item]
        for o, c in nd.children.items():
            child[nd.order, o] = index[c]
    return item, step_cost, child


def expected_cost_mc(inst: Instance, policy: Policy, trials: int, seed: int, tree: Optional[PolicyTree] = None):
    """Monte Carlo estimate ``(mean, standard error)`` of the policy's cost.

    Realizations are drawn from one generator seeded with ``seed``; the
    result is bit-identical for a fixed ``(seed, trials)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if tree is None:
        tree = materialize_tree(inst, policy)
    item, step_cost, child = _tree_arrays(tree)
    states = sample_matrix(inst, trials, np.random.default_rng(seed))
    rows = np.arange(trials)
    node = np.zeros(trials, dtype=np.int64)
    cost = np.zeros(trials)
    active = item[node] >= 0
    while active.any():
        idx = rows[active]
        cur = node[idx]
        cost[idx] += step_cost[cur]
        node[idx] = child[cur, states[idx, item[cur]]]
        active = item[node] >= 0
    mean = float(cost.mean())
    stderr = float(cost.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return mean, stderr

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import additive
from oracles import joint_table, last_visited_at_most
from stochcover.accounting import (
    HybridPolicy,
    LEMMAS,
    build_ledger,
    build_markers,
    delta_plus,
    greedy_prices,
    harmonic,
    kappa,
    lambda_revenues,
    leadsto,
    marker_ratio_sum,
    mu_revenues,
    verify_all,
    verify_fact_mediant,
    verify_ledger,
    verify_lemma,
    verify_sum_bound,
)
from stochcover.errors import DomainError
from stochcover.greedy import Selector, greedy_policy, unit_price
from stochcover.harness.repro import appendix_instance, figure_instance, figure_policy
from stochcover.instance import EMPTY, Subrealization
from stochcover.optimal import optimal_policy
from stochcover.policy import execute, materialize_tree, trace_from_tree
from stochcover.utility import compute_eta

S = Subrealization.from_pairs
PSI = {1: EMPTY, 2: S([(0, 0)]), 3: S([(0, 1)]), 4: S([(0, 1), (2, 0)])}


def realizations(inst):
    return [(phi, p) for phi, p in joint_table(inst.probs).items() if p > 0]


@pytest.fixture(scope="module")
def figure():
    inst = figure_instance()
    tree = materialize_tree(inst, figure_policy())
    return inst, tree, build_markers(tree)


@pytest.fixture(scope="module")
def ledgers(small_corpus):
    return [build_ledger(inst) for inst in small_corpus]


def test_figure_markers(figure):
    _, _, ms = figure
    assert ms.markers == [PSI[1], PSI[3], PSI[4], PSI[2]]
    assert ms.positions == [0.0, 1.0, 1.0, 3.0, 10.0]
    assert ms.eps == [1.0, 0.0, 2.0, 7.0]


def test_single_node_tree_markers():
    inst = additive((1.0,), ((0.5, 0.5),), [[4.0, 5.0]], 4.0)
    ms = build_markers(materialize_tree(inst, greedy_policy(inst)))
    assert ms.positions == [0.0, 4.0] and ms.eps == [4.0]


def test_marker_invariants(small_corpus):
    for inst in small_corpus:
        ms = build_markers(materialize_tree(inst, greedy_policy(inst)))
        assert ms.check(compute_eta(inst).eta) == []
        assert math.fsum(ms.eps) == pytest.approx(inst.Q, abs=1e-12)
        assert min(ms.eps) >= 0


@pytest.mark.parametrize(
    "phi, expected",
    [
        # 1-based marker -> node: toward psi5 markers 1..3 lead to psi1, marker 4 to psi2
        ((0, 0, 0), {1: 1, 2: 1, 3: 1, 4: 2}),
        # toward psi6 marker 1 leads to psi1 and markers 2..4 to psi4
        ((1, 0, 0), {1: 1, 2: 4, 3: 4, 4: 4}),
    ],
)
def test_figure_leadsto(figure, phi, expected):
    inst, _, ms = figure
    trace = execute(inst, figure_policy(), phi)
    for i, node in expected.items():
        assert leadsto(inst, trace, ms, i - 1) == PSI[node]


def test_leadsto_matches_linear_scan(small_corpus):
    for inst in small_corpus:
        tree = materialize_tree(inst, greedy_policy(inst))
        ms = build_markers(tree)
        for phi, _ in realizations(inst):
            trace = trace_from_tree(tree, phi)
            inner = trace.visited[:-1]
            values = [inst.f(p) for p in inner]
            # the first marker sits at 0, so it leads to the last visited node still at 0;
            # that is the root unless the first pick happened to gain nothing
            first = leadsto(inst, trace, ms, 0)
            assert inst.f(first) == 0.0
            if values[1:2] != [0.0]:
                assert first == EMPTY
            for i in range(len(ms)):
                assert leadsto(inst, trace, ms, i) == inner[last_visited_at_most(values, ms.positions[i])]


def test_zero_gap_marker_earns_nothing(figure):
    inst, tree, ms = figure
    prices = greedy_prices(inst, tree)
    lam = lambda_revenues(inst, trace_from_tree(tree, (1, 0, 0)), ms, prices)
    assert lam[1] == 0.0


def test_single_marker_revenue():
    inst = additive((3.0,), ((0.5, 0.5),), [[4.0, 6.0]], 4.0)
    tree = materialize_tree(inst, greedy_policy(inst))
    lam = lambda_revenues(inst, trace_from_tree(tree, (0,)), build_markers(tree), greedy_prices(inst, tree))
    assert lam == [unit_price(inst, EMPTY, 0) * 4.0] == [3.0]


def test_revenue_grouped_by_node_pays_each_step(small_corpus):
    for inst in small_corpus:
        tree = materialize_tree(inst, greedy_policy(inst))
        ms = build_markers(tree)
        prices = greedy_prices(inst, tree)
        for phi, _ in realizations(inst):
            trace = trace_from_tree(tree, phi)
            lam = lambda_revenues(inst, trace, ms, prices)
            owner = [leadsto(inst, trace, ms, i) for i in range(len(ms))]
            for a, b in zip(trace.visited, trace.visited[1:]):
                got = math.fsum(l for l, o in zip(lam, owner) if o == a)
                assert got == pytest.approx(prices[a] * (inst.f(b) - inst.f(a)), abs=1e-12)


def test_mu_on_appendix_instance():
    inst = appendix_instance()
    tree = materialize_tree(inst, greedy_policy(inst))
    opt = optimal_policy(inst)
    mu = mu_revenues(inst, trace_from_tree(tree, (0, 0, 0)), execute(inst, opt, (0, 0, 0)), greedy_prices(inst, tree))
    # S1 is never used by the optimum; S2 and S3 each close one element at price 1
    assert mu == [0.0, 1.0, 1.0]
    assert sum(mu) == opt.value


def test_mu_cases(small_corpus):
    seen = {"unused": 0, "optimal_only": 0, "both": 0}
    for inst in small_corpus:
        tree = materialize_tree(inst, greedy_policy(inst))
        opt = optimal_policy(inst)
        prices = greedy_prices(inst, tree)
        for phi, _ in realizations(inst):
            ts, to = trace_from_tree(tree, phi), execute(inst, opt, phi)
            mu = mu_revenues(inst, ts, to, prices)
            for e in range(inst.n):
                if e not in to.selected:
                    assert mu[e] == 0.0
                    seen["unused"] += 1
                elif e not in ts.selected:
                    assert mu[e] == inst.costs[e]
                    seen["optimal_only"] += 1
                else:
                    (before,) = [a for a, b in zip(ts.visited, ts.visited[1:]) if e in b.dom - a.dom]
                    gain = inst.f(before.extend(e, phi[e])) - inst.f(before)
                    assert mu[e] == pytest.approx(unit_price(inst, before, e) * gain, abs=1e-12)
                    seen["both"] += 1
    assert all(seen.values())


def test_hybrid_switching_at_root_is_optimal(small_corpus):
    for inst in small_corpus[:15]:
        tree = materialize_tree(inst, greedy_policy(inst))
        opt = optimal_policy(inst)
        hyb = HybridPolicy(inst, tree, opt, EMPTY)
        for phi, _ in realizations(inst):
            run, ref = hyb.run(phi), execute(inst, opt, phi)
            assert run.selected == ref.selected and run.cost == pytest.approx(ref.cost, abs=1e-12)


def test_hybrid_without_switch_follows_greedy(small_corpus):
    checked = 0
    for inst in small_corpus[:15]:
        tree = materialize_tree(inst, greedy_policy(inst))
        opt = optimal_policy(inst)
        for nd in tree.nonleaves()[1:]:
            hyb = HybridPolicy(inst, tree, opt, nd.psi)
            for phi, _ in realizations(inst):
                if nd.psi.consistent_with(phi):
                    continue
                assert hyb.run(phi).selected == trace_from_tree(tree, phi).selected
                checked += 1
    assert checked > 0


def test_hybrid_items_agree_with_optimum_outside_switch(small_corpus):
    for inst in small_corpus[:20]:
        tree = materialize_tree(inst, greedy_policy(inst))
        opt = optimal_policy(inst)
        for nd in tree.nonleaves():
            hyb = HybridPolicy(inst, tree, opt, nd.psi)
            for phi, _ in realizations(inst):
                if not nd.psi.consistent_with(phi):
                    continue
                chosen_opt = execute(inst, opt, phi).selected
                chosen_hyb = hyb.run(phi).selected
                for e in range(inst.n):
                    if e not in nd.psi.dom:
                        assert (e in chosen_opt) == (e in chosen_hyb)


def test_hybrid_is_a_covering_policy(small_corpus):
    for inst in small_corpus[:15]:
        tree = materialize_tree(inst, greedy_policy(inst))
        opt = optimal_policy(inst)
        for nd in tree.nonleaves():
            hyb = HybridPolicy(inst, tree, opt, nd.psi)
            htree = materialize_tree(inst, hyb)
            for phi, _ in realizations(inst):
                # the covering view stops at the first cover; the full run may add zero-gain picks
                walked = trace_from_tree(htree, phi).selected
                assert walked <= hyb.run(phi).selected


def test_hybrid_rejects_non_node(figure):
    inst, tree, _ = figure
    with pytest.raises(ValueError):
        HybridPolicy(inst, tree, figure_policy(), S([(0, 0), (1, 0)]))


def test_delta_plus_cases(small_corpus):
    stage1_only = unselected = 0
    for inst in small_corpus[:20]:
        tree = materialize_tree(inst, greedy_policy(inst))
        opt = optimal_policy(inst)
        for nd in tree.nonleaves():
            hyb = HybridPolicy(inst, tree, opt, nd.psi)
            for phi, _ in realizations(inst):
                run = hyb.run(phi)
                if not run.switched:
                    for e in range(inst.n):
                        if e not in nd.psi.dom:
                            assert delta_plus(run, nd.psi, e) == 0.0
                    continue
                stage2 = {e for _, _, e, reused in run.stage2 if not reused}
                stage1 = run.stage1[-1].dom
                total = 0.0
                for e in range(inst.n):
                    if e in nd.psi.dom:
                        continue
                    d = delta_plus(run, nd.psi, e)
                    total += d
                    if e not in stage2:
                        assert d == 0.0
                        stage1_only += e in stage1
                        unselected += e not in run.selected
                assert total >= inst.Q - nd.value - 1e-9
    assert unselected > 0


def test_delta_plus_rejects_observed_item(figure):
    inst, tree, _ = figure
    run = HybridPolicy(inst, tree, figure_policy(), PSI[2]).run((0, 0, 0))
    with pytest.raises(ValueError):
        delta_plus(run, PSI[2], 0)


def test_ledger_audits(ledgers):
    for led in ledgers:
        assert led.fact1_residual <= 1e-12
        assert led.fact2_failures == 0
        assert led.delta_sum_shortfall <= 1e-9


def test_mediant_examples():
    assert verify_fact_mediant([1, 3], [1, 1])
    assert verify_fact_mediant([0, 5], [1, 0])
    with pytest.raises(DomainError):
        verify_fact_mediant([-1, 2], [1, 1])
    with pytest.raises(DomainError):
        verify_fact_mediant([1, 2], [0, 0])


def test_mediant_fuzz_direct():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        size = int(rng.integers(1, 6))
        a = rng.random(size) * rng.integers(0, 2, size)
        b = rng.random(size) * rng.integers(0, 2, size)
        if b.sum() == 0:
            b[0] = 1.0
        assert verify_fact_mediant(a.tolist(), b.tolist())


@given(st.lists(st.tuples(st.floats(0, 1e6), st.floats(0, 1e6)), min_size=1, max_size=8))
def test_mediant_property(pairs):
    a, b = zip(*pairs)
    if sum(b) > 0:
        assert verify_fact_mediant(a, b)


def test_kappa_examples():
    assert kappa(10, 1, False) == pytest.approx(math.log(10) + 1, abs=1e-12)
    assert kappa(10, 1, False) == pytest.approx(3.302585, abs=1e-6)
    assert kappa(3, 1, True) == pytest.approx(1 + 1 / 2 + 1 / 3, abs=1e-15)
    assert kappa(2.5, 2.5, False) == 1.0
    assert harmonic(1) == 1.0


def test_kappa_domain():
    for args in [(10, 0, False), (10, 11, False), (2.5, 1, True)]:
        with pytest.raises(DomainError):
            kappa(*args)


def test_figure_ratio_sum(figure):
    _, _, ms = figure
    expected = 1 / 10 + 0 / 9 + 2 / 9 + 7 / 7
    assert marker_ratio_sum(ms) == pytest.approx(expected, abs=1e-12)
    assert marker_ratio_sum(ms) == pytest.approx(1.3222222, abs=1e-6)
    rep = verify_sum_bound(ms, 1.0, True)
    assert rep["ok"] and rep["log_bound"] == pytest.approx(1 + math.log(10), abs=1e-12)


def test_single_marker_ratio():
    inst = additive((1.0,), ((1.0,),), [[4.0]], 4.0)
    ms = build_markers(materialize_tree(inst, greedy_policy(inst)))
    for eta in (0.1, 1.0, 4.0):
        rep = verify_sum_bound(ms, eta, False)
        assert rep["sum"] == 1.0 and rep["ok"]


def test_sum_bound_on_integer_trees(small_corpus):
    checked = 0
    for inst in small_corpus:
        if not inst.integer_valued:
            continue
        ms = build_markers(materialize_tree(inst, greedy_policy(inst, Selector.adversarial(2.0))))
        rep = verify_sum_bound(ms, compute_eta(inst).eta, True)
        assert rep["harmonic_ok"] and rep["log_ok"]
        checked += 1
    assert checked > 0


def test_single_item_lemmas_reduce_to_its_cost():
    inst = additive((2.5,), ((0.3, 0.7),), [[1.0, 2.0]], 1.0)
    l1 = verify_lemma(inst, "L1")
    l2 = verify_lemma(inst, "L2")
    assert l1.passed and l2.passed
    assert l1.checks[0].lhs == l1.checks[0].rhs == 2.5
    assert l2.checks[0].lhs == l2.checks[0].rhs == 2.5


def test_tie_order_does_not_change_total_revenue(ledgers):
    for led in ledgers:
        inst, tree = led.inst, led.sigma_tree
        prices = greedy_prices(inst, tree)
        for tie_key in (lambda nd: -nd.order, lambda nd: nd.item, lambda nd: -nd.depth):
            ms = build_markers(tree, tie_key)
            total = math.fsum(
                p * math.fsum(lambda_revenues(inst, trace_from_tree(tree, phi), ms, prices))
                for phi, p in zip(led.phis, led.probs)
            )
            assert total == pytest.approx(led.expected_cost_sigma, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0])
def test_all_checks_pass(small_corpus, alpha):
    sel = Selector.exact() if alpha == 1.0 else Selector.adversarial(alpha)
    for inst in small_corpus:
        reports = verify_all(build_ledger(inst, sel))
        bad = {w: r.failures[:2] for w, r in reports.items() if not r.passed}
        assert not bad


def test_strong_form_is_reported(ledgers):
    reports = [verify_ledger(led, "L4") for led in ledgers]
    assert all("strong_form_worst_slack" in r.extra for r in reports)
    assert any(r.skipped for r in reports)


def test_misreported_alpha_is_caught(small_corpus):
    """A ledger built with an adversarial alpha = 3 selector but checked as exact must fail somewhere."""
    failed = set()
    for inst in small_corpus:
        led = build_ledger(inst, Selector.adversarial(3.0))
        forged = dataclasses.replace(led, selector=Selector.exact())
        failed |= {w for w, r in verify_all(forged).items() if not r.passed}
    assert {"L3", "L4", "L5"} <= failed


def test_report_summary_shape(ledgers):
    s = verify_ledger(ledgers[0], "T1").summary()
    assert {"lemma", "alpha", "checks", "passed", "failed", "worst_slack", "kappa", "eta", "eta_is_exact", "ratio"} <= set(s)


def test_unknown_lemma(ledgers):
    with pytest.raises(ValueError):
        verify_ledger(ledgers[0], "L9")


def test_verify_all_accepts_names(small_corpus):
    ledger = build_ledger(small_corpus[0], Selector.exact())
    assert list(verify_all(ledger, "all")) == list(LEMMAS)
    assert list(verify_all(ledger, "L2")) == ["L2"]


def test_mediant_exact_on_equal_ratios():
    # equal ratios whose float quotients disagree in the last bit
    assert verify_fact_mediant((1.0, 1.0, 1.0), (536611.2326824657,) * 3)

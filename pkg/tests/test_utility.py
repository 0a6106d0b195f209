import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import additive
from oracles import brute_expected_marginal, value_of
from stochcover import ExplicitTable, Instance, StochasticCoverage, TruncatedAdditive
from stochcover.errors import EtaUnavailable, ItemAlreadyAssigned, NotCoverable, TableMiss
from stochcover.harness.generators import GeneratorConfig, corpus, gen_instance
from stochcover.harness.repro import appendix_instance, figure_instance
from stochcover.instance import EMPTY, Subrealization
from stochcover.utility import (
    compute_eta,
    evaluate,
    expected_marginal,
    goal_value,
    is_integer_valued,
    marginal,
    utility_from_dict,
    validate_coverability,
    validate_polymatroid,
    validate_sufficiency,
)
from violation_fixtures import short_additive, supermodular_table, unreachable_element

S = Subrealization.from_pairs


def test_coverage_counts_weights():
    u = StochasticCoverage([1.0, 1.0, 1.0], [[[0, 1], [2]]])
    assert evaluate(u, S([(0, 0)])) == 2.0
    assert evaluate(u, EMPTY) == 0.0


def test_truncated_additive_clips_at_goal():
    u = TruncatedAdditive(10.0, [[3.0, 0.0], [0.0, 9.0]])
    assert evaluate(u, S([(0, 0), (1, 1)])) == 10.0


def test_figure_table_node_values():
    inst = figure_instance()
    psis = [EMPTY, S([(0, 0)]), S([(0, 1)]), S([(0, 1), (2, 0)])]
    assert [inst.f(p) for p in psis] == [0.0, 3.0, 1.0, 1.0]


def test_table_miss():
    u = ExplicitTable(1.0, {(): 0.0, ((0, 0),): 1.0})
    with pytest.raises(TableMiss):
        evaluate(u, S([(0, 1)]))


def test_saturated_marginal_is_zero():
    u = StochasticCoverage([1.0, 1.0], [[[0, 1]], [[1]]])
    assert marginal(u, S([(0, 0)]), 1, 0) == 0.0


def test_marginal_clipped_at_goal():
    u = TruncatedAdditive(10.0, [[8.0], [5.0]])
    assert marginal(u, S([(0, 0)]), 1, 0) == 2.0


def test_appendix_marginal_of_second_set():
    inst = appendix_instance()
    assert marginal(inst.utility, S([(0, 0)]), 1, 0) == 1.0


def test_marginal_rejects_observed_item():
    u = TruncatedAdditive(10.0, [[8.0], [5.0]])
    with pytest.raises(ItemAlreadyAssigned):
        marginal(u, S([(0, 0)]), 0, 0)
    with pytest.raises(ItemAlreadyAssigned):
        expected_marginal(additive((1, 1), ((1.0,), (1.0,)), [[8.0], [5.0]], 10), S([(0, 0)]), 0)


def test_expected_marginal_certain_state():
    inst = additive((1,), ((1.0,),), [[4.0]], 4)
    assert expected_marginal(inst, EMPTY, 0) == 4.0


def test_expected_marginal_fair_coin():
    inst = additive((1, 1), ((0.5, 0.5), (1.0, 0.0)), [[2.0, 0.0], [2.0, 2.0]], 2)
    assert expected_marginal(inst, EMPTY, 0) == 1.0


@pytest.mark.parametrize("seed", range(8))
def test_expected_marginal_matches_joint_enumeration(seed):
    kind = ("coverage", "truncated_additive")[seed % 2]
    inst = gen_instance(GeneratorConfig(kind=kind, n=4, k=2, m=6, seed=seed, integer=bool(seed % 3)))
    rng = np.random.default_rng(seed)
    for _ in range(10):
        chosen = [e for e in range(4) if rng.random() < 0.4]
        pairs = [(e, inst.supports[e][0]) for e in chosen]
        psi = S(pairs)
        for e in range(4):
            if e not in chosen:
                assert expected_marginal(inst, psi, e) == pytest.approx(brute_expected_marginal(inst, pairs, e), abs=1e-12)


def test_goal_value_examples():
    assert goal_value(additive((1,), ((1.0,),), [[12.0]], 10)) == 10.0
    assert goal_value(appendix_instance()) == 6.0
    assert figure_instance().Q == 10.0


def test_goal_value_all_unions_cover():
    inst = Instance(
        (1, 1),
        ((0.5, 0.5), (0.5, 0.5)),
        StochasticCoverage([1.0] * 6, [[[0, 1, 2], [0, 1, 2, 3]], [[3, 4, 5], [2, 3, 4, 5]]]),
    )
    assert goal_value(inst) == 6.0


def test_goal_value_not_coverable():
    with pytest.raises(NotCoverable):
        goal_value(short_additive())


def test_eta_integer_coverage():
    inst = Instance((1, 1), ((1.0,), (1.0,)), StochasticCoverage([1.0] * 3, [[[0, 1]], [[2]]]), integer_valued=True)
    gap = compute_eta(inst)
    assert gap.eta == 1.0 and gap.eta_is_exact


def test_eta_from_subset_sums():
    # by hand over all 2^3 subsets of {3, 7, 9.5}: the closest value below 10 is 9.5
    inst = additive((1, 1, 1), ((1.0,), (1.0,), (1.0,)), [[3.0], [7.0], [9.5]], 10.0)
    sums = [min(10.0, sum(c)) for r in range(4) for c in itertools.combinations([3.0, 7.0, 9.5], r)]
    assert min(10.0 - s for s in sums if s < 10.0) == 0.5
    assert compute_eta(inst).eta == 0.5


def test_eta_all_or_nothing():
    inst = Instance((1, 1), ((1.0,), (1.0,)), StochasticCoverage([1.0, 1.0], [[[0, 1]], [[0, 1]]]))
    assert compute_eta(inst).eta == 2.0


def test_eta_fallbacks():
    real = additive((1, 1), ((1.0,), (1.0,)), [[0.5], [2.5]], 3.0)
    declared = Instance(real.costs, real.probs, real.utility, declared_eta=0.25)
    assert compute_eta(declared, budget=1).eta == 0.25 and not compute_eta(declared, budget=1).eta_is_exact
    integer = Instance(real.costs, real.probs, real.utility, integer_valued=True)
    assert compute_eta(integer, budget=1).eta == 1.0
    with pytest.raises(EtaUnavailable):
        compute_eta(real, budget=1)


def test_polymatroid_coverage_and_additive_clean():
    assert validate_polymatroid(appendix_instance()) == []
    assert validate_polymatroid(additive((1, 1), ((0.5, 0.5), (0.3, 0.7)), [[1.0, 2.0], [0.0, 3.0]], 3.0)) == []


def test_polymatroid_flags_supermodular_table():
    found = validate_polymatroid(supermodular_table())
    assert [v.kind for v in found] == ["submodularity"]
    assert found[0].psi == EMPTY


def test_polymatroid_flags_decrease():
    table = ExplicitTable(2.0, {(): 0.0, ((0, 0),): 2.0, ((1, 0),): 1.0, ((0, 0), (1, 0)): 1.5})
    kinds = {v.kind for v in validate_polymatroid(Instance((1, 1), ((1.0,), (1.0,)), table))}
    assert "monotonicity" in kinds


def test_coverability_appendix_family_clean():
    assert validate_coverability(appendix_instance()) == []


def test_coverability_unreachable_element():
    found = validate_coverability(unreachable_element())
    assert len(found) == 1 and found[0].kind == "coverability"


def test_coverability_short_additive():
    assert len(validate_coverability(short_additive())) == 1


def test_coverability_sufficient_conditions_beyond_budget():
    assert validate_coverability(appendix_instance(), budget=0) == []
    assert len(validate_coverability(unreachable_element(), budget=0)) == 1
    assert len(validate_coverability(short_additive(), budget=0)) == 1
    assert "unverified" in validate_coverability(figure_instance(), budget=0)[0].detail


def test_sufficiency_on_generated():
    for inst in corpus(10, seed=4):
        assert validate_sufficiency(inst, np.random.default_rng(0)) == []


def test_integer_detection():
    assert is_integer_valued(appendix_instance())
    assert not is_integer_valued(additive((1, 1), ((1.0,), (1.0,)), [[0.5], [2.5]], 3.0))


@pytest.mark.parametrize("inst", [appendix_instance(), figure_instance(), short_additive()], ids=["cov", "table", "ta"])
def test_utility_dict_round_trip(inst):
    again = utility_from_dict(inst.utility.to_dict())
    assert again.to_dict() == inst.utility.to_dict()


def test_unknown_kind():
    with pytest.raises(ValueError):
        utility_from_dict({"kind": "matroid"})


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["coverage", "truncated_additive"]), st.booleans())
def test_diminishing_returns_on_nested_pairs(seed, kind, integer):
    inst = gen_instance(GeneratorConfig(kind=kind, n=3, k=2, m=5, seed=seed, integer=integer))
    for phi in itertools.product(*inst.supports):
        full = list(enumerate(phi))
        for mask in range(1 << 3):
            big = [p for p in full if mask >> p[0] & 1]
            for sub_mask in range(1 << 3):
                if sub_mask & ~mask:
                    continue
                small = [p for p in full if sub_mask >> p[0] & 1]
                for e, o in full:
                    if mask >> e & 1:
                        continue
                    m_small = value_of(inst, small + [(e, o)]) - value_of(inst, small)
                    m_big = value_of(inst, big + [(e, o)]) - value_of(inst, big)
                    assert m_small >= m_big - 1e-12 >= -2e-12
                    assert marginal(inst.utility, S(big), e, o) == pytest.approx(m_big, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_goal_is_realization_independent(seed):
    inst = gen_instance(GeneratorConfig(kind="coverage", n=4, k=3, m=6, seed=seed))
    Q = inst.Q
    for phi in itertools.product(*inst.supports):
        assert value_of(inst, list(enumerate(phi))) == Q

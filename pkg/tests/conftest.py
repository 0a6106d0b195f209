import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stochcover import Instance, StochasticCoverage, TruncatedAdditive  # noqa: E402
from stochcover.harness.generators import GeneratorConfig, corpus, gen_instance  # noqa: E402


@pytest.fixture(scope="session")
def small_corpus():
    return corpus(40, seed=11)


@pytest.fixture(scope="session")
def tiny_corpus():
    """n <= 2, k = 2: small enough for exhaustive decision-tree search."""
    out = []
    for seed in range(60):
        kind = ("coverage", "truncated_additive")[seed % 2]
        out.append(gen_instance(GeneratorConfig(kind=kind, n=1 + (seed // 2) % 2, k=2, m=4, seed=seed, zero_prob_rate=0.2)))
    return out


@pytest.fixture
def coin_pair():
    """Two independent fair items; state 0 covers one unit element, state 1 covers both."""
    return Instance(
        (1.0, 2.0),
        ((0.5, 0.5), (0.5, 0.5)),
        StochasticCoverage([1.0, 1.0], [[[0], [0, 1]], [[1], [0, 1]]]),
        integer_valued=True,
    )


def additive(costs, probs, gains, Q, integer=False):
    return Instance(costs, probs, TruncatedAdditive(Q, gains), integer_valued=integer)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from infoextract import synth


@pytest.fixture(scope="session")
def copula07():
    return synth("gaussian-copula", seed=11, normalized=True, rho=0.7, n=10000)


@pytest.fixture(scope="session")
def independent3():
    return synth("independent", seed=12, normalized=True, n=10000, dims=3)


@pytest.fixture(scope="session")
def chain():
    return synth("markov-chain", seed=13, normalized=True, n=10000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

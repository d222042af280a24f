import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import toys  # noqa: E402
from hinembed.presets import author_metagraph, coauthor_metapath, venue_metapath  # noqa: E402
from hinembed.synth import SynthConfig, generate_hin, sparsify_venues  # noqa: E402


@pytest.fixture
def motivating():
    return toys.motivating()


@pytest.fixture
def chain():
    return toys.chain()


@pytest.fixture
def toy12():
    return toys.toy12()


@pytest.fixture
def mg():
    return author_metagraph()


@pytest.fixture
def apvpa():
    return venue_metapath()


@pytest.fixture
def apapa():
    return coauthor_metapath()


@pytest.fixture(scope="session")
def small_hin():
    config = SynthConfig(communities=4, authors=60, papers=90, venues=3, cross_prob=0.05, seed=11)
    return sparsify_venues(generate_hin(config), 0.2, seed=11)


def pytest_terminal_summary(terminalreporter):
    results = sys.modules.get("test_acceptance")
    if results is None or not results.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in results.summary_lines():
        terminalreporter.write_line(line)

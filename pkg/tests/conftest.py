import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

STUB = os.path.join(os.path.dirname(__file__), "stubs", "echo_scorer.py")


@pytest.fixture(scope="session")
def echo_stub_cmd() -> list[str]:
    return [sys.executable, STUB]


@pytest.fixture(scope="session")
def small_corpus():
    from latrec.simulate import simulate_corpus

    return simulate_corpus(seed=11, utts=25)

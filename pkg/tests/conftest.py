import pytest

from ctxagent.fixtures import fixture_registry, it_support_registry
from ctxagent.tokenizer import ApproxTokenizer


@pytest.fixture(scope="session")
def registry():
    return fixture_registry()


@pytest.fixture(scope="session")
def small_registry():
    return it_support_registry()


@pytest.fixture(scope="session")
def tokenizer():
    return ApproxTokenizer()

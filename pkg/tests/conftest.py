import os

import pytest
from hypothesis import settings

from tensorlint.models import DEFAULT_MODEL, load_models, resolve_model

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORPUS = os.path.join(ROOT, "corpus")
CONV_NET = os.path.join(CORPUS, "conv_network.py")
CONV_NET_SIDECAR = os.path.join(CORPUS, "conv_network.annotations.json")
FOO = os.path.join(CORPUS, "foo_snippet.py")

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def tf_models():
    return load_models([resolve_model(DEFAULT_MODEL)])


@pytest.fixture(scope="session")
def conv_text():
    with open(CONV_NET, encoding="utf-8") as fh:
        return fh.read()


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)

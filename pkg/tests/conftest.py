import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import corpus_gen  # noqa: E402
from sager.conllu import write_conllu  # noqa: E402


@pytest.fixture(scope="session")
def fixture_treebank():
    return corpus_gen.fixture_treebank()


@pytest.fixture(scope="session")
def fixture_text(fixture_treebank):
    return write_conllu(fixture_treebank)


@pytest.fixture(scope="session")
def overfit_corpus():
    return corpus_gen.overfit_corpus()

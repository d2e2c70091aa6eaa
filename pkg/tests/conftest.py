import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import lssbal


@pytest.fixture(scope="session")
def paper_model():
    return lssbal.three_mode_model()


@pytest.fixture(scope="session")
def paper_gramians(paper_model):
    return lssbal.compute_gramians(paper_model)


@pytest.fixture(scope="session")
def paper_balanced(paper_model, paper_gramians):
    return lssbal.balance(paper_model, paper_gramians)

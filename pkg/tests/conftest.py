import pytest

from lridnet.langid import builtin_detector


@pytest.fixture(scope="session")
def detector():
    return builtin_detector(seed=0)

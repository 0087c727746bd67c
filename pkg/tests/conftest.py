import pytest

from fixtures import random_params


@pytest.fixture
def make_params():
    return random_params

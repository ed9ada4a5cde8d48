import pytest

from .scenarios import geo_tree, pair_tree


@pytest.fixture
def pair():
    return pair_tree()


@pytest.fixture
def geo():
    return geo_tree()

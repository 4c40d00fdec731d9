import pytest


@pytest.fixture(scope="session")
def family_d3():
    """The first ten d=3 shrinkers, shared across the suite (expensive)."""
    from blowflow.shrinker import shrinker_family

    return shrinker_family(3, 10)

"""Shared fixtures: lazily built, session-cached catalog systems."""

import pytest

from extham import catalog

MN_SET = [(1, 1), (2, 1), (1, 2), (3, 1), (1, 3), (2, 3), (3, 2)]


@pytest.fixture(scope="session")
def ttw_cache():
    cache = {}

    def get(m, n):
        if (m, n) not in cache:
            cache[(m, n)] = catalog.ttw(m, n)
        return cache[(m, n)]

    return get


@pytest.fixture(scope="session")
def pw_cache():
    cache = {}

    def get(m, n):
        if (m, n) not in cache:
            cache[(m, n)] = catalog.pw(m, n)
        return cache[(m, n)]

    return get


@pytest.fixture(scope="session")
def halfplane_cache():
    cache = {}

    def get(m, n):
        if (m, n) not in cache:
            cache[(m, n)] = catalog.halfplane(m, n)
        return cache[(m, n)]

    return get

"""Shared, cached objects for the test suite.

Building a system and a patch is cheap for the shipped examples but not
free, so every test pulls them from here.
"""

from functools import lru_cache

import pytest

from substcps.cli import resolve_spec
from substcps.coincidence import search_coincidence
from substcps.cps import build_cps
from substcps.errors import PatchTooSmall
from substcps.pointset import compute_xi, find_seed, generate_patch
from substcps.substitution import build_system

PISOT_EXAMPLES = ("fibonacci", "tribonacci", "aab_abab")
UNIMODULAR_EXAMPLES = ("fibonacci", "tribonacci")


@lru_cache(maxsize=None)
def spec(name):
    return resolve_spec(name)


@lru_cache(maxsize=None)
def system(name):
    return build_system(spec(name))


@lru_cache(maxsize=None)
def cps(name):
    s = system(name)
    return build_cps(s.field, s.embedding)


@lru_cache(maxsize=None)
def patch(name, radius=200.0):
    return generate_patch(system(name), find_seed(spec(name)), radius)


@lru_cache(maxsize=None)
def xi(name, radius=50.0):
    return compute_xi(patch(name, 4 * radius), radius)


@lru_cache(maxsize=None)
def certificate(name, radius=20.0, m_max=6):
    """Coincidence search that grows the patch until the check fits."""
    p = patch(name, 4 * radius)
    x = xi(name, radius)
    while True:
        try:
            return search_coincidence(p, x, m_max=m_max, radius=radius), p, x
        except PatchTooSmall as e:
            p = generate_patch(system(name), find_seed(spec(name)), e.needed_radius * 1.01)


@pytest.fixture(params=PISOT_EXAMPLES)
def pisot_name(request):
    return request.param


@pytest.fixture(params=UNIMODULAR_EXAMPLES)
def unimodular_name(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


@lru_cache(maxsize=None)
def cover(name, depth):
    from substcps.window import attractor_by_iteration, build_dual_ifs

    return attractor_by_iteration(build_dual_ifs(system(name).digits, cps(name)), depth)

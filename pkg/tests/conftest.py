import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from lrin.gauges import Flavor, NormSpec, ScaledNorm

settings.register_profile("default", max_examples=150, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SEEDS_DIR = Path(__file__).parent / "seeds"

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def vectors(draw, q_max=30):
    q = draw(st.integers(1, q_max))
    z = np.array(draw(st.lists(finite, min_size=q, max_size=q)))
    # snap a few entries onto each other to get exact ties
    if q > 1 and draw(st.booleans()):
        k = draw(st.integers(2, q))
        z[:k] = abs(z[0]) * np.sign(z[:k])
    return z


@st.composite
def moderate_vectors(draw, q_max=10):
    """Entries are 0 or of magnitude in [1e-3, 100]; ties are common."""
    q = draw(st.integers(1, q_max))
    mag = st.one_of(st.just(0.0), st.floats(1e-3, 100.0), st.sampled_from([1.0, 2.0, 0.5]))
    z = np.array(draw(st.lists(mag, min_size=q, max_size=q)))
    signs = np.array(draw(st.lists(st.sampled_from([-1.0, 1.0]), min_size=q, max_size=q)))
    return z * signs


@st.composite
def norms(draw, q):
    r = draw(st.integers(1, q))
    flavor = draw(st.sampled_from(list(Flavor)))
    gamma = 10.0 ** draw(st.floats(-3, 3))
    squared = draw(st.booleans())
    return ScaledNorm(NormSpec(flavor, r), gamma, squared)


@st.composite
def prox_cases(draw, q_max=30, moderate=False):
    z = draw(moderate_vectors(q_max) if moderate else vectors(q_max))
    return z, draw(norms(z.shape[0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])

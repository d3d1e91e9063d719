import numpy as np
import pytest
from hypothesis import settings, strategies as st

from cslab.frames import Level, TeichmullerPoint

settings.register_profile("cslab", max_examples=25, deadline=None)
settings.load_profile("cslab")

taus = st.builds(TeichmullerPoint, st.floats(-1.0, 1.0), st.floats(0.5, 2.0))
levels = st.builds(Level, st.integers(1, 4), st.floats(-2.0, 2.0))
ranks = st.sampled_from([1, 2])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_coeffs(rng, basis, max_degree):
    c = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
    return np.where(basis.degrees() <= max_degree, c, 0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ratind.energy import PotentialSpec
from ratind.errors import ConfigError, DimensionError
from ratind.geometry import SpaceGeometry, h_inner, h_norm, v_norm
from ratind.model import Forcing, ProblemSpec
from ratind.noise import NoiseSpec

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_h_inner_examples():
    g = SpaceGeometry.euclidean(2)
    assert h_inner([1, 0], [0, 1], g) == 0.0
    assert h_inner([3, 4], [3, 4], g) == 25.0
    gw = SpaceGeometry(2, h_weights=[2.0, 1.0])
    # direct weighted sum 2*1*2 + 1*2*1
    assert h_inner([1, 2], [2, 1], gw) == pytest.approx(2 * 1 * 2 + 1 * 2 * 1, abs=0)


def test_v_norm_examples():
    g = SpaceGeometry(2, h_weights=[1.0, 1.0], v_weights=[4.0, 1.0])
    assert v_norm([0.0, 0.0], g) == 0.0
    assert v_norm([1.0, 0.0], g) == pytest.approx(math.sqrt(4.0))


def test_dimension_mismatch():
    g = SpaceGeometry.euclidean(2)
    with pytest.raises(DimensionError):
        h_inner([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], g)
    with pytest.raises(DimensionError):
        v_norm([1.0], g)


def test_q_conjugate():
    for p in (2.0, 3.0, 4.0, 7.5):
        g = SpaceGeometry.euclidean(1, p=p)
        assert abs(1 / g.p + 1 / g.q - 1) <= 1e-12


def test_invalid_geometry():
    with pytest.raises(ValueError):
        SpaceGeometry(2, h_weights=[1.0, 2.0], v_weights=[1.0, 1.0])
    with pytest.raises(ValueError):
        SpaceGeometry(1, p=1.5)


def test_embedding_on_random_vectors():
    rng = np.random.default_rng(0)
    h = rng.uniform(0.1, 3.0, 5)
    g = SpaceGeometry(5, h_weights=h, v_weights=h + rng.uniform(0, 2, 5))
    z = rng.normal(size=(1000, 5)) * 10
    assert np.all(h_norm(z, g) <= v_norm(z, g))


@given(arrays(float, 3, elements=finite), st.floats(0.01, 100))
def test_v_norm_homogeneous(a, lam):
    g = SpaceGeometry(3, h_weights=[1.0, 2.0, 0.5], v_weights=[2.0, 2.0, 1.0])
    assert v_norm(lam * a, g) == pytest.approx(lam * v_norm(a, g), rel=1e-12, abs=1e-300)


@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite))
def test_h_inner_symmetric(a, b):
    g = SpaceGeometry(3, h_weights=[1.0, 2.0, 0.5])
    assert h_inner(a, b, g) == h_inner(b, a, g)


@settings(max_examples=50)
@given(arrays(float, (7, 3), elements=finite))
def test_batch_rows_bit_identical(z):
    g = SpaceGeometry(3, h_weights=[1.0, 2.0, 0.5])
    batch = h_norm(z, g)
    for i in range(z.shape[0]):
        assert h_norm(z[i], g) == batch[i]


def _spec(**kw):
    base = dict(
        geometry=SpaceGeometry.euclidean(1), potential=PotentialSpec.quadratic([[1.0]]),
        noise=NoiseSpec.off(), u0=[0.0], T=1.0, epsilon=0.1, dt=0.1,
    )
    base.update(kw)
    return ProblemSpec(**base)


def test_problem_spec_validation():
    with pytest.raises(ConfigError):
        _spec(epsilon=1.0)
    with pytest.raises(ConfigError):
        _spec(dt=2.0)
    with pytest.raises(ConfigError):
        _spec(u0=[np.nan])
    with pytest.raises(DimensionError):
        _spec(u0=[0.0, 1.0])
    with pytest.raises(ConfigError):
        _spec(seed=2**64)


def test_time_grid_ends_exactly_at_T():
    s = _spec(T=1.0, dt=0.3)
    t = s.time_grid()
    assert t[0] == 0.0 and t[-1] == 1.0 and np.all(np.diff(t) > 0)
    assert s.n_steps == 4
    assert _spec(T=0.0).n_steps == 0


def test_forcing_kinds():
    f = Forcing("linear", 2, offset=[1.0, 0.0], rate=[2.0, -1.0])
    assert np.allclose(f(0.5), [2.0, -0.5])
    p = Forcing("polynomial", 1, coeffs=[[1.0, 0.0, 3.0]])
    assert p(2.0)[0] == 13.0
    c = Forcing("circle", 2, radius=2.0, freq=0.25, ramp_time=1.0)
    assert np.allclose(c(0.0), [0.0, 0.0])
    assert np.allclose(c(1.0), [0.0, 2.0])
    with pytest.raises(ConfigError):
        Forcing("circle", 1)

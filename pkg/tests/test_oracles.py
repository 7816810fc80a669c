import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ratind.dissipation import resolvent_shrink
from ratind.energy import PotentialSpec
from ratind.geometry import SpaceGeometry
from ratind.model import Forcing, ProblemSpec
from ratind.noise import NoiseSpec, wiener_from_grid
from ratind.oracles import (
    bruteforce_resolvent,
    oracle_energy_residual,
    play_operator,
    skorohod_1d,
    sweeping_catchup,
)
from ratind.reparam import graph_hausdorff
from ratind.viscous import simulate_path


def test_play_closed_form():
    t = np.linspace(0, 1, 10_001)
    r = play_operator(2 * t, 0.0, 1.0, t)
    assert r.method == "play_closed_form"
    assert np.max(np.abs(r.u_ref - np.maximum(0, 2 * t - 1))) <= 1e-4


def test_play_stick():
    r = play_operator(np.full(50, 0.4), -0.3)
    assert np.all(r.u_ref == -0.3)


def test_play_rate_independence():
    n = 4001
    s = np.linspace(0, 1, n)
    g = lambda x: 2.5 * np.sin(3 * x)  # noqa: E731
    lip = 7.5
    fast = s ** 3  # monotone time change
    a = play_operator(g(s), 0.0)
    b = play_operator(g(fast), 0.0)
    ga = np.column_stack([g(s), a.u_ref])
    gb = np.column_stack([g(fast), b.u_ref])
    dt = 1.0 / (n - 1)
    assert graph_hausdorff(ga, gb) <= 2 * dt * lip * 3  # time change is 3-Lipschitz


def test_sweeping_circle_steady_orbit():
    # the ball centre runs on radius R; in steady rotation g - v is tangent to
    # the orbit of v, which therefore has radius sqrt(R^2 - 1)
    t = np.linspace(0, 4, 40_001)
    g = 2 * np.column_stack([np.cos(2 * np.pi * t / 4), np.sin(2 * np.pi * t / 4)])
    g[0] = 0.0  # start at the centre, then jump onto the circle
    r = sweeping_catchup(g, np.zeros(2))
    dist = np.linalg.norm(g - r.u_ref, axis=1)
    assert np.all(dist <= 1 + 1e-12)
    tail = t > 3.0  # transient decays over the first turns
    assert np.max(np.abs(dist[tail] - 1.0)) <= 1e-12
    assert np.max(np.abs(np.linalg.norm(r.u_ref[tail], axis=1) - np.sqrt(3.0))) <= 5e-3


def test_sweeping_constant_load():
    r = sweeping_catchup(np.tile([0.5, 0.2], (30, 1)), np.zeros(2))
    assert np.all(r.u_ref == 0)
    with pytest.raises(ValueError):
        sweeping_catchup(np.zeros((3, 2)), np.zeros(2), stiffness=np.diag([1.0, 2.0]))


def test_sweeping_agrees_with_viscous_pipeline():
    spec = ProblemSpec(SpaceGeometry.euclidean(2), PotentialSpec.quadratic(np.eye(2)), NoiseSpec.off(2, 2),
                       [0.0, 0.0], 2.0, 1e-3, 1e-4,
                       forcing=Forcing("circle", 2, radius=2.0, freq=0.5, ramp_time=0.5))
    path = simulate_path(spec)
    ref = sweeping_catchup(path.forcing, spec.u0, t_grid=path.t_grid)
    assert np.max(np.linalg.norm(path.u - ref.u_ref, axis=1)) <= 5e-2


def test_skorohod_examples():
    y = np.sin(np.linspace(0, 3, 100)) * 0.5
    assert np.array_equal(skorohod_1d(y, -1, 1).u_ref, y)
    t = np.linspace(0, 2, 201)
    assert np.allclose(skorohod_1d(t, upper=1.0).u_ref, np.minimum(t, 1.0))


def test_skorohod_monte_carlo():
    t = np.linspace(0, 2, 2001)
    at_barrier = []
    for i in range(1000):
        w = wiener_from_grid(t, 1, 12, i).cumulative[:, 0]
        r = skorohod_1d(w, -1.0, 1.0, t_grid=t)
        x = r.u_ref
        assert np.all((x >= -1) & (x <= 1))
        free = (x[1:] > -1) & (x[1:] < 1) & (x[:-1] > -1) & (x[:-1] < 1)
        assert np.allclose(np.diff(x)[free], np.diff(w)[free], rtol=0, atol=1e-14)
        at_barrier.append(np.mean(np.abs(x) == 1.0))
    assert np.mean(at_barrier) > 0


def test_bruteforce_examples():
    assert np.array_equal(bruteforce_resolvent(np.zeros(3), 0.3), np.zeros(3))
    assert np.allclose(bruteforce_resolvent(np.array([2.0, 0.0]), 0.5), [-2.0, 0.0], atol=1e-6)


def test_bruteforce_matches_closed_form():
    rng = np.random.default_rng(0)
    geom = SpaceGeometry(3, h_weights=[1.0, 2.0, 0.5])
    for _ in range(200):
        g = rng.normal(size=3) * rng.uniform(0.1, 5)
        eps = 10 ** rng.uniform(-3, 0)
        assert np.linalg.norm(bruteforce_resolvent(g, eps, geom) - resolvent_shrink(g, eps, geom)) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(arrays(float, 2, elements=st.floats(-4, 4)), st.floats(1e-2, 2))
def test_bruteforce_property(g, eps):
    assert np.linalg.norm(bruteforce_resolvent(g, eps) - resolvent_shrink(g, eps)) <= 1e-6


@pytest.mark.parametrize("kind", ["play", "sweep"])
def test_oracle_energy_first_order(kind):
    res = []
    for n in (2001, 4001):
        t = np.linspace(0, 2, n)
        if kind == "play":
            g = 2 * np.sin(2 * t)
            r = play_operator(g, 0.0, t_grid=t)
        else:
            g = 2 * np.column_stack([np.cos(np.pi * t), np.sin(np.pi * t)])
            r = sweeping_catchup(g, [1.0, 0.0], t_grid=t)
        res.append(np.max(np.abs(oracle_energy_residual(r, g))))
    assert 1.7 <= res[0] / res[1] <= 2.3

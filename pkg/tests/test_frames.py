import numpy as np
import pytest
from hypothesis import given

from cslab import frames as fr
from cslab.errors import ConfigError, NotDifferentiable
from cslab.frames import Level, TeichmullerPoint

from conftest import levels, ranks, taus


def test_tau_must_lie_in_upper_half_plane():
    with pytest.raises(ConfigError):
        TeichmullerPoint(0.0, 0.0)
    with pytest.raises(ConfigError):
        TeichmullerPoint(float("nan"), 1.0)


def test_level_requires_positive_integer_k():
    with pytest.raises(ConfigError):
        Level(0, 1.0)
    with pytest.raises(ConfigError):
        Level(1.5, 0.0)
    lev = Level(3, 4.0)
    assert lev.abs_t == 5.0 and lev.hbar == 0.2


def test_hodge_star_at_tau_i():
    tau = TeichmullerPoint(0.0, 1.0)
    np.testing.assert_allclose(fr.hodge_star(tau, [1, 0]), [0, 1], atol=1e-15)
    np.testing.assert_allclose(fr.hodge_star(tau, [0, 1]), [-1, 0], atol=1e-15)


@given(taus, levels, ranks)
def test_quaternion_relations(tau, lev, r):
    S = fr.build_structures(tau, lev, r)
    E = np.eye(4 * r)
    for M in (S.I_C, S.J, S.K, S.I_t):
        np.testing.assert_allclose(M @ M, -E, atol=1e-11)
    np.testing.assert_allclose(S.I_C @ S.J, -S.J @ S.I_C, atol=1e-11)


@given(taus, levels, ranks)
def test_metric_is_positive_and_compatible(tau, lev, r):
    S = fr.build_structures(tau, lev, r)
    assert np.linalg.eigvalsh(S.g_t).min() > 0
    np.testing.assert_allclose(S.I_t.T @ S.omega_t @ S.I_t, S.omega_t, atol=1e-10)


@given(taus, levels, ranks)
def test_frames_are_lagrangian_and_symplectic(tau, lev, r):
    S = fr.build_structures(tau, lev, r)
    F = fr.build_frames(tau, lev, r)
    np.testing.assert_allclose(F.X.T @ S.omega_t @ F.X, 0, atol=1e-10)
    np.testing.assert_allclose(F.Y.T @ S.omega_t @ F.Y, 0, atol=1e-10)
    np.testing.assert_allclose(F.Y, S.I_t @ F.X, atol=1e-12)


@given(taus, levels, ranks)
def test_coordinates_round_trip(tau, lev, r):
    x = np.linspace(-1, 1, 4 * r)
    p, q = fr.coords_pq(tau, lev, x, r)
    np.testing.assert_allclose(fr.coords_uv(tau, lev, p, q, r), x, atol=1e-11)


@given(taus, ranks)
def test_script_x_is_minus_i_eigenvector(tau, r):
    lev = Level(1, 0.0)
    S = fr.build_structures(tau, lev, r)
    X = fr.build_frames(tau, lev, r).script_X
    np.testing.assert_allclose(S.I_t @ X, -1j * X, atol=1e-11)


def test_projections_sum_to_identity():
    tau, lev = TeichmullerPoint(0.3, 1.2), Level(2, 0.7)
    A = np.arange(8.0).reshape(2, 4)
    P, Q = fr.project_PQ(tau, lev, A, 1)
    np.testing.assert_allclose(P + Q, A, atol=1e-14)


def test_tau_derivative_matches_known_function():
    tau = TeichmullerPoint(0.2, 1.1)
    f = lambda s: np.array([s.tau ** 2, np.conj(s.tau) ** 3])
    d = fr.tau_derivative(f, tau, "d_tau")
    db = fr.tau_derivative(f, tau, "d_tau_bar")
    np.testing.assert_allclose(d, [2 * tau.tau, 0], atol=1e-8)
    np.testing.assert_allclose(db, [0, 3 * np.conj(tau.tau) ** 2], atol=1e-8)
    # real directions: d/dtau1 = d + dbar, d/dtau2 = i(d - dbar)
    np.testing.assert_allclose(fr.tau_derivative(f, tau, "d_tau1"), d + db, atol=1e-8)
    np.testing.assert_allclose(fr.tau_derivative(f, tau, "d_tau2"), 1j * (d - db), atol=1e-8)


def test_tau_derivative_rejects_non_smooth_input():
    tau = TeichmullerPoint(0.0, 1.0)
    with pytest.raises(NotDifferentiable):
        fr.tau_derivative(lambda s: np.array([abs(s.tau1 - 2e-4)]), tau, "d_tau")
    with pytest.raises(ConfigError):
        fr.direction_weights("sideways")

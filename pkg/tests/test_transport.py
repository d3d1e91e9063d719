import numpy as np
import pytest
from hypothesis import given, strategies as st

from cslab import sections as sc
from cslab import transport as tp
from cslab.errors import ConfigError, DegreeOverflow, StepUnstable
from cslab.frames import Level, TeichmullerPoint

from conftest import random_coeffs, taus

LEV = Level(1, 0.5)
I = TeichmullerPoint(0.0, 1.0)


def test_parse_tau_and_paths():
    assert tp.parse_tau("0.5+2i").tau == 0.5 + 2j
    path = tp.TeichPath.from_string("0+1i,1+1i")
    assert path.segment_steps() == [1000]
    assert tp.TeichPath.square_loop(I, 0.1).closed
    with pytest.raises(ConfigError):
        tp.parse_tau("1-1i")
    with pytest.raises(ConfigError):
        tp.TeichPath.from_string("0+1i")


def test_transport_preserves_norm_and_reverses():
    h0 = sc.basis_vector("hermite", 1, 16, I, LEV, (0, 0))
    path = tp.TeichPath.from_string("0+1i,1+1i")
    out = tp.transport("HW", path, h0)
    assert out.norm_drift < 1e-8
    back = tp.transport("HW", path.reversed(), out.section, headroom=0).section
    assert np.abs(back.coeffs - h0.coeffs).max() < 1e-8


def test_transport_requires_headroom_and_matching_start():
    top = sc.basis_vector("fock", 1, 8, I, LEV, (5, 0))
    with pytest.raises(DegreeOverflow):
        tp.transport("L2", tp.TeichPath.from_string("0+1i,0.1+1i"), top)
    h0 = sc.basis_vector("fock", 1, 8, TeichmullerPoint(0.5, 1.0), LEV, (0, 0))
    with pytest.raises(ConfigError):
        tp.transport("L2", tp.TeichPath.from_string("0+1i,0.1+1i"), h0)
    with pytest.raises(ConfigError):
        tp.transport("HW", tp.TeichPath.from_string("0+1i,0.1+1i"), sc.basis_vector("fock", 1, 8, I, LEV, (0, 0)))


def test_coarse_steps_are_rejected():
    h0 = sc.basis_vector("hermite", 1, 16, I, LEV, (0, 0))
    with pytest.raises(StepUnstable):
        tp.transport("HW", tp.TeichPath.from_string("0+1i,3+1i", 2), h0, tol=1e-12)


@pytest.mark.parametrize("kind, basis", [("CH", "fock"), ("HW", "hermite")])
def test_small_loop_holonomy_is_identity(kind, basis):
    loop = tp.TeichPath.square_loop(I, 0.1, 250)
    H = tp.holonomy(kind, loop, sc.Basis(basis, 1, 16), LEV, block_degree=4)
    assert tp.holonomy_defect(H) < 1e-6


def test_holonomy_defect_shrinks_faster_than_area():
    # both connections are flat, so the defect comes from truncation and
    # integration error only and decays much faster than the loop area
    b = sc.Basis("hermite", 1, 8)
    d = [tp.holonomy_defect(tp.holonomy("HW", tp.TeichPath.square_loop(I, rad, 50), b, LEV,
                                        block_degree=4, check=False)) for rad in (0.1, 0.05)]
    assert d[0] / d[1] > 4


def test_mcg_group_law():
    S, T = tp.MCGElement.S(), tp.MCGElement.T()
    assert (S @ S @ S @ S).matrix == tp.MCGElement.identity().matrix
    assert ((S @ T) @ (S @ T) @ (S @ T)).matrix == (S @ S).matrix
    with pytest.raises(ConfigError):
        tp.MCGElement(((2, 0), (0, 1)))


@given(taus, st.sampled_from([tp.MCGElement.S(), tp.MCGElement.T(), tp.MCGElement(((2, 1), (1, 1)))]))
def test_mcg_action_on_tau_composes(tau, g):
    back = tp.mcg_act(g.inverse(), tp.mcg_act(g, tau))
    assert abs(back.tau - tau.tau) < 1e-10


@pytest.mark.parametrize("kind, basis", [("HW", "hermite"), ("L2", "fock")])
def test_gamma_equivariance(kind, basis):
    tau = TeichmullerPoint(0.3, 1.2)
    for g in (tp.MCGElement.S(), tp.MCGElement.T()):
        assert tp.gamma_equivariance_residual(kind, g, tau, LEV, sc.Basis(basis, 1, 10)) < 1e-7


def test_delta_derivative_of_polynomial_family():
    tau0 = TeichmullerPoint(0.1, 1.1)
    b = sc.Basis("fock", 1, 6)
    rng = np.random.default_rng(0)
    parts = [sc.make_section("fock", 1, 6, tau0, LEV, random_coeffs(rng, b, 4)) for _ in range(3)]
    fam = tp.polynomial_family(parts, tau0)
    tau = TeichmullerPoint(0.2, 1.0)
    dz = tau.tau - tau0.tau
    exact = parts[1].coeffs + 2 * parts[2].coeffs * dz
    np.testing.assert_allclose(tp.delta_derivative(fam, "d_tau", tau).coeffs, exact, atol=1e-7)
    np.testing.assert_allclose(tp.delta_derivative(fam, "d_tau_bar", tau).coeffs, 0, atol=1e-7)


def test_intertwining_for_random_families():
    tau = TeichmullerPoint(-0.2, 1.3)
    b = sc.Basis("hermite", 1, 10)
    rng = np.random.default_rng(4)
    fams = [tp.polynomial_family([sc.make_section("hermite", 1, 10, tau, LEV, random_coeffs(rng, b, 6))
                                  for _ in range(2)], tau) for _ in range(4)]
    for d in ("d_tau", "d_tau_bar"):
        assert tp.verify_intertwining(tau, LEV, fams, d)["max_residual"] < 1e-8
    assert tp.intertwining_residual(fams[0], tau, fock_kind="CH") < 1e-8

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cslab import cartan as ct
from cslab.errors import ConfigError, DimensionMismatch, GroupTooLarge


@pytest.mark.parametrize("n, order", [(2, 2), (3, 6), (4, 24)])
def test_weyl_group_orders(n, order):
    assert len(ct.enumerate_weyl(ct.preset_an(n))) == order


def test_a1_preset_matches_an_with_n2():
    assert len(ct.enumerate_weyl(ct.preset_a1())) == 2
    assert ct.preset_a1().rank == ct.preset_an(2).rank == 1


def test_weyl_group_preserves_lattice_and_gram():
    data = ct.preset_an(3)
    Linv = np.linalg.inv(data.lattice_basis)
    for w in ct.enumerate_weyl(data):
        n = Linv @ w @ data.lattice_basis
        np.testing.assert_allclose(n, np.rint(n), atol=1e-12)
        np.testing.assert_allclose(w.T @ data.gram @ w, data.gram, atol=1e-12)


def test_infinite_order_generator_is_rejected():
    data = ct.CartanData(1, np.eye(1), (2 * np.eye(1),), np.eye(1))
    with pytest.raises(GroupTooLarge):
        ct.enumerate_weyl(data, max_order=50)


def test_invalid_cartan_data():
    with pytest.raises(ConfigError):
        ct.CartanData(1, -np.eye(1), (), np.eye(1))
    with pytest.raises(DimensionMismatch):
        ct.CartanData(2, np.eye(2), (np.eye(3),), np.eye(2))
    with pytest.raises(ConfigError):
        ct.from_config({"preset": "E8"})
    with pytest.raises(ConfigError):
        ct.from_config({"preset": "custom", "rank": 1})


def test_orthonormalized_keeps_group_structure():
    data = ct.CartanData(1, np.array([[4.0]]), (-np.eye(1),), np.array([[1.0]]))
    on = data.orthonormalized()
    assert on.is_orthonormal
    np.testing.assert_allclose(on.lattice_basis, [[2.0]])


@given(st.integers(0, 2**32 - 1))
def test_gauge_action_composes(seed):
    rng = np.random.default_rng(seed)
    data = ct.preset_an(3)
    weyl = ct.enumerate_weyl(data)
    g1, g2 = (ct.random_gauge_element(rng, data, weyl) for _ in range(2))
    x = (rng.normal(size=2), rng.normal(size=2))
    lhs = ct.gauge_act(ct.compose(g1, g2, data, weyl), x, data, weyl)
    rhs = ct.gauge_act(g1, ct.gauge_act(g2, x, data, weyl), data, weyl)
    np.testing.assert_allclose(np.concatenate(lhs), np.concatenate(rhs), atol=1e-12)


def test_identity_element_acts_trivially():
    data = ct.preset_a1()
    weyl = ct.enumerate_weyl(data)
    x = (np.array([0.3]), np.array([-0.2]))
    out = ct.gauge_act(ct.identity_element(data), x, data, weyl)
    np.testing.assert_allclose(np.concatenate(out), [0.3, -0.2])
    with pytest.raises(DimensionMismatch):
        ct.gauge_act(ct.identity_element(data), (np.zeros(2), np.zeros(2)), data, weyl)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flagcurv.coset_checks import find_transverse, flat_plane_test, reductive_decomposition
from flagcurv.errors import DegenerateFlagError, EuclideanFactorError, InputError, NotSubalgebraError
from flagcurv.invariant_metric import biinvariant_sectional_oracle
from flagcurv.lie_algebra import su2, su2_plus_r, su2_plus_su2


def test_group_case():
    g = su2()
    space = reductive_decomposition(g)
    assert space.dim_m == 3 and space.h_basis.shape[1] == 0
    v1 = find_transverse(space, g.basis("e1"))
    assert g.ip(v1, g.basis("e1")) == pytest.approx(0.0, abs=1e-12)
    assert g.norm(g.bracket(g.basis("e1"), v1)) == pytest.approx(1.0)


def test_circle_subgroup():
    g = su2()
    space = reductive_decomposition(g, g.basis("e3")[:, None])
    res = space.residuals()
    assert max(res.values()) <= 1e-12
    np.testing.assert_allclose(np.abs(space.m_basis.T @ space.m_basis), np.eye(2), atol=1e-12)
    assert np.all(space.m_basis[2] == 0)
    v1 = find_transverse(space, g.basis("e1"))
    np.testing.assert_allclose(np.abs(v1), [0, 1, 0], atol=1e-10)
    np.testing.assert_allclose(np.abs(g.bracket(g.basis("e1"), v1)), [0, 0, 1], atol=1e-10)


def test_line_subalgebra_and_rejection():
    g = su2()
    space = reductive_decomposition(g, (g.basis("e1") + g.basis("e2"))[:, None])
    assert space.dim_m == 2
    with pytest.raises(NotSubalgebraError):
        reductive_decomposition(g, np.stack([g.basis("e1"), g.basis("e2")], axis=1))
    with pytest.raises(InputError):
        reductive_decomposition(g, np.stack([g.basis("e1"), 2 * g.basis("e1")], axis=1))


def test_euclidean_factor():
    h = su2_plus_r()
    with pytest.raises(EuclideanFactorError):
        find_transverse(reductive_decomposition(h), h.basis("u0"))


def test_transverse_input_checks():
    g = su2()
    space = reductive_decomposition(g, g.basis("e3")[:, None])
    with pytest.raises(InputError):
        find_transverse(space, np.zeros(3))
    with pytest.raises(InputError):
        find_transverse(space, g.basis("e3"))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_transverse_properties(seed):
    k = su2_plus_su2()
    space = reductive_decomposition(k, k.basis("e3")[:, None])
    w1 = space.project_m(np.random.default_rng(seed).standard_normal(6))
    if k.norm(w1) < 1e-3:
        return
    v1 = find_transverse(space, w1)
    assert abs(k.ip(w1, v1)) <= 1e-12 * max(1.0, k.norm(w1))
    assert k.norm(v1) == pytest.approx(1.0)
    assert k.norm(k.bracket(w1, v1)) > 0
    assert k.norm(v1 - space.project_m(v1)) <= 1e-12


def test_flat_plane_examples():
    g = su2()
    space = reductive_decomposition(g)
    assert flat_plane_test(space, (1.0, np.zeros(3)), (0.0, g.basis("e2")))
    assert not flat_plane_test(space, (0.0, g.basis("e1")), (0.0, g.basis("e2")))
    h = su2_plus_r()
    hs = reductive_decomposition(h)
    with pytest.raises(DegenerateFlagError):
        flat_plane_test(hs, (0.0, h.basis("e3")), (0.0, 2 * h.basis("e3")))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_flat_plane_respan_invariance(seed):
    h = su2_plus_r()
    space = reductive_decomposition(h)
    rng = np.random.default_rng(seed)
    t, s = rng.standard_normal(2)
    u1, v1 = rng.standard_normal((2, 4))
    if rng.random() < 0.5:  # force a commuting pair
        v1 = 0.7 * u1 + rng.standard_normal() * h.basis("u0")
    verdict = flat_plane_test(space, (t, u1), (s, v1))
    m = rng.standard_normal((2, 2))
    if abs(np.linalg.det(m)) < 1e-2:
        return
    a = (m[0, 0] * t + m[0, 1] * s, m[0, 0] * u1 + m[0, 1] * v1)
    b = (m[1, 0] * t + m[1, 1] * s, m[1, 0] * u1 + m[1, 1] * v1)
    assert flat_plane_test(space, a, b) == verdict


def test_flat_plane_agrees_with_oracle_group_case():
    h = su2_plus_r()
    space = reductive_decomposition(h)
    rng = np.random.default_rng(0)
    for i in range(100):
        u, v = rng.standard_normal((2, 4))
        if i % 2:
            v = rng.standard_normal() * u + rng.standard_normal() * h.basis("u0")
        flat = flat_plane_test(space, (0.0, u), (0.0, v))
        assert flat == (biinvariant_sectional_oracle(h, u, v) <= 1e-6)

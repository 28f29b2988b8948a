import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ymflow import lie

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)
vec4 = arrays(np.float64, 4, elements=st.floats(-1, 1)).filter(lambda q: np.linalg.norm(q) > 1e-3)


def matrix_exp_series(M, terms=20):
    out = np.eye(2, dtype=complex)
    term = np.eye(2, dtype=complex)
    for k in range(1, terms + 1):
        term = term @ M / k
        out = out + term
    return out


def test_identity_is_neutral(rng):
    g = lie.random_group(rng, (5,))
    assert np.allclose(lie.group_mul(lie.IDENTITY, g), g, atol=1e-15)
    assert np.allclose(lie.group_mul(g, lie.IDENTITY), g, atol=1e-15)


def test_inverse(rng):
    g = lie.random_group(rng, (5,))
    assert np.allclose(lie.group_mul(g, lie.inverse(g)), lie.IDENTITY, atol=1e-14)


def test_product_matches_pauli_matrices():
    # i s1 . i s2 = -s1 s2 = -i s3, i.e. the quaternion (0, 0, 0, -1)
    m = lie.to_matrix([0, 1, 0, 0]) @ lie.to_matrix([0, 0, 1, 0])
    assert np.allclose(m, -1j * lie.PAULI[2])
    assert np.allclose(lie.group_mul([0, 1, 0, 0], [0, 0, 1, 0]), [0, 0, 0, -1])


def test_product_is_matrix_product(rng):
    a = lie.random_group(rng, (20,))
    b = lie.random_group(rng, (20,))
    ab = lie.to_matrix(lie.group_mul(a, b))
    assert np.allclose(ab, lie.to_matrix(a) @ lie.to_matrix(b), atol=1e-14)


def test_associative(rng):
    a, b, c = (lie.random_group(rng, (10,)) for _ in range(3))
    lhs = lie.group_mul(lie.group_mul(a, b), c)
    rhs = lie.group_mul(a, lie.group_mul(b, c))
    assert np.allclose(lhs, rhs, atol=1e-14)


def test_exp_zero():
    assert np.allclose(lie.exp_map(np.zeros(3)), lie.IDENTITY)


def test_exp_two_pi_is_minus_identity():
    q = lie.exp_map([2 * np.pi, 0, 0])
    assert np.allclose(q, [-1, 0, 0, 0], atol=1e-15)
    assert np.allclose(matrix_exp_series(lie.algebra_to_matrix([2 * np.pi, 0, 0]), 40), -np.eye(2), atol=1e-12)


def test_exp_matches_series(rng):
    c = rng.normal(size=(10, 3)) * 2
    for ci in c:
        assert np.allclose(lie.to_matrix(lie.exp_map(ci)), matrix_exp_series(lie.algebra_to_matrix(ci)), atol=1e-12)


def test_exp_series_branch_continuous():
    c = np.array([3e-7, -2e-7, 1e-7])
    q = lie.exp_map(c)
    assert np.allclose(lie.to_matrix(q), matrix_exp_series(lie.algebra_to_matrix(c)), atol=1e-16)


def test_exp_inverse_symmetry(rng):
    c = rng.normal(size=(10, 3))
    assert np.allclose(lie.group_mul(lie.exp_map(c), lie.exp_map(-c)), lie.IDENTITY, atol=1e-14)


def test_project_identity_is_zero():
    assert np.allclose(lie.project_algebra(np.eye(2, dtype=complex)), 0.0)


def test_project_idempotent(rng):
    c = rng.normal(size=(10, 3))
    assert np.allclose(lie.project_algebra(lie.algebra_to_matrix(c)), c, atol=1e-14)


def test_project_real_layout(rng):
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    packed = np.stack([m.real.ravel(), m.imag.ravel()], axis=-1).ravel()
    assert np.allclose(lie.project_algebra(packed), lie.project_algebra(m))


def test_project_of_exp_is_linear_at_small_angle():
    # project(exp(x)) = x + O(|x|^3)
    errs = []
    for eps in (1e-2, 5e-3):
        x = eps * np.array([0.3, -0.5, 0.8])
        errs.append(np.linalg.norm(lie.project_algebra(lie.to_matrix(lie.exp_map(x))) - x))
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.05)


def test_project_quaternion_agrees(rng):
    q = lie.random_group(rng, (10,))
    assert np.allclose(lie.project_quaternion(q), lie.project_algebra(lie.to_matrix(q)), atol=1e-14)


def test_bracket_structure():
    T1, T2, T3 = np.eye(3)
    assert np.allclose(lie.bracket(T1, T2), T3)
    assert np.allclose(lie.bracket(T2, T3), T1)
    m1, m2 = lie.algebra_to_matrix(T1), lie.algebra_to_matrix(T2)
    assert np.allclose(m1 @ m2 - m2 @ m1, lie.algebra_to_matrix(T3))


def test_inner_product_trace_form(rng):
    x, y = rng.normal(size=(2, 3))
    tr = -2 * np.trace(lie.algebra_to_matrix(x) @ lie.algebra_to_matrix(y)).real
    assert lie.inner(x, y) == pytest.approx(tr)


def test_adjoint_matches_matrices(rng):
    g = lie.random_group(rng, (8,))
    c = rng.normal(size=(8, 3))
    G = lie.to_matrix(g)
    expected = lie.project_algebra(G @ lie.algebra_to_matrix(c) @ np.conj(np.swapaxes(G, -1, -2)))
    assert np.allclose(lie.adjoint(g, c), expected, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(vec4, vec4)
def test_product_unit_norm(a, b):
    out = lie.group_mul(lie.normalize(a), lie.normalize(b))
    assert abs(np.linalg.norm(out) - 1.0) < 1e-12


@settings(max_examples=200, deadline=None)
@given(vec3)
def test_log_inverts_exp(x):
    if np.linalg.norm(x) > 2 * np.pi - 1e-6:
        # outside the principal branch: log returns the representative with |c| < 2 pi
        c = lie.log_map(lie.exp_map(x))
        assert np.allclose(lie.exp_map(c), lie.exp_map(x), atol=1e-9)
        assert np.linalg.norm(c) < 2 * np.pi + 1e-9
    else:
        assert np.allclose(lie.log_map(lie.exp_map(x)), x, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(vec3, vec3, vec4)
def test_ad_invariance(x, y, g):
    g = lie.normalize(g)
    assert lie.inner(lie.adjoint(g, x), lie.adjoint(g, y)) == pytest.approx(lie.inner(x, y), abs=1e-10 * (1 + abs(lie.inner(x, y))) + 1e-10)


@settings(max_examples=100, deadline=None)
@given(vec3, vec3, st.floats(-3, 3))
def test_inner_bilinear_symmetric(x, y, s):
    assert lie.inner(x, y) == pytest.approx(lie.inner(y, x))
    assert lie.inner(s * x, y) == pytest.approx(s * lie.inner(x, y), abs=1e-9)
    assert lie.norm2(x) >= 0


def test_random_ball_radius(rng):
    c = lie.random_algebra_ball(rng, (1000,), 0.3)
    assert np.max(np.linalg.norm(c, axis=-1)) <= 0.3

"""SU(2) and su(2) kernels on numpy arrays.

Group elements are unit quaternions ``q = (q0, q1, q2, q3)`` standing for the
2x2 matrix ``q0*I + i*(q1*s1 + q2*s2 + q3*s3)`` with Pauli matrices ``sk``.
Algebra elements are coefficient triples ``c`` in the basis ``T_k = -(i/2) s_k``,
which is orthonormal for ``<X, Y> = -2 tr(XY)`` and satisfies
``[T1, T2] = T3`` (cyclic).  The bracket is therefore the cross product.

Every function broadcasts over leading axes: quaternions live on a trailing
axis of length 4, algebra coefficients on a trailing axis of length 3.
"""

from __future__ import annotations

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# Below this |c| the closed forms lose digits; switch to series.
_SERIES_CUTOFF = 1e-6


def normalize(q):
    """Project quaternions back onto the unit sphere."""
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def conj(q):
    """Group inverse of a unit quaternion."""
    q = np.asarray(q, dtype=float)
    out = -q
    out[..., 0] = q[..., 0]
    return out


inverse = conj


def group_mul(a, b, renormalize=True):
    """Matrix product of two SU(2) elements in quaternion form."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, av = a[..., :1], a[..., 1:]
    b0, bv = b[..., :1], b[..., 1:]
    scalar = a0 * b0 - np.sum(av * bv, axis=-1, keepdims=True)
    vector = a0 * bv + b0 * av - np.cross(av, bv)
    out = np.concatenate([scalar, vector], axis=-1)
    return normalize(out) if renormalize else out


def exp_map(c):
    """Exponential su(2) -> SU(2).

    ``exp(sum c_k T_k) = cos(|c|/2) I - i sin(|c|/2) (c/|c|).s``
    """
    c = np.asarray(c, dtype=float)
    theta = np.linalg.norm(c, axis=-1, keepdims=True)
    small = theta < _SERIES_CUTOFF
    safe = np.where(small, 1.0, theta)
    half_sinc = np.where(small, 0.5 - theta**2 / 48.0, np.sin(0.5 * safe) / safe)
    q0 = np.cos(0.5 * theta)
    return np.concatenate([q0, -half_sinc * c], axis=-1)


def log_map(q):
    """Inverse of :func:`exp_map` on the branch ``|c| < 2*pi``."""
    q = np.asarray(q, dtype=float)
    v = q[..., 1:]
    vnorm = np.linalg.norm(v, axis=-1, keepdims=True)
    theta = 2.0 * np.arctan2(vnorm, q[..., :1])
    small = (vnorm < _SERIES_CUTOFF) & (q[..., :1] > 0)
    safe = np.where(small, 1.0, np.maximum(vnorm, 1e-300))
    # theta / |v| -> 2 / q0 (1 + |v|^2 / 6 ...) as |v| -> 0 with q0 > 0
    ratio = np.where(small, 2.0 / np.abs(q[..., :1]) * (1.0 + vnorm**2 / 6.0), theta / safe)
    return -ratio * v


def to_matrix(q):
    """Embed quaternions as complex 2x2 matrices."""
    q = np.asarray(q, dtype=float)
    eye = np.eye(2, dtype=complex)
    return q[..., 0, None, None] * eye + 1j * np.einsum("...k,kij->...ij", q[..., 1:], PAULI)


def from_matrix(m):
    """Read quaternion coefficients off ``q0 I + i q.s``; no projection."""
    m = np.asarray(m, dtype=complex)
    q0 = 0.5 * np.real(np.trace(m, axis1=-2, axis2=-1))
    qv = 0.5 * np.real(-1j * np.einsum("...ij,kji->...k", m, PAULI))
    return np.concatenate([q0[..., None], qv], axis=-1)


def algebra_to_matrix(c):
    """Embed algebra coefficients as anti-Hermitian traceless matrices."""
    c = np.asarray(c, dtype=float)
    return -0.5j * np.einsum("...k,kij->...ij", c, PAULI)


def project_algebra(m):
    """Coefficients of the traceless anti-Hermitian part of a 2x2 matrix.

    ``m`` is a complex array with trailing shape (2, 2), or a real array with
    trailing shape (8,) holding ``(re m00, im m00, re m01, im m01, ...)``.
    """
    m = np.asarray(m)
    if not np.iscomplexobj(m) and m.shape[-1] == 8:
        m = (m[..., 0::2] + 1j * m[..., 1::2]).reshape(m.shape[:-1] + (2, 2))
    m = np.asarray(m, dtype=complex)
    anti = 0.5 * (m - np.conj(np.swapaxes(m, -1, -2)))
    tr = np.trace(anti, axis1=-2, axis2=-1)
    anti = anti - 0.5 * tr[..., None, None] * np.eye(2)
    # c_k = <A, T_k> = -2 tr(A T_k) = i tr(A s_k)
    return np.real(1j * np.einsum("...ij,kji->...k", anti, PAULI))


def project_quaternion(q):
    """:func:`project_algebra` specialised to real combinations of quaternions."""
    q = np.asarray(q, dtype=float)
    return -2.0 * q[..., 1:]


def inner(x, y):
    """Invariant inner product, ``<T_j, T_k> = delta_jk``."""
    return np.sum(np.asarray(x, dtype=float) * np.asarray(y, dtype=float), axis=-1)


def norm2(x):
    return inner(x, x)


def bracket(x, y):
    """Lie bracket; ``[T1, T2] = T3``."""
    return np.cross(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def adjoint(g, c):
    """``Ad_g c = g c g^-1`` for group elements ``g`` and algebra elements ``c``."""
    g = np.asarray(g, dtype=float)
    c = np.asarray(c, dtype=float)
    # T_k <-> pure quaternion -e_k / 2
    pure = np.concatenate([np.zeros(c.shape[:-1] + (1,)), -0.5 * c], axis=-1)
    rotated = group_mul(group_mul(g, pure, renormalize=False), conj(g), renormalize=False)
    return -2.0 * rotated[..., 1:]


def random_algebra_ball(rng, shape, radius):
    """Uniform samples from the ball ``|c| <= radius`` in su(2)."""
    direction = rng.standard_normal(tuple(shape) + (3,))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    r = radius * rng.random(tuple(shape) + (1,)) ** (1.0 / 3.0)
    return r * direction


def random_group(rng, shape):
    """Haar-distributed SU(2) elements."""
    return normalize(rng.standard_normal(tuple(shape) + (4,)))

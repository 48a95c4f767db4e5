"""Pointwise algebra of symmetric traceless 3x3 tensors.

Two array layouts are used throughout the package:

* ``Mat3``: an array of shape ``(3, 3, ...)``.  The two leading axes are the
  matrix row and column; any trailing axes are grid (or sample) axes.  Row-major
  component order is ``M[0, 0], M[0, 1], ..., M[2, 2]``.
* ``SymTraceless3``: an array of shape ``(5, ...)`` holding coordinates in the
  fixed orthonormal basis ``BASIS`` below.  Because the basis is orthonormal
  with respect to the Frobenius inner product, ``|Q|^2`` is simply the sum of
  squares of the five coordinates and ``A : B`` is their dot product.

Canonical basis (index: matrix)::

    0: diag(-1, -1, 2) / sqrt(6)
    1: diag(1, -1, 0) / sqrt(2)
    2: (e_x e_y + e_y e_x) / sqrt(2)
    3: (e_x e_z + e_z e_x) / sqrt(2)
    4: (e_y e_z + e_z e_y) / sqrt(2)
"""
import numpy as np

S2 = np.sqrt(2.0)
S6 = np.sqrt(6.0)

BASIS = np.zeros((5, 3, 3))
BASIS[0] = np.diag([-1.0, -1.0, 2.0]) / S6
BASIS[1] = np.diag([1.0, -1.0, 0.0]) / S2
BASIS[2, 0, 1] = BASIS[2, 1, 0] = 1.0 / S2
BASIS[3, 0, 2] = BASIS[3, 2, 0] = 1.0 / S2
BASIS[4, 1, 2] = BASIS[4, 2, 1] = 1.0 / S2

IDENTITY = np.eye(3)


def to_matrix(q):
    """Reconstruct the full symmetric traceless matrix from 5 coordinates.

    Off-diagonal entries are written from the same product, so the result is
    exactly symmetric; the last diagonal entry is minus the sum of the first
    two, so the trace vanishes to rounding.
    """
    q = np.asarray(q, dtype=float)
    m = np.empty((3, 3) + q.shape[1:])
    a = q[0] / S6
    b = q[1] / S2
    m[0, 0] = b - a
    m[1, 1] = -a - b
    m[2, 2] = 2.0 * a
    m[0, 1] = m[1, 0] = q[2] / S2
    m[0, 2] = m[2, 0] = q[3] / S2
    m[1, 2] = m[2, 1] = q[4] / S2
    return m


def from_matrix(m):
    """Coordinates of the symmetric traceless part of ``m``.

    This is the orthogonal projection of an arbitrary ``Mat3`` onto the
    symmetric traceless subspace, expressed in ``BASIS``.
    """
    m = np.asarray(m, dtype=float)
    q = np.empty((5,) + m.shape[2:])
    q[0] = (2.0 * m[2, 2] - m[0, 0] - m[1, 1]) / S6
    q[1] = (m[0, 0] - m[1, 1]) / S2
    q[2] = (m[0, 1] + m[1, 0]) / S2
    q[3] = (m[0, 2] + m[2, 0]) / S2
    q[4] = (m[1, 2] + m[2, 1]) / S2
    return q


def trace(a):
    a = np.asarray(a)
    return a[0, 0] + a[1, 1] + a[2, 2]


def project_traceless(a):
    """Return ``A - tr(A)/3 I`` (the traceless projection of any ``Mat3``)."""
    a = np.array(a, dtype=float)
    t = trace(a) / 3.0
    for i in range(3):
        a[i, i] = a[i, i] - t
    return a


def matmul(a, b):
    """Pointwise matrix product of two ``Mat3`` arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    shape = np.broadcast_shapes(a.shape[2:], b.shape[2:])
    out = np.zeros((3, 3) + shape)
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j]
    return out


def commutator(a, b):
    """``AB - BA``; antisymmetric whenever both arguments are symmetric."""
    return matmul(a, b) - matmul(b, a)


def frobenius_inner(a, b):
    """``A : B = sum_ij A_ij B_ij`` over the two leading axes."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.sum(a * b, axis=(0, 1))


def square(q):
    """``QQ`` as a full matrix, for ``q`` given in 5 coordinates."""
    m = to_matrix(q)
    return matmul(m, m)


def square_traceless(q):
    """5 coordinates of ``QQ - tr(QQ)/3 I`` in closed form."""
    q0, q1, q2, q3, q4 = np.asarray(q, dtype=float)
    return np.stack([
        (2.0 * (q0 * q0 - q1 * q1 - q2 * q2) + q3 * q3 + q4 * q4) / (2.0 * S6),
        (q3 * q3 - q4 * q4) / (2.0 * S2) - 2.0 * q0 * q1 / S6,
        q3 * q4 / S2 - 2.0 * q0 * q2 / S6,
        q0 * q3 / S6 + (q1 * q3 + q2 * q4) / S2,
        q0 * q4 / S6 + (q2 * q3 - q1 * q4) / S2,
    ])


def norm2(q):
    """``|Q|^2`` for 5-coordinate input."""
    q = np.asarray(q)
    return np.sum(q * q, axis=0)


def trace_cube(q):
    """``tr(Q^3)`` for 5-coordinate input (equal to ``QQ : Q``)."""
    q = np.asarray(q, dtype=float)
    return np.sum(square_traceless(q) * q, axis=0)


def sym(a):
    a = np.asarray(a)
    return 0.5 * (a + np.swapaxes(a, 0, 1))


def skew(a):
    a = np.asarray(a)
    return 0.5 * (a - np.swapaxes(a, 0, 1))


def from_eigenvalues(lam):
    """5 coordinates of ``diag(lam)``; ``lam`` has shape ``(3, ...)`` and sums to 0."""
    lam = np.asarray(lam, dtype=float)
    m = np.zeros((3, 3) + lam.shape[1:])
    for i in range(3):
        m[i, i] = lam[i]
    return from_matrix(m)

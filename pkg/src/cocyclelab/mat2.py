"""2x2 complex matrix algebra with the conventions used throughout the package.

Matrices are plain ``numpy`` arrays of shape ``(2, 2)`` (or stacks ``(..., 2, 2)``
for the batch helpers).  Points of the Riemann sphere are either a Python
``complex`` or the singleton :data:`INF`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonUnimodularDeterminant, NotSU2Free

ALG_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
J = np.diag([1.0, -1.0]).astype(complex)
Q = (-1.0 / (1.0 + 1.0j)) * np.array([[1.0, -1.0j], [1.0, 1.0j]])


class _Infinity:
    """The point at infinity of CP^1."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_inf(z) -> bool:
    return z is INF


def mat(a, b, c, d) -> np.ndarray:
    return np.array([[a, b], [c, d]], dtype=complex)


def rotation(theta: float) -> np.ndarray:
    """R_theta, rotation by the angle 2*pi*theta."""
    c, s = np.cos(2 * np.pi * theta), np.sin(2 * np.pi * theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def det(A):
    A = np.asarray(A)
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def adj(A):
    """Adjugate; equals the inverse for determinant-one matrices."""
    A = np.asarray(A)
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 1, 1] = A[..., 0, 0]
    out[..., 0, 1] = -A[..., 0, 1]
    out[..., 1, 0] = -A[..., 1, 0]
    return out


def dagger(A):
    return np.conj(np.swapaxes(np.asarray(A), -1, -2))


def _check_unimodular(A, tol=ALG_TOL):
    dev = np.max(np.abs(det(A) - 1.0))
    if not dev <= tol * max(1.0, float(np.max(np.abs(A))) ** 2):
        raise NonUnimodularDeterminant(f"|det A - 1| = {dev:.3e} exceeds tolerance")


def is_sl2(A, tol=ALG_TOL) -> bool:
    A = np.asarray(A)
    return bool(abs(det(A) - 1.0) <= tol * max(1.0, np.abs(A).max() ** 2))


def is_su11(A, tol=ALG_TOL) -> bool:
    A = np.asarray(A)
    scale = max(1.0, np.abs(A).max() ** 2)
    return bool(np.abs(dagger(A) @ J @ A - J).max() <= tol * scale) and is_sl2(A, tol)


def is_su2(A, tol=ALG_TOL) -> bool:
    A = np.asarray(A)
    return bool(np.abs(dagger(A) @ A - I2).max() <= tol) and is_sl2(A, tol)


def frob2(A):
    """tr(A* A), batched."""
    return np.sum(np.abs(np.asarray(A)) ** 2, axis=(-2, -1))


def norm_from_trace(tr):
    """Operator norm of a determinant-one matrix from tr(A* A)."""
    tr = np.maximum(np.asarray(tr, dtype=float), 2.0)
    return np.sqrt(0.5 * (tr + np.sqrt(tr * tr - 4.0)))


def op_norm(A) -> float:
    """Operator norm of a determinant-one 2x2 matrix via the trace closed form."""
    A = np.asarray(A, dtype=complex)
    _check_unimodular(A)
    return float(norm_from_trace(frob2(A)))


def op_norms(A):
    """Batched operator norm for stacks of determinant-one matrices (no det check)."""
    return norm_from_trace(frob2(A))


def singular_norm(A):
    """Largest singular value of arbitrary (not necessarily unimodular) matrices."""
    A = np.asarray(A)
    f = frob2(A)
    d = np.abs(det(A))
    disc = np.sqrt(np.maximum(f * f - 4.0 * d * d, 0.0))
    return np.sqrt(0.5 * (f + disc))


def spectral_radius(B) -> float:
    B = np.asarray(B, dtype=complex)
    tr = B[0, 0] + B[1, 1]
    root = np.sqrt(tr * tr - 4.0 * det(B))
    return float(max(abs(0.5 * (tr + root)), abs(0.5 * (tr - root))))


def spectral_radii(B):
    B = np.asarray(B, dtype=complex)
    tr = B[..., 0, 0] + B[..., 1, 1]
    root = np.sqrt(tr * tr - 4.0 * det(B))
    return np.maximum(np.abs(0.5 * (tr + root)), np.abs(0.5 * (tr - root)))


def mobius_apply(A, z):
    """Image of z in CP^1 under z -> (a z + b) / (c z + d)."""
    (a, b), (c, d) = np.asarray(A, dtype=complex)
    if z is INF:
        return INF if c == 0 else complex(a / c)
    num = a * z + b
    den = c * z + d
    if den == 0:
        return INF
    return complex(num / den)


def point_to_vector(z) -> np.ndarray:
    if z is INF:
        return np.array([1.0, 0.0], dtype=complex)
    return np.array([z, 1.0], dtype=complex)


def vector_to_point(w):
    w0, w1 = complex(w[0]), complex(w[1])
    if w1 == 0 or abs(w1) <= 1e-300 * abs(w0):
        return INF
    return w0 / w1


def chordal_distance(z, w) -> float:
    """Chordal metric on CP^1, finite at INF."""
    if z is INF and w is INF:
        return 0.0
    if z is INF:
        return 1.0 / np.sqrt(1.0 + abs(w) ** 2)
    if w is INF:
        return 1.0 / np.sqrt(1.0 + abs(z) ** 2)
    return abs(z - w) / np.sqrt((1.0 + abs(z) ** 2) * (1.0 + abs(w) ** 2))


def in_ball_at_inf(z, r) -> bool:
    """Membership in B(INF, r) = {|z| > r}."""
    return z is INF or abs(z) > r


def in_ball_at_zero(z, r) -> bool:
    return z is not INF and abs(z) < r


def conjugate_by_Q(A) -> np.ndarray:
    """Q* A Q; maps SU(1,1) onto SL(2,R)."""
    return dagger(Q) @ np.asarray(A, dtype=complex) @ Q


@dataclass(frozen=True, eq=False)
class PolarParts:
    """A = u1 @ u2 @ diag(lam, 1/lam) @ u2^*."""

    u1: np.ndarray
    u2: np.ndarray
    lam: float

    @property
    def Lambda(self):
        return np.diag([self.lam, 1.0 / self.lam]).astype(complex)

    def reassemble(self):
        return self.u1 @ self.u2 @ self.Lambda @ dagger(self.u2)


def _eigvec_columns(A):
    """Columns of U2 for a batch of matrices; unit columns, det 1.

    With w = conj(a) b + conj(c) d, each column is the first-row candidate
    (w, mu - |a|^2 - |c|^2) unless the second-row candidate
    (mu - |b|^2 - |d|^2, conj(w)) is longer.  Returns (U2, lam, ok) where ok
    flags samples whose chosen column is not numerically null.
    """
    a, b = A[..., 0, 0], A[..., 0, 1]
    c, d = A[..., 1, 0], A[..., 1, 1]
    s1 = np.abs(a) ** 2 + np.abs(c) ** 2
    s2 = np.abs(b) ** 2 + np.abs(d) ** 2
    w = np.conj(a) * b + np.conj(c) * d
    tr = s1 + s2
    nrm2 = 0.5 * (tr + np.sqrt(np.maximum(tr * tr - 4.0, 0.0)))
    cols = []
    ok = np.ones(np.shape(a), dtype=bool)
    for mu in (nrm2, 1.0 / nrm2):
        r1 = np.stack([w, mu - s1 + 0j], axis=-1)
        r2 = np.stack([mu - s2 + 0j, np.conj(w)], axis=-1)
        n1 = np.linalg.norm(r1, axis=-1)
        n2 = np.linalg.norm(r2, axis=-1)
        use1 = n1 >= n2
        vec = np.where(use1[..., None], r1, r2)
        n = np.where(use1, n1, n2)
        scale = np.sqrt(tr)
        ok &= n > 1e-7 * scale
        cols.append(vec / np.where(n > 0, n, 1.0)[..., None])
    U = np.stack(cols, axis=-1)
    dU = det(U)
    ok &= dU != 0
    U = U / np.sqrt(np.where(dU != 0, dU, 1.0))[..., None, None]
    return U, np.sqrt(nrm2), ok


def polar_batch(A):
    """Vectorised polar decomposition; returns (U1, U2, lam, ok)."""
    A = np.asarray(A, dtype=complex)
    tr = frob2(A)
    U2, lam, ok = _eigvec_columns(A)
    ok &= tr > 2.0 + ALG_TOL
    lam_inv = np.zeros(np.shape(lam) + (2, 2), dtype=complex)
    lam_inv[..., 0, 0] = 1.0 / lam
    lam_inv[..., 1, 1] = lam
    U1 = A @ U2 @ lam_inv @ dagger(U2)
    return U1, U2, lam, ok


def polar_decompose(A) -> PolarParts:
    """Polar decomposition A = U1 U2 Lambda U2^* for A in SL(2,C) minus SU(2)."""
    A = np.asarray(A, dtype=complex)
    _check_unimodular(A)
    if frob2(A) <= 2.0 + ALG_TOL:
        raise NotSU2Free("matrix lies on SU(2); polar parts are not defined there")
    U1, U2, lam, ok = polar_batch(A)
    if not ok:
        raise NotSU2Free("eigenvector columns degenerate (matrix too close to SU(2))")
    return PolarParts(U1, U2, float(lam))


def top_singular_vectors(M):
    """Unit top right/left singular vectors (v1, u1) of a batch of 2x2 matrices.

    Works for badly scaled products where the determinant has underflowed; the
    vectors are defined up to a phase.
    """
    M = np.asarray(M, dtype=complex)
    H = dagger(M) @ M
    p, q, r = H[..., 0, 0].real, H[..., 0, 1], H[..., 1, 1].real
    half = 0.5 * (p + r)
    disc = np.sqrt(0.25 * (p - r) ** 2 + np.abs(q) ** 2)
    mu = half + disc
    c1 = np.stack([q, mu - p + 0j], axis=-1)
    c2 = np.stack([mu - r + 0j, np.conj(q)], axis=-1)
    n1 = np.linalg.norm(c1, axis=-1)
    n2 = np.linalg.norm(c2, axis=-1)
    use1 = n1 >= n2
    v = np.where(use1[..., None], c1, c2)
    n = np.where(use1, n1, n2)
    # isotropic H (multiple of identity): any vector is a top vector
    iso = n <= 1e-300
    v = np.where(iso[..., None], np.array([1.0, 0.0], dtype=complex), v)
    n = np.where(iso, 1.0, n)
    v = v / n[..., None]
    u = np.einsum("...ij,...j->...i", M, v)
    un = np.linalg.norm(u, axis=-1)
    u = u / np.where(un > 0, un, 1.0)[..., None]
    return v, u

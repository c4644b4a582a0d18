import math

import numpy as np
import pytest

from cocyclelab import mat2
from cocyclelab.errors import NonUnimodularDeterminant, NotSU2Free
from conftest import random_sl2

D = mat2.mat(2, 0, 0, 0.5)
S = mat2.mat(0, -1, 1, 0)


def test_op_norm_examples():
    assert mat2.op_norm(D) == pytest.approx(2.0, abs=1e-14)
    assert mat2.op_norm(mat2.I2) == pytest.approx(1.0, abs=1e-14)


def test_op_norm_szego_unimodular_v():
    lam, v = 0.6, np.exp(0.7j)
    A = mat2.mat(1, -lam * np.conj(v), -lam * v, 1) / math.sqrt(1 - lam * lam)
    assert mat2.op_norm(A) == pytest.approx(2.0, abs=1e-12)


def test_spectral_radius_examples():
    assert mat2.spectral_radius(D) == pytest.approx(2.0)
    assert mat2.spectral_radius(S) == pytest.approx(1.0)
    B = mat2.mat(3, -1, 1, 0)
    assert mat2.spectral_radius(B) == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-12)


def test_mobius_examples():
    assert mat2.mobius_apply(mat2.I2, 0.3 + 0.2j) == 0.3 + 0.2j
    assert mat2.mobius_apply(S, 1.0) == pytest.approx(-1.0)
    A = mat2.mat(1, 2, 3, 7)
    assert mat2.mobius_apply(A, mat2.INF) == pytest.approx(1 / 3)
    assert mat2.mobius_apply(D, mat2.INF) is mat2.INF
    assert mat2.mobius_apply(S, 0.0) is mat2.INF


def test_points_and_chordal_distance():
    assert mat2.vector_to_point(mat2.point_to_vector(mat2.INF)) is mat2.INF
    assert mat2.chordal_distance(mat2.INF, mat2.INF) == 0.0
    assert mat2.chordal_distance(0.0, mat2.INF) == pytest.approx(1.0)
    assert mat2.in_ball_at_inf(mat2.INF, 5.0) and not mat2.in_ball_at_zero(mat2.INF, 5.0)


def test_polar_diagonal():
    parts = mat2.polar_decompose(D)
    assert parts.lam == pytest.approx(2.0)
    assert np.allclose(np.abs(parts.u1), np.eye(2)) and np.allclose(np.abs(parts.u2), np.eye(2))
    assert np.abs(parts.reassemble() - D).max() < 1e-14


def test_polar_rejects_su2_and_bad_det():
    with pytest.raises(NotSU2Free):
        mat2.polar_decompose(mat2.rotation(0.1))
    with pytest.raises(NonUnimodularDeterminant):
        mat2.polar_decompose(2 * D)


def test_polar_random_reassembly(rng):
    for _ in range(1000):
        A = random_sl2(rng, rng.uniform(0.2, 5))
        if mat2.frob2(A) <= 2 + 1e-6:
            continue
        p = mat2.polar_decompose(A)
        assert np.abs(p.reassemble() - A).max() <= 1e-12 * max(1.0, p.lam)
        for U in (p.u1, p.u2):
            assert np.abs(U @ mat2.dagger(U) - np.eye(2)).max() <= 1e-12


def test_conjugate_by_Q_examples(rng):
    assert np.allclose(mat2.conjugate_by_Q(mat2.I2), np.eye(2), atol=1e-15)
    theta = 0.3
    s = np.exp(1j * np.pi * theta)
    R = mat2.conjugate_by_Q(np.diag([s, 1 / s]))
    assert np.abs(R - mat2.rotation(-theta / 2)).max() < 1e-14
    a = complex(rng.normal(), rng.normal())
    b = 0.7 * abs(a) * np.exp(2j * np.pi * rng.random())
    U = mat2.mat(a, b, np.conj(b), np.conj(a)) / math.sqrt(abs(a) ** 2 - abs(b) ** 2)
    assert mat2.is_su11(U)
    assert np.abs(mat2.conjugate_by_Q(U).imag).max() <= 1e-12


def test_membership_predicates():
    assert mat2.is_sl2(D) and not mat2.is_su2(D)
    assert mat2.is_su2(mat2.rotation(0.2))
    assert not mat2.is_sl2(2 * D)


def test_det_multiplicative_and_norm_symmetry(rng):
    for _ in range(200):
        A, B = random_sl2(rng), random_sl2(rng)
        assert abs(mat2.det(A @ B) - mat2.det(A) * mat2.det(B)) < 1e-10
        assert mat2.op_norm(A) == pytest.approx(mat2.op_norm(mat2.adj(A)), rel=1e-10)


def test_spectral_radius_is_norm_growth(rng):
    checked = 0
    while checked < 100:
        B = random_sl2(rng)
        ev = np.abs(np.linalg.eigvals(B))
        if abs(ev[0] - ev[1]) < 0.1:
            continue
        # B^(2^14) by scaled squaring; 64 steps leave an O(ln cond / 64) bias for non-normal B
        P, lg = B.copy(), 0.0
        for _ in range(14):
            P = P @ P
            s = np.linalg.norm(P, 2)
            P, lg = P / s, 2 * lg + math.log(s)
        growth = math.exp(lg / 2 ** 14)
        assert abs(mat2.spectral_radius(B) - growth) <= 1e-3 * max(1.0, growth)
        checked += 1


def test_top_singular_vectors_scaled_product(rng):
    A = random_sl2(rng, 3)
    v1, u1 = mat2.top_singular_vectors(A[None])
    U, s, Vh = np.linalg.svd(A)
    assert abs(abs(np.vdot(Vh[0].conj(), v1[0])) - 1) < 1e-10
    assert abs(abs(np.vdot(U[:, 0], u1[0])) - 1) < 1e-10
    huge = A * 1e-6
    v2, u2 = mat2.top_singular_vectors(huge[None])
    assert abs(abs(np.vdot(v1[0], v2[0])) - 1) < 1e-10

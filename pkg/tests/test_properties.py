"""Randomised structural properties, 1000 derandomised cases each."""
import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from cocyclelab import families as F
from cocyclelab import hyperbolicity as H
from cocyclelab import mat2, opuc
from cocyclelab import spectra as S

CASES = settings(max_examples=1000, deadline=None, derandomize=True,
                 suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])

real = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, real, real)
unit_phase = st.floats(0, 1, allow_nan=False, exclude_max=True)


@st.composite
def sl2(draw):
    a, b, c, d = (draw(cplx) for _ in range(4))
    det = a * d - b * c
    assume(abs(det) > 0.1)
    return mat2.mat(a, b, c, d) / np.sqrt(det)


@st.composite
def sphere_point(draw):
    if draw(st.integers(0, 9)) == 0:
        return mat2.INF
    return draw(cplx)


@st.composite
def disk_values(draw, n_min=1, n_max=24, r=0.9):
    n = draw(st.integers(n_min, n_max))
    mods = draw(st.lists(st.floats(0, r), min_size=n, max_size=n))
    args = draw(st.lists(unit_phase, min_size=n, max_size=n))
    return np.array(mods) * np.exp(2j * np.pi * np.array(args))


def _close(z, w, tol):
    return mat2.chordal_distance(z, w) <= tol


@CASES
@given(sl2())
def test_polar_reassembly(A):
    assume(mat2.frob2(A) > 2 + 1e-6)
    p = mat2.polar_decompose(A)
    scale = max(1.0, p.lam)
    assert np.abs(p.reassemble() - A).max() <= 1e-12 * scale
    for U in (p.u1, p.u2):
        assert np.abs(U @ mat2.dagger(U) - mat2.I2).max() <= 1e-12


@CASES
@given(sl2(), sl2(), sphere_point())
def test_mobius_functoriality(A, B, z):
    lhs = mat2.mobius_apply(A @ B, z)
    rhs = mat2.mobius_apply(A, mat2.mobius_apply(B, z))
    # chordal error scales with the Lipschitz constant ||A||^2 ||B||^2 of the maps
    tol = 1e-12 * (mat2.op_norm(A) * mat2.op_norm(B)) ** 2
    assert _close(lhs, rhs, tol)


@CASES
@given(st.floats(0, 0.95), st.integers(-3, 3), st.floats(-1, 1), unit_phase, unit_phase,
       st.integers(1, 40))
def test_su11_preservation(lam, k, amp, t, x, n):
    pot = F.szego_potential(F.AnalyticCircleFunction.cos(amp), k, lam)
    fam = F.szego(pot, t=t)
    M, lg = F.iterate(fam, x, n)
    # the normalised product stays in the scaled group: M* J M = e^{-2 lg} J
    assert np.abs(mat2.dagger(M) @ mat2.J @ M - np.exp(-2 * lg) * mat2.J).max() <= 1e-12 * n / (1 - lam)


@CASES
@given(disk_values(1, 64, 0.999), unit_phase)
def test_cmv_unitarity(al, last):
    al = np.append(al[:-1], np.exp(2j * np.pi * last))
    C = S.cmv_truncation(al).matrix
    assert np.abs(C.conj().T @ C - np.eye(al.size)).max() <= 1e-10


@CASES
@given(disk_values(1, 32, 0.95))
def test_reversal_identity(f):
    p = opuc.szego_evolve(f)
    scale = np.abs(p.phi).max()
    assert np.abs(p.phi_star - opuc.reversed_polynomial(p.phi, p.n)).max() <= 1e-12 * scale
    z = np.exp(2j * np.pi * np.arange(64) / 64)
    a, b = p(z)
    assert np.allclose(np.abs(a), np.abs(b), rtol=1e-10)


@CASES
@given(disk_values(1, 16, 0.8))
def test_measure_mass(f):
    total, _ = opuc.measure_total(opuc.szego_evolve(f), tol=1e-9)
    assert abs(total - 1.0) <= 1e-6


@CASES
@given(st.lists(cplx, min_size=1, max_size=8), st.floats(0, 5))
def test_cohomology_plug_back(coeffs, L):
    terms = [(n + 1, c) for n, c in enumerate(coeffs)]
    terms += [(-(n + 1), np.conj(c)) for n, c in enumerate(coeffs)]
    g = F.AnalyticCircleFunction(tuple(terms + [(0, L)]))
    sol = H.cohomology_solve(g, L, F.GOLDEN, cutoff=64)
    assert sol.residual <= 1e-8

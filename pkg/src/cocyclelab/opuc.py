"""Orthogonal polynomials on the unit circle driven by Verblunsky data."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadEta, BadVerblunsky, NoConvergence, ZeroOnCircle


@dataclass(frozen=True)
class PolyPair:
    """Coefficients (ascending powers of E) of phi_n and its reversal phi*_n."""

    phi: np.ndarray
    phi_star: np.ndarray
    n: int

    def __call__(self, E):
        return horner(self.phi, E), horner(self.phi_star, E)


def horner(coeffs, E):
    E = np.asarray(E, dtype=complex)
    out = np.zeros(E.shape, dtype=complex)
    for c in coeffs[::-1]:
        out = out * E + c
    return out


def reversed_polynomial(Q, n):
    """Q*_n(E) = E^n conj(Q(1 / conj E)), i.e. reversed conjugated coefficients."""
    Q = np.asarray(Q, dtype=complex)
    if Q.size > n + 1 and np.any(Q[n + 1:] != 0):
        raise ValueError("degree of Q exceeds n")
    padded = np.zeros(n + 1, dtype=complex)
    padded[:min(Q.size, n + 1)] = Q[:n + 1]
    return np.conj(padded[::-1])


def szego_evolve(f_orbit, n=None) -> PolyPair:
    """Szego recursion phi_{j+1} = rho^-1 (E phi_j - conj(f_j) phi*_j), phi*_{j+1} = rho^-1 (phi*_j - f_j E phi_j).

    This is sqrt(E) times the Szego cocycle acting on (phi_j, phi*_j).
    """
    f = np.asarray(f_orbit, dtype=complex)
    n = f.size if n is None else int(n)
    if n > f.size:
        raise ValueError("orbit shorter than requested degree")
    if np.any(np.abs(f[:n]) >= 1.0):
        raise BadVerblunsky("Verblunsky values must lie in the open unit disk", "f")
    phi = np.zeros(n + 1, dtype=complex)
    star = np.zeros(n + 1, dtype=complex)
    phi[0] = star[0] = 1.0
    for j in range(n):
        rho = math.sqrt(1.0 - abs(f[j]) ** 2)
        zphi = np.roll(phi, 1)
        zphi[0] = 0.0
        phi, star = (zphi - np.conj(f[j]) * star) / rho, (star - f[j] * zphi) / rho
    return PolyPair(phi, star, n)


@dataclass(frozen=True)
class BernsteinSzegoMeasure:
    theta_grid: np.ndarray
    density: np.ndarray
    total: float


def measure_density(pair: PolyPair, grid_size=1024) -> BernsteinSzegoMeasure:
    """d mu_n = d theta / (2 pi |phi_n(e^{i theta})|^2) on an equispaced grid."""
    th = 2 * np.pi * np.arange(grid_size) / grid_size
    vals = np.abs(horner(pair.phi, np.exp(1j * th)))
    if vals.min() < 1e-12:
        raise ZeroOnCircle(f"|phi_n| = {vals.min():.2e} on the circle")
    dens = 1.0 / (2 * np.pi * vals ** 2)
    return BernsteinSzegoMeasure(th, dens, float(np.mean(dens) * 2 * np.pi))


def measure_total(pair: PolyPair, tol=1e-9, start=1024, max_grid=1 << 22):
    """Total mass with the grid doubled until two successive totals agree within ``tol``.

    Zeros of phi_n close to the circle (point masses of the limit measure) make
    1/|phi_n|^2 sharply peaked, so a fixed grid can be far off.
    Returns (total, grid_size).
    """
    n = int(start)
    prev = measure_density(pair, n).total
    while n < max_grid:
        n *= 2
        cur = measure_density(pair, n).total
        if abs(cur - prev) <= tol:
            return cur, n
        prev = cur
    raise NoConvergence(f"mass quadrature unresolved at {max_grid} nodes")


def aleksandrov_rotate(f_orbit, eta):
    if abs(abs(eta) - 1.0) > 1e-12:
        raise BadEta(f"|eta| must be 1, got {abs(eta)}", "eta")
    return complex(eta) * np.asarray(f_orbit, dtype=complex)


def cocycle_step(f, E):
    """sqrt(E) A^(E, f) at a point of the circle, the matrix form of one recursion step."""
    rho = math.sqrt(1.0 - abs(f) ** 2)
    return np.array([[E, -np.conj(f)], [-f * E, 1.0]], dtype=complex) / rho

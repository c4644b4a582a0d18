"""Lyapunov exponents, complexified profiles, acceleration and continued fractions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import mat2
from .errors import DegenerateProfile, StripExceeded
from .families import GOLDEN, CocycleFamily, SzegoPotential, orbit_products, szego

DEFAULT_GRID = 32
POSITIVITY = 0.02


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    n: int
    phase_mode: str
    renorm_count: int
    half_orbit_gap: float
    phases: int = 1
    per_phase: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {"value": self.value, "n": self.n, "phase_mode": self.phase_mode,
                "renorm_count": self.renorm_count, "half_orbit_gap": self.half_orbit_gap,
                "phases": self.phases}


def phase_grid(size):
    return np.arange(size) / float(size)


def _final_lognorms(state, logs):
    return logs + np.log(mat2.singular_norm(state))


def le_iterate(fam: CocycleFamily, n: int, phase_mode="single", x0=0.0, grid=DEFAULT_GRID,
               right=None) -> LyapunovEstimate:
    """(1/n) ln ||A_n(x0)|| from scaled products.

    ``phase_mode`` is "single" (orbit of ``x0``) or "grid" (mean over ``grid``
    equispaced phases).  ``right`` batches per-row right factors (see
    :func:`orbit_products`); the estimate then averages over rows.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    if phase_mode == "grid":
        xs = phase_grid(grid)
    elif phase_mode == "single":
        xs = np.array([float(x0)])
    else:
        raise ValueError(f"unknown phase mode {phase_mode!r}")
    half = n // 2
    state, logs, renorms, marks = orbit_products(fam, xs, n, checkpoints=(half,) if half else (), right=right)
    per = _final_lognorms(state, logs) / n
    value = float(np.mean(per))
    gap = abs(value - float(np.mean(marks[half])) / half) if half else math.nan
    return LyapunovEstimate(value, n, phase_mode, int(renorms.sum()), gap, per.size, per)


def le_rational(fam: CocycleFamily, p: int, q: int, quad_points=256) -> float:
    """(1/q) * integral of ln of the spectral radius of A_q(x), periodic trapezoid."""
    p, q = int(p), int(q)
    if q < 1 or math.gcd(p, q) != 1:
        raise ValueError("need gcd(p, q) = 1 and q >= 1")
    fam = fam.with_alpha(Fraction(p, q) % 1)
    xs = phase_grid(quad_points)
    state, logs, _, _ = orbit_products(fam, xs, q)
    rad = mat2.spectral_radii(state)
    with np.errstate(divide="ignore"):
        vals = np.log(rad) + logs
    return float(np.mean(vals)) / q


def periodic_mean(fn, start=64, tol=1e-6, max_points=1 << 16):
    """Trapezoid mean of a 1-periodic function, doubled until it moves less than tol."""
    n = start
    prev = float(np.mean(fn(phase_grid(n))))
    while n < max_points:
        n *= 2
        cur = float(np.mean(fn(phase_grid(n))))
        if abs(cur - prev) < tol:
            return cur, n
        prev = cur
    return prev, n


# -- y-profiles and acceleration ---------------------------------------------------
@dataclass(frozen=True)
class YProfile:
    heights: np.ndarray
    values: np.ndarray
    convexity_residual: float
    affine_residual_near_zero: float
    n: int = 0
    phase_mode: str = "grid"

    def to_rows(self):
        return [(float(h), float(v)) for h, v in zip(self.heights, self.values)]


def convexity_residual(h, v):
    """Largest amount by which a middle value exceeds its chord; 0 for convex data."""
    worst = 0.0
    for i in range(1, len(h) - 1):
        w = (h[i] - h[i - 1]) / (h[i + 1] - h[i - 1])
        chord = (1 - w) * v[i - 1] + w * v[i + 1]
        worst = max(worst, v[i] - chord)
    return float(worst)


def affine_residual(h, v):
    if len(h) < 3:
        return 0.0
    coef = np.polyfit(h, v, 1)
    return float(np.max(np.abs(np.polyval(coef, h) - v)))


def default_heights(fam: CocycleFamily, cap=0.32):
    d = min(fam.delta, cap)
    return [d / 64, d / 32, d / 16, d / 8]


def y_profile(fam: CocycleFamily, heights, n=20000, phase_mode="grid", grid=8, near=4) -> YProfile:
    h = np.asarray(sorted(float(y) for y in heights))
    if h.size and np.any(np.diff(h) <= 0):
        raise ValueError("heights must be distinct")
    if h.size and np.max(np.abs(h)) >= fam.delta:
        raise StripExceeded(f"height {np.max(np.abs(h))} outside strip {fam.delta}", "y")
    vals = np.array([le_iterate(fam.with_height(y), n, phase_mode, grid=grid).value for y in h])
    order = np.argsort(np.abs(h), kind="stable")[:near]
    sel = np.sort(order)
    return YProfile(h, vals, convexity_residual(h, vals), affine_residual(h[sel], vals[sel]), n, phase_mode)


@dataclass(frozen=True)
class AccelerationEstimate:
    slope_over_2pi: float
    nearest_integer: int
    deviation: float

    def to_dict(self):
        return {"slope_over_2pi": self.slope_over_2pi, "nearest_integer": self.nearest_integer,
                "deviation": self.deviation}


def acceleration_fd(profile: YProfile) -> AccelerationEstimate:
    """Least-squares slope of L over the nonnegative heights, divided by 2 pi."""
    h, v = profile.heights, profile.values
    keep = h >= 0
    h, v = h[keep], v[keep]
    if h.size < 2 or np.ptp(h) < 1e-4:
        raise DegenerateProfile("need at least two nonnegative heights spanning 1e-4")
    slope = float(np.polyfit(h, v, 1)[0]) / (2 * np.pi)
    k = int(round(slope))
    return AccelerationEstimate(slope, k, abs(slope - k))


def accelerate(fam: CocycleFamily, heights=None, n=20000, grid=8):
    heights = default_heights(fam) if heights is None else heights
    prof = y_profile(fam, heights, n=n, grid=grid)
    return prof, acceleration_fd(prof)


def regularity_test(fam: CocycleFamily, heights_near_zero=(0.005, 0.01), n=20000, grid=8,
                    tol=2e-3, threshold=POSITIVITY):
    """Classify as regular when L is affine on the symmetric heights around 0."""
    ys = sorted({0.0, *[abs(y) for y in heights_near_zero], *[-abs(y) for y in heights_near_zero]})
    base = le_iterate(fam, n, "grid", grid=grid).value
    if base <= threshold:
        return "inconclusive", None
    prof = y_profile(fam, ys, n=n, grid=grid, near=len(ys))
    res = prof.affine_residual_near_zero
    if res <= tol:
        return "regular", prof
    if res >= 5 * tol:
        return "nonregular", prof
    return "inconclusive", prof


# -- integral identities ----------------------------------------------------------
def hab_verify(fam: CocycleFamily, theta_grid, n=200000, x0=0.0):
    """Mean of L(alpha, B R_theta) over theta against the norm integral of B."""
    thetas = np.asarray(theta_grid, dtype=float)
    R = np.stack([mat2.rotation(th) for th in thetas])
    lhs = le_iterate(fam, n, "single", x0=x0, right=R).value

    def integrand(x):
        nb = mat2.singular_norm(fam.matrices(x))
        return np.log(0.5 * (nb + 1.0 / nb))

    rhs, _ = periodic_mean(integrand)
    return lhs, rhs


def prop1_verify(potential: SzegoPotential, theta_grid, n=200000, alpha=None, x0=0.0):
    """Mean Szego exponent over E = exp(2 pi i theta) against -1/2 of the mean of ln(1 - |f|^2).

    Uses A^(E,f) = A^(1,f) diag(sqrt E, 1/sqrt E) to batch the theta sweep.
    """
    fam = szego(potential, GOLDEN if alpha is None else alpha, t=0.0)
    ts = np.mod(np.asarray(theta_grid, dtype=float), 1.0)
    s = np.exp(1j * np.pi * ts)
    D = np.zeros((ts.size, 2, 2), dtype=complex)
    D[:, 0, 0] = s
    D[:, 1, 1] = 1.0 / s
    lhs = le_iterate(fam, n, "single", x0=x0, right=D).value
    rhs, _ = periodic_mean(lambda x: -0.5 * np.log(1.0 - np.abs(potential.f(x)) ** 2))
    return lhs, rhs


def subadditivity_ladder(fam: CocycleFamily, kmax=12, grid=DEFAULT_GRID):
    """Grid-averaged (1/n) ln ||A_n|| along n = 2^k, k = 0..kmax."""
    ns = [1 << k for k in range(kmax + 1)]
    state, logs, _, marks = orbit_products(fam, phase_grid(grid), ns[-1], checkpoints=ns[:-1])
    marks[ns[-1]] = _final_lognorms(state, logs)
    return np.array(ns), np.array([float(np.mean(marks[k])) / k for k in ns])


# -- continued fractions ------------------------------------------------------------
@dataclass(frozen=True)
class ContinuedFraction:
    alpha: Fraction
    quotients: list
    convergents: list
    rational: bool
    brjuno_partial: float
    beta_estimate: float
    brjuno_terms: list

    @property
    def denominators(self):
        return [q for _, q in self.convergents]

    def to_dict(self):
        return {"quotients": self.quotients, "convergents": [list(c) for c in self.convergents],
                "rational": self.rational, "brjuno_partial": self.brjuno_partial,
                "beta_estimate": self.beta_estimate, "beta_label": "estimate (max over depth)"}


def cf_profile(alpha, depth=30) -> ContinuedFraction:
    """Continued fraction of alpha in (0, 1), exact for floats, Fractions and integer ratios."""
    x = Fraction(alpha)
    a0 = math.floor(x)
    frac = x - a0
    quotients = []
    convergents = []
    p_prev, q_prev, p, q = 1, 0, a0, 1
    rational = False
    while len(quotients) < depth:
        if frac == 0:
            rational = True
            break
        inv = 1 / frac
        a = math.floor(inv)
        frac = inv - a
        quotients.append(a)
        p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
        convergents.append((p, q))
    if frac == 0:
        rational = True
    qs = [1] + [c[1] for c in convergents]
    terms = [math.log(qs[i + 1]) / qs[i] for i in range(len(qs) - 1)]
    return ContinuedFraction(x, quotients, convergents, rational, float(sum(terms)),
                             float(max(terms)) if terms else 0.0, terms)

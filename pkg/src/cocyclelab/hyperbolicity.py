"""Reduction to Lambda*U form, cone-field certificates, invariant sections and winding."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import mat2
from .errors import (AmbiguousWinding, BadCoupling, ConfigError, ConstantTheta, MeanObstruction,
                     NoConvergence, NotSU2Free, SmallDivisorBlowup)
from .families import (AnalyticCircleFunction, CocycleFamily, backward_products, orbit_products)
from .lyapunov import phase_grid

RHO_MARGIN = 1e-6
MAX_WINDING_GRID = 1 << 14


# -- reduction ---------------------------------------------------------------------
@dataclass(frozen=True)
class ReducedCocycle:
    grid: np.ndarray
    lam_of_x: np.ndarray
    c_of_x: np.ndarray
    d_of_x: np.ndarray
    conjugacy_residual: float


def reduce(fam: CocycleFamily, grid_size=512) -> ReducedCocycle:
    """Lambda(x) U(x) with U(x) = U2(x)^* U1(x - alpha) U2(x - alpha)."""
    xs = phase_grid(grid_size)
    A = fam.matrices(xs)
    Am = fam.matrices(xs - fam.alpha)
    U1, U2, lam, ok = mat2.polar_batch(A)
    U1m, U2m, _, okm = mat2.polar_batch(Am)
    bad = ~(ok & okm)
    if bad.any():
        i = int(np.argmax(bad))
        raise NotSU2Free(f"cocycle meets SU(2) near x = {xs[i]:.6g}", x=float(xs[i]))
    U = mat2.dagger(U2) @ U1m @ U2m
    U3 = U1m @ U2m
    U3next = U1 @ U2
    Lam = np.zeros_like(A)
    Lam[:, 0, 0] = lam
    Lam[:, 1, 1] = 1.0 / lam
    resid = np.abs(mat2.dagger(U3next) @ A @ U3 - Lam @ U).max() / lam.max()
    return ReducedCocycle(xs, lam, U[:, 0, 0], U[:, 1, 0], float(resid))


def c_modulus(M_here, M_prev):
    """|c| = |<v1(M(x)), u1(M(x - alpha))>|, free of the unitary gauge.

    Valid for scaled products since only singular directions enter.
    """
    v1, _ = mat2.top_singular_vectors(M_here)
    _, u1 = mat2.top_singular_vectors(M_prev)
    return np.abs(np.einsum("...i,...i->...", np.conj(v1), u1))


# -- closed forms ------------------------------------------------------------------
def _szego_parts(pot, z, lam):
    v = pot.v(z)
    r = np.abs(v)
    s = lam * (r - 1.0 / r)
    a = s + np.sqrt(4.0 + s * s)
    return v, r, a


def closed_form_c(fam: CocycleFamily, x, exact_height=False):
    """|c| from the explicit formulas; returns (modulus, diagnostics).

    Szego at y = 0 uses |E v(x) + v(x - alpha)| / 2.  The shifted Schrodinger
    form uses the corrected sign pattern (+, -, -, +) of the four terms.
    """
    x = np.asarray(x, dtype=float)
    z = x + 1j * fam.y
    al = fam.alpha
    if fam.kind == "szego":
        pot = fam.payload
        lam = pot.lam
        if not (0.0 <= lam < 1.0):
            raise BadCoupling("Szego coupling outside [0, 1)", "lambda")
        E = np.exp(2j * np.pi * fam.t)
        if fam.y == 0.0 and not exact_height:
            return np.abs(E * pot.v(z) + pot.v(z - al)) / 2.0, {"form": "real-phase"}
        v0, r0, a0 = _szego_parts(pot, z, lam)
        v1, r1, a1 = _szego_parts(pot, z - al, lam)
        norm_prev = np.sqrt((2 + lam ** 2 * (r1 ** 2 + r1 ** -2)
                             + lam * (r1 + 1 / r1) * np.sqrt(4 + (lam * (r1 - 1 / r1)) ** 2))
                            / (2 * (1 - lam ** 2)))
        c1 = 1.0 / norm_prev / np.sqrt((a0 ** 2 + 4) * (a1 ** 2 + 4) * (1 - lam ** 2))
        ph = (v1 / r1) / (v0 / r0)
        c = c1 * (a1 * a0 * E + 4 * ph + 2 * E * lam * a0 / r1 + 2 * lam * r1 * a1 * ph)
        return np.abs(c), {"form": "complex-phase", "a": a0, "a_prev": a1, "r": r0, "r_prev": r1}
    if fam.kind == "schrodinger_shifted":
        lam = fam.lam
        if not lam > 0:
            raise BadCoupling("Schrodinger coupling must be positive", "lambda")
        t = fam.shifted_t
        r0, a0, f0 = _schrodinger_parts(fam.payload, z, t, lam)
        r1, a1, f1 = _schrodinger_parts(fam.payload, z - al, t, lam)
        c4 = np.sqrt(2 / a1) * f1 * f0 * a1 * a0
        c = c4 * (r1 - 2 * np.conj(r0) / (lam ** 2 * a0) - 2 * r1 / (lam ** 4 * a0)
                  + 4 * np.conj(r0) / (lam ** 6 * a1 * a0))
        return np.abs(c), {"form": "shifted", "a": a0, "a_prev": a1, "r": r0, "r_prev": r1, "c4": c4}
    raise ConfigError(f"no closed form for kind {fam.kind!r}", "kind")


def _schrodinger_parts(v, z, t, lam):
    r = t - v(z)
    s = np.abs(r) ** 2 + 1 + lam ** -4
    a = s + np.sqrt(s * s - 4 * lam ** -4)
    f = 1 / np.sqrt((a - 2 / lam ** 4) ** 2 + 4 / lam ** 4 * np.abs(r) ** 2)
    return r, a, f


def limit_g(fam: CocycleFamily, x, lam=None):
    """The lambda-limit function g: E v(z) + v(z - alpha) (Szego) or t - v(z - alpha) (Schrodinger)."""
    z = np.asarray(x, dtype=float) + 1j * fam.y
    if fam.kind == "szego":
        E = np.exp(2j * np.pi * fam.t)
        return E * fam.payload.v(z) + fam.payload.v(z - fam.alpha)
    if fam.kind in ("schrodinger", "schrodinger_shifted"):
        t = fam.shifted_t
        if lam is None or math.isinf(lam):
            return t - fam.payload(z - fam.alpha)
        probe = fam.replace(lam=lam, E=lam * t, kind="schrodinger_shifted")
        c, diag = closed_form_c(probe, x)
        return c / np.abs(diag["c4"])
    raise ConfigError(f"no limit function for kind {fam.kind!r}", "kind")


# -- cone certificate ----------------------------------------------------------------
def rho_of_gamma(gamma):
    g = min(float(gamma), 1.0)
    return 1.0 / g + math.sqrt(max(1.0 / (g * g) - 1.0, 0.0))


def fourier_lipschitz(samples):
    """(sum 2 pi |k| |g_k|, resolved) from FFT coefficients of periodic samples."""
    g = np.fft.rfft(np.asarray(samples, dtype=float)) / len(samples)
    k = np.arange(g.size)
    mag = np.abs(g)
    mag[1:] *= 2.0
    lip = float(np.sum(2 * np.pi * k * mag))
    tail = float(np.sum(mag[3 * g.size // 4:]))
    resolved = tail <= 1e-10 + 1e-6 * float(np.sum(mag[1:]))
    return lip, resolved


@dataclass(frozen=True)
class ConeCertificate:
    gamma: float
    rho: float
    lam_hat: float
    le_lower_bound: float
    grid_size: int
    margin: float
    label: str = "grid"
    block: int = 1
    ok: bool = field(default=True, init=False)

    def to_dict(self):
        return {"gamma": self.gamma, "rho": self.rho, "lam_hat": self.lam_hat,
                "le_lower_bound": self.le_lower_bound, "grid_size": self.grid_size,
                "margin": self.margin, "label": self.label, "block": self.block}


@dataclass(frozen=True)
class CertFailure:
    reason: str
    gamma: float = math.nan
    rho: float = math.nan
    lam_hat: float = math.nan
    grid_size: int = 0
    block: int = 1
    attempts: tuple = ()
    ok: bool = field(default=False, init=False)

    def to_dict(self):
        return {"reason": self.reason, "gamma": self.gamma, "rho": self.rho, "lam_hat": self.lam_hat,
                "grid_size": self.grid_size, "block": self.block}


def _certify_level(lognorm, cmod, n, grid_size, margin_policy):
    """Cone criterion for one block length, from sampled ln||A_n|| and |c_n|."""
    if margin_policy == "lipschitz":
        lip_c, res_c = fourier_lipschitz(cmod)
        lip_l, res_l = fourier_lipschitz(lognorm)
        m_c, m_l = lip_c / grid_size, lip_l / grid_size
        label = "grid" if (res_c and res_l) else "heuristic"
    elif margin_policy == "none":
        m_c = m_l = 0.0
        label = "heuristic"
    else:
        raise ConfigError(f"unknown margin policy {margin_policy!r}", "margin_policy")
    ln_lam = float(lognorm.min()) - m_l
    lam_hat = math.exp(ln_lam)
    # tr(A* A) = 2 cosh(2 ln||A||) <= 2 + tol means the block meets SU(2)
    if float(lognorm.min()) <= 0.5 * math.acosh(1.0 + 0.5 * mat2.ALG_TOL):
        return CertFailure("NotSU2Free", lam_hat=lam_hat, grid_size=grid_size, block=n)
    gamma = min(float(cmod.min()) - m_c, 1.0 - 1e-12)
    if gamma <= 0.0:
        return CertFailure("CVanishes", gamma=gamma, lam_hat=lam_hat, grid_size=grid_size, block=n)
    rho = rho_of_gamma(gamma)
    if not lam_hat > rho + RHO_MARGIN:
        return CertFailure("NotExpanding", gamma=gamma, rho=rho, lam_hat=lam_hat, grid_size=grid_size, block=n)
    bound = (ln_lam - math.log(2 * rho)) / n
    return ConeCertificate(gamma, rho, lam_hat, bound, grid_size, max(m_c, m_l), label, n)


def _block_samples(fam: CocycleFamily, xs, blocks):
    """{n: (ln||A_n(x)||, |c_n(x)|)} for each block length."""
    out = {}
    if fam.is_x_independent():
        M = fam.matrices(np.zeros(1))[0]
        P, lg, k = M.copy(), 0.0, 1
        for n in sorted(blocks):
            while k < n:
                P = P @ P
                s = float(mat2.singular_norm(P))
                P, lg, k = P / s, 2 * lg + math.log(s), 2 * k
            ln = lg + math.log(float(mat2.singular_norm(P)))
            c = float(c_modulus(P, P))
            out[n] = (np.full(xs.size, ln), np.full(xs.size, c))
        return out
    top = max(blocks)
    _, _, _, fwd = orbit_products(fam, xs, top, checkpoints=blocks, keep_states=True)
    bwd = backward_products(fam, xs, blocks)
    for n in blocks:
        Sf, lf = fwd[n]
        Sb, _ = bwd[n]
        out[n] = (lf + np.log(mat2.singular_norm(Sf)), c_modulus(Sf, Sb))
    return out


def block_ladder(max_block):
    ladder, n = [], 1
    while n <= max_block:
        ladder.append(n)
        n *= 2
    return ladder


def cone_certify(fam: CocycleFamily, grid_size=512, margin_policy="lipschitz", max_block=64):
    """Try the cone criterion on the block cocycles (n alpha, A_n) for n = 1, 2, 4, ... max_block.

    The first success gives a certificate whose bound is divided by the block
    length; otherwise the failure of the last level tried is returned with every
    attempt attached.
    """
    xs = phase_grid(grid_size)
    ladder = block_ladder(max_block)
    if fam.is_x_independent():
        samples = _block_samples(fam, xs, ladder)
        attempts = []
        for n in ladder:
            res = _certify_level(*samples[n], n, grid_size, margin_policy)
            if res.ok:
                return res
            attempts.append(res)
        return _final_failure(attempts)
    attempts = []
    # cheap first pass on the one-step cocycle, then the full ladder in one sweep
    base = _block_samples(fam, xs, [1])
    res = _certify_level(*base[1], 1, grid_size, margin_policy)
    if res.ok or len(ladder) == 1:
        return res if res.ok else _final_failure([res])
    attempts.append(res)
    samples = _block_samples(fam, xs, ladder[1:])
    for n in ladder[1:]:
        res = _certify_level(*samples[n], n, grid_size, margin_policy)
        if res.ok:
            return res
        attempts.append(res)
    return _final_failure(attempts)


def _final_failure(attempts):
    last = attempts[-1]
    reasons = {a.reason for a in attempts}
    reason = "NotSU2Free" if reasons == {"NotSU2Free"} else last.reason
    return CertFailure(reason, last.gamma, last.rho, last.lam_hat, last.grid_size, last.block,
                       tuple(a.to_dict() for a in attempts))


def cone_map_bound(t, r):
    """g(t, r) = (t r - 1) / (t + r), the lower bound on |U . z| for |z| = r and |c|/|d| >= t."""
    return (t * r - 1.0) / (t + r)


# -- exceptional set -----------------------------------------------------------------
@dataclass(frozen=True)
class ExceptionalSet:
    pairs: list
    q_theta: int

    def energies(self):
        return [(float(a), complex(np.exp(2j * np.pi * float(t)))) for a, t in self.pairs]


def exceptional_set(theta: AnalyticCircleFunction, k: int) -> ExceptionalSet:
    """Pairs (p/q, t) where E v(z) + v(z - alpha) vanishes identically."""
    if theta.is_constant():
        raise ConstantTheta("theta must be nonconstant", "theta")
    q = theta.period_q()
    pairs = []
    for p in range(q):
        shift_ok = all(abs(c * (1 - np.exp(-2j * np.pi * n * p / q))) <= 1e-14
                       for n, c in theta.coeffs if n != 0)
        if shift_ok:
            alpha = Fraction(p, q)
            t = (Fraction(1, 2) - k * alpha) % 1
            pairs.append((alpha, t))
    return ExceptionalSet(pairs, q)


# -- I_alpha ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CircleArcs:
    arcs: list
    measure: float
    wraps: bool


def interval_I_alpha(theta: AnalyticCircleFunction, k: int, alpha: float, grid=4096) -> CircleArcs:
    """Image of x -> theta(x - alpha) - theta(x) - 1/2 - k alpha, as arcs of R/Z."""
    x = phase_grid(grid)
    f = (theta(x - alpha) - theta(x)).real - 0.5 - k * alpha
    lo, hi = float(f.min()), float(f.max())
    if hi - lo >= 1.0:
        return CircleArcs([(0.0, 1.0)], 1.0, True)
    a, b = lo % 1.0, (lo % 1.0) + (hi - lo)
    if b <= 1.0:
        return CircleArcs([(a, b)], hi - lo, False)
    return CircleArcs([(0.0, b - 1.0), (a, 1.0)], hi - lo, True)


# -- invariant sections ----------------------------------------------------------------
@dataclass(frozen=True)
class InvariantSections:
    grid: np.ndarray
    u_vec: np.ndarray
    s_vec: np.ndarray
    r_of_x: np.ndarray
    residual: float
    family: CocycleFamily | None = field(default=None, repr=False)
    steps: int = 0

    @property
    def u_of_x(self):
        return [mat2.vector_to_point(w) for w in self.u_vec]

    @property
    def s_of_x(self):
        return [mat2.vector_to_point(w) for w in self.s_vec]

    def log_r_mean(self):
        return float(np.mean(np.log(np.abs(self.r_of_x))))


def _unit(w):
    return w / np.linalg.norm(w, axis=-1)[..., None]


def _unstable(fam, xs, steps):
    """Image of the cone center: top left singular vector of A_N(x - N alpha)."""
    state, _, _, _ = orbit_products(fam, np.mod(xs - steps * fam.alpha, 1.0), steps)
    return mat2.top_singular_vectors(state)[1]


def _stable(fam, xs, steps):
    """Most contracted direction of A_N(x), the pull-back of the center 0."""
    state, _, _, _ = orbit_products(fam, xs, steps)
    v1 = mat2.top_singular_vectors(state)[0]
    return np.stack([-np.conj(v1[:, 1]), np.conj(v1[:, 0])], axis=-1)


def _chordal(w1, w2):
    """Projective distance between batches of unit vectors."""
    return np.abs(w1[..., 0] * w2[..., 1] - w1[..., 1] * w2[..., 0])


def _gauge(w, j, K):
    """Phase-fix unit vectors by making component j of K^* w real positive."""
    comp = (mat2.dagger(K) @ w[..., None])[..., j, 0]
    return w * (np.conj(comp) / np.abs(comp))[..., None]


_GAUGE_FRAMES = [mat2.I2, mat2.rotation(0.125), mat2.mat(1, 1j, 1j, 1) / math.sqrt(2)]


def diagonalize_uh(fam: CocycleFamily, cert: ConeCertificate | None = None, grid_size=512,
                   power_iters=200, tol=1e-8) -> InvariantSections:
    """Unstable/stable sections by power iteration and the multiplier r on u.

    The iteration depth is ``power_iters`` times the certificate's block length.
    """
    xs = phase_grid(grid_size)
    block = cert.block if cert is not None and cert.ok else 1
    steps = power_iters * block
    u = _unstable(fam, xs, steps)
    u_next = _unstable(fam, xs + fam.alpha, steps)
    s = _stable(fam, xs, steps)
    s_next = _stable(fam, xs + fam.alpha, steps)
    A = fam.matrices(xs)
    Au = _unit(np.einsum("pij,pj->pi", A, u))
    As = _unit(np.einsum("pij,pj->pi", A, s))
    residual = float(max(_chordal(Au, u_next).max(), _chordal(As, s_next).max()))
    sep = float(_chordal(u, s).min())
    if residual > tol or sep <= tol:
        raise NoConvergence(f"section invariance residual {residual:.2e}, separation {sep:.2e}")
    # continuous gauge: pick the frame/component that stays farthest from zero
    best = None
    for K in _GAUGE_FRAMES:
        comp = np.abs(mat2.dagger(K) @ np.concatenate([u, u_next])[..., None])[..., 0]
        for j in (0, 1):
            score = comp[:, j].min()
            if best is None or score > best[0]:
                best = (score, j, K)
    _, j, K = best
    g = _gauge(u, j, K)
    gn = _gauge(u_next, j, K)
    r = np.einsum("pi,pi->p", np.conj(gn), np.einsum("pij,pj->pi", A, g))
    return InvariantSections(xs, u, s, r, residual, fam, steps)


def winding_number(sections: InvariantSections, max_grid=MAX_WINDING_GRID) -> int:
    """Winding of x -> 1/r(x) about 0, refining the grid while increments are ambiguous."""
    sec = sections
    while True:
        r = sec.r_of_x
        if np.abs(r).min() <= 1e-12:
            raise AmbiguousWinding("multiplier vanishes on the grid")
        ph = np.angle(1.0 / r)
        inc = np.angle(np.exp(1j * np.diff(np.append(ph, ph[0]))))
        if np.abs(inc).max() <= 0.5 * np.pi:
            total = inc.sum() / (2 * np.pi)
            w = int(round(total))
            if abs(total - w) > 0.1:
                raise AmbiguousWinding(f"total phase {total:.3f} turns is not near an integer")
            return w
        N = sec.grid.size * 2
        if sec.family is None or N > max_grid:
            raise AmbiguousWinding("phase increments exceed pi/2 at the finest grid")
        sec = diagonalize_uh(sec.family, None, N, power_iters=max(sec.steps, 1))


# -- cohomological equation --------------------------------------------------------------
@dataclass(frozen=True)
class CohomologySolution:
    b: AnalyticCircleFunction
    residual: float
    cutoff: int


def cohomology_solve(log_abs_r: AnalyticCircleFunction, L: float, alpha: float, cutoff=64,
                     mean_tol=1e-10, check_grid=1024) -> CohomologySolution:
    """Solve B(x + alpha) - B(x) = log|r|(x) - L by Fourier division."""
    g = log_abs_r.affine(1.0, -L)
    g0 = g.coefficient(0)
    if abs(g0) > mean_tol:
        raise MeanObstruction(f"mean of log|r| - L is {abs(g0):.3e}")
    coeffs = []
    for n, c in g.coeffs:
        if n == 0 or c == 0 or abs(n) > cutoff:
            continue
        div = np.exp(2j * np.pi * n * alpha) - 1.0
        if abs(div) < 1e-12:
            raise SmallDivisorBlowup(f"divisor for mode {n} is {abs(div):.3e}")
        coeffs.append((n, c / div))
    b = AnalyticCircleFunction(tuple(coeffs), log_abs_r.delta)
    x = phase_grid(check_grid)
    res = float(np.abs(b(x + alpha) - b(x) - g(x)).max())
    return CohomologySolution(b, res, cutoff)

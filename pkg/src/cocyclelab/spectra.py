"""Parameter scans, measure estimates and truncated-operator oracles."""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import BadEpsilon, BadVerblunsky, CocycleError
from .families import (GOLDEN, AnalyticCircleFunction, CocycleFamily, SzegoPotential, build_family)
from .hyperbolicity import cone_certify
from .lyapunov import POSITIVITY, le_iterate

UH, NUH, UNDECIDED = "UHCertified", "NUHCandidate", "Undecided"


@dataclass(frozen=True)
class CertConfig:
    grid_size: int = 512
    max_block: int = 64
    margin_policy: str = "lipschitz"
    heights: tuple = (0.0,)


@dataclass(frozen=True)
class LeConfig:
    n: int = 10000
    phase_mode: str = "single"
    x0: float = 0.0
    grid: int = 32
    threshold: float = POSITIVITY


def cell_grid(a, b, n):
    """Centres of n equal cells covering [a, b]."""
    h = (b - a) / n
    return a + h * (np.arange(n) + 0.5)


def config_hash(payload) -> str:
    text = json.dumps(payload, sort_keys=True, default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "__dict__"):
        return {k: v for k, v in vars(o).items()}
    return str(o)


@dataclass(frozen=True)
class ScanResult:
    axis: str
    grid: np.ndarray
    class_of: list
    le_of: np.ndarray
    bound_of: np.ndarray
    config_hash: str
    domain: tuple
    template: CocycleFamily | None = field(default=None, repr=False)
    cert_config: CertConfig = field(default_factory=CertConfig, repr=False)
    le_config: LeConfig = field(default_factory=LeConfig, repr=False)

    @property
    def step(self):
        return (self.domain[1] - self.domain[0]) / max(len(self.grid), 1)

    def certified_mask(self):
        return np.array([c == UH for c in self.class_of], dtype=bool)

    def rows(self):
        return [(float(g), c, float(l), float(b))
                for g, c, l, b in zip(self.grid, self.class_of, self.le_of, self.bound_of)]


def _at(template: CocycleFamily, axis, value):
    if axis == "E":
        return template.replace(E=float(value))
    if axis == "t":
        if template.kind == "szego":
            return template.replace(t=float(value) % 1.0)
        return template.replace(E=template.lam * float(value))
    raise ValueError(f"unknown axis {axis!r}")


def _classify_point(template, axis, value, cert_config: CertConfig, le_config: LeConfig):
    try:
        fam = _at(template, axis, value)
        cert = None
        for y in cert_config.heights:
            res = cone_certify(fam.with_height(y) if y else fam, cert_config.grid_size,
                               cert_config.margin_policy, cert_config.max_block)
            if res.ok and y == 0.0:
                cert = res
                break
        le = le_iterate(fam, le_config.n, le_config.phase_mode, le_config.x0, le_config.grid).value
    except CocycleError:
        return UNDECIDED, math.nan, math.nan
    if cert is not None:
        return UH, le, cert.le_lower_bound
    return (NUH if le > le_config.threshold else UNDECIDED), le, math.nan


def scan_uh(template: CocycleFamily, axis, axis_grid, cert_config=None, le_config=None,
            domain=None, workers=1) -> ScanResult:
    """Classify each axis value as UHCertified, NUHCandidate or Undecided."""
    cert_config = cert_config or CertConfig()
    le_config = le_config or LeConfig()
    grid = np.asarray(axis_grid, dtype=float)
    if domain is None:
        h = grid[1] - grid[0] if grid.size > 1 else 1.0
        domain = (float(grid[0] - h / 2), float(grid[-1] + h / 2)) if grid.size else (0.0, 0.0)

    def work(v):
        return _classify_point(template, axis, v, cert_config, le_config)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(work, grid))
    else:
        out = [work(v) for v in grid]
    classes = [o[0] for o in out]
    le = np.array([o[1] for o in out])
    bound = np.array([o[2] for o in out])
    h = config_hash({"family": template.to_dict(), "axis": axis, "grid": grid,
                     "cert": vars(cert_config), "le": vars(le_config)})
    return ScanResult(axis, grid, classes, le, bound, h, tuple(domain), template, cert_config, le_config)


# -- measures ------------------------------------------------------------------------
@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    grid_step: float
    refinement_delta: float = math.nan
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {"value": self.value, "grid_step": self.grid_step,
                "refinement_delta": self.refinement_delta, **self.extra}


def _non_uh_measure(scan: ScanResult):
    return float(np.sum(~scan.certified_mask())) * scan.step


def spectrum_measure(scan: ScanResult, refine=False, workers=1) -> MeasureEstimate:
    """Grid measure of the non-certified set; ``refine`` rescans at twice the resolution."""
    value = _non_uh_measure(scan)
    delta = math.nan
    if refine and scan.template is not None and len(scan.grid):
        a, b = scan.domain
        finer = scan_uh(scan.template, scan.axis, cell_grid(a, b, 2 * len(scan.grid)),
                        scan.cert_config, scan.le_config, domain=scan.domain, workers=workers)
        delta = abs(_non_uh_measure(finer) - value)
    return MeasureEstimate(value, scan.step, delta)


def _check_eps(epsilon):
    if not (0.0 < epsilon < 1.0):
        raise BadEpsilon(f"epsilon must lie in (0, 1), got {epsilon}", "epsilon")


def nuh_thresholds(template: CocycleFamily, epsilon):
    """(threshold used, literal (1 - eps) ln lambda) for the Delta_epsilon condition."""
    lam = template.payload.lam if template.kind == "szego" else template.lam
    literal = (1 - epsilon) * math.log(lam) if lam > 0 else -math.inf
    if template.kind == "szego":
        return -(1 - epsilon) * 0.5 * math.log(1 - lam), literal
    return max(literal, POSITIVITY), literal


def delta_mask(scan: ScanResult, epsilon, literal=False):
    used, lit = nuh_thresholds(scan.template, epsilon)
    thr = lit if literal else used
    return np.array([c == NUH and l > thr for c, l in zip(scan.class_of, scan.le_of)], dtype=bool)


def delta_measure(scan: ScanResult, epsilon) -> MeasureEstimate:
    _check_eps(epsilon)
    used, lit = nuh_thresholds(scan.template, epsilon)
    frac = float(np.mean(delta_mask(scan, epsilon))) if len(scan.grid) else 0.0
    frac_lit = float(np.mean(delta_mask(scan, epsilon, literal=True))) if len(scan.grid) else 0.0
    return MeasureEstimate(frac, scan.step, extra={"threshold": used, "literal_threshold": lit,
                                                   "literal_value": frac_lit})


def t_template(v, lam, alpha):
    """Shifted Schrodinger (t = E / lam) or Szego template for t scans."""
    if isinstance(v, SzegoPotential):
        return build_family("szego", alpha, payload=v)
    return build_family("schrodinger_shifted", alpha, lam=lam, payload=v)


def delta_epsilon_scan(v, lam, alpha, epsilon, t_grid, cert_config=None, le_config=None, workers=1):
    """Delta_epsilon measure over [0, 1] from a t scan."""
    _check_eps(epsilon)
    scan = scan_uh(t_template(v, lam, alpha), "t", t_grid, cert_config, le_config,
                   domain=(0.0, 1.0), workers=workers)
    return scan, delta_measure(scan, epsilon)


def gamma_epsilon_scan(v, lam, epsilon, alpha_grid, t_grid, cert_config=None, le_config=None, workers=1):
    """Mean over alpha of the per-alpha Delta_epsilon measures."""
    _check_eps(epsilon)
    t_grid = np.asarray(t_grid, dtype=float)
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    if t_grid.size == 0 or alpha_grid.size == 0:
        return MeasureEstimate(0.0, math.nan, extra={"per_alpha": []})
    per = [delta_epsilon_scan(v, lam, a, epsilon, t_grid, cert_config, le_config, workers)[1].value
           for a in alpha_grid]
    return MeasureEstimate(float(np.mean(per)), 1.0 / t_grid.size, extra={"per_alpha": per})


def golden_translates(count, base=GOLDEN):
    """Frequencies frac(golden + j / count), avoiding rationals."""
    return np.mod(base + np.arange(count) / count, 1.0)


# -- Young's hypotheses ----------------------------------------------------------------
def szego_c_hat(theta: AnalyticCircleFunction, k, alpha):
    """(x, t) -> cos pi [theta(x) - theta(x - alpha) + k alpha + t]."""
    def c(x, t):
        return np.cos(np.pi * ((theta(x) - theta(x - alpha)).real + k * alpha + t))
    return c


def schrodinger_c_limit(v: AnalyticCircleFunction, alpha):
    """(x, t) -> t - v(x - alpha), the infinite-coupling limit."""
    def c(x, t):
        return t - v(x - alpha).real
    return c


@dataclass(frozen=True)
class YoungReport:
    t_grid: np.ndarray
    zero_counts: list
    transversality: list
    injectivity: list
    passes: list
    offending: list


def young_hypotheses_check(c_fn, t_grid, x_grid=4096, tol=1e-6, dt=1e-6) -> YoungReport:
    """Zero count, min |dc/dx| at zeros, and separation of (dc/dt)/(dc/dx) across zeros."""
    xs = np.arange(x_grid) / x_grid
    h = 1.0 / x_grid
    counts, trans, inj, ok, bad = [], [], [], [], []
    for t in np.asarray(t_grid, dtype=float):
        c = c_fn(xs, t)
        nxt = np.roll(c, -1)
        idx = np.nonzero((c == 0) | (c * nxt < 0))[0]
        roots = []
        for i in idx:
            a, b = c[i], nxt[i]
            roots.append(xs[i] + (h * a / (a - b) if a != b else 0.0))
        roots = np.array(roots)
        n = len(roots)
        if n:
            dx = (c_fn(roots + 1e-7, t) - c_fn(roots - 1e-7, t)) / 2e-7
            dtv = (c_fn(roots, t + dt) - c_fn(roots, t - dt)) / (2 * dt)
            tm = float(np.min(np.abs(dx)))
            w = dtv / np.where(dx != 0, dx, np.nan)
            im = float(np.min(np.abs(w[:, None] - w[None, :])[~np.eye(n, dtype=bool)])) if n > 1 else math.inf
        else:
            tm, im = math.nan, math.nan
        passed = n > 0 and tm > tol and (n == 1 or im > tol)
        counts.append(n)
        trans.append(tm)
        inj.append(im)
        ok.append(bool(passed))
        if not passed:
            bad.append(float(t))
    return YoungReport(np.asarray(t_grid, dtype=float), counts, trans, inj, ok, bad)


# -- truncated operators -----------------------------------------------------------------
@dataclass(frozen=True)
class TruncatedOperator:
    kind: str
    N: int
    matrix: np.ndarray | None
    eigenvalues: np.ndarray
    diag: np.ndarray | None = None
    offdiag: np.ndarray | None = None

    def dense(self):
        if self.matrix is not None:
            return self.matrix
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def schrodinger_truncation(v: AnalyticCircleFunction, lam, alpha, x0=0.0, N=512) -> TruncatedOperator:
    """Dirichlet section with diagonal lam v(x0 + n alpha) and unit hopping."""
    if N < 2:
        raise ValueError("N must be at least 2")
    x = np.mod(x0 + np.arange(N) * alpha, 1.0)
    d = lam * v(x).real
    e = np.ones(N - 1)
    eig = eigvalsh_tridiagonal(d, e)
    return TruncatedOperator("schrodinger", N, None, np.sort(eig), d, e)


def _theta_block(a):
    rho = math.sqrt(max(1.0 - abs(a) ** 2, 0.0))
    return np.array([[np.conj(a), rho], [rho, -a]], dtype=complex)


def cmv_truncation(verblunsky, N=None, tol=1e-12) -> TruncatedOperator:
    """Finite CMV matrix C = L M from Theta blocks; the last coefficient must be unimodular."""
    al = np.asarray(verblunsky, dtype=complex)
    if N is not None:
        al = al[:N]
    N = al.size
    if N < 1:
        raise BadVerblunsky("need at least one coefficient", "verblunsky")
    if np.any(np.abs(al[:-1]) >= 1.0):
        raise BadVerblunsky("inner Verblunsky coefficients must lie in the open disk", "verblunsky")
    if abs(abs(al[-1]) - 1.0) > tol:
        raise BadVerblunsky("last Verblunsky coefficient must be unimodular", "verblunsky")

    def direct_sum(start):
        M = np.zeros((N, N), dtype=complex)
        if start == 1:
            M[0, 0] = 1.0
        j = start
        while j < N:
            if j + 1 < N:
                M[j:j + 2, j:j + 2] = _theta_block(al[j])
            else:
                M[j, j] = np.conj(al[j])
            j += 2
        return M

    C = direct_sum(0) @ direct_sum(1)
    return TruncatedOperator("cmv", N, C, np.linalg.eigvals(C))


def verblunsky_orbit(pot: SzegoPotential, alpha, x0=0.0, N=256, last=1.0 + 0j):
    """f(x0 + j alpha) for j < N - 1 followed by a unimodular closing coefficient."""
    x = np.mod(x0 + np.arange(N - 1) * alpha, 1.0)
    return np.append(pot.f(x), last)


def eigen_conflicts(scan: ScanResult, eigenvalues):
    """Eigenvalues (on the scan axis) falling inside a UHCertified cell."""
    h = scan.step
    certified = scan.grid[scan.certified_mask()]
    if certified.size == 0:
        return np.array([])
    ev = np.asarray(eigenvalues, dtype=float)
    out = []
    for e in ev:
        d = np.abs(certified - e)
        if scan.axis == "t":
            d = np.minimum(d, 1.0 - d)
        if np.any(d < h / 2):
            out.append(e)
    return np.array(out)

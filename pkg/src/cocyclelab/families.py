"""Quasiperiodic cocycle families over the circle rotation x -> x + alpha."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from . import mat2
from ._kernels import right_product_chunk, scaled_product_chunk
from .errors import BadCoupling, ConfigError, StripExceeded

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TWO_PI = 2.0 * np.pi
KINDS = ("szego", "schrodinger", "schrodinger_shifted", "constant", "diagonal_exp", "custom")


@dataclass(frozen=True, eq=False)
class AnalyticCircleFunction:
    """Trigonometric polynomial z -> sum_n c_n exp(2 pi i n z) on the strip |Im z| < delta."""

    coeffs: tuple = ()
    delta: float = math.inf

    def __post_init__(self):
        merged = {}
        for n, c in self.coeffs:
            merged[int(n)] = merged.get(int(n), 0j) + complex(c)
        object.__setattr__(self, "coeffs", tuple(sorted(merged.items())))

    @classmethod
    def constant(cls, c, delta=math.inf):
        return cls(((0, c),), delta)

    @classmethod
    def cos(cls, amplitude=1.0, n=1, offset=0.0, delta=math.inf):
        """offset + amplitude * cos(2 pi n x)."""
        terms = [(n, amplitude / 2), (-n, amplitude / 2)]
        if offset:
            terms.append((0, offset))
        return cls(tuple(terms), delta)

    @classmethod
    def from_table(cls, table, delta=math.inf):
        """Build from [[n, re, im], ...] or {n: complex}."""
        if isinstance(table, dict):
            return cls(tuple((int(n), complex(c)) for n, c in table.items()), delta)
        return cls(tuple((int(r[0]), complex(r[1], r[2] if len(r) > 2 else 0.0)) for r in table), delta)

    def to_table(self):
        return [[n, c.real, c.imag] for n, c in self.coeffs]

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for n, c in self.coeffs:
            if c == 0:
                continue
            out += c if n == 0 else c * np.exp(TWO_PI * 1j * n * z)
        return out

    def coefficient(self, n):
        return dict(self.coeffs).get(n, 0j)

    @property
    def support(self):
        return [n for n, c in self.coeffs if c != 0]

    def is_constant(self, tol=0.0):
        return all(abs(c) <= tol for n, c in self.coeffs if n != 0)

    def is_real(self, tol=1e-12):
        table = dict(self.coeffs)
        return all(abs(table.get(-n, 0j) - np.conj(c)) <= tol for n, c in table.items())

    def sharp(self):
        """The reflection z -> conj(f(conj z)), holomorphic when f is."""
        return AnalyticCircleFunction(tuple((-n, np.conj(c)) for n, c in self.coeffs), self.delta)

    def derivative(self):
        return AnalyticCircleFunction(tuple((n, TWO_PI * 1j * n * c) for n, c in self.coeffs), self.delta)

    def lipschitz_bound(self):
        """sum 2 pi |n| |c_n|, a bound on |f'| on the real circle."""
        return float(sum(TWO_PI * abs(n) * abs(c) for n, c in self.coeffs))

    def sup_bound(self, y=0.0):
        return float(sum(abs(c) * math.exp(TWO_PI * abs(n) * abs(y)) for n, c in self.coeffs))

    def period_q(self):
        """Largest q with f(x + 1/q) = f(x); 0 for constants."""
        idx = [abs(n) for n in self.support if n != 0]
        return reduce(math.gcd, idx) if idx else 0

    def affine(self, scale, shift=0.0):
        terms = [(n, scale * c) for n, c in self.coeffs] + [(0, shift)]
        return AnalyticCircleFunction(tuple(terms), self.delta)

    def range_on_circle(self, grid=4096):
        x = np.arange(grid) / grid
        vals = self(x).real
        return float(vals.min()), float(vals.max())

    def normalized(self, grid=4096):
        """Affine rescaling with image of the circle equal to [0, 1]."""
        lo, hi = self.range_on_circle(grid)
        if hi - lo <= 0:
            raise ConfigError("cannot normalise a constant function", "normalize")
        return self.affine(1.0 / (hi - lo), -lo / (hi - lo))


@dataclass(frozen=True, eq=False)
class ExpCircleFunction:
    """z -> exp(g(z)) for a trigonometric polynomial g; used for custom diagonal entries."""

    g: AnalyticCircleFunction

    @property
    def delta(self):
        return self.g.delta

    def __call__(self, z):
        return np.exp(self.g(z))

    def sharp(self):
        return ExpCircleFunction(self.g.sharp())

    def is_constant(self, tol=0.0):
        return self.g.is_constant(tol)

    def to_table(self):
        return {"exp": self.g.to_table()}


@dataclass(frozen=True, eq=False)
class SzegoPotential:
    """Verblunsky data f = lam * exp(2 pi i (k x + theta(x)))."""

    k: int
    theta: AnalyticCircleFunction
    lam: float

    def __post_init__(self):
        if not (0.0 <= self.lam < 1.0):
            raise BadCoupling(f"Szego coupling must lie in [0, 1), got {self.lam}", "lambda")

    @property
    def delta(self):
        return self.theta.delta

    def h(self, z):
        return self.k * np.asarray(z) + self.theta(z)

    def v(self, z):
        return np.exp(TWO_PI * 1j * self.h(z))

    def f(self, z):
        return self.lam * self.v(z)

    def f_sharp(self, z):
        """conj(f(conj z)) = lam * exp(-2 pi i (k z + theta#(z)))."""
        th = self.theta.sharp()
        return self.lam * np.exp(-TWO_PI * 1j * (self.k * np.asarray(z) + th(z)))

    @property
    def q(self):
        return self.theta.period_q()


def _payload_delta(payload):
    if payload is None or isinstance(payload, np.ndarray):
        return math.inf
    if isinstance(payload, tuple):
        return min(_payload_delta(p) for p in payload)
    return getattr(payload, "delta", math.inf)


@dataclass(frozen=True, eq=False)
class CocycleFamily:
    """A cocycle map x -> left @ A(x + i y) @ right over rotation by alpha.

    ``t`` parametrises E = exp(2 pi i t) for the Szego kind; ``E`` is the real energy
    for both Schrodinger kinds (the shifted kind uses t = E / lam).
    """

    kind: str
    alpha: float
    lam: float = 0.0
    t: float = 0.0
    E: float = 0.0
    y: float = 0.0
    payload: object = None
    m: int = 1
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    # -- construction helpers -------------------------------------------------
    def replace(self, **changes):
        return build_family(**{**self._fields(), **changes})

    def _fields(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def with_height(self, y):
        return self.replace(y=y)

    def with_alpha(self, alpha):
        return self.replace(alpha=alpha)

    @property
    def delta(self):
        return _payload_delta(self.payload)

    @property
    def shifted_t(self):
        return self.E / self.lam

    @property
    def sqrt_E(self):
        return np.exp(1j * np.pi * (self.t % 1.0))

    def is_x_independent(self):
        if self.kind == "constant":
            return True
        if self.kind == "diagonal_exp":
            return self.m == 0
        p = self.payload
        if self.kind == "szego":
            return p.lam == 0 or (p.k == 0 and p.theta.is_constant())
        if self.kind in ("schrodinger", "schrodinger_shifted"):
            return p.is_constant()
        if self.kind == "custom":
            return all(e.is_constant() for e in p)
        return False

    # -- evaluation -------------------------------------------------------------
    def matrices(self, x):
        """A(x + i y) for an array of real phases; returns shape x.shape + (2, 2)."""
        x = np.asarray(x, dtype=float)
        z = x + 1j * self.y
        out = np.empty(x.shape + (2, 2), dtype=complex)
        k = self.kind
        if k == "szego":
            p = self.payload
            f = p.f(z)
            fs = p.f_sharp(z)
            s = self.sqrt_E
            pref = 1.0 / np.sqrt(1.0 - f * fs)
            out[..., 0, 0] = pref * s
            out[..., 0, 1] = -pref * fs / s
            out[..., 1, 0] = -pref * f * s
            out[..., 1, 1] = pref / s
        elif k == "schrodinger":
            out[..., 0, 0] = self.E - self.lam * self.payload(z)
            out[..., 0, 1] = -1.0
            out[..., 1, 0] = 1.0
            out[..., 1, 1] = 0.0
        elif k == "schrodinger_shifted":
            out[..., 0, 0] = self.E - self.lam * self.payload(z)
            out[..., 0, 1] = -1.0 / self.lam
            out[..., 1, 0] = self.lam
            out[..., 1, 1] = 0.0
        elif k == "constant":
            out[...] = self.payload
        elif k == "diagonal_exp":
            e = np.exp(TWO_PI * 1j * self.m * z)
            out[..., 0, 0] = e
            out[..., 0, 1] = 0.0
            out[..., 1, 0] = 0.0
            out[..., 1, 1] = 1.0 / e
        elif k == "custom":
            a, b, c, d = self.payload
            out[..., 0, 0] = a(z)
            out[..., 0, 1] = b(z)
            out[..., 1, 0] = c(z)
            out[..., 1, 1] = d(z)
        else:  # pragma: no cover - guarded by build_family
            raise ConfigError(f"unknown kind {k}", "kind")
        if self.left is not None:
            out = self.left @ out
        if self.right is not None:
            out = out @ self.right
        return out

    def orbit(self, x0, n, start=0):
        """Phases x0 + j alpha (mod 1) for j = start .. start + n - 1."""
        j = np.arange(start, start + n, dtype=float)
        return np.mod(np.asarray(x0, dtype=float)[..., None] + j * self.alpha, 1.0)

    # -- serialisation ------------------------------------------------------
    def to_dict(self):
        d = {"kind": self.kind, "alpha": self.alpha, "lambda": self.lam, "t": self.t,
             "E": self.E, "y": self.y, "m": self.m}
        p = self.payload
        if isinstance(p, SzegoPotential):
            d["k"] = p.k
            d["theta"] = p.theta.to_table()
            d["delta"] = p.theta.delta
        elif isinstance(p, AnalyticCircleFunction):
            d["v"] = p.to_table()
            d["delta"] = p.delta
        elif isinstance(p, np.ndarray):
            d["matrix"] = [[z.real, z.imag] for z in p.ravel()]
        elif isinstance(p, tuple):
            d["entries"] = [e.to_table() for e in p]
        for name in ("left", "right"):
            M = getattr(self, name)
            if M is not None:
                d[name] = [[z.real, z.imag] for z in M.ravel()]
        return d


def _matrix_from_pairs(rows):
    return np.array([complex(r, i) for r, i in rows], dtype=complex).reshape(2, 2)


def family_from_dict(d):
    kind = d["kind"]
    delta = float(d.get("delta", math.inf))
    payload = None
    if kind == "szego":
        theta = AnalyticCircleFunction.from_table(d.get("theta", []), delta)
        payload = SzegoPotential(int(d.get("k", 0)), theta, float(d["lambda"]))
    elif kind in ("schrodinger", "schrodinger_shifted"):
        payload = AnalyticCircleFunction.from_table(d["v"], delta)
    elif kind == "constant":
        payload = _matrix_from_pairs(d["matrix"])
    elif kind == "custom":
        ents = []
        for e in d["entries"]:
            if isinstance(e, dict):
                ents.append(ExpCircleFunction(AnalyticCircleFunction.from_table(e["exp"], delta)))
            else:
                ents.append(AnalyticCircleFunction.from_table(e, delta))
        payload = tuple(ents)
    left = _matrix_from_pairs(d["left"]) if d.get("left") is not None else None
    right = _matrix_from_pairs(d["right"]) if d.get("right") is not None else None
    return build_family(kind=kind, alpha=float(d["alpha"]), lam=float(d.get("lambda", 0.0)),
                        t=float(d.get("t", 0.0)), E=float(d.get("E", 0.0)), y=float(d.get("y", 0.0)),
                        payload=payload, m=int(d.get("m", 1)), left=left, right=right)


def build_family(kind, alpha, lam=0.0, t=0.0, E=0.0, y=0.0, payload=None, m=1,
                 left=None, right=None, meta=None):
    """Validate parameters and construct a :class:`CocycleFamily`."""
    if kind not in KINDS:
        raise ConfigError(f"unknown family kind {kind!r}", "kind")
    alpha = float(alpha)
    if not (0.0 <= alpha < 1.0):
        alpha = alpha % 1.0
    if kind == "szego":
        if not isinstance(payload, SzegoPotential):
            raise ConfigError("szego family needs a SzegoPotential payload", "payload")
        lam = payload.lam
        if not (0.0 <= lam < 1.0):
            raise BadCoupling(f"Szego coupling must lie in [0, 1), got {lam}", "lambda")
    elif kind in ("schrodinger", "schrodinger_shifted"):
        if not isinstance(payload, AnalyticCircleFunction):
            raise ConfigError("Schrodinger family needs a potential v", "v")
        if not lam > 0.0:
            raise BadCoupling(f"Schrodinger coupling must be positive, got {lam}", "lambda")
    elif kind == "constant":
        payload = np.asarray(payload, dtype=complex).reshape(2, 2)
        if not mat2.is_sl2(payload):
            raise ConfigError("constant matrix must have determinant 1", "matrix")
    elif kind == "custom":
        payload = tuple(payload)
        if len(payload) != 4:
            raise ConfigError("custom family needs four entries", "entries")
    fam = CocycleFamily(kind=kind, alpha=alpha, lam=float(lam), t=float(t), E=float(E), y=float(y),
                        payload=payload, m=int(m),
                        left=None if left is None else np.asarray(left, dtype=complex),
                        right=None if right is None else np.asarray(right, dtype=complex),
                        meta=dict(meta or {}))
    if abs(fam.y) >= fam.delta:
        raise StripExceeded(f"|y| = {abs(fam.y)} outside strip of half-width {fam.delta}", "y")
    if kind == "custom":
        xs = np.arange(64) / 64.0
        dev = np.abs(mat2.det(fam.matrices(xs)) - 1.0).max()
        if dev > 1e-8:
            raise ConfigError(f"custom entries have det residual {dev:.2e} > 1e-8", "entries")
    return fam


# -- convenience builders ------------------------------------------------------
def szego(potential, alpha=GOLDEN, t=0.0, y=0.0):
    return build_family("szego", alpha, t=t, y=y, payload=potential)


def szego_potential(theta=None, k=0, lam=0.5, delta=math.inf):
    if theta is None:
        theta = AnalyticCircleFunction((), delta)
    return SzegoPotential(int(k), theta, float(lam))


def schrodinger(v, lam, E=0.0, alpha=GOLDEN, y=0.0, shifted=False, normalize=False):
    if normalize:
        v = v.normalized()
    kind = "schrodinger_shifted" if shifted else "schrodinger"
    return build_family(kind, alpha, lam=lam, E=E, y=y, payload=v)


def schrodinger_shifted_t(v, lam, t, alpha=GOLDEN, y=0.0):
    return schrodinger(v, lam, E=lam * t, alpha=alpha, y=y, shifted=True)


def constant(M, alpha=GOLDEN):
    return build_family("constant", alpha, payload=M)


def diagonal_exp(alpha=GOLDEN, y=0.0, m=1):
    return build_family("diagonal_exp", alpha, y=y, m=m)


def custom(entries, alpha=GOLDEN, y=0.0):
    return build_family("custom", alpha, y=y, payload=entries)


def shift_conjugator(lam):
    """T = diag(lam^(-1/2), lam^(1/2)), mapping the Schrodinger map to its shifted form."""
    return np.diag([lam ** -0.5, lam ** 0.5]).astype(complex)


# -- evaluation and iteration ----------------------------------------------------------
def evaluate(fam: CocycleFamily, x):
    """A at complexified phase x + i y."""
    M = fam.matrices(np.asarray(x, dtype=float))
    return M


CHUNK_ELEMS = 1 << 18


def orbit_products(fam: CocycleFamily, x0s, n, checkpoints: Sequence[int] = (), right=None,
                   keep_states=False):
    """Scaled products A_n(x0) for each phase in ``x0s``.

    ``right`` optionally holds one extra (2, 2) factor per row, applied as
    A(x) @ right[p]; this batches sweeps such as x -> B(x) R_theta.
    Returns (state, logs, renorms, marks) where the true product is
    ``state * exp(logs)`` and ``marks[k]`` holds log-norms after ``checkpoints[k]``
    steps (or ``(state, logs)`` copies when ``keep_states``).
    """
    x0s = np.atleast_1d(np.asarray(x0s, dtype=float))
    if right is not None:
        right = np.asarray(right, dtype=complex).reshape(-1, 2, 2)
        x0s = np.broadcast_to(x0s, (right.shape[0],)).copy() if x0s.size == 1 else x0s
    P = x0s.size
    state = np.zeros((P, 2, 2), dtype=complex)
    state[:, 0, 0] = state[:, 1, 1] = 1.0
    logs = np.zeros(P)
    renorms = np.zeros(P, dtype=np.int64)
    cps = sorted(set(int(c) for c in checkpoints if 0 < c <= n))
    marks = {}
    chunk = max(1, CHUNK_ELEMS // P)
    if fam.is_x_independent():
        M = fam.matrices(np.zeros(1))[0]
    done = 0
    stops = cps + [n]
    for stop in stops:
        while done < stop:
            m = min(chunk, stop - done)
            if fam.is_x_independent():
                mats = np.broadcast_to(M, (P, m, 2, 2)).copy()
            else:
                mats = fam.matrices(fam.orbit(x0s, m, start=done))
            if right is not None:
                mats = mats @ right[:, None]
            scaled_product_chunk(mats, state, logs, renorms)
            done += m
        if stop in cps:
            marks[stop] = (state.copy(), logs.copy()) if keep_states else logs + np.log(mat2.singular_norm(state))
    return state, logs, renorms, marks


def backward_products(fam: CocycleFamily, xs, checkpoints: Sequence[int]):
    """Scaled A_n(x - n alpha) = A(x - alpha) ... A(x - n alpha) for each n in ``checkpoints``.

    Returns {n: (state, logs)}; built by right-multiplication so all n share one pass.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    P = xs.size
    cps = sorted(set(int(c) for c in checkpoints if c > 0))
    state = np.zeros((P, 2, 2), dtype=complex)
    state[:, 0, 0] = state[:, 1, 1] = 1.0
    logs = np.zeros(P)
    out = {}
    chunk = max(1, CHUNK_ELEMS // P)
    done = 0
    for stop in cps:
        while done < stop:
            m = min(chunk, stop - done)
            j = np.arange(done + 1, done + m + 1, dtype=float)
            phases = np.mod(xs[:, None] - j * fam.alpha, 1.0)
            right_product_chunk(fam.matrices(phases), state, logs)
            done += m
        out[stop] = (state.copy(), logs.copy())
    return out


def iterate(fam: CocycleFamily, x, n: int):
    """(M, log_scale) with A_n(x) = M * exp(log_scale) and 1 <= ||M|| <= 2.

    Negative ``n`` uses A_{-m}(x) = A_m(x - m alpha)^{-1}.
    """
    n = int(n)
    if n == 0:
        return mat2.I2.copy(), 0.0
    m = abs(n)
    start = float(x) if n > 0 else (float(x) - m * fam.alpha) % 1.0
    state, logs, _, _ = orbit_products(fam, [start], m)
    M = state[0]
    if n < 0:
        M = mat2.adj(M)
    nrm = float(mat2.singular_norm(M))
    return M / nrm, float(logs[0] + math.log(nrm))


def unscale(M, log_scale):
    return M * math.exp(log_scale)

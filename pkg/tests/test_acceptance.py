"""Acceptance criteria 1-12, one pass/fail line each.

Every criterion is a pure function returning (passed, detail, payload); the
payload digest feeds the determinism check.
"""
import hashlib
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from cocyclelab import cli
from cocyclelab import families as F
from cocyclelab import hyperbolicity as H
from cocyclelab import lyapunov as L
from cocyclelab import mat2
from cocyclelab import spectra as S
from conftest import ACCEPTANCE

AC = F.AnalyticCircleFunction
AM_V = AC.cos(2.0)
COS2 = AC(((0, 0.5), (1, 0.25), (-1, 0.25)))  # cos^2(pi x)


def digest(payload):
    text = json.dumps(payload, sort_keys=True, default=lambda o: np.asarray(o).tolist())
    return hashlib.sha256(text.encode()).hexdigest()


# -- criteria ------------------------------------------------------------------
def c1():
    pot = F.szego_potential(AC.cos(1.0), 0, 0.6)
    lhs, rhs = L.prop1_verify(pot, L.phase_grid(64), n=200_000)
    err = abs(lhs - rhs)
    return err <= 5e-3, f"mean L={lhs:.6f} rhs={rhs:.6f} |diff|={err:.2e} <= 5e-3", [lhs, rhs]


def c2():
    lhs, rhs = L.hab_verify(F.constant(mat2.mat(2, 0, 0, 0.5)), L.phase_grid(64), n=200_000)
    err = abs(lhs - math.log(1.25))
    return err <= 5e-3, f"mean L={lhs:.6f} ln(5/4)={math.log(1.25):.6f} |diff|={err:.2e}", [lhs, rhs]


def _random_trig(rng, degree, scale):
    terms = []
    for n in range(1, degree + 1):
        c = scale * complex(rng.standard_normal(), rng.standard_normal()) / n
        terms += [(n, c), (-n, c.conjugate())]
    return AC(tuple(terms))


def c3():
    rng = np.random.default_rng(3)
    fams = []
    for _ in range(10):
        theta = _random_trig(rng, int(rng.integers(1, 3)), 0.4)
        pot = F.szego_potential(theta, int(rng.integers(0, 3)), float(rng.uniform(0.2, 0.9)))
        fams.append(F.szego(pot, t=float(rng.uniform())))
        v = _random_trig(rng, int(rng.integers(1, 3)), 1.0)
        fams.append(F.schrodinger(v, float(rng.uniform(0.5, 4.0)), E=float(rng.uniform(-3, 3))))
    worst, vals = 0.0, []
    for i, fam in enumerate(fams):
        p, q = [(1, 3), (3, 7), (2, 5)][i % 3]
        g = fam.with_alpha(Fraction(p, q))
        # at rational frequency L depends on the phase, so average over the quadrature phases
        it = L.le_iterate(g, 100_000, "grid", grid=256).value
        ra = L.le_rational(g, p, q, quad_points=256)
        worst = max(worst, abs(it - ra))
        vals.append([it, ra])
    return worst <= 1e-3, f"{len(fams)} families, max |iterate - rational| = {worst:.2e} <= 1e-3", vals


def c4():
    theta = AC.cos(0.5)
    pairs = H.exceptional_set(theta, 0).pairs
    xs = L.phase_grid(256)
    worst_le = worst_c = 0.0
    for lam in (0.3, 0.6, 0.9):
        fam = F.szego(F.szego_potential(theta, 0, lam), alpha=0.0, t=0.5)
        worst_le = max(worst_le, abs(L.le_rational(fam, 0, 1)))
        worst_c = max(worst_c, float(np.abs(H.closed_form_c(fam, xs)[0]).max()))
    ok = (Fraction(0), Fraction(1, 2)) in pairs and worst_le <= 1e-10 and worst_c <= 1e-12
    return ok, f"(0,-1) in exceptional set, max|L|={worst_le:.1e}, max|c|={worst_c:.1e}", [worst_le, worst_c]


def c5():
    rng = np.random.default_rng(5)
    pts = []
    for lam in (2.0, 5.0, 20.0):
        for E in np.linspace(3 + lam + 0.05, 3 + lam + 8, 20):
            pts += [F.schrodinger(AC.cos(1.0), lam, E=float(E)), F.schrodinger(AC.cos(1.0), lam, E=-float(E))]
    while len(pts) < 400:
        pot = F.szego_potential(AC.cos(rng.uniform(0.1, 1.0)), int(rng.integers(0, 3)), rng.uniform(0.3, 0.95))
        pts.append(F.szego(pot, t=float(rng.uniform()), y=float(rng.uniform(0.02, 0.25))))
    rows, kinds = [], set()
    for fam in pts:
        cert = H.cone_certify(fam)
        if not cert.ok:
            continue
        rows.append([L.le_iterate(fam, 100_000).value, cert.le_lower_bound])
        kinds.add(fam.kind)
        if len(rows) == 200 and len(kinds) == 2:
            break
    rows = np.array(rows)
    bad = int(np.sum(rows[:, 0] < rows[:, 1] - 5e-3))
    ok = len(rows) == 200 and kinds == {"szego", "schrodinger"} and bad == 0
    margin = float((rows[:, 0] - rows[:, 1]).min())
    return ok, f"{len(rows)} certified points, {bad} violations, min(L - bound)={margin:.3e}", rows


def _szego(amp, k, lam, t, y):
    return F.szego(F.szego_potential(AC.cos(amp), k, lam), t=t, y=y)


WINDING_CASES = (
    [(F.diagonal_exp(y=y, m=m), y) for m in (1, 2, 3) for y in (0.05, 0.1)]
    + [(F.schrodinger(AM_V, lam, E=0.0, y=y), y) for lam, y in ((3.0, 0.05), (3.0, 0.1), (3.0, 0.2), (5.0, 0.1))]
    + [(_szego(0.25, 0, 0.9, 0.3, y), y) for y in (0.05, 0.1, 0.2)]
    + [(_szego(0.25, 1, 0.9, 0.3, y), y) for y in (0.05, 0.2)]
    + [(_szego(0.5, 0, 0.6, 0.3, 0.1), 0.1), (_szego(0.25, 2, 0.8, 0.6, 0.1), 0.1)]
    + [(F.schrodinger(AC.cos(1.0), 2.0, E=E, y=0.05), 0.05) for E in (6.0, -6.0, 8.0)]
)


def c6():
    d = L.acceleration_fd(L.y_profile(F.diagonal_exp(), [0.01, 0.02, 0.04, 0.08], n=20_000, grid=4))
    ok_a = abs(d.slope_over_2pi - 1) <= 0.02
    am = L.acceleration_fd(L.y_profile(F.schrodinger(AM_V, 3.0, E=0.0), [0.05, 0.1, 0.2], n=20_000, grid=8))
    ok_b = am.deviation <= 0.1
    agree, tried, pairs = 0, 0, []
    for fam, y in WINDING_CASES:
        cert = H.cone_certify(fam)
        if not cert.ok:
            continue
        tried += 1
        w = H.winding_number(H.diagonalize_uh(fam, cert, 512))
        acc = L.acceleration_fd(L.y_profile(fam, [y - 0.02, y, y + 0.02], n=20_000, grid=8))
        agree += w == acc.nearest_integer
        pairs.append([w, acc.nearest_integer, acc.slope_over_2pi])
    ok_c = tried >= 20 and agree == tried
    detail = (f"(a) slope={d.slope_over_2pi:.4f} (b) AM slope={am.slope_over_2pi:.4f} dev={am.deviation:.3f} "
              f"(c) {agree}/{tried} certified families agree")
    return ok_a and ok_b and ok_c, detail, [d.slope_over_2pi, am.slope_over_2pi, pairs]


def c7():
    lam = 4.0
    Es = np.linspace(-2 - 2 * lam, 2 + 2 * lam, 100)
    vals = np.array([L.le_iterate(F.schrodinger(AM_V, lam, E=float(E)), 100_000).value for E in Es])
    low = float(vals.min())
    return low >= math.log(lam) - 0.05, f"min L={low:.4f} >= ln 4 - 0.05 = {math.log(lam) - 0.05:.4f}", vals


def c8():
    lam, c = 10.0, 0.5
    a, b = lam * c - 4, lam * c + 4
    tmpl = F.schrodinger(AC.constant(c), lam)
    vals = []
    for cells in (64, 128, 256):
        scan = S.scan_uh(tmpl, "E", S.cell_grid(a, b, cells), domain=(a, b))
        vals.append([S.spectrum_measure(scan).value, scan.step])
    final, step = vals[-1]
    ok = abs(final - 4.0) <= 2 * step
    seq = ", ".join(f"{v:.4f}" for v, _ in vals)
    return ok, f"measures {seq} after two refinements, |m-4|={abs(final - 4):.4f} <= {2 * step:.4f}", vals


def c9():
    am = S.scan_uh(F.schrodinger(AM_V, 3.0), "E", S.cell_grid(-9, 9, 512), domain=(-9, 9))
    ev = S.schrodinger_truncation(AM_V, 3.0, F.GOLDEN, 0.0, 512).eigenvalues
    bad_am = int(S.eigen_conflicts(am, ev).size)
    pot = F.szego_potential(AC.cos(1.0), 0, 0.6)
    sz = S.scan_uh(F.szego(pot), "t", S.cell_grid(0, 1, 512), domain=(0, 1))
    op = S.cmv_truncation(S.verblunsky_orbit(pot, F.GOLDEN, 0.0, 512))
    ts = np.mod(np.angle(op.eigenvalues) / (2 * np.pi), 1.0)
    bad_sz = int(S.eigen_conflicts(sz, ts).size)
    detail = (f"AM: {bad_am} conflicts ({int(am.certified_mask().sum())} certified cells); "
              f"Szego/CMV: {bad_sz} conflicts ({int(sz.certified_mask().sum())} certified cells)")
    return bad_am == 0 and bad_sz == 0, detail, [am.class_of, sz.class_of, bad_am, bad_sz]


def c10():
    deltas, ratios = [], []
    for lam in (10.0, 40.0, 160.0):
        _, m = S.delta_epsilon_scan(COS2, lam, F.GOLDEN, 0.25, S.cell_grid(0, 1, 512))
        deltas.append(m.value)
        es = S.scan_uh(F.schrodinger(COS2, lam), "E", S.cell_grid(-3, lam + 3, 512), domain=(-3, lam + 3))
        ratios.append(S.spectrum_measure(es).value / (lam + 4))
    ok_d = all(b >= a - 0.05 for a, b in zip(deltas, deltas[1:])) and deltas[-1] >= 0.6
    ok_r = all(b > a for a, b in zip(ratios, ratios[1:])) and ratios[-1] >= 0.55
    detail = (f"Delta_eps {[round(d, 3) for d in deltas]} (need >= 0.6 at 160): {'ok' if ok_d else 'no'}; "
              f"spectrum/(lam+4) {[round(r, 3) for r in ratios]}: {'ok' if ok_r else 'no'}")
    return ok_d and ok_r, detail, [deltas, ratios]


def c11():
    import test_properties as P
    names = [n for n in dir(P) if n.startswith("test_")]
    for n in names:
        getattr(P, n)()
    return True, f"{len(names)} property suites, 1000 derandomised cases each", names


CRITERIA = {1: c1, 2: c2, 3: c3, 4: c4, 5: c5, 6: c6, 7: c7, 8: c8, 9: c9, 10: c10, 11: c11}
DIGESTS = {}


def _record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    ok, detail, payload = CRITERIA[k]()
    DIGESTS[k] = digest(payload)
    _record(k, ok, detail)
    assert ok, detail


@pytest.mark.slow
def test_criterion_12_determinism(tmp_path):
    # the property suites are derandomised and produce no numbers, so they are not rerun
    again = {k: digest(CRITERIA[k]()[2]) for k in sorted(DIGESTS) if k != 11}
    first = {k: DIGESTS[k] for k in again}
    text = ("[family]\nkind = szego\nalpha = golden\nlambda = 0.6\ntheta = 1:0.5, -1:0.5\n\n"
            "[numerics]\nn = 20000\ntheta_grid = 16\n")
    cfg = cli.ExperimentConfig.from_text(text, "prop1")
    sums = []
    for run in ("a", "b"):
        out = tmp_path / run
        cli.run(cfg, out)
        sums.append(json.loads((out / "manifest.json").read_text())["checksums"])
    same = bool(first) and again == first and sums[0] == sums[1]
    diff = [k for k in again if again[k] != first[k]]
    _record(12, same, f"{len(again)} criteria rerun, mismatches {diff}; CLI checksums equal: {sums[0] == sums[1]}")
    assert same

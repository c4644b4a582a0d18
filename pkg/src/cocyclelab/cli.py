"""Command-line front end: INI configs in, CSV/JSON reports and a manifest out."""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import families as fam_mod
from . import hyperbolicity as hyp
from . import lyapunov as lya
from . import opuc
from . import spectra
from .errors import CocycleError, ConfigError

SUBCOMMANDS = ("lyapunov", "accelerate", "certify", "scan", "hab", "prop1", "opuc", "truncation")

DEFAULTS = {
    "numerics": {"n": "100000", "phase_mode": "single", "x0": "0", "grid": "32",
                 "theta_grid": "64", "heights": "", "quad_points": "256"},
    "cert": {"grid_size": "512", "max_block": "64", "margin_policy": "lipschitz",
             "sections": "true", "power_iters": "200"},
    "scan": {"axis": "E", "start": "-4", "stop": "4", "points": "512", "epsilon": "",
             "le_n": "10000", "refine": "true"},
    "opuc": {"n": "16", "grid_size": "1024", "eta": "1", "x0": "0"},
    "truncation": {"operator": "schrodinger", "N": "512", "x0": "0"},
}


class ConfigFieldError(ConfigError):
    pass


# -- config ------------------------------------------------------------------------
@dataclass
class ExperimentConfig:
    subcommand: str
    sections: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_text(cls, text, subcommand=None):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigFieldError(f"unparseable config: {exc}", "config") from exc
        sections = {s: dict(cp[s]) for s in cp.sections()}
        run = sections.pop("run", {})
        name = subcommand or run.get("subcommand")
        if run.get("subcommand") and subcommand and run["subcommand"] != subcommand:
            raise ConfigFieldError(f"config is for {run['subcommand']!r}, not {subcommand!r}", "run.subcommand")
        if name not in SUBCOMMANDS:
            raise ConfigFieldError(f"unknown subcommand {name!r}", "run.subcommand")
        try:
            seed = int(run.get("seed", "0"))
        except ValueError as exc:
            raise ConfigFieldError("seed must be an integer", "run.seed") from exc
        return cls(name, sections, seed)

    def to_text(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["run"] = {"subcommand": self.subcommand, "seed": str(self.seed)}
        for s in sorted(self.sections):
            cp[s] = dict(sorted(self.sections[s].items()))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def get(self, section, key):
        sec = self.sections.get(section, {})
        if key in sec:
            return sec[key]
        return DEFAULTS.get(section, {}).get(key)

    def canonical(self):
        return {"subcommand": self.subcommand, "seed": self.seed,
                "sections": {s: dict(sorted(v.items())) for s, v in sorted(self.sections.items())}}

    def hash(self):
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()


def _num(cfg, section, key, cast=float):
    raw = cfg.get(section, key)
    if raw is None or raw == "":
        raise ConfigFieldError(f"missing value for {section}.{key}", f"{section}.{key}")
    try:
        return cast(raw)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigFieldError(f"bad value {raw!r} for {section}.{key}", f"{section}.{key}") from exc


def _bool(cfg, section, key):
    raw = str(cfg.get(section, key)).strip().lower()
    if raw in ("1", "true", "yes", "on"):
        return True
    if raw in ("0", "false", "no", "off"):
        return False
    raise ConfigFieldError(f"bad boolean {raw!r} for {section}.{key}", f"{section}.{key}")


def _float_list(cfg, section, key):
    raw = cfg.get(section, key) or ""
    try:
        return [float(s) for s in raw.replace(";", ",").split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigFieldError(f"bad list {raw!r} for {section}.{key}", f"{section}.{key}") from exc


def parse_alpha(raw):
    raw = str(raw).strip().lower()
    if raw in ("golden", "golden_mean"):
        return fam_mod.GOLDEN
    if "/" in raw:
        return float(Fraction(raw))
    return float(raw)


def parse_fourier(raw, field_name):
    """"n:coef, n:coef" with complex coefficients such as 0.5 or 0.25+0.1j."""
    terms = []
    for item in str(raw).split(","):
        item = item.strip()
        if not item:
            continue
        try:
            n, c = item.split(":")
            terms.append((int(n), complex(c.replace(" ", ""))))
        except ValueError as exc:
            raise ConfigFieldError(f"bad Fourier term {item!r}", field_name) from exc
    return terms


def build_family_from_config(cfg: ExperimentConfig, required=True):
    sec = cfg.sections.get("family")
    if sec is None:
        if required:
            raise ConfigFieldError("missing [family] section", "family")
        return None
    kind = sec.get("kind", "")
    try:
        alpha = parse_alpha(sec.get("alpha", "golden"))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigFieldError(f"bad alpha {sec.get('alpha')!r}", "family.alpha") from exc
    num = {k: _num(cfg, "family", k) for k in ("lambda", "t", "E", "y", "delta") if k in sec}
    delta = num.get("delta", math.inf)
    lam = num.get("lambda", 0.0)
    try:
        if kind == "szego":
            theta = fam_mod.AnalyticCircleFunction(tuple(parse_fourier(sec.get("theta", ""), "family.theta")), delta)
            pot = fam_mod.SzegoPotential(int(_num(cfg, "family", "k", int)) if "k" in sec else 0, theta, lam)
            return fam_mod.build_family("szego", alpha, t=num.get("t", 0.0), y=num.get("y", 0.0), payload=pot)
        if kind in ("schrodinger", "schrodinger_shifted"):
            v = fam_mod.AnalyticCircleFunction(tuple(parse_fourier(sec.get("v", ""), "family.v")), delta)
            if "normalize" in sec and _bool(cfg, "family", "normalize"):
                v = v.normalized()
            E = num.get("E", lam * num["t"] if "t" in num and kind == "schrodinger_shifted" else 0.0)
            return fam_mod.build_family(kind, alpha, lam=lam, E=E, y=num.get("y", 0.0), payload=v)
        if kind == "constant":
            vals = [complex(s.strip().replace(" ", "")) for s in sec.get("matrix", "").split(",")]
            if len(vals) != 4:
                raise ConfigFieldError("matrix needs four entries a,b,c,d", "family.matrix")
            return fam_mod.build_family("constant", alpha, payload=np.array(vals).reshape(2, 2))
        if kind == "diagonal_exp":
            m = int(_num(cfg, "family", "m", int)) if "m" in sec else 1
            return fam_mod.build_family("diagonal_exp", alpha, y=num.get("y", 0.0), m=m)
    except ConfigFieldError:
        raise
    except ConfigError as exc:
        f = exc.field or "?"
        raise ConfigFieldError(str(exc), f if "." in f else f"family.{f}") from exc
    except ValueError as exc:
        raise ConfigFieldError(str(exc), "family") from exc
    raise ConfigFieldError(f"unknown or unsupported family kind {kind!r}", "family.kind")


# -- reports -------------------------------------------------------------------------
def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _json_clean(o):
    if isinstance(o, dict):
        return {str(k): _json_clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple, np.ndarray)):
        return [_json_clean(v) for v in list(o)]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else str(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Fraction):
        return str(o)
    return o


def emit_report(rows, columns, summary, out_dir: Path, stem):
    """Write <stem>.csv (fixed columns, 17 significant digits) and <stem>.json."""
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    json_path = out_dir / f"{stem}.json"
    payload = {"columns": list(columns), "rows": [list(r) for r in rows], "summary": summary}
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [csv_path, json_path]


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    checksums: dict
    wall_clock: float
    refinement_deltas: dict

    def to_dict(self):
        return {"config_hash": self.config_hash, "tool_version": self.tool_version,
                "checksums": self.checksums, "wall_clock_seconds": self.wall_clock,
                "refinement_deltas": self.refinement_deltas}


# -- subcommands ---------------------------------------------------------------------
def _scaled(cfg, section, key, scale):
    return int(_num(cfg, section, key, int) * scale)


def cmd_lyapunov(cfg, scale):
    fam = build_family_from_config(cfg)
    n = _num(cfg, "numerics", "n", int)
    mode = cfg.get("numerics", "phase_mode")
    grid = _scaled(cfg, "numerics", "grid", scale)
    est = lya.le_iterate(fam, n, mode, _num(cfg, "numerics", "x0"), grid)
    cols = ["alpha", "lambda", "t", "E", "y", "L", "n", "phase_mode", "phases", "renorm_count", "half_orbit_gap"]
    rows = [[fam.alpha, fam.lam if fam.kind != "szego" else fam.payload.lam, fam.t, fam.E, fam.y,
             est.value, est.n, est.phase_mode, est.phases, est.renorm_count, est.half_orbit_gap]]
    summary = {"estimate": est.to_dict(), "grid": grid}
    raw_alpha = cfg.sections["family"].get("alpha", "")
    if "/" in raw_alpha:
        fr = Fraction(raw_alpha)
        quad = _scaled(cfg, "numerics", "quad_points", scale)
        summary["le_rational"] = lya.le_rational(fam, fr.numerator, fr.denominator, quad)
        summary["quad_points"] = quad
    return rows, cols, summary, {}


def cmd_accelerate(cfg, scale):
    fam = build_family_from_config(cfg)
    heights = _float_list(cfg, "numerics", "heights") or lya.default_heights(fam)
    n = _num(cfg, "numerics", "n", int)
    grid = _scaled(cfg, "numerics", "grid", scale)
    prof = lya.y_profile(fam, heights, n=n, grid=grid)
    acc = lya.acceleration_fd(prof)
    rows = prof.to_rows()
    summary = {"acceleration": acc.to_dict(), "convexity_residual": prof.convexity_residual,
               "affine_residual_near_zero": prof.affine_residual_near_zero, "n": n, "grid": grid}
    return rows, ["y", "L"], summary, {}


def cmd_certify(cfg, scale):
    fam = build_family_from_config(cfg)
    gs = _scaled(cfg, "cert", "grid_size", scale)
    cert = hyp.cone_certify(fam, gs, cfg.get("cert", "margin_policy"), _num(cfg, "cert", "max_block", int))
    summary = {"certified": bool(cert.ok), "certificate": cert.to_dict()}
    rows = []
    if cert.ok and _bool(cfg, "cert", "sections"):
        sec = hyp.diagonalize_uh(fam, cert, gs, _num(cfg, "cert", "power_iters", int))
        summary["winding_number"] = hyp.winding_number(sec)
        summary["section_residual"] = sec.residual
        summary["mean_log_abs_r"] = sec.log_r_mean()
        rows = [[x, abs(r), float(np.angle(r))] for x, r in zip(sec.grid, sec.r_of_x)]
    return rows, ["x", "abs_r", "arg_r"], summary, {}


def cmd_scan(cfg, scale):
    fam = build_family_from_config(cfg)
    axis = cfg.get("scan", "axis")
    if axis not in ("E", "t"):
        raise ConfigFieldError("scan.axis must be E or t", "scan.axis")
    a, b = _num(cfg, "scan", "start"), _num(cfg, "scan", "stop")
    if not b > a:
        raise ConfigFieldError("scan.stop must exceed scan.start", "scan.stop")
    pts = _scaled(cfg, "scan", "points", scale)
    cc = spectra.CertConfig(_scaled(cfg, "cert", "grid_size", scale), _num(cfg, "cert", "max_block", int),
                            cfg.get("cert", "margin_policy"))
    lc = spectra.LeConfig(n=_num(cfg, "scan", "le_n", int))
    eps_raw = cfg.get("scan", "epsilon")
    eps = _num(cfg, "scan", "epsilon") if eps_raw not in (None, "") else None
    if eps is not None and not (0 < eps < 1):
        raise ConfigFieldError("scan.epsilon must lie in (0, 1)", "scan.epsilon")
    scan = spectra.scan_uh(fam, axis, spectra.cell_grid(a, b, pts), cc, lc, domain=(a, b))
    meas = spectra.spectrum_measure(scan, refine=_bool(cfg, "scan", "refine"))
    summary = {"spectrum_measure": meas.to_dict(), "config_hash": scan.config_hash, "points": pts,
               "cert_grid": cc.grid_size, "max_block": cc.max_block, "le_n": lc.n,
               "threshold": lc.threshold}
    if eps is not None:
        summary["delta_epsilon"] = spectra.delta_measure(scan, eps).to_dict()
    return scan.rows(), [axis, "class", "L", "cert_bound"], summary, {"spectrum_measure": meas.refinement_delta}


def cmd_hab(cfg, scale):
    fam = build_family_from_config(cfg)
    thetas = lya.phase_grid(_scaled(cfg, "numerics", "theta_grid", scale))
    n = _num(cfg, "numerics", "n", int)
    lhs, rhs = lya.hab_verify(fam, thetas, n)
    return [[lhs, rhs, lhs - rhs]], ["lhs", "rhs", "difference"], {"theta_grid": thetas.size, "n": n}, {}


def cmd_prop1(cfg, scale):
    fam = build_family_from_config(cfg)
    if fam.kind != "szego":
        raise ConfigFieldError("prop1 needs a szego family", "family.kind")
    thetas = lya.phase_grid(_scaled(cfg, "numerics", "theta_grid", scale))
    n = _num(cfg, "numerics", "n", int)
    lhs, rhs = lya.prop1_verify(fam.payload, thetas, n, alpha=fam.alpha)
    return [[lhs, rhs, lhs - rhs]], ["lhs", "rhs", "difference"], {"theta_grid": thetas.size, "n": n}, {}


def cmd_opuc(cfg, scale):
    fam = build_family_from_config(cfg)
    if fam.kind != "szego":
        raise ConfigFieldError("opuc needs a szego family", "family.kind")
    n = _num(cfg, "opuc", "n", int)
    eta = complex(cfg.get("opuc", "eta").replace(" ", ""))
    x = np.mod(_num(cfg, "opuc", "x0") + np.arange(n) * fam.alpha, 1.0)
    try:
        f = opuc.aleksandrov_rotate(fam.payload.f(x), eta)
    except ConfigError as exc:
        raise ConfigFieldError(str(exc), "opuc.eta") from exc
    pair = opuc.szego_evolve(f, n)
    gs = _scaled(cfg, "opuc", "grid_size", scale)
    meas = opuc.measure_density(pair, gs)
    # peaks of 1/|phi_n|^2 can be far narrower than the table grid
    finer = opuc.measure_density(pair, 2 * gs).total
    rows = [[th, d] for th, d in zip(meas.theta_grid, meas.density)]
    summary = {"total_mass": meas.total, "total_mass_doubled_grid": finer, "n": n,
               "grid_size": gs, "phi": [[c.real, c.imag] for c in pair.phi]}
    try:
        summary["total_mass_converged"], summary["converged_grid"] = opuc.measure_total(pair, start=gs)
    except CocycleError as exc:
        summary["total_mass_converged"] = f"unresolved: {exc}"
    return rows, ["theta", "density"], summary, {"total_mass": abs(finer - meas.total)}


def cmd_truncation(cfg, scale):
    fam = build_family_from_config(cfg)
    op_kind = cfg.get("truncation", "operator")
    N = _num(cfg, "truncation", "N", int)
    x0 = _num(cfg, "truncation", "x0")
    if op_kind == "schrodinger":
        if fam.kind != "schrodinger":
            raise ConfigFieldError("schrodinger truncation needs a schrodinger family", "family.kind")
        op = spectra.schrodinger_truncation(fam.payload, fam.lam, fam.alpha, x0, N)
        rows = [[float(e)] for e in op.eigenvalues]
        cols = ["eigenvalue"]
    elif op_kind == "cmv":
        if fam.kind != "szego":
            raise ConfigFieldError("cmv truncation needs a szego family", "family.kind")
        op = spectra.cmv_truncation(spectra.verblunsky_orbit(fam.payload, fam.alpha, x0, N))
        ev = sorted(op.eigenvalues, key=lambda z: np.mod(np.angle(z), 2 * np.pi))
        rows = [[z.real, z.imag, float(np.mod(np.angle(z) / (2 * np.pi), 1.0))] for z in ev]
        cols = ["re", "im", "t"]
    else:
        raise ConfigFieldError("truncation.operator must be schrodinger or cmv", "truncation.operator")
    return rows, cols, {"operator": op_kind, "N": N, "x0": x0}, {}


COMMANDS = {"lyapunov": cmd_lyapunov, "accelerate": cmd_accelerate, "certify": cmd_certify,
            "scan": cmd_scan, "hab": cmd_hab, "prop1": cmd_prop1, "opuc": cmd_opuc,
            "truncation": cmd_truncation}


def run(cfg: ExperimentConfig, out_dir, grid_scale=1.0) -> RunManifest:
    """Validate, execute one subcommand and write its report plus manifest.json."""
    out_dir = Path(out_dir)
    start = time.perf_counter()
    np.random.seed(cfg.seed)
    rows, cols, summary, deltas = COMMANDS[cfg.subcommand](cfg, grid_scale)
    summary = {"subcommand": cfg.subcommand, "config_hash": cfg.hash(), "grid_scale": grid_scale, **summary}
    files = emit_report(rows, cols, summary, out_dir, cfg.subcommand)
    manifest = RunManifest(cfg.hash(), __version__, {p.name: sha256_file(p) for p in files},
                           time.perf_counter() - start, deltas)
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_clean(manifest.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def build_parser():
    p = argparse.ArgumentParser(prog="cocyclelab", description="Quasiperiodic cocycle laboratory")
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}")
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="INI experiment config")
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--grid-scale", type=float, default=1.0, help="multiply all grids by K")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if not args.grid_scale > 0:
            raise ConfigFieldError("--grid-scale must be positive", "grid-scale")
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigFieldError(f"cannot read config: {exc}", "config") from exc
        cfg = ExperimentConfig.from_text(text, args.subcommand)
        manifest = run(cfg, args.out, args.grid_scale)
    except ConfigError as exc:
        print(f"config error [{getattr(exc, 'field', None) or '?'}]: {exc}", file=sys.stderr)
        return 2
    except (CocycleError, OSError) as exc:
        print(f"numerical or IO failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"out": str(args.out), "config_hash": manifest.config_hash,
                      "files": sorted(manifest.checksums)}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line interface.

Exit codes: 0 success with every check passing, 1 usage or configuration
error, 2 a scientific check failed (the report is still written).
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ehdensity, fields, landau, lattice, pvscheme, renorm
from .errors import ConvergenceError, DomainError, UnsupportedRegimeError
from .quad import QuadratureConfig

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2

SUBCOMMANDS = (
    "tabulate-eh", "tabulate-fpv", "relation-check", "renorm-check", "landau-check",
    "kernel-check", "heat-trace", "biot-savart", "lda", "lattice-density", "sweep",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def parse_range(text: str) -> np.ndarray:
    """start:stop:scale:count with scale 'lin' or 'log'."""
    parts = text.split(":")
    if len(parts) != 4:
        raise ValueError(f"range {text!r} must look like start:stop:lin|log:count")
    start, stop, scale, count = float(parts[0]), float(parts[1]), parts[2], int(parts[3])
    if count < 1:
        raise ValueError(f"range {text!r} needs count >= 1")
    if scale == "lin":
        return np.linspace(start, stop, count)
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise ValueError(f"log range {text!r} needs positive endpoints")
        return np.geomspace(start, stop, count)
    raise ValueError(f"range scale must be 'lin' or 'log', got {scale!r}")


def parse_floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def parse_values(text: str) -> list[float]:
    """Comma list or start:stop:scale:count range."""
    return parse_range(text).tolist() if ":" in text else parse_floats(text)


@dataclass
class RunConfig:
    subcommand: str
    masses: tuple = (1.0, 2.0, 3.0)
    e: float = 1.0
    rel_tol: float = 1e-11
    abs_tol: float = 0.0
    max_subdivisions: int = 4000
    source: str | None = None
    out: str = "json"
    output: str | None = None
    self_test: bool = False
    no_timing: bool = False
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        errs = []
        if self.subcommand not in SUBCOMMANDS:
            errs.append(f"unknown subcommand {self.subcommand!r}")
        m = self.masses
        if len(m) != 3 or not all(math.isfinite(v) for v in m) or not (0 < m[0] < m[1] < m[2]):
            errs.append(f"--masses must be three increasing positive numbers, got {list(m)}")
        if not (self.e > 0 and math.isfinite(self.e)):
            errs.append(f"--e must be > 0, got {self.e}")
        if not self.rel_tol > 0:
            errs.append(f"--rel-tol must be > 0, got {self.rel_tol}")
        if not self.abs_tol >= 0:
            errs.append(f"--abs-tol must be >= 0, got {self.abs_tol}")
        if self.max_subdivisions < 1:
            errs.append("--max-subdivisions must be >= 1")
        if self.out not in ("csv", "json"):
            errs.append(f"--out must be csv or json, got {self.out!r}")
        for k, v in self.params.items():
            if isinstance(v, (list, tuple)):
                vals = v
            else:
                vals = [v]
            for x in vals:
                if isinstance(x, float) and not math.isfinite(x):
                    errs.append(f"--{k.replace('_', '-')} must be finite")
        errs.extend(self.params.pop("_errors", []))
        if errs:
            raise UsageError("invalid configuration: " + "; ".join(errs))

    def quad(self) -> QuadratureConfig:
        return QuadratureConfig(self.rel_tol, self.abs_tol, self.max_subdivisions)

    def scheme(self) -> pvscheme.PvScheme:
        return pvscheme.make_scheme(*self.masses)


@dataclass
class EnergyReport:
    """Values carry a tolerance and a route tag; checks are named pass/fail flags."""

    command: str
    inputs: dict
    values: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add(self, name, value, tolerance, route, error=None):
        self.values[name] = {"value": value, "tolerance": tolerance, "route": route, "error": error}

    def check(self, name, ok):
        self.checks[name] = bool(ok)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        return json.dumps(_plain(asdict(self) | {"passed": self.passed}), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.rows:
            buf.write(",".join(self.columns) + "\n")
            for row in self.rows:
                buf.write(",".join(_fmt(v) for v in row) + "\n")
        else:
            buf.write("name,value,tolerance,route\n")
            for k in sorted(self.values):
                v = self.values[k]
                buf.write(f"{k},{_fmt(v['value'])},{_fmt(v['tolerance'])},{v['route']}\n")
            for k in sorted(self.checks):
                buf.write(f"check:{k},{int(self.checks[k])},,\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_tabulate_eh(cfg: RunConfig, rep: EnergyReport):
    mass = cfg.params["mass"]
    xs = np.asarray(cfg.params["b_grid"], dtype=float) * cfg.e
    vals = ehdensity.f_eh(xs, mass, cfg.quad())
    rep.columns = ["b", "f_eh", "weak_ratio", "strong_ratio"]
    for b, x, v in zip(cfg.params["b_grid"], xs, np.atleast_1d(vals)):
        weak = -x ** 4 / (360 * math.pi ** 2 * mass ** 4)
        strong = -x * x * math.log(x / mass ** 2) / (24 * math.pi ** 2) if x > mass ** 2 else float("nan")
        rep.rows.append([float(b), float(v), float(v / weak) if weak else float("nan"),
                         float(v / strong) if strong == strong and strong != 0 else float("nan")])


def _cmd_tabulate_fpv(cfg: RunConfig, rep: EnergyReport):
    sch = cfg.scheme()
    xs = np.asarray(cfg.params["b_grid"], dtype=float) * cfg.e
    vals = np.atleast_1d(pvscheme.f_pv(xs, sch, cfg.quad()))
    q = pvscheme.quadratic_coefficient(sch)
    slope = pvscheme.strong_field_slope(sch)
    rep.columns = ["b", "f_pv", "weak_ratio", "strong_ratio"]
    for b, x, v in zip(cfg.params["b_grid"], xs, vals):
        rep.rows.append([float(b), float(v), float(v / (q * x * x)), float(v / (slope * x))])


def _cmd_relation_check(cfg: RunConfig, rep: EnergyReport):
    sch = cfg.scheme()
    rep.columns = ["b", "f_pv", "relative_residual", "pass"]
    for b in cfg.params["b"]:
        r = pvscheme.relation_residual(b * cfg.e, sch, cfg.quad(), relative=True)
        fv = pvscheme.f_pv(b * cfg.e, sch, cfg.quad())
        ok = abs(r) < 1e-8
        rep.rows.append([b, fv, r, ok])
        rep.check(f"relation_b={b!r}", ok)


def _cmd_renorm_check(cfg: RunConfig, rep: EnergyReport):
    st = renorm.renormalize(cfg.e, cfg.scheme())
    b = cfg.params["b"][0]
    d = renorm.energy_difference(b, st, cfg.quad())
    rep.add("z3", st.z3, 1e-15, "closed_form:Z3")
    rep.add("e_ph", st.e_ph, 1e-15, "closed_form:sqrt(Z3)e")
    rep.add("b_ph", renorm.bph_of(b, st), 1e-15, "closed_form:b/sqrt(Z3)")
    rep.add("difference", d.difference, 10 * cfg.rel_tol * d.scale, "quadrature:f_pv-f_eh")
    rep.add("exact_identity_value", d.exact_identity_value, 10 * cfg.rel_tol * d.scale, "quadrature:c1*f_eh(m1)+c2*f_eh(m2)")
    rep.add("exponential_bound", d.exponential_bound, 1e-10, "bound:K|c1|(x/m)^4 Lambda^-4")
    rep.check("identity", d.identity_residual <= 1e-8 * max(d.scale, 1e-300) or d.scale == 0)
    rep.check("bound", d.within_bound)


def _cmd_landau_check(cfg: RunConfig, rep: EnergyReport):
    rep.columns = ["s", "b", "landau_route", "closed_form", "relative_gap", "n_max"]
    worst = 0.0
    for s in cfg.params["s_grid"]:
        for b in cfg.params["b_grid"]:
            h = landau.landau_heat_density(s, b)
            worst = max(worst, h.relative_gap)
            rep.rows.append([float(s), float(b), h.landau_route, h.closed_form, h.relative_gap, h.n_max])
    rep.add("max_relative_gap", worst, 1e-12, "landau_sum_vs_closed_form")
    rep.check("landau_vs_closed", worst < 1e-12)


def _cmd_kernel_check(cfg: RunConfig, rep: EnergyReport):
    rng = np.random.default_rng(cfg.params["seed"])
    n, box = cfg.params["samples"], cfg.params["box"]
    pts = rng.uniform(0, box, (n, 2, 3))
    r = landau.check_kernel_bounds(cfg.params["mu"], cfg.params["b"][0], pts,
                                   QuadratureConfig(max(cfg.rel_tol, 1e-9), cfg.abs_tol, cfg.max_subdivisions))
    rep.add("min_kernel_margin", float(r.kernel_margin.min()), 0.0, "quadrature_vs_bound:resolvent")
    rep.add("min_gradient_margin", float(r.gradient_margin.min()), 0.0, "quadrature_vs_bound:gradient")
    rep.values["violations"] = {"value": r.violations(), "tolerance": 0.0, "route": "samples", "error": None}
    rep.check("kernel_bounds", r.passed)


def _cmd_heat_trace(cfg: RunConfig, rep: EnergyReport):
    s, b = cfg.params["s"], cfg.params["b"][0]
    closed = landau.localized_heat_trace(s, b, None, route="closed")
    rep.columns = ["rho", "localized_trace", "closed_form", "relative_deviation"]
    worst = 0.0
    for rho in cfg.params["rho"]:
        v = landau.localized_heat_trace(s, b, landau.GaussianLocalizer(rho))
        dev = abs(v - closed) / closed
        worst = max(worst, dev)
        rep.rows.append([rho, v, closed, dev])
    rep.add("max_relative_deviation", worst, 1e-8, "gauss_legendre_3d_vs_closed_form")
    rep.check("rho_independence", worst < 1e-8)


def _load_grid(cfg: RunConfig) -> fields.FieldGrid:
    src = cfg.source or "gaussian"
    n = cfg.params.get("n", 32)
    if src == "gaussian":
        return fields.sample_profile(fields.GaussianProfile(cfg.params.get("b0", 1.0), 1.0), n)
    if src == "fourier":
        return fields.sample_profile(fields.FourierModeProfile(cfg.params.get("b0", 1.0)), n)
    if src == "random":
        return fields.random_bandlimited_field(n, 2 * math.pi, 4, cfg.params.get("seed", 0))
    return fields.read_grid(src)


def _cmd_biot_savart(cfg: RunConfig, rep: EnergyReport):
    g = _load_grid(cfg)
    a = fields.biot_savart(g)
    res = fields.curl_residual(g, a)
    div = fields.divergence_residual(a)
    rep.add("curl_residual", res, 1e-8, "spectral_curl_of_potential")
    rep.add("potential_divergence", div, 1e-10, "spectral_divergence")
    rep.check("curl_reproduces_B", res < 1e-8)
    rep.check("coulomb_gauge", div < 1e-10)
    if cfg.params.get("write_potential"):
        fields.write_grid(a, cfg.params["write_potential"])


def _cmd_lda(cfg: RunConfig, rep: EnergyReport):
    g = _load_grid(cfg)
    e = fields.lda_energy(g, cfg.e, cfg.scheme(), cfg.quad())
    rep.add("lda_energy", e, cfg.rel_tol * abs(e), "grid_sum:f_pv(e|B|)h^3")
    rep.add("max_abs_B", float(g.magnitude().max()), 0.0, "grid")
    rep.check("nonnegative", e >= 0)
    if cfg.params.get("histogram"):
        fields.write_histogram_csv(g, cfg.params["histogram"])


def _cmd_lattice_density(cfg: RunConfig, rep: EnergyReport):
    b = cfg.params["b"][0]
    r = lattice.continuum_check(b, cfg.scheme(), tuple(int(v) for v in cfg.params["n"]),
                                cfg.params["flux"], cfg.params["dims"], cfg.params["twists"])
    for n, a, d in zip(cfg.params["n"], r["spacings"], r["densities"]):
        rep.add(f"density_n={int(n)}", d, 0.0, f"lattice_spectrum:a={a!r}")
    rep.add("extrapolated", r["extrapolated"], 0.02 * abs(r["f_pv"]), "lattice_richardson")
    rep.add("f_pv", r["f_pv"], cfg.rel_tol * abs(r["f_pv"]), "quadrature:f_pv")
    rep.add("relative_error", r["relative_error"], 0.02, "comparison")
    rep.check("within_2_percent", abs(r["relative_error"]) <= 0.02)


def _cmd_sweep(cfg: RunConfig, rep: EnergyReport):
    name = cfg.source or "modulated"
    if name not in lattice.SWEEP_PROFILES:
        raise UsageError(f"unknown sweep profile {name!r}; choose from {sorted(lattice.SWEEP_PROFILES)}")
    prof = lattice.SWEEP_PROFILES[name]()
    n = int(cfg.params["n"][0])
    period = getattr(prof, "ell", 8.0)
    spec = lattice.LatticeSpec(n, period / n, 0, cfg.params["dims"])
    r = lattice.semiclassical_sweep(prof, cfg.params["eps"], spec, cfg.scheme())
    rep.columns = ["eps", "lattice_energy_density", "lda_value", "deviation", "runtime_s"]
    for row in r.rows:
        rep.rows.append([row.eps, row.lattice_energy_density, row.lda_value, row.deviation,
                         0.0 if cfg.no_timing else row.runtime_s])
    rep.add("rate_exponent", r.rate_exponent, 0.5, "least_squares_log_log")
    rep.check("monotone", r.monotone)
    rep.check("rate_window", r.rate_in_window)


COMMANDS = {
    "tabulate-eh": _cmd_tabulate_eh, "tabulate-fpv": _cmd_tabulate_fpv,
    "relation-check": _cmd_relation_check, "renorm-check": _cmd_renorm_check,
    "landau-check": _cmd_landau_check, "kernel-check": _cmd_kernel_check,
    "heat-trace": _cmd_heat_trace, "biot-savart": _cmd_biot_savart, "lda": _cmd_lda,
    "lattice-density": _cmd_lattice_density, "sweep": _cmd_sweep,
}


# ---------------------------------------------------------------------------
# Self tests: the trivial examples of each module
# ---------------------------------------------------------------------------

def _self_test(name: str, cfg: RunConfig, rep: EnergyReport):
    sch = cfg.scheme()
    chk = rep.check
    if name == "tabulate-eh":
        chk("f_eh(0)=0", ehdensity.f_eh(0.0) == 0.0)
        chk("orthogonal_reduces", ehdensity.f_eh_orthogonal(0.0, 0.5) == ehdensity.f_eh(0.5))
        chk("truncation_at_0", ehdensity.optimal_truncation_eval(0.0) == (0.0, 4, 0.0))
    elif name == "tabulate-fpv":
        chk("f_pv(0)=0", pvscheme.f_pv(0.0, sch) == 0.0)
        chk("weight(0)=0", pvscheme.pv_weight(0.0, sch) == 0.0)
        s1, s2 = sch.sum_rules()
        chk("sum_rules", abs(s1) < 1e-12 and abs(s2) < 1e-12)
    elif name == "relation-check":
        chk("residual(0)=0", pvscheme.relation_residual(0.0, sch) == 0.0)
    elif name == "renorm-check":
        st = renorm.renormalize(cfg.e, sch)
        d = renorm.energy_difference(0.0, st)
        chk("b=0", (d.difference, d.exact_identity_value, d.exponential_bound) == (0.0, 0.0, 0.0))
        chk("bph(0)=0", renorm.bph_of(0.0, st) == 0.0)
    elif name == "landau-check":
        chk("b=0", landau.landau_heat_density(1.0, 0.0).landau_route == 0.0)
        chk("zero_mode", landau.LandauSpectrum(1.0, 3).levels[0][2] == 0.0)
    elif name == "kernel-check":
        k = landau.pauli_resolvent_kernel(1.0, 0.0, [0, 0, 0], [1, 0, 0])
        chk("free_kernel", abs(k[0, 0].real - math.exp(-1) / (4 * math.pi)) < 1e-9)
    elif name == "heat-trace":
        v = landau.localized_heat_trace(1.0, 0.0, landau.GaussianLocalizer(1.0))
        chk("free_trace", abs(v - 1 / (4 * math.pi ** 1.5)) < 1e-12)
    elif name == "biot-savart":
        z = fields.FieldGrid(8, 1.0, np.zeros((8, 8, 8, 3)))
        chk("zero_field", not np.any(fields.biot_savart(z).values))
    elif name == "lda":
        z = fields.FieldGrid(8, 1.0, np.zeros((8, 8, 8, 3)))
        chk("zero_field", fields.lda_energy(z, 1.0, sch) == 0.0)
    elif name == "lattice-density":
        s = lattice.LatticeSpec(4, 1.0, 0, 2)
        chk("b=0", lattice.pv_energy_density(s, 0.0, sch, n_twist=2).density == 0.0)
    elif name == "sweep":
        r = lattice.semiclassical_sweep(lattice.ModulatedProfile(0.0), [0.5, 0.25], lattice.LatticeSpec(8, 1.0), sch)
        chk("zero_profile", all(row.deviation == 0.0 for row in r.rows))


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ehvac", description="Magnetic Euler-Heisenberg / Pauli-Villars vacuum energy checks")
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--masses", default="1,2,3", help="m0,m1,m2 of the Pauli-Villars scheme")
        sp.add_argument("--e", type=float, default=1.0, help="charge")
        sp.add_argument("--rel-tol", type=float, default=1e-11)
        sp.add_argument("--abs-tol", type=float, default=0.0)
        sp.add_argument("--max-subdivisions", type=int, default=4000)
        sp.add_argument("--out", default="json", help="csv or json")
        sp.add_argument("--output", default=None, help="file path (default stdout)")
        sp.add_argument("--self-test", action="store_true", help="run the trivial built-in checks")
        sp.add_argument("--no-timing", action="store_true", help="report zero runtimes for reproducible output")
        return sp

    sp = common(sub.add_parser("tabulate-eh", help="table of f_eh with asymptote ratios"))
    sp.add_argument("--b-grid", default="1e-3:1e3:log:25")
    sp.add_argument("--mass", type=float, default=1.0)
    sp = common(sub.add_parser("tabulate-fpv", help="table of f_pv with asymptote ratios"))
    sp.add_argument("--b-grid", default="1e-3:1e3:log:25")
    sp = common(sub.add_parser("relation-check", help="f_pv = sum c_j f_eh(m_j) + q x^2"))
    sp.add_argument("--b", default="0.5,1,10")
    sp = common(sub.add_parser("renorm-check", help="renormalised energy difference and bound"))
    sp.add_argument("--b", default="1")
    sp = common(sub.add_parser("landau-check", help="Landau sum against closed form"))
    sp.add_argument("--s-grid", default="0.05:20:log:20")
    sp.add_argument("--b-grid", default="0.05:20:log:20")
    sp = common(sub.add_parser("kernel-check", help="pointwise resolvent bounds"))
    sp.add_argument("--mu", type=float, default=1.0)
    sp.add_argument("--b", default="1")
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--box", type=float, default=5.0)
    sp.add_argument("--seed", type=int, default=0)
    sp = common(sub.add_parser("heat-trace", help="localised heat trace for several rho"))
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--b", default="1")
    sp.add_argument("--rho", default="0.25,0.5,1,2,4")
    for name, hlp in (("biot-savart", "vector potential from a field grid"), ("lda", "local density energy of a grid")):
        sp = common(sub.add_parser(name, help=hlp))
        sp.add_argument("--profile", default=None, help="gaussian, fourier or random")
        sp.add_argument("--grid", default=None, help="grid file path")
        sp.add_argument("--n", default="32")
        sp.add_argument("--b0", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)
        if name == "biot-savart":
            sp.add_argument("--write-potential", default=None)
        else:
            sp.add_argument("--histogram", default=None, help="write a |B| histogram CSV here")
    sp = common(sub.add_parser("lattice-density", help="lattice PV density against f_pv"))
    sp.add_argument("--b", default="2")
    sp.add_argument("--n", default="6,8,10")
    sp.add_argument("--flux", type=int, default=1)
    sp.add_argument("--dims", type=int, default=3)
    sp.add_argument("--twists", type=int, default=8)
    sp = common(sub.add_parser("sweep", help="semiclassical sweep against the local density approximation"))
    sp.add_argument("--profile", default="modulated", help="modulated, gaussian or constant")
    sp.add_argument("--eps", default="0.5,0.25,0.125")
    sp.add_argument("--n", default="40", help="sites per profile period at eps = 1")
    sp.add_argument("--dims", type=int, default=2)
    return p


def _config_from_args(ns) -> RunConfig:
    errs = []
    params = {}

    def grab(key, fn, label):
        raw = getattr(ns, key, None)
        if raw is None:
            return
        try:
            params[key] = fn(raw)
        except (ValueError, TypeError) as exc:
            errs.append(f"{label}: {exc}")

    try:
        masses = tuple(parse_floats(ns.masses))
    except ValueError as exc:
        errs.append(f"--masses: {exc}")
        masses = (1.0, 2.0, 3.0)
    grab("b_grid", parse_range, "--b-grid")
    grab("s_grid", parse_range, "--s-grid")
    grab("b", parse_values, "--b")
    grab("eps", parse_values, "--eps")
    grab("rho", parse_values, "--rho")
    grab("n", parse_values, "--n")
    for key in ("mass", "mu", "s", "box", "b0"):
        if getattr(ns, key, None) is not None:
            params[key] = float(getattr(ns, key))
    for key in ("samples", "seed", "flux", "dims", "twists"):
        if getattr(ns, key, None) is not None:
            params[key] = int(getattr(ns, key))
    for key in ("write_potential", "histogram"):
        if getattr(ns, key, None):
            params[key] = getattr(ns, key)
    if "n" in params and ns.subcommand in ("biot-savart", "lda"):
        params["n"] = int(params["n"][0])
    if params.get("dims", 2) not in (2, 3):
        errs.append("--dims must be 2 or 3")
    if "samples" in params and params["samples"] < 1:
        errs.append("--samples must be >= 1")
    for key in ("b", "rho", "eps"):
        if key in params and any(v < 0 for v in params[key]):
            errs.append(f"--{key} must be nonnegative")
    source = None
    if getattr(ns, "grid", None) and getattr(ns, "profile", None) and ns.subcommand != "sweep":
        errs.append("give either --profile or --grid, not both")
    source = getattr(ns, "grid", None) or getattr(ns, "profile", None)
    params["_errors"] = errs
    return RunConfig(ns.subcommand, masses, ns.e, ns.rel_tol, ns.abs_tol, ns.max_subdivisions,
                     source, ns.out, ns.output, ns.self_test, ns.no_timing, params)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.subcommand is None:
            raise UsageError(f"a subcommand is required: {', '.join(SUBCOMMANDS)}")
        cfg = _config_from_args(ns)
        cfg.validate()
    except UsageError as exc:
        stderr.write(f"ehvac: error: {exc}\n")
        return EXIT_USAGE

    inputs = {k: v for k, v in asdict(cfg).items() if k not in ("params",)}
    inputs.update({k: v for k, v in cfg.params.items() if not k.startswith("_")})
    rep = EnergyReport(cfg.subcommand, _plain(inputs))
    start = time.perf_counter()
    try:
        if cfg.self_test:
            _self_test(cfg.subcommand, cfg, rep)
        else:
            COMMANDS[cfg.subcommand](cfg, rep)
    except (UsageError, DomainError, UnsupportedRegimeError, ConvergenceError, OSError) as exc:
        stderr.write(f"ehvac: error: {exc}\n")
        return EXIT_USAGE
    rep.timings["wall_s"] = 0.0 if cfg.no_timing else time.perf_counter() - start

    text = rep.to_csv() if cfg.out == "csv" else rep.to_json()
    if cfg.output:
        try:
            with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            stderr.write(f"ehvac: error: cannot write {cfg.output}: {exc}\n")
            return EXIT_USAGE
    else:
        stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_CHECK


def main() -> None:
    sys.exit(run())

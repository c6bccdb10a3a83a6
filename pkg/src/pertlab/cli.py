"""Command-line driver: ``pertlab [--out DIR] [--format csv|json] [--exact] <command> ...``.

Every run writes its tables and a ``manifest.json`` echoing the resolved
configuration; ``pertlab replay DIR/manifest.json`` reruns it.  Exit codes:
0 success, 2 usage error, 3 numerical contract violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import kepler, lindstedt, string_lab
from .inversion import FunctionJet, InsufficientOrderError, enumerate_trees, fixed_point_value, invert_series
from .series_core import TermGenerator, abel_sum

USAGE, CONTRACT = 2, 3
CONTRACT_ERRORS = (
    lindstedt.SolvabilityError,
    lindstedt.ResonanceError,
    lindstedt.DiophantineViolation,
    string_lab.NumericalInstabilityError,
    kepler.KeplerConvergenceError,
    InsufficientOrderError,
)


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict
    out: str = "pertlab_out"
    fmt: str = "csv"
    exact: bool = False


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)


# value parsing -------------------------------------------------------------------------

_REAL = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_real(text: str) -> float:
    """Floats plus multiples of pi: ``0.5``, ``pi/3``, ``2pi/3``, ``2*pi/3``."""
    m = _REAL.match(str(text))
    if not m or (m.group(1) is None and m.group(2) is None):
        raise argparse.ArgumentTypeError(f"not a real number: {text!r}")
    coef = float(m.group(1)) if m.group(1) not in (None, "+", "-") else (-1.0 if m.group(1) == "-" else 1.0)
    value = coef * (math.pi if m.group(2) else 1.0)
    return value / float(m.group(3)) if m.group(3) else value


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_grid(text: str) -> list[float]:
    """Comma list of reals, or ``start:stop:count`` (endpoint included)."""
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid must be start:stop:count")
        start, stop, count = parse_real(parts[0]), parse_real(parts[1]), int(parts[2])
        return [float(v) for v in np.linspace(start, stop, count)]
    return [parse_real(v) for v in text.split(",") if v.strip()]


def parse_rationals(text: str) -> list[Fraction]:
    try:
        return [Fraction(v.strip()) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated rationals, got {text!r}") from None


def parse_cosines(text: str) -> dict:
    """``"1,0:1;1,1:0.5"`` -> ``{(1, 0): 1.0, (1, 1): 0.5}``."""
    out = {}
    for term in str(text).split(";"):
        if not term.strip():
            continue
        try:
            modes, amp = term.split(":")
            out[tuple(int(v) for v in modes.split(","))] = parse_real(amp)
        except (ValueError, argparse.ArgumentTypeError):
            raise argparse.ArgumentTypeError(f"bad potential term {term!r}; expected n1,n2,...:amplitude") from None
    return out


# formatting ----------------------------------------------------------------------------


def format_value(v, exact: bool):
    """Text for CSV cells: 15 significant digits, rationals kept with ``--exact``."""
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, Fraction):
        if exact:
            return str(v)
        v = float(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)) or hasattr(v, "__float__") and not isinstance(v, str):
        return "%.15g" % float(v)
    if isinstance(v, (list, tuple)):
        return ";".join(format_value(x, exact) for x in v)
    return str(v)


def json_value(v, exact: bool):
    if isinstance(v, dict):
        return {k: json_value(x, exact) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [json_value(x, exact) for x in v]
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, Fraction) and exact:
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    x = float(v)
    return float("%.15g" % x) if math.isfinite(x) else None


def render_table(rows: list[dict], fmt: str, exact: bool) -> str:
    if fmt == "json":
        return json.dumps(json_value(rows, exact), indent=2) + "\n"
    keys: list = []
    for row in rows:
        keys.extend(k for k in row if k not in keys)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(keys)
    for row in rows:
        writer.writerow([format_value(row.get(k), exact) for k in keys])
    return buf.getvalue()


# subcommands ---------------------------------------------------------------------------


def run_string(p: dict, exact: bool) -> RunResult:
    Z = string_lab.parse_profile(p["datum"], p["a"])
    U = string_lab.parse_profile(p["velocity"], p["a"])
    meshes = p["meshes"]
    if not meshes:
        raise UsageError("need at least one mesh")
    m = p["m"] or max(meshes)
    cfg = string_lab.ChainConfig(a=p["a"], m=m, c=p["c"], omega0=p["omega0"])
    d = string_lab.project_initial_data(Z, U, cfg)
    modes = [
        {"h": int(h), "omega": w, "omega_continuum": wc, "A": a, "B": b}
        for h, w, wc, a, b in zip(d.labels, d.frequencies, string_lab.continuum_frequency(cfg, d.labels), d.A, d.B)
    ]
    state = string_lab.evolve_modal(d, cfg, p["t"])
    states = [{"site": i, "x": x, "y": y, "v": v} for i, (x, y, v) in enumerate(zip(cfg.sites(), state.y, state.v))]
    res = RunResult({"modes": modes, "state": states})
    if len(meshes) >= 1 and p["omega0"] == 0:
        grid = np.linspace(0, p["a"], p["points"])
        table = string_lab.convergence_study(Z, U, meshes, p["t"], grid, p["a"], p["c"], p["H"])
        res.tables["convergence"] = table.rows()
        res.tables["summary"] = [{"t": p["t"], "fitted_order": table.order, "energy": string_lab.chain_energy(state, cfg)}]
        res.lines.append(f"fitted order {format_value(table.order, False)}")
    return res


def run_kepler(p: dict, exact: bool) -> RunResult:
    res = RunResult()
    if p["action"] == "limit":
        r = kepler.laplace_limit(p["tol"])
        res.tables["limit"] = [{"laplace_limit": r, "eta_modulus": kepler.eta_modulus_imaginary(r)}]
        res.lines.append(f"laplace limit {format_value(r, False)}")
        return res
    if not 0 <= p["e"] < 1:
        raise UsageError(f"eccentricity must lie in [0, 1), got {p['e']}")
    rows = []
    for l in p["l"]:
        for row in kepler.compare_methods(p["e"], l, p["K"], p["N"], p["K_eta"]):
            rows.append({"e": p["e"], "l": l, **row})
    res.tables["compare"] = rows
    r = kepler.laplace_limit(1e-12)
    res.tables["limit"] = [{"laplace_limit": r, "e_over_limit": p["e"] / r}]
    for row in rows:
        res.lines.append(
            f"l={format_value(row['l'], False)} {row['method']:<8} {format_value(row['value'], False)}"
            + (f" [{row['flag']}]" if row["flag"] else "")
        )
    return res


def run_invert(p: dict, exact: bool) -> RunResult:
    phi = p["phi"] if exact else [float(c) for c in p["phi"]]
    jet = FunctionJet.scalar(phi)
    res = RunResult()
    if p["variable"] == "alpha":
        x = invert_series(jet, p["K"], "alpha")
    else:
        x = invert_series(jet, p["K"], "strength")
        fp = fixed_point_value(jet, p["K"])
        res.tables["fixed_point"] = [{"partial_sum": fp.value, "status": fp.status, "radius": fp.radius}]
        res.lines.append(f"fixed point {format_value(fp.value, False)} ({fp.status})")
    res.tables["coefficients"] = [{"k": k, "coefficient": x[k]} for k in range(1, p["K"] + 1)]
    res.lines.append(" ".join(format_value(x[k], exact) for k in range(1, p["K"] + 1)))
    if p["trees"]:
        res.tables["trees"] = [
            {"tree": t.to_text(), "multiplicity": mult}
            for t, mult in enumerate_trees(p["trees"], p["n"])
        ]
    return res


def _lindstedt_system(p: dict, dps: int | None):
    if p["f"] or p["omega"]:
        if not (p["f"] and p["omega"]):
            raise UsageError("an inline system needs both --f and --omega")
        f = lindstedt.Potential.from_cosines(p["f"])
        omega = lindstedt.DiophantineFrequency(tuple(p["omega"]), C0=p["C0"], tau=p["tau"], N=p["divisor_cutoff"])
        return lindstedt.LindstedtSystem("inline", f, omega)
    if p["system"] == "golden2d":
        return lindstedt.golden2d(dps or None)
    if p["system"] == "pendulum1d":
        return lindstedt.pendulum1d()
    raise UsageError(f"unknown system {p['system']!r}; available: {', '.join(lindstedt.SYSTEMS)}")


def run_lindstedt(p: dict, exact: bool) -> RunResult:
    K = p["K"]
    if K < 0:
        raise UsageError("K must be >= 0")
    dps = p["dps"] if p["dps"] is not None else (40 if p["verify"] else 0)
    system = _lindstedt_system(p, dps)
    H = lindstedt.lindstedt_series(system.potential, system.frequency, K)
    res = RunResult()
    res.tables["orders"] = [row for k, h in enumerate(H, start=1) for row in h.rows(k)]
    if system.frequency.d == 1 and H:
        res.lines.append(f"h1 coefficient on sin(alpha): {format_value(H[0].coefficient((1,), 0), exact)}")
    eps = list(np.logspace(math.log10(p["eps_min"]), math.log10(p["eps_max"]), p["eps_count"]))
    study = lindstedt.residual_study(H, system.potential, system.frequency, eps, p["grid"], dps or None)
    res.tables["residual"] = [
        {"epsilon": r.epsilon, "residual": r.residual, "zero_mode": r.zero_mode,
         "truncation_tail": r.truncation_tail, "flags": ";".join(r.flags)}
        for r in study.reports
    ]
    res.tables["residual_fit"] = [{"K": K, "slope": study.slope, "expected": K + 1, "dps": dps}]
    res.lines.append(f"residual slope {format_value(study.slope, False)} (expected {K + 1})")
    if K >= 3:
        fit = lindstedt.decay_fit(H)
        res.tables["decay"] = [{"c": fit.c, "kappa": fit.kappa, "max_violation": fit.max_violation,
                                "degenerate": fit.degenerate, "points": fit.points}]
        res.lines.append(f"decay fit c={format_value(fit.c, False)} kappa={format_value(fit.kappa, False)}")
    rep = lindstedt.small_divisor_report(system.frequency, p["divisor_cutoff"], system.frequency.tau, top=10)
    res.tables["divisors"] = [
        {"nu": list(nu), "abs_omega_nu": v, "bound": b} for nu, v, b in rep.offenders
    ] + [{"nu": "best_C0", "abs_omega_nu": rep.best_C0, "bound": rep.tau}]
    return res


SERIES_CATALOG = {
    "alternating": "(-1)^n, n >= 0",
    "cos:x": "cos(n x), n >= 1",
    "geometric:q": "q^n, n >= 0",
}


def _series(spec: str) -> TermGenerator:
    name, _, arg = spec.partition(":")
    if name == "alternating" and not arg:
        return TermGenerator(lambda n: -1.0 if n % 2 else 1.0)
    try:
        if name == "cos" and arg:
            x = parse_real(arg)
            return TermGenerator(lambda n: math.cos(n * x), start=1)
        if name == "geometric" and arg:
            q = parse_real(arg)
            return TermGenerator(lambda n: q**n)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"unknown series {spec!r}; available: {', '.join(SERIES_CATALOG)}")


def run_sum(p: dict, exact: bool) -> RunResult:
    g = _series(p["series"])
    r = abel_sum(g, p["radii"], extrapolate=not p["no_extrapolate"])
    res = RunResult()
    res.tables["abel"] = [{
        "series": p["series"], "abel_sum": r.value, "cesaro_mean": r.cesaro_mean, "fit_degree": r.fit_degree,
        "divergent_radii": list(r.divergent_at), "notes": "; ".join(r.notes),
    }]
    res.tables["radii"] = [{"r": x, "sum": s, "terms": n} for x, s, n in zip(r.radii, r.sums, r.terms_used)]
    res.lines.append(f"abel sum {format_value(r.value, False)}")
    return res


RUNNERS = {"string": run_string, "kepler": run_kepler, "invert": run_invert, "lindstedt": run_lindstedt, "sum": run_sum}


# argument parsing ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _globals(parser: argparse.ArgumentParser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--out", default=default(None), help="output directory (default pertlab_out)")
    parser.add_argument("--format", dest="fmt", choices=("csv", "json"), default=default("csv"))
    parser.add_argument("--exact", action="store_true", default=default(False),
                        help="rational arithmetic and output where supported")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pertlab", description="perturbation-series experiments")
    parser.add_argument("--version", action="version", version=f"pertlab {__version__}")
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    s = sub.add_parser("string", help="oscillator chain vs continuum string")
    s.add_argument("--datum", default="sine:1", help="position datum: " + ", ".join(string_lab.DATUM_CATALOG))
    s.add_argument("--velocity", default="zero", help="velocity datum, same catalog")
    s.add_argument("--meshes", type=parse_int_list, default=[32, 64, 128])
    s.add_argument("--m", type=int, default=0, help="chain for the mode table and snapshot (default: finest mesh)")
    s.add_argument("--t", type=parse_real, default=0.5)
    s.add_argument("--a", type=parse_real, default=1.0)
    s.add_argument("--c", type=parse_real, default=1.0)
    s.add_argument("--omega0", type=parse_real, default=0.0)
    s.add_argument("--H", type=int, default=400, help="continuum mode cutoff")
    s.add_argument("--points", type=int, default=256, help="comparison grid size")

    k = sub.add_parser("kepler", help="Kepler equation series")
    k.add_argument("action", nargs="?", choices=("compare", "limit"), default="compare")
    k.add_argument("--e", type=parse_real, default=0.5)
    k.add_argument("--l", type=parse_grid, default=[1.0], help="list a,b,c or start:stop:count")
    k.add_argument("--K", type=int, default=20)
    k.add_argument("--N", type=int, default=200)
    k.add_argument("--K-eta", dest="K_eta", type=int, default=120)
    k.add_argument("--tol", type=float, default=1e-7)

    i = sub.add_parser("invert", help="Lagrange inversion of alpha = x - phi(x)")
    i.add_argument("--phi", type=parse_rationals, default=[Fraction(0), Fraction(0), Fraction(1)],
                   help="Taylor coefficients of phi at 0")
    i.add_argument("--K", type=int, default=10)
    i.add_argument("--variable", choices=("alpha", "strength"), default="alpha")
    i.add_argument("--trees", type=int, default=0, help="also list trees with this many nodes")
    i.add_argument("--n", type=int, default=1, help="label count for --trees")

    l = sub.add_parser("lindstedt", help="Lindstedt series for invariant tori")
    l.add_argument("--system", default="pendulum1d", help="pendulum1d or golden2d")
    l.add_argument("--f", type=parse_cosines, default=None, help="inline potential n1,n2:amp;...")
    l.add_argument("--omega", type=parse_grid, default=None, help="inline frequency w1,w2,...")
    l.add_argument("--C0", type=float, default=1.0)
    l.add_argument("--tau", type=float, default=1.0)
    l.add_argument("--K", type=int, default=3)
    l.add_argument("--verify", action="store_true", help="extended precision residual study")
    l.add_argument("--dps", type=int, default=None, help="mpmath digits for the residual (0: double)")
    l.add_argument("--eps-min", dest="eps_min", type=float, default=1e-4)
    l.add_argument("--eps-max", dest="eps_max", type=float, default=1e-2)
    l.add_argument("--eps-count", dest="eps_count", type=int, default=5)
    l.add_argument("--grid", type=int, default=24, help="grid points per angle")
    l.add_argument("--divisor-cutoff", dest="divisor_cutoff", type=int, default=30)

    m = sub.add_parser("sum", help="Abel summation")
    m.add_argument("--series", default="alternating", help=", ".join(SERIES_CATALOG))
    m.add_argument("--radii", type=parse_grid, default=[0.9, 0.95, 0.98, 0.99, 0.995])
    m.add_argument("--no-extrapolate", dest="no_extrapolate", action="store_true")

    r = sub.add_parser("replay", help="rerun from a manifest")
    r.add_argument("manifest")

    for p in (s, k, i, l, m, r):
        _globals(p, suppress=True)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


GLOBAL_KEYS = {"out", "fmt", "exact", "subcommand"}


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    params = {k: v for k, v in vars(ns).items() if k not in GLOBAL_KEYS}
    return ExperimentConfig(ns.subcommand, params, ns.out or "pertlab_out", ns.fmt, ns.exact)


def config_from_manifest(path: str, out: str | None) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    name = data.get("subcommand")
    if name not in RUNNERS:
        raise UsageError(f"manifest names unknown subcommand {name!r}")
    defaults = vars(_subparser(build_parser(), name).parse_args([]))
    allowed = set(defaults) - GLOBAL_KEYS
    params = data.get("params", {})
    unknown = set(params) - allowed
    if unknown:
        raise UsageError(f"unknown keys in manifest: {sorted(unknown)}")
    resolved = {k: v for k, v in defaults.items() if k in allowed}
    resolved.update(_decode_params(name, params))
    return ExperimentConfig(name, resolved, out or str(Path(path).parent), data.get("format", "csv"),
                            bool(data.get("exact", False)))


def _encode(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, dict):
        return [[list(k), _encode(x)] for k, x in v.items()]
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if isinstance(v, float):
        return v if math.isfinite(v) else str(v)
    return v


def _decode_params(name: str, params: dict) -> dict:
    out = dict(params)
    if name == "invert" and "phi" in out:
        out["phi"] = [Fraction(v) for v in out["phi"]]
    if name == "lindstedt" and out.get("f") is not None:
        out["f"] = {tuple(k): v for k, v in out["f"]}
    return out


def execute(cfg: ExperimentConfig) -> RunResult:
    result = RUNNERS[cfg.subcommand](cfg.params, cfg.exact)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for name, rows in result.tables.items():
        fname = f"{cfg.subcommand}_{name}.{cfg.fmt}"
        (out / fname).write_text(render_table(rows, cfg.fmt, cfg.exact))
        files.append(fname)
    manifest = {
        "subcommand": cfg.subcommand,
        "params": {k: _encode(v) for k, v in sorted(cfg.params.items())},
        "format": cfg.fmt,
        "exact": cfg.exact,
        "outputs": files,
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return result


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.subcommand == "replay":
            cfg = config_from_manifest(ns.manifest, ns.out)
        else:
            cfg = config_from_args(ns)
        result = execute(cfg)
    except CONTRACT_ERRORS as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return CONTRACT
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE
    for line in result.lines:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())

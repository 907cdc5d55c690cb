"""Command-line reports for the droplet library.

Exit codes: 0 success, 2 domain or phase error, 3 solver failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .actions import (
    a_deformation_velocity,
    f1_leading_coefficient,
    liouville_explicit,
    liouville_report,
    liouville_variation_rate,
)
from .errors import DomainError, SolverError
from .expansion import energy, expansion_coefficients, log_z_predicted, log_z_reference
from .geometry import (
    ModelParams,
    Regime,
    classify_phase,
    contour_area_and_m1,
    coupled_residuals,
    droplet_area_and_m1,
    gauss_bonnet,
    outer_map,
    univalence_witness,
)
from .ortho_oracle import (
    QuadratureSpec,
    deformation_check_a,
    deformation_check_tau,
    hole_filling,
    oracle,
    predicted_coefficients_regime_i,
    rescaled_log_z,
    scaling_identity_residual,
)

EXIT_OK, EXIT_DOMAIN, EXIT_SOLVER, EXIT_USAGE = 0, 2, 3, 64
COMMANDS = ("phase", "map", "liouville", "energy", "expand", "oracle", "verify")
SUITES = ("deform-a", "deform-tau", "scaling", "rescale", "regime-i-coeffs", "hole-filling", "expansion")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _check(name, value, tolerance, passed=None):
    value = float(value)
    ok = value <= tolerance if passed is None else bool(passed)
    return {"name": name, "value": value, "tolerance": float(tolerance), "pass": ok}


def _params(ns) -> ModelParams:
    return ModelParams(float(ns.a), float(ns.c), float(ns.tau))


def _quad(ns) -> QuadratureSpec:
    n = ns.nodes or 64
    return QuadratureSpec(n, n)


def _map_dict(m):
    if m is None:
        return None
    return {"kind": m.kind.value, "tau": m.tau, "scale": m.scale, "center": m.center,
            "radius": m.radius, "R": m.R, "q": float(m.q), "lambda": float(m.lam)}


def cmd_phase(ns):
    p = _params(ns)
    ph = classify_phase(p)
    margins = {k: float(v) for k, v in ph.margins.items()}
    checks = []
    if ph.regime is Regime.II:
        res = max(abs(r) for r in coupled_residuals(ph.exterior_map, p))
        checks.append(_check("coupled_equation_residual", res, 1e-10))
    return {"regime": ph.regime.value, "margins": margins, "map": _map_dict(ph.exterior_map)}, checks


def cmd_map(ns):
    p = _params(ns)
    ph = classify_phase(p)
    m = outer_map(p, ph)
    area, m1 = droplet_area_and_m1(p, ph)
    out = {"regime": ph.regime.value, "map": _map_dict(m), "area": area, "m1": m1,
           "psi_prime_infinity": m.derivative_at_infinity}
    checks = [_check("area_minus_t0", abs(area - p.t0), 1e-10),
              _check("gauss_bonnet", abs(gauss_bonnet(m) - 2 * math.pi), 1e-10),
              _check("univalence_min_abs_dpsi", univalence_witness(m), 0.0,
                     passed=univalence_witness(m) > 0)]
    if ph.regime is Regime.II:
        res = max(abs(r) for r in coupled_residuals(m, p))
        checks.append(_check("coupled_equation_residual", res, 1e-10))
        checks.append(_check("contour_area_minus_t0", abs(contour_area_and_m1(m)[0] - p.t0), 1e-10))
    return out, checks


def cmd_liouville(ns):
    p = _params(ns)
    ph = classify_phase(p)
    r = liouville_report(p, ph)
    out = {"regime": ph.regime.value, "closed_form": r.closed_form, "explicit_formula": r.explicit_formula,
           "numeric_integral": r.numeric_integral,
           "per_component": {name: v for name, v in r.per_component}}
    checks = [_check("closed_vs_explicit", abs(r.closed_form - r.explicit_formula), 1e-7),
              _check("closed_vs_numeric", abs(r.closed_form - r.numeric_integral), 1e-7),
              _check("explicit_vs_numeric", abs(r.explicit_formula - r.numeric_integral), 1e-7)]
    if ph.regime is Regime.II:
        m = ph.exterior_map
        h = 1e-4
        fd = (liouville_explicit(p.replace(a=p.a + h)) - liouville_explicit(p.replace(a=p.a - h))) / (2 * h)
        rate = liouville_variation_rate(m, a_deformation_velocity(m))
        f1 = f1_leading_coefficient(m, p)
        out.update({"dS_da_variational": rate, "dS_da_finite_difference": fd, "f1": f1})
        checks.append(_check("variational_rate_vs_fd", abs(rate - fd), 1e-6))
        checks.append(_check("f1_vs_fd", abs(f1 - (1 + p.tau) / 48 * fd), 1e-6))
    return out, checks


def cmd_energy(ns):
    p = _params(ns)
    ph = classify_phase(p)
    e = energy(p, ph)
    h = 1e-5
    de = (energy(p.replace(a=p.a + h)) - energy(p.replace(a=max(p.a - h, 0.0)))) / (p.a + h - max(p.a - h, 0.0))
    _, m1 = droplet_area_and_m1(p, ph)
    out = {"regime": ph.regime.value, "energy": e, "dI_da": de, "m1": m1}
    checks = [_check("energy_derivative_vs_m1", abs((1 + p.tau) / 2 * de - m1 / p.t0), 1e-6)]
    return out, checks


def cmd_expand(ns):
    p = _params(ns)
    rep = expansion_coefficients(p, ns.k0)
    out = {"regime": rep.regime, "C1": rep.C1, "C2": rep.C2, "C3": rep.C3, "C4": rep.C4, "C5": rep.C5,
           "chi": rep.chi, "liouville": rep.liouville, "k0": rep.k0,
           "tail": [{"k": k, "E_k": e} for k, e in rep.tail]}
    if ns.N:
        out["N"] = ns.N
        out["log_Z_predicted"] = rep.log_z(ns.N)
    checks = [_check("C2_is_half", abs(rep.C2 - 0.5), 0.0)]
    return out, checks


def cmd_oracle(ns):
    p = _params(ns)
    N = ns.N or 8
    s = oracle(p, N, N + 2, _quad(ns))
    out = {"N": N, "log_Z": s.log_Z, "log_h": list(s.log_h), "A": list(s.A_coeffs), "B": list(s.B_coeffs),
           "achieved_tolerance": s.achieved_tolerance, "min_log_pivot": s.min_log_pivot}
    checks = [_check("quadrature_doubling", s.achieved_tolerance, _quad(ns).tolerance)]
    if p.c == 0:
        checks.append(_check("elliptic_reference", abs(s.log_Z - log_z_reference("elliptic", N, p)), 1e-7))
    return out, checks


def cmd_verify(ns):
    p = _params(ns)
    suite = ns.suite
    if suite not in SUITES:
        raise UsageError(f"--suite must be one of {', '.join(SUITES)}")
    N = ns.N or 6
    q = _quad(ns)
    if suite == "deform-a":
        d = deformation_check_a(p, N, q)
        out = {"finite_difference": d.finite_difference, "identity": d.identity_value,
               "residual": d.residual, "residual_half_step": d.residual_half_step,
               "richardson_ratio": d.richardson_ratio}
        checks = [_check("residual_a", d.residual, 1e-5),
                  _check("richardson_ratio", d.richardson_ratio, 0.0, passed=2.5 < d.richardson_ratio < 6.5)]
    elif suite == "deform-tau":
        d = deformation_check_tau(p, N, q)
        out = {"finite_difference": d.finite_difference, "identity": d.identity_value,
               "residual": d.residual, "residual_half_step": d.residual_half_step,
               "richardson_ratio": d.richardson_ratio}
        checks = [_check("residual_tau", d.residual, 1e-4)]
    elif suite == "scaling":
        r = scaling_identity_residual(p, N + 1, N, q)
        out = {"residual": r}
        checks = [_check("scaling_residual", r, 1e-8)]
    elif suite == "rescale":
        direct = oracle(p, N, N, q).log_Z
        r = abs(rescaled_log_z(p, N, q) - direct)
        out = {"log_Z": direct, "residual": r}
        checks = [_check("rescaled_identity", r, 1e-8)]
    elif suite == "regime-i-coeffs":
        s = oracle(p, N, N + 2, q)
        pr = predicted_coefficients_regime_i(p, N)
        tol = 5 * max(s.achieved_tolerance, np.finfo(float).eps)
        out = {"A_NN": s.A_coeffs[N], "A_pred": pr.A_NN, "B_NN": s.B_coeffs[N], "B_pred": pr.B_NN,
               "achieved_tolerance": s.achieved_tolerance}
        checks = [_check("A_NN", abs(s.A_coeffs[N] - pr.A_NN), tol),
                  _check("B_NN", abs(s.B_coeffs[N] - pr.B_NN), tol)]
    elif suite == "hole-filling":
        s = oracle(p, N, N + 1, q)
        hf = hole_filling(p, N, s)
        tol = 5 * max(s.achieved_tolerance, np.finfo(float).eps)
        out = {"degree": hf.degree, "subleading": hf.subleading, "subsubleading": hf.subsubleading,
               "hermite_subsubleading": hf.hermite_subsubleading, "achieved_tolerance": s.achieved_tolerance}
        checks = [_check("subleading", abs(hf.subleading), tol),
                  _check("subsubleading", abs(hf.subsubleading - hf.hermite_subsubleading), tol)]
    else:
        s = oracle(p, N, N, q)
        pred = log_z_predicted(p, N, ns.k0)
        r = abs(s.log_Z - pred)
        tol = max(5e-3, 10 * s.achieved_tolerance)
        out = {"log_Z_oracle": s.log_Z, "log_Z_predicted": pred, "residual": r}
        checks = [_check("expansion_vs_oracle", r, tol)]
    out["suite"] = suite
    return out, checks


HANDLERS = {"phase": cmd_phase, "map": cmd_map, "liouville": cmd_liouville, "energy": cmd_energy,
            "expand": cmd_expand, "oracle": cmd_oracle, "verify": cmd_verify}

SWEEP_COLUMNS = {
    "phase": ["regime"],
    "energy": ["regime", "energy"],
    "liouville": ["regime", "closed_form", "explicit_formula", "numeric_integral"],
    "expand": ["regime", "C1", "C3", "C4", "C5", "chi"],
    "oracle": ["log_Z", "A_NN", "B_NN"],
}


def _sweep_row(kind, a, c, tau, N, k0):
    try:
        p = ModelParams(a, c, tau)
        if kind == "oracle":
            s = oracle(p, N, N + 1)
            return [s.log_Z, s.A_coeffs[N], s.B_coeffs[N]], EXIT_OK
        ph = classify_phase(p)
        if kind == "phase":
            return [ph.regime.value], EXIT_OK
        if kind == "energy":
            return [ph.regime.value, energy(p, ph)], EXIT_OK
        if kind == "liouville":
            r = liouville_report(p, ph)
            return [ph.regime.value, r.closed_form, r.explicit_formula, r.numeric_integral], EXIT_OK
        rep = expansion_coefficients(p, k0, ph)
        return [rep.regime, rep.C1, rep.C3, rep.C4, rep.C5, rep.chi], EXIT_OK
    except DomainError:
        return None, EXIT_DOMAIN
    except SolverError:
        return None, EXIT_SOLVER


def parse_axis(text, integer=False):
    """'x', 'x,y,z' or 'start:stop:count' (inclusive linspace)."""
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 0:
            raise UsageError("count must be nonnegative")
        vals = [float(v) for v in np.linspace(start, stop, count)] if count != 1 else [start]
    else:
        vals = [float(v) for v in text.split(",") if v != ""]
    if integer:
        return [int(round(v)) for v in vals]
    return vals


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def run_sweep(ns, stream):
    kind = ns.what
    axes_a = parse_axis(ns.a)
    axes_c = parse_axis(ns.c)
    axes_t = parse_axis(ns.tau)
    axes_n = parse_axis(ns.N if ns.N is not None else "8", integer=True)
    grid = [(a, c, t, n) for a in axes_a for c in axes_c for t in axes_t for n in axes_n]
    threads = max(1, int(os.environ.get("COULOMB_DROPLET_THREADS", "1") or 1))
    job = lambda g: _sweep_row(kind, g[0], g[1], g[2], g[3], ns.k0)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(job, grid))
    else:
        rows = [job(g) for g in grid]
    writer = csv.writer(stream, lineterminator="\n")
    cols = SWEEP_COLUMNS[kind]
    writer.writerow(["a", "c", "tau", "N"] + cols + ["status"])
    for (a, c, t, n), (vals, status) in zip(grid, rows):
        vals = vals if vals is not None else [""] * len(cols)
        writer.writerow([_fmt(a), _fmt(c), _fmt(t), n] + [_fmt(v) for v in vals] + [status])
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="coulomb-droplet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, sweep=False):
        kind = str if sweep else float
        sp.add_argument("--a", type=kind, default=0.0 if not sweep else "0")
        sp.add_argument("--c", type=kind, default=0.0 if not sweep else "0")
        sp.add_argument("--tau", type=kind, default=0.0 if not sweep else "0")
        sp.add_argument("--N", type=str if sweep else int, default=None)
        sp.add_argument("--k0", type=int, default=0)
        sp.add_argument("--format", choices=("json", "csv"), default="csv" if sweep else "json")
        sp.add_argument("--out", default=None)
        sp.add_argument("--nodes", type=int, default=None)
        sp.add_argument("--suite", default=None)

    for name in COMMANDS:
        common(sub.add_parser(name))
    sw = sub.add_parser("sweep")
    sw.add_argument("what", choices=tuple(SWEEP_COLUMNS))
    common(sw, sweep=True)
    return parser


def _inputs(ns):
    d = {k: v for k, v in vars(ns).items() if k not in ("out",)}
    return d


def _write(text, out):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in sorted(report["outputs"].items()):
        if isinstance(v, (int, float, str)) or v is None:
            w.writerow([k, _fmt(v) if v is not None else ""])
        else:
            w.writerow([k, json.dumps(v, sort_keys=True)])
    for ch in report["checks"]:
        w.writerow([f"check:{ch['name']}", "pass" if ch["pass"] else "fail"])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError("a command is required")
        if ns.command == "sweep":
            if ns.format != "csv":
                raise UsageError("sweep writes CSV only")
            buf = io.StringIO()
            code = run_sweep(ns, buf)
            _write(buf.getvalue(), ns.out)
            return code
        if ns.command == "verify" and not ns.suite:
            raise UsageError("verify needs --suite")
        outputs, checks = HANDLERS[ns.command](ns)
        code = EXIT_OK
        error = None
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except DomainError as exc:
        outputs, checks, code, error = {}, [], EXIT_DOMAIN, f"{type(exc).__name__}: {exc}"
    except SolverError as exc:
        outputs, checks, code, error = {}, [], EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
    report = {"inputs": _inputs(ns), "outputs": outputs, "checks": checks, "version": __version__}
    if error:
        report["error"] = error
        sys.stderr.write(error + "\n")
    text = json.dumps(report, sort_keys=True, indent=2) + "\n" if ns.format == "json" else _report_csv(report)
    _write(text, ns.out)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""``pbphase`` command line front end.

Every command reads an electrolyte from ``--config`` (JSON) and writes either
CSV (header row, ``in_``/``out_`` column prefixes, 17 significant digits) or
JSON.  Exit status: 0 success, 1 malformed input, 2 no solution, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bvp, features, oracle
from .errors import (DivergenceError, DomainError, NoSolutionError, NumericalError, RegimeError,
                     UsageError)
from .model import Electrolyte, classify, level_curve

COMMANDS = ("classify", "portrait", "dirichlet", "neumann", "gc", "pressure", "critical",
            "sweep", "verify")
EXIT_OK, EXIT_INPUT, EXIT_NO_SOLUTION, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# formatting -------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple)):
        return json.dumps([_jsonable(x) for x in v])
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return v


class Rows(list):
    """Row list that remembers its columns, so an empty table still gets a header."""

    def __init__(self, rows=(), columns=()):
        super().__init__(rows)
        self.columns = list(columns)


def write_csv(rows, stream):
    """Rows are dicts with ``in_``/``out_`` keys; the header is the union in first-seen order."""
    header = list(getattr(rows, "columns", []))
    for row in rows:
        for k in row:
            if k not in header:
                header.append(k)
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row.get(k)) for k in header])


def write_json(obj, stream):
    json.dump(_jsonable(obj), stream, indent=2, allow_nan=False)
    stream.write("\n")


# config -----------------------------------------------------------------------------

def parse_grid(spec):
    """``name=v1,v2,...;name2=a:b:n`` -> ordered dict of value lists."""
    out = {}
    if not spec:
        return out
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"grid entry '{part}' lacks '='")
        name, vals = (s.strip() for s in part.split("=", 1))
        try:
            if ":" in vals:
                a, b, n = vals.split(":")
                n = int(n)
                if n < 1:
                    raise ValueError("point count must be positive")
                values = list(np.linspace(float(a), float(b), n))
            else:
                values = [float(v) for v in vals.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"grid entry '{part}': {exc}") from None
        if not values:
            raise ConfigError(f"grid entry '{name}' is empty")
        out[name] = [float(v) for v in values]
    return out


def load_config(path):
    if path is None:
        raise ConfigError("--config is required")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    block = data.get("system", data)
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: field 'system' must be an object")
    normalize = bool(block.get("normalize", True))
    try:
        system = Electrolyte.from_json(block, normalize=normalize)
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"{path}: field 'system': {exc}") from None
    params = data.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{path}: field 'parameters' must be an object")
    return system, params


def _param(args, params, name, required=True, cast=float):
    val = getattr(args, name, None)
    if val is None:
        val = params.get(name)
    if val is None:
        if required:
            raise ConfigError(f"missing parameter '{name}' (flag --{name} or config parameters)")
        return None
    try:
        return cast(val)
    except (TypeError, ValueError):
        raise ConfigError(f"parameter '{name}' is not a number: {val!r}") from None


def _length(args, params):
    val = args.length if args.length is not None else params.get("length", params.get("L"))
    if val is None:
        raise ConfigError("missing parameter 'length' (flag --length)")
    return float(val)


def _system_echo(system):
    return {"in_z": list(system.z), "in_c": list(system.c), "in_q0": system.q0,
            "in_scale": system.scale}


# commands ---------------------------------------------------------------------------

def emit_portrait(system, h_levels, phi_range, n):
    """Level-curve rows (h, phi, u_plus, u_minus); adds the separatrix level when it exists."""
    if n < 2:
        raise UsageError("need at least two potential samples")
    a, b = phi_range
    if not a < b:
        raise UsageError("empty potential range")
    portrait = classify(system)
    levels = list(h_levels)
    if portrait.F_e is not None and not any(h == portrait.F_e for h in levels):
        levels.append(portrait.F_e)
    phis = np.linspace(a, b, n)
    rows = Rows(columns=("in_h", "out_phi", "out_u_plus", "out_u_minus", "out_separatrix"))
    for h in levels:
        for phi, up, um in level_curve(system, h, phis):
            rows.append({"in_h": float(h), "out_phi": phi, "out_u_plus": up, "out_u_minus": um,
                         "out_separatrix": portrait.F_e is not None and h == portrait.F_e})
    return rows


def _profile_rows(system, sol, bc, prof, inputs):
    rows = []
    for i in range(len(prof.x)):
        row = dict(inputs)
        row.update({"out_branch": sol.branch.value, "out_alpha": sol.alpha, "out_h": sol.h,
                    "out_saturated": sol.saturated, "out_x": prof.x[i], "out_phi": prof.phi[i],
                    "out_u": prof.u[i]})
        for j, cj in enumerate(prof.concentrations[i]):
            row[f"out_c{j}"] = cj
        rows.append(row)
    return rows


def _solution_json(sol, prof, inputs):
    return {"input": inputs,
            "solution": {"branch": sol.branch.value, "alpha": sol.alpha, "beta": sol.beta,
                         "h": sol.h, "saturated": sol.saturated, "phi_s": sol.phi_s},
            "profile": [{"x": prof.x[i], "phi": prof.phi[i], "u": prof.u[i],
                         "c": list(prof.concentrations[i])} for i in range(len(prof.x))]}


def _samples(args, params):
    grid = parse_grid(args.grid)
    n = grid.get("n", [params.get("n_samples", 201)])[0]
    if n < 3:
        raise UsageError("profiles need at least 3 samples")
    return int(n)


def cmd_classify(system, params, args):
    p = classify(system)
    return None, p.to_json()


def cmd_portrait(system, params, args):
    grid = parse_grid(args.grid)
    h_levels = grid.get("h", params.get("h_levels", []))
    phi = grid.get("phi", None)
    if phi is not None and len(phi) >= 2:
        rng, n = (phi[0], phi[-1]), len(phi)
    else:
        rng = tuple(params.get("phi_range", (-5.0, 5.0)))
        n = int(params.get("n", 201))
    rows = emit_portrait(system, h_levels, rng, n)
    return rows, {"levels": rows}


def cmd_dirichlet(system, params, args):
    phi0 = _param(args, params, "phi0")
    phi1 = _param(args, params, "phi1", required=False)
    phi1 = phi0 if phi1 is None else phi1
    L = _length(args, params)
    bc = bvp.DirichletBC(phi0, phi1, L)
    sol = bvp.solve_dirichlet_general(system, phi0, phi1, L)
    prof = bvp.reconstruct_profile(system, sol, bc, _samples(args, params))
    inputs = {**_system_echo(system), "in_phi0": phi0, "in_phi1": phi1, "in_L": L}
    return _profile_rows(system, sol, bc, prof, inputs), _solution_json(sol, prof, inputs)


def cmd_neumann(system, params, args):
    sigma = _param(args, params, "sigma")
    L = _length(args, params)
    bc = bvp.NeumannBC(sigma, L)
    sol = bvp.solve_neumann(system, sigma, L)
    prof = bvp.reconstruct_profile(system, sol, bc, _samples(args, params))
    inputs = {**_system_echo(system), "in_sigma": sigma, "in_L": L}
    return _profile_rows(system, sol, bc, prof, inputs), _solution_json(sol, prof, inputs)


def _gc_row(system, sigma, phi0, L, rho):
    if sigma is not None:
        r = features.gc_width_neumann(system, sigma, L, rho)
    elif phi0 is not None:
        r = features.gc_width_dirichlet(system, phi0, L, rho)
    else:
        raise ConfigError("gc needs --sigma (Neumann plates) or --phi0 (Dirichlet plates)")
    return {"out_delta": r.delta, "out_limit_delta": r.limit_delta, "out_regime": r.regime.value,
            "out_at_limit": r.at_limit}


def cmd_gc(system, params, args):
    sigma = _param(args, params, "sigma", required=False)
    phi0 = _param(args, params, "phi0", required=False)
    rho = _param(args, params, "rho", required=False)
    rho = features.DEFAULT_RHO if rho is None else rho
    L = _length(args, params)
    row = {**_system_echo(system), "in_sigma": sigma, "in_phi0": phi0, "in_L": L, "in_rho": rho}
    row.update(_gc_row(system, sigma, phi0, L, rho))
    return [row], row


def _pressure_row(system, sigma, L):
    r = features.electric_pressure(system, sigma, L)
    return {"out_P": r.P_dimensionless, "out_P_physical": r.P_physical, "out_P_e": r.P_e,
            "out_P_L": r.P_L, "out_P_net": r.P_net, "out_alpha": r.alpha}


def cmd_pressure(system, params, args):
    sigma = _param(args, params, "sigma")
    L = _length(args, params)
    row = {**_system_echo(system), "in_sigma": sigma, "in_L": L}
    row.update(_pressure_row(system, sigma, L))
    return [row], row


def cmd_critical(system, params, args):
    vals = {k: _param(args, params, k, required=False) for k in ("sigma", "alpha", "phi0", "phi1")}
    r = features.critical_lengths(system, **vals)
    row = {**_system_echo(system), **{f"in_{k}": v for k, v in vals.items()},
           "out_L_c": r.L_c, "out_L_max": r.L_max, "out_L0": r.L0, "out_L0_form": r.L0_form,
           "out_L0_condition": r.L0_condition}
    for k, why in r.reasons.items():
        row[f"out_{k}_reason"] = why
    return [row], row


SWEEP_QUANTITIES = {
    "pressure": (("sigma", "L"), lambda s, p: _pressure_row(s, p["sigma"], p["L"])),
    "gc": (("sigma", "L"), lambda s, p: _gc_row(s, p["sigma"], None, p["L"], p.get("rho", 0.25))),
    "gc_dirichlet": (("phi0", "L"), lambda s, p: _gc_row(s, None, p["phi0"], p["L"],
                                                          p.get("rho", 0.25))),
    "surface_charge": (("phi0", "L"), lambda s, p: {
        "out_sigma": features.surface_charge_equal(s, p["phi0"], p["L"])}),
    "neumann": (("sigma", "L"), lambda s, p: _solution_summary(bvp.solve_neumann(s, p["sigma"], p["L"]))),
    "dirichlet": (("phi0", "phi1", "L"), lambda s, p: _solution_summary(
        bvp.solve_dirichlet_general(s, p["phi0"], p["phi1"], p["L"]))),
    "L0": (("phi0", "phi1"), lambda s, p: {
        "out_L0": bvp.critical_L0(s, min(p["phi0"], p["phi1"]), max(p["phi0"], p["phi1"])).L0}),
}


def _solution_summary(sol):
    return {"out_branch": sol.branch.value, "out_alpha": sol.alpha, "out_beta": sol.beta,
            "out_h": sol.h, "out_saturated": sol.saturated, "out_phi_s": sol.phi_s}


def _workers():
    raw = os.environ.get("PB_PHASE_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"PB_PHASE_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("PB_PHASE_THREADS must be at least 1")
    return n


def _sweep_point(system, quantity, point):
    fn = SWEEP_QUANTITIES[quantity][1]
    row = {**_system_echo(system), "in_quantity": quantity}
    row.update({f"in_{k}": v for k, v in point.items()})
    try:
        row.update(fn(system, point))
        row["out_status"] = "ok"
    except (NoSolutionError, RegimeError) as exc:
        row["out_status"] = f"no_solution: {exc}"
    except (NumericalError, DivergenceError) as exc:
        row["out_status"] = f"numerical_failure: {exc}"
    return row


def cmd_sweep(system, params, args):
    quantity = args.quantity or params.get("quantity", "pressure")
    if quantity not in SWEEP_QUANTITIES:
        raise ConfigError(f"unknown sweep quantity '{quantity}' "
                          f"(choose from {', '.join(SWEEP_QUANTITIES)})")
    grid = parse_grid(args.grid) if args.grid else {
        k: [float(x) for x in v] for k, v in params.get("grid", {}).items()}
    if not grid:
        raise ConfigError("sweep needs --grid, e.g. 'sigma=0.5,1,2;L=2,5,10'")
    needed = SWEEP_QUANTITIES[quantity][0]
    fixed = {}
    for name in needed:
        if name not in grid:
            flag = "length" if name == "L" else name
            fixed[name] = [_param(args, params, flag)] if flag != "length" else [_length(args, params)]
    if "rho" not in grid and args.rho is not None:
        fixed["rho"] = [args.rho]
    axes = {**grid, **fixed}
    names = list(axes)
    points = [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        rows = list(pool.map(lambda p: _sweep_point(system, quantity, p), points))
    return rows, {"rows": rows}


def cmd_verify(system, params, args):
    seed = args.seed if args.seed is not None else int(params.get("seed", 0))
    count = int(params.get("count", 50))
    tol = args.tol if args.tol is not None else 1e-6
    cases = oracle.random_cases(seed, count)
    if system is not None:
        # keep the random boundary data but swap in the supplied electrolyte
        cases = [oracle.DiffCase(system, c.bc, classify(system).kind.value) for c in cases]
    rows = []
    for i, case in enumerate(cases):
        r = oracle.differential_check(case)
        rows.append({"in_case": i, "in_seed": seed, "in_kind": case.kind,
                     "in_z": list(case.system.z), "in_c": list(case.system.c),
                     "in_q0": case.system.q0, "in_phi0": case.bc.phi0, "in_phi1": case.bc.phi1,
                     "in_L": case.bc.L, "out_max_deviation": r.max_deviation,
                     "out_drift": r.drift, "out_pass": r.passed(phi_tol=tol)})
    failed = sum(1 for r in rows if not r["out_pass"])
    if failed:
        raise NumericalError(f"{failed} of {len(rows)} differential checks failed")
    return rows, {"rows": rows}


HANDLERS = {
    "classify": cmd_classify, "portrait": cmd_portrait, "dirichlet": cmd_dirichlet,
    "neumann": cmd_neumann, "gc": cmd_gc, "pressure": cmd_pressure, "critical": cmd_critical,
    "sweep": cmd_sweep, "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="pbphase", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON file with 'system' and optional 'parameters'")
    parser.add_argument("--phi0", type=float)
    parser.add_argument("--phi1", type=float)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--alpha", type=float, help="turning value (critical)")
    parser.add_argument("--length", type=float, help="plate separation L in Debye lengths")
    parser.add_argument("--rho", type=float, help="layer charge fraction in (0, 1/2)")
    parser.add_argument("--grid", help="'name=v1,v2;name2=a:b:n'")
    parser.add_argument("--quantity", help="sweep target: " + ", ".join(SWEEP_QUANTITIES))
    parser.add_argument("--tol", type=float, help="tolerance override")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--out", help="output path (default stdout)")
    parser.add_argument("--seed", type=int, help="seed for verify's random suite")
    return parser


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        if args.tol is not None and not args.tol > 0:
            raise ConfigError("--tol must be positive")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        if args.command == "verify" and args.config is None:
            system, params = None, {}
        else:
            system, params = load_config(args.config)
        rows, obj = HANDLERS[args.command](system, params, args)
        fmt = args.format or ("json" if rows is None else "csv")
        buf = io.StringIO()
        if fmt == "json":
            write_json(obj, buf)
        else:
            write_csv(rows if rows is not None else [obj], buf)
        if args.out:
            with open(args.out, "w", newline="") as fh:
                fh.write(buf.getvalue())
        else:
            stdout.write(buf.getvalue())
        return EXIT_OK
    except (ConfigError, DomainError, UsageError) as exc:
        print(f"pbphase: error: {exc}", file=stderr)
        return EXIT_INPUT
    except (NoSolutionError, RegimeError) as exc:
        print(f"pbphase: no solution: {exc}", file=stderr)
        return EXIT_NO_SOLUTION
    except (NumericalError, DivergenceError) as exc:
        print(f"pbphase: numerical failure: {exc}", file=stderr)
        return EXIT_NUMERICAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

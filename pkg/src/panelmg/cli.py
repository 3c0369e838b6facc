"""Command-line front end for single solves and benchmark tables.

Usage::

    panelmg run [flags]            one solve, one CSV row
    panelmg table WHICH [flags]    param_space | weak_scaling | levels | robustness

Every flag can also be given in a ``key=value`` config file (``--config``);
explicit flags override the file.  Exit codes: 0 solved, 2 not converged
within maxiter, 3 invalid arguments, 4 memory cap exceeded.
"""

from __future__ import annotations

import argparse
import sys

from .bench import (DEFAULT_MEMORY_CAP, ExperimentSpec, MemoryCapError,
                    SpecError, run_experiment, run_table)
from .params import PhysicalConstants

__all__ = ["main", "read_config"]

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_BAD_SPEC = 3
EXIT_MEMORY_CAP = 4


class _CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse would exit(2), which collides with the not-converged code.
    def error(self, message):
        raise _CLIError(message)


def _truthy(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# Config keys, their converters, and the argparse destination they feed.
CONFIG_KEYS = {
    "nx": (int, "nx"), "nz": (int, "nz"), "dt": (float, "dt"),
    "solver": (str, "solver"), "policy": (str, "policy"),
    "levels": (int, "levels"), "workers": (int, "workers"),
    "eps": (float, "eps"), "maxiter": (int, "maxiter"), "rho": (float, "rho"),
    "nu_pre": (int, "nu_pre"), "nu_post": (int, "nu_post"),
    "f_omega2": (float, "f_omega2"), "f_lambda2": (float, "f_lambda2"),
    "rhs": (str, "rhs"), "seed": (int, "seed"), "rhs_file": (str, "rhs_file"),
    "flat": (_truthy, "flat"), "deterministic": (_truthy, "deterministic"),
    "output": (str, "output"),
    "alpha": (float, "alpha"), "c_h": (float, "c_h"),
    "R_earth": (float, "r_earth"), "N_star0": (float, "n_star0"),
    "H": (float, "shell_depth"), "memory_cap_gib": (float, "memory_cap_gib"),
    "nx_max": (int, "nx_max"), "doublings": (int, "doublings"),
}


def read_config(path: str) -> dict:
    """Parse a plain key=value config file ('#' starts a comment)."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise SpecError(f"{path}:{lineno}: unknown key {key!r}")
            conv, dest = CONFIG_KEYS[key]
            try:
                values[dest] = conv(val.strip())
            except ValueError as err:
                raise SpecError(f"{path}:{lineno}: {err}") from err
    return values


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--nx", type=int)
    p.add_argument("--nz", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--solver", choices=("mg", "cg"))
    p.add_argument("--policy",
                   choices=("standard", "shallow", "very_shallow", "explicit"))
    p.add_argument("--levels", type=int, dest="levels",
                   help="level count for --policy explicit")
    p.add_argument("--workers", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--maxiter", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--nu-pre", type=int, dest="nu_pre")
    p.add_argument("--nu-post", type=int, dest="nu_post")
    p.add_argument("--f-omega2", type=float, dest="f_omega2")
    p.add_argument("--f-lambda2", type=float, dest="f_lambda2")
    p.add_argument("--rhs", choices=("random", "manufactured", "file"))
    p.add_argument("--seed", type=int)
    p.add_argument("--rhs-file", dest="rhs_file")
    p.add_argument("--flat", action="store_const", const=True, default=None)
    p.add_argument("--deterministic", action="store_const", const=True, default=None)
    p.add_argument("--output")
    p.add_argument("--alpha", type=float)
    p.add_argument("--c-h", type=float, dest="c_h")
    p.add_argument("--r-earth", "--R-earth", type=float, dest="r_earth")
    p.add_argument("--n-star0", "--N-star0", type=float, dest="n_star0")
    p.add_argument("--H", type=float, dest="shell_depth")
    p.add_argument("--memory-cap-gib", type=float, dest="memory_cap_gib")


def _build_parser() -> _Parser:
    parser = _Parser(prog="panelmg", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one solve")
    _add_common(run)
    table = sub.add_parser("table", help="produce a benchmark table")
    table.add_argument("which",
                       choices=("param_space", "weak_scaling", "levels", "robustness"))
    _add_common(table)
    table.add_argument("--nx-max", type=int, dest="nx_max")
    table.add_argument("--doublings", type=int)
    return parser


DEFAULTS = {
    "nx": 256, "nz": 128, "dt": 600.0, "solver": "mg", "policy": "standard",
    "levels": None, "workers": 1, "eps": 1e-5, "maxiter": None, "rho": 1.0,
    "nu_pre": 1, "nu_post": 1, "f_omega2": 1.0, "f_lambda2": 1.0,
    "rhs": "random", "seed": 0, "rhs_file": None, "flat": False,
    "deterministic": False, "output": None,
    "alpha": 0.5, "c_h": 550.0, "r_earth": 6.371e6, "n_star0": 0.018,
    "shell_depth": 0.01, "memory_cap_gib": DEFAULT_MEMORY_CAP / 2 ** 30,
    "nx_max": None, "doublings": None,
}


def _merge(args: argparse.Namespace) -> dict:
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _make_spec(opt: dict) -> ExperimentSpec:
    constants = PhysicalConstants(
        wave_speed=opt["c_h"], earth_radius=opt["r_earth"],
        buoyancy_freq=opt["n_star0"], shell_depth=opt["shell_depth"],
        off_centering=opt["alpha"])
    return ExperimentSpec(
        nx=opt["nx"], nz=opt["nz"], dt=opt["dt"], solver=opt["solver"],
        policy=opt["policy"], explicit_levels=opt["levels"],
        f_omega2=opt["f_omega2"], f_lambda2=opt["f_lambda2"],
        workers=opt["workers"], eps=opt["eps"], maxiter=opt["maxiter"],
        rho=opt["rho"], nu_pre=opt["nu_pre"], nu_post=opt["nu_post"],
        rhs=opt["rhs"], seed=opt["seed"], rhs_file=opt["rhs_file"],
        flat=opt["flat"], deterministic=opt["deterministic"],
        output=opt["output"],
        memory_cap_bytes=int(opt["memory_cap_gib"] * 2 ** 30),
        constants=constants)


def _cmd_run(opt: dict) -> int:
    spec = _make_spec(opt)
    report, row = run_experiment(spec)
    status = "converged" if report.converged else "NOT converged"
    print(f"{spec.solver} nx={spec.nx} nz={spec.nz}: {status} in "
          f"{report.iterations} iterations, rel residual "
          f"{report.final_relative_residual:.3e}, {report.wall_time:.3f} s")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _cmd_table(which: str, opt: dict) -> int:
    spec = _make_spec(opt)
    rows = run_table(
        which, opt["output"], nx=opt["nx"], nx_max=opt["nx_max"], nz=opt["nz"],
        dt=opt["dt"], doublings=opt["doublings"], workers=opt["workers"],
        eps=opt["eps"], maxiter=opt["maxiter"], rho=opt["rho"],
        nu_pre=opt["nu_pre"], nu_post=opt["nu_post"], seed=opt["seed"],
        flat=opt["flat"], deterministic=opt["deterministic"],
        memory_cap_bytes=spec.memory_cap_bytes, constants=spec.constants)
    print(f"{which}: {len(rows)} rows" +
          (f" -> {opt['output']}" if opt["output"] else ""))
    bad = [r for r in rows if "converged" in r and r["converged"] is not True]
    if bad:
        print(f"{len(bad)} row(s) did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        opt = _merge(args)
        if args.command == "run":
            return _cmd_run(opt)
        return _cmd_table(args.which, opt)
    except MemoryCapError as err:
        print(f"panelmg: {err}", file=sys.stderr)
        return EXIT_MEMORY_CAP
    except (_CLIError, SpecError, ValueError, OSError) as err:
        print(f"panelmg: {err}", file=sys.stderr)
        return EXIT_BAD_SPEC


if __name__ == "__main__":
    sys.exit(main())

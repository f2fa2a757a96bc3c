"""Command-line front door.

Subcommands dispatch to the library and write machine-readable artifacts
(JSON reports, CSV fields) into the output directory.  Exit status:

    0  pass / convergence
    1  usage or input error
    2  verification failure
    3  hypothesis (limit-at-infinity) violation
    4  non-convergence

Every nonzero exit also writes ``diagnostic.json`` to the output
directory (and echoes it to stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bellman import bellman_inf, build_control_set, detect_outside_cone
from .errors import (
    DomainError,
    EmptyDomainError,
    HypothesisViolation,
    RefinementError,
    ScheduleError,
)
from .grid import GridFunction, load_csv, parse_domain, rasterize_domain, save_csv
from .hermitian import F_eval, HermitianMatrix
from .solver import (
    SolverConfig,
    approximate_subsolution_sequence,
    perron_envelope,
    solve_dirichlet,
)
from .symfunc import check_f_axioms, parse_spec
from .verify import check_subsolution

__all__ = ["main"]

_CONFIG_KEYS = (
    "spec",
    "domain",
    "psi",
    "boundary",
    "field",
    "epsilons",
    "count",
    "seed",
)
_SOLVER_KEYS = (
    "scheme",
    "tol_solver",
    "max_iters",
    "tau",
    "policy_iteration",
    "control_resolution",
    "frames",
)


def _parse_field(text: str, grid) -> GridFunction:
    """Analytic field by name, or a CSV path in the grid-domain format.

    Names: ``quadratic:a1,...,an`` (sum a_i |z_i|^2), ``abs2`` (|z|^2),
    ``zero``, ``const:c``."""
    if text == "abs2":
        return GridFunction.from_callable(grid, lambda p: (p**2).sum(axis=1))
    if text == "zero":
        return GridFunction.constant(grid, 0.0)
    if text.startswith("const:"):
        return GridFunction.constant(grid, float(text[6:]))
    if text.startswith("quadratic:"):
        coef = np.array([float(c) for c in text[10:].split(",")])
        if len(coef) != grid.n:
            raise ValueError(
                f"quadratic field needs {grid.n} coefficients, got {len(coef)}"
            )

        def quad(p):
            sq = p**2
            return sum(coef[a] * (sq[:, 2 * a] + sq[:, 2 * a + 1]) for a in range(grid.n))

        return GridFunction.from_callable(grid, quad)
    if os.path.exists(text):
        return load_csv(grid, text)
    raise ValueError(f"unknown field {text!r} (not an analytic name or existing file)")


def _parse_psi_callable(text: str):
    """Right-hand side psi(z, r): a number, ``const:c``, or ``ramp:a,b``
    meaning a + b * max(r, 0)."""
    if text.startswith("const:"):
        text = text[6:]
    if text.startswith("ramp:"):
        a, b = (float(c) for c in text[5:].split(","))
        return lambda pts, r: a + b * np.maximum(np.asarray(r, dtype=float), 0.0)
    try:
        c = float(text)
    except ValueError:
        raise ValueError(f"cannot parse right-hand side {text!r}") from None
    return c


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            out[key] = val
    return out


def _merged_options(args) -> tuple[dict, SolverConfig]:
    """Key=value config file merged with flags (flags win)."""
    file_opts = _load_config_file(args.config) if args.config else {}
    for key in file_opts:
        if key not in _CONFIG_KEYS and key not in _SOLVER_KEYS:
            raise ValueError(f"unknown config key {key!r}")
    opts = {k: file_opts[k] for k in _CONFIG_KEYS if k in file_opts}
    for k in _CONFIG_KEYS:
        flag = getattr(args, k, None)
        if flag is not None:
            opts[k] = flag
    solver_text = "\n".join(
        f"{k}={file_opts[k]}" for k in _SOLVER_KEYS if k in file_opts
    )
    return opts, SolverConfig.from_text(solver_text)


def _require(opts: dict, *keys):
    missing = [k for k in keys if k not in opts]
    if missing:
        raise ValueError(f"missing required option(s): {', '.join(missing)}")


def _grid_from(opts: dict):
    shape, h = parse_domain(opts["domain"])
    return rasterize_domain(shape, h)


def _run_axioms(opts, solver_cfg, out):
    _require(opts, "spec")
    spec = parse_spec(opts["spec"])
    count = int(opts.get("count", 1000))
    seed = int(opts.get("seed", 0))
    report = check_f_axioms(spec, count, seed)
    _write_json(os.path.join(out, "axioms.json"), report.to_json())
    return 0 if report.passed else 2, report.to_json()


def _run_eval(opts, solver_cfg, out):
    _require(opts, "spec", "field")
    spec = parse_spec(opts["spec"])
    with open(opts["field"]) as fh:
        payload = json.load(fh)
    b = HermitianMatrix.from_pairs(payload["pairs"], int(payload["n"]))
    controls = build_control_set(spec, solver_cfg.control_resolution)
    f_val = F_eval(spec, b)
    inf_val = bellman_inf(controls, b)
    result = {
        "spec": spec.text(),
        "F": f_val if np.isfinite(f_val) else None,
        "bellman_inf": inf_val,
        "resolution": controls.resolution,
    }
    if not np.isfinite(f_val):
        flag, witness = detect_outside_cone(spec, b, scan_budget=10_000)
        result["outside_cone_detected"] = bool(flag)
    _write_json(os.path.join(out, "eval.json"), result)
    return 0, result


def _run_verify(opts, solver_cfg, out):
    _require(opts, "spec", "domain", "field", "psi", "epsilons")
    spec = parse_spec(opts["spec"])
    grid = _grid_from(opts)
    u = _parse_field(opts["field"], grid)
    psi_text = opts["psi"]
    try:
        psi = float(psi_text[6:] if psi_text.startswith("const:") else psi_text)
    except ValueError:
        psi = _parse_field(psi_text, grid)
    eps = [float(e) for e in str(opts["epsilons"]).split(",")]
    report = check_subsolution(spec, u, psi, eps)
    _write_json(os.path.join(out, "verify.json"), report.to_json())
    return (0 if report.passed else 2), report.to_json()


def _run_solve(opts, solver_cfg, out):
    _require(opts, "spec", "domain", "psi", "boundary")
    spec = parse_spec(opts["spec"])
    grid = _grid_from(opts)
    boundary = _parse_field(opts["boundary"], grid)
    psi = _parse_psi_callable(opts["psi"])
    u, rep = solve_dirichlet(spec, grid, psi, boundary, solver_cfg)
    save_csv(u, os.path.join(out, "solution.csv"))
    _write_json(os.path.join(out, "solve.json"), rep.to_json())
    return (0 if rep.converged else 4), rep.to_json()


def _run_envelope(opts, solver_cfg, out):
    _require(opts, "spec", "domain", "psi", "field")
    spec = parse_spec(opts["spec"])
    grid = _grid_from(opts)
    v = _parse_field(opts["field"], grid)
    psi = _parse_psi_callable(opts["psi"])
    u, rep = perron_envelope(spec, grid, psi, v, solver_cfg)
    save_csv(u, os.path.join(out, "envelope.csv"))
    _write_json(os.path.join(out, "solve.json"), rep.to_json())
    return (0 if rep.converged else 4), rep.to_json()


def _run_sequence(opts, solver_cfg, out):
    _require(opts, "spec", "domain", "psi", "field", "count")
    spec = parse_spec(opts["spec"])
    grid = _grid_from(opts)
    u = _parse_field(opts["field"], grid)
    psi_raw = _parse_psi_callable(opts["psi"])
    if np.isscalar(psi_raw):
        psi_gf = GridFunction.constant(grid, float(psi_raw))
    else:
        psi_gf = GridFunction.from_callable(
            grid, lambda p: np.asarray(psi_raw(p, np.zeros(len(p))), dtype=float)
        )
    count = int(opts["count"])
    seq = approximate_subsolution_sequence(spec, u, psi_gf, count)
    monotone = []
    for j in range(1, len(seq)):
        gap = seq[j].values - seq[j - 1].values
        mask = seq[j].grid.nonexterior
        monotone.append(float(np.max(gap[mask])) if mask.any() else 0.0)
    for j, fld in enumerate(seq, start=1):
        save_csv(fld, os.path.join(out, f"stage_{j}.csv"))
    summary = dict(seq.audit)
    summary["max_stage_increase"] = monotone
    summary["nonincreasing"] = all(m <= 1e-12 for m in monotone)
    _write_json(os.path.join(out, "sequence.json"), summary)
    return (0 if summary["nonincreasing"] else 2), summary


_COMMANDS = {
    "axioms": _run_axioms,
    "eval": _run_eval,
    "verify": _run_verify,
    "solve": _run_solve,
    "envelope": _run_envelope,
    "sequence": _run_sequence,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cxhessian",
        description="Nonlinear operators on eigenvalues of the complex Hessian.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--spec", help="operator, e.g. ma:n=2 or sat(hess:k=2,n=3)")
    parser.add_argument("--domain", help="e.g. ball:c=0,0;r=1;h=0.1")
    parser.add_argument("--psi", help="right-hand side: number, const:c or ramp:a,b")
    parser.add_argument("--boundary", help="boundary data field")
    parser.add_argument("--field", help="input field (analytic name, CSV, or matrix JSON)")
    parser.add_argument("--epsilons", help="comma-separated smoothing radii")
    parser.add_argument("--count", help="sample count / stage count")
    parser.add_argument("--seed", help="RNG seed (axioms)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--config", help="key=value config file (flags override)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    out = args.out
    try:
        os.makedirs(out, exist_ok=True)
        opts, solver_cfg = _merged_options(args)
        status, _ = _COMMANDS[args.command](opts, solver_cfg, out)
        return status
    except HypothesisViolation as exc:
        return _diagnose(out, 3, "hypothesis_violation", exc)
    except ScheduleError as exc:
        return _diagnose(out, 2, "schedule_error", exc)
    except (
        DomainError,
        RefinementError,
        EmptyDomainError,
        ValueError,
        KeyError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        return _diagnose(out, 1, type(exc).__name__, exc)


def _diagnose(out: str, status: int, kind: str, exc: Exception) -> int:
    payload = {"exit_status": status, "error": kind, "message": str(exc)}
    if isinstance(exc, HypothesisViolation):
        payload["limit"] = exc.limit
        payload["psi_sup"] = exc.psi_sup
    if isinstance(exc, ScheduleError):
        payload["achievable"] = exc.achievable
    try:
        _write_json(os.path.join(out, "diagnostic.json"), payload)
    except OSError:
        pass
    print(json.dumps(payload), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())

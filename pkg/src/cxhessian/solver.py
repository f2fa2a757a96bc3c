"""Monotone wide-stencil Bellman scheme and Dirichlet / Perron solvers.

Each control is a pair (frame, eigenvalue profile).  Within a frame the
minorant trace splits over the frame's columns,

    trace(Htilde B) = sum_i g_i * (v_i^* B v_i),   g = grad f(mu) >= 0,

and v^* (Hu) v is discretized as the average of the centered second
differences along the real and imaginary axes of the complex line
through v — both of which are lattice directions for the coordinate and
45-degree diagonal frames.  The resulting scheme

    S_h[u] = min over controls of  sum_i g_i D2_{v_i} u + offset

is degenerate elliptic by construction.  A damped explicit iteration is
the correctness baseline; policy iteration (freeze the argmin control,
solve the linear system, re-optimize) is the accelerator.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bellman import simplex_profiles, _SAT_LADDER
from .errors import DomainError, HypothesisViolation, ScheduleError
from .grid import DomainGrid, GridFunction, eroded_domain, rasterize_domain, shift
from .hermitian import HermitianMatrix
from .symfunc import (
    OperatorSpec,
    f_eval_many,
    f_gradient_many,
    f_limit_at_infinity,
)
from .calculus import mollify

__all__ = [
    "SolverConfig",
    "SchemeStencil",
    "SolveReport",
    "build_stencil",
    "discrete_bellman_operator",
    "solve_dirichlet",
    "perron_envelope",
    "approximate_subsolution_sequence",
    "decreasing_solution_sequence",
    "SubsolutionSequence",
]


@dataclass
class SolverConfig:
    scheme: str = "bellman"
    tol_solver: float = 1e-8
    max_iters: int = 200_000
    tau: str | float = "auto"
    policy_iteration: bool = True
    control_resolution: int = 10
    frames: str = "coord+diag"

    @staticmethod
    def from_text(text: str) -> "SolverConfig":
        """Parse 'key=value' lines (or ';'-separated pairs)."""
        cfg = SolverConfig()
        for raw in text.replace(";", "\n").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            if key == "scheme":
                if val != "bellman":
                    raise ValueError(f"unknown scheme {val!r}")
            elif key == "tol_solver":
                cfg.tol_solver = float(val)
            elif key == "max_iters":
                cfg.max_iters = int(val)
            elif key == "tau":
                cfg.tau = "auto" if val == "auto" else float(val)
            elif key == "policy_iteration":
                cfg.policy_iteration = {"on": True, "off": False}[val]
            elif key == "control_resolution":
                cfg.control_resolution = int(val)
            elif key == "frames":
                if val not in ("coord", "coord+diag"):
                    raise ValueError(f"unknown frame family {val!r}")
                cfg.frames = val
            else:
                raise ValueError(f"unknown solver config key {key!r}")
        return cfg


def _frame_directions(n: int, kind: str):
    """Unitary frames with, per column, the lattice offsets of the real and
    imaginary axes of its complex line and the squared offset length."""
    frames = [("coord", np.eye(n, dtype=complex))]
    if kind == "coord+diag":
        for i in range(n - 1):
            for j in range(i + 1, n):
                for phase in (1.0, 1.0j):
                    u = np.eye(n, dtype=complex)
                    inv = 1.0 / np.sqrt(2.0)
                    u[i, i] = inv
                    u[j, i] = inv * phase
                    u[i, j] = inv
                    u[j, j] = -inv * phase
                    frames.append((f"diag{i}{j}{'i' if phase == 1j else 'r'}", u))
    elif kind != "coord":
        raise ValueError(f"unknown frame family {kind!r}")

    out = []
    for name, u in frames:
        cols = []
        for c in range(n):
            v = u[:, c]
            o_re = np.zeros(2 * n, dtype=int)
            o_im = np.zeros(2 * n, dtype=int)
            scale = np.sqrt(2.0) if np.count_nonzero(np.abs(v) > 1e-12) > 1 else 1.0
            for a in range(n):
                z = v[a] * scale  # entries in {0, ±1, ±i} after scaling
                zi = 1j * v[a] * scale
                o_re[2 * a] = int(round(z.real))
                o_re[2 * a + 1] = int(round(z.imag))
                o_im[2 * a] = int(round(zi.real))
                o_im[2 * a + 1] = int(round(zi.imag))
            m = int(np.sum(o_re**2))
            if m != int(np.sum(o_im**2)):
                raise AssertionError("real/imaginary offsets must have equal length")
            cols.append((o_re, o_im, m))
        out.append((name, u, cols))
    return out


@dataclass
class SchemeStencil:
    spec: OperatorSpec
    frames: list  # (name, unitary, [(o_re, o_im, m)] per column)
    controls: list  # (frame_index, coeffs g >= 0, offset)
    resolution: int
    frame_kind: str

    def minorant_matrix(self, ci: int) -> HermitianMatrix:
        """Htilde of control ci, for cross-checks against trace_pair."""
        fi, g, _ = self.controls[ci]
        u = self.frames[fi][1]
        return HermitianMatrix(u @ np.diag(g.astype(complex)) @ u.conj().T)

    @property
    def coefficient_bound(self) -> float:
        """max over controls of sum_i g_i / m_i (times 1/h^2 gives the
        center-coefficient bound of the scheme)."""
        best = 0.0
        for fi, g, _ in self.controls:
            cols = self.frames[fi][2]
            best = max(best, sum(gi / c[2] for gi, c in zip(g, cols)))
        return best


def build_stencil(spec: OperatorSpec, resolution: int, frame_kind: str) -> SchemeStencil:
    frames = _frame_directions(spec.n, frame_kind)
    profiles = simplex_profiles(spec.n, resolution)
    if not spec.homogeneous:
        profiles = np.concatenate([profiles * c for c in _SAT_LADDER])
    grads = f_gradient_many(spec, profiles)
    vals = f_eval_many(spec, profiles)
    controls = []
    for p in range(len(profiles)):
        g = grads[p]
        offset = 0.0 if spec.homogeneous else float(
            vals[p] - np.dot(g, profiles[p])
        )
        for fi in range(len(frames)):
            controls.append((fi, g, offset))
    return SchemeStencil(spec, frames, controls, resolution, frame_kind)


def _directional_fields(stencil: SchemeStencil, vals: np.ndarray, h: float):
    """D2_{v} u for every frame column, NaN where the stencil is unresolvable."""
    out = []
    for _, _, cols in stencil.frames:
        fields = []
        for o_re, o_im, m in cols:
            d = shift(vals, o_re)
            d += shift(vals, -o_re)
            d += shift(vals, o_im)
            d += shift(vals, -o_im)
            d -= 4.0 * vals
            d /= 4.0 * m * h**2
            fields.append(d)
        out.append(fields)
    return out


def _bellman_field(stencil: SchemeStencil, vals: np.ndarray, h: float, argmin=False):
    """S_h[u] on the whole lattice (NaN-unavailable controls are skipped;
    nodes where no control resolves stay NaN)."""
    dirs = _directional_fields(stencil, vals, h)
    best = np.full(vals.shape, np.nan)
    arg = np.full(vals.shape, -1, dtype=np.int32) if argmin else None
    for ci, (fi, g, offset) in enumerate(stencil.controls):
        acc = None
        for gi, d in zip(g, dirs[fi]):
            acc = gi * d if acc is None else acc + gi * d
        acc += offset
        if argmin:
            take = np.isnan(best) | (acc < best)
            take &= ~np.isnan(acc)
            arg[take] = ci
            best = np.where(take, acc, best)
        else:
            best = np.fmin(best, acc)
    return (best, arg) if argmin else best


def discrete_bellman_operator(stencil: SchemeStencil, u: GridFunction, node) -> float:
    """Scalar scheme value at one interior node; every frame must resolve."""
    grid = u.grid
    node = tuple(int(i) for i in node)
    if not grid.interior[node]:
        raise DomainError(f"node {node} is not interior")
    vals = u.values
    h = grid.h

    def second(o):
        total = -2.0 * vals[node]
        for s in (1, -1):
            j = tuple(i + s * oo for i, oo in zip(node, o))
            if any(jj < 0 or jj >= dim for jj, dim in zip(j, grid.lattice_shape)):
                raise DomainError(f"direction stencil leaves the lattice at {node}")
            v = vals[j]
            if np.isnan(v):
                raise DomainError(f"direction stencil hits an exterior node at {node}")
            total += v
        return total

    per_frame = []
    for _, _, cols in stencil.frames:
        per_frame.append(
            [
                (second(o_re) + second(o_im)) / (4.0 * m * h**2)
                for o_re, o_im, m in cols
            ]
        )
    best = np.inf
    for fi, g, offset in stencil.controls:
        best = min(best, float(np.dot(g, per_frame[fi])) + offset)
    return best


@dataclass
class SolveReport:
    iterations: int = 0
    final_residual: float = np.inf
    monotone_violations: int = 0
    hypothesis_guard: dict = field(default_factory=dict)
    wall_time: float = 0.0
    converged: bool = False
    method: str = "damped"

    def to_json(self) -> dict:
        return {
            "iterations": int(self.iterations),
            "final_residual": float(self.final_residual),
            "monotone_violations": int(self.monotone_violations),
            "hypothesis_guard": self.hypothesis_guard,
            "wall_time": float(self.wall_time),
            "converged": bool(self.converged),
            "method": self.method,
        }


def _as_psi(psi):
    """Accept a constant right-hand side as shorthand for psi(z, r) = c."""
    if np.isscalar(psi):
        c = float(psi)
        return lambda pts, r: np.full(len(pts), c)
    return psi


def _check_psi(psi, pts, r_probe):
    """psi(z, r) must be nonnegative and nondecreasing in r (sampled)."""
    prev = None
    for r in r_probe:
        cur = np.asarray(psi(pts, np.full(len(pts), float(r))), dtype=float)
        if np.min(cur) < 0:
            raise ValueError("psi must be nonnegative")
        if prev is not None and np.any(cur < prev - 1e-12):
            raise ValueError("psi must be nondecreasing in its last argument")
        prev = cur


def _psi_lipschitz_r(psi, pts, r_lo, r_hi):
    if r_hi <= r_lo:
        r_hi = r_lo + 1.0
    a = np.asarray(psi(pts, np.full(len(pts), r_lo)), dtype=float)
    b = np.asarray(psi(pts, np.full(len(pts), r_hi)), dtype=float)
    return float(np.max(np.abs(b - a)) / (r_hi - r_lo))


def _policy_solve(stencil, grid, vals, arg, psi_vec, h, interior_idx):
    """Solve the linear system of the frozen argmin controls.

    Rows: for interior node x with control (g, frame): sum_i g_i/(4 m h^2) *
    (sum of 4 neighbors - 4 u(x)) = psi_vec(x); known (boundary) values are
    moved to the right-hand side."""
    ni = len(interior_idx)
    unknown = -np.ones(np.prod(grid.lattice_shape), dtype=np.int64)
    unknown[interior_idx] = np.arange(ni)
    rows = [np.arange(ni)]
    cols = [np.arange(ni)]
    data = []
    rhs = -psi_vec.copy()
    diag = np.zeros(ni)
    shape = grid.lattice_shape
    strides = np.array(
        [int(np.prod(shape[d + 1 :])) for d in range(len(shape))], dtype=np.int64
    )
    flat_vals = vals.ravel()
    arg_flat = arg.ravel()[interior_idx]
    for ci, (fi, g, offset) in enumerate(stencil.controls):
        sel = np.nonzero(arg_flat == ci)[0]
        if sel.size == 0:
            continue
        base = interior_idx[sel]
        rhs[sel] -= offset
        for gi, (o_re, o_im, m) in zip(g, stencil.frames[fi][2]):
            if gi == 0.0:
                continue
            w = gi / (4.0 * m * h**2)
            diag[sel] += 4.0 * w
            for o in (o_re, -o_re, o_im, -o_im):
                nb = base + int(np.dot(o, strides))
                tgt = unknown[nb]
                known = tgt < 0
                if known.any():
                    rhs[sel[known]] += w * flat_vals[nb[known]]
                inner = ~known
                if inner.any():
                    rows.append(sel[inner])
                    cols.append(tgt[inner])
                    data.append(np.full(inner.sum(), -w))
    data.insert(0, diag)
    a = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ni, ni),
    )
    if ni <= 20_000:
        return spla.spsolve(a.tocsc(), rhs)
    import pyamg

    # smoothed aggregation: classical coarsening can zero-divide on rows
    # whose connections are all classified weak (lopsided argmin controls)
    ml = pyamg.smoothed_aggregation_solver(a, max_coarse=500)
    x0 = flat_vals[interior_idx]
    sol = ml.solve(rhs, x0=x0, tol=1e-12, accel="bicgstab", maxiter=400)
    return sol


def _solve_core(
    stencil: SchemeStencil,
    grid: DomainGrid,
    psi,
    vals0: np.ndarray,
    config: SolverConfig,
    cap=None,
):
    """Shared damped/policy iteration.  `vals0` carries the boundary values
    and the initial interior guess; `cap` (optional array) enforces
    u <= cap after every update (the Perron envelope constraint)."""
    h = grid.h
    interior = grid.interior
    pts = grid.points_of(interior)
    r_lo = float(np.nanmin(vals0))
    r_hi = float(np.nanmax(vals0))
    _check_psi(psi, pts[:: max(1, len(pts) // 512)], np.linspace(r_lo, r_hi, 5))
    lip = _psi_lipschitz_r(psi, pts[:: max(1, len(pts) // 512)], r_lo, r_hi)

    if config.tau == "auto":
        tau = 0.9 / (2.0 * stencil.coefficient_bound / h**2 + lip)
    else:
        tau = float(config.tau)

    vals = vals0.copy()
    interior_idx = np.nonzero(interior.ravel())[0]
    flat = vals.reshape(-1)
    tol = config.tol_solver
    t0 = time.time()
    iters = 0
    residual = np.inf
    method = "policy" if config.policy_iteration else "damped"

    def residual_of(v):
        s = _bellman_field(stencil, v, h)
        rhs = np.asarray(psi(pts, v.ravel()[interior_idx]), dtype=float)
        res = s.ravel()[interior_idx] - rhs
        return res, float(np.max(np.abs(res)))

    if config.policy_iteration:
        for _ in range(60):
            s, arg = _bellman_field(stencil, vals, h, argmin=True)
            rhs = np.asarray(psi(pts, flat[interior_idx]), dtype=float)
            res = s.ravel()[interior_idx] - rhs
            residual = float(np.max(np.abs(res)))
            iters += 1
            if residual <= tol:
                break
            sol = _policy_solve(stencil, grid, vals, arg, rhs, h, interior_idx)
            if cap is not None:
                sol = np.minimum(sol, cap.ravel()[interior_idx])
            prev = flat[interior_idx].copy()
            flat[interior_idx] = sol
            if float(np.max(np.abs(sol - prev))) <= 1e-15 * (1 + np.abs(sol).max()):
                # argmin and values are both stationary; fall through to the
                # damped polish below if the residual still exceeds tol
                break
        if residual > tol:
            method = "policy+damped"

    while residual > tol and iters < config.max_iters:
        res, residual = residual_of(vals)
        if residual <= tol:
            break
        flat[interior_idx] += tau * res
        if cap is not None:
            np.minimum(flat[interior_idx], cap.ravel()[interior_idx], out=flat[interior_idx])
        iters += 1

    report = SolveReport(
        iterations=iters,
        final_residual=residual,
        monotone_violations=0,
        wall_time=time.time() - t0,
        converged=bool(residual <= tol),
        method=method,
    )
    return vals, report


def _guard(spec: OperatorSpec, psi_sup: float) -> dict:
    limit = f_limit_at_infinity(spec)
    if not limit > psi_sup:
        raise HypothesisViolation(
            f"limit at infinity {limit:g} does not exceed the required "
            f"right-hand-side level {psi_sup:g}",
            limit=limit,
            psi_sup=psi_sup,
        )
    return {"limit": limit, "psi_sup": psi_sup, "passed": True}


def solve_dirichlet(
    spec: OperatorSpec,
    grid: DomainGrid,
    psi,
    boundary_g: GridFunction,
    config: SolverConfig | None = None,
):
    """Dirichlet problem S_h[u] = psi(z, u), u = g on the boundary nodes.

    psi is a callable psi(points, r) -> array, nonnegative and
    nondecreasing in r."""
    config = config or SolverConfig()
    psi = _as_psi(psi)
    if 2 * spec.n != grid.rdim:
        raise ValueError(f"spec dimension n={spec.n} does not match the grid")
    stencil = build_stencil(spec, config.control_resolution, config.frames)

    bnd = grid.boundary
    g_vals = boundary_g.values[bnd]
    if not np.all(np.isfinite(g_vals)):
        raise ValueError("boundary data must be finite on every boundary node")
    g_sup = float(g_vals.max())
    psi_at_sup = float(
        np.max(np.asarray(psi(grid.points_of(grid.nonexterior), g_sup), dtype=float))
    )
    guard = _guard(spec, psi_at_sup)

    vals0 = np.full(grid.lattice_shape, np.nan)
    vals0[grid.interior] = g_sup  # supersolution start: S_h[const] = 0 <= psi
    vals0[bnd] = boundary_g.values[bnd]
    vals, report = _solve_core(stencil, grid, psi, vals0, config)
    report.hypothesis_guard = guard
    return GridFunction(grid, vals), report


def perron_envelope(
    spec: OperatorSpec,
    grid: DomainGrid,
    psi,
    v: GridFunction,
    config: SolverConfig | None = None,
):
    """Maximal discrete subsolution below the supersolution v: iterate
    u <- min(v, u + tau (S_h[u] - psi(z, u))) from u0 = v, boundary pinned
    to v."""
    config = config or SolverConfig()
    psi = _as_psi(psi)
    stencil = build_stencil(spec, config.control_resolution, config.frames)
    mask = grid.nonexterior
    psi_sup = float(
        np.max(np.asarray(psi(grid.points_of(mask), v.values[mask]), dtype=float))
    )
    guard = _guard(spec, psi_sup)

    vals0 = v.values.copy()
    vals, report = _solve_core(stencil, grid, psi, vals0, config, cap=v.values)
    report.hypothesis_guard = guard
    return GridFunction(grid, vals), report


@dataclass
class SubsolutionSequence:
    """List-like result of the mollify-and-lift construction, with the
    schedule and audit data used by reports."""

    fields: list
    epsilons: list
    R: float
    r: float
    audit: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i):
        return self.fields[i]


def _psi_moll_gap(psi_gf: GridFunction, eps: float) -> float:
    """Sup over the eroded grid of |psi * chi_eps - psi|."""
    sm = mollify(psi_gf, eps)
    mask = sm.grid.nonexterior
    return float(np.max(np.abs(sm.values[mask] - psi_gf.values[mask])))


def approximate_subsolution_sequence(
    spec: OperatorSpec,
    u: GridFunction,
    psi: GridFunction,
    count: int,
    eps_start: float | None = None,
    decay: float = 0.75,
) -> SubsolutionSequence:
    """u_j = u * chi_{eps_j} + R |z|^2 / (2^{j+1} r) on the common eroded
    grid, with r = 1/2 and R the smallest power of two whose uniform level
    F(R I) exceeds max psi + r, and eps_j chosen (largest-first, bisection
    below the geometric guess) so the mollification gap of psi is < 2^-j."""
    if count < 0:
        raise ValueError("count must be >= 0")
    grid = u.grid
    psi_sup = float(np.nanmax(psi.values))
    _guard(spec, psi_sup)
    if count == 0:
        return SubsolutionSequence([], [], 0.0, 0.5, {"stages": 0})

    r = 0.5
    R = None
    for m in range(-30, 61):
        cand = 2.0**m
        level = f_eval_many(spec, np.full((1, spec.n), cand))[0]
        if level > psi_sup + r:
            R = cand
            break
    if R is None:
        raise HypothesisViolation(
            "no ladder value R reaches psi_sup + r", limit=None, psi_sup=psi_sup
        )

    h = grid.h
    eps_min = 2.0 * h
    if eps_start is None:
        eps_start = max(eps_min, min(0.3, grid.shape_spec.inradius / 3.0))
    epsilons = []
    prev = eps_start / decay
    for j in range(1, count + 1):
        target = 2.0 ** (-j)
        hi = max(min(prev * decay, eps_start), eps_min)
        if _psi_moll_gap(psi, hi) < target:
            eps_j = hi
        else:
            lo = eps_min
            if _psi_moll_gap(psi, lo) >= target:
                raise ScheduleError(
                    f"stage {j}: mollification gap at eps = 2h already exceeds "
                    f"2^-{j}; refine the grid",
                    achievable=j - 1,
                )
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if _psi_moll_gap(psi, mid) < target:
                    lo = mid
                else:
                    hi = mid
            eps_j = lo
        if eps_j < eps_min - 1e-12 or eps_j > prev + 1e-12:
            raise ScheduleError(
                f"stage {j}: no admissible smoothing radius below {prev:g}",
                achievable=j - 1,
            )
        epsilons.append(eps_j)
        prev = eps_j

    common = eroded_domain(grid, epsilons[0])
    fields = []
    gaps = []
    for j, eps in enumerate(epsilons, start=1):
        moll = mollify(u, eps).on_grid(common)
        lift = 2.0 ** (-(j + 1)) * (R / r)
        quad = common.eval_callable(lambda p: (p**2).sum(axis=1))
        vals = moll.values + lift * quad
        fields.append(GridFunction(common, vals))
        mask = common.nonexterior
        gaps.append(float(np.max(np.abs(vals[mask] - moll.values[mask]))))
    audit = {
        "stages": count,
        "epsilons": epsilons,
        "R": R,
        "r": r,
        "lift_sup_gaps": gaps,
    }
    return SubsolutionSequence(fields, epsilons, R, r, audit)


def decreasing_solution_sequence(
    spec: OperatorSpec,
    grid: DomainGrid,
    sub_shape,
    u_or_envelope: GridFunction,
    psi,
    count: int,
    config: SolverConfig | None = None,
    psi_gf: GridFunction | None = None,
    eps_start: float | None = None,
    decay: float = 0.75,
):
    """Dirichlet solves on the sub-domain with boundary data from the
    decreasing subsolution sequence of the envelope.

    `sub_shape` describes a compactly contained sub-domain (same lattice
    spacing); `psi` is the callable right-hand side (independent of r) and
    `psi_gf` its grid sampling used by the smoothing schedule (defaults to
    sampling psi at r = 0)."""
    config = config or SolverConfig()
    psi = _as_psi(psi)
    if psi_gf is None:
        psi_gf = GridFunction.from_callable(
            grid, lambda p: np.asarray(psi(p, np.zeros(len(p))), dtype=float)
        )
    seq = approximate_subsolution_sequence(
        spec, u_or_envelope, psi_gf, count, eps_start=eps_start, decay=decay
    )
    sub = rasterize_domain(sub_shape, grid.h)
    results = []
    for fld in seq:
        g_sub = fld.on_grid(sub)
        sol, rep = solve_dirichlet(spec, sub, psi, g_sub, config)
        results.append((sol, rep))
    return results, seq

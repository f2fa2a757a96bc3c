"""Elementary symmetric polynomials, Garding cones and admissible symmetric
functions.

Eigenvalue tuples are plain 1-D float arrays (or array-likes); batched
routines accept arrays of shape (..., n) and act on the last axis.  The
admissible families are

    ma      f(x) = sigma_n(x)^(1/n)
    hess    f(x) = sigma_k(x)^(1/k)
    quot    f(x) = (sigma_k(x)/sigma_l(x))^(1/(k-l))
    sat     g(f_base(x)) with g(t) = t/(1+t)

each defined on the closure of its cone and -inf outside.  Values and
gradients are computed after sorting the entries, so permutation
invariance is exact in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "ConeSpec",
    "OperatorSpec",
    "monge_ampere",
    "hessian_k",
    "hessian_quotient",
    "saturated",
    "parse_spec",
    "sigma_k",
    "sigma_all",
    "cone_contains",
    "f_eval",
    "f_eval_many",
    "f_gradient",
    "f_gradient_many",
    "f_limit_at_infinity",
    "check_f_axioms",
    "sample_interior",
    "AxiomReport",
]


@dataclass(frozen=True)
class ConeSpec:
    """The Garding cone Gamma_k in R^n: sigma_1 > 0, ..., sigma_k > 0."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got n={self.n}")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")


@dataclass(frozen=True)
class OperatorSpec:
    """A cone together with an admissible symmetric function.

    kind is one of "ma", "hess", "quot", "sat"; for "sat" the wrapped
    spec is in `base` and k/l are unused.
    """

    kind: str
    n: int
    k: int = 0
    l: int = 0
    base: "OperatorSpec | None" = None

    def __post_init__(self):
        if self.kind == "ma":
            if self.n < 1:
                raise ValueError("ma requires n >= 1")
        elif self.kind == "hess":
            if not 1 <= self.k <= self.n:
                raise ValueError(f"hess requires 1 <= k <= n, got k={self.k}, n={self.n}")
        elif self.kind == "quot":
            if not 1 <= self.l < self.k <= self.n:
                raise ValueError(
                    f"quot requires 1 <= l < k <= n, got k={self.k}, l={self.l}, n={self.n}"
                )
        elif self.kind == "sat":
            if self.base is None or self.base.kind == "sat":
                raise ValueError("sat wraps exactly one unsaturated spec")
            if self.n != self.base.n:
                raise ValueError("sat dimension must match its base")
        else:
            raise ValueError(f"unknown family kind {self.kind!r}")

    @property
    def cone(self) -> ConeSpec:
        if self.kind == "ma":
            return ConeSpec(self.n, self.n)
        if self.kind in ("hess", "quot"):
            return ConeSpec(self.n, self.k)
        return self.base.cone

    @property
    def homogeneous(self) -> bool:
        """True for the 1-homogeneous (unsaturated) families."""
        return self.kind != "sat"

    def text(self) -> str:
        if self.kind == "ma":
            return f"ma:n={self.n}"
        if self.kind == "hess":
            return f"hess:k={self.k},n={self.n}"
        if self.kind == "quot":
            return f"quot:k={self.k},l={self.l},n={self.n}"
        return f"sat({self.base.text()})"

    def __str__(self):
        return self.text()


def monge_ampere(n: int) -> OperatorSpec:
    return OperatorSpec("ma", n)


def hessian_k(k: int, n: int) -> OperatorSpec:
    return OperatorSpec("hess", n, k=k)


def hessian_quotient(k: int, l: int, n: int) -> OperatorSpec:
    return OperatorSpec("quot", n, k=k, l=l)


def saturated(base: OperatorSpec) -> OperatorSpec:
    return OperatorSpec("sat", base.n, base=base)


def parse_spec(text: str) -> OperatorSpec:
    """Parse the canonical text form, e.g. 'ma:n=2' or 'sat(hess:k=2,n=3)'."""
    text = text.strip()
    if text.startswith("sat(") and text.endswith(")"):
        return saturated(parse_spec(text[4:-1]))
    try:
        head, argstr = text.split(":", 1)
        args = {}
        for part in argstr.split(","):
            key, val = part.split("=")
            args[key.strip()] = int(val)
    except ValueError as exc:
        raise ValueError(f"cannot parse operator spec {text!r}") from exc
    if head == "ma":
        return monge_ampere(args["n"])
    if head == "hess":
        return hessian_k(args["k"], args["n"])
    if head == "quot":
        return hessian_quotient(args["k"], args["l"], args["n"])
    raise ValueError(f"unknown operator family {head!r}")


# ---------------------------------------------------------------------------
# elementary symmetric polynomials


def sigma_all(x) -> np.ndarray:
    """All elementary symmetric sums e_0..e_n of the last axis.

    Input shape (..., n), output shape (..., n+1) with e_0 = 1.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    e = np.zeros(x.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        xi = x[..., i]
        for j in range(min(i + 1, n), 0, -1):
            e[..., j] += e[..., j - 1] * xi
    return e


def sigma_k(x, k: int) -> float:
    """The k-th elementary symmetric sum of a single tuple."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k={k}")
    return float(sigma_all(x)[..., k])


def _sigma_minus(x: np.ndarray) -> np.ndarray:
    """e_j of x with entry i removed, for all (i, j).

    Input shape (m, n); output shape (m, n, n) with [:, i, j] = e_j(x \\ x_i),
    via the recurrence e_j(x\\i) = e_j(x) - x_i * e_{j-1}(x\\i).
    """
    m, n = x.shape
    e = sigma_all(x)
    out = np.empty((m, n, n))
    out[:, :, 0] = 1.0
    for j in range(1, n):
        out[:, :, j] = e[:, None, j] - x * out[:, :, j - 1]
    return out


# ---------------------------------------------------------------------------
# cone membership


def _default_delta(x: np.ndarray) -> np.ndarray:
    return 1e-10 * (1.0 + np.max(np.abs(x), axis=-1))


def _open_mask(x: np.ndarray, k: int) -> np.ndarray:
    e = sigma_all(x)
    return np.all(e[..., 1 : k + 1] > 0.0, axis=-1)


def cone_contains(x, cone: ConeSpec, closure: bool = False, delta_tol=None) -> bool:
    """Membership in Gamma_k (open) or its closure (ray test along (1,..,1))."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != cone.n:
        raise ValueError(f"tuple length {x.shape[-1]} != cone dimension {cone.n}")
    if closure:
        if delta_tol is None:
            delta_tol = _default_delta(x)
        shifted = x + np.asarray(delta_tol)[..., None]
        mask = _open_mask(shifted, cone.k)
    else:
        mask = _open_mask(x, cone.k)
    return bool(mask) if mask.ndim == 0 else mask


# ---------------------------------------------------------------------------
# the admissible functions


def _f_on_closure(spec: OperatorSpec, x: np.ndarray) -> np.ndarray:
    """Value of f assuming membership in the closed cone (batched)."""
    if spec.kind == "sat":
        t = _f_on_closure(spec.base, x)
        return t / (1.0 + t)
    e = sigma_all(x)
    if spec.kind == "ma":
        return np.maximum(e[..., spec.n], 0.0) ** (1.0 / spec.n)
    if spec.kind == "hess":
        return np.maximum(e[..., spec.k], 0.0) ** (1.0 / spec.k)
    # quotient; sigma_l vanishes on the closure only at the vertex, where the
    # continuous extension is 0
    sk = np.maximum(e[..., spec.k], 0.0)
    sl = e[..., spec.l]
    safe = sl > 0.0
    ratio = np.where(safe, sk / np.where(safe, sl, 1.0), 0.0)
    return ratio ** (1.0 / (spec.k - spec.l))


def f_eval_many(spec: OperatorSpec, x) -> np.ndarray:
    """Batched f on (..., n); -inf outside the closed cone."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise ValueError(f"tuple length {x.shape[-1]} != spec dimension {spec.n}")
    xs = -np.sort(-x, axis=-1)  # descending; exact symmetry
    inside = cone_contains(xs, spec.cone, closure=True)
    vals = _f_on_closure(spec, xs)
    return np.where(inside, vals, -np.inf)


def f_eval(spec: OperatorSpec, x) -> float:
    return float(f_eval_many(spec, x))


def f_gradient_many(spec: OperatorSpec, x) -> np.ndarray:
    """Batched gradient of f on strictly interior points, shape (m, n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != spec.n:
        raise ValueError(f"tuple length {x.shape[-1]} != spec dimension {spec.n}")
    if not np.all(_open_mask(x, spec.cone.k)):
        raise DomainError("gradient requested outside the open cone")
    order = np.argsort(-x, axis=-1, kind="stable")
    xs = np.take_along_axis(x, order, axis=-1)
    g = _grad_on_open(spec, xs)
    out = np.empty_like(g)
    np.put_along_axis(out, order, g, axis=-1)
    return out


def _grad_on_open(spec: OperatorSpec, x: np.ndarray) -> np.ndarray:
    if spec.kind == "sat":
        t = _f_on_closure(spec.base, x)
        return _grad_on_open(spec.base, x) / (1.0 + t[..., None]) ** 2
    e = sigma_all(x)
    em = _sigma_minus(x)  # (m, n, j)
    if spec.kind == "ma":
        k = spec.n
        return (1.0 / k) * e[:, None, k] ** (1.0 / k - 1.0) * em[:, :, k - 1]
    if spec.kind == "hess":
        k = spec.k
        return (1.0 / k) * e[:, None, k] ** (1.0 / k - 1.0) * em[:, :, k - 1]
    k, l = spec.k, spec.l
    f = (e[:, k] / e[:, l]) ** (1.0 / (k - l))
    inner = em[:, :, k - 1] / e[:, None, k] - em[:, :, l - 1] / e[:, None, l]
    return f[:, None] / (k - l) * inner


def f_gradient(spec: OperatorSpec, x) -> np.ndarray:
    return f_gradient_many(spec, x)[0]


def f_limit_at_infinity(spec: OperatorSpec) -> float:
    """lim_{R -> inf} f(R, ..., R)."""
    if spec.kind == "sat":
        return 1.0
    return math.inf


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass
class AxiomReport:
    spec_text: str
    sample_count: int
    seed: int
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["violations"] == 0 for c in self.checks.values() if not c["skipped"])

    @property
    def total_violations(self) -> int:
        return sum(c["violations"] for c in self.checks.values() if not c["skipped"])

    def to_json(self) -> dict:
        return {
            "spec": self.spec_text,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "passed": self.passed,
            "checks": self.checks,
        }


def sample_interior(spec: OperatorSpec, count: int, rng, lo: float = 0.1, hi: float = 10.0):
    """Random points in the positive box [lo, hi]^n, interior to every Gamma_k."""
    return rng.uniform(lo, hi, size=(count, spec.n))


def check_f_axioms(
    spec: OperatorSpec,
    sample_count: int,
    seed: int,
    tol_concave: float = 1e-9,
    tol_euler: float = 1e-8,
    tol_grad: float = 1e-6,
) -> AxiomReport:
    """Sample-based audit of the hypotheses on f.

    Checks symmetry (exact), strict monotonicity under coordinate bumps,
    midpoint concavity, Euler's identity (1-homogeneous families only) and
    the closed-form gradient against central finite differences.
    """
    if sample_count < 0:
        raise ValueError("sample_count must be >= 0")
    report = AxiomReport(spec.text(), sample_count, seed)
    if sample_count == 0:
        return report
    rng = np.random.default_rng(seed)
    n = spec.n
    x = sample_interior(spec, sample_count, rng)
    fx = f_eval_many(spec, x)

    # (i) symmetry under a random permutation, exact
    perm = rng.permuted(x, axis=-1)
    sym_bad = int(np.sum(f_eval_many(spec, perm) != fx))
    report.checks["symmetry"] = {"skipped": False, "violations": sym_bad, "tol": 0.0}

    # (ii) strict increase under coordinate bumps
    i = rng.integers(0, n, size=sample_count)
    t = rng.uniform(0.1, 1.0, size=sample_count)
    bumped = x.copy()
    bumped[np.arange(sample_count), i] += t
    mono_bad = int(np.sum(f_eval_many(spec, bumped) <= fx))
    report.checks["monotone"] = {"skipped": False, "violations": mono_bad, "tol": 0.0}

    # (iii) midpoint concavity
    y = sample_interior(spec, sample_count, rng)
    mid = f_eval_many(spec, 0.5 * (x + y))
    conc_bad = int(np.sum(mid < 0.5 * (fx + f_eval_many(spec, y)) - tol_concave))
    report.checks["concave"] = {"skipped": False, "violations": conc_bad, "tol": tol_concave}

    # (iv) Euler identity, degree-1 homogeneity
    grad = f_gradient_many(spec, x)
    if spec.homogeneous:
        euler = np.abs(np.sum(x * grad, axis=-1) - fx)
        euler_bad = int(np.sum(euler > tol_euler * (1.0 + np.abs(fx))))
        report.checks["euler"] = {"skipped": False, "violations": euler_bad, "tol": tol_euler}
    else:
        report.checks["euler"] = {"skipped": True, "violations": 0, "tol": tol_euler}

    # (v) gradient vs central finite differences
    step = 1e-5
    fd = np.empty_like(grad)
    for j in range(n):
        xp = x.copy()
        xp[:, j] += step
        xm = x.copy()
        xm[:, j] -= step
        fd[:, j] = (f_eval_many(spec, xp) - f_eval_many(spec, xm)) / (2 * step)
    rel = np.abs(fd - grad) / (np.abs(grad) + 1e-300)
    grad_bad = int(np.sum(np.any(rel > tol_grad, axis=-1)))
    report.checks["gradient_fd"] = {"skipped": False, "violations": grad_bad, "tol": tol_grad}
    return report

"""Infimum-of-linear-operators representation of the concave operator F.

Each interior control matrix H yields an affine minorant

    F(B) <= trace(Htilde B) + offset,      Htilde = U diag(grad f(lam)) U*,

with equality at B = H.  Finite control sets discretize the infimum; for
1-homogeneous families the controls live on the eigenvalue simplex (the
offset vanishes by Euler's identity), saturated families additionally
carry a geometric magnitude ladder.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError
from .hermitian import HermitianMatrix, eigen_decompose, trace_pair, F_eval
from .symfunc import OperatorSpec, cone_contains, f_gradient_many

__all__ = [
    "LinearMinorant",
    "ControlSet",
    "supergradient_minorant",
    "simplex_profiles",
    "build_control_set",
    "bellman_inf",
    "bellman_argmin",
    "detect_outside_cone",
    "standard_frames",
]

_SAT_LADDER = [2.0**m for m in range(-4, 5)]


@dataclass
class LinearMinorant:
    htilde: HermitianMatrix
    offset: float
    source: HermitianMatrix

    def value_at(self, b: HermitianMatrix) -> float:
        return trace_pair(self.htilde, b) + self.offset

    def to_json(self) -> dict:
        return {
            "htilde": self.htilde.to_pairs(),
            "offset": self.offset,
            "source": self.source.to_pairs(),
            "n": self.htilde.n,
        }


@dataclass
class ControlSet:
    minorants: list
    resolution: int

    def __post_init__(self):
        if not self.minorants:
            raise ValueError("control set must be nonempty")

    def to_json(self) -> dict:
        return {
            "resolution": self.resolution,
            "minorants": [m.to_json() for m in self.minorants],
        }


def supergradient_minorant(spec: OperatorSpec, h: HermitianMatrix) -> LinearMinorant:
    """The affine minorant generated by an interior control matrix."""
    dec = eigen_decompose(h)
    if not cone_contains(dec.values, spec.cone, closure=False):
        raise DomainError("control matrix is not interior to the open cone")
    grad = f_gradient_many(spec, dec.values[None, :])[0]
    htilde = HermitianMatrix(dec.vectors @ np.diag(grad) @ dec.vectors.conj().T)
    if spec.homogeneous:
        # Euler's identity makes the offset exactly zero; computing it would
        # only reintroduce cancellation noise at anisotropic controls.
        offset = 0.0
    else:
        offset = F_eval(spec, h) - trace_pair(htilde, h)
    return LinearMinorant(htilde, offset, h)


def simplex_profiles(n: int, resolution: int) -> np.ndarray:
    """Interior grid on the unit simplex: compositions m/(2r) with m >= 1.

    resolution 1 gives just the barycenter for n = 2; doubling the
    resolution refines the grid in a nested way.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    total = 2 * resolution
    if total < n:
        raise ValueError(f"resolution too small for dimension {n}")
    profiles = []
    # compositions of `total` into n positive parts
    for cuts in combinations(range(1, total), n - 1):
        parts = np.diff((0,) + cuts + (total,))
        profiles.append(parts / total)
    return np.array(profiles)


def standard_frames(n: int, kind: str = "coord+diag") -> list:
    """Unitary frames whose columns have lattice-representable projections.

    "coord" is just the identity; "coord+diag" adds, for every coordinate
    pair, the real-diagonal and complex-diagonal rotations by 45 degrees.
    """
    frames = [np.eye(n, dtype=complex)]
    if kind == "coord":
        return frames
    if kind != "coord+diag":
        raise ValueError(f"unknown frame family {kind!r}")
    inv = 1.0 / np.sqrt(2.0)
    for i in range(n - 1):
        for j in range(i + 1, n):
            for phase in (1.0, 1.0j):
                u = np.eye(n, dtype=complex)
                u[i, i] = inv
                u[j, i] = inv * phase
                u[i, j] = inv
                u[j, j] = -inv * phase
                frames.append(u)
    return frames


def _eigen_profiles(spec: OperatorSpec, resolution: int) -> np.ndarray:
    base = simplex_profiles(spec.n, resolution)
    if spec.homogeneous:
        return base
    return np.concatenate([base * c for c in _SAT_LADDER])


def build_control_set(spec: OperatorSpec, resolution: int, frames=None) -> ControlSet:
    """Controls H = U diag(mu) U* over a simplex grid and the given frames.

    The identity frame is always included; extra frames are n x n unitary
    arrays.  Saturated families scale the simplex grid by a geometric
    magnitude ladder since their minorants are not ray-constant.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    frame_list = [np.eye(spec.n, dtype=complex)]
    if frames is not None:
        for u in frames:
            u = np.asarray(u, dtype=complex)
            if not np.allclose(u, np.eye(spec.n)):
                frame_list.append(u)
    minorants = []
    for mu in _eigen_profiles(spec, resolution):
        for u in frame_list:
            h = HermitianMatrix(u @ np.diag(mu.astype(complex)) @ u.conj().T)
            minorants.append(supergradient_minorant(spec, h))
    return ControlSet(minorants, resolution)


def bellman_inf(controls: ControlSet, b: HermitianMatrix) -> float:
    """min over the finite control set of trace(Htilde B) + offset."""
    return min(m.value_at(b) for m in controls.minorants)


def bellman_argmin(controls: ControlSet, b: HermitianMatrix):
    """(value, minorant) attaining the minimum."""
    best = None
    best_val = np.inf
    for m in controls.minorants:
        v = m.value_at(b)
        if v < best_val:
            best_val, best = v, m
    return best_val, best


def detect_outside_cone(spec: OperatorSpec, b: HermitianMatrix, scan_budget: int):
    """Semi-decision for B outside the closed matrix cone.

    Scans controls B + tI and anisotropic eigenvalue profiles in B's own
    eigenframe; a minorant value below -tol_neg certifies (by the
    contrapositive of the representation lemma) that B is outside the
    closed cone.  Returns (flag, witness-or-None); False means the budget
    was exhausted without a certificate.
    """
    if scan_budget < 1:
        raise ValueError("scan_budget must be >= 1")
    tol_neg = 1e-10 * (1.0 + b.frobenius())
    dec = eigen_decompose(b)
    u = dec.vectors
    lam = dec.values
    n = spec.n
    spent = 0

    def probe(mu) -> LinearMinorant | None:
        nonlocal spent
        if spent >= scan_budget:
            return None
        spent += 1
        h = HermitianMatrix(u @ np.diag(np.asarray(mu, dtype=complex)) @ u.conj().T)
        try:
            m = supergradient_minorant(spec, h)
        except DomainError:
            return None
        if m.value_at(b) < -tol_neg:
            return m
        return None

    # family 1: B + tI above the smallest interior shift
    t0 = -np.min(lam)
    for t in np.geomspace(1e-3, 1e3, 25):
        w = probe(lam + (t0 + t + 1e-9 * (1 + abs(t0))))
        if w is not None:
            return True, w
        if spent >= scan_budget:
            return False, None

    # family 2: anisotropic rays, small weight where lambda_i is most negative
    order = np.argsort(lam)  # ascending: most negative first
    for depth in range(1, n + 1):
        for tau in np.geomspace(0.5, 1e-14, 60):
            mu = np.ones(n)
            mu[order[:depth]] = tau
            w = probe(mu / np.sum(mu))
            if w is not None:
                return True, w
            if spent >= scan_budget:
                return False, None
    return False, None

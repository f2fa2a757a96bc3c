"""Hermitian matrix values, small-dimension eigendecomposition and the lift
of the symmetric functions to matrices.

Eigendecomposition is done by cyclic Jacobi sweeps with complex Givens
rotations; for n = 2 a single rotation is exact, and the dimensions of
interest never exceed 4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .symfunc import ConeSpec, OperatorSpec, cone_contains, f_eval_many

__all__ = [
    "HermitianMatrix",
    "EigenDecomposition",
    "eigen_decompose",
    "eigen_values",
    "eigvals_2x2_field",
    "trace_pair",
    "matrix_in_cone",
    "F_eval",
    "F_eval_many",
]

_OFFDIAG_TARGET = 1e-12
_MAX_SWEEPS = 60


class HermitianMatrix:
    """An n x n complex Hermitian value; the input is symmetrized to
    (A + A*)/2 so rounding-level asymmetry from discrete Hessians is
    absorbed rather than rejected."""

    __slots__ = ("mat", "n")

    def __init__(self, entries):
        a = np.array(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a = 0.5 * (a + a.conj().T)
        a.setflags(write=False)
        self.mat = a
        self.n = a.shape[0]

    @staticmethod
    def identity(n: int) -> "HermitianMatrix":
        return HermitianMatrix(np.eye(n))

    @staticmethod
    def diagonal(values) -> "HermitianMatrix":
        return HermitianMatrix(np.diag(np.asarray(values, dtype=complex)))

    def __add__(self, other):
        return HermitianMatrix(self.mat + other.mat)

    def __sub__(self, other):
        return HermitianMatrix(self.mat - other.mat)

    def scaled(self, c: float) -> "HermitianMatrix":
        return HermitianMatrix(c * self.mat)

    def shifted(self, t: float) -> "HermitianMatrix":
        """self + t * identity."""
        return HermitianMatrix(self.mat + t * np.eye(self.n))

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.mat))

    def to_pairs(self) -> list:
        """Row-major list of (re, im) pairs for the JSON report format."""
        return [[float(z.real), float(z.imag)] for z in self.mat.ravel()]

    @staticmethod
    def from_pairs(pairs, n: int) -> "HermitianMatrix":
        a = np.array([complex(re, im) for re, im in pairs]).reshape(n, n)
        return HermitianMatrix(a)

    def __repr__(self):
        return f"HermitianMatrix(n={self.n})"


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray  # sorted descending
    vectors: np.ndarray  # unitary, columns are eigenvectors


def _jacobi(a: np.ndarray):
    """Cyclic Jacobi with complex Givens rotations.  Returns (diag, V)."""
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(_MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= _OFFDIAG_TARGET * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = a[p, q]
                r = abs(g)
                if r <= 1e-300 * scale:
                    continue
                u = g / r  # phase
                alpha = a[p, p].real
                beta = a[q, q].real
                tau = (beta - alpha) / (2.0 * r)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # unitary rotation R with columns (c, -conj(u) s) and (s, conj(u) c)
                uc = np.conj(u)
                col_p = c * a[:, p] - uc * s * a[:, q]
                col_q = s * a[:, p] + uc * c * a[:, q]
                a[:, p], a[:, q] = col_p, col_q
                row_p = c * a[p, :] - u * s * a[q, :]
                row_q = s * a[p, :] + u * c * a[q, :]
                a[p, :], a[q, :] = row_p, row_q
                vcol_p = c * v[:, p] - uc * s * v[:, q]
                vcol_q = s * v[:, p] + uc * c * v[:, q]
                v[:, p], v[:, q] = vcol_p, vcol_q
    return np.real(np.diag(a)), v


def eigen_decompose(h: HermitianMatrix) -> EigenDecomposition:
    """Eigenvalues (descending, stable ties) and a unitary eigenvector basis."""
    if h.n == 1:
        return EigenDecomposition(np.array([h.mat[0, 0].real]), np.eye(1, dtype=complex))
    vals, vecs = _jacobi(np.asarray(h.mat))
    order = np.argsort(-vals, kind="stable")
    return EigenDecomposition(vals[order], vecs[:, order])


def eigen_values(h: HermitianMatrix) -> np.ndarray:
    return eigen_decompose(h).values


def eigvals_2x2_field(a11, a22, a12):
    """Eigenvalues of a field of 2x2 Hermitian matrices, vectorized.

    a11, a22 real arrays; a12 complex array.  Returns (lo, hi)."""
    mean = 0.5 * (a11 + a22)
    rad = np.sqrt((0.5 * (a11 - a22)) ** 2 + np.abs(a12) ** 2)
    return mean - rad, mean + rad


def trace_pair(a: HermitianMatrix, b: HermitianMatrix) -> float:
    """trace(AB); real for Hermitian arguments up to rounding."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    s = complex(np.sum(a.mat * b.mat.T))
    bound = 1e-12 * max(a.frobenius() * b.frobenius(), 1e-300)
    if abs(s.imag) > bound:
        raise ValueError(f"imaginary residue {s.imag:.3e} exceeds rounding bound {bound:.3e}")
    return s.real


def matrix_in_cone(h: HermitianMatrix, cone: ConeSpec, closure: bool = False) -> bool:
    if h.n != cone.n:
        raise ValueError(f"dimension mismatch: {h.n} vs {cone.n}")
    return cone_contains(eigen_values(h), cone, closure=closure)


def F_eval(spec: OperatorSpec, h: HermitianMatrix) -> float:
    """f on the eigenvalues; -inf off the closed matrix cone."""
    if h.n != spec.n:
        raise ValueError(f"dimension mismatch: {h.n} vs {spec.n}")
    return float(f_eval_many(spec, eigen_values(h)))


def F_eval_many(spec: OperatorSpec, mats) -> np.ndarray:
    """F over an iterable of HermitianMatrix values."""
    return np.array([F_eval(spec, m) for m in mats])


def interior_matrix(spec: OperatorSpec, h: HermitianMatrix) -> EigenDecomposition:
    """Decompose and require the eigenvalues strictly inside the open cone."""
    dec = eigen_decompose(h)
    if not cone_contains(dec.values, spec.cone, closure=False):
        raise DomainError("matrix eigenvalues are not interior to the open cone")
    return dec

"""Rasterized bounded domains in C^n and real-valued grid functions.

A domain is sampled on the global lattice h*Z^(2n) (so sub-domains of the
same spacing share nodes).  Nodes are classified interior / boundary /
exterior from the shape's signed distance; grid functions store a full
lattice array with NaN at exterior nodes, which lets every stencil
operation run vectorized and makes unavailable neighbors self-marking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDomainError, RefinementError

__all__ = [
    "Ball",
    "Box",
    "parse_domain",
    "DomainGrid",
    "GridFunction",
    "rasterize_domain",
    "eroded_domain",
    "shift",
    "save_csv",
    "load_csv",
]

_CLS_TOL = 1e-9


@dataclass(frozen=True)
class Ball:
    center: tuple  # 2n real coordinates
    radius: float

    @property
    def rdim(self) -> int:
        return len(self.center)

    @property
    def inradius(self) -> float:
        return self.radius

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def sdf_grid(self, axes) -> np.ndarray:
        acc = np.zeros(tuple(len(a) for a in axes))
        for d, a in enumerate(axes):
            sh = [1] * len(axes)
            sh[d] = len(a)
            acc = acc + ((a - self.center[d]) ** 2).reshape(sh)
        return np.sqrt(acc) - self.radius

    def sdf(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.linalg.norm(p - np.asarray(self.center), axis=-1) - self.radius

    def eroded(self, eps: float) -> "Ball":
        return Ball(self.center, self.radius - eps)

    def descriptor(self, h: float) -> str:
        c = ",".join(f"{x:g}" for x in self.center)
        return f"ball:c={c};r={self.radius:g};h={h:g}"


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    @property
    def rdim(self) -> int:
        return len(self.lo)

    @property
    def inradius(self) -> float:
        return 0.5 * min(h - l for l, h in zip(self.lo, self.hi))

    def bounds(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def sdf_grid(self, axes) -> np.ndarray:
        shape = tuple(len(a) for a in axes)
        inner = np.full(shape, -np.inf)
        outer = np.zeros(shape)
        for d, a in enumerate(axes):
            sh = [1] * len(axes)
            sh[d] = len(a)
            g = np.maximum(self.lo[d] - a, a - self.hi[d]).reshape(sh)
            inner = np.maximum(inner, g)
            outer = outer + np.maximum(g, 0.0) ** 2
        outer = np.sqrt(outer)
        return np.where(outer > 0.0, outer, inner)

    def sdf(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        g = np.maximum(np.asarray(self.lo) - p, p - np.asarray(self.hi))
        outer = np.linalg.norm(np.maximum(g, 0.0), axis=-1)
        inner = np.max(g, axis=-1)
        return np.where(outer > 0.0, outer, inner)

    def eroded(self, eps: float) -> "Box":
        return Box(tuple(l + eps for l in self.lo), tuple(h - eps for h in self.hi))

    def descriptor(self, h: float) -> str:
        lo = ",".join(f"{x:g}" for x in self.lo)
        hi = ",".join(f"{x:g}" for x in self.hi)
        return f"box:lo={lo};hi={hi};h={h:g}"


def parse_domain(text: str):
    """Parse 'ball:c=0,0;r=1;h=0.1' / 'box:lo=-1,-1;hi=1,1;h=0.1' -> (shape, h)."""
    kind, rest = text.strip().split(":", 1)
    args = {}
    for part in rest.split(";"):
        key, val = part.split("=")
        args[key.strip()] = val
    h = float(args["h"])
    if kind == "ball":
        center = tuple(float(x) for x in args["c"].split(","))
        shape = Ball(center, float(args["r"]))
    elif kind == "box":
        lo = tuple(float(x) for x in args["lo"].split(","))
        hi = tuple(float(x) for x in args["hi"].split(","))
        shape = Box(lo, hi)
    else:
        raise ValueError(f"unknown domain kind {kind!r}")
    if shape.rdim % 2 != 0:
        raise ValueError("domains live in C^n: need an even number of real coordinates")
    return shape, h


def shift(arr: np.ndarray, offset, fill=np.nan) -> np.ndarray:
    """shift(arr, o)[x] = arr[x - o], filling vacated entries."""
    out = np.full_like(arr, fill)
    src = []
    dst = []
    for o, size in zip(offset, arr.shape):
        if o >= 0:
            src.append(slice(0, size - o))
            dst.append(slice(o, size))
        else:
            src.append(slice(-o, size))
            dst.append(slice(0, size + o))
        if abs(o) >= size:
            return out
    out[tuple(dst)] = arr[tuple(src)]
    return out


@dataclass
class DomainGrid:
    shape_spec: object  # Ball or Box
    h: float
    axes: list  # 1-D coordinate arrays, multiples of h
    origin: tuple  # lattice index of axes[d][0], i.e. axes[d][0]/h rounded
    interior: np.ndarray
    boundary: np.ndarray

    @property
    def n(self) -> int:
        return len(self.axes) // 2

    @property
    def rdim(self) -> int:
        return len(self.axes)

    @property
    def lattice_shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def nonexterior(self) -> np.ndarray:
        return self.interior | self.boundary

    def coords(self, idx) -> np.ndarray:
        return np.array([self.axes[d][i] for d, i in enumerate(idx)])

    def points_of(self, mask: np.ndarray) -> np.ndarray:
        """(m, 2n) coordinates of the masked nodes, in C-order."""
        idx = np.nonzero(mask)
        return np.stack([self.axes[d][idx[d]] for d in range(self.rdim)], axis=-1)

    def eval_callable(self, fn, chunk_nodes: int = 2_000_000, dtype=np.float64) -> np.ndarray:
        """Evaluate fn(points)->values on the whole lattice, chunked on axis 0."""
        shape = self.lattice_shape
        out = np.empty(shape, dtype=dtype)
        tail = int(np.prod(shape[1:]))
        step = max(1, chunk_nodes // max(tail, 1))
        for i0 in range(0, shape[0], step):
            i1 = min(i0 + step, shape[0])
            mesh = np.meshgrid(self.axes[0][i0:i1], *self.axes[1:], indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            out[i0:i1] = np.asarray(fn(pts), dtype=float).reshape((i1 - i0,) + shape[1:])
        return out

    def index_map_from(self, other: "DomainGrid"):
        """Per-axis index offset such that other[i] = self[i + off] (same lattice)."""
        if abs(other.h - self.h) > 1e-12 * self.h:
            raise ValueError("grids do not share a lattice spacing")
        return tuple(oo - so for so, oo in zip(self.origin, other.origin))


def _classify(shape, h: float, axes):
    # the sdf array is large on fine 4-D lattices, so it is computed in
    # slabs along the first axis and only the boolean masks are retained
    tol = _CLS_TOL * max(h, 1.0)
    lattice = tuple(len(a) for a in axes)
    interior = np.empty(lattice, dtype=bool)
    near = np.empty(lattice, dtype=bool)
    rest = int(np.prod(lattice[1:]))
    step = max(1, 8_000_000 // max(rest, 1))
    for i0 in range(0, lattice[0], step):
        sl = slice(i0, min(i0 + step, lattice[0]))
        sdf = shape.sdf_grid([axes[0][sl]] + list(axes[1:]))
        interior[sl] = sdf < -tol
        near[sl] = np.abs(sdf) <= h * (1.0 + _CLS_TOL)
    # the band must cover the whole wide-stencil footprint: axis offsets
    # and the two-axis diagonal offsets (distance sqrt(2) h) used by the
    # 45-degree frames of the scheme and the mixed second differences
    adj = np.zeros_like(interior)
    rdim = len(axes)
    offsets = []
    for d in range(rdim):
        for s in (1, -1):
            off = [0] * rdim
            off[d] = s
            offsets.append(tuple(off))
    for d1 in range(rdim - 1):
        for d2 in range(d1 + 1, rdim):
            for s1 in (1, -1):
                for s2 in (1, -1):
                    off = [0] * rdim
                    off[d1] = s1
                    off[d2] = s2
                    offsets.append(tuple(off))
    for off in offsets:
        adj |= shift(interior, off, fill=False)
    boundary = ~interior & (near | adj)
    # the sdf array is large on fine 4-D lattices; classification is the
    # only consumer, so it is not retained
    return interior, boundary


def rasterize_domain(shape, h: float) -> DomainGrid:
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    if shape.inradius < 3 * h:
        raise RefinementError(
            f"inradius {shape.inradius:g} below 3h = {3 * h:g}: grid too coarse"
        )
    lo, hi = shape.bounds()
    axes = []
    origin = []
    for d in range(shape.rdim):
        i0 = int(np.floor((lo[d] - 1.5 * h) / h))
        i1 = int(np.ceil((hi[d] + 1.5 * h) / h))
        axes.append(np.arange(i0, i1 + 1) * h)
        origin.append(i0)
    interior, boundary = _classify(shape, h, axes)
    if not interior.any():
        raise EmptyDomainError("rasterization produced no interior nodes")
    return DomainGrid(shape, h, axes, tuple(origin), interior, boundary)


def eroded_domain(grid: DomainGrid, epsilon: float) -> DomainGrid:
    """Reclassify on the same lattice with the shape shrunk by epsilon."""
    if epsilon < grid.h * (1.0 - _CLS_TOL):
        raise ValueError(f"erosion radius {epsilon:g} below grid spacing {grid.h:g}")
    shape = grid.shape_spec.eroded(epsilon)
    interior, boundary = _classify(shape, grid.h, grid.axes)
    if not interior.any():
        raise EmptyDomainError(f"erosion by {epsilon:g} emptied the domain interior")
    return DomainGrid(shape, grid.h, grid.axes, grid.origin, interior, boundary)


class GridFunction:
    """Real values on the non-exterior nodes of a DomainGrid."""

    __slots__ = ("grid", "values")

    def __init__(
        self, grid: DomainGrid, values: np.ndarray, validate: bool = True, copy: bool = True
    ):
        values = np.asarray(values)
        if not np.issubdtype(values.dtype, np.floating):
            values = values.astype(float)
        if values.shape != grid.lattice_shape:
            raise ValueError(
                f"value array shape {values.shape} != lattice {grid.lattice_shape}"
            )
        if validate:
            if copy:
                values = values.copy()
            # row-chunked: full-lattice boolean temporaries are avoided
            for i in range(values.shape[0]):
                keep = grid.interior[i] | grid.boundary[i]
                row = values[i]
                if not np.all(np.isfinite(row[keep])):
                    raise ValueError(
                        "grid function must be finite at non-exterior nodes"
                    )
                row[~keep] = np.nan
        self.grid = grid
        self.values = values

    @staticmethod
    def from_callable(grid: DomainGrid, fn, dtype=np.float64) -> "GridFunction":
        # the freshly built array is owned, so it is sanitized in place
        return GridFunction(grid, grid.eval_callable(fn, dtype=dtype), copy=False)

    @staticmethod
    def constant(grid: DomainGrid, c: float) -> "GridFunction":
        return GridFunction(grid, np.full(grid.lattice_shape, float(c)))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy(), validate=False)

    def on_grid(self, other: DomainGrid) -> "GridFunction":
        """Restrict/transfer to another grid on the same lattice.

        Every non-exterior node of `other` must carry a finite value here."""
        if abs(other.h - self.grid.h) > 1e-12 * self.grid.h:
            raise ValueError("grids do not share a lattice spacing")
        # a node at global lattice index L sits at self index L - self.origin
        # and at other index L - other.origin, so self_idx = other_idx + rel
        rel = tuple(oo - so for so, oo in zip(self.grid.origin, other.origin))
        out = np.full(other.lattice_shape, np.nan)
        src = []
        dst = []
        ok = True
        for d in range(other.rdim):
            lo = rel[d]
            hi = lo + other.lattice_shape[d]
            s0 = max(lo, 0)
            s1 = min(hi, self.grid.lattice_shape[d])
            if s1 <= s0:
                ok = False
                break
            src.append(slice(s0, s1))
            dst.append(slice(s0 - lo, s1 - lo))
        if ok:
            out[tuple(dst)] = self.values[tuple(src)]
        return GridFunction(other, out)

    # pointwise helpers -----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.values + other.values, validate=False)
        return GridFunction(self.grid, self.values + other, validate=False)

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.values - other.values, validate=False)
        return GridFunction(self.grid, self.values - other, validate=False)

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c, validate=False)

    __rmul__ = __mul__

    def maximum(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, np.fmax(self.values, other.values), validate=False)

    def max_abs(self) -> float:
        # row-chunked to avoid a full-lattice temporary on fine 4-D grids
        best = 0.0
        for row in self.values:
            m = np.nanmax(np.abs(row)) if np.isfinite(row).any() else np.nan
            if not np.isnan(m):
                best = max(best, float(m))
        return best


def save_csv(gf: GridFunction, path: str) -> None:
    """One row per non-exterior node: x1,y1,...,xn,yn,value at 17 digits."""
    grid = gf.grid
    mask = grid.nonexterior
    pts = grid.points_of(mask)
    vals = gf.values[mask]
    names = []
    for a in range(grid.n):
        names += [f"x{a + 1}", f"y{a + 1}"]
    header = ",".join(names + ["value"])
    data = np.column_stack([pts, vals])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def load_csv(grid: DomainGrid, path: str) -> GridFunction:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != grid.rdim + 1:
        raise ValueError(
            f"csv has {data.shape[1]} columns, expected {grid.rdim + 1} for this grid"
        )
    values = np.full(grid.lattice_shape, np.nan)
    idx = []
    for d in range(grid.rdim):
        i = np.rint(data[:, d] / grid.h).astype(int) - grid.origin[d]
        if np.any((i < 0) | (i >= grid.lattice_shape[d])):
            raise ValueError("csv contains nodes outside the grid lattice")
        idx.append(i)
    values[tuple(idx)] = data[:, -1]
    mask = grid.nonexterior
    if not np.all(np.isfinite(values[mask])):
        raise ValueError("csv does not cover every non-exterior node of the grid")
    return GridFunction(grid, values)

"""Domains, rasterization, grid functions, CSV round trips."""

import numpy as np
import pytest

from cxhessian.errors import EmptyDomainError, RefinementError
from cxhessian.grid import (
    Ball,
    Box,
    GridFunction,
    eroded_domain,
    load_csv,
    parse_domain,
    rasterize_domain,
    save_csv,
    shift,
)


class TestShapes:
    def test_ball_sdf(self):
        b = Ball((0.0, 0.0), 1.0)
        assert b.sdf(np.array([[0.0, 0.0]]))[0] == pytest.approx(-1.0)
        assert b.sdf(np.array([[2.0, 0.0]]))[0] == pytest.approx(1.0)
        assert b.inradius == pytest.approx(1.0)

    def test_box_sdf(self):
        b = Box((-1.0, -1.0), (1.0, 2.0))
        assert b.sdf(np.array([[0.0, 0.0]]))[0] == pytest.approx(-1.0)
        assert b.sdf(np.array([[2.0, 0.0]]))[0] == pytest.approx(1.0)
        # outside a corner: Euclidean distance
        assert b.sdf(np.array([[2.0, 3.0]]))[0] == pytest.approx(np.sqrt(2.0))
        assert b.inradius == pytest.approx(1.0)

    def test_sdf_grid_matches_pointwise(self):
        for shape in (Ball((0.1, -0.2), 0.8), Box((-1.0, -0.5), (0.5, 1.0))):
            axes = [np.linspace(-1.2, 1.2, 13), np.linspace(-1.2, 1.2, 11)]
            grid_vals = shape.sdf_grid(axes)
            xx, yy = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
            assert np.allclose(grid_vals.ravel(), shape.sdf(pts), atol=1e-12)

    def test_eroded(self):
        assert Ball((0.0, 0.0), 1.0).eroded(0.3).radius == pytest.approx(0.7)
        bx = Box((-1.0, -1.0), (1.0, 1.0)).eroded(0.25)
        assert bx.lo == (-0.75, -0.75) and bx.hi == (0.75, 0.75)


class TestParseDomain:
    def test_roundtrip(self):
        shape, h = parse_domain("ball:c=0,0;r=1;h=0.1")
        assert isinstance(shape, Ball) and h == 0.1
        assert parse_domain(shape.descriptor(h))[0] == shape

    def test_box(self):
        shape, h = parse_domain("box:lo=-1,-1,-1,-1;hi=1,1,1,1;h=0.25")
        assert isinstance(shape, Box) and shape.rdim == 4

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            parse_domain("ball:c=0,0,0;r=1;h=0.1")

    @pytest.mark.parametrize("bad", ["", "ball", "ball:c=0,0;r=1", "tri:c=0,0;r=1;h=0.1"])
    def test_rejects(self, bad):
        with pytest.raises((ValueError, KeyError)):
            parse_domain(bad)


class TestShift:
    def test_convention(self):
        # shift(a, o)[x] = a[x - o]
        a = np.arange(5.0)
        out = shift(a, (1,))
        assert np.isnan(out[0]) and np.allclose(out[1:], a[:-1])
        out = shift(a, (-2,))
        assert np.allclose(out[:3], a[2:]) and np.isnan(out[3:]).all()


class TestRasterize:
    def test_ball_classification(self):
        shape, h = parse_domain("ball:c=0,0;r=1;h=0.1")
        g = rasterize_domain(shape, h)
        pts_i = g.points_of(g.interior)
        assert np.all(np.linalg.norm(pts_i, axis=1) < 1.0)
        pts_b = g.points_of(g.boundary)
        # boundary band: within one spacing of the zero level set
        assert np.all(np.abs(np.linalg.norm(pts_b, axis=1) - 1.0) <= h * 1.5)
        assert not np.any(g.interior & g.boundary)

    def test_every_interior_neighbor_is_nonexterior(self):
        shape, h = parse_domain("ball:c=0,0;r=1;h=0.1")
        g = rasterize_domain(shape, h)
        ne = g.nonexterior
        for d in range(g.rdim):
            for s in (1, -1):
                o = [0] * g.rdim
                o[d] = s
                moved = shift(ne.astype(float), o, fill=0.0) > 0.5
                assert np.all(moved[g.interior])

    def test_interior_count_scales(self):
        # area pi vs h^2 per node
        shape, h = parse_domain("ball:c=0,0;r=1;h=0.05")
        g = rasterize_domain(shape, h)
        area = g.interior.sum() * h**2
        assert area == pytest.approx(np.pi, rel=0.05)

    def test_too_coarse_raises(self):
        with pytest.raises(RefinementError):
            rasterize_domain(Ball((0.0, 0.0), 0.2), 0.1)

    def test_eroded_domain(self):
        shape, h = parse_domain("ball:c=0,0;r=1;h=0.1")
        g = rasterize_domain(shape, h)
        ge = eroded_domain(g, 0.4)
        assert ge.lattice_shape == g.lattice_shape
        assert ge.interior.sum() < g.interior.sum()
        assert np.all(g.interior[ge.interior])
        with pytest.raises(EmptyDomainError):
            eroded_domain(g, 2.0)
        with pytest.raises(ValueError):
            eroded_domain(g, 0.01)


class TestGridFunction:
    @pytest.fixture()
    def grid(self):
        shape, h = parse_domain("ball:c=0,0;r=1;h=0.1")
        return rasterize_domain(shape, h)

    def test_from_callable_nan_outside(self, grid):
        gf = GridFunction.from_callable(grid, lambda p: (p**2).sum(axis=1))
        assert np.all(np.isfinite(gf.values[grid.nonexterior]))
        assert np.all(np.isnan(gf.values[~grid.nonexterior]))

    def test_float32_dtype_preserved(self, grid):
        gf = GridFunction.from_callable(
            grid, lambda p: (p**2).sum(axis=1), dtype=np.float32
        )
        assert gf.values.dtype == np.float32

    def test_arithmetic_and_max_abs(self, grid):
        a = GridFunction.constant(grid, 2.0)
        b = GridFunction.from_callable(grid, lambda p: p[:, 0])
        c = a + b
        assert c.max_abs() <= 2.0 + 1.0 + 1.5 * grid.h
        d = a - a
        assert d.max_abs() == 0.0
        m = a.maximum(b)
        assert np.nanmin(m.values) >= 2.0 - 1e-12

    def test_on_grid_window(self, grid):
        sub = rasterize_domain(Ball((0.0, 0.0), 0.5), grid.h)
        gf = GridFunction.from_callable(grid, lambda p: p[:, 0] + 2 * p[:, 1])
        moved = gf.on_grid(sub)
        ref = GridFunction.from_callable(sub, lambda p: p[:, 0] + 2 * p[:, 1])
        assert np.nanmax(np.abs(moved.values[sub.nonexterior] - ref.values[sub.nonexterior])) < 1e-12

    def test_csv_roundtrip_and_determinism(self, grid, tmp_path):
        gf = GridFunction.from_callable(grid, lambda p: np.sin(p[:, 0]) + p[:, 1] ** 2)
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        save_csv(gf, str(p1))
        save_csv(gf, str(p2))
        assert p1.read_bytes() == p2.read_bytes()
        back = load_csv(grid, str(p1))
        mask = grid.nonexterior
        assert np.allclose(back.values[mask], gf.values[mask], atol=1e-15)

    def test_load_requires_coverage(self, grid, tmp_path):
        gf = GridFunction.from_callable(grid, lambda p: p[:, 0])
        path = tmp_path / "partial.csv"
        save_csv(gf, str(path))
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-10]) + "\n")
        with pytest.raises(ValueError):
            load_csv(grid, str(path))

import numpy as np
import pytest

from saltflow.errors import ConfigError
from saltflow.grid import (
    BoxDomain,
    DirichletPatch,
    GridTransfer,
    Tag,
    build_grid,
    dual_volume,
)


@pytest.fixture
def elder_2d():
    domain = BoxDomain((0.0, 0.0), (600.0, 150.0))
    patch = DirichletPatch("rectangle", lo=(150.0,), hi=(450.0,))
    return build_grid(domain, (5, 3), levels=3, patch=patch)


class TestBuildGrid:
    def test_refinement_arithmetic(self, elder_2d):
        fine = elder_2d[0]
        assert fine.n == (17, 9)
        assert fine.spacing == (37.5, 18.75)
        assert [g.n for g in elder_2d] == [(17, 9), (9, 5), (5, 3)]
        assert [g.level for g in elder_2d] == [2, 1, 0]

    def test_top_face_fully_dirichlet(self, elder_2d):
        for g in elder_2d:
            top = g.top_face_mask()
            assert np.all(g.is_dirichlet_c()[top])
            assert not np.any(g.is_dirichlet_c()[~top])
            lateral_or_bottom = ~top & (g.tags != Tag.INTERIOR)
            assert np.all(g.tags[lateral_or_bottom] == Tag.NOFLUX)

    def test_patch_tags(self, elder_2d):
        g = elder_2d[0]
        x = g.coords()[:, 0]
        top = g.top_face_mask()
        brine = g.tags == Tag.DIRICHLET_BRINE
        inside = top & (x >= 150.0) & (x <= 450.0)
        assert np.array_equal(brine, inside)

    def test_disk_patch_membership(self):
        domain = BoxDomain((-300.0, -150.0, -150.0), (300.0, 150.0, 0.0))
        patch = DirichletPatch("disk", center=(-150.0, 0.0), radius=100.0)
        grid = build_grid(domain, (9, 5, 3), levels=2, patch=patch)[0]
        coords = grid.coords()
        top = grid.top_face_mask()
        dist2 = (coords[:, 0] + 150.0) ** 2 + coords[:, 1] ** 2
        expected = top & (dist2 <= 100.0**2)
        assert np.array_equal(grid.tags == Tag.DIRICHLET_BRINE, expected)

    def test_pressure_pins_are_top_perimeter(self, elder_2d):
        g = elder_2d[0]
        top = g.top_face_mask()
        x = g.coords()[:, 0]
        expected = top & ((x == 0.0) | (x == 600.0))
        assert np.array_equal(g.pressure_pin, expected)

    def test_patch_outside_top_face_rejected(self):
        domain = BoxDomain((0.0, 0.0), (600.0, 150.0))
        with pytest.raises(ConfigError):
            build_grid(domain, (5, 3), 1, DirichletPatch("rectangle", lo=(500.0,), hi=(700.0,)))
        with pytest.raises(ConfigError):
            build_grid(domain, (5, 3), 1, DirichletPatch("disk", center=(0.0,), radius=10.0))

    def test_basic_validation(self):
        with pytest.raises(ConfigError):
            BoxDomain((0.0, 0.0), (1.0, -1.0))
        domain = BoxDomain((0.0, 0.0), (1.0, 1.0))
        with pytest.raises(ConfigError):
            build_grid(domain, (1, 3), 1)
        with pytest.raises(ConfigError):
            build_grid(domain, (3, 3), 0)

    def test_nesting_coordinates(self, elder_2d):
        fine, mid, coarse = elder_2d
        fine_set = {tuple(q) for q in np.round(fine.coords(), 9)}
        for g in (mid, coarse):
            for point in np.round(g.coords(), 9):
                assert tuple(point) in fine_set


class TestDualVolumes:
    def test_interior_corner_values(self, elder_2d):
        g = elder_2d[0]
        hx, hz = g.spacing
        vols = g.dual_volumes()
        # corner vertex (0, 0) and an interior vertex
        assert vols[0] == pytest.approx(hx * hz / 4.0, rel=1e-14)
        interior = 1 + g.n[0]  # (1, 1)
        assert vols[interior] == pytest.approx(hx * hz, rel=1e-14)

    def test_corner_octant_3d(self):
        domain = BoxDomain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
        g = build_grid(domain, (3, 3, 3), 1)[0]
        h = g.spacing
        assert dual_volume(g, 0) == pytest.approx(h[0] * h[1] * h[2] / 8.0, rel=1e-14)

    def test_partition_of_unity(self, elder_2d):
        g = elder_2d[0]
        assert g.dual_volumes().sum() == pytest.approx(600.0 * 150.0, rel=1e-9)

    def test_face_areas_tile_cross_sections(self, elder_2d):
        g = elder_2d[0]
        idx_a, idx_b, area, h = g.faces()[0]
        # faces along x: per x-slab, transverse dual lengths sum to the height
        n_slabs = g.n[0] - 1
        assert area.sum() == pytest.approx(n_slabs * 150.0, rel=1e-12)


class TestTransfer:
    def test_constants_preserved(self, elder_2d):
        tr = GridTransfer(elder_2d[0], elder_2d[1])
        ones_c = np.ones(elder_2d[1].n_vertices)
        ones_f = np.ones(elder_2d[0].n_vertices)
        assert np.allclose(tr.prolong(ones_c), 1.0, atol=1e-14)
        assert np.allclose(tr.restrict(ones_f), 1.0, atol=1e-14)

    def test_prolong_is_multilinear_interpolation(self, elder_2d):
        fine, coarse = elder_2d[0], elder_2d[1]
        tr = GridTransfer(fine, coarse)
        # linear functions are reproduced exactly by multilinear interpolation
        f = lambda xy: 2.0 * xy[:, 0] - 0.5 * xy[:, 1] + 3.0
        assert np.allclose(tr.prolong(f(coarse.coords())), f(fine.coords()), rtol=1e-13)

    def test_volume_weighted_adjoint_identity(self):
        # assemble both operators on a 9x5 grid and compare under the
        # dual-volume inner products: <restrict(f), g>_Vc == <f, prolong(g)>_Vf
        domain = BoxDomain((0.0, 0.0), (600.0, 150.0))
        grids = build_grid(domain, (5, 3), 2)
        tr = GridTransfer(grids[0], grids[1])
        vf = grids[0].dual_volumes()
        vc = grids[1].dual_volumes()
        rng = np.random.default_rng(3)
        for _ in range(10):
            f = rng.standard_normal(grids[0].n_vertices)
            g = rng.standard_normal(grids[1].n_vertices)
            lhs = np.sum(vc * tr.restrict(f) * g)
            rhs = np.sum(vf * f * tr.prolong(g))
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_injection(self, elder_2d):
        fine, coarse = elder_2d[0], elder_2d[1]
        tr = GridTransfer(fine, coarse)
        f = np.arange(fine.n_vertices, dtype=float)
        inj = tr.inject(f)
        fc = f.reshape(fine.n, order="F")
        assert np.array_equal(inj.reshape(coarse.n, order="F"), fc[::2, ::2])

    def test_level_mismatch_rejected(self, elder_2d):
        with pytest.raises(ValueError):
            GridTransfer(elder_2d[0], elder_2d[2])

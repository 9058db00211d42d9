import numpy as np
import pytest

from nodalsheet import (
    GridSpec,
    center_and_rescale,
    cumulative,
    field_from_function,
    nodal_length_cells,
    pair_with_test_function,
    rectangle_increment,
    zero_cells_1d,
    zero_count_1d,
    zeros_1d,
)
from nodalsheet.nodal import IncrementGrid


def synth2(R, h, func):
    return field_from_function(GridSpec.regular(2, R, h), func)


def synth1(R, h, func):
    return field_from_function(GridSpec.regular(1, R, h), func)


class TestZeros1D:
    def test_sine_two_zeros_half_open(self):
        fs = synth1(1.0, 0.001, lambda x: np.sin(2 * np.pi * x))
        assert zero_count_1d(fs) == 2
        locs, _ = zeros_1d(fs)
        assert locs[0] == pytest.approx(0.0, abs=1e-12)
        assert locs[1] == pytest.approx(0.5, abs=1e-3)

    def test_constant_sign(self):
        fs = synth1(1.0, 0.01, lambda x: np.cos(x) + 2.0)
        assert zero_count_1d(fs) == 0

    def test_interval_counting(self):
        fs = synth1(1.0, 0.001, lambda x: np.sin(2 * np.pi * x))
        assert zero_count_1d(fs, (0.25, 0.75)) == 1
        assert zero_count_1d(fs, (0.6, 0.9)) == 0

    def test_linear_root_location_exact(self):
        fs = synth1(1.0, 0.25, lambda x: x - 0.37)
        locs, _ = zeros_1d(fs)
        assert locs == pytest.approx([0.37], abs=1e-12)

    def test_degenerate_counter(self):
        fs = synth1(1.0, 0.25, lambda x: np.where(x < 0.6, 1e-12, 1.0))
        _, degenerate = zeros_1d(fs)
        assert degenerate == 3

    def test_dimension_mismatch(self):
        fs = synth2(1.0, 0.5, lambda x, y: x)
        with pytest.raises(ValueError):
            zeros_1d(fs)

    def test_cells_partition_total(self):
        fs = synth1(2.0, 0.001, lambda x: np.sin(7.3 * x + 0.2))
        inc = zero_cells_1d(fs, 10)
        assert inc.total == len(zeros_1d(fs)[0])
        assert np.all(inc.cell_measure >= 0)


class TestNodalLength:
    def test_straight_line_exact_any_m(self):
        for m in (1, 2, 5, 10):
            fs = synth2(2.0, 0.01, lambda x, y: x - 1.0)
            inc = nodal_length_cells(fs, m)
            assert inc.total == pytest.approx(2.0, abs=1e-9)

    def test_oblique_line_exact(self):
        # nodal line y = x across the square: length 2*sqrt(2)
        fs = synth2(2.0, 0.01, lambda x, y: y - x)
        inc = nodal_length_cells(fs, 4)
        assert inc.total == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-9)

    def test_circle_one_percent(self):
        rho = 0.5
        fs = synth2(2.0, 0.01 * rho,
                    lambda x, y: (x - 1.0137) ** 2 + (y - 0.9226) ** 2 - rho**2)
        inc = nodal_length_cells(fs, 1)
        assert inc.total == pytest.approx(2 * np.pi * rho, rel=0.01)

    def test_circle_cells_conserve_total(self):
        rho = 0.5
        fs = synth2(2.0, 0.005,
                    lambda x, y: (x - 1.0137) ** 2 + (y - 0.9226) ** 2 - rho**2)
        whole = nodal_length_cells(fs, 1).total
        split = nodal_length_cells(fs, 8)
        assert split.total == pytest.approx(whole, rel=1e-9)

    def test_misaligned_partition_rejected(self):
        fs = synth2(1.0, 0.01, lambda x, y: x - 0.5)
        with pytest.raises(ValueError, match="divide"):
            nodal_length_cells(fs, 7)

    def test_dimension_mismatch(self):
        fs = synth1(1.0, 0.01, lambda x: x)
        with pytest.raises(ValueError):
            nodal_length_cells(fs, 2)

    def test_random_trig_fields_conservation(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            k = rng.integers(1, 4, size=(3, 2))
            a = rng.normal(size=3)
            b = rng.normal()

            def f(x, y, k=k, a=a, b=b):
                out = b + 0.0 * x
                for (kx, ky), amp in zip(k, a):
                    out = out + amp * np.sin(kx * x + 0.3) * np.cos(ky * y)
                return out

            fs = synth2(3.0, 0.05, f)
            inc = nodal_length_cells(fs, 6)
            whole = nodal_length_cells(fs, 1)
            assert inc.total == pytest.approx(whole.total, rel=1e-9, abs=1e-12)
            assert np.all(inc.cell_measure >= 0.0)


class TestCumulative:
    def test_all_zero(self):
        inc = IncrementGrid(m=4, d=2, cell_measure=np.zeros((4, 4)), R=1.0,
                            model_name="t", seed=0)
        assert np.all(cumulative(inc) == 0.0)

    def test_single_corner_cell(self):
        cells = np.zeros((4, 4))
        cells[0, 0] = 1.0
        inc = IncrementGrid(m=4, d=2, cell_measure=cells, R=1.0,
                            model_name="t", seed=0)
        lat = cumulative(inc)
        assert lat[0, 0] == 0.0
        assert np.all(lat[1:, 1:] == 1.0)
        assert np.all(lat[0, :] == 0.0) and np.all(lat[:, 0] == 0.0)

    def test_conservation_and_monotonicity(self):
        rng = np.random.default_rng(2)
        cells = rng.random((8, 8))
        inc = IncrementGrid(m=8, d=2, cell_measure=cells, R=1.0,
                            model_name="t", seed=0)
        lat = cumulative(inc)
        assert lat[-1, -1] == pytest.approx(cells.sum(), rel=1e-9)
        assert np.all(np.diff(lat, axis=0) >= -1e-15)
        assert np.all(np.diff(lat, axis=1) >= -1e-15)


class TestRectangleIncrement:
    @pytest.fixture()
    def grid_data(self):
        rng = np.random.default_rng(4)
        cells = rng.random((8, 8))
        inc = IncrementGrid(m=8, d=2, cell_measure=cells, R=1.0,
                            model_name="t", seed=0)
        return cumulative(inc), cells

    def test_full_box_is_total(self, grid_data):
        lattice, cells = grid_data
        v = rectangle_increment(lattice, (0.0, 0.0), (1.0, 1.0))
        assert v == pytest.approx(cells.sum(), rel=1e-9)

    def test_zero_volume(self, grid_data):
        lattice, _ = grid_data
        assert rectangle_increment(lattice, (0.25, 0.5), (0.25, 0.75)) == 0.0

    def test_matches_direct_cell_sum(self, grid_data):
        lattice, cells = grid_data
        v = rectangle_increment(lattice, (0.25, 0.5), (0.75, 1.0))
        direct = cells[2:6, 4:8].sum()
        assert v == pytest.approx(direct, rel=1e-9)

    def test_adjacent_additivity(self, grid_data):
        lattice, _ = grid_data
        a = rectangle_increment(lattice, (0.0, 0.0), (0.5, 0.75))
        b = rectangle_increment(lattice, (0.5, 0.0), (1.0, 0.75))
        u = rectangle_increment(lattice, (0.0, 0.0), (1.0, 0.75))
        assert a + b == pytest.approx(u, rel=1e-9)

    def test_off_lattice_corner_rejected(self, grid_data):
        lattice, _ = grid_data
        with pytest.raises(ValueError, match="lattice"):
            rectangle_increment(lattice, (0.0, 0.0), (0.3, 1.0))


class TestCenterAndRescale:
    def test_perfect_centering_gives_zero_field(self):
        m, R, rho1, g2 = 5, 10.0, 0.7, 0.4
        cells = np.full((m, m), rho1 * (R / m) ** 2)
        inc = IncrementGrid(m=m, d=2, cell_measure=cells, R=R,
                            model_name="t", seed=0)
        xi = center_and_rescale(inc, rho1, g2, R)
        assert np.allclose(xi.values, 0.0, atol=1e-12)

    def test_zero_on_zero_faces(self):
        rng = np.random.default_rng(3)
        inc = IncrementGrid(m=6, d=2, cell_measure=rng.random((6, 6)), R=5.0,
                            model_name="t", seed=0)
        xi = center_and_rescale(inc, 0.7, 0.3, 5.0)
        assert np.all(xi.values[0, :] == 0.0)
        assert np.all(xi.values[:, 0] == 0.0)
        assert xi.value_at((0.0, 0.5)) == 0.0

    def test_nonpositive_gamma2_rejected(self):
        inc = IncrementGrid(m=2, d=2, cell_measure=np.ones((2, 2)), R=1.0,
                            model_name="t", seed=0)
        with pytest.raises(ValueError, match="gamma2"):
            center_and_rescale(inc, 0.7, 0.0, 1.0)

    def test_xi_increment_equals_centered_rectangle(self):
        # increments of the xi lattice match centering applied to raw cells
        rng = np.random.default_rng(9)
        m, R, r1, g2 = 8, 4.0, 0.7071, 0.33
        cells = rng.random((m, m))
        inc = IncrementGrid(m=m, d=2, cell_measure=cells, R=R,
                            model_name="t", seed=0)
        xi = center_and_rescale(inc, r1, g2, R)
        lo, hi = (0.25, 0.5), (0.75, 1.0)
        got = rectangle_increment(xi.values, lo, hi)
        raw = cells[2:6, 4:8].sum()
        vol = (R / m) ** 2 * 4 * 4
        expect = (raw - r1 * vol) / (np.sqrt(g2) * R)
        assert got == pytest.approx(expect, rel=1e-9)


class TestPairing:
    @pytest.fixture()
    def inc(self):
        rng = np.random.default_rng(12)
        return IncrementGrid(m=10, d=2, cell_measure=rng.random((10, 10)),
                             R=5.0, model_name="t", seed=0)

    def test_phi_one_equals_corner(self, inc):
        r1, g2 = 0.7, 0.4
        xi = center_and_rescale(inc, r1, g2, inc.R)
        v = pair_with_test_function(inc, lambda x, y: np.ones_like(x), r1, g2, inc.R)
        assert v == pytest.approx(xi.corner(), rel=1e-12)

    def test_phi_zero(self, inc):
        v = pair_with_test_function(inc, lambda x, y: 0.0 * x, 0.7, 0.4, inc.R)
        assert v == 0.0

    def test_shape_mismatch(self, inc):
        with pytest.raises(ValueError, match="shape"):
            pair_with_test_function(inc, np.ones((3, 3)), 0.7, 0.4, inc.R)


class TestMeshConvergenceRatio:
    def test_circle_halving_ratio(self):
        # the extractor is second order on smooth ovals: halving the mesh
        # divides the error by ~4, comfortably above the x1.5 floor
        rho = 0.5
        errs = []
        for h in (0.005, 0.0025):
            fs = synth2(2.0, h,
                        lambda x, y: (x - 1.0137) ** 2 + (y - 0.9226) ** 2 - rho**2)
            errs.append(abs(nodal_length_cells(fs, 1).total - 2 * np.pi * rho))
        ratio = errs[0] / errs[1]
        assert ratio >= 1.5

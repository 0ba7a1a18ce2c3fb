# tests/test_spectral.py
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slab_tbc.errors import ConfigurationError, ShapeError
from slab_tbc.services.spectral import (
    AS_PRINTED_WEIGHT,
    STANDARD_WEIGHT,
    LateralGrid,
    TangentialTrace,
    duality_pairing,
    forward_lateral,
    hermitian_defect,
    inverse_lateral,
    l2_norm_slab,
    trace_inequality_constant,
    trace_norm,
)


class TestLateralGrid:
    """Validación y mapa modo -> número de onda."""

    @pytest.mark.parametrize("kwargs", [
        dict(modes_x=6, modes_y=5),
        dict(modes_x=2, modes_y=8),
        dict(h1=0.0, h2=0.0),
        dict(nz=1),
    ])
    def test_invalid_grid_rejected(self, kwargs):
        base = dict(period_x=1.0, period_y=1.0, modes_x=8, modes_y=8, h1=1.0, h2=0.0, nz=4)
        base.update(kwargs)
        with pytest.raises(ConfigurationError):
            LateralGrid(**base)

    def test_mode_positions_are_bijective(self, grid):
        positions = {
            grid.mode_position(kx, ky)
            for kx in range(-grid.modes_x // 2, grid.modes_x // 2)
            for ky in range(-grid.modes_y // 2, grid.modes_y // 2)
        }
        assert len(positions) == grid.modes_x * grid.modes_y

    def test_mode_out_of_range(self, grid):
        with pytest.raises(ShapeError):
            grid.mode_position(grid.modes_x // 2, 0)

    def test_wavenumber(self):
        g = LateralGrid(2.0, 4.0, 8, 8, 1.0, 0.0, 4)
        assert g.mode_wavenumber(1, -2) == pytest.approx((np.pi, -np.pi))


class TestTransforms:
    def test_constant_field_lives_in_zero_mode(self, grid):
        coeffs = forward_lateral(np.ones(grid.lateral_shape), grid)
        assert coeffs[0, 0] == pytest.approx(np.sqrt(grid.period_x * grid.period_y))
        coeffs[0, 0] = 0.0
        assert np.max(np.abs(coeffs)) < 1e-13

    def test_pure_mode(self, grid):
        x = grid.x[:, None] * np.ones(grid.lateral_shape)
        u = np.exp(1j * 2 * np.pi * x / grid.period_x)
        coeffs = forward_lateral(u, grid)
        mask = np.ones(grid.lateral_shape, bool)
        mask[grid.mode_position(1, 0)] = False
        assert abs(coeffs[grid.mode_position(1, 0)]) > 0.1
        assert np.max(np.abs(coeffs[mask])) < 1e-13

    def test_matches_direct_dft(self, grid):
        rng = np.random.default_rng(3)
        u = rng.standard_normal(grid.lateral_shape)
        i = np.arange(grid.modes_x)
        j = np.arange(grid.modes_y)
        ex = np.exp(-2j * np.pi * np.outer(i, i) / grid.modes_x)
        ey = np.exp(-2j * np.pi * np.outer(j, j) / grid.modes_y)
        direct = ex @ u @ ey.T * np.sqrt(grid.area_element) / np.sqrt(u.size)
        assert np.allclose(forward_lateral(u, grid), direct, rtol=0, atol=1e-13)

    def test_inverse_recovers_samples(self, grid):
        rng = np.random.default_rng(4)
        u = rng.standard_normal(grid.lateral_shape) + 1j * rng.standard_normal(grid.lateral_shape)
        back = inverse_lateral(forward_lateral(u, grid), grid)
        assert np.max(np.abs(back - u)) / np.max(np.abs(u)) < 1e-13

    def test_real_field_is_hermitian(self, grid):
        rng = np.random.default_rng(5)
        coeffs = forward_lateral(rng.standard_normal(grid.lateral_shape), grid)
        assert hermitian_defect(coeffs, grid) < 1e-13

    def test_shape_mismatch(self, grid):
        with pytest.raises(ShapeError):
            forward_lateral(np.ones((4, 8)), grid)


class TestNorms:
    def test_parseval(self, grid):
        rng = np.random.default_rng(6)
        u = rng.standard_normal((3, *grid.node_shape))
        phys = l2_norm_slab(u, grid)
        spec = l2_norm_slab(u, grid, method="spectral")
        assert spec == pytest.approx(phys, rel=1e-12)

    def test_unit_field_norm_is_volume(self, grid):
        assert l2_norm_slab(np.ones(grid.node_shape), grid) == pytest.approx(np.sqrt(grid.volume), rel=1e-12)

    def test_trace_inequality_constant(self):
        thin = LateralGrid(1.0, 1.0, 4, 4, 0.5, 0.0, 4)
        thick = LateralGrid(1.0, 1.0, 4, 4, 3.0, 0.0, 4)
        assert trace_inequality_constant(thin) == pytest.approx(np.sqrt(3.0))
        assert trace_inequality_constant(thick) == pytest.approx(np.sqrt(2.0))

    def test_unknown_trace_kind(self, grid):
        with pytest.raises(ValueError):
            trace_norm(TangentialTrace.zeros(grid, 1), "grad")


class TestDuality:
    """|<u, v>| <= ||u||_div ||v||_curl con el peso estándar."""

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_pairing_bounded_by_norms(self, seed):
        g = LateralGrid(1.0, 2.0, 4, 6, 1.0, 0.0, 2)
        rng = np.random.default_rng(seed)
        shape = (2, *g.lateral_shape)
        u = TangentialTrace(g, 1, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        v = TangentialTrace(g, 1, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        bound = trace_norm(u, "div_minus_half") * trace_norm(v, "curl_minus_half")
        assert abs(duality_pairing(u, v)) <= bound * (1 + 1e-12)

    def test_physical_matches_spectral(self, grid):
        rng = np.random.default_rng(7)
        shape = (2, *grid.lateral_shape)
        u = TangentialTrace(grid, 2, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        v = TangentialTrace(grid, 2, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        p = duality_pairing(u, v)
        assert abs(p - duality_pairing(u, v, method="physical")) <= 1e-12 * abs(p)

    def test_incompatible_traces(self, grid):
        with pytest.raises(ShapeError):
            duality_pairing(TangentialTrace.zeros(grid, 1), TangentialTrace.zeros(grid, 2))

    def test_presets_differ(self, grid):
        rng = np.random.default_rng(8)
        u = TangentialTrace(grid, 1, rng.standard_normal((2, *grid.lateral_shape)))
        assert trace_norm(u, "curl_minus_half", STANDARD_WEIGHT) < trace_norm(u, "curl_minus_half", AS_PRINTED_WEIGHT)

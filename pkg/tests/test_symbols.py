# tests/test_symbols.py
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slab_tbc.errors import ConfigurationError, DegenerateConstantError, InvalidFrequencyError
from slab_tbc.services.spectral import TangentialTrace
from slab_tbc.services.symbols import (
    ComplexFrequency,
    ExteriorMedium,
    apply_capacity,
    beta,
    beta_identities,
    capacity_array,
    continuity_constant,
    hermitian_min_eigenvalue,
    positivity_margin,
    symbol_bound_audit,
    symbol_set,
)

xi_values = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)
s1_values = st.floats(min_value=0.1, max_value=10.0)
s2_values = st.floats(min_value=-10.0, max_value=10.0)


class TestFrequencyAndMedium:
    @pytest.mark.parametrize("s1", [0.0, -1.0, np.inf])
    def test_nonpositive_real_part(self, s1):
        with pytest.raises(InvalidFrequencyError):
            ComplexFrequency(s1, 1.0)

    def test_array_with_nonpositive_real_part(self):
        with pytest.raises(InvalidFrequencyError):
            capacity_array((0.0, 0.0), np.array([1 + 1j, -1 + 1j]), ExteriorMedium(1.0, 1.0))

    @pytest.mark.parametrize("kwargs", [dict(eps=0.0, mu=1.0), dict(eps=1.0, mu=-2.0), dict(eps=1.0, mu=1.0, side=3)])
    def test_invalid_exterior(self, kwargs):
        with pytest.raises(ConfigurationError):
            ExteriorMedium(**kwargs)


class TestCapacitySymbol:
    """Forma cerrada del símbolo y su equivalencia entre las dos escrituras."""

    def test_zero_mode_is_impedance(self):
        medium = ExteriorMedium(4.0, 1.0)
        m = capacity_array((0.0, 0.0), 0.7 + 2.0j, medium)
        assert np.allclose(m, medium.impedance * np.eye(2), atol=1e-14)

    def test_beta_has_positive_real_part(self):
        xi1 = np.linspace(-20, 20, 41)
        b = beta((xi1, 0.0 * xi1), 0.01 + 30j, ExteriorMedium(2.0, 1.5))
        assert np.all(b.real > 0)

    @settings(max_examples=60, deadline=None)
    @given(xi1=xi_values, xi2=xi_values, s1=s1_values, s2=s2_values)
    def test_both_forms_agree(self, xi1, xi2, s1, s2):
        medium = ExteriorMedium(1.5, 0.8)
        s = complex(s1, s2)
        a = capacity_array((xi1, xi2), s, medium, form="co1")
        b = capacity_array((xi1, xi2), s, medium, form="co2")
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12 * np.max(np.abs(b)))

    @settings(max_examples=60, deadline=None)
    @given(xi1=xi_values, xi2=xi_values, s1=s1_values, s2=s2_values)
    def test_hermitian_part_nonnegative(self, xi1, xi2, s1, s2):
        m = capacity_array((xi1, xi2), complex(s1, s2), ExteriorMedium(1.0, 1.0))
        assert hermitian_min_eigenvalue(m) >= -1e-10 * np.max(np.abs(m))

    @settings(max_examples=40, deadline=None)
    @given(xi1=xi_values, xi2=xi_values, s1=s1_values, s2=s2_values)
    def test_beta_identities(self, xi1, xi2, s1, s2):
        r2, r3 = beta_identities((xi1, xi2), complex(s1, s2), ExteriorMedium(2.0, 1.0))
        assert r2 < 1e-12 and r3 < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(xi1=xi_values, xi2=xi_values, s1=s1_values, s2=s2_values)
    def test_beta_conjugation_symmetry(self, xi1, xi2, s1, s2):
        medium = ExteriorMedium(2.0, 1.5)
        s = complex(s1, s2)
        b = beta((xi1, xi2), s, medium)
        assert np.allclose(beta((xi1, xi2), s.conjugate(), medium), np.conj(b), rtol=1e-14, atol=0.0)

    @settings(max_examples=40, deadline=None)
    @given(xi1=xi_values, xi2=xi_values, s1=s1_values, s2=s2_values)
    def test_symbol_conjugation_symmetry(self, xi1, xi2, s1, s2):
        medium = ExteriorMedium(1.0, 1.0)
        s = complex(s1, s2)
        m = capacity_array((xi1, xi2), s, medium)
        assert np.allclose(capacity_array((xi1, xi2), s.conjugate(), medium), np.conj(m),
                           rtol=1e-12, atol=1e-14 * np.max(np.abs(m)))

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            capacity_array((0.0, 0.0), 1.0, ExteriorMedium(1.0, 1.0), form="co3")


class TestOnGrid:
    def test_apply_matches_per_mode_product(self, grid):
        rng = np.random.default_rng(1)
        medium = ExteriorMedium(1.0, 1.0, 2)
        tr = TangentialTrace(grid, 2, rng.standard_normal((2, *grid.lateral_shape)))
        sym = symbol_set(grid, 1 + 2j, medium)
        out = apply_capacity(sym, tr)
        i, j = grid.mode_position(1, -2)
        assert np.allclose(out.coeffs[:, i, j], sym.matrix[i, j] @ tr.coeffs[:, i, j])

    def test_positivity_margin_nonnegative(self, grid):
        rng = np.random.default_rng(2)
        shape = (2, *grid.lateral_shape)
        tr = TangentialTrace(grid, 1, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        assert positivity_margin(tr, 0.05 + 40j, ExteriorMedium(1.0, 1.0)) >= 0.0


class TestContinuity:
    def test_degenerate_for_real_frequency(self):
        with pytest.raises(DegenerateConstantError):
            continuity_constant(2.0, ExteriorMedium(1.0, 1.0))

    def test_constant_positive_and_finite(self):
        c = continuity_constant(1 + 1j, ExteriorMedium(1.0, 1.0))
        assert np.isfinite(c) and c > 0


class TestAudit:
    def test_bounds_hold(self):
        audit = symbol_bound_audit(500, 11, ExteriorMedium(1.0, 1.0))
        assert audit.min_positivity_margin >= -1e-12
        assert audit.max_continuity_ratio <= 1.0 + 1e-9
        assert audit.max_f_ratio <= 1.0 + 1e-12
        assert {c["why"] for c in audit.worst_case_inputs} == {
            "min_positivity_margin", "max_continuity_ratio", "max_f_ratio"}

    def test_deterministic_for_seed(self):
        medium = ExteriorMedium(2.0, 1.0)
        assert symbol_bound_audit(100, 3, medium).as_dict() == symbol_bound_audit(100, 3, medium).as_dict()

    def test_requires_samples(self):
        with pytest.raises(ValueError):
            symbol_bound_audit(0, 0, ExteriorMedium(1.0, 1.0))

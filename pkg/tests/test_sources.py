# tests/test_sources.py
import numpy as np
import pytest

from slab_tbc.errors import ConfigurationError, DataError
from slab_tbc.services import sources
from slab_tbc.services.stepper import SlabMedium


class TestWaveforms:
    def test_sine_squared_vanishes_at_start(self):
        f = sources.SineSquaredPulse(duration=2.0)
        assert f(0.0) == 0.0
        assert f(1.0) == pytest.approx(1.0)
        assert f(2.5) == 0.0

    def test_delay_shifts_pulse(self):
        f = sources.SineSquaredPulse(duration=1.0, delay=0.5)
        assert f(0.5) == 0.0 and f(1.0) == pytest.approx(1.0)

    def test_gaussian_does_not_vanish(self):
        assert sources.GaussianEnvelope(center=0.5, width=0.5)(0.0) > 0

    def test_from_spec(self):
        assert sources.waveform_from_spec("constant", value=2.0)(3.0) == 2.0
        assert isinstance(sources.waveform_from_spec("sin2", duration=1.0), sources.SineSquaredPulse)
        with pytest.raises(ConfigurationError):
            sources.waveform_from_spec("square")


class TestSpatialSources:
    def test_plane_pulse_impedance(self, grid):
        med = SlabMedium.uniform(grid, eps=4.0)
        src = sources.plane_pulse(med, (0.5, 0.5, 0.5), (0.3, 0.3, 0.2))
        # eta = 1/2: H ~ 2 E (muestreados en posiciones escalonadas)
        assert np.max(src.h0[1]) == pytest.approx(2.0 * np.max(src.e0[0]), rel=0.1)
        assert not np.any(src.e0[1]) and not np.any(src.e0[2])

    def test_plane_pulse_rejects_bad_options(self, medium):
        with pytest.raises(ConfigurationError):
            sources.plane_pulse(medium, (0.5, 0.5, 0.5), (0.3, 0.3, 0.2), polarization="z")
        with pytest.raises(ConfigurationError):
            sources.plane_pulse(medium, (0.5, 0.5, 0.5), (0.3, 0.3, 0.2), direction="left")

    def test_current_pulse_support(self, grid):
        src = sources.current_pulse(grid, (0.5, 0.5, 0.5), (0.2, 0.2, 0.2), sources.SineSquaredPulse(1.0))
        src.check_support()
        assert src.has_current and src.h1_compliant
        assert src.j0() is not None and not np.any(src.j0()[0])

    def test_constant_current_is_not_compliant(self, grid):
        src = sources.current_pulse(grid, (0.5, 0.5, 0.5), (0.2, 0.2, 0.2), sources.Constant())
        assert not src.h1_compliant

    def test_support_outside_slab(self, grid):
        src = sources.current_pulse(grid, (0.5, 0.5, 0.1), (0.2, 0.2, 0.2), sources.Constant())
        with pytest.raises(DataError):
            src.check_support()

    def test_mode_current_profile_length(self, grid):
        f = sources.SineSquaredPulse(1.0)
        with pytest.raises(ConfigurationError):
            sources.mode_current(grid, (1, 0), np.ones(grid.nz), f)
        src = sources.mode_current(grid, (0, 0), sources.z_bump(grid, 0.5, 0.25), f, support_z=(0.25, 0.75))
        src.check_support()


class TestCombine:
    def test_sum_and_support(self, grid, medium):
        f = sources.SineSquaredPulse(1.0)
        a = sources.plane_pulse(medium, (0.5, 0.5, 0.4), (0.3, 0.3, 0.1))
        b = sources.current_pulse(grid, (0.5, 0.5, 0.6), (0.2, 0.2, 0.1), f)
        both = sources.combine(a, b)
        assert both.waveform is f
        assert both.support[4] == pytest.approx(0.3) and both.support[5] == pytest.approx(0.7)
        assert np.allclose(both.e0[0], a.e0[0])

    def test_distinct_waveforms_rejected(self, grid):
        a = sources.current_pulse(grid, (0.5, 0.5, 0.5), (0.2, 0.2, 0.2), sources.SineSquaredPulse(1.0))
        b = sources.current_pulse(grid, (0.5, 0.5, 0.5), (0.2, 0.2, 0.2), sources.SineSquaredPulse(2.0))
        with pytest.raises(ConfigurationError):
            sources.combine(a, b)

    def test_equal_waveforms_combine(self, grid):
        a = sources.current_pulse(grid, (0.5, 0.5, 0.4), (0.2, 0.2, 0.1), sources.SineSquaredPulse(1.0))
        b = sources.current_pulse(grid, (0.5, 0.5, 0.6), (0.2, 0.2, 0.1), sources.SineSquaredPulse(1.0))
        both = sources.combine(a, b)
        assert both.waveform == sources.SineSquaredPulse(1.0)
        assert np.allclose(both.j_shape[0], a.j_shape[0] + b.j_shape[0])

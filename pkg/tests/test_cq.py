# tests/test_cq.py
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slab_tbc.errors import KernelTooShortError, ParameterError
from slab_tbc.services import cq
from slab_tbc.services.spectral import LateralGrid, forward_lateral, inverse_lateral
from slab_tbc.services.symbols import ExteriorMedium


class TestWeights:
    """Pesos CQ frente a símbolos con pesos conocidos."""

    @pytest.mark.parametrize("generator", ["BDF1", "BDF2"])
    def test_integrator_symbol(self, generator):
        dt, n = 0.01, 64
        kern = cq.cq_weights(lambda s: 1.0 / s, dt, n, generator)
        ref = cq.integrator_weights(generator, dt, n)
        assert np.max(np.abs(kern.weights - ref)) < 1e-6 * dt

    def test_identity_symbol(self):
        kern = cq.cq_weights(lambda s: np.ones_like(s), 0.1, 16)
        assert kern.weights[0] == pytest.approx(1.0, abs=1e-10)
        assert np.max(np.abs(kern.weights[1:])) < 1e-10

    def test_bdf1_derivative(self):
        dt = 0.05
        kern = cq.cq_weights(lambda s: s, dt, 12, "BDF1")
        expected = np.zeros(13)
        expected[:2] = (1.0 / dt, -1.0 / dt)
        assert np.allclose(kern.weights, expected, atol=1e-6 / dt)

    def test_bdf2_first_weight_of_integrator(self):
        assert cq.integrator_weights("BDF2", 1.0, 0)[0] == pytest.approx(2.0 / 3.0)

    @pytest.mark.parametrize("kwargs", [
        dict(dt=0.0, horizon=4), dict(dt=0.1, horizon=-1), dict(dt=0.1, horizon=4, generator="RK4"),
        dict(dt=0.1, horizon=4, radius=1.5),
    ])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ParameterError):
            cq.cq_weights(lambda s: 1.0 / s, **kwargs)

    def test_capacity_kernel_shape_and_metadata(self, small_grid):
        kern = cq.capacity_kernel(small_grid, ExteriorMedium(1.0, 1.0, 1), 0.02, 8)
        assert kern.weights.shape == (9, 4, 4, 2, 2)
        meta = kern.metadata()
        assert meta["operator_kind"] == "T" and meta["mode_grid"]["side"] == 1
        assert meta["weights_shape"] == [9, 4, 4, 2, 2]

    def test_capacity_kernel_rejects_scalar(self, small_grid):
        with pytest.raises(ParameterError):
            cq.capacity_kernel(small_grid, ExteriorMedium(1.0, 1.0), 0.02, 8, operator_kind="scalar")


class TestConvolution:
    def test_direct_and_fft_agree(self, small_grid):
        kern = cq.capacity_kernel(small_grid, ExteriorMedium(1.0, 1.0), 0.02, 10)
        rng = np.random.default_rng(0)
        u = rng.standard_normal((11, 4, 4, 2))
        direct = cq.convolve_sequence(kern, u)
        fast = cq.convolve_sequence(kern, u, method="fft")
        assert np.allclose(direct, fast, atol=1e-12 * np.max(np.abs(direct)))

    def test_history_lagged_plus_current(self):
        kern = cq.cq_weights(lambda s: 1.0 / (s + 1.0), 0.1, 6)
        hist = cq.ConvolutionHistory(kern, ())
        u = np.linspace(1.0, 2.0, 7)
        for n, value in enumerate(u):
            hist.push(value)
            full = hist.lagged(n) + kern.weights[0] * value
            assert abs(full - cq.convolve(kern, u, n)) < 1e-12

    def test_past_horizon(self):
        kern = cq.cq_weights(lambda s: 1.0 / s, 0.1, 3)
        with pytest.raises(KernelTooShortError):
            cq.convolve(kern, np.ones(5), 4)
        hist = cq.ConvolutionHistory(kern, ())
        for _ in range(4):
            hist.push(1.0)
        with pytest.raises(KernelTooShortError):
            hist.push(1.0)


class TestInvariants:
    """Causalidad, cálculo operacional, núcleos reales y orden de consistencia."""

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(min_value=0, max_value=15), seed=st.integers(min_value=0, max_value=2**16))
    def test_causality(self, n, seed):
        kern = cq.cq_weights(lambda s: 1.0 / (s + 1.0), 0.1, 16)
        rng = np.random.default_rng(seed)
        u = rng.standard_normal(17)
        v = u.copy()
        v[n + 1:] = rng.standard_normal(16 - n)
        assert cq.convolve(kern, v, n) == cq.convolve(kern, u, n)
        y_u = cq.convolve_sequence(kern, u, method="fft")
        y_v = cq.convolve_sequence(kern, v, method="fft")
        assert np.allclose(y_u[: n + 1], y_v[: n + 1], rtol=0.0, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(min_value=1.0, max_value=4.0), b=st.floats(min_value=1.0, max_value=4.0),
           generator=st.sampled_from(["BDF1", "BDF2"]))
    def test_product_of_symbols(self, a, b, generator):
        dt, n = 0.1, 32
        w1 = cq.cq_weights(lambda s: 1.0 / (s + a), dt, n, generator).weights
        w2 = cq.cq_weights(lambda s: 1.0 / (s + b), dt, n, generator).weights
        w12 = cq.cq_weights(lambda s: 1.0 / ((s + a) * (s + b)), dt, n, generator).weights
        assert np.max(np.abs(w12 - np.convolve(w1, w2)[: n + 1])) < 1e-10

    def test_opposite_modes_are_conjugate(self, small_grid):
        kern = cq.capacity_kernel(small_grid, ExteriorMedium(1.0, 1.0), 0.02, 12)
        w = kern.weights
        nx, ny = small_grid.lateral_shape
        flipped = w[:, (-np.arange(nx)) % nx][:, :, (-np.arange(ny)) % ny]
        assert np.allclose(flipped, np.conj(w), rtol=0.0, atol=1e-10 * np.max(np.abs(w)))

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**16))
    def test_real_history_stays_real(self, seed):
        small_grid = LateralGrid(1.0, 1.0, 4, 4, 1.0, 0.0, 16)
        kern = cq.capacity_kernel(small_grid, ExteriorMedium(2.0, 1.0), 0.02, 10)
        rng = np.random.default_rng(seed)
        physical = rng.standard_normal((11, 2, *small_grid.lateral_shape))
        u = np.moveaxis(forward_lateral(physical, small_grid), 1, -1)
        y = cq.convolve_sequence(kern, u)
        back = inverse_lateral(np.moveaxis(y, -1, 1), small_grid)
        assert np.max(np.abs(back.imag)) <= 1e-10 * np.max(np.abs(back))

    @pytest.mark.parametrize("generator, expected", [("BDF1", 1.0), ("BDF2", 2.0)])
    def test_consistency_order(self, generator, expected):
        # 1/s^2 aplicado a sin(t): t - sin(t)
        t_end = 1.0
        errors = []
        steps = (40, 80, 160)
        for n in steps:
            dt = t_end / n
            kern = cq.cq_weights(lambda s: 1.0 / s**2, dt, n, generator)
            f = np.sin(dt * np.arange(n + 1))
            approx = cq.convolve(kern, f, n).real
            errors.append(abs(approx - (t_end - np.sin(t_end))))
        order = -np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert abs(order - expected) <= 0.15


class TestLaplace:
    def test_constant_signal(self):
        t_end, dt = 2.0, 0.01
        sig = cq.TimeSignal(dt, np.ones(int(round(t_end / dt)) + 1))
        for s in (1.0 + 0j, 0.5 + 3j):
            exact = (1.0 - np.exp(-s * t_end)) / s
            assert abs(cq.laplace_transform(sig, s) - exact) < 1e-12

    def test_parseval_zero_signal(self):
        z = cq.TimeSignal(0.1, np.zeros(10))
        assert cq.parseval_residual(z, z, 1.0).residual == 0.0

    def test_parseval_requires_positive_s1(self):
        u = cq.TimeSignal(0.1, np.ones(5))
        with pytest.raises(ParameterError):
            cq.parseval_residual(u, u, 0.0)


class TestPassivity:
    @pytest.mark.parametrize("generator", ["BDF1", "BDF2"])
    def test_certificate_nonnegative(self, small_grid, generator):
        kern = cq.capacity_kernel(small_grid, ExteriorMedium(1.0, 1.0), 0.02, 16, generator, operator_kind="C")
        assert cq.passivity_certificate(kern, trials=5, seed=0) >= -1e-10

    def test_requires_c_kernel(self, small_grid):
        kern = cq.capacity_kernel(small_grid, ExteriorMedium(1.0, 1.0), 0.02, 4)
        with pytest.raises(ParameterError):
            cq.passivity_certificate(kern, trials=1, seed=0)

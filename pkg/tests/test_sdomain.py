# tests/test_sdomain.py
import numpy as np
import pytest

from slab_tbc.errors import ConfigurationError, DomainError, InvalidFrequencyError, UndefinedRatioError
from slab_tbc.services import sdomain, verify
from slab_tbc.services.symbols import ExteriorMedium
from slab_tbc.services.verify import closed_form_order


def _bump_source(nz: int) -> sdomain.ModeVector:
    z = np.arange(nz + 1) / nz
    zh = (np.arange(nz) + 0.5) / nz
    bump = np.exp(-((z - 0.5) / 0.1) ** 2).astype(complex)
    return sdomain.ModeVector(bump, 0.5 * bump, 0.25 * np.exp(-((zh - 0.5) / 0.1) ** 2).astype(complex))


@pytest.fixture
def profile():
    return sdomain.LayeredProfile.homogeneous(1.0, 0.0)


class TestLayeredProfile:
    def test_homogeneous_edges(self, profile):
        assert (profile.h2, profile.h1) == (0.0, 1.0)
        assert profile.exterior(1) == ExteriorMedium(1.0, 1.0, 1)
        assert profile.exterior(2).side == 2

    @pytest.mark.parametrize("kwargs", [
        dict(breakpoints=(1.0, 0.0), eps=(1.0,), mu=(1.0,)),
        dict(breakpoints=(0.0, 0.5, 1.0), eps=(1.0,), mu=(1.0, 1.0)),
        dict(breakpoints=(0.0, 1.0), eps=(-1.0,), mu=(1.0,)),
        dict(breakpoints=(0.0, 1.0), eps=(5.0,), mu=(1.0,), eps_bounds=(1.0, 4.0)),
    ])
    def test_rejects_invalid_layers(self, kwargs):
        with pytest.raises(ConfigurationError):
            sdomain.LayeredProfile(**kwargs)

    def test_staggered_samples_two_layers(self):
        prof = sdomain.LayeredProfile((0.0, 0.5, 1.0), (1.0, 4.0), (1.0, 1.0))
        m = prof.staggered_samples(4)
        # el nodo z = 0.5 promedia ambas capas por igual
        assert m["eps_node"][2] == pytest.approx(2.5)
        assert m["eps_half"][0] == pytest.approx(1.0)
        assert m["eps_half"][-1] == pytest.approx(4.0)
        assert np.allclose(m["mu_half"], 1.0) and np.allclose(m["mu_node"], 1.0)


class TestSolveMode:
    def test_closed_form_order(self):
        order, errors = closed_form_order(nzs=(64, 128, 256, 512))
        low, high = verify.tolerances("auxiliary-stability")["closed_form_order"]
        assert low <= order <= high
        assert (low, high) == (1.9, 2.1)
        assert errors == sorted(errors, reverse=True)

    @pytest.mark.parametrize("xi", [(0.0, 0.0), (1.0, 0.0), (2.0, -1.0)])
    def test_tbc_solution_is_consistent(self, profile, xi):
        src = _bump_source(32)
        sol = sdomain.solve_mode(xi, 1 + 1j, profile, 32, src)
        assert sol.residual < 1e-10
        assert sdomain.coercivity_margin(sol) >= -1e-10
        assert sdomain.weak_form_defect(sol, src) < 1e-8

    def test_pec_walls_hold(self, profile):
        sol = sdomain.solve_mode((1.0, 0.0), 1 + 1j, profile, 16, _bump_source(16), closure="pec")
        for k in (0, 16):
            assert sol.u.u1[k] == 0 and sol.u.u2[k] == 0
        assert sol.boundary_pairing == 0

    def test_ratio_is_homogeneous(self, profile):
        src = _bump_source(32)
        one = sdomain.solve_mode((1.0, 0.0), 1 + 1j, profile, 32, src)
        two = sdomain.solve_mode((1.0, 0.0), 1 + 1j, profile, 32, src.scaled(2.0))
        assert sdomain.theorem_at_check(one, src, 1 + 1j) == pytest.approx(
            sdomain.theorem_at_check(two, src.scaled(2.0), 1 + 1j), rel=1e-10)

    def test_zero_source_gives_zero_and_undefined_ratio(self, profile):
        src = sdomain.ModeVector.zeros(8)
        sol = sdomain.solve_mode((1.0, 0.0), 1.0, profile, 8, src)
        assert not np.any(sol.u.stacked())
        with pytest.raises(UndefinedRatioError):
            sdomain.theorem_at_check(sol, src, 1.0)

    def test_rejects_bad_inputs(self, profile):
        with pytest.raises(ConfigurationError):
            sdomain.solve_mode((0.0, 0.0), 1.0, profile, 8, sdomain.ModeVector.zeros(7))
        with pytest.raises(ConfigurationError):
            sdomain.solve_mode((0.0, 0.0), 1.0, profile, 8, _bump_source(8), closure="abc")
        with pytest.raises(InvalidFrequencyError):
            sdomain.solve_mode((0.0, 0.0), -1.0 + 1j, profile, 8, _bump_source(8))

    def test_pec_source_without_curl(self, profile):
        e0 = _bump_source(8)
        j = sdomain.pec_source(profile, 8, e0, sdomain.ModeVector.zeros(8), 1 + 1j)
        assert np.allclose(j.stacked(), e0.stacked())


class TestExterior:
    def test_outgoing_extension(self):
        above = ExteriorMedium(1.0, 1.0, 1)
        assert sdomain.outgoing_extension(2.0, (0.0, 0.0), 1.0, above, 1.0, 1.0, 0.0) == pytest.approx(2.0)
        far = sdomain.outgoing_extension(1.0, (0.0, 0.0), 1.0, above, 3.0, 1.0, 0.0)
        assert abs(far) == pytest.approx(np.exp(-2.0))

    @pytest.mark.parametrize("side, z", [(1, 0.5), (2, 0.5)])
    def test_inside_slab_is_rejected(self, side, z):
        with pytest.raises(DomainError):
            sdomain.outgoing_extension(1.0, (0.0, 0.0), 1.0, ExteriorMedium(1.0, 1.0, side), z, 1.0, 0.0)

    def test_point_source_is_symmetric(self):
        z = np.array([0.3, 0.7])
        vals = sdomain.point_source_solution(z, 0.5, 1 + 1j, 1.0, 1.0)
        assert vals[0] == pytest.approx(vals[1])
        assert sdomain.point_source_solution(0.5, 0.5, 2.0, 1.0, 1.0) == pytest.approx(0.5)

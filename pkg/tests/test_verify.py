# tests/test_verify.py
import json

import numpy as np
import pytest

from slab_tbc.errors import ConfigurationError
from slab_tbc.services import verify
from slab_tbc.services.spectral import LateralGrid


class TestTolerances:
    def test_desk_relaxes_continuum_drift(self):
        assert verify.tolerances("pec-energy", "desk")["continuum_drift"] == 1e-2
        assert verify.tolerances("pec-energy", "reference")["continuum_drift"] == 1e-3

    def test_base_table_is_not_mutated(self):
        verify.tolerances("oracle-agreement", "desk")
        assert verify.TOLERANCES["oracle-agreement"]["relative_mismatch"] == 1e-3

    @pytest.mark.parametrize("scale", sorted(verify.SCALES))
    def test_order_ranges_are_scale_independent(self, scale):
        assert verify.tolerances("oracle-agreement", scale)["order"] == (1.8, 2.1)
        assert verify.tolerances("auxiliary-stability", scale)["closed_form_order"] == (1.9, 2.1)
        assert verify.tolerances("tbc-reflection", scale)["order"] == (1.8, 2.1)

    def test_reflection_relaxed_only_on_desk_grid(self):
        assert verify.tolerances("tbc-reflection", "reference")["relative_mismatch"] == 1e-3
        assert verify.tolerances("tbc-reflection", "reference")["reflection"] == 1e-3
        assert verify.tolerances("tbc-reflection", "desk")["relative_mismatch"] == 2e-2


class TestReflection:
    def test_refined_grid_doubles_nz_only(self):
        grid = LateralGrid(1.0, 1.0, 4, 4, 1.0, 0.0, 16)
        fine = verify.refined(grid)
        assert fine.nz == 32
        assert (fine.modes_x, fine.modes_y, fine.h1, fine.h2) == (4, 4, 1.0, 0.0)

    def test_explicit_dt_above_limit(self):
        grid = LateralGrid(1.0, 1.0, 4, 4, 1.0, 0.0, 16)
        with pytest.raises(ConfigurationError):
            verify.reflection_study(grid, dt=1.0)

    @pytest.mark.parametrize("fine_mismatch, status", [(1e-3, "pass"), (3e-3, "fail")])
    def test_order_from_refinement(self, monkeypatch, fine_mismatch, status):
        calls = []

        def study(grid, generator="BDF2", dt=None, **kwargs):
            calls.append((grid.nz, dt))
            m = 4e-3 if dt is None else fine_mismatch
            return {"relative_mismatch": m, "reflection": 1e-4, "pec_mismatch": 1.0, "steps": 10, "dt": 0.02}

        monkeypatch.setattr(verify, "reflection_study", study)
        result = verify.check_tbc_reflection()
        nz = verify.SCALES["desk"]["nz"]
        assert calls == [(nz, None), (2 * nz, 0.01)]
        assert result.measured["order"] == pytest.approx(np.log2(4e-3 / fine_mismatch))
        assert result.status == status


class TestChecks:
    def test_duality_passes(self):
        result = verify.check_duality(grid=LateralGrid(1.0, 1.0, 4, 4, 1.0, 0.0, 8), n_pairs=20)
        assert result.status == "pass"
        assert result.measured["max_ratio"] <= 1.0 + 1e-12

    def test_duality_is_reproducible(self):
        grid = LateralGrid(1.0, 1.0, 4, 4, 1.0, 0.0, 8)
        a = verify.check_duality(seed=3, grid=grid, n_pairs=5)
        b = verify.check_duality(seed=3, grid=grid, n_pairs=5)
        assert a.measured == b.measured

    def test_positivity_passes(self):
        assert verify.check_positivity(n_samples=100).status == "pass"

    def test_continuity_degenerate_on_real_axis(self):
        result = verify.check_continuity(s=2.0)
        assert result.status == "degenerate"
        assert "reason" in result.measured

    def test_result_is_json_serializable(self):
        result = verify.check_continuity(s=2.0)
        json.dumps(result.as_dict())

    def test_non_finite_measurements_are_strict_json(self):
        result = verify.CheckResult("tbc-reflection", "fail", {"order": float("nan")}, {"order": (1.8, 2.1)})
        payload = result.as_dict()
        assert payload["measured"]["order"] == "nan"
        assert payload["tolerances"]["order"] == [1.8, 2.1]
        json.dumps(payload, allow_nan=False)


class TestRunCheck:
    @pytest.mark.parametrize("check_id", sorted(verify.OUT_OF_SCOPE))
    def test_out_of_scope(self, check_id):
        result = verify.run_check(check_id)
        assert result.status == "out-of-scope"
        assert result.measured["reason"]

    def test_unknown_check(self):
        with pytest.raises(ValueError, match="desconocido"):
            verify.run_check("no-such-check")

    def test_suite_subset(self):
        report = verify.run_suite(["density", "laplace-causality"], seed=1, threads=2)
        assert [r.check_id for r in report.results] == ["density", "laplace-causality"]
        assert report.exit_code == 0
        assert report.as_dict()["seed"] == 1


class TestSuiteReport:
    def test_exit_code(self):
        ok = verify.CheckResult("a", "pass")
        deg = verify.CheckResult("b", "degenerate")
        bad = verify.CheckResult("c", "fail")
        assert verify.SuiteReport([ok, deg], 0, "desk", verify.STANDARD_WEIGHT).exit_code == 0
        assert verify.SuiteReport([ok, bad], 0, "desk", verify.STANDARD_WEIGHT).exit_code == 1

    def test_summary_table(self):
        assert verify.summary_table([]) == "<< vacío >>"
        table = verify.summary_table([verify.CheckResult("duality", "pass", seed=0)])
        lines = table.splitlines()
        assert lines[0].startswith("+-") and "duality" in lines[3]

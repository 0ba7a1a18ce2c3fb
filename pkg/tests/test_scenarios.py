# tests/test_scenarios.py
import json

import numpy as np
import pytest

from slab_tbc.errors import ConfigurationError, DataError
from slab_tbc.services import scenarios

GRID = {"period_x": 1.0, "period_y": 1.0, "modes_x": 4, "modes_y": 4, "nz": 16}
MEDIUM = {"breakpoints": [0.0, 1.0], "eps": [1.0], "mu": [1.0]}
PULSE = {"center": [0.5, 0.5, 0.5], "width": [0.3, 0.3, 0.2]}


def _config(**overrides) -> dict:
    cfg = {"scenario": "pec-energy", "grid": GRID, "medium": MEDIUM, "source": {"initial": PULSE},
           "cfl": 0.5, "horizon": 0.3}
    cfg.update(overrides)
    return {k: v for k, v in cfg.items() if v is not None}


def _parse(base_dir=None, **overrides) -> scenarios.RunConfig:
    return scenarios.parse(json.dumps(_config(**overrides)), base_dir=base_dir)


class TestParse:
    def test_valid_config(self):
        cfg = _parse()
        assert cfg.scenario == "pec-energy" and cfg.generator == "BDF2" and cfg.seeds == [0]

    def test_invalid_json(self):
        with pytest.raises(ConfigurationError) as exc:
            scenarios.parse("{not json")
        assert exc.value.diagnostics[0]["field"] == "config"

    def test_unknown_field_is_reported(self):
        with pytest.raises(ConfigurationError) as exc:
            _parse(colour="red")
        assert any(d["field"] == "colour" for d in exc.value.diagnostics)

    def test_missing_required_for_scenario(self):
        with pytest.raises(ConfigurationError, match="horizon"):
            _parse(horizon=None)

    @pytest.mark.parametrize("step", [{"dt": 0.01}, {"cfl": None}])
    def test_dt_and_cfl_are_exclusive(self, step):
        with pytest.raises(ConfigurationError):
            _parse(**step)

    def test_odd_modes_rejected(self):
        with pytest.raises(ConfigurationError):
            _parse(grid={**GRID, "modes_x": 5})

    def test_unknown_check(self):
        with pytest.raises(ConfigurationError):
            scenarios.parse(json.dumps({"scenario": "lemma-suite", "checks": ["no-such-check"]}))

    def test_hash_ignores_out(self):
        assert _parse(out="a").hash() == _parse(out="b").hash()
        assert _parse(horizon=0.3).hash() != _parse(horizon=0.4).hash()


class TestParsePreconditions:
    def test_cfl_above_one(self):
        with pytest.raises(ConfigurationError) as exc:
            _parse(cfl=1.5)
        assert exc.value.diagnostics[0]["field"] == "cfl"

    def test_dt_above_limit(self):
        with pytest.raises(ConfigurationError) as exc:
            _parse(cfl=None, dt=1.0)
        assert exc.value.field == "dt"
        assert exc.value.diagnostics == [exc.value.as_dict()]

    def test_current_must_vanish_at_start(self):
        current = {**PULSE, "width": [0.2, 0.2, 0.2], "temporal": {"kind": "constant"}}
        with pytest.raises(DataError) as exc:
            _parse(scenario="apriori-sweep", source={"current": current})
        assert exc.value.diagnostics[0]["error"] == "DataError"

    def test_constant_current_allowed_without_tbc(self):
        current = {**PULSE, "width": [0.2, 0.2, 0.2], "temporal": {"kind": "constant"}}
        assert _parse(source={"current": current}).source.current is not None

    def test_bad_temporal_params(self):
        current = {**PULSE, "temporal": {"kind": "sin2", "params": {"period": 1.0}}}
        with pytest.raises(ConfigurationError):
            _parse(source={"current": current})

    def test_reflection_needs_homogeneous_medium(self):
        layered = {"breakpoints": [0.0, 0.5, 1.0], "eps": [1.0, 1.0], "mu": [1.0, 1.0]}
        with pytest.raises(ConfigurationError):
            _parse(scenario="tbc-reflection", medium=layered)

    def test_source_outside_slab(self):
        with pytest.raises(DataError):
            _parse(source={"initial": {**PULSE, "center": [0.5, 0.5, 0.9]}})

    def test_missing_sampled_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            _parse(base_dir=tmp_path, medium={"sampled_file": "nope.npz"})

    def test_load_resolves_medium_next_to_config(self, tmp_path):
        np.savez(tmp_path / "medium.npz", z=np.array([0.0, 0.4, 1.0]), eps=np.array([1.0, 2.0]),
                 mu=np.array([1.0, 1.0]))
        path = tmp_path / "run.json"
        path.write_text(json.dumps(_config(medium={"sampled_file": "medium.npz"})), encoding="utf-8")
        assert scenarios.load(path).medium.sampled_file == "medium.npz"


class TestPrepare:
    def test_steps_from_cfl(self):
        prep = scenarios.prepare(_parse())
        assert prep.dt == pytest.approx(0.5 * prep.medium.dt_max())
        assert prep.steps == int(round(0.3 / prep.dt))

    def test_cfl_guard_on_copied_config(self):
        cfg = _parse().model_copy(update={"cfl": 1.5})
        with pytest.raises(ConfigurationError):
            scenarios.prepare(cfg)

    def test_sampled_medium(self, tmp_path):
        np.savez(tmp_path / "medium.npz", z=np.array([0.0, 0.4, 1.0]), eps=np.array([1.0, 2.0]),
                 mu=np.array([1.0, 1.0]))
        cfg = _parse(base_dir=tmp_path, medium={"sampled_file": "medium.npz"})
        prep = scenarios.prepare(cfg, base_dir=tmp_path)
        assert prep.profile.eps == (1.0, 2.0)


class TestExecute:
    def test_pec_energy_artifacts(self, tmp_path):
        outcome = scenarios.execute(_parse(snapshot_every=5), tmp_path)
        assert outcome.out_dir.name == f"pec-energy-{outcome.config_hash[:12]}"
        for name in ("energy.csv", "summary.json", "timing.json", "snapshot_000005.bin"):
            assert (outcome.out_dir / name).exists()
        summary = json.loads((outcome.out_dir / "summary.json").read_text(encoding="utf-8"))
        assert summary["exit_code"] == outcome.exit_code
        assert summary["checks"][0]["check_id"] == "pec-energy"
        assert "wall_clock_seconds" not in summary

    def test_summary_is_reproducible(self, tmp_path):
        a = scenarios.execute(_parse(), tmp_path / "a")
        b = scenarios.execute(_parse(), tmp_path / "b")
        assert (a.out_dir / "summary.json").read_bytes() == (b.out_dir / "summary.json").read_bytes()

    def test_zero_horizon(self, tmp_path):
        outcome = scenarios.execute(_parse(horizon=0.0), tmp_path)
        lines = (outcome.out_dir / "energy.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert outcome.status == "pass"

    def test_symbol_audit(self, tmp_path):
        cfg = scenarios.parse(json.dumps({"scenario": "symbol-audit", "samples": 50, "seeds": [0, 1]}))
        outcome = scenarios.execute(cfg, tmp_path)
        assert (outcome.out_dir / "symbol_audit.json").exists()
        assert [c["seed"] for c in outcome.summary["checks"]] == [0, 1]

    def test_lemma_suite_subset(self, tmp_path):
        cfg = scenarios.parse(json.dumps({"scenario": "lemma-suite", "checks": ["density"]}))
        outcome = scenarios.execute(cfg, tmp_path)
        assert outcome.exit_code == 0
        assert (outcome.out_dir / "suite.txt").read_text(encoding="utf-8").startswith("# config_hash=")

    def test_apriori_sweep(self, tmp_path):
        current = {**PULSE, "width": [0.2, 0.2, 0.2], "temporal": {"kind": "sin2", "params": {"duration": 0.1}}}
        cfg = _parse(scenario="apriori-sweep", source={"initial": PULSE, "current": current}, horizon=0.24)
        outcome = scenarios.execute(cfg, tmp_path)
        assert set(outcome.summary["measured"]["sweep"]) == {1, 2, 4}

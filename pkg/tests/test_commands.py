# tests/test_commands.py
import json

import pytest
from sqlalchemy import select

from slab_tbc.extensions import db
from slab_tbc.models import CheckRecord, RunError, SimulationRun

PEC_CONFIG = {
    "scenario": "pec-energy",
    "grid": {"period_x": 1.0, "period_y": 1.0, "modes_x": 4, "modes_y": 4, "nz": 16},
    "medium": {"breakpoints": [0.0, 1.0], "eps": [1.0], "mu": [1.0]},
    "source": {"initial": {"center": [0.5, 0.5, 0.5], "width": [0.3, 0.3, 0.2]}},
    "cfl": 0.5,
    "horizon": 0.2,
}


def _runs():
    return db.session.execute(select(SimulationRun).order_by(SimulationRun.id)).scalars().all()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "pec.json"
    path.write_text(json.dumps(PEC_CONFIG), encoding="utf-8")
    return path


class TestInitDb:
    def test_creates_tables(self, runner):
        result = runner.invoke(args=["init-db"])
        assert result.exit_code == 0
        assert "Tablas" in result.output


class TestRunCommand:
    def test_pec_energy(self, runner, config_file, tmp_path):
        result = runner.invoke(args=["run", str(config_file), "--out", str(tmp_path / "out")])
        (run,) = _runs()
        assert run.kind == "run" and run.scenario == "pec-energy"
        assert run.status == "completed"
        summary = json.loads(run.summary_json)
        assert result.exit_code == summary["exit_code"] == run.exit_code
        assert (tmp_path / "out" / f"pec-energy-{run.config_hash[:12]}" / "energy.csv").exists()
        assert [c.check_id for c in run.checks] == ["pec-energy"]

    def test_invalid_config(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({**PEC_CONFIG, "cfl": -1.0}), encoding="utf-8")
        result = runner.invoke(args=["run", str(path)])
        assert result.exit_code != 0
        assert _runs() == []

    def test_unstable_cfl_rejected_before_recording(self, runner, tmp_path):
        path = tmp_path / "cfl.json"
        path.write_text(json.dumps({**PEC_CONFIG, "cfl": 1.5}), encoding="utf-8")
        result = runner.invoke(args=["run", str(path), "--out", str(tmp_path / "out")])
        assert result.exit_code != 0
        assert '"field": "cfl"' in result.output
        assert _runs() == []

    def test_nonvanishing_current_rejected_for_tbc(self, runner, tmp_path):
        current = {"center": [0.5, 0.5, 0.5], "width": [0.2, 0.2, 0.2], "temporal": {"kind": "constant"}}
        path = tmp_path / "h1.json"
        path.write_text(json.dumps({**PEC_CONFIG, "scenario": "apriori-sweep", "source": {"current": current}}),
                        encoding="utf-8")
        result = runner.invoke(args=["run", str(path)])
        assert result.exit_code != 0
        assert "DataError" in result.output
        assert _runs() == []

    def test_execution_failure_is_recorded(self, runner, config_file, tmp_path, monkeypatch):
        from slab_tbc.errors import ScenarioError
        from slab_tbc.services import scenarios

        def boom(cfg, *args, **kwargs):
            raise ScenarioError(cfg.scenario, FloatingPointError("overflow"))

        monkeypatch.setattr(scenarios, "execute", boom)
        result = runner.invoke(args=["run", str(config_file), "--out", str(tmp_path / "out")])
        assert result.exit_code != 0
        (run,) = _runs()
        assert run.status == "failed"
        assert db.session.execute(select(RunError)).scalars().one().error_type == "ScenarioError"

    def test_recording_disabled(self, app, runner, config_file, tmp_path):
        app.config["SLABTBC_RECORD_RUNS"] = False
        runner.invoke(args=["run", str(config_file), "--out", str(tmp_path / "out")])
        assert _runs() == []


class TestCheckCommand:
    def test_out_of_scope(self, runner):
        result = runner.invoke(args=["check", "density"])
        assert result.exit_code == 0
        assert "out-of-scope" in result.output

    def test_duality_writes_suite(self, runner, tmp_path):
        result = runner.invoke(args=["check", "duality", "--out", str(tmp_path / "suite")])
        assert result.exit_code == 0
        payload = json.loads((tmp_path / "suite" / "suite.json").read_text(encoding="utf-8"))
        assert payload["results"][0]["status"] == "pass"
        record = db.session.execute(select(CheckRecord)).scalars().one()
        assert record.check_id == "duality"

    def test_unknown_check(self, runner):
        result = runner.invoke(args=["check", "no-such-check"])
        assert result.exit_code != 0
        assert "desconocido" in result.output


class TestAuditSymbols:
    def test_prints_json(self, runner):
        result = runner.invoke(args=["audit-symbols", "--samples", "50"])
        data = json.loads(result.output)
        assert data["samples"] == 50
        (run,) = _runs()
        assert run.kind == "audit" and run.exit_code == result.exit_code

    def test_writes_file(self, runner, tmp_path):
        out = tmp_path / "audit.json"
        result = runner.invoke(args=["audit-symbols", "--samples", "20", "--out", str(out)])
        assert "OK" in result.output
        assert json.loads(out.read_text(encoding="utf-8"))["samples"] == 20


class TestRunsExport:
    def test_empty(self, runner):
        result = runner.invoke(args=["runs:export"])
        assert result.exit_code == 0
        assert "<< vacío >>" in result.output

    def test_formats(self, runner, tmp_path):
        runner.invoke(args=["check", "density"])
        table = runner.invoke(args=["runs:export"]).output
        assert table.startswith("+-") and "density" in table
        out = tmp_path / "runs.csv"
        runner.invoke(args=["runs:export", "--format", "csv", "--out", str(out)])
        assert out.read_text(encoding="utf-8").splitlines()[0].startswith("id,kind,scenario")
        rows = json.loads(runner.invoke(args=["runs:export", "--format", "json"]).output)
        assert rows[0]["kind"] == "check"

    def test_list_and_show(self, runner):
        runner.invoke(args=["check", "density"])
        assert "kind=check" in runner.invoke(args=["runs:list"]).output
        shown = json.loads(runner.invoke(args=["runs:show", "1"]).output)
        assert shown["checks"][0]["status"] == "out-of-scope"
        assert runner.invoke(args=["runs:show", "99"]).exit_code != 0

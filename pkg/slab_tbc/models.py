# slab_tbc/models.py
from __future__ import annotations

import json
from datetime import datetime, timezone

from .extensions import db


# ---------- helpers de tiempo (UTC aware) ----------
def utcnow():
    """Fecha/hora actual en UTC (timezone-aware)."""
    return datetime.now(timezone.utc)


def _iso(dt):
    if dt is None:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.isoformat()


def _loads(text):
    return json.loads(text) if text else None


# ---------- modelos ----------
class SimulationRun(db.Model):
    """Una invocación del CLI: escenario, suite de verificadores o auditoría de símbolos."""

    __tablename__ = "simulation_run"

    id = db.Column(db.Integer, primary_key=True)

    # "run" | "check" | "audit"
    kind = db.Column(db.String(16), nullable=False, index=True)
    scenario = db.Column(db.String(64), nullable=True)
    config_hash = db.Column(db.String(64), nullable=True, index=True)
    seed = db.Column(db.BigInteger, nullable=True)
    preset = db.Column(db.String(32), nullable=True)

    # "running" | "completed" | "failed"
    status = db.Column(db.String(16), default="running", nullable=False)
    exit_code = db.Column(db.Integer, nullable=True)
    out_dir = db.Column(db.Text, nullable=True)
    wall_clock_seconds = db.Column(db.Float, nullable=True)

    started_at = db.Column(db.DateTime(timezone=True), default=utcnow, nullable=False)
    completed_at = db.Column(db.DateTime(timezone=True), nullable=True)
    summary_json = db.Column(db.Text, nullable=True)

    checks = db.relationship("CheckRecord", backref="run", lazy=True, cascade="all, delete-orphan",
                             order_by="CheckRecord.id")
    errors = db.relationship("RunError", backref="run", lazy=True, cascade="all, delete-orphan",
                             order_by="RunError.id")

    def as_dict(self, with_checks: bool = False) -> dict:
        out = {
            "id": self.id,
            "kind": self.kind,
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "preset": self.preset,
            "status": self.status,
            "exit_code": self.exit_code,
            "out_dir": self.out_dir,
            "wall_clock_seconds": self.wall_clock_seconds,
            "started_at": _iso(self.started_at),
            "completed_at": _iso(self.completed_at),
        }
        if with_checks:
            out["summary"] = _loads(self.summary_json)
            out["checks"] = [c.as_dict() for c in self.checks]
            out["errors"] = [e.as_dict() for e in self.errors]
        return out

    def __repr__(self) -> str:
        return f"<SimulationRun {self.id} {self.kind}:{self.scenario} {self.status}>"


class CheckRecord(db.Model):
    __tablename__ = "check_record"

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.Integer, db.ForeignKey("simulation_run.id"), nullable=False, index=True)
    check_id = db.Column(db.String(64), nullable=False, index=True)

    # "pass" | "fail" | "degenerate" | "out-of-scope"
    status = db.Column(db.String(16), nullable=False)
    measured_json = db.Column(db.Text, nullable=True)
    tolerances_json = db.Column(db.Text, nullable=True)
    seed = db.Column(db.BigInteger, nullable=True)
    occurred_at = db.Column(db.DateTime(timezone=True), default=utcnow, nullable=False)

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "check_id": self.check_id,
            "status": self.status,
            "seed": self.seed,
            "measured": _loads(self.measured_json),
            "tolerances": _loads(self.tolerances_json),
            "occurred_at": _iso(self.occurred_at),
        }


class RunError(db.Model):
    """Error de una corrida (tipo, mensaje y traza)."""

    __tablename__ = "run_error"

    id = db.Column(db.Integer, primary_key=True)
    run_id = db.Column(db.Integer, db.ForeignKey("simulation_run.id"), nullable=False, index=True)
    error_type = db.Column(db.String(64), nullable=False)
    error_message = db.Column(db.Text, nullable=False)
    stack_trace = db.Column(db.Text, nullable=True)
    occurred_at = db.Column(db.DateTime(timezone=True), default=utcnow, nullable=False)

    def as_dict(self) -> dict:
        return {
            "error_type": self.error_type,
            "error_message": self.error_message,
            "occurred_at": _iso(self.occurred_at),
        }

# slab_tbc/routes/runs.py
from flask import Blueprint, abort, jsonify, request
from sqlalchemy import select

from ..extensions import db
from ..models import SimulationRun

runs_bp = Blueprint("runs", __name__, url_prefix="/api/runs")

MAX_LIMIT = 500


@runs_bp.route("", methods=["GET"])
@runs_bp.route("/", methods=["GET"])
def runs_list():
    """Últimas corridas; filtros opcionales ?kind=, ?status= y ?limit=."""
    limit = min(request.args.get("limit", 50, type=int) or 50, MAX_LIMIT)
    q = select(SimulationRun).order_by(SimulationRun.id.desc())
    kind = request.args.get("kind")
    if kind:
        q = q.where(SimulationRun.kind == kind)
    status = request.args.get("status")
    if status:
        q = q.where(SimulationRun.status == status)
    runs = db.session.execute(q.limit(limit)).scalars().all()
    return jsonify({"runs": [r.as_dict() for r in runs], "count": len(runs)})


@runs_bp.route("/<int:run_id>", methods=["GET"])
def runs_show(run_id: int):
    run = db.session.get(SimulationRun, run_id)
    if run is None:
        abort(404)
    return jsonify(run.as_dict(with_checks=True))


@runs_bp.errorhandler(404)
def _not_found(_e):
    return jsonify({"error": "Corrida no encontrada"}), 404

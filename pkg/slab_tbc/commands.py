# slab_tbc/commands.py
import csv
import json
import logging
import sys
import traceback
from pathlib import Path

import click
from sqlalchemy import select

from .errors import ConfigurationError, DataError, SlabTbcError
from .extensions import db
from .models import CheckRecord, RunError, SimulationRun, utcnow
from .services import scenarios, verify, writers
from .services.spectral import AS_PRINTED_WEIGHT, STANDARD_WEIGHT
from .services.symbols import ExteriorMedium, symbol_bound_audit

logger = logging.getLogger(__name__)

PRESET_CHOICE = click.Choice([STANDARD_WEIGHT, AS_PRINTED_WEIGHT])
EXPORT_FIELDS = [
    "id", "kind", "scenario", "status", "exit_code", "seed", "preset",
    "config_hash", "wall_clock_seconds", "started_at", "out_dir",
]


# ───────────────────────── Helpers ─────────────────────────
def _fmt_utc(dt) -> str:
    if not dt:
        return "-"
    return dt.strftime("%d/%m/%Y - %H:%M:%S")


def _recording(app) -> bool:
    return bool(app.config.get("SLABTBC_RECORD_RUNS", True))


def start_run(app, kind: str, scenario: str | None = None, config_hash: str | None = None,
              seed: int | None = None, preset: str | None = None) -> SimulationRun | None:
    """Abre una fila del registro de corridas (None si el registro está desactivado)."""
    if not _recording(app):
        return None
    run = SimulationRun(kind=kind, scenario=scenario, config_hash=config_hash, seed=seed, preset=preset,
                        status="running")
    db.session.add(run)
    db.session.commit()
    return run


def record_checks(run: SimulationRun | None, results: list) -> None:
    """``results``: CheckResult o dicts con check_id, status, measured, tolerances y seed."""
    if run is None:
        return
    for r in results:
        d = r.as_dict() if hasattr(r, "as_dict") else r
        db.session.add(CheckRecord(
            run_id=run.id,
            check_id=d["check_id"],
            status=d["status"],
            seed=d.get("seed"),
            measured_json=writers.canonical_json(d.get("measured", {})),
            tolerances_json=writers.canonical_json(d.get("tolerances", {})),
        ))
    db.session.commit()


def finish_run(run: SimulationRun | None, exit_code: int, summary: dict | None = None,
               out_dir=None, wall_clock_seconds: float | None = None) -> None:
    if run is None:
        return
    run.status = "completed"
    run.exit_code = exit_code
    run.completed_at = utcnow()
    run.out_dir = str(out_dir) if out_dir is not None else None
    run.wall_clock_seconds = wall_clock_seconds
    if summary is not None:
        run.summary_json = writers.canonical_json(summary)
    db.session.commit()


def fail_run(run: SimulationRun | None, exc: BaseException) -> None:
    """Marca la corrida como fallida y guarda el error con su traza."""
    if run is None:
        return
    db.session.rollback()
    run.status = "failed"
    run.exit_code = 1
    run.completed_at = utcnow()
    db.session.add(RunError(
        run_id=run.id,
        error_type=type(exc).__name__,
        error_message=str(exc),
        stack_trace="".join(traceback.format_exception(type(exc), exc, exc.__traceback__)),
    ))
    db.session.commit()


def _echo_diagnostics(err: ConfigurationError | DataError) -> None:
    diags = getattr(err, "diagnostics", None) or [err.as_dict()]
    click.echo(json.dumps(diags, ensure_ascii=False, indent=2), err=True)


def _exit(code: int) -> None:
    if code:
        click.get_current_context().exit(code)


# ───────────────────────── CLI ─────────────────────────
def register_cli(app):

    @app.cli.command("init-db")
    def init_db_command():
        """Crea las tablas del registro de corridas."""
        db.create_all()
        click.echo("✅ Tablas de la base de datos creadas.")

    # ───────── Corridas ─────────

    @app.cli.command("run")
    @click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                  help="Directorio base de artefactos (por defecto SLABTBC_OUT_DIR)")
    @click.option("--seed", type=int, default=None, help="Reemplaza la lista de semillas de la configuración")
    @click.option("--threads", type=click.IntRange(min=1), default=None)
    @click.option("--preset", type=PRESET_CHOICE, default=None)
    def run_command(config_path, out_dir, seed, threads, preset):
        """Ejecuta un escenario descrito por un JSON de configuración."""
        try:
            cfg = scenarios.load(config_path)
        except (ConfigurationError, DataError) as e:
            _echo_diagnostics(e)
            raise click.ClickException(str(e))
        updates = {}
        if seed is not None:
            updates["seeds"] = [seed]
        if preset is not None:
            updates["preset"] = preset
        if updates:
            cfg = cfg.model_copy(update=updates)

        out_dir = out_dir or cfg.out or app.config["SLABTBC_OUT_DIR"]
        threads = threads or app.config["SLABTBC_THREADS"]
        run = start_run(app, "run", cfg.scenario, cfg.hash(), cfg.seeds[0], cfg.preset)
        try:
            outcome = scenarios.execute(cfg, out_dir, threads=threads, base_dir=Path(config_path).parent)
        except SlabTbcError as e:
            fail_run(run, e)
            if isinstance(e, (ConfigurationError, DataError)):
                _echo_diagnostics(e)
            raise click.ClickException(str(e))

        record_checks(run, outcome.summary["checks"])
        finish_run(run, outcome.exit_code, outcome.summary, outcome.out_dir, outcome.wall_clock_seconds)
        rows = [{"check": c["check_id"], "status": c["status"]} for c in outcome.summary["checks"]]
        for line in writers.table_lines(rows):
            click.echo(line)
        click.echo(f"{outcome.scenario}: {outcome.status} -> {outcome.out_dir}")
        _exit(outcome.exit_code)

    @app.cli.command("check")
    @click.argument("target")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                  help="Si se indica, guarda suite.json en este directorio")
    @click.option("--seed", type=int, default=0)
    @click.option("--threads", type=click.IntRange(min=1), default=None)
    @click.option("--preset", type=PRESET_CHOICE, default=None)
    @click.option("--scale", type=click.Choice(list(verify.SCALES)), default="desk")
    @click.option("--fuzz", is_flag=True, help="Semillas nuevas por verificador; informa las que fallan")
    def check_command(target, out_dir, seed, threads, preset, scale, fuzz):
        """Ejecuta la suite completa ('suite') o un verificador por su id."""
        ids = None if target == "suite" else [target]
        if ids and ids[0] not in verify.CHECKS and ids[0] not in verify.OUT_OF_SCOPE:
            raise click.ClickException(f"Verificador desconocido: {target} (use 'suite' o {sorted(verify.CHECKS)})")
        preset = preset or app.config["SLABTBC_PRESET"]
        threads = threads or app.config["SLABTBC_THREADS"]

        run = start_run(app, "check", target, seed=seed, preset=preset)
        try:
            report = verify.run_suite(ids, seed=seed, threads=threads, scale=scale, preset=preset, fuzz=fuzz)
        except Exception as e:
            fail_run(run, e)
            raise click.ClickException(str(e))

        payload = report.as_dict()
        written = None
        if out_dir:
            written = Path(out_dir)
            written.mkdir(parents=True, exist_ok=True)
            writers.write_json(written / "suite.json", payload)
        record_checks(run, report.results)
        wall = sum(r.wall_clock_seconds for r in report.results)
        finish_run(run, report.exit_code, payload, written, wall)

        click.echo(verify.summary_table(report.results))
        for f in report.fuzz_failures:
            click.echo(f"FUZZ {f['check_id']} falló con semilla {f['seed']}", err=True)
        _exit(report.exit_code)

    @app.cli.command("audit-symbols")
    @click.option("--samples", type=click.IntRange(min=1), default=1000)
    @click.option("--seed", type=int, default=0)
    @click.option("--eps", type=float, default=1.0, help="Permitividad exterior")
    @click.option("--mu", type=float, default=1.0, help="Permeabilidad exterior")
    @click.option("--out", "out_path", type=click.Path(dir_okay=False), default="-",
                  help="'-' imprime en consola; si pasas ruta guarda a archivo")
    def audit_symbols_command(samples, seed, eps, mu, out_path):
        """Auditoría aleatoria de las cotas de positividad y continuidad de los símbolos."""
        run = start_run(app, "audit", "symbol-audit", seed=seed)
        try:
            audit = symbol_bound_audit(samples, seed, ExteriorMedium(eps, mu, 1))
        except SlabTbcError as e:
            fail_run(run, e)
            raise click.ClickException(str(e))

        data = audit.as_dict()
        pos = verify.tolerances("symbol-positivity")
        cont = verify.tolerances("symbol-continuity")
        ok = (audit.min_positivity_margin >= pos["min_margin"]
              and audit.max_continuity_ratio <= cont["max_continuity_ratio"]
              and audit.max_f_ratio <= cont["max_f_ratio"])
        record_checks(run, [{
            "check_id": "symbol-audit", "status": "pass" if ok else "fail", "seed": seed,
            "measured": {"min_positivity_margin": audit.min_positivity_margin,
                         "max_continuity_ratio": audit.max_continuity_ratio,
                         "max_f_ratio": audit.max_f_ratio},
            "tolerances": {"min_positivity_margin": pos["min_margin"], **{
                k: cont[k] for k in ("max_continuity_ratio", "max_f_ratio")}},
        }])
        finish_run(run, 0 if ok else 1, data, None if out_path == "-" else out_path)

        if out_path == "-":
            click.echo(json.dumps(writers.jsonable(data), ensure_ascii=False, indent=2, sort_keys=True))
        else:
            writers.write_json(out_path, data)
            click.echo("OK")
        _exit(0 if ok else 1)

    # ───────── Registro / Exportación ─────────

    @app.cli.command("runs:list")
    @click.option("--limit", default=20, type=int)
    def runs_list(limit):
        """Últimas corridas (id, tipo, escenario, estado, inicio)."""
        rows = db.session.execute(
            select(SimulationRun).order_by(SimulationRun.id.desc()).limit(limit)
        ).scalars().all()
        for r in rows:
            click.echo(
                f"id={r.id} kind={r.kind} scenario={r.scenario} status={r.status} "
                f"exit={r.exit_code} started={_fmt_utc(r.started_at)}"
            )

    @app.cli.command("runs:show")
    @click.argument("run_id", type=int)
    def runs_show(run_id):
        """Detalle de una corrida con sus verificadores y errores."""
        run = db.session.get(SimulationRun, run_id)
        if run is None:
            raise click.ClickException("Corrida no encontrada")
        click.echo(json.dumps(run.as_dict(with_checks=True), ensure_ascii=False, indent=2))

    @app.cli.command("runs:export")
    @click.option("--limit", default=1000, type=int, help="Máximo de filas")
    @click.option("--format", "fmt", type=click.Choice(["table", "csv", "json"]), default="table")
    @click.option("--out", type=click.Path(writable=True), default="-",
                  help="'-' imprime en consola; si pasas ruta guarda a archivo")
    def runs_export(limit, fmt, out):
        """Muestra/Exporta el registro de corridas (tabla/csv/json)."""
        runs = db.session.execute(
            select(SimulationRun).order_by(SimulationRun.id.desc()).limit(limit)
        ).scalars().all()
        rows = [{
            "id": r.id,
            "kind": r.kind,
            "scenario": r.scenario or "",
            "status": r.status,
            "exit_code": "" if r.exit_code is None else r.exit_code,
            "seed": "" if r.seed is None else r.seed,
            "preset": r.preset or "",
            "config_hash": (r.config_hash or "")[:12],
            "wall_clock_seconds": "" if r.wall_clock_seconds is None else f"{r.wall_clock_seconds:.3f}",
            "started_at": _fmt_utc(r.started_at),
            "out_dir": r.out_dir or "",
        } for r in runs]

        if fmt == "table":
            for line in writers.table_lines(rows):
                click.echo(line)
            return

        stream = sys.stdout if out == "-" else open(out, "w", newline="", encoding="utf-8")
        try:
            if fmt == "csv":
                writer = csv.DictWriter(stream, fieldnames=EXPORT_FIELDS)
                writer.writeheader()
                for r in rows:
                    writer.writerow(r)
            elif fmt == "json":
                json.dump(rows, stream, ensure_ascii=False, indent=2)
        finally:
            if stream is not sys.stdout:
                stream.close()
        click.echo("OK" if out != "-" else "")

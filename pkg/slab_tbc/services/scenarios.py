# slab_tbc/services/scenarios.py
"""
Configuración de corridas (JSON validado con pydantic) y ejecución de
escenarios con sus artefactos en disco.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigurationError, DataError, ScenarioError, SlabTbcError
from . import sources, stepper, verify, writers
from .cq import DEFAULT_GENERATOR
from .sdomain import LayeredProfile
from .spectral import AS_PRINTED_WEIGHT, STANDARD_WEIGHT, LateralGrid
from .symbols import ExteriorMedium, symbol_bound_audit

logger = logging.getLogger(__name__)

SCENARIOS = ("pec-energy", "tbc-reflection", "oracle-compare", "symbol-audit", "lemma-suite", "apriori-sweep")
TBC_SCENARIOS = ("tbc-reflection", "oracle-compare", "apriori-sweep")
STEPPING_SCENARIOS = ("pec-energy", "tbc-reflection", "apriori-sweep", "oracle-compare")
REQUIRED = {
    "pec-energy": ("grid", "medium", "source", "horizon"),
    "tbc-reflection": ("grid", "medium", "source"),
    "oracle-compare": ("grid", "medium", "oracle", "horizon"),
    "symbol-audit": ("samples",),
    "lemma-suite": (),
    "apriori-sweep": ("grid", "medium", "source", "horizon"),
}

Triple = tuple[float, float, float]


# ---------------------------------------
# Esquema
# ---------------------------------------
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    period_x: float = Field(gt=0)
    period_y: float = Field(gt=0)
    modes_x: int = Field(ge=4, multiple_of=2)
    modes_y: int = Field(ge=4, multiple_of=2)
    nz: int = Field(ge=2)


class MediumSpec(_Strict):
    """Tabla de capas o archivo .npz con arreglos ``z`` (cortes), ``eps`` y ``mu`` (por capa)."""

    breakpoints: Optional[list[float]] = None
    eps: Optional[list[float]] = None
    mu: Optional[list[float]] = None
    eps_bounds: Optional[tuple[float, float]] = None
    mu_bounds: Optional[tuple[float, float]] = None
    sampled_file: Optional[str] = None

    @model_validator(mode="after")
    def _one_description(self):
        table = [self.breakpoints, self.eps, self.mu]
        if self.sampled_file is not None:
            if any(v is not None for v in table):
                raise ValueError("medium: use tabla de capas o sampled_file, no ambos")
        elif any(v is None for v in table):
            raise ValueError("medium: breakpoints, eps y mu son obligatorios sin sampled_file")
        return self

    def profile(self, base_dir: Path | None = None) -> LayeredProfile:
        if self.sampled_file is None:
            return LayeredProfile(tuple(self.breakpoints), tuple(self.eps), tuple(self.mu),
                                  self.eps_bounds, self.mu_bounds)
        path = Path(self.sampled_file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            with np.load(path) as data:
                z, eps, mu = data["z"], data["eps"], data["mu"]
        except (OSError, KeyError) as e:
            raise ConfigurationError("medium.sampled_file", "archivo .npz con z, eps y mu", str(e)) from e
        return LayeredProfile(tuple(map(float, z)), tuple(map(float, eps)), tuple(map(float, mu)),
                              self.eps_bounds, self.mu_bounds)


class TemporalSpec(_Strict):
    kind: Literal["sin2", "gaussian", "constant"]
    params: dict[str, float] = Field(default_factory=dict)

    def waveform(self):
        try:
            return sources.waveform_from_spec(self.kind, **self.params)
        except TypeError as e:
            raise ConfigurationError("source.current.temporal.params", f"parámetros de '{self.kind}'", str(e)) from e


class PulseSpec(_Strict):
    center: Triple
    width: Triple
    polarization: Literal["x", "y"] = "x"
    direction: Literal["up", "down"] = "up"
    amplitude: float = 1.0
    profile: Literal["bump", "gaussian"] = "bump"
    lateral: bool = False

    @model_validator(mode="after")
    def _positive_width(self):
        if min(self.width) <= 0:
            raise ValueError("width: semianchos > 0")
        return self


class CurrentSpec(_Strict):
    center: Triple
    width: Triple
    temporal: TemporalSpec
    polarization: Literal["x", "y"] = "x"
    amplitude: float = 1.0
    profile: Literal["bump", "gaussian"] = "bump"
    lateral: bool = True


class SourceSpec(_Strict):
    initial: Optional[PulseSpec] = None
    current: Optional[CurrentSpec] = None


class OracleSpec(_Strict):
    mode: tuple[int, int] = (0, 0)
    duration: float = Field(gt=0)
    refine: int = Field(default=4, ge=1)


class RunConfig(_Strict):
    scenario: Literal[SCENARIOS]
    grid: Optional[GridSpec] = None
    medium: Optional[MediumSpec] = None
    source: Optional[SourceSpec] = None
    oracle: Optional[OracleSpec] = None
    dt: Optional[float] = Field(default=None, gt=0)
    cfl: Optional[float] = Field(default=None, gt=0, le=1)
    horizon: Optional[float] = Field(default=None, ge=0)
    generator: Literal["BDF1", "BDF2"] = DEFAULT_GENERATOR
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    samples: Optional[int] = Field(default=None, ge=1)
    checks: Optional[list[str]] = None
    scale: Literal["desk", "reference"] = "desk"
    preset: Literal[STANDARD_WEIGHT, AS_PRINTED_WEIGHT] = STANDARD_WEIGHT
    snapshot_every: int = Field(default=0, ge=0)
    write_kernels: bool = False
    out: Optional[str] = None

    @model_validator(mode="after")
    def _scenario_fields(self):
        missing = [name for name in REQUIRED[self.scenario] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"el escenario {self.scenario} requiere: {', '.join(missing)}")
        if self.scenario in STEPPING_SCENARIOS and (self.dt is None) == (self.cfl is None):
            raise ValueError("indique exactamente uno de dt o cfl")
        if self.checks is not None:
            unknown = sorted(set(self.checks) - set(verify.CHECKS) - set(verify.OUT_OF_SCOPE))
            if unknown:
                raise ValueError(f"verificadores desconocidos: {unknown}")
        return self

    def hash(self) -> str:
        """Hash de la configuración física (excluye el directorio de salida)."""
        return writers.config_hash(self.model_dump(mode="json", exclude={"out"}))


# ---------------------------------------
# Parseo y validación
# ---------------------------------------
def _diagnostic(err: dict) -> dict:
    loc = ".".join(str(p) for p in err.get("loc", ())) or "config"
    return {"field": loc, "constraint": err.get("msg", ""), "type": err.get("type", "")}


def parse(text: str, base_dir: Path | None = None) -> RunConfig:
    """
    JSON -> RunConfig validada por completo: esquema y precondiciones de los
    módulos (CFL, dt_max, soporte de la fuente, (H1) en escenarios con TBC).

    Errores: ConfigurationError o DataError con ``diagnostics`` legibles por máquina.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        err = ConfigurationError("config", "JSON válido", f"línea {e.lineno}, columna {e.colno}: {e.msg}")
        err.diagnostics = [err.as_dict()]
        raise err from e
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        diags = [_diagnostic(x) for x in e.errors()]
        first = diags[0]
        err = ConfigurationError(first["field"], first["constraint"])
        err.diagnostics = diags
        raise err from e
    try:
        prepare(config, base_dir)
    except (ConfigurationError, DataError) as e:
        e.diagnostics = [e.as_dict()]
        raise
    return config


def load(path) -> RunConfig:
    """Lee y valida un JSON; los archivos de medio se resuelven junto al JSON."""
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), base_dir=path.parent)


@dataclass
class Prepared:
    """Objetos del solver construidos a partir de una RunConfig ya validada."""

    config: RunConfig
    profile: LayeredProfile | None = None
    grid: LateralGrid | None = None
    medium: stepper.SlabMedium | None = None
    source: stepper.SourceTerm | None = None
    dt: float | None = None
    steps: int = 0


def _build_source(spec: SourceSpec, medium: stepper.SlabMedium) -> stepper.SourceTerm:
    parts = []
    if spec.initial is not None:
        p = spec.initial
        parts.append(sources.plane_pulse(medium, p.center, p.width, p.polarization, p.direction,
                                         p.amplitude, p.profile, p.lateral))
    if spec.current is not None:
        c = spec.current
        parts.append(sources.current_pulse(medium.grid, c.center, c.width, c.temporal.waveform(),
                                           c.polarization, c.amplitude, c.profile, c.lateral))
    if not parts:
        return stepper.SourceTerm(medium.grid, label="vacía")
    return sources.combine(*parts)


def prepare(config: RunConfig, base_dir: Path | None = None) -> Prepared:
    """Valida las precondiciones de los módulos (CFL, soporte, (H1)) y construye los objetos."""
    prep = Prepared(config)
    if config.medium is not None:
        prep.profile = config.medium.profile(base_dir)
    if config.scenario not in STEPPING_SCENARIOS:
        return prep
    if config.cfl is not None and config.cfl > 1.0:
        raise ConfigurationError("cfl", "0 < cfl <= 1 (estabilidad del leapfrog)", f"cfl={config.cfl}")

    g = config.grid
    prep.grid = LateralGrid(g.period_x, g.period_y, g.modes_x, g.modes_y, prep.profile.h1, prep.profile.h2, g.nz)
    prep.medium = stepper.SlabMedium.from_profile(prep.grid, prep.profile)
    prep.dt = config.dt if config.dt is not None else prep.medium.dt_for(config.cfl)
    dt_max = prep.medium.dt_max()
    if prep.dt > dt_max * (1.0 + 1e-12):
        raise ConfigurationError("dt", "dt <= dt_max (CFL)", f"dt={prep.dt:.6g}, dt_max={dt_max:.6g}")
    if config.horizon is not None:
        prep.steps = int(round(config.horizon / prep.dt))

    if config.source is not None:
        prep.source = _build_source(config.source, prep.medium)
        prep.source.check_support()
        if config.scenario in TBC_SCENARIOS and not prep.source.h1_compliant:
            raise DataError("source.current.temporal", "J(., 0) = 0 (H1)", "el perfil temporal no se anula en t = 0")

    if config.scenario == "tbc-reflection":
        if len(prep.profile.eps) != 1:
            raise ConfigurationError("medium", "medio homogéneo para el dominio de referencia ampliado")
        if config.source.initial is None or config.source.current is not None:
            raise ConfigurationError("source", "solo un pulso inicial (sin corriente)")
    if config.scenario == "apriori-sweep" and prep.steps < 4:
        raise ConfigurationError("horizon", "al menos 4 pasos (T0 = T/4)", f"{prep.steps} pasos")
    return prep


# ---------------------------------------
# Ejecución
# ---------------------------------------
@dataclass
class ScenarioOutcome:
    scenario: str
    config_hash: str
    status: str
    exit_code: int
    out_dir: Path
    artifacts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _check_entry(check_id: str, measured: dict, tol: dict, ok: bool) -> dict:
    return {"check_id": check_id, "status": _status(ok), "measured": measured, "tolerances": tol}


def _run_pec_energy(prep: Prepared, out: Path, cfg_hash: str, artifacts: list) -> tuple[dict, list]:
    cfg = prep.config
    snaps = []

    def snapshot(st):
        path = out / f"snapshot_{st.n:06d}.bin"
        writers.write_snapshot(path, st, prep.medium, cfg_hash)
        snaps.append(path.name)

    plan = stepper.RunPlan(prep.medium, prep.source, prep.dt, prep.steps, closure="pec",
                           snapshot_every=cfg.snapshot_every, on_snapshot=snapshot if cfg.snapshot_every else None)
    res = stepper.run(plan)
    writers.write_energy_csv(out / "energy.csv", res.report, cfg_hash)
    artifacts += ["energy.csv", *snaps]

    scheme = np.array(res.report.scheme_energy)
    e1 = res.report.series("e1")
    measured = {
        "initial": res.report.rows[0],
        "final": res.report.rows[-1],
        "divergence_residual_max": float(max(res.divergence)),
    }
    checks = []
    if scheme[0] > 0 and e1[0] > 0:
        tol = verify.tolerances("pec-energy", cfg.scale)
        drift = {"scheme_drift": float(np.max(np.abs(scheme - scheme[0])) / scheme[0]),
                 "continuum_drift": float(np.max(np.abs(e1 - e1[0])) / e1[0])}
        measured.update(drift)
        ok = drift["scheme_drift"] <= tol["scheme_drift"] and drift["continuum_drift"] <= tol["continuum_drift"]
        checks.append(_check_entry("pec-energy", drift, {k: tol[k] for k in drift}, ok))
    return measured, checks


def _run_reflection(prep: Prepared, out: Path, cfg_hash: str, artifacts: list) -> tuple[dict, list]:
    cfg = prep.config
    p = cfg.source.initial
    pulse = {"center": p.center, "width": p.width, "polarization": p.polarization, "direction": p.direction,
             "amplitude": p.amplitude, "profile": p.profile, "lateral": p.lateral}
    eps, mu = prep.profile.eps[0], prep.profile.mu[0]
    cfl = prep.dt / prep.medium.dt_max()
    steps = prep.steps if cfg.horizon is not None else None
    study = verify.reflection_study(prep.grid, eps, mu, pulse, cfl, steps, cfg.generator, keep_report=True)
    report = study.pop("report")
    writers.write_energy_csv(out / "energy.csv", report, cfg_hash)
    artifacts.append("energy.csv")
    tol = verify.tolerances("tbc-reflection", cfg.scale)
    keys = ("relative_mismatch", "reflection")
    ok = all(study[k] <= tol[k] for k in keys)
    return study, [_check_entry("tbc-reflection", {k: study[k] for k in keys}, {k: tol[k] for k in keys}, ok)]


def _run_oracle(prep: Prepared, out: Path, cfg_hash: str, artifacts: list) -> tuple[dict, list]:
    cfg = prep.config
    if cfg.grid.period_x != cfg.grid.period_y or cfg.grid.modes_x != cfg.grid.modes_y:
        raise ConfigurationError("grid", "malla lateral cuadrada para el oráculo por modo")
    cfl = prep.dt / prep.medium.dt_max()
    result = verify.oracle_mismatch(
        prep.profile, cfg.grid.nz, tuple(cfg.oracle.mode), cfg.oracle.duration, cfg.horizon,
        cfg.generator, cfg.oracle.refine, cfl, cfg.grid.period_x, cfg.grid.modes_x,
    )
    tol = verify.tolerances("oracle-agreement", cfg.scale)
    ok = result["relative_mismatch"] <= tol["relative_mismatch"]
    return result, [_check_entry("oracle-agreement", {"relative_mismatch": result["relative_mismatch"]},
                                 {"relative_mismatch": tol["relative_mismatch"]}, ok)]


def _run_apriori(prep: Prepared, out: Path, cfg_hash: str, artifacts: list) -> tuple[dict, list]:
    cfg = prep.config
    sweep = verify.apriori_sweep(prep.medium, prep.source, prep.dt, prep.steps // 4, cfg.generator)
    growth = max(sweep[4][k] / sweep[1][k] for k in ("kappa_sup", "kappa_l2"))
    tol = verify.tolerances("apriori", cfg.scale)
    ok = growth <= tol["sweep_growth"]
    measured = {"sweep": sweep, "sweep_growth": growth}
    return measured, [_check_entry("apriori", {"sweep_growth": growth}, {"sweep_growth": tol["sweep_growth"]}, ok)]


def _run_symbol_audit(prep: Prepared, out: Path, cfg_hash: str, artifacts: list) -> tuple[dict, list]:
    cfg = prep.config
    medium = prep.profile.exterior(1) if prep.profile is not None else ExteriorMedium(1.0, 1.0, 1)
    audits, checks = [], []
    pos_tol = verify.tolerances("symbol-positivity", cfg.scale)
    cont_tol = verify.tolerances("symbol-continuity", cfg.scale)
    for seed in cfg.seeds:
        audit = symbol_bound_audit(cfg.samples, seed, medium)
        audits.append(audit.as_dict())
        ok = (audit.min_positivity_margin >= pos_tol["min_margin"]
              and audit.max_continuity_ratio <= cont_tol["max_continuity_ratio"]
              and audit.max_f_ratio <= cont_tol["max_f_ratio"])
        checks.append({**_check_entry("symbol-audit", {"min_positivity_margin": audit.min_positivity_margin,
                                                       "max_continuity_ratio": audit.max_continuity_ratio,
                                                       "max_f_ratio": audit.max_f_ratio},
                                      {"min_positivity_margin": pos_tol["min_margin"],
                                       "max_continuity_ratio": cont_tol["max_continuity_ratio"],
                                       "max_f_ratio": cont_tol["max_f_ratio"]}, ok), "seed": seed})
    writers.write_json(out / "symbol_audit.json", {"config_hash": cfg_hash, "audits": audits})
    artifacts.append("symbol_audit.json")
    return {"audits": len(audits)}, checks


def _run_lemma_suite(prep: Prepared, out: Path, cfg_hash: str, artifacts: list, threads: int = 1):
    cfg = prep.config
    report = verify.run_suite(cfg.checks, seed=cfg.seeds[0], threads=threads, scale=cfg.scale, preset=cfg.preset)
    results = [{k: v for k, v in r.as_dict().items() if k != "wall_clock_seconds"} for r in report.results]
    writers.write_json(out / "suite.json", {"config_hash": cfg_hash, "results": results})
    (out / "suite.txt").write_text(f"# config_hash={cfg_hash}\n" + verify.summary_table(report.results) + "\n",
                                   encoding="utf-8")
    artifacts += ["suite.json", "suite.txt"]
    timing = {r.check_id: r.wall_clock_seconds for r in report.results}
    return {"checks_run": len(results)}, results, timing


RUNNERS = {
    "pec-energy": _run_pec_energy,
    "tbc-reflection": _run_reflection,
    "oracle-compare": _run_oracle,
    "apriori-sweep": _run_apriori,
    "symbol-audit": _run_symbol_audit,
}


def execute(config: RunConfig, out_dir=None, threads: int = 1, base_dir: Path | None = None) -> ScenarioOutcome:
    """Ejecuta un escenario y escribe sus artefactos en ``<out>/<escenario>-<hash12>/``.

    El resumen JSON es idéntico byte a byte para la misma configuración; el
    tiempo de reloj se escribe aparte en ``timing.json``.
    """
    start = time.perf_counter()
    cfg_hash = config.hash()
    out = Path(out_dir or config.out or "out") / f"{config.scenario}-{cfg_hash[:12]}"
    out.mkdir(parents=True, exist_ok=True)
    artifacts: list = []
    timing: dict = {}
    logger.info("Escenario %s (hash %s) -> %s", config.scenario, cfg_hash[:12], out)

    try:
        prep = prepare(config, base_dir)
        if config.scenario == "lemma-suite":
            measured, checks, timing = _run_lemma_suite(prep, out, cfg_hash, artifacts, threads)
        else:
            measured, checks = RUNNERS[config.scenario](prep, out, cfg_hash, artifacts)
        if config.write_kernels and prep.medium is not None and config.scenario in TBC_SCENARIOS:
            kernels = stepper.build_kernels(prep.medium, prep.dt, max(prep.steps, 1), config.generator)
            for side, kern in kernels.items():
                writers.write_kernel(out / f"kernel_{side}.bin", kern, cfg_hash)
                artifacts.append(f"kernel_{side}.bin")
    except (ConfigurationError, DataError):
        raise
    except SlabTbcError as e:
        logger.error("Escenario %s falló: %s", config.scenario, e)
        raise ScenarioError(config.scenario, e) from e

    failed = any(c["status"] == "fail" for c in checks)
    status = "fail" if failed else "pass"
    summary = {
        "scenario": config.scenario,
        "config_hash": cfg_hash,
        "status": status,
        "exit_code": int(failed),
        "measured": measured,
        "checks": checks,
        "artifacts": sorted(artifacts),
    }
    writers.write_json(out / "summary.json", summary)
    wall = time.perf_counter() - start
    writers.write_json(out / "timing.json", {"config_hash": cfg_hash, "wall_clock_seconds": wall, "checks": timing})
    logger.info("Escenario %s terminado: %s en %.2fs", config.scenario, status, wall)
    return ScenarioOutcome(config.scenario, cfg_hash, status, int(failed), out,
                           sorted(artifacts) + ["summary.json", "timing.json"], summary, wall)

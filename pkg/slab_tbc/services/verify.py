# slab_tbc/services/verify.py
"""
Suite de verificación: un verificador por cota analítica, más los oráculos
de extremo a extremo (dominio s, división E = U + e y reflexión).

Cada verificador devuelve un CheckResult con las cantidades medidas, las
tolerancias (declaradas estáticamente en TOLERANCES) y la procedencia de
las entradas. Donde la cota solo afirma existencia de una constante, se
mide la constante, se exige que sea finita y estable bajo refinamiento
(20 %) y se registra.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from ..errors import ConfigurationError, DegenerateConstantError, SlabTbcError, UndefinedRatioError
from . import cq, sdomain, sources, stepper, writers
from .spectral import (
    STANDARD_WEIGHT,
    LateralGrid,
    TangentialTrace,
    duality_pairing,
    hcurl_norm,
    inverse_lateral,
    trace_inequality_constant,
    trace_norm,
)
from .symbols import (
    ComplexFrequency,
    ExteriorMedium,
    continuity_constant,
    hermitian_min_eigenvalue,
    positivity_margin,
    symbol_bound_audit,
    symbol_set,
)

logger = logging.getLogger(__name__)

STATUSES = ("pass", "fail", "degenerate", "out-of-scope")
SCALES = {
    "desk": {"lateral": 16, "nz": 32, "steps": 200, "fields": 100, "samples": 2000, "trials": 40, "pairs": 200},
    "reference": {"lateral": 32, "nz": 64, "steps": 500, "fields": 1000, "samples": 10000, "trials": 1000, "pairs": 1000},
}
REFINEMENT_SLACK = 0.2

TOLERANCES = {
    "duality": {"max_ratio": 1.0 + 1e-12, "physical_vs_spectral": 1e-12},
    "trace-inequality": {"max_ratio_over_constant": 1.05},
    "symbol-positivity": {"min_margin": -1e-12, "min_hermitian_eigenvalue": -1e-12},
    "symbol-continuity": {"max_continuity_ratio": 1.0 + 1e-9, "max_f_ratio": 1.0 + 1e-12,
                          "max_pairing_ratio": 1.0 + 1e-9},
    "laplace-parseval": {"residual": 1e-6, "integrator_weights": 1e-6, "transform_error": 1e-6},
    "auxiliary-stability": {"refinement_change": REFINEMENT_SLACK, "homogeneity": 1e-10,
                            "coercivity_margin": -1e-10, "weak_form_defect": 1e-10, "residual": 1e-10,
                            "closed_form_order": (1.9, 2.1)},
    "pec-sdomain-stability": {"refinement_change": REFINEMENT_SLACK, "wall_trace": 0.0},
    "pec-energy": {"scheme_drift": 1e-12, "continuum_drift": 1e-3, "taylor_identity": 1e-10,
                   "divergence_drift": 1e-10, "refinement_drift_ratio": (2.5, 6.0)},
    "reduced-sdomain-stability": {"refinement_change": REFINEMENT_SLACK, "homogeneity": 1e-10,
                                  "weak_form_defect": 1e-10, "coercivity_margin": -1e-10},
    "reduced-stability": {"refinement_change": REFINEMENT_SLACK},
    "passivity": {"certificate": -1e-10, "boundary_work_over_energy": -1e-8},
    "apriori": {"sweep_growth": 1.0 + REFINEMENT_SLACK, "refinement_change": REFINEMENT_SLACK},
    "oracle-agreement": {"relative_mismatch": 1e-3, "order": (1.8, 2.1)},
    "splitting": {"relative_difference": 1e-10},
    "tbc-reflection": {"relative_mismatch": 1e-3, "reflection": 1e-3, "versus_pec": 0.1, "order": (1.8, 2.1)},
}

# la escala de escritorio usa mallas gruesas: las cotas que escalan con dt^2 se relajan
SCALE_OVERRIDES = {
    "desk": {
        "pec-energy": {"continuum_drift": 1e-2},
        "oracle-agreement": {"relative_mismatch": 5e-3},
        # 16x16x32 frente a 32x32x64: el desajuste con la referencia escala con dz^2 + dt^2
        "tbc-reflection": {"relative_mismatch": 2e-2, "reflection": 2e-2},
    },
}


def tolerances(check_id: str, scale: str = "desk") -> dict:
    merged = dict(TOLERANCES[check_id])
    merged.update(SCALE_OVERRIDES.get(scale, {}).get(check_id, {}))
    return merged


OUT_OF_SCOPE = {
    "laplace-causality": "La caracterización de transformadas de Laplace causales solo justifica la "
                         "inversión; ninguna operación la implementa.",
    "density": "El resultado de densidad y las pruebas de existencia se verifican por sus consecuencias, "
               "no como tales.",
}


@dataclass
class CheckResult:
    check_id: str
    status: str
    measured: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    provenance: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return writers.jsonable(asdict(self))


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _within(value: float, bounds: tuple) -> bool:
    return bounds[0] <= value <= bounds[1]


def _relative_change(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


# ---------------------------------------
# Registro
# ---------------------------------------
CHECKS: dict[str, Callable[..., CheckResult]] = {}


def checker(check_id: str):
    def deco(fn):
        CHECKS[check_id] = fn
        fn.check_id = check_id
        return fn
    return deco


def _grid(scale: str, lateral: int | None = None, nz: int | None = None, period: float = 1.0,
          h1: float = 1.0, h2: float = 0.0) -> LateralGrid:
    p = SCALES[scale]
    n = lateral or p["lateral"]
    return LateralGrid(period, period, n, n, h1, h2, nz or p["nz"])


# ---------------------------------------
# Trazas y normas
# ---------------------------------------
def _random_traces(grid: LateralGrid, rng: np.random.Generator, count: int) -> np.ndarray:
    shape = (count, 2, *grid.lateral_shape)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@checker("duality")
def check_duality(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT, n_pairs: int | None = None,
                  grid: LateralGrid | None = None) -> CheckResult:
    """|<u, v>| <= ||u||_div · ||v||_curl sobre pares aleatorios."""
    grid = grid or _grid(scale, lateral=8)
    n_pairs = n_pairs or SCALES[scale]["pairs"]
    rng = np.random.default_rng(seed)
    us, vs = _random_traces(grid, rng, n_pairs), _random_traces(grid, rng, n_pairs)
    worst, agree = 0.0, 0.0
    for cu, cv in zip(us, vs):
        u, v = TangentialTrace(grid, 1, cu), TangentialTrace(grid, 1, cv)
        p = duality_pairing(u, v)
        bound = trace_norm(u, "div_minus_half", preset) * trace_norm(v, "curl_minus_half", preset)
        worst = max(worst, abs(p) / bound)
        agree = max(agree, abs(p - duality_pairing(u, v, method="physical")) / max(abs(p), 1e-300))
    tol = tolerances("duality", scale)
    measured = {"max_ratio": worst, "physical_vs_spectral": agree}
    ok = worst <= tol["max_ratio"] and agree <= tol["physical_vs_spectral"]
    return CheckResult("duality", _status(ok), measured, tol, seed,
                       {"grid": grid.as_dict(), "pairs": n_pairs, "preset": preset})


def _smooth_field(grid: LateralGrid, rng: np.random.Generator, max_mode: int = 3) -> np.ndarray:
    coeffs = np.zeros((3, *grid.node_shape), dtype=complex)
    kx = np.abs(grid.mode_indices_x)[:, None] <= max_mode
    ky = np.abs(grid.mode_indices_y)[None, :] <= max_mode
    low = kx & ky
    zeta = (grid.z_nodes - grid.h2) / grid.thickness
    basis = np.stack([np.ones_like(zeta), zeta, np.cos(np.pi * zeta), np.sin(2 * np.pi * zeta)])
    for c in range(3):
        amp = (rng.standard_normal(grid.lateral_shape) + 1j * rng.standard_normal(grid.lateral_shape)) * low
        mix = rng.standard_normal((*grid.lateral_shape, basis.shape[0]))
        coeffs[c] = amp[..., None] * np.einsum("xyb,bz->xyz", mix, basis)
    return inverse_lateral(coeffs, grid, axes=(-3, -2)).real


@checker("trace-inequality")
def check_trace_inequality(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                           n_fields: int | None = None, grid: LateralGrid | None = None) -> CheckResult:
    """||u_Gamma||_curl / ||u||_H(curl) <= C (1 + 5 %) con C = max{sqrt(1 + 1/(h1-h2)), sqrt(2)}."""
    grid = grid or _grid(scale)
    n_fields = n_fields or SCALES[scale]["fields"]
    rng = np.random.default_rng(seed)
    c_const = trace_inequality_constant(grid)
    zeta = (grid.z_nodes - grid.h2) / grid.thickness
    fixed = [
        np.ones((3, *grid.node_shape)),
        np.broadcast_to(zeta, (3, *grid.node_shape)).copy(),
    ]
    worst = 0.0
    worst_fixed = 0.0
    for i in range(n_fields + len(fixed)):
        u = fixed[i] if i < len(fixed) else _smooth_field(grid, rng)
        denom = hcurl_norm(u, grid)
        for side in (1, 2):
            tr = TangentialTrace.from_field(u, grid, side)
            ratio = trace_norm(tr, "curl_minus_half", preset) / denom / c_const
            worst = max(worst, ratio)
            if i < len(fixed):
                worst_fixed = max(worst_fixed, ratio)
    tol = tolerances("trace-inequality", scale)
    measured = {"max_ratio_over_constant": worst, "fixed_fields_ratio": worst_fixed, "constant": c_const}
    return CheckResult("trace-inequality", _status(worst <= tol["max_ratio_over_constant"]), measured, tol, seed,
                       {"grid": grid.as_dict(), "fields": n_fields, "preset": preset})


# ---------------------------------------
# Símbolos
# ---------------------------------------
def _default_medium(side: int = 1) -> ExteriorMedium:
    return ExteriorMedium(1.0, 1.0, side)


@checker("symbol-positivity")
def check_positivity(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                     n_samples: int | None = None, medium: ExteriorMedium | None = None) -> CheckResult:
    """Re <B u, u> >= 0 y parte hermítiana semidefinida positiva por modo."""
    medium = medium or _default_medium()
    n_samples = n_samples or SCALES[scale]["samples"]
    audit = symbol_bound_audit(n_samples, seed, medium)
    rng = np.random.default_rng(seed + 1)
    grid = _grid(scale, lateral=8)
    trace_margin = np.inf
    for _ in range(20):
        s = complex(10 ** rng.uniform(-2, 2), rng.uniform(-100, 100))
        cf = _random_traces(grid, rng, 1)[0]
        tr = TangentialTrace(grid, 1, cf)
        norm_sq = float(np.sum(np.abs(cf) ** 2))
        trace_margin = min(trace_margin, positivity_margin(tr, s, medium) / norm_sq)
        herm = hermitian_min_eigenvalue(symbol_set(grid, s, medium).matrix)
        trace_margin = min(trace_margin, float(np.min(herm)) / max(1.0, float(np.max(np.abs(herm)))))
    tol = tolerances("symbol-positivity", scale)
    measured = {
        "min_margin": min(audit.min_positivity_margin, trace_margin),
        "min_hermitian_eigenvalue": audit.min_hermitian_eigenvalue,
        "worst_case_inputs": audit.worst_case_inputs[:1],
    }
    ok = measured["min_margin"] >= tol["min_margin"] and measured["min_hermitian_eigenvalue"] >= tol[
        "min_hermitian_eigenvalue"]
    return CheckResult("symbol-positivity", _status(ok), measured, tol, seed,
                       {"samples": n_samples, "medium": asdict(medium)})


@checker("symbol-continuity")
def check_continuity(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                     n_samples: int | None = None, medium: ExteriorMedium | None = None,
                     s: complex | None = None) -> CheckResult:
    """Cota de continuidad C·C_j muestreada; con s2 = 0 el resultado es degenerado."""
    medium = medium or _default_medium()
    n_samples = n_samples or SCALES[scale]["samples"]
    tol = tolerances("symbol-continuity", scale)
    if s is not None:
        try:
            c_j = continuity_constant(s, medium)
        except DegenerateConstantError as e:
            logger.warning("Continuidad degenerada en s=%s: %s", s, e)
            return CheckResult("symbol-continuity", "degenerate", {"s": complex(s), "reason": str(e)}, tol, seed,
                               {"medium": asdict(medium)})
    else:
        c_j = None
    audit = symbol_bound_audit(n_samples, seed, medium)
    measured = {
        "max_continuity_ratio": audit.max_continuity_ratio,
        "max_f_ratio": audit.max_f_ratio,
        "max_pairing_ratio": audit.max_pairing_ratio,
        "trace_constant": audit.trace_constant,
        "continuity_constant_at_s": c_j,
        "worst_case_inputs": audit.worst_case_inputs[1:],
    }
    ok = all(measured[k] <= tol[k] for k in ("max_continuity_ratio", "max_f_ratio", "max_pairing_ratio"))
    return CheckResult("symbol-continuity", _status(ok), measured, tol, seed,
                       {"samples": n_samples, "medium": asdict(medium), "sample_ranges": audit.sample_ranges})


# ---------------------------------------
# Laplace
# ---------------------------------------
@checker("laplace-parseval")
def check_parseval(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                   dt: float = 1e-3, horizon: float = 20.0, s1: float = 1.0) -> CheckResult:
    """Parseval para e^{-t} y pesos CQ del integrador 1/s."""
    n = int(round(horizon / dt))
    t = dt * np.arange(n + 1)
    u = cq.TimeSignal(dt, np.exp(-t))
    par = cq.parseval_residual(u, u, s1)
    exact = 1.0 / (2 * s1 + 2)

    transform_err = 0.0
    for s in (complex(s1, 0.0), complex(s1, 3.0), complex(2 * s1, -7.0)):
        transform_err = max(transform_err, abs(cq.laplace_transform(u, s) - 1.0 / (s + 1.0)) * abs(s + 1.0))

    weight_err = 0.0
    for gen in cq.GENERATORS:
        kern = cq.cq_weights(lambda sv: 1.0 / sv, 0.01, 64, gen)
        ref = cq.integrator_weights(gen, 0.01, 64)
        weight_err = max(weight_err, float(np.max(np.abs(kern.weights - ref)) / 0.01))
    tol = tolerances("laplace-parseval", scale)
    measured = {
        "residual": par.residual, "lhs": par.lhs, "rhs": par.rhs, "analytic": exact,
        "truncation_error": par.truncation_error, "integrator_weights": weight_err,
        "transform_error": transform_err,
    }
    ok = all(measured[k] <= tol[k] for k in tol)
    return CheckResult("laplace-parseval", _status(ok), measured, tol, seed,
                       {"dt": dt, "horizon": horizon, "s1": s1, "signal": "exp(-t)"})


# ---------------------------------------
# Dominio s
# ---------------------------------------
def _mode_bump(nz: int, dz: float, h2: float, center: float, half_width: float, at: str = "node") -> np.ndarray:
    z = h2 + dz * (np.arange(nz + 1) if at == "node" else np.arange(nz) + 0.5)
    r = np.abs(z - center) / half_width
    return np.where(r < 1.0, np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** 2, 0.0)


def _aux_source(profile: sdomain.LayeredProfile, nz: int) -> sdomain.ModeVector:
    dz = (profile.h1 - profile.h2) / nz
    mid = 0.5 * (profile.h1 + profile.h2)
    hw = 0.3 * (profile.h1 - profile.h2)
    return sdomain.ModeVector(
        _mode_bump(nz, dz, profile.h2, mid, hw).astype(complex),
        0.5 * _mode_bump(nz, dz, profile.h2, mid + 0.1, hw).astype(complex),
        0.25 * _mode_bump(nz, dz, profile.h2, mid, hw, at="half").astype(complex),
    )


def closed_form_order(nzs=(64, 128, 256, 512), s: complex = 1 + 1j) -> tuple[float, list]:
    """Orden observado frente a la solución cerrada con xi = 0 y fuente puntual."""
    profile = sdomain.LayeredProfile.homogeneous(1.0, 0.0)
    errors = []
    for nz in nzs:
        dz = 1.0 / nz
        src = sdomain.ModeVector.zeros(nz)
        src.u1[nz // 2] = 1.0 / dz
        sol = sdomain.solve_mode((0.0, 0.0), s, profile, nz, src)
        z = dz * np.arange(nz + 1)
        exact = sdomain.point_source_solution(z, 0.5, s, 1.0, 1.0)
        errors.append(float(np.max(np.abs(sol.u.u1 - exact)) / np.max(np.abs(exact))))
    slope = np.polyfit(np.log(nzs), np.log(errors), 1)[0]
    return float(-slope), errors


@checker("auxiliary-stability")
def check_theorem_at(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                     s: complex = 1 + 1j, nz: int = 64) -> CheckResult:
    """(||curl u|| + ||s u||) s1 / ||s j|| finito, estable bajo refinamiento y homogéneo."""
    tol = tolerances("auxiliary-stability", scale)
    profile = sdomain.LayeredProfile.homogeneous(1.0, 0.0)
    measured: dict = {}
    ratios = []
    worst_coercivity, worst_defect, worst_residual = np.inf, 0.0, 0.0
    for xi in ((0.0, 0.0), (1.0, 0.0)):
        per_nz = []
        for n in (nz, 2 * nz):
            src = _aux_source(profile, n)
            sol = sdomain.solve_mode(xi, s, profile, n, src)
            per_nz.append(sdomain.theorem_at_check(sol, src, s))
            worst_coercivity = min(worst_coercivity, sdomain.coercivity_margin(sol))
            worst_defect = max(worst_defect, sdomain.weak_form_defect(sol, src))
            worst_residual = max(worst_residual, sol.residual)
        ratios.append(per_nz)
    src = _aux_source(profile, nz)
    base = sdomain.solve_mode((1.0, 0.0), s, profile, nz, src)
    doubled = sdomain.solve_mode((1.0, 0.0), s, profile, nz, src.scaled(2.0))
    homogeneity = _relative_change(sdomain.theorem_at_check(base, src, s),
                                   sdomain.theorem_at_check(doubled, src.scaled(2.0), s))

    direction = complex(s) / abs(complex(s))
    sweep = {}
    for s1 in (0.5, 1.0, 2.0):
        sv = direction * s1 / direction.real
        sol = sdomain.solve_mode((1.0, 0.0), sv, profile, nz, src)
        sweep[s1] = sdomain.theorem_at_check(sol, src, sv)

    two_layer = sdomain.LayeredProfile((0.0, 0.4, 1.0), (1.0, 2.25), (1.0, 1.0))
    sol2 = sdomain.solve_mode((1.0, 0.0), s, two_layer, nz, _aux_source(two_layer, nz))
    order, errors = closed_form_order()

    measured.update({
        "ratios": ratios,
        "refinement_change": max(_relative_change(a, b) for a, b in ratios),
        "homogeneity": homogeneity,
        "s1_sweep": sweep,
        "coercivity_margin": worst_coercivity,
        "weak_form_defect": worst_defect,
        "residual": max(worst_residual, sol2.residual),
        "closed_form_order": order,
        "closed_form_errors": errors,
    })
    ok = (
        all(np.isfinite(r) for pair in ratios for r in pair)
        and all(np.isfinite(v) for v in sweep.values())
        and measured["refinement_change"] <= tol["refinement_change"]
        and homogeneity <= tol["homogeneity"]
        and worst_coercivity >= tol["coercivity_margin"]
        and worst_defect <= tol["weak_form_defect"]
        and measured["residual"] <= tol["residual"]
        and _within(order, tol["closed_form_order"])
    )
    return CheckResult("auxiliary-stability", _status(ok), measured, tol, seed,
                       {"s": complex(s), "nz": nz, "profile": profile.as_dict()})


def _pec_mode_data(nz: int, dz: float, xi) -> tuple[sdomain.ModeVector, sdomain.ModeVector]:
    e0 = sdomain.ModeVector(
        _mode_bump(nz, dz, 0.0, 0.5, 0.3).astype(complex),
        np.zeros(nz + 1, complex),
        np.zeros(nz, complex),
    )
    h0 = sdomain.ModeVector(
        np.zeros(nz, complex),
        _mode_bump(nz, dz, 0.0, 0.45, 0.3, at="half").astype(complex),
        np.zeros(nz + 1, complex),
    )
    return e0, sdomain.curl_dual(h0, xi, nz, dz)


@checker("pec-sdomain-stability")
def check_lemma_ase(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                    s: complex = 1 + 1j, nz: int = 64, xi=(1.0, 0.0)) -> CheckResult:
    """Problema PEC en el dominio s con j = eps E0 + s^-1 curl H0."""
    tol = tolerances("pec-sdomain-stability", scale)
    profile = sdomain.LayeredProfile.homogeneous(1.0, 0.0)
    ratios, wall = [], 0.0
    for n in (nz, 2 * nz):
        dz = 1.0 / n
        e0, curl_h0 = _pec_mode_data(n, dz, xi)
        j = sdomain.pec_source(profile, n, e0, curl_h0, s)
        sol = sdomain.solve_mode(xi, s, profile, n, j, closure="pec")
        ratios.append(sdomain.lemma_ase_check(sol, e0, curl_h0, s))
        wall = max(wall, float(np.max(np.abs([sol.u.u1[0], sol.u.u1[-1], sol.u.u2[0], sol.u.u2[-1]]))))
    change = _relative_change(*ratios)
    measured = {"ratios": ratios, "refinement_change": change, "wall_trace": wall}
    ok = all(np.isfinite(ratios)) and change <= tol["refinement_change"] and wall <= tol["wall_trace"]
    return CheckResult("pec-sdomain-stability", _status(ok), measured, tol, seed,
                       {"s": complex(s), "nz": nz, "xi": list(xi)})


def _reduced_data(nz: int, xi):
    dz = 1.0 / nz
    j = sdomain.ModeVector(
        _mode_bump(nz, dz, 0.0, 0.5, 0.25).astype(complex),
        np.zeros(nz + 1, complex),
        np.zeros(nz, complex),
    )
    boundary = {1: (0.3 + 0.1j, -0.2), 2: (-0.1, 0.25j)}
    return j, boundary


@checker("reduced-sdomain-stability")
def check_lemma_es(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                   s: complex = 1 + 1j, nz: int = 64, xi=(1.0, 0.0)) -> CheckResult:
    """Problema reducido en el dominio s con fuente -J y datos V x n_j en la frontera."""
    tol = tolerances("reduced-sdomain-stability", scale)
    profile = sdomain.LayeredProfile.homogeneous(1.0, 0.0)
    ratios = []
    defect, coercivity = 0.0, np.inf
    for n in (nz, 2 * nz):
        j, g = _reduced_data(n, xi)
        rhs = j.scaled(-1.0)
        sol = sdomain.solve_mode(xi, s, profile, n, rhs, boundary_data=g)
        ratios.append(sdomain.lemma_es_check(sol, j, g, s, preset))
        defect = max(defect, sdomain.weak_form_defect(sol, rhs, g))
        coercivity = min(coercivity, sdomain.coercivity_margin(sol))
    j, g = _reduced_data(nz, xi)
    sol2 = sdomain.solve_mode(xi, s, profile, nz, j.scaled(-2.0),
                              boundary_data={k: (2 * a, 2 * b) for k, (a, b) in g.items()})
    homogeneity = _relative_change(
        ratios[0], sdomain.lemma_es_check(sol2, j.scaled(2.0), {k: (2 * a, 2 * b) for k, (a, b) in g.items()},
                                          s, preset)
    )
    measured = {
        "ratios": ratios,
        "refinement_change": _relative_change(*ratios),
        "homogeneity": homogeneity,
        "weak_form_defect": defect,
        "coercivity_margin": coercivity,
    }
    ok = (
        all(np.isfinite(ratios))
        and measured["refinement_change"] <= tol["refinement_change"]
        and homogeneity <= tol["homogeneity"]
        and defect <= tol["weak_form_defect"]
        and coercivity >= tol["coercivity_margin"]
    )
    return CheckResult("reduced-sdomain-stability", _status(ok), measured, tol, seed,
                       {"s": complex(s), "nz": nz, "xi": list(xi), "preset": preset})


# ---------------------------------------
# Dominio del tiempo
# ---------------------------------------
def _pulse(medium: stepper.SlabMedium, lateral: bool = True, width: float = 0.35) -> stepper.SourceTerm:
    g = medium.grid
    center = (0.5 * g.period_x, 0.5 * g.period_y, 0.5 * (g.h1 + g.h2))
    half = (width * g.period_x, width * g.period_y, width * g.thickness)
    return sources.plane_pulse(medium, center, half, lateral=lateral)


def _pec_energy_run(grid: LateralGrid, steps: int, lateral: bool = True):
    medium = stepper.SlabMedium.uniform(grid)
    src = _pulse(medium, lateral=lateral)
    plan = stepper.RunPlan(medium, src, medium.dt_for(), steps, closure="pec")
    return medium, src, stepper.run(plan)


@checker("pec-energy")
def check_pec_energy(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                     steps: int | None = None) -> CheckResult:
    """Energía del esquema exacta, deriva de e1, identidad de Taylor inicial y constantes de e2, e3."""
    tol = tolerances("pec-energy", scale)
    steps = steps or SCALES[scale]["steps"]
    grid = _grid(scale)
    medium, src, res = _pec_energy_run(grid, steps)
    scheme = np.array(res.report.scheme_energy)
    e1 = res.report.series("e1")
    e2 = res.report.series("e2")
    e3 = res.report.series("e3")
    if scheme[0] == 0.0:
        return CheckResult("pec-energy", "pass", {"zero_data": True}, tol, seed, {"grid": grid.as_dict()})
    scheme_drift = float(np.max(np.abs(scheme - scheme[0])) / scheme[0])
    e1_drift = float(np.max(np.abs(e1 - e1[0])) / e1[0])

    # identidad de Taylor del primer paso: (E^1 - E^0)/dt = dE + dt/2 d2E
    rates = stepper.initial_rates(medium, src)
    check_state = stepper.init(medium, src, res.state.dt)
    e_start = check_state.e
    stepper.step_pec(check_state, medium, src)
    diff = tuple((a - b) / res.state.dt for a, b in zip(check_state.e, e_start))
    taylor = tuple(a + 0.5 * res.state.dt * b for a, b in zip(rates["dE"], rates["d2E"]))
    norm_de = stepper.field_norm(rates["dE"], grid)
    taylor_err = stepper.field_norm(tuple(a - b for a, b in zip(diff, taylor)), grid) / norm_de
    first_order = stepper.field_norm(tuple(a - b for a, b in zip(diff, rates["dE"])), grid) / norm_de

    e0, h0 = src.initial_e(), src.initial_h()
    curl_norm_sq = (stepper.inner(stepper.curl_h(e0, grid), stepper.curl_h(e0, grid), grid)
                    + stepper.inner(stepper.curl_e_interior(h0, grid), stepper.curl_e_interior(h0, grid), grid))
    cc_e = stepper.curl_e(stepper.curl_h(e0, grid), grid)
    cc_h = stepper.curl_h(stepper.curl_e_interior(h0, grid), grid)
    curlcurl_sq = stepper.inner(cc_e, cc_e, grid) + stepper.inner(cc_h, cc_h, grid)
    c2 = float(np.nanmax(e2) / curl_norm_sq) if curl_norm_sq > 0 else float("nan")
    c3 = float(np.nanmax(e3) / curlcurl_sq) if curlcurl_sq > 0 else float("nan")

    # transporte de la divergencia
    div0 = stepper.divergence_nodes(stepper._scale(e0, medium.eps), grid)
    div_n = stepper.divergence_nodes(stepper._scale(res.state.e, medium.eps), grid)
    div_drift = float(np.max(np.abs(div_n - div0))) / res.state.div_scale

    fine_grid = LateralGrid(grid.period_x, grid.period_y, 2 * grid.modes_x, 2 * grid.modes_y,
                            grid.h1, grid.h2, 2 * grid.nz)
    _, _, fine = _pec_energy_run(fine_grid, 2 * steps)
    e1_fine = fine.report.series("e1")
    fine_drift = float(np.max(np.abs(e1_fine - e1_fine[0])) / e1_fine[0])
    drift_ratio = e1_drift / fine_drift if fine_drift > 0 else float("inf")

    measured = {
        "scheme_drift": scheme_drift,
        "continuum_drift": e1_drift,
        "continuum_drift_refined": fine_drift,
        "refinement_drift_ratio": drift_ratio,
        "taylor_identity": taylor_err,
        "first_order_rate_mismatch": first_order,
        "e2_constant": c2,
        "e3_constant": c3,
        "divergence_drift": div_drift,
    }
    ok = (
        scheme_drift <= tol["scheme_drift"]
        and e1_drift <= tol["continuum_drift"]
        and taylor_err <= tol["taylor_identity"]
        and div_drift <= tol["divergence_drift"]
        and _within(drift_ratio, tol["refinement_drift_ratio"])
        and np.isfinite(c2) and np.isfinite(c3)
    )
    return CheckResult("pec-energy", _status(ok), measured, tol, seed,
                       {"grid": grid.as_dict(), "steps": steps, "cfl": stepper.DEFAULT_CFL})


def _stability_norms(state: stepper.FieldState, medium: stepper.SlabMedium) -> float:
    """||dE/dt|| + ||curl E|| + ||dH/dt|| + ||curl H|| en el paso actual."""
    g = medium.grid
    c_e = stepper.curl_h(state.e, g)
    dh = stepper._scale(c_e, medium.mu, -1.0)
    h_bar = stepper._add(state.h, dh, -0.5 * state.dt)
    total = stepper.field_norm(c_e, g) + stepper.field_norm(dh, g)
    total += stepper.field_norm(stepper.curl_e_interior(h_bar, g), g)
    if state.e_prev:
        de = tuple((a - b) / state.dt for a, b in zip(state.e, state.e_prev[0]))
        total += stepper.field_norm(de, g)
    return total


def _combined_source(medium: stepper.SlabMedium, duration: float) -> stepper.SourceTerm:
    g = medium.grid
    pulse = _pulse(medium, width=0.25)
    current = sources.current_pulse(
        g,
        center=(0.4 * g.period_x, 0.6 * g.period_y, g.h2 + 0.45 * g.thickness),
        width=(0.2 * g.period_x, 0.2 * g.period_y, 0.2 * g.thickness),
        waveform=sources.SineSquaredPulse(duration),
        polarization="y",
    )
    return sources.combine(pulse, current)


def _current_h1_norm(src: stepper.SourceTerm, grid: LateralGrid, t_end: float, dt: float) -> tuple[float, float]:
    """(||J||_{H^1(0,T;L2)}, ||dJ/dt||_{L^1(0,T;L2)}) para J separable."""
    if not src.has_current:
        return 0.0, 0.0
    shape_norm = stepper.field_norm(src.j_shape, grid)
    t = np.linspace(0.0, t_end, max(int(t_end / dt) * 4, 16) + 1)
    f = np.array([src.waveform(ti) for ti in t])
    df = np.gradient(f, t)
    h1 = np.sqrt(trapezoid(f**2 + df**2, t)) * shape_norm
    l1 = trapezoid(np.abs(df), t) * shape_norm
    return float(h1), float(l1)


def _hcurl_e(fields_: tuple, grid: LateralGrid) -> float:
    c = stepper.curl_h(fields_, grid)
    return float(np.sqrt(stepper.inner(fields_, fields_, grid) + stepper.inner(c, c, grid)))


def _hcurl_h(fields_: tuple, grid: LateralGrid) -> float:
    c = stepper.curl_e_interior(fields_, grid)
    return float(np.sqrt(stepper.inner(fields_, fields_, grid) + stepper.inner(c, c, grid)))


def _reduced_ratio(grid: LateralGrid, steps: int, scale_data: float = 1.0) -> tuple[float, float, float]:
    medium = stepper.SlabMedium.uniform(grid)
    dt = medium.dt_for()
    src = _combined_source(medium, duration=0.3 * steps * dt).scaled(scale_data)
    peaks = []
    plan = stepper.RunPlan(medium, src, dt, steps, closure="tbc", snapshot_every=1,
                           on_snapshot=lambda st: peaks.append(_stability_norms(st, medium)))
    stepper.run(plan)
    lhs = max(peaks) if peaks else 0.0
    j_h1, _ = _current_h1_norm(src, grid, steps * dt, dt)
    rhs = _hcurl_e(src.initial_e(), grid) + _hcurl_h(src.initial_h(), grid) + j_h1
    if rhs == 0.0:
        raise UndefinedRatioError("Datos nulos")
    return lhs / rhs, lhs, rhs


@checker("reduced-stability")
def check_reduced_stability(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                            steps: int | None = None) -> CheckResult:
    """max_t(||dE/dt|| + ||curl E|| + ||dH/dt|| + ||curl H||) frente a los datos, con TBC."""
    tol = tolerances("reduced-stability", scale)
    steps = steps or SCALES[scale]["steps"] // 2
    grid = _grid(scale)
    try:
        coarse, lhs, rhs = _reduced_ratio(grid, steps)
    except UndefinedRatioError as e:
        return CheckResult("reduced-stability", "degenerate", {"reason": str(e)}, tol, seed, {})
    fine_grid = LateralGrid(grid.period_x, grid.period_y, 2 * grid.modes_x, 2 * grid.modes_y,
                            grid.h1, grid.h2, 2 * grid.nz)
    fine, _, _ = _reduced_ratio(fine_grid, 2 * steps)
    change = _relative_change(coarse, fine)
    measured = {"ratio": coarse, "ratio_refined": fine, "lhs": lhs, "rhs": rhs, "refinement_change": change}
    ok = np.isfinite(coarse) and np.isfinite(fine) and change <= tol["refinement_change"]
    return CheckResult("reduced-stability", _status(ok), measured, tol, seed,
                       {"grid": grid.as_dict(), "steps": steps})


@checker("passivity")
def check_passivity(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                    trials: int | None = None) -> CheckResult:
    """Certificado CQ de pasividad (BDF1, BDF2) y trabajo acumulado en frontera de un pulso."""
    tol = tolerances("passivity", scale)
    trials = trials or SCALES[scale]["trials"]
    small = LateralGrid(1.0, 1.0, 4, 4, 1.0, 0.0, 8)
    certs = {}
    for gen in cq.GENERATORS:
        kern = cq.capacity_kernel(small, _default_medium(), 0.05, 64, gen, operator_kind="C")
        certs[gen] = cq.passivity_certificate(kern, trials, seed)

    grid = _grid(scale)
    medium = stepper.SlabMedium.uniform(grid)
    src = _pulse(medium, width=0.25)
    res = stepper.run(stepper.RunPlan(medium, src, medium.dt_for(), SCALES[scale]["steps"], closure="tbc"))
    work = res.report.series("boundary_work")
    e1 = res.report.series("e1")
    work_ratio = float(np.min(work) / np.max(e1))
    scheme = np.array(res.report.scheme_energy)
    measured = {
        "certificate": certs,
        "boundary_work_over_energy": work_ratio,
        "final_boundary_work": float(work[-1]),
        "scheme_energy_max_increase": float(np.max(np.diff(scheme))) / scheme[0] if len(scheme) > 1 else 0.0,
        "energy_balance_defect": float(np.max(np.abs(np.array(res.report.invariant) - res.report.invariant[0]))
                                       / res.report.invariant[0]),
    }
    ok = min(certs.values()) >= tol["certificate"] and work_ratio >= tol["boundary_work_over_energy"]
    return CheckResult("passivity", _status(ok), measured, tol, seed,
                       {"trials": trials, "grid": grid.as_dict()})


def apriori_sweep(medium: stepper.SlabMedium, source: stepper.SourceTerm, dt: float, base_steps: int,
                  generator: str = cq.DEFAULT_GENERATOR) -> dict:
    """kappa_sup y kappa_l2 en T0, 2T0 y 4T0 (T0 = base_steps dt) de una sola corrida TBC."""
    g = medium.grid
    norms = []
    plan = stepper.RunPlan(medium, source, dt, 4 * base_steps, closure="tbc", generator=generator,
                           snapshot_every=1, on_snapshot=lambda st: norms.append(stepper.field_norm(st.e, g)))
    stepper.run(plan)
    norms = np.array([stepper.field_norm(source.initial_e(), g)] + norms)
    e0_norm = norms[0]
    e1_norm = stepper.field_norm(stepper.initial_rates(medium, source, closure="tbc")["dE"], g)
    out = {}
    for mult in (1, 2, 4):
        n = mult * base_steps
        t_end = n * dt
        _, f_l1 = _current_h1_norm(source, g, t_end, dt)
        rhs = e0_norm + t_end * e1_norm + t_end * f_l1
        if rhs == 0.0:
            raise UndefinedRatioError("Datos nulos: el cociente no está definido")
        sup = float(np.max(norms[: n + 1]))
        l2 = float(np.sqrt(np.sum(norms[: n + 1] ** 2) * dt))
        out[mult] = {"T": t_end, "kappa_sup": sup / rhs, "kappa_l2": l2 / (np.sqrt(t_end) * rhs)}
    return out


def _apriori_kappas(grid: LateralGrid, base_steps: int) -> dict:
    medium = stepper.SlabMedium.uniform(grid)
    g = grid
    h_src = sources.plane_pulse(medium, (0.5 * g.period_x, 0.5 * g.period_y, 0.5), (0.3, 0.3, 0.3), lateral=True)
    src = stepper.SourceTerm(g, e0=None, h0=h_src.h0, support=h_src.support, label="h0-only")
    return apriori_sweep(medium, src, medium.dt_for(), base_steps)


@checker("apriori")
def check_apriori(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                  base_steps: int | None = None) -> CheckResult:
    """kappa de ||E||_{L^inf L^2} y ||E||_{L^2 L^2} sobre T en {T0, 2T0, 4T0}."""
    tol = tolerances("apriori", scale)
    base_steps = base_steps or 8
    grid = _grid(scale)
    try:
        coarse = _apriori_kappas(grid, base_steps)
    except UndefinedRatioError as e:
        return CheckResult("apriori", "degenerate", {"reason": str(e)}, tol, seed, {})
    fine_grid = LateralGrid(grid.period_x, grid.period_y, 2 * grid.modes_x, 2 * grid.modes_y,
                            grid.h1, grid.h2, 2 * grid.nz)
    fine = _apriori_kappas(fine_grid, 2 * base_steps)
    growth = max(coarse[4][k] / coarse[1][k] for k in ("kappa_sup", "kappa_l2"))
    change = max(_relative_change(coarse[m][k], fine[m][k]) for m in (1, 2, 4) for k in ("kappa_sup", "kappa_l2"))
    measured = {
        "sweep": coarse,
        "sweep_refined": fine,
        "kappa_sup": max(v["kappa_sup"] for v in coarse.values()),
        "kappa_l2": max(v["kappa_l2"] for v in coarse.values()),
        "sweep_growth": growth,
        "refinement_change": change,
    }
    ok = np.isfinite(measured["kappa_sup"]) and growth <= tol["sweep_growth"] and change <= tol["refinement_change"]
    return CheckResult("apriori", _status(ok), measured, tol, seed, {"grid": grid.as_dict(), "T0_steps": base_steps})


# ---------------------------------------
# Oráculos
# ---------------------------------------
def oracle_mismatch(profile: sdomain.LayeredProfile, nz: int, mode=(0, 0), duration: float = 4.0,
                    t_end: float = 7.0, generator: str = cq.DEFAULT_GENERATOR, oracle_refine: int = 4,
                    cfl: float = stepper.DEFAULT_CFL, period: float = 2 * np.pi,
                    modes: int = 4) -> dict:
    """Compara el integrador TBC en un solo modo con el solver en s compuesto con CQ."""
    grid = LateralGrid(period, period, modes, modes, profile.h1, profile.h2, nz)
    medium = stepper.SlabMedium.from_profile(grid, profile)
    dt = medium.dt_for(cfl)
    steps = int(np.ceil(t_end / dt))
    polarization = "x" if mode == (0, 0) else "y"
    comp = 0 if polarization == "x" else 1
    center = 0.5 * (profile.h1 + profile.h2) - 0.15 * (profile.h1 - profile.h2)
    half_width = 0.2 * (profile.h1 - profile.h2)
    z_prof = sources.z_bump(grid, center, half_width)
    waveform = sources.SineSquaredPulse(duration)
    src = sources.mode_current(grid, mode, z_prof, waveform, polarization,
                               support_z=(center - half_width, center + half_width))

    samples = []
    plan = stepper.RunPlan(medium, src, dt, steps, closure="tbc", generator=generator, snapshot_every=1,
                           on_snapshot=lambda st: samples.append(st.e[comp][0, 0, :].copy()))
    stepper.run(plan)
    td = np.vstack([np.zeros(nz + 1), np.array(samples)])

    # oráculo: E(s) = u(s) f(s), con u la respuesta por modo a -J
    k1, k2 = grid.kappa
    i, j = grid.mode_position(*mode)
    xi = (float(k1[i, j]), float(k2[i, j]))
    rhs = sdomain.ModeVector.zeros(nz)
    (rhs.u1 if comp == 0 else rhs.u2)[:] = -z_prof

    def response(s_vals):
        out = np.empty((len(s_vals), nz + 1), dtype=complex)
        for n, sv in enumerate(s_vals):
            sol = sdomain.solve_mode(xi, sv, profile, nz, rhs)
            out[n] = sol.u.u1 if comp == 0 else sol.u.u2
        return out

    dt_o = dt / oracle_refine
    n_o = steps * oracle_refine
    kern = cq.cq_weights(response, dt_o, n_o, generator)
    f = np.array([waveform(n * dt_o) for n in range(n_o + 1)])
    oracle = cq.convolve_sequence(kern, f, method="fft").real[::oracle_refine]

    w = grid.z_weights
    diff = np.sum((td - oracle) ** 2 * w)
    ref = np.sum(oracle**2 * w)
    return {"relative_mismatch": float(np.sqrt(diff / ref)) if ref > 0 else 0.0, "dt": dt, "steps": steps,
            "xi": list(xi)}


@checker("oracle-agreement")
def check_oracle_agreement(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                           nz: int | None = None) -> CheckResult:
    """Integrador TBC por modo frente al solver en s: xi = 0 homogéneo y dos capas con xi = (1, 0)."""
    tol = tolerances("oracle-agreement", scale)
    nz = nz or (32 if scale == "desk" else 64)
    homog = sdomain.LayeredProfile.homogeneous(1.0, -1.0)
    layered = sdomain.LayeredProfile((-1.0, 0.2, 1.0), (1.0, 2.25), (1.0, 1.0))
    coarse = oracle_mismatch(homog, nz)
    fine = oracle_mismatch(homog, 2 * nz)
    two_layer = oracle_mismatch(layered, 2 * nz, mode=(1, 0))
    m1, m2 = coarse["relative_mismatch"], fine["relative_mismatch"]
    order = float(np.log(m1 / m2) / np.log(coarse["dt"] / fine["dt"])) if m2 > 0 else float("inf")
    measured = {
        "relative_mismatch": max(m2, two_layer["relative_mismatch"]),
        "homogeneous": [m1, m2],
        "two_layer": two_layer["relative_mismatch"],
        "order": order,
    }
    ok = measured["relative_mismatch"] <= tol["relative_mismatch"] and _within(order, tol["order"])
    return CheckResult("oracle-agreement", _status(ok), measured, tol, seed,
                       {"nz": [nz, 2 * nz], "profiles": [homog.as_dict(), layered.as_dict()]})


@checker("splitting")
def check_splitting(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                    steps: int | None = None) -> CheckResult:
    """PEC(E0, H0) + reducido(J, V x n) = TBC(E0, H0, J) paso a paso."""
    tol = tolerances("splitting", scale)
    steps = steps or SCALES[scale]["steps"]
    grid = _grid(scale)
    medium = stepper.SlabMedium.uniform(grid)
    dt = medium.dt_for()
    full = _combined_source(medium, duration=0.3 * steps * dt)
    if not full.h1_compliant:
        return CheckResult("splitting", "fail", {"reason": "J(., 0) != 0"}, tol, seed, {})

    pec = stepper.run(stepper.RunPlan(medium, full.without_current(), dt, steps, closure="pec", record_wall=True))
    walls = {side: pec.traces[f"wall_{side}"] for side in stepper.SIDES}
    kernels = stepper.build_kernels(medium, dt, steps)
    reduced = stepper.run(stepper.RunPlan(
        medium, full.without_initial_data(), dt, steps, closure="tbc", kernels=kernels,
        forcing=lambda n: {side: walls[side][n] for side in stepper.SIDES},
    ))
    total = stepper.run(stepper.RunPlan(medium, full, dt, steps, closure="tbc", kernels=kernels))

    summed_e = stepper._add(pec.state.e, reduced.state.e)
    summed_h = stepper._add(pec.state.h, reduced.state.h)
    diff = stepper.field_norm(stepper._add(summed_e, total.state.e, -1.0), grid) + stepper.field_norm(
        stepper._add(summed_h, total.state.h, -1.0), grid)
    ref = stepper.field_norm(total.state.e, grid) + stepper.field_norm(total.state.h, grid)
    rel = diff / ref if ref > 0 else 0.0
    measured = {"relative_difference": rel, "steps": steps}
    return CheckResult("splitting", _status(rel <= tol["relative_difference"]), measured, tol, seed,
                       {"grid": grid.as_dict(), "steps": steps})


def reflection_study(
    grid: LateralGrid,
    eps: float = 1.0,
    mu: float = 1.0,
    pulse: dict | None = None,
    cfl: float = stepper.DEFAULT_CFL,
    steps: int | None = None,
    generator: str = cq.DEFAULT_GENERATOR,
    keep_report: bool = False,
    dt: float | None = None,
) -> dict:
    """Pulso en la losa con TBC frente a un dominio PEC cuatro veces más alto, truncado antes del regreso.

    ``pulse`` son los argumentos de :func:`sources.plane_pulse`; por defecto
    un pulso ascendente polarizado en x. Con ``dt`` explícito se ignora ``cfl``.
    """
    if grid.nz % 2:
        raise ConfigurationError("grid.nz", "nz par para alinear la malla de referencia")
    L = grid.thickness
    tall = LateralGrid(grid.period_x, grid.period_y, grid.modes_x, grid.modes_y,
                       grid.h1 + 1.5 * L, grid.h2 - 1.5 * L, 4 * grid.nz)
    offset = 3 * grid.nz // 2
    medium = stepper.SlabMedium.uniform(grid, eps, mu)
    tall_medium = stepper.SlabMedium.uniform(tall, eps, mu)
    if dt is None:
        dt = medium.dt_for(cfl)
    elif dt > medium.dt_max() * (1.0 + 1e-12):
        raise ConfigurationError("dt", "dt <= dt_max (CFL)", f"dt={dt:.6g}, dt_max={medium.dt_max():.6g}")
    speed = 1.0 / np.sqrt(eps * mu)
    round_trip = int(3.0 * L / (speed * dt))
    steps = int(2.5 * L / (speed * dt)) if steps is None else steps
    if steps > round_trip:
        raise ConfigurationError("horizon", "T < 3 (h1 - h2) / c (antes del regreso desde las paredes)",
                                 f"{steps} pasos > {round_trip}")

    pulse = pulse or {
        "center": (0.5 * grid.period_x, 0.5 * grid.period_y, grid.h2 + 0.4 * L),
        "width": (0.3 * grid.period_x, 0.3 * grid.period_y, 0.25 * L),
        "lateral": True,
    }
    comp = 0 if pulse.get("polarization", "x") == "x" else 1
    src = sources.plane_pulse(medium, **pulse)
    tall_src = sources.plane_pulse(tall_medium, **pulse)

    reports = {}

    def collect(plan, sl):
        out = []
        plan.snapshot_every = 1
        plan.on_snapshot = lambda st: out.append(st.e[comp][..., sl].copy())
        reports[plan.closure, plan.medium.grid.nz] = stepper.run(plan).report
        return np.array(out)

    slab = slice(0, grid.nz + 1)
    inner = slice(offset, offset + grid.nz + 1)
    tbc = collect(stepper.RunPlan(medium, src, dt, steps, closure="tbc", generator=generator), slab)
    ref = collect(stepper.RunPlan(tall_medium, tall_src, dt, steps, closure="pec"), inner)
    pec = collect(stepper.RunPlan(medium, src, dt, steps, closure="pec"), slab)

    amp = float(np.max(np.abs(src.e0[comp])))
    exit_step = min(int(1.2 * L / (speed * dt)), max(steps - 1, 0))
    ref_norm = float(np.linalg.norm(ref)) if steps else 0.0
    out = {"relative_mismatch": 0.0, "reflection": 0.0, "pec_mismatch": 0.0, "steps": steps, "dt": dt}
    if ref_norm > 0.0 and amp > 0.0:
        out.update({
            "relative_mismatch": float(np.linalg.norm(tbc - ref)) / ref_norm,
            "reflection": float(np.max(np.abs(tbc[exit_step:] - ref[exit_step:]))) / amp,
            "pec_mismatch": float(np.linalg.norm(pec - ref)) / ref_norm,
        })
    if keep_report:
        out["report"] = reports["tbc", grid.nz]
    return out


def refined(grid: LateralGrid) -> LateralGrid:
    """Malla con nz doble; la discretización lateral es espectral y no se toca."""
    return LateralGrid(grid.period_x, grid.period_y, grid.modes_x, grid.modes_y, grid.h1, grid.h2, 2 * grid.nz)


@checker("tbc-reflection")
def check_tbc_reflection(seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT,
                         generator: str = cq.DEFAULT_GENERATOR) -> CheckResult:
    """TBC frente al dominio PEC ampliado, más el orden observado al refinar (dz, dt) -> (dz/2, dt/2)."""
    tol = tolerances("tbc-reflection", scale)
    grid = _grid(scale)
    study = reflection_study(grid, generator=generator)
    fine = reflection_study(refined(grid), generator=generator, dt=0.5 * study["dt"])
    m1, m2 = study["relative_mismatch"], fine["relative_mismatch"]
    order = float(np.log2(m1 / m2)) if m1 > 0 and m2 > 0 else float("nan")
    versus = study["relative_mismatch"] / study["pec_mismatch"] if study["pec_mismatch"] > 0 else 0.0
    measured = {**study, "versus_pec": versus, "refined_mismatch": m2, "order": order}
    ok = all(measured[k] <= tol[k] for k in ("relative_mismatch", "reflection", "versus_pec"))
    ok = ok and _within(order, tol["order"])
    return CheckResult("tbc-reflection", _status(ok), measured, tol, seed,
                       {"grid": grid.as_dict(), "refined_grid": refined(grid).as_dict(), "generator": generator})


# ---------------------------------------
# Suite
# ---------------------------------------
@dataclass
class SuiteReport:
    results: list
    seed: int
    scale: str
    preset: str
    fuzz_failures: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if all(r.status in ("pass", "degenerate", "out-of-scope") for r in self.results) else 1

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "scale": self.scale,
            "preset": self.preset,
            "results": [r.as_dict() for r in self.results],
            "fuzz_failures": writers.jsonable(self.fuzz_failures),
        }


def run_check(check_id: str, seed: int = 0, scale: str = "desk", preset: str = STANDARD_WEIGHT) -> CheckResult:
    if check_id in OUT_OF_SCOPE:
        return CheckResult(check_id, "out-of-scope", {"reason": OUT_OF_SCOPE[check_id]}, {}, seed, {})
    try:
        fn = CHECKS[check_id]
    except KeyError:
        raise ValueError(f"Verificador desconocido: {check_id} (use {sorted(CHECKS)})") from None
    start = time.perf_counter()
    try:
        result = fn(seed=seed, scale=scale, preset=preset)
    except SlabTbcError as e:
        logger.warning("Verificador %s falló con %s: %s", check_id, type(e).__name__, e)
        result = CheckResult(check_id, "fail", {"error": type(e).__name__, "message": str(e)}, {}, seed, {})
    result.wall_clock_seconds = time.perf_counter() - start
    logger.info("Verificador %s: %s (%.2fs)", check_id, result.status, result.wall_clock_seconds)
    return result


def run_suite(
    check_ids: list | None = None,
    seed: int = 0,
    threads: int = 1,
    scale: str = "desk",
    preset: str = STANDARD_WEIGHT,
    fuzz: bool = False,
) -> SuiteReport:
    """Ejecuta los verificadores (en paralelo hasta ``threads``) en orden determinista."""
    ids = list(check_ids) if check_ids else [*CHECKS, *OUT_OF_SCOPE]
    seeds = {cid: seed for cid in ids}
    if fuzz:
        fresh = np.random.SeedSequence()
        drawn = fresh.generate_state(len(ids))
        seeds = {cid: int(s) for cid, s in zip(ids, drawn)}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [pool.submit(run_check, cid, seeds[cid], scale, preset) for cid in ids]
        results = [f.result() for f in futures]
    failures = [{"check_id": r.check_id, "seed": r.seed} for r in results if fuzz and r.status == "fail"]
    return SuiteReport(results, seed, scale, preset, failures)


def summary_table(results: list) -> str:
    rows = [{"check": r.check_id, "status": r.status, "seed": "-" if r.seed is None else r.seed,
             "seconds": f"{r.wall_clock_seconds:.2f}"} for r in results]
    return "\n".join(writers.table_lines(rows))

# slab_tbc/services/symbols.py
"""
beta_j y símbolos del operador de capacidad B_j (matriz 2x2 por número de
onda lateral), con auditorías numéricas de continuidad y positividad.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from ..errors import (
    ConfigurationError,
    DegenerateConstantError,
    InvalidFrequencyError,
    ShapeError,
)
from .spectral import LateralGrid, TangentialTrace, trace_inequality_constant

logger = logging.getLogger(__name__)

BETA_FLOOR = 1e-300


# ---------------------------------------
# Tipos
# ---------------------------------------
@dataclass(frozen=True)
class ComplexFrequency:
    s1: float
    s2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.s1) and self.s1 > 0):
            raise InvalidFrequencyError(f"s1 debe ser > 0 (s1={self.s1})")

    @property
    def value(self) -> complex:
        return complex(self.s1, self.s2)

    def conj(self) -> "ComplexFrequency":
        return ComplexFrequency(self.s1, -self.s2)

    @classmethod
    def of(cls, s: Union["ComplexFrequency", complex, float]) -> "ComplexFrequency":
        if isinstance(s, ComplexFrequency):
            return s
        s = complex(s)
        return cls(s.real, s.imag)


@dataclass(frozen=True)
class ExteriorMedium:
    eps: float
    mu: float
    side: int = 1

    def __post_init__(self):
        for name in ("eps", "mu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigurationError(f"exterior.{name}", "finito y > 0", f"{name}={v}")
        if self.side not in (1, 2):
            raise ConfigurationError("exterior.side", "side in {1, 2}", f"side={self.side}")

    @property
    def impedance(self) -> float:
        """sqrt(eps/mu): símbolo en xi = 0."""
        return float(np.sqrt(self.eps / self.mu))

    @property
    def wave_speed(self) -> float:
        return float(1.0 / np.sqrt(self.eps * self.mu))


@dataclass
class CapacitySymbol:
    xi: tuple
    s: ComplexFrequency
    side: int
    matrix: np.ndarray = field(repr=False)


@dataclass
class SymbolAudit:
    samples: int
    seed: int
    min_positivity_margin: float
    min_hermitian_eigenvalue: float
    max_continuity_ratio: float
    max_f_ratio: float
    max_pairing_ratio: float
    trace_constant: float
    worst_case_inputs: list = field(default_factory=list)
    sample_ranges: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------
# Evaluación de símbolos
# ---------------------------------------
def _s_values(s) -> np.ndarray:
    if isinstance(s, ComplexFrequency):
        return np.asarray(s.value)
    arr = np.asarray(s, dtype=complex)
    if np.any(~(arr.real > 0)):
        raise InvalidFrequencyError("Re s debe ser > 0 en todas las evaluaciones")
    return arr


def _xi_pair(xi):
    xi1, xi2 = xi
    return np.asarray(xi1, dtype=float), np.asarray(xi2, dtype=float)


def beta(xi, s, medium: ExteriorMedium) -> np.ndarray:
    """beta = (eps*mu*s^2 + |xi|^2)^(1/2), rama principal (Re beta > 0)."""
    sv = _s_values(s)
    xi1, xi2 = _xi_pair(xi)
    b = np.sqrt(medium.eps * medium.mu * sv**2 + xi1**2 + xi2**2)
    if np.any(np.abs(b) < BETA_FLOOR):
        raise InvalidFrequencyError("|beta| por debajo del umbral: s1 demasiado cercano a 0")
    return b


def capacity_array(xi, s, medium: ExteriorMedium, form: str = "co2", cross=None) -> np.ndarray:
    """Matriz del símbolo con forma (..., 2, 2).

    ``form="co2"``: (1/(mu s beta)) [[eps mu s^2 + xi2^2, -xi1 xi2], [-xi1 xi2, eps mu s^2 + xi1^2]]
    ``form="co1"``: (1/(mu s)) [[beta - xi1^2/beta, -xi1 xi2/beta], [-xi1 xi2/beta, beta - xi2^2/beta]]

    ``cross`` (opcional) sustituye el producto xi1*xi2 de los términos cruzados.
    """
    sv = _s_values(s)
    xi1, xi2 = _xi_pair(xi)
    b = beta((xi1, xi2), sv, medium)
    x12 = xi1 * xi2 if cross is None else np.asarray(cross, dtype=float)
    eps, mu = medium.eps, medium.mu
    if form == "co2":
        pref = 1.0 / (mu * sv * b)
        k2 = eps * mu * sv**2
        m11 = pref * (k2 + xi2**2)
        m22 = pref * (k2 + xi1**2)
        m12 = -pref * x12
    elif form == "co1":
        pref = 1.0 / (mu * sv)
        m11 = pref * (b - xi1**2 / b)
        m22 = pref * (b - xi2**2 / b)
        m12 = -pref * x12 / b
    else:
        raise ValueError(f"Forma desconocida: {form}")
    m11, m12, m22 = np.broadcast_arrays(m11, m12, m22)
    out = np.empty(m11.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = m11
    out[..., 0, 1] = m12
    out[..., 1, 0] = m12
    out[..., 1, 1] = m22
    return out


def capacity_matrix(xi, s, medium: ExteriorMedium, form: str = "co2") -> CapacitySymbol:
    s = ComplexFrequency.of(s)
    return CapacitySymbol(xi=tuple(xi), s=s, side=medium.side, matrix=capacity_array(xi, s, medium, form))


def symbol_set(grid: LateralGrid, s, medium: ExteriorMedium) -> CapacitySymbol:
    """Símbolo sobre todos los modos de la malla."""
    return capacity_matrix(grid.xi, s, medium)


def apply_capacity(symbols: CapacitySymbol, trace: TangentialTrace) -> TangentialTrace:
    """(B u)(xi) = M(xi) u(xi), modo a modo."""
    m = symbols.matrix
    if m.shape[:-2] != trace.grid.lateral_shape:
        raise ShapeError(
            f"El conjunto de símbolos {m.shape[:-2]} no cubre los modos {trace.grid.lateral_shape}"
        )
    out = np.einsum("...ab,b...->a...", m, trace.coeffs)
    return TangentialTrace(trace.grid, trace.boundary_id, out)


def positivity_margin(trace: TangentialTrace, s, medium: ExteriorMedium) -> float:
    """Re sum_xi (B u) . conj(u)."""
    bu = apply_capacity(symbol_set(trace.grid, s, medium), trace)
    return float(np.real(np.sum(bu.coeffs * np.conj(trace.coeffs))))


def hermitian_min_eigenvalue(matrix: np.ndarray) -> np.ndarray:
    herm = 0.5 * (matrix + np.conj(np.swapaxes(matrix, -1, -2)))
    return np.linalg.eigvalsh(herm)[..., 0]


def lemma_tc_scalars(xi, s, medium: ExteriorMedium) -> dict:
    """a, b, phi, F y el cociente (1+|xi|^2)^(1/2)/|beta| de la prueba de continuidad."""
    sv = _s_values(s)
    xi1, xi2 = _xi_pair(xi)
    em = medium.eps * medium.mu
    a = em * (sv.real**2 - sv.imag**2)
    b = 2.0 * em * sv.real * sv.imag
    r2 = xi1**2 + xi2**2
    with np.errstate(divide="ignore"):
        f_bound = (((1.0 - a) ** 2 + b**2) / b**2) ** 0.25
    ratio = np.sqrt(1.0 + r2) / np.abs(beta((xi1, xi2), sv, medium))
    return {"a": a, "b": b, "phi": a + r2, "F": f_bound, "ratio": ratio}


def continuity_constant(s, medium: ExteriorMedium) -> float:
    """C_j = (1/(mu s1)) [((1-a)^2 + b^2)/b^2]^(1/4) max{(a^2+b^2)^(1/2), 1}."""
    s = ComplexFrequency.of(s)
    if s.s2 == 0.0:
        raise DegenerateConstantError("b_j = 0 para s2 = 0: la cota de continuidad es infinita")
    em = medium.eps * medium.mu
    a = em * (s.s1**2 - s.s2**2)
    b = 2.0 * em * s.s1 * s.s2
    f = (((1.0 - a) ** 2 + b**2) / b**2) ** 0.25
    return float(f * max(np.hypot(a, b), 1.0) / (medium.mu * s.s1))


def beta_identities(xi, s, medium: ExteriorMedium) -> tuple[float, float]:
    """Residuos relativos de m^2 - n^2 = eps mu (s1^2 - s2^2) + |xi|^2 y m n = eps mu s1 s2."""
    s = ComplexFrequency.of(s)
    xi1, xi2 = _xi_pair(xi)
    b = beta((xi1, xi2), s, medium)
    m, n = b.real, b.imag
    em = medium.eps * medium.mu
    lhs2, rhs2 = m**2 - n**2, em * (s.s1**2 - s.s2**2) + xi1**2 + xi2**2
    lhs3, rhs3 = m * n, em * s.s1 * s.s2
    scale = np.abs(b) ** 2
    r2 = float(np.max(np.abs(lhs2 - rhs2) / scale))
    r3 = float(np.max(np.abs(lhs3 - rhs3) / scale))
    return r2, r3


# ---------------------------------------
# Normas de traza por modo (peso estándar)
# ---------------------------------------
def _mode_norms(xi1, xi2, u, kind: str) -> np.ndarray:
    w = (1.0 + xi1**2 + xi2**2) ** -0.5
    if kind == "curl":
        extra = np.abs(xi1 * u[..., 1] - xi2 * u[..., 0]) ** 2
    else:
        extra = np.abs(xi1 * u[..., 0] + xi2 * u[..., 1]) ** 2
    return np.sqrt(w * (np.sum(np.abs(u) ** 2, axis=-1) + extra))


def sample_inputs(n_samples: int, rng: np.random.Generator) -> dict:
    """Muestreo log-uniforme en |xi| y s1, uniforme en s2 y en la dirección de xi."""
    r = 10.0 ** rng.uniform(-3.0, 3.0, n_samples)
    r[::10] = 0.0
    theta = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    s1 = 10.0 ** rng.uniform(-2.0, 2.0, n_samples)
    s2 = rng.uniform(-100.0, 100.0, n_samples)
    u = rng.standard_normal((n_samples, 2)) + 1j * rng.standard_normal((n_samples, 2))
    w = rng.standard_normal((n_samples, 2)) + 1j * rng.standard_normal((n_samples, 2))
    return {"xi1": r * np.cos(theta), "xi2": r * np.sin(theta), "s": s1 + 1j * s2, "u": u, "w": w}


def symbol_bound_audit(
    n_samples: int,
    rng_seed: int,
    medium: ExteriorMedium,
    grid: LateralGrid | None = None,
) -> SymbolAudit:
    if n_samples < 1:
        raise ValueError("n_samples debe ser >= 1")
    rng = np.random.default_rng(rng_seed)
    smp = sample_inputs(n_samples, rng)
    xi1, xi2, s, u, w = smp["xi1"], smp["xi2"], smp["s"], smp["u"], smp["w"]
    c_trace = trace_inequality_constant(grid) if grid is not None else np.sqrt(2.0)

    m = capacity_array((xi1, xi2), s, medium)
    bu = np.einsum("nab,nb->na", m, u)

    # positividad
    margins = np.real(np.sum(bu * np.conj(u), axis=-1)) / np.sum(np.abs(u) ** 2, axis=-1)
    min_eig = hermitian_min_eigenvalue(m)

    # continuidad
    em = medium.eps * medium.mu
    a = em * (s.real**2 - s.imag**2)
    b = 2.0 * em * s.real * s.imag
    f_bound = (((1.0 - a) ** 2 + b**2) / b**2) ** 0.25
    c_j = f_bound * np.maximum(np.hypot(a, b), 1.0) / (medium.mu * s.real)
    f_ratio = np.sqrt(1.0 + xi1**2 + xi2**2) / np.abs(beta((xi1, xi2), s, medium)) / f_bound
    op_ratio = _mode_norms(xi1, xi2, bu, "div") / _mode_norms(xi1, xi2, u, "curl")
    cont_ratio = op_ratio / (c_trace * c_j)
    pairing = np.abs(np.sum(bu * np.conj(w), axis=-1))
    pair_ratio = pairing / (c_j * _mode_norms(xi1, xi2, u, "curl") * _mode_norms(xi1, xi2, w, "curl"))

    def _case(i: int, why: str) -> dict:
        return {
            "why": why,
            "xi": [float(xi1[i]), float(xi2[i])],
            "s": [float(s[i].real), float(s[i].imag)],
        }

    worst = [
        _case(int(np.argmin(margins)), "min_positivity_margin"),
        _case(int(np.argmax(cont_ratio)), "max_continuity_ratio"),
        _case(int(np.argmax(f_ratio)), "max_f_ratio"),
    ]
    audit = SymbolAudit(
        samples=n_samples,
        seed=rng_seed,
        min_positivity_margin=float(np.min(margins)),
        min_hermitian_eigenvalue=float(np.min(min_eig / np.abs(m).max(axis=(-1, -2)))),
        max_continuity_ratio=float(np.max(cont_ratio)),
        max_f_ratio=float(np.max(f_ratio)),
        max_pairing_ratio=float(np.max(pair_ratio)),
        trace_constant=float(c_trace),
        worst_case_inputs=worst,
        sample_ranges={"abs_xi": [0.0, 1e3], "s1": [1e-2, 1e2], "s2": [-1e2, 1e2]},
    )
    logger.info(
        "Auditoría de símbolos: n=%d, margen min=%.3e, continuidad max=%.6f",
        n_samples, audit.min_positivity_margin, audit.max_continuity_ratio,
    )
    return audit

# slab_tbc/services/sdomain.py
"""
Solver por modo en el dominio s para medios estratificados.

Para cada número de onda lateral xi y frecuencia s resuelve

    curl((s mu)^-1 curl u) + s eps u = j          en h2 < z < h1

con la condición de frontera transparente

    (mu_j s)^-1 (curl u) x n_j + B_j[u_Gamma] = g_j    en Gamma_j

(g_j = 0 en el problema auxiliar; g_j = V x n_j en el problema reducido) o
con pared PEC (u x n_j = 0). Discretización escalonada en z: u1, u2 en los
nodos z_k, u3 en los puntos medios; las filas de frontera usan semiceldas.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConfigurationError, DomainError, IllConditionedError, UndefinedRatioError
from .spectral import STANDARD_WEIGHT
from .symbols import ComplexFrequency, ExteriorMedium, beta, capacity_array

logger = logging.getLogger(__name__)


# ---------------------------------------
# Perfil estratificado
# ---------------------------------------
@dataclass(frozen=True)
class LayeredProfile:
    """Capas h2 = z0 < z1 < ... < zm = h1 con (eps, mu) constantes por capa."""

    breakpoints: tuple
    eps: tuple
    mu: tuple
    eps_bounds: tuple | None = None
    mu_bounds: tuple | None = None

    def __post_init__(self):
        z = np.asarray(self.breakpoints, dtype=float)
        if len(z) < 2 or np.any(np.diff(z) <= 0):
            raise ConfigurationError("profile.breakpoints", "estrictamente crecientes")
        if len(self.eps) != len(z) - 1 or len(self.mu) != len(z) - 1:
            raise ConfigurationError("profile.layers", "una pareja (eps, mu) por capa")
        for name, vals, bounds in (("eps", self.eps, self.eps_bounds), ("mu", self.mu, self.mu_bounds)):
            v = np.asarray(vals, dtype=float)
            if np.any(~np.isfinite(v)) or np.any(v <= 0):
                raise ConfigurationError(f"profile.{name}", "finito y > 0")
            if bounds is not None and (v.min() < bounds[0] or v.max() > bounds[1]):
                raise ConfigurationError(
                    f"profile.{name}", f"{name}_min <= {name} <= {name}_max", f"cotas={tuple(bounds)}"
                )

    @classmethod
    def homogeneous(cls, h1: float, h2: float, eps: float = 1.0, mu: float = 1.0) -> "LayeredProfile":
        return cls((h2, h1), (eps,), (mu,))

    @property
    def h1(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def h2(self) -> float:
        return float(self.breakpoints[0])

    @property
    def eps_range(self) -> tuple[float, float]:
        return (min(self.eps), max(self.eps)) if self.eps_bounds is None else tuple(self.eps_bounds)

    @property
    def mu_range(self) -> tuple[float, float]:
        return (min(self.mu), max(self.mu)) if self.mu_bounds is None else tuple(self.mu_bounds)

    def exterior(self, side: int) -> ExteriorMedium:
        k = -1 if side == 1 else 0
        return ExteriorMedium(self.eps[k], self.mu[k], side)

    def average(self, name: str, lo: np.ndarray, hi: np.ndarray, harmonic: bool = False) -> np.ndarray:
        """Promedio ponderado por longitud de eps o mu (o de su inverso) sobre [lo, hi]."""
        vals = np.asarray(getattr(self, name), dtype=float)
        if harmonic:
            vals = 1.0 / vals
        z = np.asarray(self.breakpoints, dtype=float)
        lo = np.asarray(lo, dtype=float)[..., None]
        hi = np.asarray(hi, dtype=float)[..., None]
        overlap = np.clip(np.minimum(hi, z[1:]) - np.maximum(lo, z[:-1]), 0.0, None)
        mean = np.sum(overlap * vals, axis=-1) / (hi[..., 0] - lo[..., 0])
        return 1.0 / mean if harmonic else mean

    def staggered_samples(self, nz: int) -> dict:
        """Coeficientes efectivos en nodos y puntos medios de una malla uniforme.

        eps tangencial en nodos: media aritmética sobre la celda dual;
        eps normal en puntos medios: media armónica;
        mu tangencial en puntos medios: media aritmética (media armónica de 1/mu);
        mu normal en nodos: media armónica.
        """
        dz = (self.h1 - self.h2) / nz
        nodes = self.h2 + dz * np.arange(nz + 1)
        lo_n = np.maximum(nodes - dz / 2, self.h2)
        hi_n = np.minimum(nodes + dz / 2, self.h1)
        lo_h, hi_h = nodes[:-1], nodes[1:]
        return {
            "eps_node": self.average("eps", lo_n, hi_n),
            "eps_half": self.average("eps", lo_h, hi_h, harmonic=True),
            "mu_half": self.average("mu", lo_h, hi_h),
            "mu_node": self.average("mu", lo_n, hi_n, harmonic=True),
        }

    def as_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "eps": list(self.eps), "mu": list(self.mu)}


# ---------------------------------------
# Campos por modo
# ---------------------------------------
class ModeVector(NamedTuple):
    """Campo escalonado por modo: u1, u2 en nodos (nz+1); u3 en puntos medios (nz)."""

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray

    @classmethod
    def zeros(cls, nz: int) -> "ModeVector":
        return cls(np.zeros(nz + 1, complex), np.zeros(nz + 1, complex), np.zeros(nz, complex))

    def scaled(self, factor) -> "ModeVector":
        return ModeVector(*(factor * c for c in self))

    def stacked(self) -> np.ndarray:
        return np.concatenate([np.asarray(c, dtype=complex) for c in self])


class _Operators(NamedTuple):
    dz: float
    wz: np.ndarray
    d_up: sp.csr_matrix    # nodos -> puntos medios
    d_down: sp.csr_matrix  # puntos medios -> nodos (adjunto ponderado, filas de semicelda)


def _operators(nz: int, dz: float) -> _Operators:
    wz = np.full(nz + 1, dz)
    wz[0] = wz[-1] = dz / 2
    d_up = sp.diags([-np.ones(nz), np.ones(nz)], [0, 1], shape=(nz, nz + 1)) / dz
    d_down = -(sp.diags(dz / wz) @ d_up.T)
    return _Operators(dz, wz, d_up.tocsr(), d_down.tocsr())


def mode_norm(v: ModeVector, wz: np.ndarray, dz: float) -> float:
    tot = np.sum(wz * (np.abs(v.u1) ** 2 + np.abs(v.u2) ** 2)) + dz * np.sum(np.abs(v.u3) ** 2)
    return float(np.sqrt(tot))


def curl_nodal(u: ModeVector, xi, ops: _Operators) -> tuple:
    """curl de un campo en posiciones tipo E: (c1, c2) en puntos medios, c3 en nodos."""
    xi1, xi2 = xi
    c1 = 1j * xi2 * u.u3 - ops.d_up @ u.u2
    c2 = ops.d_up @ u.u1 - 1j * xi1 * u.u3
    c3 = 1j * xi1 * u.u2 - 1j * xi2 * u.u1
    return c1, c2, c3


def curl_dual(h: ModeVector, xi, nz: int, dz: float) -> ModeVector:
    """curl de un campo en posiciones tipo H (h1, h2 en puntos medios, h3 en nodos),
    con traza tangencial nula en Gamma_1, Gamma_2. Devuelve un ModeVector tipo E."""
    ops = _operators(nz, dz)
    # h se almacena como ModeVector(h1_half, h2_half, h3_node)
    h1, h2, h3 = (np.asarray(c, dtype=complex) for c in h)
    xi1, xi2 = xi
    return ModeVector(
        1j * xi2 * h3 - ops.d_down @ h2,
        ops.d_down @ h1 - 1j * xi1 * h3,
        1j * xi1 * h2 - 1j * xi2 * h1,
    )


@dataclass
class ModeSolution:
    xi: tuple
    s: ComplexFrequency
    nz: int
    dz: float
    closure: str
    u: ModeVector
    curl: tuple = field(repr=False)
    residual: float = 0.0
    boundary_pairing: complex = 0j
    weights: np.ndarray = field(default=None, repr=False)
    materials: dict = field(default=None, repr=False)

    @property
    def z_nodes(self) -> np.ndarray:
        """Nodos medidos desde h2."""
        return self.dz * np.arange(self.nz + 1)

    def l2_norm(self) -> float:
        return mode_norm(self.u, self.weights, self.dz)

    def curl_norm(self) -> float:
        c1, c2, c3 = self.curl
        tot = self.dz * np.sum(np.abs(c1) ** 2 + np.abs(c2) ** 2) + np.sum(self.weights * np.abs(c3) ** 2)
        return float(np.sqrt(tot))


# ---------------------------------------
# Solver
# ---------------------------------------
def _assemble(xi, s: complex, nz: int, dz: float, mats: dict, closure: str, ext: tuple):
    ops = _operators(nz, dz)
    xi1, xi2 = xi
    n1 = nz + 1
    d_up, d_down = ops.d_up, ops.d_down
    inv_mu_h = sp.diags(1.0 / (s * mats["mu_half"]))
    inv_mu_n = sp.diags(1.0 / (s * mats["mu_node"]))
    eye_n = sp.identity(n1, format="csr")
    eye_h = sp.identity(nz, format="csr")
    zero_nh = sp.csr_matrix((n1, nz))

    # w = (s mu)^-1 curl u, en función de (u1, u2, u3)
    w1 = sp.hstack([sp.csr_matrix((nz, n1)), -inv_mu_h @ d_up, 1j * xi2 * inv_mu_h])
    w2 = sp.hstack([inv_mu_h @ d_up, sp.csr_matrix((nz, n1)), -1j * xi1 * inv_mu_h])
    w3 = sp.hstack([-1j * xi2 * inv_mu_n, 1j * xi1 * inv_mu_n, zero_nh])

    mass1 = sp.hstack([s * sp.diags(mats["eps_node"]), sp.csr_matrix((n1, n1)), zero_nh])
    mass2 = sp.hstack([sp.csr_matrix((n1, n1)), s * sp.diags(mats["eps_node"]), zero_nh])
    mass3 = sp.hstack([sp.csr_matrix((nz, 2 * n1)), s * sp.diags(mats["eps_half"])])

    row1 = mass1 + 1j * xi2 * eye_n @ w3 - d_down @ w2
    row2 = mass2 + d_down @ w1 - 1j * xi1 * eye_n @ w3
    row3 = mass3 + 1j * xi1 * eye_h @ w2 - 1j * xi2 * eye_h @ w1
    a = sp.vstack([row1, row2, row3]).tolil()

    bnodes = {1: nz, 2: 0}
    if closure == "tbc":
        for side, k in bnodes.items():
            m = capacity_array((xi1, xi2), s, ext[side - 1])
            for c in range(2):
                for d in range(2):
                    a[c * n1 + k, d * n1 + k] += (2.0 / dz) * m[c, d]
    elif closure == "pec":
        for k in bnodes.values():
            for c in range(2):
                r = c * n1 + k
                a.rows[r] = [r]
                a.data[r] = [1.0]
    else:
        raise ConfigurationError("closure", "closure in {'tbc', 'pec'}", closure)
    return a.tocsc(), ops


def solve_mode(
    xi,
    s,
    profile: LayeredProfile,
    nz: int,
    source: ModeVector,
    boundary_data: dict | None = None,
    closure: str = "tbc",
    exterior: tuple[ExteriorMedium, ExteriorMedium] | None = None,
) -> ModeSolution:
    """Resuelve el problema de contorno por modo.

    ``source`` es el lado derecho j (para el problema reducido se pasa -J).
    ``boundary_data`` = {1: (g1, g2), 2: (g1, g2)} con g = V x n_j.
    """
    s = ComplexFrequency.of(s)
    sv = s.value
    dz = (profile.h1 - profile.h2) / nz
    mats = profile.staggered_samples(nz)
    ext = exterior or (profile.exterior(1), profile.exterior(2))
    a, ops = _assemble(xi, sv, nz, dz, mats, closure, ext)

    n1 = nz + 1
    b = source.stacked().astype(complex)
    if b.shape != (2 * n1 + nz,):
        raise ConfigurationError("source", f"u1,u2 con {n1} nodos y u3 con {nz} puntos medios")
    if closure == "tbc" and boundary_data:
        for side, k in ((1, nz), (2, 0)):
            g = boundary_data.get(side)
            if g is not None:
                b[k] += (2.0 / dz) * g[0]
                b[n1 + k] += (2.0 / dz) * g[1]
    if closure == "pec":
        for k in (0, nz):
            b[k] = 0.0
            b[n1 + k] = 0.0

    if not np.any(b):
        x = np.zeros_like(b)
    else:
        try:
            x = spla.splu(a).solve(b)
        except RuntimeError as e:
            raise IllConditionedError(f"Factorización singular para xi={xi}, s={sv}: {e}") from e
    if not np.all(np.isfinite(x)):
        raise IllConditionedError(f"Solución no finita para xi={xi}, s={sv}")
    bnorm = np.linalg.norm(b)
    residual = float(np.linalg.norm(a @ x - b) / bnorm) if bnorm > 0 else 0.0

    u = ModeVector(x[:n1], x[n1 : 2 * n1], x[2 * n1 :])
    curl = curl_nodal(u, xi, ops)
    pairing = 0j
    if closure == "tbc":
        for side, k in ((1, nz), (2, 0)):
            ut = np.array([u.u1[k], u.u2[k]])
            m = capacity_array(xi, sv, ext[side - 1])
            pairing += complex(np.conj(ut) @ m @ ut)
    logger.debug("Modo xi=%s s=%s cierre=%s residuo=%.2e", xi, sv, closure, residual)
    return ModeSolution(
        xi=tuple(xi), s=s, nz=nz, dz=dz, closure=closure, u=u, curl=curl,
        residual=residual, boundary_pairing=pairing, weights=ops.wz, materials=mats,
    )


def outgoing_extension(trace_value, xi, s, medium: ExteriorMedium, z, h1: float, h2: float):
    """Extensión saliente: valor(h1) e^{-beta (z - h1)} arriba, valor(h2) e^{-beta (h2 - z)} abajo."""
    z = np.asarray(z, dtype=float)
    b = beta(xi, s, medium)
    if medium.side == 1:
        if np.any(z < h1):
            raise DomainError(f"z={z} está dentro de la losa (se requiere z >= h1={h1})")
        return trace_value * np.exp(-b * (z - h1))
    if np.any(z > h2):
        raise DomainError(f"z={z} está dentro de la losa (se requiere z <= h2={h2})")
    return trace_value * np.exp(-b * (h2 - z))


def point_source_solution(z, z0: float, s, eps: float, mu: float, strength: complex = 1.0):
    """Solución cerrada con xi = 0 en medio homogéneo: u1 = (s mu q / (2 beta)) e^{-beta |z - z0|}."""
    sv = ComplexFrequency.of(s).value
    b = np.sqrt(eps * mu * sv**2)
    return (sv * mu * strength / (2.0 * b)) * np.exp(-b * np.abs(np.asarray(z) - z0))


# ---------------------------------------
# Medidas a posteriori
# ---------------------------------------
def _data_norm(v: ModeVector, solution: ModeSolution) -> float:
    return mode_norm(v, solution.weights, solution.dz)


def theorem_at_check(solution: ModeSolution, source: ModeVector, s) -> float:
    """(||curl u|| + ||s u||) s1 / ||s j||."""
    s = ComplexFrequency.of(s)
    denom = abs(s.value) * _data_norm(source, solution)
    if denom == 0.0:
        raise UndefinedRatioError("Fuente nula: el cociente no está definido")
    lhs = solution.curl_norm() + abs(s.value) * solution.l2_norm()
    return lhs * s.s1 / denom


def _div_trace_norm(g, xi, preset: str) -> float:
    xi1, xi2 = xi
    r2 = xi1**2 + xi2**2
    w = (1.0 + r2) ** -0.5 if preset == STANDARD_WEIGHT else 1.0 + r2
    g1, g2 = g
    return float(np.sqrt(w * (abs(g1) ** 2 + abs(g2) ** 2 + abs(xi1 * g1 + xi2 * g2) ** 2)))


def lemma_es_check(
    solution_e: ModeSolution,
    source_J: ModeVector,
    boundary_V: dict | None,
    s,
    preset: str = STANDARD_WEIGHT,
) -> float:
    """(||curl e|| + ||s e||) / (s1^-1 [||s J|| + sum_j (||s V x n_j|| + ||s|^2 V x n_j||)])."""
    s = ComplexFrequency.of(s)
    sa = abs(s.value)
    rhs = sa * _data_norm(source_J, solution_e)
    for g in (boundary_V or {}).values():
        rhs += (sa + sa**2) * _div_trace_norm(g, solution_e.xi, preset)
    if rhs == 0.0:
        raise UndefinedRatioError("Datos nulos: el cociente no está definido")
    lhs = solution_e.curl_norm() + sa * solution_e.l2_norm()
    return lhs / (rhs / s.s1)


def pec_source(profile: LayeredProfile, nz: int, E0: ModeVector, curl_H0: ModeVector, s) -> ModeVector:
    """j = eps E0 + s^-1 curl H0 del problema PEC en el dominio s."""
    sv = ComplexFrequency.of(s).value
    m = profile.staggered_samples(nz)
    return ModeVector(
        m["eps_node"] * E0.u1 + curl_H0.u1 / sv,
        m["eps_node"] * E0.u2 + curl_H0.u2 / sv,
        m["eps_half"] * E0.u3 + curl_H0.u3 / sv,
    )


def lemma_ase_check(solution: ModeSolution, E0: ModeVector, curl_H0: ModeVector, s) -> float:
    """(||curl U|| + ||s U||) s1 / (||s E0|| + ||curl H0||)."""
    s = ComplexFrequency.of(s)
    denom = abs(s.value) * _data_norm(E0, solution) + _data_norm(curl_H0, solution)
    if denom == 0.0:
        raise UndefinedRatioError("Datos iniciales nulos: el cociente no está definido")
    lhs = solution.curl_norm() + abs(s.value) * solution.l2_norm()
    return lhs * s.s1 / denom


def sesquilinear_energy(solution: ModeSolution) -> complex:
    """a(u, u) discreto, incluido el término de frontera <B u, u>."""
    mats = solution.materials
    sv = solution.s.value
    u = solution.u
    c1, c2, c3 = solution.curl
    wz, dz = solution.weights, solution.dz
    curl_part = (
        dz * np.sum((np.abs(c1) ** 2 + np.abs(c2) ** 2) / mats["mu_half"])
        + np.sum(wz * np.abs(c3) ** 2 / mats["mu_node"])
    ) / sv
    mass = sv * (
        np.sum(wz * mats["eps_node"] * (np.abs(u.u1) ** 2 + np.abs(u.u2) ** 2))
        + dz * np.sum(mats["eps_half"] * np.abs(u.u3) ** 2)
    )
    return complex(curl_part + mass + solution.boundary_pairing)


def coercivity_margin(solution: ModeSolution) -> float:
    """(Re a(u,u) - (s1/|s|^2)(||mu^-1/2 curl u||^2 + ||eps^1/2 s u||^2)) normalizado; >= 0."""
    mats = solution.materials
    s = solution.s
    sa2 = abs(s.value) ** 2
    u = solution.u
    c1, c2, c3 = solution.curl
    wz, dz = solution.weights, solution.dz
    curl_sq = dz * np.sum((np.abs(c1) ** 2 + np.abs(c2) ** 2) / mats["mu_half"]) + np.sum(
        wz * np.abs(c3) ** 2 / mats["mu_node"]
    )
    mass_sq = sa2 * (
        np.sum(wz * mats["eps_node"] * (np.abs(u.u1) ** 2 + np.abs(u.u2) ** 2))
        + dz * np.sum(mats["eps_half"] * np.abs(u.u3) ** 2)
    )
    bound = (s.s1 / sa2) * (curl_sq + mass_sq)
    if bound == 0.0:
        return 0.0
    return float((np.real(sesquilinear_energy(solution)) - bound) / bound)


def weak_form_defect(solution: ModeSolution, source: ModeVector, boundary_data: dict | None = None) -> float:
    """|a(u,u) - (j, u) - sum_j <g_j, u_Gamma>| relativo."""
    u = solution.u
    wz, dz = solution.weights, solution.dz
    rhs = (
        np.sum(wz * (source.u1 * np.conj(u.u1) + source.u2 * np.conj(u.u2)))
        + dz * np.sum(source.u3 * np.conj(u.u3))
    )
    for side, k in ((1, solution.nz), (2, 0)):
        g = (boundary_data or {}).get(side)
        if g is not None and solution.closure == "tbc":
            rhs += g[0] * np.conj(u.u1[k]) + g[1] * np.conj(u.u2[k])
    lhs = sesquilinear_energy(solution)
    scale = max(abs(lhs), abs(rhs), np.finfo(float).tiny)
    return float(abs(lhs - rhs) / scale)

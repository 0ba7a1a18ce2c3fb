# slab_tbc/services/spectral.py
"""
Malla lateral de Fourier sobre el plano periodizado, transformadas directa e
inversa, y normas/pares de dualidad ponderados en Fourier.

Convenciones
------------
- El plano lateral se reemplaza por el toro [0, Lx) x [0, Ly).
- El modo k en [-N/2, N/2-1] corresponde al número de onda xi = 2*pi*k/L.
- La DFT es unitaria respecto de la cuadratura física:
      sum_xi |u_hat|^2 == dx*dy * sum_ij |u_ij|^2
  de modo que Parseval es una identidad exacta (hasta redondeo).
- Los campos en la losa se muestrean en los nodos z_k = h2 + k*dz,
  k = 0..nz (índice 0 en Gamma_2, índice nz en Gamma_1); la cuadratura en z
  es la regla del trapecio.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from ..errors import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

STANDARD_WEIGHT = "standard-weight"
AS_PRINTED_WEIGHT = "as-printed-weight"
PRESETS = (STANDARD_WEIGHT, AS_PRINTED_WEIGHT)

TraceKind = Literal["curl_minus_half", "div_minus_half"]


# ---------------------------------------
# Malla lateral
# ---------------------------------------
@dataclass(frozen=True)
class LateralGrid:
    """Malla de la losa h2 < z < h1, periódica en (x, y)."""

    period_x: float
    period_y: float
    modes_x: int
    modes_y: int
    h1: float
    h2: float
    nz: int

    def __post_init__(self):
        if not self.h1 > self.h2:
            raise ConfigurationError("grid.h1", "h1 > h2", f"h1={self.h1}, h2={self.h2}")
        for name in ("modes_x", "modes_y"):
            n = getattr(self, name)
            if n < 4 or n % 2:
                raise ConfigurationError(f"grid.{name}", "par y >= 4", f"{name}={n}")
        if self.nz < 2:
            raise ConfigurationError("grid.nz", "nz >= 2", f"nz={self.nz}")
        if self.period_x <= 0 or self.period_y <= 0:
            raise ConfigurationError("grid.period", "periodos > 0")

    # ---- pasos y volúmenes ----
    @property
    def dx(self) -> float:
        return self.period_x / self.modes_x

    @property
    def dy(self) -> float:
        return self.period_y / self.modes_y

    @property
    def dz(self) -> float:
        return (self.h1 - self.h2) / self.nz

    @property
    def thickness(self) -> float:
        return self.h1 - self.h2

    @property
    def area_element(self) -> float:
        return self.dx * self.dy

    @property
    def volume(self) -> float:
        return self.period_x * self.period_y * self.thickness

    @property
    def lateral_shape(self) -> tuple[int, int]:
        return (self.modes_x, self.modes_y)

    @property
    def node_shape(self) -> tuple[int, int, int]:
        return (self.modes_x, self.modes_y, self.nz + 1)

    # ---- coordenadas ----
    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.modes_x) * self.dx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.modes_y) * self.dy

    @cached_property
    def z_nodes(self) -> np.ndarray:
        return self.h2 + np.arange(self.nz + 1) * self.dz

    @cached_property
    def z_half(self) -> np.ndarray:
        return self.h2 + (np.arange(self.nz) + 0.5) * self.dz

    @cached_property
    def z_weights(self) -> np.ndarray:
        """Pesos del trapecio en z (dz/2 en los planos frontera)."""
        w = np.full(self.nz + 1, self.dz)
        w[0] = w[-1] = 0.5 * self.dz
        return w

    # ---- modos ----
    @cached_property
    def mode_indices_x(self) -> np.ndarray:
        return np.fft.fftfreq(self.modes_x, d=1.0 / self.modes_x).astype(int)

    @cached_property
    def mode_indices_y(self) -> np.ndarray:
        return np.fft.fftfreq(self.modes_y, d=1.0 / self.modes_y).astype(int)

    @cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray]:
        """(xi1, xi2) en orden FFT, forma (Nx, Ny) cada uno."""
        kx = 2.0 * np.pi * self.mode_indices_x / self.period_x
        ky = 2.0 * np.pi * self.mode_indices_y / self.period_y
        return tuple(np.meshgrid(kx, ky, indexing="ij"))

    @cached_property
    def xi_norm_sq(self) -> np.ndarray:
        xi1, xi2 = self.xi
        return xi1**2 + xi2**2

    @cached_property
    def kappa(self) -> tuple[np.ndarray, np.ndarray]:
        """Números de onda modificados de la diferencia centrada escalonada:
        kappa = (2/h) sin(xi h / 2)."""
        xi1, xi2 = self.xi
        return (
            (2.0 / self.dx) * np.sin(0.5 * xi1 * self.dx),
            (2.0 / self.dy) * np.sin(0.5 * xi2 * self.dy),
        )

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        kx = self.mode_indices_x[:, None] == -self.modes_x // 2
        ky = self.mode_indices_y[None, :] == -self.modes_y // 2
        return kx | ky

    def mode_position(self, kx: int, ky: int) -> tuple[int, int]:
        """Posición en el arreglo (orden FFT) del modo (kx, ky)."""
        for k, n, name in ((kx, self.modes_x, "kx"), (ky, self.modes_y, "ky")):
            if not -n // 2 <= k <= n // 2 - 1:
                raise ShapeError(f"{name}={k} fuera de [-{n // 2}, {n // 2 - 1}]")
        return (kx % self.modes_x, ky % self.modes_y)

    def mode_wavenumber(self, kx: int, ky: int) -> tuple[float, float]:
        i, j = self.mode_position(kx, ky)
        return float(self.xi[0][i, j]), float(self.xi[1][i, j])

    def as_dict(self) -> dict:
        return {
            "period_x": self.period_x,
            "period_y": self.period_y,
            "modes_x": self.modes_x,
            "modes_y": self.modes_y,
            "h1": self.h1,
            "h2": self.h2,
            "nz": self.nz,
        }


def _check_lateral(samples: np.ndarray, grid: LateralGrid, axes=(-2, -1)) -> np.ndarray:
    arr = np.asarray(samples)
    shape = tuple(arr.shape[a] for a in axes) if arr.ndim >= 2 else ()
    if shape != grid.lateral_shape:
        raise ShapeError(
            f"Dimensiones laterales {shape} no coinciden con la malla {grid.lateral_shape}"
        )
    return arr


# ---------------------------------------
# Transformadas laterales
# ---------------------------------------
def forward_lateral(samples: np.ndarray, grid: LateralGrid, axes=(-2, -1)) -> np.ndarray:
    """Coeficientes de Fourier por modo (convención unitaria escalada al toro)."""
    arr = _check_lateral(samples, grid, axes)
    return np.sqrt(grid.area_element) * np.fft.fft2(arr, axes=axes, norm="ortho")


def inverse_lateral(coefficients: np.ndarray, grid: LateralGrid, axes=(-2, -1)) -> np.ndarray:
    """Inversa exacta de :func:`forward_lateral` (devuelve complejo)."""
    arr = _check_lateral(coefficients, grid, axes)
    return np.fft.ifft2(arr, axes=axes, norm="ortho") / np.sqrt(grid.area_element)


def hermitian_defect(coefficients: np.ndarray, grid: LateralGrid) -> float:
    """max |u(-xi) - conj u(xi)| relativo; cero para campos reales."""
    c = _check_lateral(coefficients, grid)
    mirrored = np.roll(np.flip(c, axis=(-2, -1)), shift=(1, 1), axis=(-2, -1))
    scale = max(float(np.max(np.abs(c))), np.finfo(float).tiny)
    return float(np.max(np.abs(mirrored - np.conj(c)))) / scale


# ---------------------------------------
# Normas en la losa
# ---------------------------------------
def _check_slab(field_: np.ndarray, grid: LateralGrid) -> np.ndarray:
    arr = np.asarray(field_)
    if arr.shape[-3:] != grid.node_shape:
        raise ShapeError(f"Campo con forma {arr.shape}; se esperaba (..., {grid.node_shape})")
    return arr


def l2_norm_slab(field_: np.ndarray, grid: LateralGrid, method: str = "physical") -> float:
    """Norma L2 en la losa.

    ``method="physical"`` usa suma de Riemann lateral y trapecio en z;
    ``method="spectral"`` suma los coeficientes laterales (Parseval).
    """
    arr = _check_slab(field_, grid)
    if method == "physical":
        dens = np.abs(arr) ** 2 * grid.area_element
    elif method == "spectral":
        dens = np.abs(forward_lateral(arr, grid, axes=(-3, -2))) ** 2
    else:
        raise ValueError(f"Método desconocido: {method}")
    total = np.sum(dens * grid.z_weights)
    return float(np.sqrt(total))


def _dz(values: np.ndarray, grid: LateralGrid) -> np.ndarray:
    # centrada de segundo orden, unilateral de segundo orden en z = h1, h2
    return np.gradient(values, grid.dz, axis=-1, edge_order=2)


def curl_spectral(field_: np.ndarray, grid: LateralGrid) -> np.ndarray:
    """Coeficientes laterales del rotacional (3, Nx, Ny, nz+1)."""
    arr = _check_slab(field_, grid)
    if arr.shape[0] != 3:
        raise ShapeError("El rotacional requiere un campo vectorial de 3 componentes")
    u = forward_lateral(arr, grid, axes=(-3, -2))
    xi1, xi2 = (k[..., None] for k in grid.xi)
    uz = _dz(u, grid)
    return np.stack(
        (
            1j * xi2 * u[2] - uz[1],
            uz[0] - 1j * xi1 * u[2],
            1j * xi1 * u[1] - 1j * xi2 * u[0],
        )
    )


def hcurl_norm(field_: np.ndarray, grid: LateralGrid) -> float:
    """Norma H(curl) con la forma espectral de seis términos."""
    arr = _check_slab(field_, grid)
    u = forward_lateral(arr, grid, axes=(-3, -2))
    c = curl_spectral(arr, grid)
    dens = np.sum(np.abs(u) ** 2, axis=0) + np.sum(np.abs(c) ** 2, axis=0)
    return float(np.sqrt(np.sum(dens * grid.z_weights)))


# ---------------------------------------
# Trazas tangenciales
# ---------------------------------------
@dataclass
class TangentialTrace:
    """Traza tangencial (u1, u2) por modo sobre Gamma_1 o Gamma_2."""

    grid: LateralGrid
    boundary_id: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.boundary_id not in (1, 2):
            raise ShapeError(f"boundary_id={self.boundary_id}; debe ser 1 o 2")
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2, *self.grid.lateral_shape):
            raise ShapeError(
                f"Coeficientes con forma {self.coeffs.shape}; se esperaba (2, {self.grid.lateral_shape})"
            )

    @classmethod
    def from_samples(cls, grid: LateralGrid, boundary_id: int, u1, u2) -> "TangentialTrace":
        return cls(grid, boundary_id, forward_lateral(np.stack((u1, u2)), grid))

    @classmethod
    def from_field(cls, field_: np.ndarray, grid: LateralGrid, boundary_id: int) -> "TangentialTrace":
        arr = _check_slab(field_, grid)
        k = -1 if boundary_id == 1 else 0
        return cls.from_samples(grid, boundary_id, arr[0, :, :, k], arr[1, :, :, k])

    @classmethod
    def zeros(cls, grid: LateralGrid, boundary_id: int) -> "TangentialTrace":
        return cls(grid, boundary_id, np.zeros((2, *grid.lateral_shape), dtype=complex))

    def samples(self) -> np.ndarray:
        return inverse_lateral(self.coeffs, self.grid)

    def compatible(self, other: "TangentialTrace") -> bool:
        return self.grid == other.grid and self.boundary_id == other.boundary_id


def trace_weight(grid: LateralGrid, preset: str = STANDARD_WEIGHT) -> np.ndarray:
    if preset == STANDARD_WEIGHT:
        return (1.0 + grid.xi_norm_sq) ** -0.5
    if preset == AS_PRINTED_WEIGHT:
        return 1.0 + grid.xi_norm_sq
    raise ValueError(f"Preset desconocido: {preset}")


def trace_norm(trace: TangentialTrace, kind: TraceKind, preset: str = STANDARD_WEIGHT) -> float:
    u1, u2 = trace.coeffs
    xi1, xi2 = trace.grid.xi
    if kind == "curl_minus_half":
        extra = np.abs(xi1 * u2 - xi2 * u1) ** 2
    elif kind == "div_minus_half":
        extra = np.abs(xi1 * u1 + xi2 * u2) ** 2
    else:
        raise ValueError(f"Tipo de norma de traza desconocido: {kind}")
    dens = np.abs(u1) ** 2 + np.abs(u2) ** 2 + extra
    return float(np.sqrt(np.sum(trace_weight(trace.grid, preset) * dens)))


def duality_pairing(u: TangentialTrace, v: TangentialTrace, method: str = "spectral") -> complex:
    """<u, v> = sum_xi (u1 conj v1 + u2 conj v2); ``method="physical"`` integra en Gamma."""
    if not u.compatible(v):
        raise ShapeError("Las trazas no comparten malla y frontera")
    if method == "spectral":
        return complex(np.sum(u.coeffs * np.conj(v.coeffs)))
    if method == "physical":
        us, vs = u.samples(), v.samples()
        return complex(np.sum(us * np.conj(vs)) * u.grid.area_element)
    raise ValueError(f"Método desconocido: {method}")


def trace_inequality_constant(grid: LateralGrid) -> float:
    """C = max{sqrt(1 + (h1-h2)^-1), sqrt(2)}."""
    return max(np.sqrt(1.0 + 1.0 / grid.thickness), np.sqrt(2.0))

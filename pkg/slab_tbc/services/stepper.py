# slab_tbc/services/stepper.py
"""
Integrador leapfrog en malla escalonada (tipo Yee) dentro de la losa.

Posiciones (i, j, k indexan x, y, z):
    Ex (i+1/2, j,     k)      Hx (i,     j+1/2, k+1/2)
    Ey (i,     j+1/2, k)      Hy (i+1/2, j,     k+1/2)
    Ez (i,     j,     k+1/2)  Hz (i+1/2, j+1/2, k)

Los nodos k = 0 y k = nz están sobre Gamma_2 (z = h2) y Gamma_1 (z = h1).
El estado guarda E^n y H^{n+1/2}. Cierre PEC (E tangencial nulo en
Gamma_j) o TBC: en los planos frontera la semicelda usa un H tangencial
fantasma dado por H x n_j = T_j[E_Gamma], con T_j realizado por CQ modo a
modo e impuesto de forma implícita en cada paso.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..errors import (
    ConfigurationError,
    DataError,
    NonFiniteError,
    ShapeError,
    SlabTbcError,
    StepError,
)
from .cq import DEFAULT_GENERATOR, CQKernel, ConvolutionHistory, capacity_kernel
from .sdomain import LayeredProfile
from .spectral import LateralGrid, forward_lateral, inverse_lateral

logger = logging.getLogger(__name__)

DEFAULT_CFL = 0.5
CLOSURES = ("pec", "tbc")
SIDES = (1, 2)

Fields = tuple  # (x, y, z)


# ---------------------------------------
# Medio
# ---------------------------------------
@dataclass
class SlabMedium:
    """Coeficientes muestreados por componente en las posiciones de E y H.

    ``eps = (eps_x, eps_y, eps_z)`` en las posiciones de (Ex, Ey, Ez) y
    ``mu = (mu_x, mu_y, mu_z)`` en las de (Hx, Hy, Hz); cada arreglo debe
    poder difundirse a la forma de su componente.
    """

    grid: LateralGrid
    eps: Fields
    mu: Fields
    exterior: tuple
    eps_bounds: tuple | None = None
    mu_bounds: tuple | None = None

    def __post_init__(self):
        g = self.grid
        e_shapes, h_shapes = component_shapes(g)
        self.eps = tuple(np.broadcast_to(np.asarray(a, float), s) for a, s in zip(self.eps, e_shapes))
        self.mu = tuple(np.broadcast_to(np.asarray(a, float), s) for a, s in zip(self.mu, h_shapes))
        for name, arrs, bounds in (("eps", self.eps, self.eps_bounds), ("mu", self.mu, self.mu_bounds)):
            lo = min(float(a.min()) for a in arrs)
            hi = max(float(a.max()) for a in arrs)
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo <= 0:
                raise DataError(f"medium.{name}", "muestras finitas y > 0")
            if bounds is not None and (lo < bounds[0] or hi > bounds[1]):
                raise DataError(f"medium.{name}", f"{name}_min <= {name} <= {name}_max",
                                f"rango=({lo}, {hi}), cotas={tuple(bounds)}")
        self._check_boundary_homogeneity()

    def _check_boundary_homogeneity(self):
        # las celdas junto a Gamma_j deben reproducir (eps_j, mu_j)
        ext1, ext2 = self.exterior
        for ext, k_node, k_half in ((ext1, -1, -1), (ext2, 0, 0)):
            checks = (
                ("eps_x", self.eps[0][..., k_node], ext.eps),
                ("eps_y", self.eps[1][..., k_node], ext.eps),
                ("eps_z", self.eps[2][..., k_half], ext.eps),
                ("mu_x", self.mu[0][..., k_half], ext.mu),
                ("mu_y", self.mu[1][..., k_half], ext.mu),
                ("mu_z", self.mu[2][..., k_node], ext.mu),
            )
            for name, vals, target in checks:
                if not np.allclose(vals, target, rtol=1e-12, atol=0.0):
                    raise DataError(
                        f"medium.{name}",
                        f"igual al medio exterior {ext.side} junto a Gamma_{ext.side}",
                        f"esperado {target}",
                    )

    @classmethod
    def from_profile(cls, grid: LateralGrid, profile: LayeredProfile) -> "SlabMedium":
        if not (np.isclose(profile.h1, grid.h1) and np.isclose(profile.h2, grid.h2)):
            raise ConfigurationError("medium.profile", "mismas alturas h1, h2 que la malla")
        m = profile.staggered_samples(grid.nz)
        return cls(
            grid,
            eps=(m["eps_node"], m["eps_node"], m["eps_half"]),
            mu=(m["mu_half"], m["mu_half"], m["mu_node"]),
            exterior=(profile.exterior(1), profile.exterior(2)),
            eps_bounds=profile.eps_range,
            mu_bounds=profile.mu_range,
        )

    @classmethod
    def uniform(cls, grid: LateralGrid, eps: float = 1.0, mu: float = 1.0) -> "SlabMedium":
        return cls.from_profile(grid, LayeredProfile.homogeneous(grid.h1, grid.h2, eps, mu))

    @property
    def eps_min(self) -> float:
        return min(float(a.min()) for a in self.eps)

    @property
    def mu_min(self) -> float:
        return min(float(a.min()) for a in self.mu)

    @property
    def max_wave_speed(self) -> float:
        return 1.0 / np.sqrt(self.eps_min * self.mu_min)

    def dt_max(self) -> float:
        g = self.grid
        return 1.0 / (self.max_wave_speed * np.sqrt(1 / g.dx**2 + 1 / g.dy**2 + 1 / g.dz**2))

    def dt_for(self, cfl: float = DEFAULT_CFL) -> float:
        return cfl * self.dt_max()


def component_shapes(grid: LateralGrid) -> tuple[tuple, tuple]:
    nx, ny = grid.lateral_shape
    node = (nx, ny, grid.nz + 1)
    half = (nx, ny, grid.nz)
    return (node, node, half), (half, half, node)


def component_positions(grid: LateralGrid, kind: str, comp: int) -> tuple:
    """Coordenadas (X, Y, Z) difundibles de la componente ``comp`` de E o H."""
    x = grid.x[:, None, None]
    y = grid.y[None, :, None]
    xs = x + 0.5 * grid.dx
    ys = y + 0.5 * grid.dy
    zn = grid.z_nodes[None, None, :]
    zh = grid.z_half[None, None, :]
    table = {
        ("E", 0): (xs, y, zn), ("E", 1): (x, ys, zn), ("E", 2): (x, y, zh),
        ("H", 0): (x, ys, zh), ("H", 1): (xs, y, zh), ("H", 2): (xs, ys, zn),
    }
    return table[(kind, comp)]


def zero_fields(grid: LateralGrid, kind: str) -> Fields:
    e_shapes, h_shapes = component_shapes(grid)
    return tuple(np.zeros(s) for s in (e_shapes if kind == "E" else h_shapes))


# ---------------------------------------
# Operadores discretos
# ---------------------------------------
def _dxf(f, g):
    return (np.roll(f, -1, axis=0) - f) / g.dx


def _dxb(f, g):
    return (f - np.roll(f, 1, axis=0)) / g.dx


def _dyf(f, g):
    return (np.roll(f, -1, axis=1) - f) / g.dy


def _dyb(f, g):
    return (f - np.roll(f, 1, axis=1)) / g.dy


def _dz_up(f, g):
    return (f[..., 1:] - f[..., :-1]) / g.dz


def _dz_down(h, g):
    # puntos medios -> nodos; semiceldas en los planos frontera con fantasma nulo
    out = np.empty(h.shape[:-1] + (h.shape[-1] + 1,))
    out[..., 1:-1] = (h[..., 1:] - h[..., :-1]) / g.dz
    out[..., 0] = 2.0 * h[..., 0] / g.dz
    out[..., -1] = -2.0 * h[..., -1] / g.dz
    return out


def curl_h(e: Fields, grid: LateralGrid) -> Fields:
    """curl de E evaluado en las posiciones de H."""
    ex, ey, ez = e
    return (
        _dyf(ez, grid) - _dz_up(ey, grid),
        _dz_up(ex, grid) - _dxf(ez, grid),
        _dxf(ey, grid) - _dyf(ex, grid),
    )


def curl_e(h: Fields, grid: LateralGrid) -> Fields:
    """curl de H en las posiciones de E (H tangencial fantasma nulo en Gamma_j)."""
    hx, hy, hz = h
    return (
        _dyb(hz, grid) - _dz_down(hy, grid),
        _dz_down(hx, grid) - _dxb(hz, grid),
        _dxb(hy, grid) - _dyb(hx, grid),
    )


def curl_e_interior(h: Fields, grid: LateralGrid) -> Fields:
    """curl de H sin las filas de semicelda tangenciales de los planos frontera."""
    c = curl_e(h, grid)
    for k in (0, -1):
        c[0][..., k] = 0.0
        c[1][..., k] = 0.0
    return c


def divergence_nodes(e: Fields, grid: LateralGrid) -> np.ndarray:
    """div en los nodos interiores k = 1..nz-1."""
    ex, ey, ez = e
    return (
        _dxb(ex, grid)[..., 1:-1]
        + _dyb(ey, grid)[..., 1:-1]
        + (ez[..., 1:] - ez[..., :-1]) / grid.dz
    )


def _weights(arr: np.ndarray, grid: LateralGrid) -> np.ndarray:
    if arr.shape[-1] == grid.nz + 1:
        return grid.z_weights * grid.area_element
    return np.full(grid.nz, grid.dz * grid.area_element)


def inner(a: Fields, b: Fields, grid: LateralGrid, coeff: Fields | None = None) -> float:
    """<coeff a, b> con pesos de semicelda en los nodos frontera."""
    total = 0.0
    for c, (ac, bc) in enumerate(zip(a, b)):
        prod = ac * bc if coeff is None else coeff[c] * ac * bc
        total += float(np.sum(prod * _weights(ac, grid)))
    return total


def _scale(f: Fields, factor: Fields | float, power: float = 1.0) -> Fields:
    if np.isscalar(factor):
        return tuple(factor**power * c for c in f)
    return tuple(k**power * c for k, c in zip(factor, f))


def _add(a: Fields, b: Fields, alpha: float = 1.0) -> Fields:
    return tuple(x + alpha * y for x, y in zip(a, b))


# ---------------------------------------
# Fuentes y estado
# ---------------------------------------
@dataclass
class SourceTerm:
    """J(x, t) = forma(x) f(t) separable, más datos iniciales E0, H0.

    ``support`` = (x0, x1, y0, y1, z0, z1): caja donde se anulan E0, H0 y J.
    """

    grid: LateralGrid
    e0: Fields | None = None
    h0: Fields | None = None
    j_shape: Fields | None = None
    waveform: Callable[[float], float] | None = None
    support: tuple | None = None
    label: str = ""

    def __post_init__(self):
        e_shapes, h_shapes = component_shapes(self.grid)
        for name, shapes in (("e0", e_shapes), ("j_shape", e_shapes), ("h0", h_shapes)):
            comps = getattr(self, name)
            if comps is None:
                continue
            if len(comps) != 3 or any(np.shape(c) != s for c, s in zip(comps, shapes)):
                raise ShapeError(f"{name}: se esperaban componentes con formas {shapes}")
            setattr(self, name, tuple(np.asarray(c, float) for c in comps))
        if self.j_shape is not None and self.waveform is None:
            raise DataError("source.waveform", "perfil temporal definido si hay corriente")

    @property
    def has_current(self) -> bool:
        return self.j_shape is not None and any(np.any(c) for c in self.j_shape)

    def current(self, t: float) -> Fields | None:
        if not self.has_current:
            return None
        f = float(self.waveform(t))
        return tuple(f * c for c in self.j_shape)

    def j0(self) -> Fields | None:
        return self.current(0.0)

    @property
    def h1_compliant(self) -> bool:
        """J(., 0) = 0."""
        return not self.has_current or float(self.waveform(0.0)) == 0.0

    def initial_e(self) -> Fields:
        return self.e0 if self.e0 is not None else zero_fields(self.grid, "E")

    def initial_h(self) -> Fields:
        return self.h0 if self.h0 is not None else zero_fields(self.grid, "H")

    def without_initial_data(self) -> "SourceTerm":
        return replace(self, e0=None, h0=None, label=f"{self.label}:J")

    def without_current(self) -> "SourceTerm":
        return replace(self, j_shape=None, waveform=None, label=f"{self.label}:E0H0")

    def scaled(self, factor: float) -> "SourceTerm":
        sc = lambda comps: None if comps is None else tuple(factor * c for c in comps)  # noqa: E731
        return replace(self, e0=sc(self.e0), h0=sc(self.h0), j_shape=sc(self.j_shape))

    def check_support(self) -> None:
        g = self.grid
        if self.support is None:
            return
        x0, x1, y0, y1, z0, z1 = self.support
        if not (g.h2 < z0 <= z1 < g.h1):
            raise DataError("source.support", "h2 < z0 <= z1 < h1 (soporte compacto en la losa)",
                            f"z=[{z0}, {z1}]")
        for name, kind, comps in (("e0", "E", self.e0), ("h0", "H", self.h0), ("j_shape", "E", self.j_shape)):
            if comps is None:
                continue
            for c, arr in enumerate(comps):
                X, Y, Z = component_positions(g, kind, c)
                inside = (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1) & (Z >= z0) & (Z <= z1)
                if np.any(arr[~np.broadcast_to(inside, arr.shape)] != 0.0):
                    raise DataError(f"source.{name}.{'xyz'[c]}", "se anula fuera de la caja de soporte")


@dataclass
class _BoundaryState:
    side: int
    kernel: CQKernel
    history: ConvolutionHistory
    solve: np.ndarray      # (I + gamma/2 W0)^-1 por modo
    gamma: float
    t_prev: np.ndarray     # (T E)^n en modos, (Nx, Ny, 2)


@dataclass
class FieldState:
    """E^n y H^{n+1/2}, con acumuladores de trabajo en frontera y fuente."""

    n: int
    dt: float
    grid: LateralGrid
    e: Fields
    h: Fields
    closure: str = "pec"
    e_prev: list = field(default_factory=list)
    boundary: dict = field(default_factory=dict)
    boundary_work: float = 0.0
    source_work: float = 0.0
    charge: np.ndarray | None = None
    div_scale: float = 1.0
    wall_field: dict = field(default_factory=dict)

    @property
    def t(self) -> float:
        return self.n * self.dt

    def trace_history(self, side: int) -> np.ndarray:
        b = self.boundary.get(side)
        return b.history.samples() if b is not None else np.zeros((0,))

    def copy_fields(self) -> tuple[Fields, Fields]:
        return tuple(c.copy() for c in self.e), tuple(c.copy() for c in self.h)


# ---------------------------------------
# Transformadas de traza con fase de escalonamiento
# ---------------------------------------
def _phases(grid: LateralGrid) -> tuple[np.ndarray, np.ndarray]:
    xi1, xi2 = grid.xi
    nyq_x = (grid.mode_indices_x == -grid.modes_x // 2)[:, None]
    nyq_y = (grid.mode_indices_y == -grid.modes_y // 2)[None, :]
    px = np.where(nyq_x, 1.0, np.exp(-0.5j * xi1 * grid.dx))
    py = np.where(nyq_y, 1.0, np.exp(-0.5j * xi2 * grid.dy))
    return px, py


def trace_to_modes(tx: np.ndarray, ty: np.ndarray, grid: LateralGrid) -> np.ndarray:
    px, py = _phases(grid)
    return np.stack((forward_lateral(tx, grid) * px, forward_lateral(ty, grid) * py), axis=-1)


def modes_to_trace(c: np.ndarray, grid: LateralGrid) -> tuple[np.ndarray, np.ndarray]:
    px, py = _phases(grid)
    return inverse_lateral(c[..., 0] / px, grid).real, inverse_lateral(c[..., 1] / py, grid).real


def build_kernels(medium: SlabMedium, dt: float, horizon: int, generator: str = DEFAULT_GENERATOR) -> dict:
    """Par de núcleos T (lado 1 y lado 2) con números de onda discretos."""
    return {
        ext.side: capacity_kernel(medium.grid, ext, dt, horizon, generator, operator_kind="T", lateral="discrete")
        for ext in medium.exterior
    }


def _boundary_index(side: int) -> int:
    return -1 if side == 1 else 0


def _setup_boundary(state: FieldState, medium: SlabMedium, kernels: dict) -> None:
    g = medium.grid
    for side in SIDES:
        kern = kernels.get(side)
        if kern is None:
            raise ConfigurationError(f"kernels.{side}", "un núcleo por frontera")
        if kern.operator_kind != "T":
            raise ConfigurationError(f"kernels.{side}", "operator_kind = T")
        if kern.weights.shape[1:3] != g.lateral_shape:
            raise ShapeError(f"Núcleo del lado {side} con modos {kern.weights.shape[1:3]}; malla {g.lateral_shape}")
        if not np.isclose(kern.dt, state.dt, rtol=1e-12, atol=0.0):
            raise ConfigurationError(f"kernels.{side}.dt", "dt del núcleo = dt del paso", f"{kern.dt} != {state.dt}")
        k = _boundary_index(side)
        gamma = 2.0 * state.dt / (float(medium.eps[0][0, 0, k]) * g.dz)
        w0 = kern.weights[0]
        solve = np.linalg.inv(np.eye(2) + 0.5 * gamma * w0)
        hist = ConvolutionHistory(kern, (*g.lateral_shape, 2))
        e_hat = trace_to_modes(state.e[0][..., k], state.e[1][..., k], g)
        hist.push(e_hat)
        t0 = np.einsum("...ab,...b->...a", w0, e_hat)
        state.boundary[side] = _BoundaryState(side, kern, hist, solve, gamma, t0)


# ---------------------------------------
# Inicialización y pasos
# ---------------------------------------
def init(
    medium: SlabMedium,
    source: SourceTerm,
    dt: float,
    kernels: dict | None = None,
    closure: str | None = None,
) -> FieldState:
    """Estado en n = 0 con H^{1/2} = H0 - (dt/2) mu^-1 curl E0."""
    g = medium.grid
    if source.grid != g:
        raise ShapeError("La fuente y el medio no comparten la malla")
    if not dt > 0:
        raise ConfigurationError("dt", "dt > 0", f"dt={dt}")
    dt_max = medium.dt_max()
    if dt > dt_max * (1.0 + 1e-12):
        raise ConfigurationError("dt", "dt <= dt_max (CFL)", f"dt={dt:.6g}, dt_max={dt_max:.6g}")
    source.check_support()
    closure = closure or ("tbc" if kernels else "pec")
    if closure not in CLOSURES:
        raise ConfigurationError("closure", "closure in {'pec', 'tbc'}", closure)

    e0 = tuple(c.copy() for c in source.initial_e())
    h0 = source.initial_h()
    if closure == "pec":
        for c in (0, 1):
            e0[c][..., 0] = 0.0
            e0[c][..., -1] = 0.0
    half = _scale(curl_h(e0, g), medium.mu, -1.0)
    h = _add(h0, half, -0.5 * dt)

    eps_e = _scale(e0, medium.eps)
    div0 = divergence_nodes(eps_e, g)
    mags = [float(np.max(np.abs(c))) for c in eps_e]
    if source.has_current:
        mags += [float(np.max(np.abs(c))) for c in source.j_shape]
    scale = max(mags) / min(g.dx, g.dy, g.dz) if max(mags) > 0 else 1.0

    state = FieldState(
        n=0, dt=dt, grid=g, e=e0, h=h, closure=closure,
        charge=np.zeros_like(div0), div_scale=scale,
    )
    if closure == "tbc":
        if kernels is None:
            raise ConfigurationError("kernels", "núcleos CQ requeridos para el cierre TBC")
        _setup_boundary(state, medium, kernels)
    logger.debug("Estado inicial: cierre=%s dt=%.4e (dt_max=%.4e)", closure, dt, dt_max)
    return state


def _predictor(state: FieldState, medium: SlabMedium, source: SourceTerm) -> tuple[Fields, Fields | None]:
    g = medium.grid
    j = source.current((state.n + 0.5) * state.dt)
    rate = curl_e(state.h, g)
    if j is not None:
        rate = _add(rate, j, -1.0)
    return _add(state.e, _scale(rate, medium.eps, -1.0), state.dt), j


def _finish_step(state: FieldState, medium: SlabMedium, e_new: Fields, j: Fields | None) -> FieldState:
    g = medium.grid
    dt = state.dt
    if j is not None:
        state.source_work += dt * inner(j, _add(e_new, state.e), g)
        state.charge = state.charge + dt * divergence_nodes(j, g)
    state.e_prev = [state.e] + state.e_prev[:1]
    state.e = e_new
    state.h = _add(state.h, _scale(curl_h(e_new, g), medium.mu, -1.0), -dt)
    state.n += 1
    for name, comps in (("E", state.e), ("H", state.h)):
        if not all(np.all(np.isfinite(c)) for c in comps):
            logger.warning("Valores no finitos en %s en el paso %d", name, state.n)
            raise NonFiniteError(state.n, name)
    return state


def step_pec(state: FieldState, medium: SlabMedium, source: SourceTerm) -> FieldState:
    """Un paso leapfrog con E tangencial nulo en Gamma_1 y Gamma_2.

    Registra en ``state.wall_field`` el H tangencial de pared (H x n_j)
    que impone la condición, usado como dato de frontera del problema
    reducido.
    """
    e_new, j = _predictor(state, medium, source)
    g = medium.grid
    for side in SIDES:
        k = _boundary_index(side)
        gamma = 2.0 * state.dt / (float(medium.eps[0][0, 0, k]) * g.dz)
        state.wall_field[side] = np.stack((e_new[0][..., k], e_new[1][..., k])) / gamma
        e_new[0][..., k] = 0.0
        e_new[1][..., k] = 0.0
    return _finish_step(state, medium, e_new, j)


def step_tbc(
    state: FieldState,
    medium: SlabMedium,
    source: SourceTerm,
    forcing: dict | None = None,
) -> FieldState:
    """Un paso con la condición transparente implícita en ambas fronteras.

    En cada plano frontera E^{n+1} = P - gamma (v - g), con
    v = ((T E)^{n+1} + (T E)^n)/2 y g el dato opcional ``forcing[side]``
    (H x n_j de pared, forma (2, Nx, Ny)).
    """
    if not state.boundary:
        raise ConfigurationError("kernels", "estado inicializado con núcleos TBC")
    e_new, j = _predictor(state, medium, source)
    g = medium.grid
    dt = state.dt
    n_next = state.n + 1
    work = 0.0
    for side in SIDES:
        b = state.boundary[side]
        k = _boundary_index(side)
        p_hat = trace_to_modes(e_new[0][..., k], e_new[1][..., k], g)
        g_hat = None
        if forcing and forcing.get(side) is not None:
            gx, gy = forcing[side]
            g_hat = trace_to_modes(gx, gy, g)
            p_hat = p_hat + b.gamma * g_hat
        lag = b.history.lagged(n_next)
        rhs = p_hat - 0.5 * b.gamma * (lag + b.t_prev)
        e_hat = np.einsum("...ab,...b->...a", b.solve, rhs)
        b.history.push(e_hat)
        t_next = np.einsum("...ab,...b->...a", b.kernel.weights[0], e_hat) + lag
        v_hat = 0.5 * (t_next + b.t_prev)
        if g_hat is not None:
            v_hat = v_hat - g_hat
        b.t_prev = t_next

        ex_b, ey_b = modes_to_trace(e_hat, g)
        vx, vy = modes_to_trace(v_hat, g)
        work += float(np.sum(vx * (ex_b + state.e[0][..., k]) + vy * (ey_b + state.e[1][..., k])))
        e_new[0][..., k] = ex_b
        e_new[1][..., k] = ey_b
    state.boundary_work += dt * g.area_element * work
    return _finish_step(state, medium, e_new, j)


def step(state: FieldState, medium: SlabMedium, source: SourceTerm, forcing: dict | None = None) -> FieldState:
    if state.closure == "tbc":
        return step_tbc(state, medium, source, forcing)
    return step_pec(state, medium, source)


# ---------------------------------------
# Energías y diagnósticos
# ---------------------------------------
def _h_previous(state: FieldState, medium: SlabMedium) -> Fields:
    """H^{n-1/2} = H^{n+1/2} + dt mu^-1 curl E^n."""
    return _add(state.h, _scale(curl_h(state.e, medium.grid), medium.mu, -1.0), state.dt)


def discrete_energy(state: FieldState, medium: SlabMedium) -> float:
    """<eps E^n, E^n> + <mu H^{n-1/2}, H^{n+1/2}> (se conserva exactamente con PEC y J = 0)."""
    g = medium.grid
    return inner(state.e, state.e, g, medium.eps) + inner(_h_previous(state, medium), state.h, g, medium.mu)


def energy_invariant(state: FieldState, medium: SlabMedium) -> float:
    """Energía del esquema + trabajo en frontera + trabajo de la fuente."""
    return discrete_energy(state, medium) + state.boundary_work + state.source_work


@dataclass
class EnergyReport:
    """Series por paso de las energías y normas."""

    columns = (
        "step", "t", "e1", "e2", "e3", "l2_E", "l2_H", "hcurl_E", "hcurl_H", "boundary_work",
    )
    rows: list = field(default_factory=list)
    scheme_energy: list = field(default_factory=list)
    invariant: list = field(default_factory=list)

    def append(self, row: dict, scheme: float, invariant: float) -> None:
        self.rows.append(row)
        self.scheme_energy.append(scheme)
        self.invariant.append(invariant)

    def series(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    def __len__(self) -> int:
        return len(self.rows)


def energies(state: FieldState, medium: SlabMedium) -> dict:
    """e1, e2, e3 y normas en el paso actual; e2/e3 ausentes (None) sin historia suficiente."""
    g = medium.grid
    dt = state.dt
    c_e = curl_h(state.e, g)
    dh = _scale(c_e, medium.mu, -1.0)                   # (H^{n+1/2} - H^{n-1/2}) / dt
    h_bar = _add(state.h, dh, -0.5 * dt)
    e1 = inner(state.e, state.e, g, medium.eps) + inner(h_bar, h_bar, g, medium.mu)

    e2 = e3 = None
    if len(state.e_prev) >= 1:
        de = tuple((a - b) / dt for a, b in zip(state.e, state.e_prev[0]))
        e2 = inner(de, de, g, medium.eps) + inner(dh, dh, g, medium.mu)
        d2h = _scale(curl_h(de, g), medium.mu, -1.0)
        if len(state.e_prev) >= 2:
            d2e = tuple(
                (a - 2 * b + c) / dt**2 for a, b, c in zip(state.e, state.e_prev[0], state.e_prev[1])
            )
            e3 = inner(d2e, d2e, g, medium.eps) + inner(d2h, d2h, g, medium.mu)

    l2_e = inner(state.e, state.e, g)
    l2_h = inner(h_bar, h_bar, g)
    c_h = curl_e_interior(h_bar, g)
    return {
        "step": state.n,
        "t": state.t,
        "e1": e1,
        "e2": e2,
        "e3": e3,
        "l2_E": float(np.sqrt(l2_e)),
        "l2_H": float(np.sqrt(l2_h)),
        "hcurl_E": float(np.sqrt(l2_e + inner(c_e, c_e, g))),
        "hcurl_H": float(np.sqrt(l2_h + inner(c_h, c_h, g))),
        "boundary_work": state.boundary_work,
    }


def divergence_residual(state: FieldState, medium: SlabMedium) -> float:
    """max |div(eps E^n) + dt sum div J| en nodos interiores, normalizado."""
    g = medium.grid
    div = divergence_nodes(_scale(state.e, medium.eps), g)
    if state.charge is not None:
        div = div + state.charge
    return float(np.max(np.abs(div))) / state.div_scale if div.size else 0.0


def initial_rates(medium: SlabMedium, source: SourceTerm, closure: str = "pec") -> dict:
    """dE/dt|0 = eps^-1(curl H0 - J0), dH/dt|0 = -mu^-1 curl E0, d2E/dt2|0 = -eps^-1 curl(mu^-1 curl E0)."""
    g = medium.grid
    e0, h0 = source.initial_e(), source.initial_h()
    rate = curl_e(h0, g)
    j0 = source.j0()
    if j0 is not None:
        rate = _add(rate, j0, -1.0)
    de = _scale(rate, medium.eps, -1.0)
    dh = _scale(_scale(curl_h(e0, g), medium.mu, -1.0), -1.0)
    d2e = _scale(_scale(curl_e(_scale(curl_h(e0, g), medium.mu, -1.0), g), medium.eps, -1.0), -1.0)
    if closure == "pec":
        for f in (de, d2e):
            for c in (0, 1):
                f[c][..., 0] = 0.0
                f[c][..., -1] = 0.0
    return {"dE": de, "dH": dh, "d2E": d2e}


def field_norm(f: Fields, grid: LateralGrid, coeff: Fields | None = None) -> float:
    return float(np.sqrt(max(inner(f, f, grid, coeff), 0.0)))


# ---------------------------------------
# Corrida completa
# ---------------------------------------
@dataclass
class RunPlan:
    medium: SlabMedium
    source: SourceTerm
    dt: float
    steps: int
    closure: str = "pec"
    generator: str = DEFAULT_GENERATOR
    kernels: dict | None = None
    forcing: Callable[[int], dict] | None = None
    record_wall: bool = False
    snapshot_every: int = 0
    on_snapshot: Callable[[FieldState], None] | None = None


@dataclass
class RunResult:
    report: EnergyReport
    state: FieldState
    traces: dict
    divergence: list = field(default_factory=list)


def run(plan: RunPlan) -> RunResult:
    """Integra ``plan.steps`` pasos registrando energías en cada paso.

    Los errores del paquete se envuelven en StepError con el paso en curso;
    NonFiniteError se propaga tal cual.
    """
    medium, source = plan.medium, plan.source
    if plan.closure not in CLOSURES:
        raise ConfigurationError("closure", "closure in {'pec', 'tbc'}", plan.closure)
    if plan.steps < 0:
        raise ConfigurationError("steps", "steps >= 0", str(plan.steps))
    kernels = plan.kernels
    if plan.closure == "tbc" and kernels is None:
        kernels = build_kernels(medium, plan.dt, max(plan.steps, 1), plan.generator)
    state = init(medium, source, plan.dt, kernels if plan.closure == "tbc" else None, plan.closure)

    report = EnergyReport()
    walls = {side: [] for side in SIDES} if plan.record_wall else {}
    divergence = [divergence_residual(state, medium)]
    report.append(energies(state, medium), discrete_energy(state, medium), energy_invariant(state, medium))

    for n in range(plan.steps):
        try:
            if plan.closure == "tbc":
                step_tbc(state, medium, source, plan.forcing(n) if plan.forcing else None)
            else:
                step_pec(state, medium, source)
        except NonFiniteError:
            raise
        except SlabTbcError as e:
            raise StepError(n + 1, e) from e
        if plan.record_wall and state.wall_field:
            for side in SIDES:
                walls[side].append(state.wall_field[side].copy())
        report.append(energies(state, medium), discrete_energy(state, medium), energy_invariant(state, medium))
        divergence.append(divergence_residual(state, medium))
        if plan.snapshot_every and plan.on_snapshot and state.n % plan.snapshot_every == 0:
            plan.on_snapshot(state)
        if state.n % 100 == 0:
            logger.debug("Paso %d/%d: e1=%.6e", state.n, plan.steps, report.rows[-1]["e1"])

    traces = {side: state.trace_history(side) for side in SIDES} if plan.closure == "tbc" else {}
    if plan.record_wall:
        traces = {**traces, **{f"wall_{side}": np.array(walls[side]) for side in SIDES}}
    logger.info("Corrida %s terminada: %d pasos, dt=%.4e", plan.closure, plan.steps, plan.dt)
    return RunResult(report, state, traces, divergence)

# slab_tbc/services/sources.py
"""Constructores de datos iniciales y corrientes con soporte compacto."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .spectral import LateralGrid
from .stepper import SlabMedium, SourceTerm, component_positions, component_shapes

POLARIZATIONS = ("x", "y")
PROFILES = ("bump", "gaussian")
# radio de corte de la gaussiana, en anchos
GAUSSIAN_CUTOFF = 5.0


# ---------------------------------------
# Perfiles temporales
# ---------------------------------------
@dataclass(frozen=True)
class SineSquaredPulse:
    """f(t) = sin^2(pi t / tau) en [0, tau] y 0 fuera; f(0) = 0."""

    duration: float
    amplitude: float = 1.0
    delay: float = 0.0

    def __call__(self, t: float) -> float:
        u = t - self.delay
        if u <= 0.0 or u >= self.duration:
            return 0.0
        return self.amplitude * np.sin(np.pi * u / self.duration) ** 2


@dataclass(frozen=True)
class GaussianEnvelope:
    """Gaussiana modulada; no se anula en t = 0 salvo que el retardo la desplace."""

    center: float
    width: float
    frequency: float = 0.0
    amplitude: float = 1.0

    def __call__(self, t: float) -> float:
        env = np.exp(-(((t - self.center) / self.width) ** 2))
        return self.amplitude * env * np.cos(2 * np.pi * self.frequency * (t - self.center))


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __call__(self, t: float) -> float:
        return self.value


def waveform_from_spec(kind: str, **params):
    table = {"sin2": SineSquaredPulse, "gaussian": GaussianEnvelope, "constant": Constant}
    try:
        cls = table[kind]
    except KeyError:
        raise ConfigurationError("source.temporal.kind", f"kind in {sorted(table)}", kind) from None
    return cls(**params)


# ---------------------------------------
# Perfiles espaciales
# ---------------------------------------
def _bump(r2: np.ndarray) -> np.ndarray:
    # cos^2(pi r / 2) para r < 1
    r = np.sqrt(r2)
    return np.where(r < 1.0, np.cos(0.5 * np.pi * np.minimum(r, 1.0)) ** 2, 0.0)


def _envelope(X, Y, Z, center, width, profile: str, lateral: bool):
    cx, cy, cz = center
    wx, wy, wz = width
    r2 = ((Z - cz) / wz) ** 2
    if lateral:
        r2 = r2 + ((X - cx) / wx) ** 2 + ((Y - cy) / wy) ** 2
    if profile == "bump":
        return _bump(r2)
    if profile == "gaussian":
        g = np.exp(-0.5 * r2 * GAUSSIAN_CUTOFF**2)
        return np.where(r2 < 1.0, g, 0.0)
    raise ConfigurationError("source.profile", f"profile in {PROFILES}", profile)


def support_box(center, width, lateral: bool) -> tuple:
    cx, cy, cz = center
    wx, wy, wz = width
    if lateral:
        return (cx - wx, cx + wx, cy - wy, cy + wy, cz - wz, cz + wz)
    return (-np.inf, np.inf, -np.inf, np.inf, cz - wz, cz + wz)


def plane_pulse(
    medium: SlabMedium,
    center,
    width,
    polarization: str = "x",
    direction: str = "up",
    amplitude: float = 1.0,
    profile: str = "bump",
    lateral: bool = False,
) -> SourceTerm:
    """Pulso que viaja en +z (``"up"``) o -z (``"down"``): E tangencial y H = n x E / eta.

    Con ``lateral=False`` el pulso es uniforme en (x, y) y solenoidal; con
    ``lateral=True`` se recorta también lateralmente (ya no es solenoidal).
    ``width`` son semianchos del soporte (wx, wy, wz).
    """
    g = medium.grid
    if polarization not in POLARIZATIONS:
        raise ConfigurationError("source.polarization", f"polarization in {POLARIZATIONS}", polarization)
    if direction not in ("up", "down"):
        raise ConfigurationError("source.direction", "direction in ('up', 'down')", direction)
    e_shapes, h_shapes = component_shapes(g)
    e0 = [np.zeros(s) for s in e_shapes]
    h0 = [np.zeros(s) for s in h_shapes]
    sign = 1.0 if direction == "up" else -1.0

    # impedancia local (medio homogéneo alrededor del pulso)
    eta = np.sqrt(float(medium.mu[0].max()) / float(medium.eps[0].min()))
    if polarization == "x":
        X, Y, Z = component_positions(g, "E", 0)
        e0[0] = amplitude * _envelope(X, Y, Z, center, width, profile, lateral) * np.ones(e_shapes[0])
        X, Y, Z = component_positions(g, "H", 1)
        h0[1] = sign * amplitude / eta * _envelope(X, Y, Z, center, width, profile, lateral) * np.ones(h_shapes[1])
    else:
        X, Y, Z = component_positions(g, "E", 1)
        e0[1] = amplitude * _envelope(X, Y, Z, center, width, profile, lateral) * np.ones(e_shapes[1])
        X, Y, Z = component_positions(g, "H", 0)
        h0[0] = -sign * amplitude / eta * _envelope(X, Y, Z, center, width, profile, lateral) * np.ones(h_shapes[0])
    return SourceTerm(
        g, e0=tuple(e0), h0=tuple(h0),
        support=support_box(center, width, lateral),
        label=f"plane-pulse-{polarization}-{direction}",
    )


def current_pulse(
    grid: LateralGrid,
    center,
    width,
    waveform,
    polarization: str = "x",
    amplitude: float = 1.0,
    profile: str = "bump",
    lateral: bool = True,
) -> SourceTerm:
    """Corriente J = amplitud * envolvente(x) * f(t) en una componente tangencial."""
    if polarization not in POLARIZATIONS:
        raise ConfigurationError("source.polarization", f"polarization in {POLARIZATIONS}", polarization)
    e_shapes, _ = component_shapes(grid)
    comp = POLARIZATIONS.index(polarization)
    j = [np.zeros(s) for s in e_shapes]
    X, Y, Z = component_positions(grid, "E", comp)
    j[comp] = amplitude * _envelope(X, Y, Z, center, width, profile, lateral) * np.ones(e_shapes[comp])
    return SourceTerm(
        grid, j_shape=tuple(j), waveform=waveform,
        support=support_box(center, width, lateral), label=f"current-{polarization}",
    )


def mode_current(
    grid: LateralGrid,
    mode: tuple[int, int],
    z_profile: np.ndarray,
    waveform,
    polarization: str = "x",
    support_z: tuple | None = None,
) -> SourceTerm:
    """Corriente de un solo modo lateral: J_c = cos(xi . x_c) z_profile(z) f(t).

    ``z_profile`` se muestrea en los nodos (nz + 1 valores). Para modos con
    xi != 0 el coseno se evalúa en la posición escalonada de la componente.
    """
    comp = POLARIZATIONS.index(polarization)
    e_shapes, _ = component_shapes(grid)
    z_profile = np.asarray(z_profile, float)
    if z_profile.shape != (grid.nz + 1,):
        raise ConfigurationError("source.z_profile", f"{grid.nz + 1} valores en los nodos")
    xi1, xi2 = grid.mode_wavenumber(*mode)
    X, Y, _ = component_positions(grid, "E", comp)
    lateral = np.cos(xi1 * X + xi2 * Y)
    j = [np.zeros(s) for s in e_shapes]
    j[comp] = lateral * z_profile[None, None, :] * np.ones(e_shapes[comp])
    support = None
    if support_z is not None:
        support = (-np.inf, np.inf, -np.inf, np.inf, *support_z)
    return SourceTerm(grid, j_shape=tuple(j), waveform=waveform, support=support,
                      label=f"mode-current-{mode}-{polarization}")


def z_bump(grid: LateralGrid, center: float, half_width: float) -> np.ndarray:
    """Perfil cos^2 en los nodos z."""
    return _bump(((grid.z_nodes - center) / half_width) ** 2)


def combine(*sources: SourceTerm) -> SourceTerm:
    """Suma de datos iniciales y corrientes (las corrientes deben compartir perfil temporal)."""
    grid = sources[0].grid

    def total(name):
        parts = [getattr(s, name) for s in sources if getattr(s, name) is not None]
        if not parts:
            return None
        return tuple(sum(p[c] for p in parts) for c in range(3))

    currents = [s for s in sources if s.has_current]
    if any(s.waveform != currents[0].waveform for s in currents[1:]):
        raise ConfigurationError("source.waveform", "un único perfil temporal al combinar corrientes")
    boxes = [s.support for s in sources if s.support is not None]
    support = None
    if boxes:
        b = np.array(boxes, dtype=float)
        support = (b[:, 0].min(), b[:, 1].max(), b[:, 2].min(), b[:, 3].max(), b[:, 4].min(), b[:, 5].max())
    return SourceTerm(
        grid, e0=total("e0"), h0=total("h0"), j_shape=total("j_shape"),
        waveform=currents[0].waveform if currents else None, support=support,
        label="+".join(s.label for s in sources),
    )

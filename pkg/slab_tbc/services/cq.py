# slab_tbc/services/cq.py
"""
Cuadratura de convolución (CQ) para T_j = L^-1 B_j L y C_j = L^-1 s B_j L,
más utilidades de transformada de Laplace usadas por la verificación.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from ..errors import KernelTooShortError, ParameterError, ShapeError
from .spectral import LateralGrid
from .symbols import ExteriorMedium, capacity_array

logger = logging.getLogger(__name__)

# delta(zeta) = sum_k c_k zeta^k
GENERATORS = {
    "BDF1": (1.0, -1.0),
    "BDF2": (1.5, -2.0, 0.5),
}
DEFAULT_GENERATOR = "BDF2"
OPERATOR_KINDS = ("T", "C", "scalar")

# filas de modos por bloque al evaluar símbolos sobre la malla
_MODE_CHUNK = 8


@dataclass
class CQKernel:
    generator: str
    dt: float
    horizon: int
    radius: float
    operator_kind: str
    weights: np.ndarray = field(repr=False)
    contour_points: int = 0
    mode_grid: dict | None = None

    @property
    def matrix_valued(self) -> bool:
        return self.operator_kind in ("T", "C")

    def metadata(self) -> dict:
        return {
            "generator": self.generator,
            "dt": self.dt,
            "horizon": self.horizon,
            "radius": self.radius,
            "contour_points": self.contour_points,
            "operator_kind": self.operator_kind,
            "mode_grid": self.mode_grid,
            "weights_shape": list(self.weights.shape),
        }


@dataclass
class TimeSignal:
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ParameterError("dt debe ser > 0")
        self.samples = np.asarray(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.samples))


# ---------------------------------------
# Pesos
# ---------------------------------------
def generator_polynomial(generator: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        coeffs = GENERATORS[generator]
    except KeyError:
        raise ParameterError(f"Generador desconocido: {generator} (use {sorted(GENERATORS)})") from None
    return lambda z: sum(c * z**k for k, c in enumerate(coeffs))


def default_radius(contour_points: int) -> float:
    """lambda = eps^(1/(2M))."""
    return float(np.finfo(float).eps ** (1.0 / (2.0 * contour_points)))


def _contour(dt: float, horizon: int, generator: str, radius: float | None):
    if dt <= 0:
        raise ParameterError(f"dt debe ser > 0 (dt={dt})")
    if horizon < 0:
        raise ParameterError(f"El horizonte debe ser >= 0 (N={horizon})")
    delta = generator_polynomial(generator)
    m = max(2 * horizon, 2)
    lam = default_radius(m) if radius is None else float(radius)
    if not 0.0 < lam < 1.0:
        raise ParameterError(f"El radio del contorno debe estar en (0, 1) (lambda={lam})")
    zeta = lam * np.exp(2j * np.pi * np.arange(m) / m)
    return m, lam, delta(zeta) / dt


def _weights_from_samples(values: np.ndarray, m: int, lam: float, horizon: int) -> np.ndarray:
    coeffs = np.fft.fft(values, axis=0)[: horizon + 1] / m
    scale = lam ** -np.arange(horizon + 1, dtype=float)
    return coeffs * scale.reshape((-1,) + (1,) * (coeffs.ndim - 1))


def cq_weights(
    symbol: Callable[[np.ndarray], np.ndarray],
    dt: float,
    horizon: int,
    generator: str = DEFAULT_GENERATOR,
    radius: float | None = None,
    operator_kind: str = "scalar",
) -> CQKernel:
    """W_n = (lambda^-n / M) sum_l K(delta(lambda e^{2 pi i l/M})/dt) e^{-2 pi i n l/M}.

    ``symbol`` recibe un arreglo 1-D de valores de s y devuelve un arreglo
    cuyo primer eje recorre esos valores.
    """
    if operator_kind not in OPERATOR_KINDS:
        raise ParameterError(f"operator_kind desconocido: {operator_kind}")
    m, lam, s_vals = _contour(dt, horizon, generator, radius)
    values = np.asarray(symbol(s_vals), dtype=complex)
    if values.shape[:1] != (m,):
        raise ShapeError("El símbolo debe devolver un valor por punto del contorno")
    weights = _weights_from_samples(values, m, lam, horizon)
    return CQKernel(generator, dt, horizon, lam, operator_kind, weights, contour_points=m)


def capacity_kernel(
    grid: LateralGrid,
    medium: ExteriorMedium,
    dt: float,
    horizon: int,
    generator: str = DEFAULT_GENERATOR,
    operator_kind: str = "T",
    lateral: str = "discrete",
    radius: float | None = None,
) -> CQKernel:
    """Pesos CQ por modo de la malla (forma (N+1, Nx, Ny, 2, 2)).

    ``lateral="discrete"`` evalúa el símbolo en los números de onda
    modificados de la malla escalonada; ``"continuum"`` en xi. En los modos
    de Nyquist el acoplamiento cruzado se anula.
    """
    if operator_kind not in ("T", "C"):
        raise ParameterError("capacity_kernel solo construye núcleos T o C")
    if lateral == "discrete":
        k1, k2 = grid.kappa
    elif lateral == "continuum":
        k1, k2 = grid.xi
    else:
        raise ParameterError(f"Modo lateral desconocido: {lateral}")
    cross = np.where(grid.nyquist_mask, 0.0, k1 * k2)
    m, lam, s_vals = _contour(dt, horizon, generator, radius)
    s_b = s_vals[:, None, None]
    weights = np.empty((horizon + 1, *grid.lateral_shape, 2, 2), dtype=complex)
    for start in range(0, grid.modes_x, _MODE_CHUNK):
        rows = slice(start, start + _MODE_CHUNK)
        vals = capacity_array((k1[rows], k2[rows]), s_b, medium, cross=cross[rows])
        if operator_kind == "C":
            vals = vals * s_b[..., None, None]
        weights[:, rows] = _weights_from_samples(vals, m, lam, horizon)
    logger.info(
        "Núcleo CQ %s lado %d: %s, dt=%.3e, N=%d, modos=%s",
        operator_kind, medium.side, generator, dt, horizon, grid.lateral_shape,
    )
    return CQKernel(
        generator, dt, horizon, lam, operator_kind, weights,
        contour_points=m, mode_grid={**grid.as_dict(), "lateral": lateral, "side": medium.side},
    )


def integrator_weights(generator: str, dt: float, horizon: int) -> np.ndarray:
    """Pesos exactos de 1/s: BDF1 -> dt; BDF2 -> dt (1 - 3^-(n+1))."""
    n = np.arange(horizon + 1, dtype=float)
    if generator == "BDF1":
        return np.full(horizon + 1, dt)
    if generator == "BDF2":
        return dt * (1.0 - 3.0 ** -(n + 1.0))
    raise ParameterError(f"Generador desconocido: {generator}")


# ---------------------------------------
# Convolución
# ---------------------------------------
def _check_step(kernel: CQKernel, n: int, available: int):
    if n > kernel.horizon:
        raise KernelTooShortError(f"Paso {n} supera el horizonte del núcleo ({kernel.horizon})")
    if available < n + 1:
        raise ShapeError(f"El historial tiene {available} muestras; se requieren {n + 1}")


def _contract(weights: np.ndarray, history: np.ndarray, matrix_valued: bool) -> np.ndarray:
    if matrix_valued:
        return np.einsum("t...ab,t...b->...a", weights, history)
    if weights.ndim == 1:
        return np.tensordot(weights, history, axes=(0, 0))
    if history.ndim == 1:
        return np.tensordot(history, weights, axes=(0, 0))
    return np.sum(weights * history, axis=0)


def convolve(kernel: CQKernel, history, n: int) -> np.ndarray:
    """sum_{m=0}^{n} W_{n-m} u^m (causal)."""
    u = history.samples if isinstance(history, TimeSignal) else np.asarray(history)
    _check_step(kernel, n, len(u))
    return _contract(kernel.weights[n::-1], u[: n + 1], kernel.matrix_valued)


def convolve_sequence(kernel: CQKernel, history, method: str = "direct") -> np.ndarray:
    """Salida completa y^0..y^L de la convolución discreta."""
    u = history.samples if isinstance(history, TimeSignal) else np.asarray(history)
    length = len(u)
    if length - 1 > kernel.horizon:
        raise KernelTooShortError(f"Historial de {length} muestras excede el horizonte {kernel.horizon}")
    if method == "direct":
        return np.stack([convolve(kernel, u, n) for n in range(length)])
    if method != "fft":
        raise ValueError(f"Método desconocido: {method}")
    size = 2 * length
    w_hat = np.fft.fft(kernel.weights[:length], n=size, axis=0)
    u_hat = np.fft.fft(u, n=size, axis=0)
    if kernel.matrix_valued:
        y_hat = np.einsum("t...ab,t...b->t...a", w_hat, u_hat)
    else:
        if w_hat.ndim < u_hat.ndim:
            w_hat = w_hat.reshape(w_hat.shape + (1,) * (u_hat.ndim - w_hat.ndim))
        else:
            u_hat = u_hat.reshape(u_hat.shape + (1,) * (w_hat.ndim - u_hat.ndim))
        y_hat = w_hat * u_hat
    return np.fft.ifft(y_hat, axis=0)[:length]


class ConvolutionHistory:
    """Historial denso de trazas para aplicar un núcleo paso a paso."""

    def __init__(self, kernel: CQKernel, trailing_shape: tuple):
        self.kernel = kernel
        self.buffer = np.zeros((kernel.horizon + 1, *trailing_shape), dtype=complex)
        self.length = 0

    def push(self, value: np.ndarray) -> None:
        if self.length > self.kernel.horizon:
            raise KernelTooShortError(f"Historial lleno: horizonte {self.kernel.horizon} agotado")
        self.buffer[self.length] = value
        self.length += 1

    def lagged(self, n: int) -> np.ndarray:
        """sum_{m=0}^{n-1} W_{n-m} u^m (todo salvo el término W_0 u^n)."""
        if n > self.kernel.horizon:
            raise KernelTooShortError(f"Paso {n} supera el horizonte del núcleo ({self.kernel.horizon})")
        if n == 0:
            return np.zeros(self.buffer.shape[1:], dtype=complex)
        return _contract(self.kernel.weights[n:0:-1], self.buffer[:n], self.kernel.matrix_valued)

    def samples(self) -> np.ndarray:
        return self.buffer[: self.length]


# ---------------------------------------
# Laplace
# ---------------------------------------
def _seg_moment(x: np.ndarray) -> np.ndarray:
    # 1 - e^{-x}(1 + x), con serie para |x| pequeño
    small = np.abs(x) < 1e-2
    out = np.empty_like(x)
    xs = x[small]
    out[small] = xs**2 / 2 - xs**3 / 3 + xs**4 / 8 - xs**5 / 30 + xs**6 / 144
    xl = x[~small]
    out[~small] = 1.0 - np.exp(-xl) * (1.0 + xl)
    return out


def laplace_transform(signal: TimeSignal, s: complex) -> complex:
    """Transformada de Laplace exacta del interpolante lineal a trozos (nulo tras el horizonte)."""
    u = np.asarray(signal.samples, dtype=complex)
    if len(u) < 2:
        return 0j
    h = signal.dt
    t = signal.times[:-1]
    slope = np.diff(u) / h
    a = np.exp(-s * t)
    x = np.array([s * h])
    e = np.exp(-s * h)
    if abs(s * h) < 1e-2:
        first = h * (1 - s * h / 2 + (s * h) ** 2 / 6 - (s * h) ** 3 / 24)
    else:
        first = (1.0 - e) / s
    second = _seg_moment(x)[0] / s**2
    return complex(np.sum(a * (u[:-1] * first + slope * second)))


@dataclass
class ParsevalResult:
    lhs: float
    rhs: float
    residual: float
    truncation_error: float


def parseval_residual(u: TimeSignal, v: TimeSignal, s1: float) -> ParsevalResult:
    """|(1/2pi) int u~(s) conj(v~(s)) ds2 - int_0^inf e^{-2 s1 t} u v dt| para señales reales."""
    if s1 <= 0:
        raise ParameterError("s1 debe ser > 0")
    if u.dt != v.dt or len(u.samples) != len(v.samples):
        raise ShapeError("Las señales deben compartir dt y longitud")
    ur = np.real(u.samples)
    vr = np.real(v.samples)
    if not np.any(ur) or not np.any(vr):
        return ParsevalResult(0.0, 0.0, 0.0, 0.0)

    def integrand(s2: float) -> float:
        s = complex(s1, s2)
        return float(np.real(laplace_transform(u, s) * np.conj(laplace_transform(v, s))))

    half, _ = integrate.quad(integrand, 0.0, np.inf, limit=400, epsabs=1e-12, epsrel=1e-10)
    lhs = half / np.pi

    # lado temporal: Gauss-Legendre de 4 puntos por segmento sobre el interpolante
    nodes, wts = np.polynomial.legendre.leggauss(4)
    h = u.dt
    t0 = u.times[:-1]
    tau = 0.5 * h * (nodes + 1.0)
    uu = ur[:-1, None] + np.diff(ur)[:, None] * (tau / h)
    vv = vr[:-1, None] + np.diff(vr)[:, None] * (tau / h)
    rhs = float(np.sum(0.5 * h * wts * np.exp(-2 * s1 * (t0[:, None] + tau)) * uu * vv))

    t_end = u.times[-1]
    trunc = float(np.exp(-2 * s1 * t_end) * abs(ur[-1] * vr[-1]) / (2 * s1))
    return ParsevalResult(lhs, rhs, abs(lhs - rhs), trunc)


def passivity_certificate(kernel: CQKernel, trials: int, seed: int, length: int | None = None) -> float:
    """min_u Re sum_n (I y)^n . conj(u^n) dt / (dt sum |u^n|^2), y = W * u, I = integrador CQ."""
    if kernel.operator_kind != "C":
        raise ParameterError("El certificado de pasividad requiere un núcleo de tipo C")
    rng = np.random.default_rng(seed)
    steps = kernel.horizon + 1 if length is None else min(length, kernel.horizon + 1)
    integ = CQKernel(kernel.generator, kernel.dt, kernel.horizon, kernel.radius, "scalar",
                     integrator_weights(kernel.generator, kernel.dt, kernel.horizon))
    trailing = kernel.weights.shape[1:-2]
    worst = np.inf
    for _ in range(trials):
        u = rng.standard_normal((steps, *trailing, 2)) + 1j * rng.standard_normal((steps, *trailing, 2))
        y = convolve_sequence(kernel, u, method="fft")
        z = convolve_sequence(integ, y, method="fft")
        work = np.real(np.sum(z * np.conj(u))) * kernel.dt
        norm = np.sum(np.abs(u) ** 2) * kernel.dt
        worst = min(worst, work / norm)
    logger.debug("Certificado de pasividad (%s): %.3e", kernel.generator, worst)
    return float(worst) if trials > 0 else 0.0

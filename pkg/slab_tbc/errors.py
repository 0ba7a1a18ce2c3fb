# slab_tbc/errors.py
"""Jerarquía de errores del solver y de la suite de verificación."""
from __future__ import annotations


class SlabTbcError(Exception):
    """Raíz de todos los errores propios del paquete."""


class ShapeError(SlabTbcError, ValueError):
    pass


class InvalidFrequencyError(SlabTbcError, ValueError):
    pass


class DegenerateConstantError(SlabTbcError, ArithmeticError):
    pass


class ParameterError(SlabTbcError, ValueError):
    pass


class KernelTooShortError(SlabTbcError, IndexError):
    pass


class DomainError(SlabTbcError, ValueError):
    pass


class UndefinedRatioError(SlabTbcError, ZeroDivisionError):
    pass


class IllConditionedError(SlabTbcError, RuntimeError):
    pass


class _FieldError(SlabTbcError, ValueError):
    """Error que nombra el campo y la restricción violada (diagnóstico legible por máquina)."""

    def __init__(self, field: str, constraint: str, detail: str = ""):
        self.field = field
        self.constraint = constraint
        self.detail = detail
        msg = f"{field}: viola '{constraint}'"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)

    def as_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "field": self.field,
            "constraint": self.constraint,
            "detail": self.detail,
        }


class ConfigurationError(_FieldError):
    pass


class DataError(_FieldError):
    pass


class NonFiniteError(SlabTbcError, FloatingPointError):
    def __init__(self, step: int, what: str):
        self.step = step
        super().__init__(f"Valores no finitos en {what} en el paso {step}")


class StepError(SlabTbcError, RuntimeError):
    def __init__(self, step: int, cause: Exception):
        self.step = step
        self.cause = cause
        super().__init__(f"Fallo en el paso {step}: {type(cause).__name__}: {cause}")


class ScenarioError(SlabTbcError, RuntimeError):
    def __init__(self, scenario: str, cause: Exception):
        self.scenario = scenario
        self.cause = cause
        super().__init__(f"Escenario {scenario}: {type(cause).__name__}: {cause}")

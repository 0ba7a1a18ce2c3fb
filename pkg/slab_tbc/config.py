# slab_tbc/config.py
import os

from .services.spectral import AS_PRINTED_WEIGHT, STANDARD_WEIGHT

PRESETS = (STANDARD_WEIGHT, AS_PRINTED_WEIGHT)


def _flag(name: str, default: str = "1") -> bool:
    return os.getenv(name, default).strip().lower() not in ("0", "false", "no", "off", "")


class Config:
    """Ajustes del servicio. La física nunca se lee del entorno: viene del JSON de corrida."""

    SQLALCHEMY_TRACK_MODIFICATIONS = False

    def __init__(self):
        # SECRET_KEY - obligatoria en producción, con fallback en desarrollo
        self.SECRET_KEY = os.environ.get("SECRET_KEY")
        if not self.SECRET_KEY:
            if os.environ.get("FLASK_ENV") == "production":
                raise ValueError("SECRET_KEY no configurada en producción")
            self.SECRET_KEY = "dev_secret_key_CAMBIAR_EN_PRODUCCION"

        # Database
        self.SQLALCHEMY_DATABASE_URI = os.getenv("DATABASE_URL", "sqlite:///slab_tbc.db")

        # Corridas
        self.SLABTBC_OUT_DIR = os.getenv("SLABTBC_OUT_DIR", "out")
        self.SLABTBC_LOG_LEVEL = os.getenv("SLABTBC_LOG_LEVEL", "INFO").upper()
        self.SLABTBC_RECORD_RUNS = _flag("SLABTBC_RECORD_RUNS")

        self.SLABTBC_PRESET = os.getenv("SLABTBC_PRESET", STANDARD_WEIGHT)
        if self.SLABTBC_PRESET not in PRESETS:
            raise ValueError(f"SLABTBC_PRESET inválido: {self.SLABTBC_PRESET!r} (use {', '.join(PRESETS)})")

        raw_threads = os.getenv("SLABTBC_THREADS", "1")
        try:
            self.SLABTBC_THREADS = int(raw_threads)
        except ValueError:
            raise ValueError(f"SLABTBC_THREADS no es entero: {raw_threads!r}") from None
        if self.SLABTBC_THREADS < 1:
            raise ValueError(f"SLABTBC_THREADS debe ser >= 1 (recibido {self.SLABTBC_THREADS})")

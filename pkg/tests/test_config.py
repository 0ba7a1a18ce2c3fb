# tests/test_config.py
import pytest

from slab_tbc.config import Config
from slab_tbc.services.spectral import AS_PRINTED_WEIGHT, STANDARD_WEIGHT


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("SECRET_KEY", "FLASK_ENV", "DATABASE_URL", "SLABTBC_OUT_DIR", "SLABTBC_LOG_LEVEL",
                 "SLABTBC_RECORD_RUNS", "SLABTBC_PRESET", "SLABTBC_THREADS"):
        monkeypatch.delenv(name, raising=False)


class TestConfig:
    def test_defaults(self):
        cfg = Config()
        assert cfg.SQLALCHEMY_DATABASE_URI == "sqlite:///slab_tbc.db"
        assert cfg.SLABTBC_OUT_DIR == "out"
        assert cfg.SLABTBC_PRESET == STANDARD_WEIGHT
        assert cfg.SLABTBC_THREADS == 1 and cfg.SLABTBC_RECORD_RUNS is True

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("SLABTBC_PRESET", AS_PRINTED_WEIGHT)
        monkeypatch.setenv("SLABTBC_THREADS", "4")
        monkeypatch.setenv("SLABTBC_RECORD_RUNS", "off")
        monkeypatch.setenv("SLABTBC_LOG_LEVEL", "debug")
        cfg = Config()
        assert cfg.SLABTBC_PRESET == AS_PRINTED_WEIGHT
        assert cfg.SLABTBC_THREADS == 4
        assert cfg.SLABTBC_RECORD_RUNS is False
        assert cfg.SLABTBC_LOG_LEVEL == "DEBUG"

    @pytest.mark.parametrize("name, value", [
        ("SLABTBC_PRESET", "loose"), ("SLABTBC_THREADS", "many"), ("SLABTBC_THREADS", "0"),
    ])
    def test_invalid_values(self, monkeypatch, name, value):
        monkeypatch.setenv(name, value)
        with pytest.raises(ValueError):
            Config()

    def test_secret_key_required_in_production(self, monkeypatch):
        monkeypatch.setenv("FLASK_ENV", "production")
        with pytest.raises(ValueError):
            Config()
        monkeypatch.setenv("SECRET_KEY", "s3cret")
        assert Config().SECRET_KEY == "s3cret"

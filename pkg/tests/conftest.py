# tests/conftest.py
import pytest

from slab_tbc import create_app
from slab_tbc.extensions import db
from slab_tbc.services import sources
from slab_tbc.services.spectral import LateralGrid
from slab_tbc.services.stepper import SlabMedium


@pytest.fixture
def grid():
    return LateralGrid(1.0, 1.0, 8, 8, 1.0, 0.0, 16)


@pytest.fixture
def small_grid():
    return LateralGrid(1.0, 1.0, 4, 4, 1.0, 0.0, 16)


@pytest.fixture
def medium(grid):
    return SlabMedium.uniform(grid)


@pytest.fixture
def pulse(medium):
    """Pulso plano ascendente, uniforme en (x, y), centrado en la losa."""
    return sources.plane_pulse(medium, (0.5, 0.5, 0.5), (0.3, 0.3, 0.2))


@pytest.fixture
def app(tmp_path):
    app = create_app({
        "TESTING": True,
        "SQLALCHEMY_DATABASE_URI": "sqlite:///:memory:",
        "SLABTBC_OUT_DIR": str(tmp_path / "out"),
    })
    with app.app_context():
        db.create_all()
        yield app
        db.session.remove()
        db.drop_all()


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def client(app):
    return app.test_client()

# slab_tbc/__init__.py
import logging
from pathlib import Path

from flask import Flask

# CARGAR .env ANTES DE IMPORTAR Config
from dotenv import load_dotenv

# Buscar .env en la raíz del proyecto (un nivel arriba de este archivo)
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(env_path)

from .config import Config  # noqa: E402
from .extensions import db, migrate  # noqa: E402
from .commands import register_cli  # noqa: E402


def create_app(overrides: dict | None = None):
    app = Flask(__name__)
    app.config.from_object(Config())
    if overrides:
        app.config.update(overrides)

    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(app.config["SLABTBC_LOG_LEVEL"])

    # Extensiones
    db.init_app(app)
    migrate.init_app(app, db)

    # Blueprints
    from .routes.runs import runs_bp
    app.register_blueprint(runs_bp)

    # CLI
    register_cli(app)

    return app

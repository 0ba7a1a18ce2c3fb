# slab_tbc/services/__init__.py
"""Núcleo numérico: no depende de Flask."""

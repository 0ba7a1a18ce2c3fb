from slab_tbc import create_app
app = create_app()

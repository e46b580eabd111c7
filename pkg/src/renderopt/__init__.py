"""renderopt: resource games, grid pre-rendering, and preference diffusion for
adaptive scene rendering, with a desk-scale benchmark harness."""

__version__ = "0.1.0"

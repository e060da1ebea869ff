"""Interactive rain on reconstructed scenes: shallow-water simulation plus
an image-space compositing renderer (water pass, reflection, rain streaks
and splashes)."""

__version__ = "0.1.0"

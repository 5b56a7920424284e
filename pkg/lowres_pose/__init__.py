"""Low-resolution heatmap pose estimation toolkit."""

__version__ = "0.1.0"

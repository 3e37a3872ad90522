"""Region-based multiscale spatiotemporal video saliency."""
__version__ = "0.1.0"

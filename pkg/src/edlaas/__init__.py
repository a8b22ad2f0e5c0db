from .errors import EdlaasError

__version__ = "0.1.0"
__all__ = ["EdlaasError", "__version__"]

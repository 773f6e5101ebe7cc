"""Graph neural ODE for multimodal emotion recognition in conversation."""
from ._accel import backend
from .errors import DgodeError

__version__ = "0.1.0"
__all__ = ["backend", "DgodeError", "__version__"]

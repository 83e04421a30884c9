"""HTTP sidecar hosting pretrained audio/text encoders and a caption decoder."""

from .app import app_from_env, create_app
from .backends import Backend, DspBackend, MsClapBackend, make_backend

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "DspBackend",
    "MsClapBackend",
    "app_from_env",
    "create_app",
    "make_backend",
]

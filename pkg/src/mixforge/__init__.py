"""Build and validate realistic two-speaker mixture corpora with recorded ground truths."""
from .audio import AudioClip, read_wav, resample, write_wav
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["AudioClip", "BACKEND", "read_wav", "resample", "write_wav", "__version__"]

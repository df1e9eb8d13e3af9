"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``MIXFORGE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("MIXFORGE_PURE_PYTHON", "") != "1":
    try:
        from . import _ext as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

convolve_direct = _impl.convolve_direct
polyphase_resample = _impl.polyphase_resample
diag_gauss_logpdf = _impl.diag_gauss_logpdf
TAPS = _fallback.TAPS

__all__ = ["BACKEND", "TAPS", "convolve_direct", "polyphase_resample", "diag_gauss_logpdf"]

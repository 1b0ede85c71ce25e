"""Hot loops, compiled when the extension is built, numpy otherwise.

Set ``FOURTHMOMENT_PURE=1`` to force the numpy fallback.
"""
import os

from . import _fallback

BACKEND = "numpy"
if os.environ.get("FOURTHMOMENT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

eval_terms = _impl.eval_terms
banded_quadform = _impl.banded_quadform
hermite_e = _impl.hermite_e

__all__ = ["BACKEND", "eval_terms", "banded_quadform", "hermite_e", "_fallback"]

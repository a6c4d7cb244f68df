"""Backend selection for the hot path-exponent kernels.

The compiled extension is preferred; set ``PATHPDF_PURE=1`` to force the
numpy fallback (used by the benchmark and by the backend-agreement tests).
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("PATHPDF_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernel as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

path_exponents = _impl.path_exponents
bridge_log_weights = _impl.bridge_log_weights

__all__ = ["BACKEND", "path_exponents", "bridge_log_weights"]

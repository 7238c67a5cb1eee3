"""Kernel backend selection.

The compiled extension is used when it imported cleanly; setting
``NOSEAUG_BACKEND=python`` forces the pure-NumPy fallback, and
``NOSEAUG_BACKEND=compiled`` makes a missing extension a hard error instead
of a silent downgrade.
"""

import os

from . import _fallback

_choice = os.environ.get("NOSEAUG_BACKEND", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise ImportError(
        f"NOSEAUG_BACKEND={_choice!r} is not one of auto/compiled/python"
    )

if _choice == "python":
    _impl = _fallback
    COMPILED = False
else:
    try:
        from . import _kernels as _impl

        COMPILED = True
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _fallback
        COMPILED = False

BACKEND = "compiled" if COMPILED else "python"

knn_ratio_alphas = _impl.knn_ratio_alphas
svm_dual_cd = _impl.svm_dual_cd

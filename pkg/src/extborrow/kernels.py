"""Backend selection for the Cox partial-likelihood kernel.

The compiled extension is preferred. Set ``EXTBORROW_PURE_PYTHON=1`` to
force the numpy fallback.
"""

import os

from . import _efron_py

if os.environ.get("EXTBORROW_PURE_PYTHON", "") not in ("", "0"):
    efron_terms = _efron_py.efron_terms
    BACKEND = "python"
else:
    try:
        from ._efron import efron_terms
        BACKEND = "cython"
    except ImportError:
        efron_terms = _efron_py.efron_terms
        BACKEND = "python"

__all__ = ["efron_terms", "BACKEND"]

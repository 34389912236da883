"""Hot-kernel dispatch: compiled Hopfield recall with a numpy fallback.

The asynchronous recall sweep is the one inner loop that cannot be expressed
as BLAS (each unit update depends on the previous one), so it gets a Cython
implementation.  Set AHA_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import hopfield_py

if os.environ.get("AHA_PURE_PYTHON"):
    _impl = hopfield_py
    USING_COMPILED = False
else:
    try:
        from . import hopfield_cy as _impl  # type: ignore[attr-defined]

        USING_COMPILED = True
    except ImportError:
        _impl = hopfield_py
        USING_COMPILED = False

hopfield_recall = _impl.hopfield_recall

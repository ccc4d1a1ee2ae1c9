"""Select the numeric kernel implementation.

The compiled extension is preferred when importable; set
``REACHPLAN_BACKEND=pure`` to force the NumPy fallback or
``REACHPLAN_BACKEND=native`` to fail loudly when the extension is missing.
"""

import os

from . import _pure

_requested = os.environ.get("REACHPLAN_BACKEND", "auto").strip().lower()

if _requested in ("auto", "native", ""):
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        _impl = _pure
        BACKEND = "pure"
elif _requested == "pure":
    _impl = _pure
    BACKEND = "pure"
else:
    raise ValueError(
        f"REACHPLAN_BACKEND must be 'auto', 'native' or 'pure', got {_requested!r}"
    )

chain_transforms = _impl.chain_transforms
frame_state = _impl.frame_state
project_goal = _impl.project_goal
dtw_accumulate = _impl.dtw_accumulate

"""Hot inner-loop kernels with a compiled core and a numpy fallback.

The compiled extension (``_native``, built from Cython) is preferred at
import time; the numpy reference implementation is selected when the
extension is unavailable or when ``RADARSLAM_PURE_PYTHON=1`` is set.
Both implementations are kept behaviorally identical (same rounding,
same traversal order) and are cross-checked by the test suite.
"""

import os

from . import reference

if os.environ.get("RADARSLAM_PURE_PYTHON") == "1":
    _impl = reference
    IMPLEMENTATION = "python"
else:
    try:
        from . import _native as _impl
        IMPLEMENTATION = "native"
    except ImportError:
        _impl = reference
        IMPLEMENTATION = "python"

score_offsets = _impl.score_offsets
raytrace_update = _impl.raytrace_update

__all__ = ["score_offsets", "raytrace_update", "IMPLEMENTATION", "reference"]

"""Pick the kernel core at import time.

The compiled extension is used when it imports; ``NOISYBQ_BACKEND=python``
forces the NumPy fallback.
"""

import os

from noisybq import _kernels_py

if os.environ.get("NOISYBQ_BACKEND", "").lower() == "python":
    core = _kernels_py
else:
    try:
        from noisybq import _kernels_ext as core
    except ImportError:
        core = _kernels_py

BACKEND = core.BACKEND
bessel_kv = core.bessel_kv
matern_corr = core.matern_corr
matern_cross = core.matern_cross
matern_expansion = core.matern_expansion

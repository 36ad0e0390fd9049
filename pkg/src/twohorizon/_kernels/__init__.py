"""Numerical kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``fast``, built from Cython) is used for the loops
where it measures faster: the logistic gradient-descent fit and the Adam
policy search, both dominated by per-iteration dispatch overhead at the
fold sizes the Monte Carlo studies use. The MLP loop stays on numpy, whose
BLAS-backed matrix products win at typical widths (see
``benchmarks/bench_kernels.py``). Set ``TWOHORIZON_PURE_PYTHON=1`` to force
the fallback for everything.
"""

import os

from . import ref

if os.environ.get("TWOHORIZON_PURE_PYTHON"):
    _fast = None
else:
    try:
        from . import fast as _fast  # type: ignore[attr-defined]
    except ImportError:
        _fast = None

BACKEND = "python" if _fast is None else "compiled"

sigmoid = ref.sigmoid  # vectorized array API; the hot loops inline their own
logistic_gd = ref.logistic_gd if _fast is None else _fast.logistic_gd
adam_max = ref.adam_max if _fast is None else _fast.adam_max
mlp_gd = ref.mlp_gd

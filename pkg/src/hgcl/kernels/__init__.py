"""Kernel backend selection.

The heavy array kernels exist twice: a compiled Cython extension
(``_core``) and a pure-numpy fallback (``_numpy``). Whichever is available
is bound at import time; set ``HGCL_KERNELS=numpy`` or
``HGCL_KERNELS=compiled`` to force one (forcing ``compiled`` raises if the
extension was never built). Both backends expose the same functions and
agree to float64 roundoff; see benchmarks/bench_kernels.py for the
speed comparison.
"""

import os

from . import _numpy

try:
    from . import _core
except ImportError:
    _core = None

_forced = os.environ.get("HGCL_KERNELS", "").strip().lower()
if _forced == "numpy":
    _impl = _numpy
elif _forced == "compiled":
    if _core is None:
        raise ImportError(
            "HGCL_KERNELS=compiled but hgcl.kernels._core is not built; "
            "run `python setup.py build_ext --inplace`"
        )
    _impl = _core
elif _forced:
    raise ImportError(f"unknown HGCL_KERNELS value: {_forced!r} (use 'numpy' or 'compiled')")
else:
    _impl = _core if _core is not None else _numpy


def backend_name():
    return _impl.BACKEND_NAME


def available_backends():
    out = {"numpy": _numpy}
    if _core is not None:
        out["compiled"] = _core
    return out


MIN_NORM = _numpy.MIN_NORM
ARTANH_CLIP = _numpy.ARTANH_CLIP

mobius_add = _impl.mobius_add
poincare_dist_rows = _impl.poincare_dist_rows
poincare_pairwise_dist = _impl.poincare_pairwise_dist
poincare_exp0_rows = _impl.poincare_exp0_rows
poincare_log0_rows = _impl.poincare_log0_rows
lorentz_inner_rows = _impl.lorentz_inner_rows
lorentz_dist_rows = _impl.lorentz_dist_rows
lorentz_pairwise_dist = _impl.lorentz_pairwise_dist
lorentz_exp0_rows = _impl.lorentz_exp0_rows
lorentz_log0_rows = _impl.lorentz_log0_rows
bfs_all_pairs = _impl.bfs_all_pairs
four_point_delta_exact = _impl.four_point_delta_exact
four_point_delta_quads = _impl.four_point_delta_quads

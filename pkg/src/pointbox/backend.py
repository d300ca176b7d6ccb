"""Kernel backend selection.

The hot geometry kernels (polygon clipping, membership tests, NMS,
Monte-Carlo volumes) exist twice: a numba-compiled version and a pure
numpy version with identical signatures and semantics.

Selection is controlled by the ``POINTBOX_BACKEND`` environment variable,
read once at import time:

  * ``auto`` (default) - numba if importable, else numpy
  * ``numba``          - force numba, raise if unavailable
  * ``numpy``          - force the pure numpy path

``load_backend(name)`` returns a specific implementation module regardless
of the selected default; the benchmark suite uses it to time both paths.
"""

import os

ENV_VAR = "POINTBOX_BACKEND"


def load_backend(name):
    """Return the kernel module for ``name`` ('numba' or 'numpy')."""
    if name == "numba":
        from . import _impl_numba
        return _impl_numba
    if name == "numpy":
        from . import _impl_numpy
        return _impl_numpy
    raise ValueError(f"unknown backend {name!r} (expected 'numba' or 'numpy')")


def _select():
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{ENV_VAR}={choice!r}: expected 'auto', 'numba' or 'numpy'")
    if choice in ("auto", "numba"):
        try:
            return load_backend("numba"), "numba"
        except ImportError:
            if choice == "numba":
                raise
    return load_backend("numpy"), "numpy"


kernels, BACKEND = _select()

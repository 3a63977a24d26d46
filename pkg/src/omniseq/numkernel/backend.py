"""Kernel backend selection.

``OMNISEQ_BACKEND`` picks the active implementation of the hot kernels:
``numba`` (default when importable), ``numpy`` (pure fallback), or ``auto``.
The choice is made once at import time; both modules stay importable for
benchmarks and cross-checks.
"""

import os

from ..errors import ConfigError

BACKEND_ENV_VAR = "OMNISEQ_BACKEND"


def _resolve() -> str:
    choice = os.environ.get(BACKEND_ENV_VAR, "auto").strip().lower()
    if choice in ("", "auto"):
        try:
            import numba  # noqa: F401
            return "numba"
        except ImportError:
            return "numpy"
    if choice not in ("numpy", "numba"):
        raise ConfigError(
            f"{BACKEND_ENV_VAR} must be 'numpy', 'numba' or 'auto', got {choice!r}"
        )
    return choice


ACTIVE_BACKEND = _resolve()

if ACTIVE_BACKEND == "numba":
    from . import kernels_numba as kernels
else:
    from . import kernels_numpy as kernels


def warmup() -> None:
    """Trigger JIT compilation of every kernel on tiny inputs.

    No-op math on the numpy backend; on numba it front-loads the one-time
    compile cost so timed sections measure steady-state throughput.
    """
    import numpy as np

    x = np.array([[0.1, -0.2], [0.3, 0.4]])
    g = np.ones(2)
    b = np.zeros(2)
    y = kernels.softmax2d(x)
    kernels.softmax2d_bwd(y, x)
    out, xhat, rstd = kernels.layernorm_fwd(x, g, b, 1e-8)
    kernels.layernorm_bwd(out, xhat, rstd, g)
    table = np.zeros((3, 2))
    kernels.scatter_add_rows(table, np.array([0, 2]), x)
    kernels.gather_rows(table, np.array([1, 0]))
    kernels.relu(x)
    kernels.relu_bwd(x, x)
    kernels.adam_step_flat(x.ravel().copy(), x.ravel(), np.zeros(4), np.zeros(4),
                           1, 0.001, 0.9, 0.999, 1e-8)
    kernels.sampled_ce_fwd(np.array([0.5, 0.1]), x)

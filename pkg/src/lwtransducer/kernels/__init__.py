"""Hot dynamic-programming kernels with a numba path and a numpy path.

The active implementation is chosen once at import from ``LWT_NUMBA``; both
modules stay importable so tests and benchmarks can compare them directly.
"""
from .._accel import USE_NUMBA, backend_name
from . import vectorized

if USE_NUMBA:
    from . import loops as _impl
else:
    _impl = vectorized

ctc_alpha = _impl.ctc_alpha
ctc_beta = _impl.ctc_beta
ctc_loss_grad = _impl.ctc_loss_grad
ctc_loss_grad_batch = _impl.ctc_loss_grad_batch
best_path = _impl.best_path
best_path_batch = _impl.best_path_batch
rnnt_alpha = _impl.rnnt_alpha
rnnt_beta = _impl.rnnt_beta

__all__ = [
    "backend_name",
    "ctc_alpha",
    "ctc_beta",
    "ctc_loss_grad",
    "ctc_loss_grad_batch",
    "best_path",
    "best_path_batch",
    "rnnt_alpha",
    "rnnt_beta",
]

"""Backend selection for the integration kernels.

The compiled extension is used whenever it imported successfully; set
``LGQ_BACKEND=python`` to force the pure-numpy fallback (or ``cython`` to
fail loudly when the extension is missing).  Everything downstream calls
the wrappers here, which normalize dtypes/contiguity and add or strip the
trajectory batch axis for the recursion kernels.
"""

import os

import numpy as np

from . import _kernels_py

_requested = os.environ.get("LGQ_BACKEND", "").strip().lower()
if _requested not in ("", "cython", "python"):
    raise ValueError(f"LGQ_BACKEND must be 'cython' or 'python', got {_requested!r}")

if _requested == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _kernels_py
        BACKEND = "python"

CONVERGED = _kernels_py.CONVERGED
MAX_STEPS = _kernels_py.MAX_STEPS
NON_FINITE = _kernels_py.NON_FINITE

__all__ = [
    "BACKEND",
    "CONVERGED",
    "MAX_STEPS",
    "NON_FINITE",
    "rk4_cov_grid",
    "rk4_cov_converge",
    "rk4_cov_grid_tpath",
    "affine_forward",
    "affine_backward",
]


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def rk4_cov_grid(A, D, C, Gt, V0, dt, n_steps, impl=None):
    impl = impl or _impl
    return impl.rk4_cov_grid(_c(A), _c(D), _c(C), _c(Gt), _c(V0), float(dt), int(n_steps))


def rk4_cov_converge(A, D, C, Gt, V0, dt, max_steps, tol, consec, impl=None):
    impl = impl or _impl
    return impl.rk4_cov_converge(
        _c(A), _c(D), _c(C), _c(Gt), _c(V0), float(dt), int(max_steps), float(tol), int(consec)
    )


def rk4_cov_grid_tpath(A_half, D_half, C_half, Gt_half, V0, dt, n_steps, backward, impl=None):
    impl = impl or _impl
    n_steps = int(n_steps)
    for name, arr in (("A_half", A_half), ("D_half", D_half), ("C_half", C_half), ("Gt_half", Gt_half)):
        if arr.shape[0] != 2 * n_steps + 1:
            raise ValueError(f"{name} must have 2*n_steps+1 = {2 * n_steps + 1} samples, got {arr.shape[0]}")
    return impl.rk4_cov_grid_tpath(
        _c(A_half), _c(D_half), _c(C_half), _c(Gt_half), _c(V0), float(dt), n_steps, bool(backward)
    )


def _run_affine(fn, P, Q, u, x_end):
    u = np.asarray(u, dtype=np.float64)
    x_end = np.asarray(x_end, dtype=np.float64)
    squeeze = u.ndim == 2
    if squeeze:
        u = u[:, None, :]
        x_end = x_end[None, :]
    out = fn(_c(P), _c(Q), _c(u), _c(x_end))
    return out[:, 0, :] if squeeze else out


def affine_forward(P, Q, u, x0, impl=None):
    impl = impl or _impl
    return _run_affine(impl.affine_forward, P, Q, u, x0)


def affine_backward(P, Q, u, zT, impl=None):
    impl = impl or _impl
    return _run_affine(impl.affine_backward, P, Q, u, zT)

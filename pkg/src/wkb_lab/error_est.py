"""Local numerical-error estimators for the stencil log-density derivatives,
and their propagation to a bound on the first-order correction.

Two local schemes:

* ``model``: the stencil truncation error of a central difference scales as
  (third or fourth derivative) * dx^2, and the trained score stands in for
  the unavailable log-density derivatives; the inner-solver error floor
  enters as logq_err / dx (gradient) and logq_err / dx^2 (Laplacian).
* ``subtraction``: rerun the inner solves with tolerances stretched by 1.1
  and take the absolute stencil difference.

The propagated bound integrates the conservative system

    d err1/dt = | J_pf err1 | + (g^2/2) grad_local
    d err2/dt = | (g^2/2) err1 . grad(div s) | + (g^2/2) lap_local

with J_pf the flow-drift Jacobian; the right-hand side is a sum of absolute
values, so both components are nondecreasing, and the final bound is
err1_T . |grad log pi(x_T)| + |err2_T|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import Schedule
from .score import score_div_derivatives

# Constant multiplying the inner-solver error estimate in the floor terms.
_ERR_CONST = 1.0


@dataclass
class LocalErr:
    grad_err: np.ndarray  # componentwise bound on the gradient stencil error
    lap_err: float        # bound on the Laplacian stencil error

    def __post_init__(self):
        self.grad_err = np.asarray(self.grad_err, dtype=float)
        if np.any(self.grad_err < 0.0) or self.lap_err < 0.0 or \
                not (np.all(np.isfinite(self.grad_err)) and np.isfinite(self.lap_err)):
            raise ValueError("local error bounds must be finite and nonnegative")


def local_err_model_from_derivs(grad_div_s: np.ndarray, lap_div_s: float,
                                dx: float, logq_err: float) -> LocalErr:
    floor = _ERR_CONST * abs(logq_err)
    grad = np.abs(grad_div_s) * dx ** 2 + floor / dx
    lap = abs(lap_div_s) * dx ** 2 + floor / dx ** 2
    return LocalErr(grad_err=grad, lap_err=float(lap))


def local_err_model(score, x: np.ndarray, t: float, stencil,
                    logq_err: float) -> LocalErr:
    """Model-based local errors from spatial derivatives of the score."""
    _, grad_div_s, lap_div_s = score_div_derivatives(score, np.asarray(x, dtype=float),
                                                     t, stencil.dx)
    return local_err_model_from_derivs(grad_div_s, lap_div_s, stencil.dx, logq_err)


def local_err_subtraction_from_values(vals_tight: np.ndarray, vals_loose: np.ndarray,
                                      dx: float) -> LocalErr:
    """Stencil-difference errors from paired (tight, loose) solve values
    laid out as [center, +e1, -e1, +e2, -e2, ...]."""
    vt = np.asarray(vals_tight, dtype=float)
    vl = np.asarray(vals_loose, dtype=float)
    d = (vt.size - 1) // 2
    grad_t = (vt[1::2] - vt[2::2]) / (2.0 * dx)
    grad_l = (vl[1::2] - vl[2::2]) / (2.0 * dx)
    lap_t = (vt[1:].sum() - 2 * d * vt[0]) / dx ** 2
    lap_l = (vl[1:].sum() - 2 * d * vl[0]) / dx ** 2
    return LocalErr(grad_err=np.abs(grad_l - grad_t), lap_err=float(abs(lap_l - lap_t)))


def local_err_subtraction(score, schedule: Schedule, x: np.ndarray, t: float,
                          stencil, tol: float = 1e-5) -> LocalErr:
    """Subtraction-based local errors: inner solves at tol and 1.1 * tol."""
    from .likelihood import logq_pf_batch, _axis_offsets

    x = np.asarray(x, dtype=float)
    pts = np.vstack([x[None, :], x[None, :] + _axis_offsets(x.size, stencil.dx)])
    tight = logq_pf_batch(score, schedule, pts, t, tol, stencil)
    loose = logq_pf_batch(score, schedule, pts, t, 1.1 * tol, stencil)
    return local_err_subtraction_from_values(tight, loose, stencil.dx)


def propagate_error(score, schedule: Schedule, x0: np.ndarray, stencil=None,
                    tol_outer: float = 1e-3, tol_inner: float = 1e-5,
                    scheme: str = "model") -> float:
    """Final propagated error bound for one data point."""
    from .likelihood import nll_first_order

    report = nll_first_order(score, schedule, np.asarray(x0, dtype=float), stencil,
                             tol_outer=tol_outer, tol_inner=tol_inner,
                             err_scheme=scheme)
    return report.err_bound

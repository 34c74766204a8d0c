"""Block-wise adaptive integration with knot output on long time horizons.

The horizon is cut into an initial linear block ``[0, t_lin]`` followed by
decades ``[10^k t_lin, 10^(k+1) t_lin]``.  Each block is integrated with the
8th-order Dormand-Prince pair and sampled at ``knots_per_block`` points.  An
optional projection hook is applied at every block boundary so that
integrals of motion do not drift over many decades.
"""

import logging

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError

log = logging.getLogger(__name__)

# DOP853 refuses tolerances below 100 * machine epsilon
_RTOL_FLOOR = 100 * np.finfo(float).eps


def block_edges(t_end, t_lin=1.0):
    """Edges of the integration blocks covering ``[0, t_end]``."""
    if t_end <= t_lin:
        return np.array([0.0, t_end])
    edges = [0.0, t_lin]
    while edges[-1] < t_end:
        edges.append(min(edges[-1] * 10.0, t_end))
    return np.array(edges)


def integrate_blocks(rhs, y0, t_end, rtol, atol, knots_per_block=256,
                     t_lin=1.0, project=None, max_correction=None):
    """Integrate ``y' = rhs(t, y)`` from 0 to ``t_end`` block by block.

    Parameters
    ----------
    rhs : callable
        Right-hand side ``rhs(t, y) -> dy``.
    y0 : array_like
        Initial state.
    t_end : float
        Final time.
    rtol, atol : float
        Tolerances handed to the stepper.
    knots_per_block : int
        Output samples per block (linear in the first block, geometric after).
    project : callable, optional
        ``project(t, y) -> y_corrected`` applied at each block end.
    max_correction : float, optional
        Corrections larger than this are logged at warning level.

    Returns
    -------
    t : ndarray, shape (m,)
    y : ndarray, shape (m, len(y0))
    corrections : list of (t, size)
    """
    y = np.asarray(y0, dtype=float)
    rtol = max(rtol, _RTOL_FLOOR)
    edges = block_edges(t_end, t_lin)
    ts = [np.array([0.0])]
    ys = [y[None, :]]
    corrections = []
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if k == 0:
            t_eval = np.linspace(a, b, knots_per_block + 1)
        else:
            t_eval = np.geomspace(a, b, knots_per_block + 1)
        t_eval[0], t_eval[-1] = a, b
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", t_eval=t_eval,
                        rtol=rtol, atol=atol)
        if sol.status != 0:
            raise ConvergenceError(
                f"integrator failed on block [{a:g}, {b:g}]: {sol.message}")
        yb = sol.y.T.copy()
        if project is not None:
            fixed = project(b, yb[-1])
            size = float(np.max(np.abs(fixed - yb[-1])))
            corrections.append((b, size))
            if max_correction is not None and size > max_correction:
                log.warning("first-integral correction %.3e at t=%g exceeds %.3e",
                            size, b, max_correction)
            else:
                log.debug("first-integral correction %.3e at t=%g", size, b)
            yb[-1] = fixed
        ts.append(sol.t[1:])
        ys.append(yb[1:])
        y = yb[-1]
    return np.concatenate(ts), np.concatenate(ys), corrections

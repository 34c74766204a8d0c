"""Universal dispersion rate.

The function ``tau`` solves ``tau'' = 2 lam / tau`` with ``tau(0) = 1`` and
``tau'(0) = 0``.  It grows like ``2 t sqrt(lam ln t)`` and fixes the spatial
scale on which every solution of the defocusing logarithmic NLS spreads.
Multiplying the ODE by ``tau'`` and integrating gives the exact relation
``tau'^2 = 4 lam ln tau``, which is used both as an accuracy check and as a
drift corrector on long horizons.
"""

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._odeint import integrate_blocks
from .errors import DomainError, InvalidParameterError

__all__ = ["TauTrajectory", "solve_tau", "tau_asymptotic", "ell", "s_of_t"]


@dataclass(frozen=True)
class TauTrajectory:
    """Dense record of ``(t, tau, tau_dot)`` knots.

    Between knots ``tau`` is a cubic Hermite interpolant built from
    ``tau_dot``; ``tau_dot`` is interpolated the same way using
    ``tau_ddot = 2 lam / tau`` from the ODE.
    """

    lam: float
    t: np.ndarray
    tau: np.ndarray
    tau_dot: np.ndarray
    interpolation_order: int = 3
    corrections: list = field(default_factory=list, compare=False, repr=False)

    @property
    def t_end(self):
        return float(self.t[-1])

    @cached_property
    def _tau_spline(self):
        return CubicHermiteSpline(self.t, self.tau, self.tau_dot)

    @cached_property
    def _tau_dot_spline(self):
        return CubicHermiteSpline(self.t, self.tau_dot, 2.0 * self.lam / self.tau)

    def _check_range(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_end * (1 + 1e-14)):
            raise DomainError(f"t outside trajectory range [0, {self.t_end:g}]")
        return np.clip(t, 0.0, self.t_end)

    def __call__(self, t):
        """Return ``(tau(t), tau_dot(t))``; scalar in, scalars out."""
        tt = self._check_range(t)
        tau = self._tau_spline(tt)
        tau_dot = self._tau_dot_spline(tt)
        if np.ndim(tau) == 0:
            return float(tau), float(tau_dot)
        return tau, tau_dot

    def tau_ddot(self, t):
        tau, _ = self(t)
        return 2.0 * self.lam / tau

    def first_integral_defect(self, t=None):
        """``|tau_dot^2 - 4 lam ln tau|`` at the knots, or at the times ``t``."""
        if t is None:
            tau, tau_dot = self.tau, self.tau_dot
        else:
            tau, tau_dot = self(t)
        return np.abs(np.square(tau_dot) - 4.0 * self.lam * np.log(tau))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            write_knots_csv(fh, self)


def write_knots_csv(fh, traj):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "tau", "tau_dot", "first_integral_defect"])
    defect = traj.first_integral_defect()
    for row in zip(traj.t, traj.tau, traj.tau_dot, defect):
        w.writerow([f"{x:.17g}" for x in row])


def solve_tau(lam, t_end, rel_tol=1e-10, knots_per_block=256):
    """Integrate the universal dispersion ODE on ``[0, t_end]``.

    The first integral is restored at every decade boundary; corrections
    are recorded on the trajectory and logged if they exceed ``10 * rel_tol``.

    Raises
    ------
    InvalidParameterError
        If ``lam`` or ``t_end`` is not positive or ``rel_tol`` is out of
        ``(0, 1e-3]``.
    ConvergenceError
        If the stepper fails (step size underflow).
    """
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam!r}")
    if not t_end > 0:
        raise InvalidParameterError(f"t_end must be positive, got {t_end!r}")
    if not 0 < rel_tol <= 1e-3:
        raise InvalidParameterError(f"rel_tol must lie in (0, 1e-3], got {rel_tol!r}")

    def rhs(t, y):
        return np.array([y[1], 2.0 * lam / y[0]])

    def project(t, y):
        if y[0] <= 1.0:
            return y
        return np.array([y[0], math.sqrt(4.0 * lam * math.log(y[0]))])

    t, y, corrections = integrate_blocks(
        rhs, [1.0, 0.0], float(t_end), rtol=1e-2 * rel_tol, atol=1e-16,
        knots_per_block=knots_per_block, project=project,
        max_correction=10 * rel_tol)
    return TauTrajectory(lam=float(lam), t=t, tau=y[:, 0], tau_dot=y[:, 1],
                         corrections=corrections)


def ell(t):
    """``ln ln t / ln t``, defined for ``t > e``."""
    if not t > math.e:
        raise DomainError(f"ell(t) requires t > e, got {t!r}")
    lt = math.log(t)
    return math.log(lt) / lt


def tau_asymptotic(t, lam):
    """Leading-order ``(tau, tau_dot)``: ``(2 t sqrt(lam ln t), 2 sqrt(lam ln t))``."""
    if not t > math.e:
        raise DomainError(f"asymptotic form requires t > e, got {t!r}")
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam!r}")
    g = 2.0 * math.sqrt(lam * math.log(t))
    return t * g, g


def s_of_t(traj, t):
    """Parabolic time ``s = ln(tau_dot(t)) / 2``.

    Undefined at ``t = 0`` where ``tau_dot`` vanishes.
    """
    if not t > 0:
        raise DomainError("s(t) is undefined for t <= 0 (tau_dot(0) = 0)")
    if t > traj.t_end * (1 + 1e-14):
        raise DomainError(f"t={t:g} beyond trajectory end {traj.t_end:g}")
    _, tau_dot = traj(t)
    return 0.5 * math.log(tau_dot)

"""Exact propagation of Gaussian data.

A Gaussian ``b exp(-1/2 sum_j a_j (x_j - x0_j)^2)`` stays Gaussian under the
logarithmic NLS.  Per axis, the width obeys

    a_j = alpha0_j / r_j^2 - i r_j' / r_j,
    r_j'' = alpha0_j^2 / r_j^3 + 2 lam alpha0_j / r_j,   r_j(0) = 1, r_j'(0) = -Im a0_j,

and the amplitude is recovered from the time integrals ``A_j = int a_j`` and
``int Im A_j``.  The ODE state per axis is ``(r, r', Re A, Im A, int Im A)``.
Axes are decoupled and share the same output knots.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline

from ._odeint import integrate_blocks
from .errors import DomainError, IntegratorFault, InvalidParameterError, TruncationError
from .dispersion import tau_asymptotic

__all__ = [
    "GaussianInit", "GaussianTrajectory", "evolve_gaussian", "reconstruct_a",
    "gaussian_field", "gaussian_lp_norm", "r_asymptotic",
]

R, RDOT, REA, IMA, IIMA = range(5)


@dataclass(frozen=True)
class GaussianInit:
    """Initial Gaussian ``b0 exp(-1/2 sum_j a0_j (x_j - x0_j)^2)``."""

    b0: complex
    a0: tuple
    x0: tuple = None

    def __post_init__(self):
        a0 = tuple(complex(a) for a in np.atleast_1d(self.a0))
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "b0", complex(self.b0))
        x0 = (0.0,) * len(a0) if self.x0 is None else tuple(float(c) for c in np.atleast_1d(self.x0))
        object.__setattr__(self, "x0", x0)
        problems = []
        if len(a0) < 1:
            problems.append("need at least one axis")
        if any(not a.real > 0 for a in a0):
            problems.append("Re a0_j must be positive on every axis")
        if len(x0) != len(a0):
            problems.append("x0 must have one entry per axis")
        if problems:
            raise InvalidParameterError("; ".join(problems))

    @property
    def d(self):
        return len(self.a0)

    @property
    def alpha0(self):
        return np.array([a.real for a in self.a0])

    @property
    def beta0(self):
        return np.array([a.imag for a in self.a0])

    def mass(self):
        """``||u0||_{L2}^2``."""
        return abs(self.b0) ** 2 * math.pi ** (self.d / 2) / math.sqrt(np.prod(self.alpha0))

    def r_lower_bound(self, lam):
        """Per-axis positive lower bound on ``r`` implied by the first integral."""
        a, b = self.alpha0, self.beta0
        return np.exp(-(b**2 + a**2) / (4.0 * lam * a))


@dataclass(frozen=True)
class GaussianTrajectory:
    init: GaussianInit
    lam: float
    t: np.ndarray
    knots: np.ndarray  # (d, m, 5)
    corrections: list = field(default_factory=list, compare=False, repr=False)

    @property
    def d(self):
        return self.init.d

    @property
    def t_end(self):
        return float(self.t[-1])

    @cached_property
    def _splines(self):
        lam = self.lam
        out = []
        for j in range(self.d):
            k = self.knots[j]
            a0 = self.init.alpha0[j]
            r, rd = k[:, R], k[:, RDOT]
            rdd = a0**2 / r**3 + 2 * lam * a0 / r
            out.append((
                CubicHermiteSpline(self.t, r, rd),
                CubicHermiteSpline(self.t, rd, rdd),
                CubicHermiteSpline(self.t, k[:, REA], a0 / r**2),
                CubicHermiteSpline(self.t, k[:, IMA], -rd / r),
                CubicHermiteSpline(self.t, k[:, IIMA], k[:, IMA]),
            ))
        return out

    def state(self, t):
        """Interpolated per-axis state, shape ``(d, 5)``.

        ``Im A`` is pinned to ``-ln r`` (an exact identity); the raw
        integrated value is available through :meth:`im_a_defect`.
        """
        if not 0 <= t <= self.t_end * (1 + 1e-14):
            raise DomainError(f"t={t!r} outside trajectory range [0, {self.t_end:g}]")
        t = min(float(t), self.t_end)
        out = np.array([[float(sp(t)) for sp in axis] for axis in self._splines])
        out[:, IMA] = -np.log(out[:, R])
        return out

    def r(self, t):
        return self.state(t)[:, R]

    def r_dot(self, t):
        return self.state(t)[:, RDOT]

    def a(self, t):
        st = self.state(t)
        return np.array([reconstruct_a(r, rd, a0) for r, rd, a0
                         in zip(st[:, R], st[:, RDOT], self.init.alpha0)])

    def b(self, t):
        """Amplitude ``b(t)`` including the accumulated phase."""
        st = self.state(t)
        b0 = self.init.b0
        lnb0 = math.log(abs(b0) ** 2) if b0 != 0 else 0.0
        big_a = st[:, REA] + 1j * st[:, IMA]
        phase = -1j * self.lam * t * lnb0 - 0.5j * big_a.sum() - 1j * self.lam * st[:, IIMA].sum()
        return b0 * np.exp(phase)

    def first_integral_defect(self):
        """Per-axis ``|r'^2 - rhs|`` at the knots, shape ``(d, m)``."""
        out = []
        for j in range(self.d):
            k = self.knots[j]
            out.append(np.abs(k[:, RDOT] ** 2 - _first_integral_rhs(
                k[:, R], self.init.alpha0[j], self.init.beta0[j], self.lam)))
        return np.array(out)

    def im_a_defect(self):
        """Per-axis ``|Im A + ln r|`` of the raw integrated values at the knots."""
        return np.abs(self.knots[:, :, IMA] + np.log(self.knots[:, :, R]))

    def gradient_norm_sq(self, t):
        """``||grad u(t)||^2`` from the closed form."""
        a = self.a(t)
        alpha = a.real
        return 0.5 * math.pi ** (self.d / 2) * abs(self.b(t)) ** 2 / math.sqrt(np.prod(alpha)) \
            * float(np.sum(np.abs(a) ** 2 / alpha))

    def energy(self, t):
        """``1/2 ||grad u||^2 + lam int |u|^2 ln |u|^2`` from the closed form."""
        mass = self.init.mass()
        b = abs(self.b(t))
        return 0.5 * self.gradient_norm_sq(t) + self.lam * mass * (math.log(b**2) - self.d / 2)

    def sobolev_norm(self, t, s):
        """Homogeneous ``H^s`` norm, ``0 < s <= 1``, evaluated in Fourier space."""
        if not 0 < s <= 1:
            raise DomainError(f"s must lie in (0, 1], got {s!r}")
        a = self.a(t)
        c = a.real / np.abs(a) ** 2  # |u^(k)|^2 ~ exp(-sum c_j k_j^2)
        pref = abs(self.b(t)) ** 2 / float(np.prod(np.abs(a)))
        d = self.d
        if d == 1:
            val = special.gamma(s + 0.5) * c[0] ** (-(s + 0.5))
        elif s == 1:
            val = math.pi ** (d / 2) / math.sqrt(np.prod(c)) * float(np.sum(0.5 / c))
        else:
            # |k|^{2s} = s/Gamma(1-s) int_0^inf (1 - e^{-w|k|^2}) w^{-s-1} dw
            base = 1.0 / math.sqrt(np.prod(c))

            def f(w):
                # base - prod(c + w)^(-1/2), written without cancellation at small w
                return -base * math.expm1(-0.5 * float(np.sum(np.log1p(w / c)))) * w ** (-s - 1)
            pieces = integrate.quad(f, 0, 1, limit=200, epsabs=0, epsrel=1e-12)[0] \
                + integrate.quad(f, 1, np.inf, limit=200, epsabs=0, epsrel=1e-12)[0]
            val = s / special.gamma(1 - s) * math.pi ** (d / 2) * pieces
        return math.sqrt(pref * val)

    def to_csv(self, directory, stem="gaussian"):
        """One CSV per axis plus a JSON metadata file; returns the paths."""
        from .io import atomic_open

        paths = []
        defect = self.first_integral_defect()
        for j in range(self.d):
            path = f"{directory}/{stem}_axis{j}.csv"
            with atomic_open(path) as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "r", "r_dot", "first_integral_defect", "ReA", "ImA"])
                k = self.knots[j]
                for i, t in enumerate(self.t):
                    w.writerow([f"{x:.17g}" for x in
                                (t, k[i, R], k[i, RDOT], defect[j, i], k[i, REA], k[i, IMA])])
            paths.append(path)
        meta = {
            "format_version": 1,
            "lambda": self.lam,
            "b0": [self.init.b0.real, self.init.b0.imag],
            "a0": [[a.real, a.imag] for a in self.init.a0],
            "x0": list(self.init.x0),
            "t_end": self.t_end,
            "n_knots": int(self.t.size),
        }
        path = f"{directory}/{stem}.json"
        with atomic_open(path) as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
        paths.append(path)
        return paths


def _first_integral_rhs(r, alpha0, beta0, lam):
    return beta0**2 + alpha0**2 * (1.0 - 1.0 / r**2) + 4.0 * lam * alpha0 * np.log(r)


def evolve_gaussian(init, lam, t_end, rel_tol=1e-10, knots_per_block=256):
    """Integrate the width ODEs of every axis up to ``t_end``.

    Raises
    ------
    InvalidParameterError
        Bad ``lam``, ``t_end`` or ``rel_tol``.
    IntegratorFault
        ``r`` dropped below its analytic lower bound.
    """
    if not isinstance(init, GaussianInit):
        raise InvalidParameterError("init must be a GaussianInit")
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam!r}")
    if not t_end > 0:
        raise InvalidParameterError(f"t_end must be positive, got {t_end!r}")
    if not 0 < rel_tol <= 1e-3:
        raise InvalidParameterError(f"rel_tol must lie in (0, 1e-3], got {rel_tol!r}")

    scale = max(max(abs(a) for a in init.a0), math.sqrt(lam * max(init.alpha0)), 1.0)
    t_lin = 1.0 / scale
    knots, corrections, t_ref = [], [], None
    for a0, b0, r_min in zip(init.alpha0, init.beta0, init.r_lower_bound(lam)):
        def rhs(t, y, a0=a0):
            r, rd, _, ima, _ = y
            return np.array([rd, a0**2 / r**3 + 2 * lam * a0 / r, a0 / r**2, -rd / r, ima])

        def project(t, y, a0=a0, b0=b0):
            target = _first_integral_rhs(y[R], a0, b0, lam)
            if y[RDOT] <= 0 or target <= 0:
                return y
            fixed = y.copy()
            fixed[RDOT] = math.sqrt(target)
            return fixed

        t, y, corr = integrate_blocks(
            rhs, [1.0, -b0, 0.0, 0.0, 0.0], float(t_end), rtol=1e-2 * rel_tol,
            atol=1e-16, knots_per_block=knots_per_block, t_lin=t_lin,
            project=project, max_correction=10 * rel_tol)
        if np.any(y[:, R] < r_min - 10 * rel_tol):
            raise IntegratorFault(
                f"r fell to {y[:, R].min():.6g}, below the lower bound {r_min:.6g}")
        knots.append(y)
        corrections.append(corr)
        t_ref = t
    return GaussianTrajectory(init=init, lam=float(lam), t=t_ref,
                              knots=np.array(knots), corrections=corrections)


def reconstruct_a(r, r_dot, alpha0):
    """Complex width ``alpha0 / r^2 - i r_dot / r``."""
    if not r > 0:
        raise DomainError(f"r must be positive, got {r!r}")
    return complex(alpha0 / r**2, -r_dot / r)


def gaussian_field(traj, t, grid, mass_tol=1e-8):
    """Sample the closed-form solution at time ``t`` on ``grid``.

    Raises
    ------
    TruncationError
        The box does not hold six standard deviations of ``|u|^2`` around the
        centre, or the grid mass misses the exact mass by more than ``mass_tol``
        (relative).  The measured defect is attached to the exception.
    """
    from .grid import WaveField

    if grid.d != traj.d:
        raise InvalidParameterError(f"grid has d={grid.d}, trajectory has d={traj.d}")
    a = traj.a(t)
    b = traj.b(t)
    q = np.zeros(grid.shape)
    for j, x in enumerate(grid.mesh()):
        q = q + a[j] * (x - traj.init.x0[j]) ** 2
    values = b * np.exp(-0.5 * q)
    field_ = WaveField(grid, values, t)
    exact = traj.init.mass()
    defect = abs(field_.mass() - exact) / exact
    std = 1.0 / np.sqrt(2.0 * a.real)
    reach = np.abs(np.array(traj.init.x0)) + 6.0 * std
    if np.any(reach > grid.L) or defect > mass_tol:
        raise TruncationError(
            f"grid [-{grid.L:g}, {grid.L:g}) too small for the Gaussian at t={t:g}: "
            f"relative mass defect {defect:.3e}", mass_defect=defect)
    return field_


def gaussian_lp_norm(traj, t, p):
    """Closed-form ``L^p`` norm, ``1 <= p <= inf``."""
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p!r}")
    b = abs(traj.b(t))
    if math.isinf(p):
        return b
    alpha = traj.a(t).real
    return (2 * math.pi / p) ** (traj.d / (2 * p)) * b / float(np.prod(alpha)) ** (1 / (2 * p))


def r_asymptotic(t, lam, alpha0):
    """Leading-order width ``2 t sqrt(lam alpha0 ln t)``."""
    if not alpha0 > 0:
        raise InvalidParameterError(f"alpha0 must be positive, got {alpha0!r}")
    tau, _ = tau_asymptotic(t, lam * alpha0)
    return tau

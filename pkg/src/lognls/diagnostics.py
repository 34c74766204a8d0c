"""Rescaled profile and the functionals evaluated on it.

With ``tau`` the universal dispersion, the rescaled profile is

    v(t, y) = tau^(d/2) (||gamma|| / ||u0||) u(t, tau y) exp(-i tau' tau |y|^2 / 2),

where ``gamma(y) = exp(-|y|^2 / 2)``.  Its density ``|v|^2`` keeps the mass of
``gamma^2`` and relaxes towards ``gamma^2``; this module measures that
relaxation (moments, relative entropy, Wasserstein distance) together with
the pseudo-energy and the momentum pair ``(I1, I2)``.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dispersion import s_of_t
from .errors import (DomainError, PreconditionError, ResolutionError,
                     UnsupportedDimensionError)
from .grid import Grid, WaveField
from .records import DiagnosticsRecord
from .solver import conserved_record, kinetic, momentum

__all__ = [
    "DensityProfile", "gamma_sq", "gamma_norm_sq", "to_v", "moments",
    "relative_entropy", "ck_lower_bound", "pseudo_energy", "momentum_pair",
    "wasserstein2_1d", "sobolev_norm", "apv_functional", "apv_growth_check",
    "momentum_pair_residuals", "diagnose", "diagnose_profile",
]

MASS_RTOL = 1e-6
RHO_FLOOR = 1e-300
MIN_POINTS_PER_UNIT = 8


def gamma_norm_sq(d):
    """``||gamma||^2 = pi^(d/2)``."""
    return math.pi ** (d / 2)


@dataclass(frozen=True)
class DensityProfile:
    """Nonnegative density sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise DomainError(f"values have shape {v.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("density has non-finite values")
        if np.any(v < -1e-12 * max(float(np.max(np.abs(v))), 1.0)):
            raise DomainError("density has negative values")
        object.__setattr__(self, "values", np.maximum(v, 0.0))

    @classmethod
    def from_field(cls, field):
        return cls(field.grid, field.density())

    @cached_property
    def mass(self):
        return float(np.sum(self.values)) * self.grid.weight


def gamma_sq(grid, center=None, scale=1.0):
    """``gamma^2`` on ``grid``; optionally shifted and dilated as
    ``scale^-d gamma^2((y - center) / scale)`` (mass preserved)."""
    q = np.zeros(grid.shape)
    center = np.zeros(grid.d) if center is None else np.broadcast_to(center, (grid.d,))
    for y, c in zip(grid.mesh(), center):
        q = q + ((y - c) / scale) ** 2
    return DensityProfile(grid, np.exp(-q) / scale ** grid.d)


def to_v(u, traj, u0_norm):
    """Rescaled profile on the y-grid ``x-grid / tau(t)``.

    Raises
    ------
    ResolutionError
        The y-grid has fewer than 8 points per unit length.
    DomainError
        ``u.t`` is outside the trajectory range.
    """
    if not u0_norm > 0:
        raise DomainError(f"u0_norm must be positive, got {u0_norm!r}")
    tau, tau_dot = traj(u.t)
    g = u.grid
    yg = g.scaled(1.0 / tau)
    if 1.0 / yg.h < MIN_POINTS_PER_UNIT:
        raise ResolutionError(
            f"y-grid spacing {yg.h:.3g} at t={u.t:g} gives fewer than "
            f"{MIN_POINTS_PER_UNIT} points per unit length (need n >= {16 * g.L / tau:.0f})")
    y2 = np.zeros(g.shape)
    for y in yg.mesh():
        y2 = y2 + y**2
    amp = tau ** (g.d / 2) * math.sqrt(gamma_norm_sq(g.d)) / u0_norm
    return WaveField(yg, amp * u.values * np.exp(-0.5j * tau_dot * tau * y2), u.t)


def moments(rho):
    """``(int rho, int y rho, int |y|^2 rho)``."""
    g = rho.grid
    w = g.weight
    m0 = float(np.sum(rho.values)) * w
    m1 = np.empty(g.d)
    m2 = 0.0
    for j, y in enumerate(g.mesh()):
        m1[j] = float(np.sum(y * rho.values)) * w
        m2 += float(np.sum(y**2 * rho.values)) * w
    return m0, m1, m2


def _check_gamma_mass(rho, what):
    target = gamma_norm_sq(rho.grid.d)
    if abs(rho.mass - target) > MASS_RTOL * target:
        raise PreconditionError(
            f"{what} needs mass pi^(d/2) = {target:.10g}, got {rho.mass:.10g}")


def relative_entropy(rho):
    """``int rho ln(rho / gamma^2)`` with ``0 ln 0 = 0``.

    Raises
    ------
    PreconditionError
        Mass differs from ``pi^(d/2)`` by more than 1e-6 relative.
    """
    _check_gamma_mass(rho, "relative entropy")
    g = rho.grid
    r = rho.values
    y2 = np.zeros(g.shape)
    for y in g.mesh():
        y2 = y2 + y**2
    pos = r >= RHO_FLOOR
    integrand = np.zeros(g.shape)
    integrand[pos] = r[pos] * (np.log(r[pos]) + y2[pos])
    return float(np.sum(integrand)) * g.weight


def ck_lower_bound(rho):
    """Csiszar-Kullback bound ``||rho - gamma^2||_1^2 / (2 ||gamma^2||_1)``."""
    g = rho.grid
    l1 = float(np.sum(np.abs(rho.values - gamma_sq(g).values))) * g.weight
    return l1**2 / (2 * gamma_norm_sq(g.d))


def pseudo_energy(v, traj, params, u0_norm=None):
    """``(E_kin, E_ent, pseudo_E)`` of a rescaled profile.

    ``E_kin = ||grad v||^2 / (2 tau^2)`` and ``E_ent`` is the relative
    entropy of ``|v|^2``.  When ``params.mu > 0`` the power term
    ``mu~ / ((sigma + 1) tau^(d sigma)) int |v|^(2 sigma + 2)`` with
    ``mu~ = (||u0|| / ||gamma||)^(2 sigma) mu`` is added, which needs ``u0_norm``.
    """
    tau, _ = traj(v.t)
    g = v.grid
    e_kin = kinetic(v) / (2 * tau**2)
    e_ent = relative_entropy(DensityProfile.from_field(v))
    total = e_kin + params.lam * e_ent
    if params.mu > 0:
        if u0_norm is None:
            raise PreconditionError("the power term needs u0_norm")
        sig = params.sigma
        mu_t = (u0_norm / math.sqrt(gamma_norm_sq(g.d))) ** (2 * sig) * params.mu
        power = float(np.sum(np.abs(v.values) ** (2 * sig + 2))) * g.weight
        total += mu_t / ((sig + 1) * tau ** (g.d * sig)) * power
    return e_kin, e_ent, total


def momentum_pair(v):
    """``I1 = Im int conj(v) grad v`` and ``I2 = int y |v|^2``."""
    _, m1, _ = moments(DensityProfile.from_field(v))
    return momentum(v), m1


def _cells(rho):
    g = rho.grid
    p = rho.values * g.weight
    p = p / p.sum()
    cdf = np.concatenate([[0.0], np.cumsum(p)])
    cdf[-1] = 1.0
    left = g.x - 0.5 * g.h
    return p, cdf, left, g.h


def _quantile_pieces(q_mid, q_a, q_b, cells):
    p, cdf, left, h = cells
    i = np.clip(np.searchsorted(cdf, q_mid, side="right") - 1, 0, p.size - 1)
    # cell widths in q taken from the rounded CDF itself, so fractions stay in [0, 1]
    dq = cdf[i + 1] - cdf[i]
    with np.errstate(divide="ignore", invalid="ignore"):
        fa = np.where(dq > 0, (q_a - cdf[i]) / dq, 0.0)
        fb = np.where(dq > 0, (q_b - cdf[i]) / dq, 0.0)
    return left[i] + h * np.clip(fa, 0, 1), left[i] + h * np.clip(fb, 0, 1)


def wasserstein2_1d(rho1, rho2):
    """Quadratic Wasserstein distance between two 1-D profiles.

    Each profile is read as piecewise constant on its grid cells and
    normalized to a probability; ``W2^2 = int_0^1 |F1^-1 - F2^-1|^2 dq`` is
    then integrated exactly over the merged breakpoints of both CDFs.

    Raises
    ------
    UnsupportedDimensionError
        Either profile is not one-dimensional.
    PreconditionError
        The masses differ by more than 1e-6 relative.
    """
    if rho1.grid.d != 1 or rho2.grid.d != 1:
        raise UnsupportedDimensionError("wasserstein2_1d needs d = 1")
    m1, m2 = rho1.mass, rho2.mass
    if not (m1 > 0 and m2 > 0) or abs(m1 - m2) > MASS_RTOL * max(m1, m2):
        raise PreconditionError(f"masses differ: {m1:.10g} vs {m2:.10g}")
    c1, c2 = _cells(rho1), _cells(rho2)
    q = np.union1d(c1[1], c2[1])
    q_a, q_b = q[:-1], q[1:]
    keep = q_b > q_a
    q_a, q_b = q_a[keep], q_b[keep]
    q_mid = 0.5 * (q_a + q_b)
    a1, b1 = _quantile_pieces(q_mid, q_a, q_b, c1)
    a2, b2 = _quantile_pieces(q_mid, q_a, q_b, c2)
    da, db = a1 - a2, b1 - b2
    w2sq = float(np.sum((q_b - q_a) * (da * da + da * db + db * db) / 3.0))
    return math.sqrt(max(w2sq, 0.0))


def sobolev_norm(u, s):
    """Homogeneous ``H^s`` seminorm ``(sum |k|^(2s) |u^_k|^2 h^d / N)^(1/2)``."""
    if not 0 < s <= 1:
        raise DomainError(f"s must lie in (0, 1], got {s!r}")
    g = u.grid
    power = np.abs(np.fft.fftn(u.values)) ** 2 * (g.weight / u.values.size)
    return math.sqrt(float(np.sum(g.k2 ** s * power)))


def apv_functional(v, traj):
    """``int (1 + |y|^2 + |ln |v|^2|) |v|^2 + E_kin``, bounded uniformly in time."""
    g = v.grid
    rho = v.density()
    y2 = np.zeros(g.shape)
    for y in g.mesh():
        y2 = y2 + y**2
    pos = rho >= RHO_FLOOR
    integrand = np.zeros(g.shape)
    integrand[pos] = (1 + y2[pos] + np.abs(np.log(rho[pos]))) * rho[pos]
    tau, _ = traj(v.t)
    return float(np.sum(integrand)) * g.weight + kinetic(v) / (2 * tau**2)


def apv_growth_check(values, factor=1.1):
    """True when the last value does not exceed ``factor`` times the running median."""
    values = np.asarray(values, dtype=float)
    return bool(values[-1] <= factor * np.median(values))


def momentum_pair_residuals(t, I1, I2, tau, lam):
    """Centered finite-difference residuals of ``I1' + 2 lam I2`` and
    ``I2' - I1 / tau^2`` on uniform snapshot times.

    ``I1`` and ``I2`` have shape ``(m,)`` or ``(m, d)``; returns the max-norm
    of each residual over the interior snapshots.
    """
    t = np.asarray(t, dtype=float)
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise PreconditionError("snapshot times must be uniformly spaced")
    I1 = np.asarray(I1, dtype=float).reshape(t.size, -1)
    I2 = np.asarray(I2, dtype=float).reshape(t.size, -1)
    tau = np.asarray(tau, dtype=float).reshape(-1, 1)
    h = dt[0]
    d1 = (I1[2:] - I1[:-2]) / (2 * h)
    d2 = (I2[2:] - I2[:-2]) / (2 * h)
    r1 = d1 + 2 * lam * I2[1:-1]
    r2 = d2 - I1[1:-1] / tau[1:-1] ** 2
    return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


def diagnose(u, traj, params, u0_norm, sobolev_exponents=(), with_energy=True):
    """Full :class:`DiagnosticsRecord` for one physical snapshot ``u``."""
    rec = conserved_record(u, params) if with_energy else DiagnosticsRecord(t=u.t)
    rec = diagnose_profile(to_v(u, traj, u0_norm), traj, params, u0_norm, rec)
    rec.sobolev = {float(e): sobolev_norm(u, e) for e in sobolev_exponents}
    return rec


def diagnose_profile(v, traj, params, u0_norm, record=None):
    """Fill the rescaled-profile entries of ``record`` (created if absent) from ``v``."""
    rec = DiagnosticsRecord(t=v.t) if record is None else record
    rho = DensityProfile.from_field(v)
    m0, m1, m2 = moments(rho)
    rec.m0, rec.m1, rec.m2 = m0, tuple(m1), m2
    rec.E_kin, rec.E_ent, rec.pseudo_E = pseudo_energy(v, traj, params, u0_norm)
    I1, I2 = momentum_pair(v)
    rec.I1, rec.I2 = tuple(I1), tuple(I2)
    if v.grid.d == 1:
        rec.W2 = wasserstein2_1d(rho, gamma_sq(v.grid))
    if v.t > 0:
        rec.s = s_of_t(traj, v.t)
    return rec

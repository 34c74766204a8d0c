"""Strang split-step Fourier solver for the regularized logarithmic NLS

    i u_t + 1/2 Lap u = lam ln(eps + |u|^2) u + mu |u|^(2 sigma) u

on a periodic box.  Both sub-flows are exact: the free flow is a Fourier
multiplier and the nonlinear flow is a pointwise phase rotation, so the
discrete mass is conserved to round-off.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import (InvalidParameterError, MassLeakError, NumericalBlowupError)
from .grid import Grid, WaveField
from .records import DiagnosticsRecord

log = logging.getLogger(__name__)

__all__ = [
    "ModelParams", "step_strang", "run", "run_growing", "mass", "momentum",
    "energy", "log_inequality_check", "shell_fraction", "pad_field",
    "run_rescaled", "rescaled_record", "kinetic", "conserved_record",
]


@dataclass(frozen=True)
class ModelParams:
    lam: float
    mu: float = 0.0
    sigma: float = 1.0
    epsilon: float = 1e-12

    def __post_init__(self):
        problems = []
        if not (math.isfinite(self.lam) and self.lam != 0):
            problems.append(f"lambda must be finite and nonzero, got {self.lam!r}")
        if not self.mu >= 0:
            problems.append(f"mu must be nonnegative, got {self.mu!r}")
        if self.mu > 0 and not self.sigma > 0:
            problems.append(f"sigma must be positive when mu > 0, got {self.sigma!r}")
        if not self.epsilon >= 0:
            problems.append(f"epsilon must be nonnegative, got {self.epsilon!r}")
        if problems:
            raise InvalidParameterError("; ".join(problems))

    def check_dimension(self, d):
        if self.mu > 0 and d >= 3 and not self.sigma < 2.0 / (d - 2):
            raise InvalidParameterError(
                f"sigma={self.sigma} is not energy-subcritical in d={d} (need sigma < {2 / (d - 2):g})")

    def to_dict(self):
        return {"lambda": self.lam, "mu": self.mu, "sigma": self.sigma, "epsilon": self.epsilon}


def _nonlinear_phase(values, params):
    rho = np.abs(values) ** 2
    if params.epsilon > 0:
        pot = params.lam * np.log(params.epsilon + rho)
    else:
        with np.errstate(divide="ignore"):
            pot = np.where(rho > 0, params.lam * np.log(np.where(rho > 0, rho, 1.0)), 0.0)
    if params.mu > 0:
        pot = pot + params.mu * rho ** params.sigma
    return pot


def _free_multiplier(grid, dt):
    return np.exp(-0.5j * dt * grid.k2)


def _advance(values, grid, params, dt, nsteps):
    """``nsteps`` Strang steps with adjacent half free-flows fused."""
    if nsteps == 0:
        return values
    half = _free_multiplier(grid, 0.5 * dt)
    full = half * half
    u = np.fft.ifftn(half * np.fft.fftn(values))
    for i in range(nsteps):
        u *= np.exp(-1j * dt * _nonlinear_phase(u, params))
        u = np.fft.ifftn((full if i < nsteps - 1 else half) * np.fft.fftn(u))
    return u


def step_strang(field, params, dt):
    """One Strang step: half free flow, full nonlinear phase, half free flow.

    Raises
    ------
    NumericalBlowupError
        The new state contains NaN or Inf; the input state is attached.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt!r}")
    field.check_finite()
    new = _advance(field.values, field.grid, params, dt, 1)
    if not np.all(np.isfinite(new)):
        raise NumericalBlowupError(f"non-finite field after step at t={field.t:g}", snapshot=field)
    return WaveField(field.grid, new, field.t + dt)


def mass(field):
    """``M = ||u||^2`` by grid quadrature."""
    return field.mass()


def _spectral_power(field):
    # Parseval-normalized so that sum(power) == ||u||^2
    return np.abs(np.fft.fftn(field.values)) ** 2 * (field.grid.weight / field.values.size)


def momentum(field):
    """``J = Im int conj(u) grad u``, one entry per axis."""
    g = field.grid
    p = _spectral_power(field)
    out = []
    for j in range(g.d):
        shape = [1] * g.d
        shape[j] = g.n
        out.append(float(np.sum(g._k_odd.reshape(shape) * p)))
    return np.array(out)


def kinetic(field):
    """``||grad u||^2`` evaluated spectrally."""
    return float(np.sum(field.grid.k2 * _spectral_power(field)))


def _rho_log_rho(rho):
    out = np.zeros_like(rho)
    pos = rho > 0
    out[pos] = rho[pos] * np.log(rho[pos])
    return out


def _g_eps(rho, eps):
    """Antiderivative of ``ln(eps + s)`` vanishing at 0."""
    if eps == 0:
        return _rho_log_rho(rho) - rho
    return eps * np.log1p(rho / eps) + rho * np.log(eps + rho) - rho


def energy(field, params, regularized=False):
    """Hamiltonian ``1/2 ||grad u||^2 + lam int rho ln rho + mu/(sigma+1) int rho^(sigma+1)``.

    With ``regularized=True`` the entropy density ``rho ln rho`` is replaced
    by ``G_eps(rho) = (eps+rho) ln(eps+rho) - rho - eps ln eps``, which is the
    quantity exactly conserved by the regularized equation.
    """
    g = field.grid
    rho = field.density()
    ent = _g_eps(rho, params.epsilon) if regularized else _rho_log_rho(rho)
    e = 0.5 * kinetic(field) + params.lam * float(np.sum(ent)) * g.weight
    if params.mu > 0:
        e += params.mu / (params.sigma + 1) * float(np.sum(rho ** (params.sigma + 1))) * g.weight
    return e


def shell_fraction(field, fraction=0.05):
    """Share of the mass sitting in the outer ``fraction`` of the box."""
    rho = field.density()
    total = float(np.sum(rho))
    if total == 0:
        return 0.0
    return float(np.sum(rho[field.grid.shell_mask(fraction)])) / total


def conserved_record(field, params):
    return DiagnosticsRecord(
        t=field.t, mass=mass(field), momentum=tuple(momentum(field)),
        energy=energy(field, params), energy_reg=energy(field, params, regularized=True))


def _check_schedule(snapshot_times, t0, t_end):
    times = [float(t) for t in snapshot_times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise InvalidParameterError("snapshot times must be sorted")
    if times and (times[0] < t0 - 1e-12 or times[-1] > t_end * (1 + 1e-12) + 1e-12):
        raise InvalidParameterError(f"snapshot times must lie in [{t0:g}, {t_end:g}]")
    return times


def _segment(values, grid, params, dt, span):
    """Advance by ``span`` with fixed ``dt`` and one shorter closing step if needed."""
    nfull = int(math.floor(span / dt + 1e-9))
    rest = span - nfull * dt
    values = _advance(values, grid, params, dt, nfull)
    if rest > 1e-12 * max(dt, 1.0):
        values = _advance(values, grid, params, rest, 1)
    return values


def run(u0, params, t_end, dt, snapshot_times=None, leak_tol=1e-6, shell=0.05):
    """Fixed-step Strang evolution from ``u0.t`` to ``t_end``.

    Returns the snapshots at ``snapshot_times`` (default: start and end) and
    one :class:`DiagnosticsRecord` per snapshot with mass, momentum, energy
    and regularized energy.

    Raises
    ------
    NumericalBlowupError
        Non-finite values appeared; the last finite snapshot is attached.
    MassLeakError
        More than ``leak_tol`` of the mass reached the boundary shell.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt!r}")
    if not t_end >= u0.t:
        raise InvalidParameterError("t_end precedes the initial time")
    params.check_dimension(u0.grid.d)
    if snapshot_times is None:
        snapshot_times = [u0.t] if t_end == u0.t else [u0.t, t_end]
    times = _check_schedule(snapshot_times, u0.t, t_end)
    u0.check_finite()

    snaps, recs = [], []
    cur = u0
    for ts in times:
        span = ts - cur.t
        if span > 0:
            new = _segment(cur.values, cur.grid, params, dt, span)
            if not np.all(np.isfinite(new)):
                raise NumericalBlowupError(
                    f"non-finite field between t={cur.t:g} and t={ts:g}", snapshot=cur)
            cur = WaveField(cur.grid, new, ts)
        if leak_tol is not None:
            frac = shell_fraction(cur, shell)
            if frac > leak_tol:
                raise MassLeakError(
                    f"shell mass fraction {frac:.3e} exceeds {leak_tol:.1e} at t={cur.t:g}",
                    shell_fraction=frac, t=cur.t)
        snaps.append(cur)
        recs.append(conserved_record(cur, params))
    return snaps, recs


def pad_field(field, factor=2):
    """Embed ``field`` in a box ``factor`` times wider with the same spacing."""
    g = field.grid
    ng = Grid(g.d, g.n * factor, g.L * factor)
    lo = (ng.n - g.n) // 2
    values = np.zeros(ng.shape, dtype=complex)
    values[(slice(lo, lo + g.n),) * g.d] = field.values
    return WaveField(ng, values, field.t)


def run_growing(u0, params, snapshot_times, dt0=1e-3, dt_rel=3e-3, dt_max=0.1, max_span_ratio=1.25,
                grow_fraction=0.5, grow_tol=1e-12, leak_tol=1e-6, shell=0.05,
                max_points=2**22):
    """Long-horizon evolution on a box that doubles as the solution spreads.

    The horizon is cut into segments whose end times grow at most by
    ``max_span_ratio``.  Inside a segment starting at ``t`` the step is
    fixed at ``max(dt0, dt_rel * t)`` capped by ``dt_max``; beyond the cap the
    split-step scheme develops resonance instabilities at the grid's top
    wavenumbers.  Before every segment the box is
    doubled (zero padding, same spacing) while the outer ``grow_fraction``
    of the box holds more than ``grow_tol`` of the mass.  Segments are short
    enough (at most 0.25 early on) that the profile cannot cross the empty
    half of the box before the next check; mass that wraps around the
    periodic boundary comes back as high-frequency noise.  The boundary-shell
    leak monitor runs at every segment end.

    Returns ``(snapshots, records, log)`` where ``log`` lists dicts with the
    box size and maximum shell fraction per segment.
    """
    params.check_dimension(u0.grid.d)
    times = _check_schedule(snapshot_times, u0.t, snapshot_times[-1] if snapshot_times else u0.t)
    cur = u0.check_finite()
    snaps, recs, history = [], [], []
    max_shell = shell_fraction(cur, shell)
    for ts in times:
        while ts - cur.t > 1e-12 * max(ts, 1.0):
            seg_end = min(ts, max(cur.t * max_span_ratio, cur.t + 0.25))
            while shell_fraction(cur, grow_fraction) > grow_tol:
                if cur.values.size * 2 ** cur.grid.d > max_points:
                    break
                cur = pad_field(cur)
                log.info("box grown to L=%g (n=%d) at t=%g", cur.grid.L, cur.grid.n, cur.t)
            dt = min(max(dt0, dt_rel * cur.t), dt_max)
            new = _segment(cur.values, cur.grid, params, dt, seg_end - cur.t)
            if not np.all(np.isfinite(new)):
                raise NumericalBlowupError(
                    f"non-finite field between t={cur.t:g} and t={seg_end:g}", snapshot=cur)
            cur = WaveField(cur.grid, new, seg_end)
            frac = shell_fraction(cur, shell)
            max_shell = max(max_shell, frac)
            history.append({"t": cur.t, "L": cur.grid.L, "n": cur.grid.n, "dt": dt,
                            "shell_fraction": frac})
            if leak_tol is not None and frac > leak_tol:
                raise MassLeakError(
                    f"shell mass fraction {frac:.3e} exceeds {leak_tol:.1e} at t={cur.t:g}",
                    shell_fraction=frac, t=cur.t)
        snaps.append(cur)
        recs.append(conserved_record(cur, params))
    return snaps, recs, history


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def _time_integral(f, t0, t1):
    """4-point Gauss-Legendre rule for ``int_t0^t1 f``."""
    half = 0.5 * (t1 - t0)
    mid = 0.5 * (t1 + t0)
    return half * sum(w * f(mid + half * x) for x, w in zip(_GL_NODES, _GL_WEIGHTS))


def _rescaled_step(v, t0, dt, y2, k2, params, traj, amp2, d):
    """One Strang step of the rescaled equation from ``t0`` to ``t0 + dt``."""
    lam, eps = params.lam, params.epsilon
    tm = t0 + 0.5 * dt

    def inv_tau2(t):
        return traj(t)[0] ** -2.0

    def log_scale(t):
        return math.log(amp2) - d * math.log(traj(t)[0])

    w1 = _time_integral(inv_tau2, t0, tm)
    w2 = _time_integral(inv_tau2, tm, t0 + dt)
    v = np.fft.ifftn(np.exp(-0.5j * w1 * k2) * np.fft.fftn(v))
    rho = np.abs(v) ** 2
    eps_eff = eps * traj(tm)[0] ** d / amp2
    if eps_eff > 0:
        ent = np.log(eps_eff + rho)
    else:
        with np.errstate(divide="ignore"):
            ent = np.where(rho > 0, np.log(np.where(rho > 0, rho, 1.0)), 0.0)
    phase = lam * dt * (ent + y2) + lam * _time_integral(log_scale, t0, t0 + dt)
    if params.mu > 0:
        sig = params.sigma
        phase = phase + params.mu * amp2**sig * rho**sig * _time_integral(
            lambda t: traj(t)[0] ** (-d * sig), t0, t0 + dt)
    v = v * np.exp(-1j * phase)
    return np.fft.ifftn(np.exp(-0.5j * w2 * k2) * np.fft.fftn(v))


def rescaled_record(v, params, traj, u0_norm):
    """Mass, momentum and energies of ``u`` evaluated from its rescaled profile."""
    g = v.grid
    d = g.d
    amp2 = (u0_norm / math.sqrt(math.pi ** (d / 2))) ** 2
    tau, tau_dot = traj(v.t)
    rho_v = v.density()
    grads = g.gradient(v.values)
    # grad_x u = tau^(-d/2) A e^(i phi) (grad_y v / tau + i tau' y v)
    kin = 0.0
    for y, gj in zip(g.mesh(), grads):
        kin += float(np.sum(np.abs(gj / tau + 1j * tau_dot * y * v.values) ** 2))
    kin *= amp2 * g.weight
    rho_u = amp2 * tau ** (-d) * rho_v  # |u|^2 at x = tau y, with dx = tau^d dy
    w = g.weight * tau**d
    ent = float(np.sum(_rho_log_rho(rho_u))) * w
    ent_reg = float(np.sum(_g_eps(rho_u, params.epsilon))) * w
    e = 0.5 * kin + params.lam * ent
    e_reg = 0.5 * kin + params.lam * ent_reg
    if params.mu > 0:
        pw = params.mu / (params.sigma + 1) * float(np.sum(rho_u ** (params.sigma + 1))) * w
        e, e_reg = e + pw, e_reg + pw
    m = amp2 * float(np.sum(rho_v)) * g.weight
    # J_u = A^2 (Im int conj(v) grad v / tau + tau' int y |v|^2)
    mom = momentum(v) / tau
    for j, y in enumerate(g.mesh()):
        mom[j] += tau_dot * float(np.sum(y * rho_v)) * g.weight
    return DiagnosticsRecord(t=v.t, mass=m, momentum=tuple(amp2 * mom), energy=e, energy_reg=e_reg)


def run_rescaled(u0, params, traj, snapshot_times, dt0=1e-3, dt_rel=1e-3, max_span_ratio=1.25,
                 leak_tol=1e-6, shell=0.05):
    """Long-horizon evolution carried out on the rescaled profile ``v``.

    With ``A = ||u0|| / ||gamma||`` and ``u(t, x) = tau^(-d/2) A v(t, x / tau)
    exp(i tau' |x|^2 / (2 tau))``, the profile solves

        i v_t + Lap v / (2 tau^2) = lam (ln(eps tau^d / A^2 + |v|^2) + |y|^2) v
                                    + lam ln(A^2 tau^-d) v + mu A^(2 sigma) tau^(-d sigma) |v|^(2 sigma) v.

    The y-box stays fixed, so in physical variables the box is
    ``[-tau(t) L, tau(t) L)`` and grows with the dispersion.  Each step is a
    Strang split whose time-dependent coefficients are integrated by
    Gauss-Legendre quadrature.  The step is ``max(dt0, dt_rel * t)``, held
    fixed within segments whose end times grow at most by ``max_span_ratio``.

    Returns ``(profiles, records, history)``: rescaled profiles on
    ``u0.grid`` (read as the y-grid), conserved quantities of ``u``, and a
    per-segment log of step size and boundary-shell fraction.

    Raises
    ------
    MassLeakError
        More than ``leak_tol`` of the mass reached the outer ``shell`` of the box.
    """
    g = u0.grid
    d = g.d
    params.check_dimension(d)
    if u0.t != 0:
        raise InvalidParameterError("the rescaled run starts at t = 0, where tau = 1")
    times = _check_schedule(snapshot_times, 0.0, traj.t_end)
    u0_norm = u0.norm()
    amp2 = u0_norm**2 / math.pi ** (d / 2)
    y2 = np.zeros(g.shape)
    for y in g.mesh():
        y2 = y2 + y**2
    k2 = g.k2
    cur = WaveField(g, u0.check_finite().values / math.sqrt(amp2), 0.0)
    profiles, recs, history = [], [], []
    for ts in times:
        while ts - cur.t > 1e-12 * max(ts, 1.0):
            seg_end = min(ts, max(cur.t * max_span_ratio, cur.t + 0.25))
            dt = max(dt0, dt_rel * cur.t)
            nfull = int(math.floor((seg_end - cur.t) / dt + 1e-9))
            steps = [dt] * nfull
            rest = seg_end - cur.t - nfull * dt
            if rest > 1e-12 * max(dt, 1.0):
                steps.append(rest)
            vals, t = cur.values, cur.t
            for h in steps:
                vals = _rescaled_step(vals, t, h, y2, k2, params, traj, amp2, d)
                t += h
            if not np.all(np.isfinite(vals)):
                raise NumericalBlowupError(
                    f"non-finite profile between t={cur.t:g} and t={seg_end:g}", snapshot=cur)
            cur = WaveField(g, vals, seg_end)
            frac = shell_fraction(cur, shell)
            history.append({"t": cur.t, "dt": dt, "shell_fraction": frac})
            if leak_tol is not None and frac > leak_tol:
                raise MassLeakError(
                    f"shell mass fraction {frac:.3e} exceeds {leak_tol:.1e} at t={cur.t:g}",
                    shell_fraction=frac, t=cur.t)
        profiles.append(cur)
        recs.append(rescaled_record(cur, params, traj, u0_norm))
    return profiles, recs, history


def log_inequality_check(z1, z2):
    """Check ``|Im((z2 ln|z2|^2 - z1 ln|z1|^2) conj(z2 - z1))| <= 4 |z2 - z1|^2``.

    ``0 ln 0`` is read as 0.  Works elementwise on arrays; a rounding
    allowance proportional to the size of the operands is granted.
    """
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)

    def zlog(z):
        a2 = np.abs(z) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a2 > 0, z * np.log(np.where(a2 > 0, a2, 1.0)), 0.0)

    dz = z2 - z1
    lhs = np.abs(np.imag((zlog(z2) - zlog(z1)) * np.conj(dz)))
    rhs = 4.0 * np.abs(dz) ** 2
    scale = (np.abs(zlog(z1)) + np.abs(zlog(z2)) + np.abs(z1) + np.abs(z2)) * np.abs(dz)
    ok = lhs <= rhs + 16 * np.finfo(float).eps * scale
    return bool(ok) if ok.ndim == 0 else ok

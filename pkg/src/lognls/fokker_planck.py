"""Hydrodynamic fields and the Fokker-Planck reference dynamics.

In the parabolic time ``s = ln(tau') / 2`` the density of the rescaled
profile is expected to follow ``d rho / ds = L rho`` with

    L rho = Lap rho + div(2 y rho),

the Ornstein-Uhlenbeck generator whose stationary state is ``gamma^2``.
:func:`fp_solve` evolves this equation exactly through its Mehler kernel;
:func:`fp_compare` measures how far snapshots of an NLS run are from it.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import (DensityProfile, gamma_norm_sq, gamma_sq, moments, to_v,
                          wasserstein2_1d)
from .dispersion import s_of_t
from .errors import DomainError, PreconditionError

__all__ = [
    "HydroFields", "hydro_fields", "continuity_residual", "apply_L", "fp_solve",
    "resample_scaled", "test_functions", "FPReport", "fp_compare",
    "REPORT_SCHEMA_VERSION", "DICTIONARY_VERSION",
]

REPORT_SCHEMA_VERSION = 1
DICTIONARY_VERSION = 1


@dataclass(frozen=True)
class HydroFields:
    """Density ``rho = |v|^2`` and current ``J = Im(conj(v) grad v)``."""

    rho: DensityProfile
    J: tuple
    t: float
    s: float = None


def hydro_fields(v, traj=None):
    """Hydrodynamic variables of a rescaled profile; ``s`` is filled when
    ``traj`` is given and ``v.t > 0``."""
    v.check_finite()
    grads = v.grid.gradient(v.values)
    J = tuple(np.imag(np.conj(v.values) * gj) for gj in grads)
    s = s_of_t(traj, v.t) if traj is not None and v.t > 0 else None
    return HydroFields(DensityProfile.from_field(v), J, v.t, s)


def _resample_axis(values, grid, factor, axis):
    # trigonometric interpolant of ``values`` along ``axis`` evaluated at factor * x
    n, L = grid.n, grid.L
    xs = factor * grid.x
    k = grid.k.copy()
    k[n // 2] = 0.0  # the Nyquist mode is dropped to keep real data real
    coeff = np.fft.fft(np.moveaxis(values, axis, -1), axis=-1) / n
    phase = np.exp(1j * np.outer(xs + L, k))
    out = coeff @ phase.T
    out[..., np.abs(xs) >= L] = 0.0
    return np.moveaxis(out, -1, axis)


def resample_scaled(values, grid, factor):
    """Evaluate the trigonometric interpolant of ``values`` at ``factor * x``.

    Points mapped outside the box are set to zero.  Real input gives real
    output.
    """
    out = np.asarray(values, dtype=complex)
    for ax in range(grid.d):
        out = _resample_axis(out, grid, factor, ax)
    return out if np.iscomplexobj(values) else out.real


def continuity_residual(v_prev, v_mid, v_next, traj):
    """Max-norm of ``d rho/dt + tau^-2 div J`` at the middle snapshot.

    The three snapshots live on different y-grids (each is the x-grid divided
    by its own ``tau``); the outer densities are resampled onto the middle
    grid before the centered difference is taken.
    """
    g = v_mid.grid
    rho = []
    for v in (v_prev, v_next):
        # v.grid.L * factor must equal g.L at matching points: y = factor * y'
        rho.append(resample_scaled(v.density(), v.grid, g.L / v.grid.L))
    drho = (rho[1] - rho[0]) / (v_next.t - v_prev.t)
    hf = hydro_fields(v_mid)
    div = sum(np.real(g.gradient(Jj)[j]) for j, Jj in enumerate(hf.J))
    tau, _ = traj(v_mid.t)
    return float(np.max(np.abs(drho + div / tau**2)))


def apply_L(rho):
    """``Lap rho + div(2 y rho)`` with spectral derivatives.

    The drift is expanded as ``2 d rho + 2 y . grad rho`` so that constants
    and the periodic seam are handled without a jump in ``y rho``.
    """
    g = rho.grid
    r = rho.values
    out = g.laplacian(r) + 2 * g.d * r
    for y, dr in zip(g.mesh(), g.gradient(r)):
        out = out + 2 * y * dr
    return out


def _transform_at(values, grid, kx):
    """``h^d sum rho_j exp(-i k . x_j)`` for per-axis frequency arrays ``kx``."""
    out = np.asarray(values, dtype=complex)
    for ax in range(grid.d):
        mat = np.exp(-1j * np.outer(kx, grid.x)) * grid.h
        out = np.moveaxis(np.tensordot(mat, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out


def fp_solve(rho0, s_end, out_grid=None):
    """Exact Ornstein-Uhlenbeck evolution of ``rho0`` over parabolic time ``s_end``.

    The solution is the law of ``exp(-2 s) Y0 + G`` with ``G`` centred
    Gaussian of per-axis variance ``(1 - exp(-4 s)) / 2``; in Fourier space
    ``rho^(s, k) = rho0^(exp(-2 s) k) exp(-(1 - exp(-4 s)) |k|^2 / 4)``.
    ``rho0^`` is evaluated at the contracted frequencies by a direct
    transform, the result is synthesized on ``out_grid`` (default: the input
    grid), clipped at zero and restored to the input mass.

    Raises
    ------
    PreconditionError
        ``rho0`` has entries below ``-1e-12``.
    """
    if not s_end >= 0:
        raise DomainError(f"s_end must be nonnegative, got {s_end!r}")
    g = rho0.grid
    if np.any(np.asarray(rho0.values) < -1e-12):
        raise PreconditionError("fp_solve needs a nonnegative density")
    og = g if out_grid is None else out_grid
    if og.d != g.d:
        raise DomainError("output grid dimension differs from the input")
    c = math.exp(-2 * s_end)
    spec = _transform_at(rho0.values, g, c * og.k)
    var = 1.0 - c * c
    spec = spec * np.exp(-0.25 * var * og.k2)
    # back to grid values: rho_j = (1 / (2L)^d) sum_m spec_m exp(i k_m x_j)
    shift = np.ones(og.shape, dtype=complex)
    for km in og.kmesh():
        shift = shift * np.exp(-1j * km * og.L)
    vals = np.real(np.fft.ifftn(spec * shift)) / og.weight
    vals = np.maximum(vals, 0.0)
    total = float(np.sum(vals)) * og.weight
    if total > 0:
        vals *= rho0.mass / total
    return DensityProfile(og, vals)


def test_functions(grid):
    """Versioned test-function dictionary for weak-convergence proxies.

    ``poly_k``: ``y_1^k exp(-|y|^2 / 2)`` for k = 0..3;
    ``ball_a``: ``(1 + tanh((a - |y|) / 0.1)) / 2`` for a = 0.5, 1, 2.
    """
    y2 = np.zeros(grid.shape)
    for y in grid.mesh():
        y2 = y2 + y**2
    y1 = grid.mesh()[0]
    env = np.exp(-0.5 * y2)
    out = {f"poly_{k}": np.broadcast_to(y1**k * env, grid.shape) for k in range(4)}
    radius = np.sqrt(y2)
    for a in (0.5, 1.0, 2.0):
        out[f"ball_{a:g}"] = 0.5 * (1 + np.tanh((a - radius) / 0.1))
    return out


def _proxies(rho):
    diff = rho.values - gamma_sq(rho.grid).values
    w = rho.grid.weight
    return {name: float(np.sum(diff * phi)) * w for name, phi in test_functions(rho.grid).items()}


@dataclass
class FPReport:
    d: int
    rows: list
    trends: dict
    excluded_times: list = field(default_factory=list)
    s_start: float = 0.5
    schema_version: int = REPORT_SCHEMA_VERSION
    dictionary_version: int = DICTIONARY_VERSION

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if data.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise PreconditionError(f"unsupported report schema {data.get('schema_version')!r}")
        return cls(**data)


def _monotone(values, tol):
    mags = np.abs(np.asarray(values, dtype=float))
    return bool(np.all(np.diff(mags) <= tol))


def fp_compare(snapshots, traj, u0_norm, s_start=0.5, reference=True, min_span=1.0, tol=1e-10):
    """Compare rescaled snapshot densities with ``gamma^2`` and with the exact
    Fokker-Planck flow started from the first retained snapshot.

    Snapshots with ``t <= 0`` (where ``s`` is undefined) are skipped and
    listed in ``excluded_times``.  Trends (monotone decrease of the magnitude
    of every proxy, moment gap, W2 and ``fp_gap``) are evaluated on rows
    with ``s >= s_start``.

    Raises
    ------
    PreconditionError
        Retained snapshots span less than ``min_span`` in ``s``.
    """
    kept, excluded = [], []
    for u in snapshots:
        (kept if u.t > 0 else excluded).append(u)
    if len(kept) < 2:
        raise PreconditionError("need at least two snapshots with t > 0")
    s_vals = [s_of_t(traj, u.t) for u in kept]
    if s_vals[-1] - s_vals[0] < min_span:
        raise PreconditionError(
            f"snapshots span s in [{s_vals[0]:.3g}, {s_vals[-1]:.3g}], need a span >= {min_span:g}")

    d = kept[0].grid.d
    target_m2 = 0.5 * d * gamma_norm_sq(d)
    rho_ref = None
    rows = []
    for u, s in zip(kept, s_vals):
        rho = DensityProfile.from_field(to_v(u, traj, u0_norm))
        m0, m1, m2 = moments(rho)
        row = {
            "t": u.t, "s": s,
            "moment_gaps": {"m0": abs(m0 - gamma_norm_sq(d)),
                            "m1": float(np.linalg.norm(m1)),
                            "m2": abs(m2 - target_m2)},
            "W2": wasserstein2_1d(rho, gamma_sq(rho.grid)) if d == 1 else None,
            "proxies": _proxies(rho),
            "fp_gap": None,
        }
        if reference:
            if rho_ref is None:
                rho_ref = (rho, s)
            pred = fp_solve(rho_ref[0], s - rho_ref[1], out_grid=rho.grid)
            row["fp_gap"] = float(np.sum(np.abs(pred.values - rho.values))) * rho.grid.weight
        rows.append(row)

    late = [r for r in rows if r["s"] >= s_start]
    trends = {}
    if len(late) >= 2:
        series = {f"proxy:{k}": [r["proxies"][k] for r in late] for k in late[0]["proxies"]}
        series.update({f"moment:{k}": [r["moment_gaps"][k] for r in late] for k in ("m1", "m2")})
        if d == 1:
            series["W2"] = [r["W2"] for r in late]
        for name, vals in series.items():
            trends[name] = {"first": vals[0], "last": vals[-1],
                            "monotone_decreasing": _monotone(vals, tol)}
    return FPReport(d=d, rows=rows, trends=trends, excluded_times=[u.t for u in excluded],
                    s_start=s_start)

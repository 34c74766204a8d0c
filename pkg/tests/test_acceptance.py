"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line (printed in the terminal summary).
Sub-checks that cannot be met as literally stated are still evaluated at
the stated tolerance and marked ``xfail(strict=True)``: they show up as
FAIL in the report, and the suite breaks if they ever start passing
unnoticed.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from lognls import (GaussianInit, Grid, ModelParams, WaveField, ell, evolve_gaussian,
                    gaussian_field, run, run_rescaled, solve_tau, to_v)
from lognls.diagnostics import (DensityProfile, diagnose_profile, gamma_norm_sq, gamma_sq,
                                moments, momentum_pair, momentum_pair_residuals, relative_entropy,
                                wasserstein2_1d)
from lognls.fokker_planck import fp_solve
from lognls.solver import log_inequality_check


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# ---------------------------------------------------------------- 1

def test_c1_dispersion_law():
    start = time.perf_counter()
    traj = solve_tau(1.0, 1e6)
    elapsed = time.perf_counter() - start
    worst = 0.0
    for t in (1e3, 1e4, 1e5, 1e6):
        tau, _ = traj(t)
        dev = abs(tau / (2 * t * math.sqrt(math.log(t))) - 1)
        worst = max(worst, dev / (5 * ell(t)))
    defect = float(np.max(traj.first_integral_defect(np.geomspace(1e-3, 1e6, 4001))))
    defect = max(defect, float(np.max(traj.first_integral_defect())))
    ok = worst <= 1 and defect <= 1e-8 and elapsed <= 10
    record("1", ok, f"max dev/(5 ell)={worst:.3f}, defect={defect:.2e}, {elapsed:.2f}s")
    assert ok


# ---------------------------------------------------------------- 2, 3

C2_GRID = Grid(1, 1024, 40.0)


def c2_run(dt, epsilon=1e-12, mu=0.0):
    params = ModelParams(1.0, mu=mu, sigma=1.0, epsilon=epsilon)
    u0 = WaveField(C2_GRID, np.exp(-0.5 * C2_GRID.x**2))
    return run(u0, params, 1.0, dt, list(np.linspace(0, 1, 11)))


@pytest.fixture(scope="module")
def gaussian_t1():
    traj = evolve_gaussian(GaussianInit(1.0, (1.0,)), 1.0, 1.0)
    return gaussian_field(traj, 1.0, C2_GRID).values


@pytest.fixture(scope="module")
def c2_runs():
    start = time.perf_counter()
    runs = {dt: c2_run(dt) for dt in (1e-3, 5e-4)}
    return runs, time.perf_counter() - start


def test_c2_gaussian_oracle_error(c2_runs, gaussian_t1):
    runs, elapsed = c2_runs
    err = rel_l2(runs[1e-3][0][-1].values, gaussian_t1)
    ok = err <= 1e-4 and elapsed <= 30
    record("2.err", ok, f"relative L2 error {err:.2e} at dt=1e-3 (eps=1e-12), {elapsed:.1f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="eps = 1e-12 sets an error floor near 1.5e-7 that "
                   "dominates the O(dt^2) part; see the eps = 0 companion")
def test_c2_halving_ratio(c2_runs, gaussian_t1):
    runs, _ = c2_runs
    errs = [rel_l2(runs[dt][0][-1].values, gaussian_t1) for dt in (1e-3, 5e-4)]
    ratio = errs[0] / errs[1]
    ok = 3.5 <= ratio <= 4.5
    record("2.ratio", ok, f"error ratio {ratio:.2f} on halving dt (eps=1e-12), need [3.5, 4.5]")
    assert ok


def test_c2_halving_ratio_unregularized(gaussian_t1):
    errs = [rel_l2(c2_run(dt, epsilon=0.0)[0][-1].values, gaussian_t1) for dt in (1e-3, 5e-4)]
    ratio = errs[0] / errs[1]
    ok = 3.5 <= ratio <= 4.5 and errs[0] <= 1e-4
    record("2.eps0", ok, f"companion with eps=0: errors {errs[0]:.2e}, {errs[1]:.2e}, ratio {ratio:.2f}")
    assert ok


def conservation(recs):
    m = np.array([r.mass for r in recs])
    e = np.array([r.energy_reg for r in recs])
    j = np.array([r.momentum for r in recs])
    mass_drift = float(np.max(np.abs(m - m[0])) / m[0])
    e_drift = float(np.max(np.abs(e - e[0])) / abs(e[0]))
    j_drift = float(np.max(np.abs(j - j[0])) / m[0])
    return mass_drift, e_drift, j_drift


def test_c3_conservation(c2_runs):
    runs, _ = c2_runs
    md, ed, jd = conservation(runs[1e-3][1])
    ok = md <= 1e-10 and ed <= 1e-5 and jd <= 1e-8
    record("3", ok, f"mass {md:.1e}, E_reg {ed:.1e} (relative), momentum {jd:.1e} M")
    assert ok


# ---------------------------------------------------------------- 4

def test_c4_gausson():
    start = time.perf_counter()
    g = Grid(1, 512, 16.0)
    phi = np.exp(0.5 - g.x**2)
    snaps, _ = run(WaveField(g, phi), ModelParams(-1.0), 5.0, 1e-3, list(np.linspace(0, 5, 51)))
    dev = max(float(np.max(np.abs(np.abs(u.values) - phi))) for u in snaps) / float(np.max(phi))
    elapsed = time.perf_counter() - start
    ok = dev <= 1e-6 and elapsed <= 30
    record("4", ok, f"max relative L-inf modulus deviation {dev:.2e}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 5

@pytest.fixture(scope="module")
def gauge_runs():
    u1 = c2_run(1e-3)[0][-1].values
    scaled = {}
    for kappa in (0.5, 2.0):
        u0 = WaveField(C2_GRID, kappa * np.exp(-0.5 * C2_GRID.x**2))
        scaled[kappa] = run(u0, ModelParams(1.0), 1.0, 1e-3)[0][-1].values
    return u1, scaled


def gauge_error(u1, scaled, sign):
    return {k: float(np.max(np.abs(v - k * u1 * np.exp(sign * 2j * math.log(k)))))
            for k, v in scaled.items()}


def test_c5_gauge_covariance(gauge_runs):
    # from the equation, kappa u solves it up to the phase exp(-2 i t lam ln kappa)
    errs = gauge_error(*gauge_runs, sign=-1)
    ok = max(errs.values()) <= 1e-6
    record("5", ok, "max pointwise error with phase exp(-2it lam ln k): "
           + ", ".join(f"k={k:g}: {e:.1e}" for k, e in errs.items()))
    assert ok


@pytest.mark.xfail(strict=True, reason="the phase sign as literally stated is inconsistent "
                   "with the equation; the derived sign is tested above")
def test_c5_gauge_literal_sign(gauge_runs):
    errs = gauge_error(*gauge_runs, sign=+1)
    ok = max(errs.values()) <= 1e-6
    record("5.literal", ok, "phase exp(+2it lam ln k) as stated: "
           + ", ".join(f"k={k:g}: {e:.2f}" for k, e in errs.items()))
    assert ok


# ---------------------------------------------------------------- 6

def test_c6_sobolev_growth(gauss_1e6):
    ts = np.array([1e3, 1e4, 1e5, 1e6])
    grad2 = np.array([gauss_1e6.gradient_norm_sq(t) for t in ts])
    slope = np.polyfit(np.log(ts), grad2, 1)[0]
    target = 2 * 1.0 * 1 * gauss_1e6.init.mass()
    slope_err = abs(slope / target - 1)
    drifts = {}
    for s in (0.25, 0.5, 0.75):
        c = np.array([gauss_1e6.sobolev_norm(t, s) / math.log(t) ** (s / 2) for t in ts])
        drifts[s] = float(c.max() / c.min() - 1)
    ok = slope_err <= 0.1 and max(drifts.values()) <= 0.2
    record("6", ok, f"slope/target-1={slope_err:.3f}; constant drift "
           + ", ".join(f"s={s:g}: {d:.3f}" for s, d in drifts.items()))
    assert ok


# ---------------------------------------------------------------- 7

def profile_metrics(v):
    rho = DensityProfile.from_field(v)
    _, m1, m2 = moments(rho)
    target = 0.5 * rho.grid.d * gamma_norm_sq(rho.grid.d)
    return {"m1": float(np.max(np.abs(m1))), "m2": abs(m2 - target) / target,
            "E_ent": relative_entropy(rho), "W2": wasserstein2_1d(rho, gamma_sq(rho.grid))}


def moment_targets(metrics_by_t, key):
    late, early = metrics_by_t[1e3], metrics_by_t[1e2]
    ok = (late["m1"] <= 0.05 and late["m2"] <= 0.05 and late["E_ent"] <= 0.05
          and late["W2"] <= 0.05)
    decreasing = all(late[k] < early[k] for k in ("m2", "E_ent", "W2"))
    detail = (f"t=1e3: |m1|={late['m1']:.1e}, m2 err={100 * late['m2']:.2f}%, "
              f"E_ent={late['E_ent']:.2e}, W2={late['W2']:.4f}; decreasing from 1e2: {decreasing}")
    return record(key, ok and decreasing, detail)


def test_c7_moments_closed_form(gauss_1e6, tau_1e6):
    norm = math.sqrt(gauss_1e6.init.mass())
    metrics = {}
    for t in (1e2, 1e3):
        L = 12 * max(gauss_1e6.r(t)[0], tau_1e6(t)[0])
        u = gaussian_field(gauss_1e6, t, Grid(1, 2048, L))
        metrics[t] = profile_metrics(to_v(u, tau_1e6, norm))
    assert moment_targets(metrics, "7")


# ---------------------------------------------------------------- 8

def test_c8_momentum_pair():
    g = Grid(1, 1024, 40.0)
    traj = solve_tau(1.0, 2.0)
    u0 = WaveField(g, np.exp(-0.5 * (g.x - 0.5) ** 2))
    norm = u0.norm()
    res = {}
    for m in (200, 400):
        ts = np.linspace(0.0, 2.0, m + 1)
        snaps, _ = run(u0, ModelParams(1.0), 2.0, 1e-3, list(ts))
        pairs = [momentum_pair(to_v(u, traj, norm)) for u in snaps]
        tau = [traj(t)[0] for t in ts]
        res[m] = momentum_pair_residuals(ts, [p[0] for p in pairs], [p[1] for p in pairs], tau, 1.0)
    ratios = [res[200][i] / res[400][i] for i in range(2)]
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    record("8", ok, f"residuals {res[200][0]:.1e}/{res[200][1]:.1e} -> {res[400][0]:.1e}/"
           f"{res[400][1]:.1e}, ratios {ratios[0]:.2f}, {ratios[1]:.2f}")
    assert ok


# ---------------------------------------------------------------- 9

def test_c9_log_inequality_fuzz():
    rng = np.random.default_rng(20240607)
    n = 1_000_000

    def sample(k):
        mag = 10.0 ** rng.uniform(-12, 12, k)
        return mag * np.exp(2j * np.pi * rng.random(k))

    z1 = sample(n)
    z2 = sample(n)
    # a quarter of the pairs are close to each other, where the bound is tight
    near = rng.random(n) < 0.25
    z2[near] = z1[near] * (1 + 10.0 ** rng.uniform(-8, 0, near.sum()) * np.exp(
        2j * np.pi * rng.random(near.sum())))
    z1[rng.random(n) < 0.01] = 0.0
    violations = int(np.sum(~log_inequality_check(z1, z2)))
    record("9", violations == 0, f"{violations} violations in {n} pairs")
    assert violations == 0


# ---------------------------------------------------------------- 10

def test_c10_l2_stability():
    g = Grid(1, 1024, 40.0)
    params = ModelParams(1.0, epsilon=1e-12)
    u0 = WaveField(g, np.exp(-0.5 * g.x**2))
    ts = list(np.linspace(0, 2, 41))
    base, _ = run(u0, params, 2.0, 1e-3, ts)
    worst = 0.0
    perturbations = (1e-3 * (1 + 1j) * np.exp(-0.5 * (g.x - 1) ** 2),
                     1e-2 * np.exp(-0.5 * g.x**2 + 2j * g.x),
                     1e-2 * np.exp(-2 * (g.x + 0.7) ** 2))
    for delta in perturbations:
        pert, _ = run(u0.with_values(u0.values + delta), params, 2.0, 1e-3, ts)
        d0 = math.sqrt(np.sum(np.abs(delta) ** 2) * g.h)
        for a, b, t in zip(base, pert, ts):
            sep = math.sqrt(np.sum(np.abs(a.values - b.values) ** 2) * g.h)
            worst = max(worst, sep / (d0 * math.exp(4 * params.lam * t)))
    ok = worst <= 1.05
    record("10", ok, f"max separation / (|delta| e^(4 lam t)) = {worst:.4f}")
    assert ok


# ---------------------------------------------------------------- 11

def test_c11_fokker_planck():
    g = Grid(1, 512, 12.0)
    w = g.h
    g2 = gamma_sq(g)
    stat = float(np.sum(np.abs(fp_solve(g2, 3.0).values - g2.values))) * w
    r0 = gamma_sq(g, center=1.5, scale=1.3)
    semi = float(np.sum(np.abs(fp_solve(r0, 1.0).values
                               - fp_solve(fp_solve(r0, 0.4), 0.6).values))) * w
    s = np.linspace(1.0, 3.0, 9)
    eq = 0.5 * gamma_norm_sq(1)
    rho = [fp_solve(r0, si) for si in s]
    m2 = np.array([moments(r)[2] - moments(r)[1][0] ** 2 / gamma_norm_sq(1) for r in rho])
    m2_rate = -np.polyfit(s, np.log(np.abs(m2 - eq)), 1)[0]
    l1 = np.array([np.sum(np.abs(r.values - g2.values)) * w for r in rho])
    l1_rate = -np.polyfit(s, np.log(l1), 1)[0]
    ok = (stat <= 1e-8 and semi <= 1e-8 and abs(m2_rate / 4 - 1) <= 0.02
          and abs(l1_rate / 2 - 1) <= 0.1)
    record("11", ok, f"stationarity {stat:.1e}, semigroup {semi:.1e}, "
           f"m2 exponent {m2_rate:.4f}, L1 exponent {l1_rate:.3f}")
    assert ok


# ---------------------------------------------------------------- 12

@pytest.fixture(scope="module")
def power_runs():
    start = time.perf_counter()
    runs = {dt: c2_run(dt, mu=1.0) for dt in (1e-3, 5e-4, 6.25e-5)}
    return runs, time.perf_counter() - start


def test_c12_repeat_oracle_and_conservation(power_runs):
    runs, elapsed = power_runs
    # no closed form with mu > 0: compare with a run at dt / 16, which biases
    # the halving ratio only from 4 to (1 - 1/256) / (1/4 - 1/256) = 4.05
    ref = runs[6.25e-5][0][-1].values
    errs = [rel_l2(runs[dt][0][-1].values, ref) for dt in (1e-3, 5e-4)]
    ratio = errs[0] / errs[1]
    md, ed, jd = conservation(runs[1e-3][1])
    ok = errs[0] <= 1e-4 and 3.5 <= ratio <= 4.5 and md <= 1e-10 and ed <= 1e-5 and jd <= 1e-8
    record("12.2-3", ok, f"self-convergence error {errs[0]:.2e}, ratio {ratio:.2f}; "
           f"mass {md:.1e}, E_reg {ed:.1e}, momentum {jd:.1e} M; {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def power_long_run(tau_1e6):
    start = time.perf_counter()
    params = ModelParams(1.0, mu=1.0, sigma=1.0)
    g = Grid(1, 16384, 8.0)
    u0 = WaveField(g, np.exp(-0.5 * g.x**2))
    times = [0.0] + list(np.geomspace(0.1, 1e3, 21))
    traj = solve_tau(1.0, 1e3)
    profiles, recs, hist = run_rescaled(u0, params, traj, times, dt_rel=1e-3)
    for v, rec in zip(profiles, recs):
        diagnose_profile(v, traj, params, u0.norm(), rec)
    return profiles, recs, hist, time.perf_counter() - start


def test_c12_pseudo_energy(power_long_run):
    _, recs, _, elapsed = power_long_run
    pe = np.array([r.pseudo_E for r in recs])
    rise = float(np.max(np.diff(pe)))
    e = np.array([r.energy for r in recs])
    drift = float(np.max(np.abs(e - e[0])) / abs(e[0]))
    ok = rise <= 1e-8 and elapsed <= 600
    record("12.pseudo", ok, f"largest pseudo-energy increment {rise:.1e} over {len(pe)} snapshots; "
           f"energy drift {drift:.1e}; {elapsed:.0f}s")
    assert ok


def test_c12_leak_monitor(power_long_run):
    _, recs, hist, _ = power_long_run
    worst = max(h["shell_fraction"] for h in hist)
    ok = worst <= 1e-6
    record("12.leak", ok, f"max boundary-shell mass fraction {worst:.1e}")
    assert ok


@pytest.mark.xfail(strict=True, reason="with mu = 1 the second moment is still 8.9% above "
                   "its limit at t = 1e3; converged in n and dt, the relaxation is slower")
def test_c12_moment_targets(power_long_run):
    profiles, *_ = power_long_run
    metrics = {}
    for target in (1e2, 1e3):
        v = min(profiles, key=lambda p: abs(math.log(max(p.t, 1e-300) / target)))
        metrics[target] = profile_metrics(v)
    assert moment_targets(metrics, "12.moments")

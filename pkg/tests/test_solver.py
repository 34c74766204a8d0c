import math

import numpy as np
import pytest

from conftest import gaussian_wave
from lognls import (GaussianInit, Grid, ModelParams, WaveField, evolve_gaussian, gaussian_field,
                    run, run_rescaled, solve_tau, step_strang)
from lognls.errors import InvalidParameterError, MassLeakError, NumericalBlowupError
from lognls.solver import (conserved_record, energy, kinetic, log_inequality_check, mass, momentum,
                           pad_field, rescaled_record, run_growing, shell_fraction)


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        ModelParams(0.0)
    with pytest.raises(InvalidParameterError):
        ModelParams(1.0, mu=-1.0)
    with pytest.raises(InvalidParameterError):
        ModelParams(1.0, mu=1.0, sigma=0.0)
    with pytest.raises(InvalidParameterError):
        ModelParams(1.0, epsilon=-1e-3)
    with pytest.raises(InvalidParameterError):
        ModelParams(1.0, mu=1.0, sigma=2.5).check_dimension(3)
    ModelParams(1.0, mu=1.0, sigma=1.5).check_dimension(3)


def test_step_preserves_mass(grid1, params):
    u = gaussian_wave(grid1, x0=0.3)
    u = u.with_values(u.values * np.exp(0.7j * grid1.x))
    v = step_strang(u, params, 0.01)
    assert v.t == pytest.approx(0.01)
    assert mass(v) == pytest.approx(mass(u), rel=1e-13)


def test_step_rejects_bad_input(grid1, params):
    u = gaussian_wave(grid1)
    with pytest.raises(InvalidParameterError):
        step_strang(u, params, 0.0)
    bad = u.with_values(np.where(grid1.x == 0, np.nan, u.values))
    with pytest.raises(NumericalBlowupError):
        step_strang(bad, params, 0.01)


def test_free_flow_of_plane_wave():
    # with mu = 0 and constant modulus the log phase is spatially uniform
    g = Grid(1, 64, math.pi)
    u = WaveField(g, np.exp(3j * g.x))
    p = ModelParams(1.0, epsilon=0.0)
    dt = 0.05
    v = step_strang(u, p, dt)
    expected = np.exp(3j * g.x - 1j * dt * 4.5)
    np.testing.assert_allclose(v.values, expected, atol=1e-13)


def test_quantities_of_gaussian(grid1, params):
    u = gaussian_wave(grid1)
    assert mass(u) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert kinetic(u) == pytest.approx(0.5 * math.sqrt(math.pi), rel=1e-12)
    # int rho ln rho for rho = exp(-x^2) is -sqrt(pi) / 2
    assert energy(u, params) == pytest.approx(0.25 * math.sqrt(math.pi) - 0.5 * math.sqrt(math.pi),
                                              rel=1e-12)
    # the regularized density G_eps(rho) ~ rho ln rho - rho, so E_reg ~ E - lam M
    assert energy(u, params, regularized=True) == pytest.approx(
        energy(u, params) - params.lam * mass(u), abs=1e-9)
    boosted = u.with_values(u.values * np.exp(1.5j * grid1.x))
    assert momentum(boosted)[0] == pytest.approx(1.5 * math.sqrt(math.pi), rel=1e-12)


def test_power_term_in_energy(grid1):
    u = gaussian_wave(grid1)
    p0, p1 = ModelParams(1.0), ModelParams(1.0, mu=2.0, sigma=1.0)
    # mu / 2 int rho^2 = int exp(-2 x^2) = sqrt(pi / 2)
    assert energy(u, p1) - energy(u, p0) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)


def test_run_schedule_and_records(params):
    g = Grid(1, 512, 20.0)
    u0 = gaussian_wave(g)
    snaps, recs = run(u0, params, 1.0, 1e-2, [0.0, 0.25, 0.6, 1.0])
    assert [s.t for s in snaps] == [0.0, 0.25, 0.6, 1.0]
    assert recs[-1].mass == pytest.approx(recs[0].mass, rel=1e-12)
    snaps, recs = run(u0, params, 0.5, 1e-2)
    assert [s.t for s in snaps] == [0.0, 0.5]
    with pytest.raises(InvalidParameterError):
        run(u0, params, 1.0, 1e-2, [0.5, 0.25])
    with pytest.raises(InvalidParameterError):
        run(u0, params, 1.0, 1e-2, [0.0, 2.0])
    with pytest.raises(InvalidParameterError):
        run(u0, params, 1.0, -1e-2)


def test_run_detects_leak(params):
    g = Grid(1, 256, 6.0)
    u0 = gaussian_wave(g)
    with pytest.raises(MassLeakError) as info:
        run(u0, params, 3.0, 1e-2)
    assert info.value.shell_fraction > 1e-6


def test_run_matches_closed_form_short(params):
    traj = evolve_gaussian(GaussianInit(1.0, (1.0,)), 1.0, 0.5)
    g = Grid(1, 512, 20.0)
    snaps, _ = run(gaussian_field(traj, 0.0, g), params, 0.5, 1e-3)
    exact = gaussian_field(traj, 0.5, g)
    err = np.linalg.norm(snaps[-1].values - exact.values) / np.linalg.norm(exact.values)
    assert err < 1e-5


def test_pad_field_keeps_values(grid1):
    u = gaussian_wave(grid1)
    w = pad_field(u)
    assert w.grid.n == 2 * grid1.n and w.grid.L == 2 * grid1.L
    assert w.grid.h == grid1.h
    assert mass(w) == pytest.approx(mass(u), rel=1e-15)
    assert shell_fraction(w, 0.25) < shell_fraction(u, 0.25) + 1e-300


def test_run_growing_enlarges_box(params):
    g = Grid(1, 512, 12.0)
    u0 = gaussian_wave(g)
    snaps, recs, hist = run_growing(u0, params, [0.0, 4.0], dt0=2e-3)
    assert snaps[-1].grid.L > g.L
    assert max(h["shell_fraction"] for h in hist) < 1e-6
    assert recs[-1].mass == pytest.approx(recs[0].mass, rel=1e-10)


def test_rescaled_record_matches_physical_at_start():
    g = Grid(1, 1024, 12.0)
    p = ModelParams(1.0, mu=0.5, sigma=1.0)
    traj = solve_tau(1.0, 1.0)
    u0 = gaussian_wave(g, a=1.3, b=1.1)
    v0 = WaveField(g, u0.values / math.sqrt(u0.mass() / math.sqrt(math.pi)))
    rec = rescaled_record(v0, p, traj, u0.norm())
    ref = conserved_record(u0, p)
    assert rec.mass == pytest.approx(ref.mass, rel=1e-12)
    assert rec.energy == pytest.approx(ref.energy, rel=1e-10)
    assert rec.energy_reg == pytest.approx(ref.energy_reg, rel=1e-10)


def test_run_rescaled_matches_closed_form():
    traj = solve_tau(1.0, 50.0)
    gtraj = evolve_gaussian(GaussianInit(1.0, (1.0,)), 1.0, 50.0)
    g = Grid(1, 2048, 10.0)
    u0 = gaussian_wave(g)
    p = ModelParams(1.0, epsilon=0.0)
    prof, recs, _ = run_rescaled(u0, p, traj, [0.0, 5.0, 50.0], dt_rel=1e-3)
    assert recs[-1].energy == pytest.approx(recs[0].energy, abs=1e-6)
    for v in prof[1:]:
        tau, tau_dot = traj(v.t)
        a, b = gtraj.a(v.t)[0], gtraj.b(v.t)
        y = g.x
        x = tau * y
        # closed form pulled back to the profile frame
        u = b * np.exp(-0.5 * a * x**2)
        exact = math.sqrt(tau) * u * np.exp(-0.5j * tau_dot * tau * y**2)
        err = np.linalg.norm(v.values - exact) / np.linalg.norm(exact)
        assert err < 1e-4


def test_run_rescaled_requires_start_at_zero(params):
    g = Grid(1, 256, 8.0)
    with pytest.raises(InvalidParameterError):
        run_rescaled(WaveField(g, gaussian_wave(g).values, 1.0), params, solve_tau(1.0, 2.0), [1.0, 2.0])


def test_log_inequality_examples():
    assert log_inequality_check(1.0, 1.0)
    assert log_inequality_check(0.0, 1e-300)
    assert log_inequality_check(1 + 1j, 2 - 3j)
    z1 = np.array([0.0, 1.0, 1e-8j])
    z2 = np.array([1.0, 1e6, 1e-8])
    assert log_inequality_check(z1, z2).all()

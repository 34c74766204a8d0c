"""Logarithmic NLS: universal dispersion, Gaussian closed forms, a split-step
solver, rescaled-profile diagnostics and the Fokker-Planck reference flow."""

from .diagnostics import (DensityProfile, gamma_sq, moments, pseudo_energy, relative_entropy,
                          sobolev_norm, to_v, wasserstein2_1d)
from .dispersion import TauTrajectory, ell, s_of_t, solve_tau, tau_asymptotic
from .fokker_planck import apply_L, fp_compare, fp_solve, hydro_fields
from .gaussian_ode import GaussianInit, evolve_gaussian, gaussian_field
from .grid import Grid, WaveField
from .records import DiagnosticsRecord
from .solver import ModelParams, run, run_rescaled, step_strang

__version__ = "0.1.0"

"""Uniform periodic grids and complex fields sampled on them."""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidParameterError, NumericalBlowupError

__all__ = ["Grid", "WaveField"]


@dataclass(frozen=True)
class Grid:
    """Periodic box ``[-L, L)^d`` with ``n`` points per axis.

    Frequencies are ``k = pi m / L`` for integer ``m`` in FFT order.
    """

    d: int
    n: int
    L: float

    def __post_init__(self):
        problems = []
        if self.d not in (1, 2, 3):
            problems.append(f"d must be 1, 2 or 3, got {self.d!r}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 16 and self.n & (self.n - 1) == 0):
            problems.append(f"n must be a power of two >= 16, got {self.n!r}")
        if not self.L > 0:
            problems.append(f"L must be positive, got {self.L!r}")
        if problems:
            raise InvalidParameterError("; ".join(problems))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return 2.0 * self.L / self.n

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def weight(self):
        """Quadrature weight ``h^d``."""
        return self.h ** self.d

    @cached_property
    def x(self):
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def k(self):
        return 2.0 * math.pi * np.fft.fftfreq(self.n, d=self.h)

    def mesh(self):
        """Sparse coordinate arrays, one per axis, broadcastable to ``shape``."""
        return np.meshgrid(*([self.x] * self.d), indexing="ij", sparse=True)

    def kmesh(self):
        return np.meshgrid(*([self.k] * self.d), indexing="ij", sparse=True)

    @cached_property
    def k2(self):
        out = np.zeros(self.shape)
        for kj in self.kmesh():
            out = out + kj**2
        return out

    @cached_property
    def _k_odd(self):
        # derivative wavenumbers with the Nyquist mode zeroed
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return k

    def integrate(self, values):
        return float(np.real(np.sum(values)) * self.weight)

    def gradient(self, values):
        """Spectral gradient; returns a list of ``d`` arrays."""
        vh = np.fft.fftn(values)
        out = []
        for j in range(self.d):
            shape = [1] * self.d
            shape[j] = self.n
            kj = self._k_odd.reshape(shape)
            out.append(np.fft.ifftn(1j * kj * vh))
        if not np.iscomplexobj(values):
            out = [g.real for g in out]
        return out

    def laplacian(self, values):
        out = np.fft.ifftn(-self.k2 * np.fft.fftn(values))
        return out if np.iscomplexobj(values) else out.real

    def scaled(self, factor):
        """Same point count on ``[-L * factor, L * factor)``."""
        return Grid(self.d, self.n, self.L * factor)

    def shell_mask(self, fraction=0.05):
        """Points in the outer ``fraction`` of the box along any axis."""
        edge = self.L * (1.0 - fraction)
        mask = np.zeros(self.shape, dtype=bool)
        for x in self.mesh():
            mask = mask | (np.abs(x) >= edge)
        return mask

    def to_dict(self):
        return {"d": self.d, "n": self.n, "L": self.L}


@dataclass(frozen=True)
class WaveField:
    """Complex field ``values`` on ``grid`` at time ``t``."""

    grid: Grid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise InvalidParameterError(
                f"values have shape {v.shape}, grid expects {self.grid.shape}")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "t", float(self.t))

    def check_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise NumericalBlowupError(f"non-finite values at t={self.t:g}", snapshot=self)
        return self

    def density(self):
        return np.abs(self.values) ** 2

    def mass(self):
        return float(np.sum(self.density()) * self.grid.weight)

    def norm(self):
        return math.sqrt(self.mass())

    def with_values(self, values, t=None):
        return WaveField(self.grid, values, self.t if t is None else t)

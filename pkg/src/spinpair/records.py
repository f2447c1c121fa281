"""Sampled data containers shared by the simulation and analysis modules."""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidInputError


class Measured(NamedTuple):
    """A value with its 1-sigma uncertainty."""

    value: float
    sigma: float = 0.0

    def __str__(self):
        return f"{self.value:.6g} +- {self.sigma:.2g}"


def _as_grid(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-d array")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise InvalidInputError(f"{name} must be strictly increasing")
    return arr


def _as_values(values, grid, name):
    arr = np.asarray(values, dtype=float)
    if arr.shape != grid.shape:
        raise InvalidInputError(
            f"{name} has shape {arr.shape}, grid has shape {grid.shape}")
    return arr


@dataclass
class TransientRecord:
    """Q(tau) transient. ``tau_ns`` is the pulse-length grid, ``q`` the charge in a.u.

    ``meta`` carries acquisition details such as ``b1_label``, ``seed``,
    ``n_shots``, ``noise_sigma`` and the components used to generate it.
    """

    tau_ns: np.ndarray
    q: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau_ns = _as_grid(self.tau_ns, "tau_ns")
        self.q = _as_values(self.q, self.tau_ns, "q")

    @property
    def step_ns(self):
        if self.tau_ns.size < 2:
            raise InvalidInputError("a single-point grid has no step")
        return float(self.tau_ns[1] - self.tau_ns[0])

    def is_uniform(self, rtol=1e-9):
        if self.tau_ns.size < 2:
            return False
        d = np.diff(self.tau_ns)
        return bool(np.all(np.abs(d - d[0]) <= rtol * abs(d[0])))


@dataclass
class SweepRecord:
    """Q(B0) field sweep; ``meta`` carries ``angle_deg``, ``omega_carrier`` and ``seed``."""

    b0_mT: np.ndarray
    q: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.b0_mT = _as_grid(self.b0_mT, "b0_mT")
        self.q = _as_values(self.q, self.b0_mT, "q")


@dataclass
class SpectrumRecord:
    """FFT magnitude versus ordinary frequency in MHz."""

    freq_MHz: np.ndarray
    mag: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freq_MHz = _as_grid(self.freq_MHz, "freq_MHz")
        self.mag = _as_values(self.mag, self.freq_MHz, "mag")

    @property
    def bin_MHz(self):
        return float(self.freq_MHz[1] - self.freq_MHz[0])


def default_tau_grid(stop_ns=800.0, step_ns=2.0, start_ns=0.0):
    """Default acquisition grid: 0 to 800 ns in 2 ns steps (401 points)."""
    n = int(round((stop_ns - start_ns) / step_ns)) + 1
    return start_ns + step_ns * np.arange(n)

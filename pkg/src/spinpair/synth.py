"""Synthetic pEDMR measurement records: Q(tau) transients, Q(B0) sweeps and
the shot-accumulation sensitivity model."""

from dataclasses import dataclass, asdict
import math

import numpy as np

from .errors import InvalidInputError
from .records import SweepRecord, TransientRecord, _as_grid, default_tau_grid
from .constants import NS_TO_US


@dataclass(frozen=True)
class OscComponent:
    """One Rabi component: omega in rad/us, decay_time in ns, phase in rad."""

    omega: float
    amplitude: float
    decay_time: float = math.inf
    phase: float = 0.0

    def __post_init__(self):
        if not self.decay_time > 0:
            raise InvalidInputError("decay_time must be positive")

    def __call__(self, tau_ns):
        t = np.asarray(tau_ns, dtype=float)
        envelope = np.exp(-t / self.decay_time)
        return self.amplitude * envelope * (1 - np.cos(self.omega * t * NS_TO_US + self.phase))


def transient_model(components, tau_ns):
    """Noiseless sum of damped (1 - cos) components."""
    tau_ns = np.asarray(tau_ns, dtype=float)
    q = np.zeros_like(tau_ns)
    for c in components:
        q += c(tau_ns)
    return q


def synthesize_transient(components, tau_grid=None, noise_sigma=0.0, seed=None, b1_label=None):
    """Q(tau) = sum_j A_j exp(-tau/T_j) (1 - cos(Omega_j tau + phi_j)) + white noise.

    The same seed always gives the same record.
    """
    tau_grid = _as_grid(default_tau_grid() if tau_grid is None else tau_grid, "tau_grid")
    if noise_sigma < 0:
        raise InvalidInputError("noise_sigma must be nonnegative")
    q = transient_model(components, tau_grid)
    if noise_sigma > 0:
        q = q + np.random.default_rng(seed).normal(0.0, noise_sigma, tau_grid.size)
    meta = {
        "b1_label": b1_label,
        "seed": seed,
        "n_shots": 1,
        "noise_sigma": noise_sigma,
        "components": [asdict(c) for c in components],
    }
    return TransientRecord(tau_grid, q, meta)


def sweep_model(peaks, b0_grid):
    b0_grid = np.asarray(b0_grid, dtype=float)
    q = np.zeros_like(b0_grid)
    for pk in peaks:
        q += pk(b0_grid)
    return q


def synthesize_sweep(peaks, b0_grid, noise_sigma=0.0, seed=None, angle_deg=None,
                     omega_carrier=None):
    """Sum of Lorentzian lines on a field grid (mT) plus white noise."""
    b0_grid = _as_grid(b0_grid, "b0_grid")
    if noise_sigma < 0:
        raise InvalidInputError("noise_sigma must be nonnegative")
    q = sweep_model(peaks, b0_grid)
    if noise_sigma > 0:
        q = q + np.random.default_rng(seed).normal(0.0, noise_sigma, b0_grid.size)
    meta = {"angle_deg": angle_deg, "omega_carrier": omega_carrier, "seed": seed,
            "noise_sigma": noise_sigma,
            "peaks": [{"center": p.center, "hwhm": p.hwhm, "amplitude": p.amplitude}
                      for p in peaks]}
    return SweepRecord(b0_grid, q, meta)


def noise_for_snr(signal, snr):
    """White-noise sigma giving peak-signal-to-noise ratio ``snr``."""
    if snr <= 0:
        raise InvalidInputError("snr must be positive")
    return float(np.max(np.abs(signal))) / snr


def snr_per_pair(n_shots):
    """Signal-to-noise ratio contributed by one electron-hole pair: sqrt(n)/1e6."""
    if np.any(np.asarray(n_shots) < 1):
        raise InvalidInputError("n_shots must be at least 1")
    return np.sqrt(n_shots) / 1e6


def shots_in(duration_s, repetition_s):
    """Number of accumulated transients in a run of ``duration_s`` seconds."""
    return int(math.floor(duration_s / repetition_s + 1e-9))


def detection_limit(n_shots, snr_required=1.0):
    """Smallest number of responding carrier pairs detectable at ``snr_required``."""
    return snr_required / snr_per_pair(n_shots)


def accumulate(records):
    """Pointwise mean of transients recorded on identical grids."""
    records = list(records)
    if not records:
        raise InvalidInputError("nothing to accumulate")
    grid = records[0].tau_ns
    for r in records[1:]:
        if r.tau_ns.shape != grid.shape or not np.array_equal(r.tau_ns, grid):
            raise InvalidInputError("records have mismatched tau grids")
    q = np.mean([r.q for r in records], axis=0)
    meta = dict(records[0].meta)
    meta["n_shots"] = sum(r.meta.get("n_shots", 1) or 1 for r in records)
    meta["seed"] = [r.meta.get("seed") for r in records]
    return TransientRecord(grid.copy(), q, meta)

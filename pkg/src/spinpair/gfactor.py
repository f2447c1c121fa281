"""g factors from resonance fields and axial anisotropy of angle-resolved sweeps.

Angles are measured between B0 and the (111) surface normal, so a sample
orientation of 90 degrees means B0 lies in the interface plane.
"""

from dataclasses import dataclass

import numpy as np

from .constants import GAMMA_PER_G
from .errors import InvalidInputError
from .fitting import solve_damped_lsq
from .records import Measured


def g_factor(omega_carrier, b_res):
    """Lande factor from the resonance condition omega = g gamma B (rad/us, mT)."""
    b_res = np.asarray(b_res, dtype=float)
    if np.any(b_res <= 0):
        raise InvalidInputError("resonance field must be positive")
    g = omega_carrier / (GAMMA_PER_G * b_res)
    return float(g) if g.ndim == 0 else g


def resonance_omega(g, b_res):
    """Carrier angular frequency (rad/us) that puts factor ``g`` on resonance at ``b_res`` mT."""
    return g * GAMMA_PER_G * b_res


def resonance_field(g, omega_carrier):
    return omega_carrier / (g * GAMMA_PER_G)


def axial_g(theta_deg, g_par, g_perp):
    """g(theta) = sqrt(g_par^2 cos^2 theta + g_perp^2 sin^2 theta)."""
    if g_par <= 0 or g_perp <= 0:
        raise InvalidInputError("principal g values must be positive")
    th = np.radians(theta_deg)
    return np.sqrt((g_par * np.cos(th)) ** 2 + (g_perp * np.sin(th)) ** 2)


@dataclass
class AngleSeries:
    """Fitted g value with 1-sigma error for each sample orientation."""

    angle_deg: np.ndarray
    g: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.angle_deg = np.asarray(self.angle_deg, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), self.g.shape).copy()
        if not (self.angle_deg.shape == self.g.shape and self.g.ndim == 1):
            raise InvalidInputError("angles and g values must be 1-d and of equal length")
        if np.any((self.angle_deg < 0) | (self.angle_deg > 90)):
            raise InvalidInputError("angles must lie in [0, 90] degrees")
        if np.any((self.g <= 1.5) | (self.g >= 2.5)):
            raise InvalidInputError("g values outside the (1.5, 2.5) sanity window")
        if np.any(self.sigma <= 0):
            raise InvalidInputError("g uncertainties must be positive")

    def __len__(self):
        return self.g.size


@dataclass
class AnisotropyFit:
    g_par: Measured
    g_perp: Measured
    difference: Measured  # g_par - g_perp with correlated error
    verdict: str  # "isotropic" or "anisotropic"
    fit: object

    @property
    def effect_size(self):
        return abs(self.difference.value) / self.difference.sigma


def fit_anisotropy(series, threshold=2.0):
    """Weighted fit of the axial model; isotropic when |g_par - g_perp| < threshold * sigma.

    The point errors in ``series`` are taken as absolute, so the parameter
    covariance is not rescaled by the scatter.
    """
    if len(np.unique(series.angle_deg)) < 3:
        raise InvalidInputError("need at least three distinct angles")
    th = series.angle_deg
    c2, s2 = np.cos(np.radians(th)) ** 2, np.sin(np.radians(th)) ** 2

    def resid(p):
        return axial_g(th, p[0], p[1]) - series.g

    def jac(p):
        g = np.sqrt(p[0] ** 2 * c2 + p[1] ** 2 * s2)
        return np.column_stack([p[0] * c2 / g, p[1] * s2 / g])

    # seed from the end-point-weighted linear model g ~ g_perp + (g_par - g_perp) cos^2
    slope, icpt = np.polyfit(c2, series.g, 1, w=1 / series.sigma)
    res = solve_damped_lsq(resid, [icpt + slope, icpt], jac=jac, sigma=series.sigma,
                           absolute_sigma=True, names=("g_par", "g_perp"))
    (gp, gs), cov = res.params, res.covariance
    diff_sigma = float(np.sqrt(cov[0, 0] + cov[1, 1] - 2 * cov[0, 1]))
    diff = Measured(gp - gs, diff_sigma)
    verdict = "isotropic" if abs(diff.value) < threshold * diff.sigma else "anisotropic"
    return AnisotropyFit(Measured(gp, res.errors[0]), Measured(gs, res.errors[1]), diff, verdict, res)

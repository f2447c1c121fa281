"""Physical constants and the unit conventions used throughout the package.

Internal units: fields in mT, pulse lengths and grids in ns, angular
frequencies in rad/us. Frequencies that cross an I/O boundary are ordinary
MHz (cycles per us).
"""

from dataclasses import dataclass, field
import math

from scipy import constants as _sc


@dataclass(frozen=True)
class PhysConstants:
    mu_B: float = _sc.physical_constants["Bohr magneton"][0]  # J/T
    hbar: float = _sc.hbar  # J s
    gamma_per_g: float = field(init=False)  # rad us^-1 mT^-1 per unit g

    def __post_init__(self):
        # (J/T)/(J s) = rad s^-1 T^-1; 1 T = 1e3 mT, 1 s = 1e6 us
        object.__setattr__(self, "gamma_per_g", self.mu_B / self.hbar * 1e-3 * 1e-6)

    @property
    def mhz_per_mt_per_g(self):
        """Ordinary-frequency Larmor factor, about 13.996 MHz/mT for g=1."""
        return self.gamma_per_g / (2 * math.pi)


CONSTANTS = PhysConstants()
GAMMA_PER_G = CONSTANTS.gamma_per_g

NS_TO_US = 1e-3


def mhz_to_rad_per_us(nu):
    return 2 * math.pi * nu


def rad_per_us_to_mhz(omega):
    return omega / (2 * math.pi)

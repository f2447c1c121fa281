import math

import numpy as np
import pytest

from spinpair.constants import GAMMA_PER_G, CONSTANTS
from spinpair.quantum import SpinPairParams
from spinpair.spectral import default_band, fft_magnitude


def dominant_frequency(record, pad=4):
    """Frequency (MHz) of the largest FFT magnitude outside the DC region, and the bin width."""
    sp = fft_magnitude(record, zero_pad_factor=pad)
    fmin, fmax = default_band(sp)
    sel = (sp.freq_MHz >= fmin) & (sp.freq_MHz <= fmax)
    i = np.argmax(sp.mag[sel])
    return sp.freq_MHz[sel][i], sp.bin_MHz


def b1_for(gamma_b1_MHz, g=2.008):
    """Linear microwave amplitude (mT) with g * gamma * b1 / 2pi = gamma_b1_MHz."""
    return 2 * math.pi * gamma_b1_MHz / (g * GAMMA_PER_G)


def pair_with_split(split_MHz, g_a=2.008, B0=350.0, J_MHz=0.0, Dd_MHz=0.0):
    g_b = g_a - split_MHz / (CONSTANTS.mhz_per_mt_per_g * B0)
    return SpinPairParams(g_a, g_b, 2 * math.pi * J_MHz, 2 * math.pi * Dd_MHz, B0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

"""FFT of Rabi transients, the (Omega_L, Delta_L, Omega_H, Delta_H) component table,
and the two inversion formulas built on Rabi's formula.

Frequencies in this module are ordinary MHz. Widths in the component table
are *decay-equivalent* half widths, 1/(2 pi T) for a component decaying with
time constant T. The raw Lorentzian HWHM fitted to a magnitude spectrum is
wider than that: the magnitude of a damped tone is the square root of a
Lorentzian, and a finite record adds truncation broadening. The mapping is
calibrated by pushing a noiseless damped tone through the same FFT and fit;
see :func:`width_calibration`.
"""

from dataclasses import dataclass, field, asdict
from functools import lru_cache
import math

import numpy as np
from scipy import special

from .constants import CONSTANTS
from .errors import (InconsistentMeasurementError, InitializationError, InvalidInputError,
                     RankDeficiencyError)
from .fitting import fit_lorentzians
from .records import Measured, SpectrumRecord

WINDOWS = ("rectangular", "hann")


def _window(name, n):
    name = name.lower()
    if name == "rectangular":
        return np.ones(n)
    if name == "hann":
        return np.hanning(n)
    raise InvalidInputError(f"unknown window {name!r}; choose from {WINDOWS}")


def _magnitude(q, dt_ns, window, pad):
    n = q.size
    w = _window(window, n)
    x = (q - q.mean()) * w
    nfft = n * pad
    mag = np.abs(np.fft.rfft(x, nfft)) * 2 / w.sum()
    freq = np.fft.rfftfreq(nfft, dt_ns * 1e-3)
    return freq, mag


def fft_magnitude(transient, window="rectangular", zero_pad_factor=4):
    """Magnitude spectrum of the mean-subtracted, windowed, zero-padded transient.

    Scaled so a cosine of amplitude A well inside the band peaks at about A.
    """
    if int(zero_pad_factor) != zero_pad_factor or zero_pad_factor < 1:
        raise InvalidInputError("zero_pad_factor must be an integer >= 1")
    if not transient.is_uniform():
        raise InvalidInputError("FFT needs a uniform tau grid")
    dt = transient.step_ns
    freq, mag = _magnitude(transient.q, dt, window, int(zero_pad_factor))
    meta = {
        "b1_label": transient.meta.get("b1_label"),
        "n_samples": int(transient.q.size),
        "dt_ns": dt,
        "window": window.lower(),
        "zero_pad_factor": int(zero_pad_factor),
    }
    return SpectrumRecord(freq, mag, meta)


def default_band(spectrum):
    """Fit band excluding the DC region (below two resolution bins) and the top 2 % of Nyquist."""
    duration_us = spectrum.meta["n_samples"] * spectrum.meta["dt_ns"] * 1e-3
    return 2.0 / duration_us, 0.98 * spectrum.freq_MHz[-1]


# ----------------------------------------------------------- width calibration

def rice_mean(amplitude, power):
    """Mean of |s + n| for complex Gaussian n with E|n|^2 = ``power``."""
    v = np.asarray(amplitude, dtype=float) ** 2 / power
    lag = (1 + v) * special.i0e(v / 2) + v * special.i1e(v / 2)
    return np.sqrt(np.pi * power / 4) * lag


@lru_cache(maxsize=256)
def width_calibration(n_samples, dt_ns, window, pad, center_MHz, fmin, fmax, noise_power=0.0):
    """Tabulate fitted magnitude HWHM (MHz) against decay-equivalent width (MHz).

    Each entry comes from a component exp(-t/T) (1 - cos(2 pi f t)) of unit
    amplitude on the given grid, transformed and fitted exactly like measured
    data. ``noise_power`` is the expected white-noise contribution to the
    squared magnitude relative to the squared peak height; the kernel
    magnitude is then replaced by the mean magnitude of signal plus complex
    Gaussian noise of that power (see :func:`rice_mean`). Returns ``(equivalent, fitted)`` with ``fitted`` increasing.
    """
    t = np.arange(n_samples) * dt_ns * 1e-3
    duration = n_samples * dt_ns * 1e-3
    equivalent = np.concatenate([[0.0], np.geomspace(0.01 / duration, 5.0 / duration, 48)])
    fitted = []
    for width in equivalent:
        rate = 2 * math.pi * width
        q = np.exp(-rate * t) * (1 - np.cos(2 * math.pi * center_MHz * t))
        f, m = _magnitude(q, dt_ns, window, pad)
        band = (f >= fmin) & (f <= fmax)
        if noise_power:
            m = rice_mean(m, noise_power * m[band].max() ** 2)
        try:
            _, (pk,) = fit_lorentzians(f[band], m[band], 1, smooth=pad)
        except InitializationError:
            # line has merged into the DC lobe; wider entries are meaningless
            break
        fitted.append(pk.hwhm)
    if len(fitted) < 2:
        raise InitializationError(f"cannot calibrate widths at {center_MHz} MHz")
    fitted = np.maximum.accumulate(np.asarray(fitted))
    return equivalent[:fitted.size], fitted


def equivalent_width(fitted_hwhm, spectrum, center_MHz, band=None, amplitude=None,
                     noise_sigma=0.0):
    """Decay-equivalent width (MHz, with 1 sigma) of a fitted magnitude peak.

    ``fitted_hwhm`` is a Measured. When ``noise_sigma`` (per transient sample)
    and the fitted peak ``amplitude`` are given, the calibration includes the
    noise floor, which otherwise narrows the fitted line. Widths narrower than
    the truncation limit map to zero.
    """
    fmin, fmax = band or default_band(spectrum)
    m = spectrum.meta
    power = 0.0
    if noise_sigma and amplitude:
        # white noise adds 4 sigma^2 / N to the expected squared magnitude
        power = float(f"{4 * noise_sigma ** 2 / m['n_samples'] / amplitude ** 2:.2g}")
    eq, fit = width_calibration(m["n_samples"], float(m["dt_ns"]), m["window"],
                                m["zero_pad_factor"], round(float(center_MHz), 3),
                                float(fmin), float(fmax), power)
    w, s = fitted_hwhm
    value = float(np.interp(w, fit, eq))
    slope_idx = np.clip(np.searchsorted(fit, w), 1, fit.size - 1)
    slope = (eq[slope_idx] - eq[slope_idx - 1]) / max(fit[slope_idx] - fit[slope_idx - 1], 1e-300)
    if w > fit[-1]:
        # linear extrapolation beyond the table
        value = float(eq[-1] + (w - fit[-1]) * slope)
    return Measured(value, float(abs(slope) * s))


# ----------------------------------------------------------- component table

@dataclass
class RabiComponents:
    """Fit of one B1 level. Frequencies and widths in MHz with 1 sigma."""

    b1_label: str
    omega_L: Measured
    width_L: Measured
    omega_H: Measured
    width_H: Measured
    b1_scale: float = None
    raw_width_L: Measured = None
    raw_width_H: Measured = None

    def __post_init__(self):
        for name in ("omega_L", "width_L", "omega_H", "width_H", "raw_width_L", "raw_width_H"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, Measured(*v))
        if not self.omega_L.value < self.omega_H.value:
            raise InvalidInputError("omega_L must be below omega_H")
        if any(getattr(self, n).sigma < 0 for n in ("omega_L", "width_L", "omega_H", "width_H")):
            raise InvalidInputError("uncertainties must be nonnegative")


@dataclass
class RabiComponentTable:
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def to_dict(self):
        out = []
        for e in self.entries:
            d = asdict(e)
            for k, v in d.items():
                if isinstance(v, tuple):
                    d[k] = {"value": v[0], "sigma": v[1]}
            out.append(d)
        return {"units": {"frequency": "MHz", "width": "MHz (HWHM)"}, "entries": out}

    @classmethod
    def from_dict(cls, data):
        entries = []
        for d in data["entries"]:
            kw = {}
            for k, v in d.items():
                kw[k] = Measured(v["value"], v["sigma"]) if isinstance(v, dict) else v
            entries.append(RabiComponents(**kw))
        return cls(entries)


def fit_spectrum_peaks(sp, k=2, band=None):
    """Fit ``k`` Lorentzians inside ``band`` and vet them.

    Every peak must stay in the band, have an amplitude above three standard
    errors and sit at least two bins from its neighbours. Returns the peaks
    sorted by center.
    """
    fmin, fmax = band or default_band(sp)
    sel = (sp.freq_MHz >= fmin) & (sp.freq_MHz <= fmax)
    try:
        _, peaks = fit_lorentzians(sp.freq_MHz[sel], sp.mag[sel], k,
                                   smooth=sp.meta.get("zero_pad_factor", 1))
    except InitializationError as exc:
        raise InitializationError(f"{k} peaks not resolvable ({exc})") from exc
    for pk in peaks:
        if not fmin <= pk.center <= fmax:
            raise InitializationError(f"a fitted peak left the band ({pk.center:.4g} MHz)")
        if not pk.amplitude > 3 * pk.amplitude_err:
            raise InitializationError(f"peak at {pk.center:.4g} MHz is not significant")
    if any(b.center - a.center < 2 * sp.bin_MHz for a, b in zip(peaks, peaks[1:])):
        raise InitializationError("two fitted peaks coincide")
    return list(peaks)


def _model_spectrum(sp, centers, widths, amps, noise_power):
    m = sp.meta
    t = np.arange(m["n_samples"]) * m["dt_ns"] * 1e-3
    q = np.zeros_like(t)
    for f, w, a in zip(centers, widths, amps):
        q += a * np.exp(-2 * math.pi * w * t) * (1 - np.cos(2 * math.pi * f * t))
    freq, mag = _magnitude(q, m["dt_ns"], m["window"], m["zero_pad_factor"])
    if noise_power:
        mag = rice_mean(mag, noise_power)
    return freq, mag


def _refit(freq, mag, starts, band):
    """Best in-band Lorentzian fit of a simulated spectrum over several starting points."""
    best, best_chi2 = None, np.inf
    for init in starts:
        try:
            res, sim = fit_lorentzians(freq, mag, len(init), init=init)
        except (InitializationError, RankDeficiencyError):
            continue
        ok = all(band[0] <= p.center <= band[1] and p.hwhm > 0 for p in sim)
        if ok and res.chi2 < best_chi2:
            best, best_chi2 = sim, res.chi2
    return best


def correct_overlap(sp, peaks, widths, band=None, max_iter=30, tol=1e-7):
    """Remove the pull that overlapping lines exert on each other's fitted center and width.

    A model with the current component estimates (frequencies,
    decay-equivalent ``widths``, amplitudes) is pushed through the same FFT
    and fit; the difference between what the fit returns and what went in is
    subtracted from the measured values, and the loop repeats until the
    centers move by less than ``tol`` MHz. The model carries the noise floor
    of the data, taken as the excess of the measured high-frequency power
    over the model's own truncation leakage. A pass that would move a center
    by more than the widest fitted line is rejected and the previous estimate
    kept. Returns ``(centers, widths)`` in MHz.
    """
    fmin, fmax = band or default_band(sp)
    meas_c = np.array([p.center for p in peaks])
    meas_h = np.array([p.hwhm for p in peaks])
    meas_a = np.array([p.amplitude for p in peaks])
    top = sp.freq_MHz >= 0.8 * sp.freq_MHz[-1]
    meas_floor = float(np.mean(sp.mag[top] ** 2))
    c, w, a = meas_c.copy(), np.maximum(np.asarray(widths, float), 0.0), np.ones_like(meas_c)
    start = list(peaks)
    for _ in range(max_iter):
        freq, clean = _model_spectrum(sp, c, w, a, 0.0)
        noise_power = max(meas_floor - float(np.mean(clean[top] ** 2)), 0.0)
        mag = rice_mean(clean, noise_power) if noise_power else clean
        sel = (freq >= fmin) & (freq <= fmax)
        sim = _refit(freq[sel], mag[sel], (start, peaks), (fmin, fmax))
        if sim is None:
            break
        step = meas_c - np.array([p.center for p in sim])
        if not np.all(np.abs(step) <= meas_h.max()):
            break
        start = sim
        c = c + step
        w_new = np.maximum(w * meas_h / np.array([p.hwhm for p in sim]), 0.0)
        # peak height goes as amplitude / width, so rescale for the width change too
        a = a * meas_a / np.array([p.amplitude for p in sim]) * np.where(w > 0, w_new / np.where(w > 0, w, 1), 1)
        w = w_new
        if np.max(np.abs(step)) < tol:
            break
    return c, w


def extract_components(spectra, labels=None, scales=None, band=None, correct=True):
    """Two-Lorentzian fit of each spectrum into a RabiComponentTable.

    The lower-frequency peak becomes the L component. ``band`` = (fmin, fmax)
    restricts the fit; the default skips the DC region. With ``correct`` the
    centers and widths pass through :func:`correct_overlap`; the uncertainties
    stay those of the fit.
    """
    if isinstance(spectra, SpectrumRecord):
        spectra = [spectra]
    entries = []
    for i, sp in enumerate(spectra):
        fmin, fmax = band or default_band(sp)
        try:
            lo, hi = fit_spectrum_peaks(sp, 2, (fmin, fmax))
        except InitializationError as exc:
            raise InitializationError(f"spectrum {i}: {exc}") from exc
        label = labels[i] if labels else sp.meta.get("b1_label") or f"level{i}"
        noise = noise_floor_sigma(sp) if sp.meta.get("window") == "rectangular" else 0.0
        raw_L = Measured(lo.hwhm, lo.hwhm_err)
        raw_H = Measured(hi.hwhm, hi.hwhm_err)
        wL = equivalent_width(raw_L, sp, lo.center, (fmin, fmax), lo.amplitude, noise)
        wH = equivalent_width(raw_H, sp, hi.center, (fmin, fmax), hi.amplitude, noise)
        (cL, cH), (vL, vH) = (lo.center, hi.center), (wL.value, wH.value)
        if correct:
            (cL, cH), (vL, vH) = correct_overlap(sp, (lo, hi), (vL, vH), (fmin, fmax))
        entries.append(RabiComponents(
            b1_label=label,
            omega_L=Measured(float(cL), lo.center_err),
            width_L=Measured(float(vL), wL.sigma),
            omega_H=Measured(float(cH), hi.center_err),
            width_H=Measured(float(vH), wH.sigma),
            b1_scale=None if scales is None else scales[i],
            raw_width_L=raw_L,
            raw_width_H=raw_H,
        ))
    return RabiComponentTable(entries)


# ----------------------------------------------------------- inversion formulas

def larmor_detuning(omega_small, omega_large, xi):
    """Larmor detuning |omega_i - omega| (MHz) from two Rabi frequencies of one
    off-resonant component.

    ``omega_small`` is measured at field B1, ``omega_large`` at xi * B1, so
    Rabi's formula gives detuning^2 = (xi^2 omega_small^2 - omega_large^2) / (xi^2 - 1).
    Inputs may be floats or Measured; the 1-sigma result is first-order
    propagated. At zero detuning the derivative diverges and the reported
    sigma is the square root of the sigma of detuning^2.
    """
    if not xi > 1:
        raise InvalidInputError("xi must exceed 1")
    (s, ss), (l, sl) = _m(omega_small), _m(omega_large)
    k = xi * xi - 1
    disc = xi * xi * s * s - l * l
    sig_disc = math.hypot(2 * xi * xi * s * ss, 2 * l * sl)
    if disc < 0:
        n = -disc / sig_disc if sig_disc > 0 else math.inf
        raise InconsistentMeasurementError(
            f"xi^2 Omega_small^2 - Omega_large^2 = {disc:.4g} MHz^2 is {n:.2f} sigma below zero",
            n_sigma=n)
    d = math.sqrt(disc / k)
    if d == 0:
        return Measured(0.0, math.sqrt(sig_disc / k))
    return Measured(d, math.hypot(xi * xi * s / (k * d) * ss, l / (k * d) * sl))


def _m(v):
    if isinstance(v, Measured):
        return v
    if isinstance(v, tuple):
        return Measured(*v)
    return Measured(float(v), 0.0)


def kappa_ratio_from(omega_H1, omega_H2, omega_L1, omega_L2):
    """kappa_H/kappa_L = sqrt((Omega_H1^2 - Omega_H2^2) / (Omega_L1^2 - Omega_L2^2)).

    Indices 1 and 2 are two measurements at different B1; detunings cancel.
    """
    (a, sa), (b, sb), (c, sc), (d, sd) = map(_m, (omega_H1, omega_H2, omega_L1, omega_L2))
    num = a * a - b * b
    den = c * c - d * d
    if den == 0 or num == 0:
        raise InconsistentMeasurementError("Rabi frequencies do not change between the B1 levels")
    ratio2 = num / den
    if ratio2 <= 0:
        sig = abs(ratio2) * math.hypot(math.hypot(2 * a * sa, 2 * b * sb) / num,
                                       math.hypot(2 * c * sc, 2 * d * sd) / den)
        raise InconsistentMeasurementError(
            f"squared ratio {ratio2:.4g} is not positive", n_sigma=(-ratio2 / sig if sig else math.inf))
    r = math.sqrt(ratio2)
    sigma = r * math.sqrt((a * sa / num) ** 2 + (b * sb / num) ** 2
                          + (c * sc / den) ** 2 + (d * sd / den) ** 2)
    return Measured(r, sigma)


def kappa_ratio(table):
    """Coupling-factor ratio from a table holding exactly two B1 levels."""
    if len(table) != 2:
        raise InvalidInputError(f"need exactly two B1 levels, got {len(table)}")
    e1, e2 = table[0], table[1]
    return kappa_ratio_from(e1.omega_H, e2.omega_H, e1.omega_L, e2.omega_L)


def detuning_to_field(delta_nu, g):
    """Convert a frequency detuning in MHz to a field offset in mT at Lande factor g."""
    if not g > 0:
        raise InvalidInputError("g must be positive")
    factor = g * CONSTANTS.mhz_per_mt_per_g
    if isinstance(delta_nu, tuple):
        v, s = delta_nu
        return Measured(v / factor, s / factor)
    return delta_nu / factor


@dataclass(frozen=True)
class ConsistencyReport:
    expected_width: Measured  # 1/(2 pi T) in MHz
    width: Measured
    discrepancy: float  # (width - expected) / combined sigma
    agrees: bool


def decay_width_consistency(decay_time, width, n_sigma=1.0):
    """Compare a decay-equivalent width (MHz) with 1/(2 pi T) from a decay time (ns)."""
    (T, sT), (w, sw) = _m(decay_time), _m(width)
    if not (T > 0 and w >= 0):
        raise InvalidInputError("decay time must be positive and width nonnegative")
    exp = 1e3 / (2 * math.pi * T)
    s_exp = exp * sT / T
    combined = math.hypot(s_exp, sw)
    diff = w - exp
    z = diff / combined if combined > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
    return ConsistencyReport(Measured(exp, s_exp), Measured(w, sw), z, abs(z) <= n_sigma)


def noise_floor_sigma(spectrum, fraction=0.2):
    """Per-sample white-noise sigma of the transient behind ``spectrum``.

    Uses the top ``fraction`` of the frequency axis, which should hold no
    signal. With the 2/N scaling a white-noise bin has mean square 4 sigma^2 / N.
    """
    n = spectrum.meta["n_samples"]
    if spectrum.meta.get("window", "rectangular") != "rectangular":
        raise InvalidInputError("noise floor estimate assumes a rectangular window")
    f = spectrum.freq_MHz
    sel = f >= (1 - fraction) * f[-1]
    return float(np.sqrt(n * np.mean(spectrum.mag[sel] ** 2) / 4))

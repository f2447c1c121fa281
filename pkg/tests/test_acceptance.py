"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the verdict lines go to
the terminal summary) or as a script, ``python tests/test_acceptance.py``.
"""

import json
import math
import sys

import numpy as np
import pytest

from spinpair.cli import main as cli_main
from spinpair.fitting import LorentzianPeak, decay_from_maxima, fit_lorentzians
from spinpair.gfactor import AngleSeries, axial_g, fit_anisotropy
from spinpair.nutation import delta_analytic, oracle_deviation
from spinpair.quantum import (
    DensityMatrix, PulseSpec, SpinPairParams, delta_from_central, delta_from_rho, propagate,
    rabi_transient_oracle, steady_state)
from spinpair.records import Measured, default_tau_grid
from spinpair.spectral import (
    decay_width_consistency, detuning_to_field, extract_components, fft_magnitude, kappa_ratio_from,
    larmor_detuning, noise_floor_sigma)
from spinpair.synth import (
    OscComponent, detection_limit, noise_for_snr, shots_in, snr_per_pair, synthesize_sweep,
    synthesize_transient)

from conftest import b1_for, dominant_frequency, pair_with_split

VERDICTS = {}


def verdict(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    VERDICTS[number] = line
    print(line)
    return ok


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_line("")
        for n in sorted(VERDICTS):
            reporter.write_line(VERDICTS[n])


# ------------------------------------------------------------------ 1

def test_criterion_1_coupling_regime_frequencies():
    b1 = b1_for(10.0)
    grid = default_tau_grid()
    weak = pair_with_split(50.0)
    strong = SpinPairParams(2.008, 2.008, 2 * math.pi * 500.0, 0.0, 350.0)
    fw, bin_MHz = dominant_frequency(rabi_transient_oracle(weak, PulseSpec(b1, weak.omega_a), grid))
    fs, _ = dominant_frequency(rabi_transient_oracle(strong, PulseSpec(b1, strong.omega_a), grid))
    ok = abs(fw - 5.0) <= bin_MHz and abs(fs - 10.0) <= bin_MHz
    assert verdict(1, ok, f"weak {fw:.3f} MHz, strong {fs:.3f} MHz, bin {bin_MHz:.3f} MHz")


# ------------------------------------------------------------------ 2

def test_criterion_2_analytic_matches_oracle_average():
    taus = np.linspace(0.0, 800.0, 50)
    dev, *_ = oracle_deviation(pair_with_split(2000.0), b1_for(10.0), taus, n_samples=401, span=20)
    assert verdict(2, dev <= 0.02, f"max relative deviation {dev:.4f} (limit 0.02)")


# ------------------------------------------------------------------ 3

def test_criterion_3_density_change_forms_agree():
    rng = np.random.default_rng(2024)
    params = SpinPairParams(2.0, 2.01, 0.0, 0.0, 350.0)
    rho_s = steady_state()
    worst = 0.0
    for _ in range(1000):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        m = a @ a.conj().T
        rho = DensityMatrix(m / np.trace(m).real)
        worst = max(worst, abs(delta_from_rho(rho, rho_s) - delta_from_central(rho, rho_s, params)))
    assert verdict(3, worst <= 1e-12, f"worst disagreement {worst:.2e} over 1000 states")


# ------------------------------------------------------------------ 4

def test_criterion_4_decay_pipeline():
    comps = [OscComponent(2 * math.pi * 10, 1.0, 500.0), OscComponent(2 * math.pi * 32, 0.5, 500.0)]
    grid = default_tau_grid()
    sigma = noise_for_snr(synthesize_transient(comps, grid).q, 30)
    rec = synthesize_transient(comps, grid, sigma, seed=0)
    sp = fft_magnitude(rec)
    entry = extract_components(sp)[0]
    decay = decay_from_maxima(rec.tau_ns, rec.q, entry.omega_L.value, noise_floor_sigma(sp))
    T = decay.decay_time
    cons = decay_width_consistency(T, entry.width_L, n_sigma=1.0)
    ok = decay.status == "decay" and abs(T.value - 500) <= 25 and cons.agrees
    assert verdict(4, ok, f"T = {T.value:.1f} +- {T.sigma:.1f} ns, width_L {entry.width_L.value:.4f} "
                          f"vs 1/(2 pi T) {cons.expected_width.value:.4f} MHz "
                          f"({cons.discrepancy:+.2f} sigma)")


# ------------------------------------------------------------------ 5

def test_criterion_5_detuning_closure():
    gamma_b1, detuning, xi = 14.0, 16.0, 2.0
    small = math.hypot(gamma_b1, detuning)
    large = math.hypot(xi * gamma_b1, detuning)
    exact = larmor_detuning(small, large, xi).value
    # input uncertainty giving a 16(10) MHz style error scale
    s_in = 5.3
    noisy = larmor_detuning(Measured(small, s_in), Measured(large, s_in), xi)
    field = detuning_to_field(noisy, 2.008)
    ok = (abs(exact - 16.0) <= 1e-9 and 8.0 <= noisy.sigma <= 12.0
          and 0.55 <= field.value <= 0.60)
    assert verdict(5, ok, f"noiseless {exact:.12f} MHz, with 5.3 MHz inputs {noisy.value:.1f} "
                          f"+- {noisy.sigma:.1f} MHz = {field.value:.3f} +- {field.sigma:.2f} mT")


# ------------------------------------------------------------------ 6

def _rabi_set(kappa_H, kappa_L, d_H, d_L, gamma_b1=14.0, xi=2.0):
    H = [math.hypot(kappa_H * gamma_b1 * s, d_H) for s in (xi, 1.0)]
    L = [math.hypot(kappa_L * gamma_b1 * s, d_L) for s in (xi, 1.0)]
    return H + L


def test_criterion_6_kappa_ratio_closure():
    root2 = math.sqrt(2)
    noiseless = [kappa_ratio_from(*_rabi_set(1.0, 1 / root2, dH, dL)).value
                 for dH in np.linspace(-30, 30, 7) for dL in np.linspace(-30, 30, 7)]
    worst = max(abs(r - root2) for r in noiseless)
    equal = kappa_ratio_from(*_rabi_set(1.0, 1.0, 20.0, -5.0)).value
    # SNR 20 on every Rabi frequency
    rng = np.random.default_rng(6)
    hits, values, sigmas = 0, [], []
    for dH in (-30.0, 0.0, 30.0):
        for _ in range(200):
            omegas = [w + rng.normal(0, w / 20) for w in _rabi_set(1.0, 1 / root2, dH, 12.0)]
            r = kappa_ratio_from(*(Measured(w, w / 20) for w in omegas))
            hits += abs(r.value - root2) <= r.sigma
            values.append(r.value)
            sigmas.append(r.sigma)
    coverage = hits / len(values)
    mean_ok = abs(np.mean(values) - root2) <= np.median(sigmas)
    ambiguous = all(abs(1.3 - k) / 0.3 <= 1 + 1e-12 for k in (1.0, root2))
    ok = worst <= 1e-9 and abs(equal - 1) <= 1e-9 and 0.6 <= coverage <= 0.8 and mean_ok and ambiguous
    assert verdict(6, ok, f"noiseless worst {worst:.1e}, equal kappas {equal:.12f}, "
                          f"SNR 20 one-sigma coverage {coverage:.2f}, mean {np.mean(values):.3f}, "
                          f"1.3(3) within 1 sigma of 1 and sqrt 2: {ambiguous}")


# ------------------------------------------------------------------ 7

ANGLES = np.array([90.0, 60.0, 30.0, 0.0])


def test_criterion_7_anisotropy_classification():
    sigma, g_perp = 1e-4, 2.0081
    # choose g_par so that |g_par - g_perp| is four propagated sigmas
    unit = fit_anisotropy(AngleSeries(ANGLES, axial_g(ANGLES, g_perp - 1e-3, g_perp), sigma))
    g_par = g_perp - 4 * unit.difference.sigma
    misses = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        axial = axial_g(ANGLES, g_par, g_perp) + rng.normal(0, sigma, 4)
        flat = 2.0055 + rng.normal(0, sigma, 4)
        if fit_anisotropy(AngleSeries(ANGLES, axial, sigma)).verdict != "anisotropic":
            misses.append((seed, "axial"))
        if fit_anisotropy(AngleSeries(ANGLES, flat, sigma)).verdict != "isotropic":
            misses.append((seed, "flat"))
    assert verdict(7, not misses, f"{len(misses)} misclassified of 100 series over 50 seeds "
                                  f"{misses}")


# ------------------------------------------------------------------ 8

def test_criterion_8_sensitivity_model():
    n = np.array([1, 4, 100, 10**6, 96_000_000])
    exact = np.array_equal(snr_per_pair(n), np.sqrt(n) / 1e6)
    shots = shots_in(8 * 3600, 300e-6)
    limits = [detection_limit(shots, s) for s in (1.0, 3.0)]
    ok = exact and shots == 96_000_000 and all(30 <= lim <= 1000 for lim in limits)
    assert verdict(8, ok, f"{shots:.3g} shots, SNR per pair {snr_per_pair(shots):.4f}, "
                          f"{limits[0]:.0f} carriers at SNR 1 and {limits[1]:.0f} at SNR 3")


# ------------------------------------------------------------------ 9

def _unitarity(rng):
    worst = 0.0
    for _ in range(200):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        m = a @ a.conj().T
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        out = propagate(DensityMatrix(m / np.trace(m).real), 50 * (h + h.conj().T),
                        rng.uniform(0, 5000)).matrix
        worst = max(worst, abs(np.trace(out) - 1), np.abs(out - out.conj().T).max(),
                    -np.linalg.eigvalsh(out).min())
    return worst


def _collapse():
    worst = 0.0
    for xi in (0.5, 2.0, 3.0):
        for tau in np.linspace(10, 800, 12):
            lhs = delta_analytic(tau, 0.3, 2.008, 0.5).value / 0.3
            rhs = delta_analytic(tau / xi, 0.3 * xi, 2.008, 0.5).value / (0.3 * xi)
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return worst


def _fft_axis():
    worst = 0.0
    for nu in np.linspace(1.5, 250.0, 40):
        sp = fft_magnitude(synthesize_transient([OscComponent(2 * math.pi * nu, 1.0)]))
        worst = max(worst, abs(sp.freq_MHz[np.argmax(sp.mag)] - nu) / sp.bin_MHz)
    return worst


def _covariance():
    grid = np.arange(344.0, 350.0, 0.01)
    peaks = [LorentzianPeak(346.6, 0.25, 1.0), LorentzianPeak(347.5, 0.25, 0.8)]
    sigma = noise_for_snr(sum(p(grid) for p in peaks), 20)
    fits, errs = [], []
    for seed in range(200):
        rec = synthesize_sweep(peaks, grid, sigma, seed=seed)
        res, _ = fit_lorentzians(rec.b0_mT, rec.q, 2, init=[(p.center, p.hwhm, p.amplitude) for p in peaks])
        fits.append(res.params)
        errs.append(res.errors)
    ratio = np.std(fits, axis=0, ddof=1) / np.median(errs, axis=0)
    return float(np.max(np.maximum(ratio, 1 / ratio)))


def _determinism(tmp):
    doc = {"seed": 0, "transient": {
        "source": "components", "snr": 30,
        "levels": [{"label": "B1", "b1_mT": 1.2}, {"label": "2B1", "b1_mT": 2.4}],
        "components": [{"kappa": 0.5, "detuning_MHz": 16.0, "decay_ns": 500},
                       {"kappa": 1 / math.sqrt(2), "detuning_MHz": 16.0, "amplitude_au": 0.5,
                        "decay_ns": 500}]}}
    cfg = tmp / "cfg.json"
    cfg.write_text(json.dumps(doc))
    for run in ("a", "b"):
        out = tmp / run
        codes = [cli_main(["simulate", "--config", str(cfg), "--out", str(out)]),
                 cli_main(["analyze", "--config", str(cfg), "--out", str(out),
                           str(out / "transient_B1.csv"), str(out / "transient_2B1.csv")]),
                 cli_main(["extract", "--config", str(cfg), "--out", str(out),
                           str(out / "components.json")])]
        if any(codes):
            return False
    names = sorted(p.name for p in (tmp / "a").iterdir())
    return all((tmp / "a" / n).read_bytes() == (tmp / "b" / n).read_bytes() for n in names)


def test_criterion_9_property_suites(tmp_path):
    rng = np.random.default_rng(9)
    unitarity = _unitarity(rng)
    collapse = _collapse()
    axis = _fft_axis()
    cov = _covariance()
    same = _determinism(tmp_path)
    ok = unitarity <= 1e-10 and collapse <= 1e-9 and axis <= 1.0 and cov <= 1.5 and same
    assert verdict(9, ok, f"unitarity {unitarity:.1e}, collapse {collapse:.1e}, "
                          f"FFT axis {axis:.2f} bins, covariance factor {cov:.2f}, "
                          f"byte-identical reruns {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))

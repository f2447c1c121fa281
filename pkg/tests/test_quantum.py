import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinpair.constants import GAMMA_PER_G, NS_TO_US
from spinpair.errors import DegenerateCouplingError, InvalidInputError
from spinpair.quantum import (
    SINGLET, SX_A, SX_B, SZ_A, SZ_B, DensityMatrix, PulseSpec, SpinPairParams, delta_from_central,
    delta_from_rho, propagate, rabi_transient_oracle, rotating_frame_hamiltonian,
    singlet_content, static_eigenbasis, static_hamiltonian, steady_state, to_basis)
from spinpair.records import default_tau_grid

from conftest import b1_for, dominant_frequency, pair_with_split


def random_state(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = a @ a.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_hermitian(rng, scale=100.0):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return scale * (a + a.conj().T) / 2


# ---------------------------------------------------------------- Hamiltonians

def test_no_field_no_coupling_is_zero():
    H = static_hamiltonian(SpinPairParams(2.0, 2.0, 0.0, 0.0, 0.0))
    assert np.array_equal(H, np.zeros((4, 4)))


def test_zeeman_only_is_diagonal():
    p = SpinPairParams(2.01, 1.99, 0.0, 0.0, 340.0)
    H = static_hamiltonian(p)
    assert np.allclose(H, np.diag(np.diag(H)), atol=0)
    wa, wb = p.omega_a, p.omega_b
    expected = [(wa + wb) / 2, (wa - wb) / 2, -(wa - wb) / 2, -(wa + wb) / 2]
    assert np.allclose(np.diag(H).real, expected, rtol=1e-14)


def test_larmor_frequencies_at_350_mT():
    p = SpinPairParams(2.0, 2.0, 0.0, 0.0, 350.0)
    # gamma_per_g = mu_B / hbar in rad/(us mT), about 87.94
    assert GAMMA_PER_G == pytest.approx(87.941, abs=1e-3)
    assert p.omega_a == p.omega_b == pytest.approx(2.0 * GAMMA_PER_G * 350.0, rel=1e-14)


def test_hamiltonian_is_hermitian(rng):
    p = SpinPairParams(2.003, 2.008, 12.0, -4.0, 345.0)
    for H in (static_hamiltonian(p), rotating_frame_hamiltonian(p, PulseSpec(0.3, p.omega_a))):
        assert np.allclose(H, H.conj().T, atol=0)


def test_on_resonance_single_spin_drive():
    # carrier on spin a, spin b detuned by 5 GHz: what remains on spin a is the drive
    p = pair_with_split(5000.0)
    b1 = 0.5
    H = rotating_frame_hamiltonian(p, PulseSpec(b1, p.omega_a))
    spin_b = (p.omega_b - p.omega_a) * SZ_B + p.g_b * GAMMA_PER_G * b1 / 2 * SX_B
    assert np.allclose(H - spin_b, p.g_a * GAMMA_PER_G * b1 / 2 * SX_A, atol=1e-9)


def test_no_drive_is_diagonal_in_static_eigenbasis():
    p = SpinPairParams(2.003, 2.008, 40.0, 10.0, 345.0)
    H = to_basis(rotating_frame_hamiltonian(p, PulseSpec(0.0, p.omega_a)), static_eigenbasis(p))
    assert np.allclose(H, np.diag(np.diag(H)), atol=1e-9)


def test_midway_carrier_gives_opposite_detunings():
    p = SpinPairParams(2.010, 2.000, 0.0, 0.0, 350.0)
    mid = (p.omega_a + p.omega_b) / 2
    H = rotating_frame_hamiltonian(p, PulseSpec(0.0, mid))
    da = (H[0, 0] - H[2, 2]).real  # |uu> - |du> isolates spin a's Zeeman term
    db = (H[0, 0] - H[1, 1]).real
    assert da == pytest.approx(-db, rel=1e-12)
    assert da == pytest.approx(p.omega_a - mid, rel=1e-12)


# ---------------------------------------------------------------- states

def test_default_steady_state():
    assert np.array_equal(steady_state().populations, [0.5, 0, 0, 0.5])


def test_custom_steady_state_normalized():
    assert np.allclose(steady_state([1, 1, 1, 1]).populations, 0.25)


@pytest.mark.parametrize("pops", [[-1, 1, 1, 1], [0, 0, 0, 0], [1, 2, 3]])
def test_custom_steady_state_rejects_bad_populations(pops):
    with pytest.raises(InvalidInputError):
        steady_state(pops)


def test_singlet_content_examples():
    p = SpinPairParams(2.0, 2.01, 0.0, 0.0, 350.0)
    basis = static_eigenbasis(p)
    assert singlet_content(steady_state(basis=basis)) == pytest.approx(0, abs=1e-15)
    t_plus = np.zeros((4, 4)); t_plus[0, 0] = 1
    assert singlet_content(DensityMatrix(t_plus)) == 0
    assert singlet_content(DensityMatrix(np.eye(4) / 4)) == pytest.approx(0.25)
    ud = np.zeros((4, 4)); ud[1, 1] = 1
    assert singlet_content(DensityMatrix(ud, basis=basis)) == pytest.approx(0.5)


def test_singlet_vector_is_normalized():
    assert np.vdot(SINGLET, SINGLET).real == pytest.approx(1)


def test_density_matrix_validation():
    with pytest.raises(InvalidInputError):
        DensityMatrix(np.diag([1.2, -0.2, 0, 0]))
    with pytest.raises(InvalidInputError):
        DensityMatrix(np.eye(4) / 2)


# ---------------------------------------------------------------- propagation

def test_zero_time_leaves_state(rng):
    rho = random_state(rng)
    out = propagate(rho, random_hermitian(rng), 0.0)
    assert np.allclose(out.matrix, rho.matrix, atol=1e-14)


def test_commuting_hamiltonian_leaves_state():
    rho = DensityMatrix(np.diag([0.4, 0.1, 0.2, 0.3]))
    H = np.diag([3.0, -1.0, 2.0, 5.0])
    for tau in (1.0, 37.0, 800.0):
        assert np.allclose(propagate(rho, H, tau).matrix, rho.matrix, atol=1e-14)


def test_non_hermitian_rejected():
    with pytest.raises(InvalidInputError):
        propagate(steady_state(), np.triu(np.ones((4, 4))), 1.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), tau=st.floats(0, 5000))
def test_unitarity(seed, tau):
    rng = np.random.default_rng(seed)
    rho = random_state(rng)
    out = propagate(rho, random_hermitian(rng), tau).matrix
    assert abs(np.trace(out) - 1) < 1e-10
    assert np.abs(out - out.conj().T).max() < 1e-10
    assert np.linalg.eigvalsh(out).min() > -1e-10


def pi_pulse_setup():
    p = pair_with_split(2000.0)
    b1 = 0.5
    pulse = PulseSpec(b1, p.omega_a)
    rate = p.g_a * GAMMA_PER_G * b1 / 2
    tau_pi = math.pi / rate / NS_TO_US
    return p, pulse, tau_pi


def test_pi_pulse_moves_outer_population_to_central():
    p, pulse, tau_pi = pi_pulse_setup()
    basis = static_eigenbasis(p)
    rho_s = steady_state(basis=basis)
    out = propagate(rho_s, to_basis(rotating_frame_hamiltonian(p, pulse), basis), tau_pi)
    # the far-detuned spin b leaks at the (drive / separation)^2 level
    assert np.allclose(out.populations, [0, 0.5, 0.5, 0], atol=1e-3)
    assert delta_from_rho(out, rho_s) == pytest.approx(1, abs=1e-3)


# ---------------------------------------------------------------- density change

def test_delta_vanishes_at_steady_state():
    rho = steady_state()
    assert delta_from_rho(rho, rho) == 0
    assert delta_from_central(rho, rho, SpinPairParams(2.0, 2.01, 0, 0, 350.0)) == 0


def test_both_forms_agree_without_coupling(rng):
    p = SpinPairParams(2.0, 2.01, 0.0, 0.0, 350.0)
    rho_s = steady_state()
    worst = 0.0
    for _ in range(1000):
        rho = random_state(rng)
        for sign in (+1, -1):
            worst = max(worst, abs(delta_from_rho(rho, rho_s)
                                   - delta_from_central(rho, rho_s, p, sign)))
    assert worst < 1e-12


def test_central_form_degenerate():
    p = SpinPairParams(2.0, 2.0, 0.0, 0.0, 350.0)
    with pytest.raises(DegenerateCouplingError):
        delta_from_central(steady_state(), steady_state(), p)


# ---------------------------------------------------------------- oracle

def test_zero_b1_transient_is_zero():
    p = pair_with_split(50.0)
    rec = rabi_transient_oracle(p, PulseSpec(0.0, p.omega_a), default_tau_grid())
    assert np.abs(rec.q).max() < 1e-14


def weak_and_strong(gamma_b1_MHz=10.0):
    b1 = b1_for(gamma_b1_MHz)
    weak = pair_with_split(50.0)
    strong = SpinPairParams(2.008, 2.008, 2 * math.pi * 500.0, 0.0, 350.0)
    grid = default_tau_grid()
    rw = rabi_transient_oracle(weak, PulseSpec(b1, weak.omega_a), grid)
    rs = rabi_transient_oracle(strong, PulseSpec(b1, strong.omega_a), grid)
    return rw, rs


def test_regime_frequencies():
    rw, rs = weak_and_strong()
    fw, bin_w = dominant_frequency(rw)
    fs, bin_s = dominant_frequency(rs)
    assert abs(fw - 5.0) <= bin_w
    assert abs(fs - 10.0) <= bin_s


def test_b1_linearity_on_resonance():
    for g1, g2 in ((10.0, 20.0),):
        (w1, s1), (w2, s2) = weak_and_strong(g1), weak_and_strong(g2)
        for a, b in ((w1, w2), (s1, s2)):
            fa, bin_a = dominant_frequency(a, pad=16)
            fb, _ = dominant_frequency(b, pad=16)
            assert fb / fa == pytest.approx(2.0, rel=0.01)


def allowed_carrier(p):
    """Carrier resonant with the |uu> transition of largest drive matrix element."""
    basis = static_eigenbasis(p)
    energies = to_basis(static_hamiltonian(p), basis).diagonal().real
    moment = np.abs(to_basis(SX_A + SX_B, basis)[0, 1:3])
    k = 1 + int(np.argmax(moment))
    return energies[0] - energies[k]


def test_frequency_crossover_with_coupling():
    b1 = b1_for(10.0)
    grid = default_tau_grid()
    freqs = []
    for J in np.geomspace(0.5, 5000.0, 13):
        p = pair_with_split(50.0, J_MHz=J)
        rec = rabi_transient_oracle(p, PulseSpec(b1, allowed_carrier(p)), grid)
        freqs.append(dominant_frequency(rec, pad=16)[0])
    assert freqs[0] == pytest.approx(5.0, rel=0.02)
    assert freqs[-1] == pytest.approx(10.0, rel=0.02)
    bin_MHz = 1e3 / (grid.size * 2.0 * 16)
    assert all(b >= a - bin_MHz for a, b in zip(freqs, freqs[1:])), freqs

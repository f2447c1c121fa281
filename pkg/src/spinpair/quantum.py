"""Exact density-matrix model of a coupled spin-1/2 pair under a rectangular pulse.

Product basis ordering is |uu>, |ud>, |du>, |dd> with spin a first. Density
matrices live in the eigenbasis of the static Hamiltonian; since every
coupling term conserves total S_z, |uu> and |dd> are always eigenstates
(indices 0 and 3 here, 1 and 4 in the usual 1-based labels) and only the
central pair mixes.

Microwave convention: ``PulseSpec.b1`` is the amplitude of the linearly
polarized microwave field. In the rotating-wave approximation each spin sees
a co-rotating component of b1/2, so an isolated spin nutates at
(1/2) * g * gamma_per_g * b1 and a strongly coupled pair at twice that.
"""

from dataclasses import dataclass

import numpy as np

from .constants import GAMMA_PER_G, NS_TO_US
from .errors import DegenerateCouplingError, InvalidInputError
from .records import TransientRecord, _as_grid

_SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
_SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
_I2 = np.eye(2, dtype=complex)

SX_A, SY_A, SZ_A = (np.kron(s, _I2) for s in (_SX, _SY, _SZ))
SX_B, SY_B, SZ_B = (np.kron(_I2, s) for s in (_SX, _SY, _SZ))
SZ_TOTAL = SZ_A + SZ_B

SINGLET = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)

OUTER = (0, 3)
CENTRAL = (1, 2)


@dataclass(frozen=True)
class SpinPairParams:
    """Static Hamiltonian inputs. J and Dd in rad/us, B0 in mT."""

    g_a: float
    g_b: float
    J: float = 0.0
    Dd: float = 0.0
    B0: float = 0.0

    def __post_init__(self):
        if not (self.g_a > 0 and self.g_b > 0):
            raise InvalidInputError("g factors must be positive")
        if self.B0 < 0:
            raise InvalidInputError("B0 must be nonnegative")

    @property
    def omega_a(self):
        return self.g_a * GAMMA_PER_G * self.B0

    @property
    def omega_b(self):
        return self.g_b * GAMMA_PER_G * self.B0

    @property
    def omega_delta(self):
        """Larmor separation omega_a - omega_b in rad/us."""
        return (self.g_a - self.g_b) * GAMMA_PER_G * self.B0


@dataclass(frozen=True)
class PulseSpec:
    """Rectangular pulse: b1 in mT (linear amplitude), omega in rad/us, tau in ns."""

    b1: float
    omega: float
    tau: float = 0.0

    def __post_init__(self):
        if self.b1 < 0:
            raise InvalidInputError("b1 must be nonnegative")
        if self.tau < 0:
            raise InvalidInputError("tau must be nonnegative")


class DensityMatrix:
    """4x4 Hermitian, unit-trace, positive semidefinite pair state.

    ``basis`` holds the basis vectors as columns expressed in the product
    basis; ``None`` means the product basis itself.
    """

    def __init__(self, matrix, basis=None, check=True):
        m = np.array(matrix, dtype=complex)
        if m.shape != (4, 4):
            raise InvalidInputError(f"density matrix must be 4x4, got {m.shape}")
        if check:
            if not np.allclose(m, m.conj().T, rtol=0, atol=1e-12):
                raise InvalidInputError("density matrix is not Hermitian")
            if abs(np.trace(m).real - 1) > 1e-12:
                raise InvalidInputError(f"trace is {np.trace(m).real!r}, expected 1")
            if np.linalg.eigvalsh(m).min() < -1e-10:
                raise InvalidInputError("density matrix has a negative eigenvalue")
        self.matrix = m
        self.basis = None if basis is None else np.asarray(basis, dtype=complex)

    @property
    def populations(self):
        return np.diag(self.matrix).real.copy()

    def in_product_basis(self):
        if self.basis is None:
            return self.matrix
        return self.basis @ self.matrix @ self.basis.conj().T

    def __repr__(self):
        return f"DensityMatrix(populations={np.round(self.populations, 6).tolist()})"


def static_hamiltonian(params):
    """Zeeman + isotropic exchange + secular dipolar term, product basis, rad/us."""
    p = params
    exchange = SX_A @ SX_B + SY_A @ SY_B + SZ_A @ SZ_B
    dipolar = 2 * SZ_A @ SZ_B - SX_A @ SX_B - SY_A @ SY_B
    return p.omega_a * SZ_A + p.omega_b * SZ_B + p.J * exchange + p.Dd * dipolar


def rotating_frame_hamiltonian(params, pulse):
    """Hamiltonian in the frame rotating at the carrier ``pulse.omega``.

    Exchange and secular dipolar terms commute with total S_z and are
    unchanged by the frame transformation.
    """
    b_rot = pulse.b1 / 2
    drive = GAMMA_PER_G * b_rot * (params.g_a * SX_A + params.g_b * SX_B)
    return static_hamiltonian(params) - pulse.omega * SZ_TOTAL + drive


def static_eigenbasis(params):
    """Columns are the static eigenvectors in the product basis.

    The central states are |ud>, |du> rotated by theta = atan2(J - Dd, omega_delta)/2,
    which reduces to the product basis when J = Dd = 0 and to (T0, S) when
    g_a = g_b and J != Dd.
    """
    theta = 0.5 * np.arctan2(params.J - params.Dd, params.omega_delta)
    c, s = np.cos(theta), np.sin(theta)
    v = np.eye(4, dtype=complex)
    v[1, 1], v[2, 1] = c, s
    v[1, 2], v[2, 2] = -s, c
    return v


def to_basis(op, basis):
    return basis.conj().T @ op @ basis


def steady_state(populations=None, basis=None):
    """Steady-state pair ensemble, diagonal in the static eigenbasis.

    Without ``populations`` this is the pure outer-triplet state
    diag(1/2, 0, 0, 1/2): fast singlet recombination empties the central
    states. Custom populations are normalized to unit trace.
    """
    if populations is None:
        pops = np.array([0.5, 0.0, 0.0, 0.5])
    else:
        pops = np.asarray(populations, dtype=float)
        if pops.shape != (4,):
            raise InvalidInputError("need exactly four populations")
        if np.any(pops < 0) or pops.sum() <= 0:
            raise InvalidInputError("populations must be nonnegative and not all zero")
        pops = pops / pops.sum()
    return DensityMatrix(np.diag(pops), basis=basis)


def _check_hermitian(h):
    h = np.asarray(h, dtype=complex)
    scale = max(1.0, float(np.abs(h).max()))
    if h.shape != (4, 4) or not np.allclose(h, h.conj().T, rtol=0, atol=1e-10 * scale):
        raise InvalidInputError("Hamiltonian must be a Hermitian 4x4 matrix")
    return h


def propagate(rho, H, tau):
    """rho(tau) = U rho U^dagger, U = exp(-i H tau); H in rad/us and tau in ns.

    ``H`` must be expressed in the same basis as ``rho``.
    """
    if tau < 0:
        raise InvalidInputError("tau must be nonnegative")
    H = _check_hermitian(H)
    energies, w = np.linalg.eigh(H)
    u = (w * np.exp(-1j * energies * tau * NS_TO_US)) @ w.conj().T
    out = u @ rho.matrix @ u.conj().T
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out, basis=rho.basis, check=False)


def propagate_populations(rho, H, taus):
    """Diagonal of rho(tau) for every tau in ``taus``; shape (len(taus), 4)."""
    H = _check_hermitian(H)
    taus = np.asarray(taus, dtype=float)
    energies, w = np.linalg.eigh(H)
    r = w.conj().T @ rho.matrix @ w
    phase = np.exp(-1j * np.multiply.outer(taus * NS_TO_US, energies))
    # rho(t)_jk in the H eigenbasis is r_jk e^{-i(E_j - E_k)t}
    evolved = phase[:, :, None] * r[None] * phase.conj()[:, None, :]
    back = np.einsum("ij,tjk,ik->ti", w, evolved, w.conj(), optimize=True)
    return back.real


def singlet_content(rho):
    """<S|rho|S> with S = (|ud> - |du>)/sqrt(2)."""
    s = SINGLET if rho.basis is None else rho.basis.conj().T @ SINGLET
    return float(np.real(s.conj() @ rho.matrix @ s))


def _pops(rho):
    return rho if isinstance(rho, np.ndarray) else rho.populations


def delta_from_rho(rho, rho_s):
    """Density change from the outer-triplet populations.

    Delta = -(rho_11 + rho_44 - rho^S_11 - rho^S_44) / Tr[rho^S]. Either
    argument may be a DensityMatrix or a population vector.
    """
    p, ps = _pops(rho), _pops(rho_s)
    return float(-(p[0] + p[3] - ps[0] - ps[3]) / ps.sum())


def delta_from_central(rho, rho_s, params, sign=+1):
    """Density change from the central populations, scaled by
    omega_delta / (omega_delta + sign * (J + Dd)).

    With J = Dd = 0 this equals :func:`delta_from_rho` by trace conservation.
    """
    if sign not in (+1, -1):
        raise InvalidInputError("sign must be +1 or -1")
    denom = params.omega_delta + sign * (params.J + params.Dd)
    if denom == 0:
        raise DegenerateCouplingError(
            "omega_delta + sign*(J + Dd) vanishes; the central form is undefined")
    p, ps = _pops(rho), _pops(rho_s)
    return float((p[1] + p[2] - ps[1] - ps[2]) / ps.sum() * params.omega_delta / denom)


def rabi_transient_oracle(params, pulse, tau_grid, rho_s=None):
    """Delta(tau) from exact propagation of the steady state, for each pulse length.

    ``pulse.tau`` is ignored; lengths come from ``tau_grid`` (ns).
    """
    tau_grid = _as_grid(tau_grid, "tau_grid")
    basis = static_eigenbasis(params)
    if rho_s is None:
        rho_s = steady_state(basis=basis)
    H = to_basis(rotating_frame_hamiltonian(params, pulse), basis)
    ps = rho_s.populations
    if pulse.b1 == 0:
        # without drive H commutes with the steady state: nothing moves, exactly
        delta = np.zeros(tau_grid.size)
    else:
        pops = propagate_populations(rho_s, H, tau_grid)
        delta = -(pops[:, 0] + pops[:, 3] - ps[0] - ps[3]) / ps.sum()
    meta = {
        "source": "oracle",
        "b1_mT": pulse.b1,
        "omega_rad_per_us": pulse.omega,
        "params": {"g_a": params.g_a, "g_b": params.g_b, "J": params.J,
                   "Dd": params.Dd, "B0": params.B0},
    }
    return TransientRecord(tau_grid, delta, meta)

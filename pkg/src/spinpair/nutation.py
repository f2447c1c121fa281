"""Ensemble Rabi transient of an inhomogeneously broadened line, Rabi's formula
and the coupling-factor table.

The transient is

    Delta(tau) = g gamma b_rot Phi * I(a),
    I(a) = integral over x of sin^2(a sqrt(1 + x^2)) / (1 + x^2),
    a = kappa g gamma b_rot tau,

where b_rot = b1/2 is the co-rotating part of the linearly polarized field
(see :mod:`spinpair.quantum`). The normalized integral I lies in [0, pi] and
relaxes to pi/2 as tau grows; the decay is spectral narrowing of the
excitation, not decoherence.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import enum
import math
import os
import warnings

import numpy as np
from scipy import integrate, special

from .constants import GAMMA_PER_G, NS_TO_US
from .errors import InvalidInputError, QuadratureError
from .quantum import PulseSpec, rabi_transient_oracle
from .records import TransientRecord, _as_grid


class CouplingRegime(enum.Enum):
    WEAK_SELECTIVE = "weak"
    STRONG_UNSELECTIVE = "strong"
    STRONG_SMALL_B1 = "strong_small_b1"

    @property
    def kappa(self):
        return _KAPPA[self]


_KAPPA = {
    CouplingRegime.WEAK_SELECTIVE: 0.5,
    CouplingRegime.STRONG_UNSELECTIVE: 1.0,
    CouplingRegime.STRONG_SMALL_B1: 1 / math.sqrt(2),
}


def kappa(regime):
    return CouplingRegime(regime).kappa


class LineForm(enum.Enum):
    FLAT = "flat"
    LORENTZIAN = "lorentzian"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class LineShape:
    """Spectral density Phi of the spins in resonance.

    Only ``amplitude`` enters :func:`delta_analytic`; ``form`` and ``width``
    (rad/us) shape the detuning weights of the brute-force ensemble average.
    """

    amplitude: float = 1.0
    form: LineForm = LineForm.FLAT
    width: float = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise InvalidInputError("line amplitude must be nonnegative")
        object.__setattr__(self, "form", LineForm(self.form))
        if self.form is not LineForm.FLAT and not (self.width and self.width > 0):
            raise InvalidInputError(f"{self.form.value} line needs a positive width")

    def weights(self, detuning):
        d = np.asarray(detuning, dtype=float)
        if self.form is LineForm.FLAT:
            w = np.ones_like(d)
        elif self.form is LineForm.LORENTZIAN:
            w = 1 / (1 + (d / self.width) ** 2)
        else:
            w = np.exp(-0.5 * (d / self.width) ** 2)
        return self.amplitude * w


@dataclass(frozen=True)
class QuadratureSettings:
    truncation: float = 1000.0
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    limit: int = 20000

    def __post_init__(self):
        if self.truncation < 10:
            raise InvalidInputError("truncation X must be at least 10")
        if self.rel_tol > 1e-6:
            raise InvalidInputError("relative tolerance must be at most 1e-6")


@dataclass(frozen=True)
class NutationValue:
    """One evaluation of the transient.

    ``core`` is the normalized integral over |x| <= X, ``tail`` the asymptotic
    estimate of the remainder and ``error`` bounds quadrature plus tail error
    on the normalized scale. ``value = prefactor * (core + tail)``.
    """

    value: float
    prefactor: float
    core: float
    tail: float
    error: float

    @property
    def normalized(self):
        return self.core + self.tail


def rabi_frequency(kappa, b1, g, detuning=0.0):
    """Omega = sqrt((kappa g gamma b1)^2 + detuning^2) in rad/us.

    On resonance the frequency is linear in b1, and it is the angular
    frequency at which the density change oscillates.
    """
    if kappa <= 0:
        raise InvalidInputError("kappa must be positive")
    if np.any(np.asarray(b1) < 0):
        raise InvalidInputError("b1 must be nonnegative")
    return np.hypot(kappa * g * GAMMA_PER_G * np.asarray(b1, dtype=float), detuning)


def _cos_part(a, X, settings):
    """Integral over [0, X] of cos(2a sqrt(1+x^2)) / (1+x^2), its error and any quad warning."""
    opts = dict(epsabs=settings.abs_tol / 4, epsrel=settings.rel_tol, limit=settings.limit)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        inner, e1 = integrate.quad(
            lambda x: math.cos(2 * a * math.sqrt(1 + x * x)) / (1 + x * x), 0.0, 1.0, **opts)
        # u = sqrt(1+x^2) turns the oscillation into a plain cosine weight
        outer, e2 = integrate.quad(
            lambda u: 1 / (u * math.sqrt(u * u - 1)), math.sqrt(2), math.sqrt(1 + X * X),
            weight="cos", wvar=2 * a, **opts)
    problems = [str(w.message).strip().splitlines()[0] for w in caught
                if issubclass(w.category, integrate.IntegrationWarning)]
    return inner + outer, e1 + e2, "; ".join(problems)


def normalized_integral(a, settings=None):
    """(core, tail, error) of the normalized transient integral at argument ``a``."""
    settings = settings or QuadratureSettings()
    if a < 0:
        raise InvalidInputError("argument must be nonnegative")
    if a == 0:
        return 0.0, 0.0, 0.0
    X = settings.truncation
    c, qerr, problem = _cos_part(a, X, settings)
    # 2 * int_0^X sin^2(.)/(1+x^2) = arctan X - (cos part)
    core = math.atan(X) - c
    # both tails with sqrt(1+x^2) ~ x and 1/(1+x^2) ~ 1/x^2
    aX = a * X
    si, _ = special.sici(2 * aX)
    tail = 2 * a * (math.sin(aX) ** 2 / aX + math.pi / 2 - si)
    tail_err = 2 / (3 * X ** 3) + a / (2 * X ** 2)
    tol = max(settings.abs_tol, settings.rel_tol * abs(core))
    if problem or qerr > tol:
        raise QuadratureError(
            f"quadrature did not converge for a={a:.6g} (error {qerr:.3g}, tolerance {tol:.3g})"
            + (f": {problem}" if problem else ""),
            best_estimate=core + tail, error_estimate=qerr + tail_err)
    return core, tail, qerr + tail_err


def delta_analytic(tau, b1, g, kappa, line=None, quad=None):
    """Ensemble density change after a pulse of ``tau`` ns at field ``b1`` mT.

    Returns a :class:`NutationValue`; its prefactor g gamma b_rot Phi is in
    rad/us times the line amplitude.
    """
    if tau < 0 or b1 < 0:
        raise InvalidInputError("tau and b1 must be nonnegative")
    if kappa <= 0:
        raise InvalidInputError("kappa must be positive")
    line = line or LineShape()
    b_rot = b1 / 2
    prefactor = g * GAMMA_PER_G * b_rot * line.amplitude
    a = kappa * g * GAMMA_PER_G * b_rot * tau * NS_TO_US
    core, tail, err = normalized_integral(a, quad)
    return NutationValue(prefactor * (core + tail), prefactor, core, tail, err)


def nutation_curve(regime, b1, g, tau_grid, line=None, quad=None):
    """Ensemble transient on ``tau_grid`` with kappa taken from the coupling regime."""
    regime = CouplingRegime(regime)
    tau_grid = _as_grid(tau_grid, "tau_grid")
    values = [delta_analytic(t, b1, g, regime.kappa, line, quad) for t in tau_grid]
    meta = {
        "source": "analytic",
        "regime": regime.value,
        "kappa": regime.kappa,
        "b1_mT": b1,
        "g": g,
        "error": [v.error * v.prefactor for v in values],
    }
    return TransientRecord(tau_grid, [v.value for v in values], meta)


def thread_count():
    """Worker cap from SPINPAIR_THREADS, default 1."""
    raw = os.environ.get("SPINPAIR_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidInputError(f"SPINPAIR_THREADS={raw!r} is not an integer") from None
    return max(1, n)


def oracle_ensemble_average(params, b1, tau_grid, line=None, n_samples=401, span=20.0,
                            detuning_scale=None):
    """Brute-force ensemble transient: exact pair dynamics averaged over carrier offsets.

    Offsets run uniformly over +-``span`` units of ``detuning_scale`` (rad/us;
    default the co-rotating nutation frequency g_a gamma b1/2 of spin a) around
    the spin-a resonance and are weighted by ``line``. Returns the weighted
    mean of Delta(tau).
    """
    line = line or LineShape()
    if detuning_scale is None:
        detuning_scale = params.g_a * GAMMA_PER_G * b1 / 2
    offsets = np.linspace(-span, span, n_samples) * detuning_scale
    weights = line.weights(offsets)

    def one(offset):
        pulse = PulseSpec(b1, params.omega_a + offset)
        return rabi_transient_oracle(params, pulse, tau_grid).q

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            curves = list(pool.map(one, offsets))
    else:
        curves = [one(o) for o in offsets]
    curves = np.asarray(curves)
    mean = weights @ curves / weights.sum()
    meta = {"source": "oracle_ensemble", "b1_mT": b1, "n_samples": n_samples, "span": span}
    return TransientRecord(tau_grid, mean, meta)


def oracle_deviation(params, b1, tau_grid, n_samples=401, span=20.0, quad=None):
    """Largest relative gap between the analytic transient and the ensemble oracle.

    The pair should sit in the weak-coupling limit with spin b far from the
    carrier. The analytic curve (kappa 1/2, g of spin a) is scaled onto the
    oracle by least squares first. Returns (deviation, scale, analytic, oracle).
    """
    tau_grid = _as_grid(tau_grid, "tau_grid")
    analytic = nutation_curve(CouplingRegime.WEAK_SELECTIVE, b1, params.g_a, tau_grid,
                              quad=quad).q
    oracle = oracle_ensemble_average(params, b1, tau_grid, n_samples=n_samples, span=span).q
    scale = float(analytic @ oracle / (analytic @ analytic))
    fit = scale * analytic
    deviation = float(np.max(np.abs(oracle - fit)) / np.max(np.abs(fit)))
    return deviation, scale, analytic, oracle

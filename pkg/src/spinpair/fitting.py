"""Damped least squares and the model families fitted to pEDMR data.

The engine is a plain Levenberg-Marquardt loop with Marquardt diagonal
scaling. Damping halves on an accepted step and quadruples on a rejected
one. Covariances come from the Gauss-Newton approximation at the optimum,
scaled by the reduced chi-square unless absolute sigmas were supplied.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import InitializationError, InvalidInputError, NoMaximaError, RankDeficiencyError
from .records import Measured


@dataclass
class FitResult:
    params: np.ndarray
    covariance: np.ndarray
    chi2: float
    n_iter: int
    converged: bool
    chi2_initial: float = np.nan
    dof: int = 0
    names: tuple = ()
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def __getitem__(self, name):
        return self.params[self.names.index(name)]

    def error_of(self, name):
        return self.errors[self.names.index(name)]


def _fd_jacobian(fun, p, r0):
    jac = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = 1e-6 * max(abs(p[j]), 1e-3)
        pp, pm = p.copy(), p.copy()
        pp[j] += h
        pm[j] -= h
        jac[:, j] = (fun(pp) - fun(pm)) / (2 * h)
    return jac


def _check_rank(jac, rcond=1e-12):
    if jac.shape[0] < jac.shape[1]:
        raise RankDeficiencyError(
            f"{jac.shape[0]} residuals cannot determine {jac.shape[1]} parameters")
    sv = np.linalg.svd(jac, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= rcond * sv[0]:
        raise RankDeficiencyError(
            f"normal equations are singular (condition {sv[0] / max(sv[-1], 1e-300):.3g})")


def solve_damped_lsq(residual, init, jac=None, sigma=None, absolute_sigma=False,
                     gtol=1e-8, max_iter=200, lam0=1e-3, names=()):
    """Minimize sum(residual(p)**2) starting at ``init``.

    ``residual`` maps a parameter vector to a residual vector. ``jac``
    returns its Jacobian; central differences are used when it is omitted.
    ``sigma`` divides the residuals; with ``absolute_sigma`` the covariance
    is taken as is instead of being rescaled by chi2/dof.

    Raises RankDeficiencyError when the Jacobian is rank deficient at the
    start or at the solution. Non-convergence is flagged, not raised.
    """
    p = np.array(init, dtype=float)
    w = None if sigma is None else 1 / np.asarray(sigma, dtype=float)

    def fun(q):
        r = np.asarray(residual(q), dtype=float)
        return r if w is None else r * w

    def jfun(q, r):
        if jac is None:
            return _fd_jacobian(fun, q, r)
        J = np.asarray(jac(q), dtype=float)
        return J if w is None else J * w[:, None]

    r = fun(p)
    if not np.all(np.isfinite(r)):
        raise InvalidInputError("residuals at the initial point are not finite")
    chi2 = chi2_init = float(r @ r)
    J = jfun(p, r)
    _check_rank(J)
    # undamped Gauss-Newton until the first rejected step
    lam = 0.0
    converged = False
    message = "iteration limit reached"
    n_iter = 0
    while n_iter < max_iter:
        g = J.T @ r
        colnorm = np.linalg.norm(J, axis=0)
        rnorm = np.sqrt(chi2)
        if chi2 <= 1e-26 * chi2_init or rnorm <= 1e-150:
            converged = True
            message = "residual vanished"
            break
        if np.max(np.abs(g) / (colnorm * rnorm + 1e-300)) <= gtol:
            converged = True
            message = "gradient tolerance reached"
            break
        A = J.T @ J
        d = np.diag(A).copy()
        d[d == 0] = 1.0
        n_iter += 1
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam = lam * 4 or lam0
                continue
            trial = p + step
            r_trial = fun(trial)
            chi2_trial = float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else np.inf
            if chi2_trial <= chi2:
                small = chi2 - chi2_trial <= 1e-15 * chi2 and \
                    np.linalg.norm(step) <= 1e-12 * (np.linalg.norm(p) + 1e-12)
                p, r, chi2 = trial, r_trial, chi2_trial
                lam *= 0.5
                J = jfun(p, r)
                if small:
                    converged = True
                    message = "no further decrease"
                break
            lam = lam * 4 or lam0
            if lam > 1e16:
                converged = True
                message = "step cannot reduce chi2 further"
                break
        if converged:
            break
    _check_rank(J)
    dof = r.size - p.size
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("normal equations are singular at the solution") from exc
    cov = 0.5 * (cov + cov.T)
    if not absolute_sigma:
        cov = cov * (chi2 / dof) if dof > 0 else np.full_like(cov, np.nan)
    return FitResult(p, cov, chi2, n_iter, converged, chi2_init, dof, tuple(names), message)


# ---------------------------------------------------------------- Lorentzians

@dataclass(frozen=True)
class LorentzianPeak:
    """Peak of height ``amplitude`` at ``center`` with half width ``hwhm``.

    Units follow the axis the peak lives on (mT for sweeps, MHz for spectra).
    The ``*_err`` fields are 1-sigma fit errors, zero for synthetic peaks.
    """

    center: float
    hwhm: float
    amplitude: float
    center_err: float = 0.0
    hwhm_err: float = 0.0
    amplitude_err: float = 0.0

    def __post_init__(self):
        if not self.hwhm > 0:
            raise InvalidInputError("hwhm must be positive")

    def __call__(self, x):
        return lorentzian(x, self.center, self.hwhm, self.amplitude)


def lorentzian(x, center, hwhm, amplitude):
    x = np.asarray(x, dtype=float)
    return amplitude * hwhm ** 2 / ((x - center) ** 2 + hwhm ** 2)


def _multi_lorentzian(x, p):
    y = np.full(x.shape, p[-1])
    for c, w, a in p[:-1].reshape(-1, 3):
        y += lorentzian(x, c, abs(w), abs(a))
    return y


def _multi_lorentzian_jac(x, p):
    J = np.empty((x.size, p.size))
    for k, (c, w, a) in enumerate(p[:-1].reshape(-1, 3)):
        sw, sa = np.sign(w) or 1.0, np.sign(a) or 1.0
        w, a = abs(w), abs(a)
        den = (x - c) ** 2 + w ** 2
        J[:, 3 * k] = 2 * a * w ** 2 * (x - c) / den ** 2
        J[:, 3 * k + 1] = sw * 2 * a * w * (x - c) ** 2 / den ** 2
        J[:, 3 * k + 2] = sa * w ** 2 / den
    J[:, -1] = 1.0
    return J


def seed_peaks(x, y, k, smooth=1):
    """Initial (center, hwhm, amplitude) for the ``k`` most prominent maxima.

    With ``smooth`` > 1 maxima are located on a moving average over that many
    samples, which suppresses ripple narrower than the true lines (window
    sidelobes of a zero-padded FFT, for instance). Equal prominences are
    broken in favour of the lower center.
    """
    if smooth > 1:
        y = moving_average(y, int(smooth))
    idx, _ = signal.find_peaks(y)
    if idx.size < k:
        raise InitializationError(f"found {idx.size} local maxima, need {k}")
    prom = signal.peak_prominences(y, idx)[0]
    order = np.lexsort((x[idx], -prom))[:k]
    idx = idx[order]
    widths = signal.peak_widths(y, idx, rel_height=0.5)[0]
    step = np.mean(np.diff(x))
    base = float(np.percentile(y, 10))
    return [(float(x[i]), max(0.5 * wd * step, step), max(float(y[i]) - base, 1e-12))
            for i, wd in zip(idx, widths)], base


def fit_lorentzians(x, y, k, init=None, sigma=None, absolute_sigma=False, baseline=None,
                    smooth=1):
    """Fit ``k`` Lorentzians plus a constant baseline.

    ``init`` is an optional sequence of LorentzianPeak (or (center, hwhm,
    amplitude) triples); otherwise the ``k`` most prominent local maxima seed
    the fit (located after a ``smooth``-sample moving average). Returns
    ``(FitResult, peaks)`` with peaks sorted by center.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    if x.size < 3 * k + 2:
        raise InvalidInputError(f"need at least {3 * k + 2} points for {k} peaks")
    if init is None:
        seeds, base = seed_peaks(x, y, k, smooth)
    else:
        if len(init) != k:
            raise InvalidInputError(f"init has {len(init)} peaks, expected {k}")
        seeds = [(pk.center, pk.hwhm, pk.amplitude) if isinstance(pk, LorentzianPeak)
                 else tuple(pk) for pk in init]
        base = float(np.percentile(y, 10))
    if baseline is not None:
        base = baseline
    p0 = np.array([v for s in seeds for v in s] + [base], dtype=float)
    names = tuple(f"{n}{i}" for i in range(k) for n in ("center", "hwhm", "amplitude")) + ("baseline",)
    res = solve_damped_lsq(lambda p: _multi_lorentzian(x, p) - y, p0,
                           jac=lambda p: _multi_lorentzian_jac(x, p),
                           sigma=sigma, absolute_sigma=absolute_sigma, names=names)
    # fold the sign symmetry back and order peaks by center
    p = res.params.copy()
    blocks = p[:-1].reshape(-1, 3)
    blocks[:, 1:] = np.abs(blocks[:, 1:])
    order = np.argsort(blocks[:, 0], kind="stable")
    perm = np.concatenate([np.arange(3 * i, 3 * i + 3) for i in order] + [[3 * k]])
    res.params = p[perm]
    res.covariance = res.covariance[np.ix_(perm, perm)]
    err = res.errors
    peaks = [LorentzianPeak(*res.params[3 * i:3 * i + 3], *err[3 * i:3 * i + 3]) for i in range(k)]
    res.extra["x"] = x
    return res, peaks


# ----------------------------------------------------------- decay envelope

def moving_average(y, window=5):
    """Centered moving average; edges use the available samples."""
    y = np.asarray(y, dtype=float)
    kernel = np.ones(window)
    num = np.convolve(y, kernel, mode="same")
    den = np.convolve(np.ones_like(y), kernel, mode="same")
    return num / den


def detect_envelope_maxima(tau, q, window=5, min_distance=1, min_prominence=0.0):
    """Local maxima of the smoothed transient, refined by a parabola through
    each maximum and its neighbours.

    ``min_distance`` (samples) and ``min_prominence`` discard maxima caused by
    noise or by faster components riding on the envelope; the defaults keep
    every strict 3-point maximum. Returns a list of (tau, q) in time order.
    """
    tau = np.asarray(tau, dtype=float)
    q = np.asarray(q, dtype=float)
    if tau.size < 5:
        raise InvalidInputError("need at least 5 points")
    s = moving_average(q, window)
    idx = np.flatnonzero((s[1:-1] > s[:-2]) & (s[1:-1] >= s[2:])) + 1
    if idx.size and (min_prominence > 0 or min_distance > 1):
        keep, props = signal.find_peaks(s, distance=max(min_distance, 1),
                                         prominence=min_prominence or None)
        idx = np.intersect1d(idx, keep)
    if idx.size == 0:
        raise NoMaximaError("no local maxima in the transient")
    out = []
    for i in idx:
        y0, y1, y2 = s[i - 1], s[i], s[i + 1]
        curv = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / curv if curv != 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
        h = tau[i + 1] - tau[i] if shift >= 0 else tau[i] - tau[i - 1]
        out.append((float(tau[i] + shift * h), float(y1 - 0.25 * (y0 - y2) * shift)))
    return out


def fit_exp_decay(points, sigma=None):
    """Fit A exp(-tau/T) to (tau, q) points; returns FitResult over (amplitude, decay_time).

    A straight line through log q seeds the nonlinear refinement.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InvalidInputError("need at least two (tau, q) points")
    t, q = pts[:, 0], pts[:, 1]
    if np.any(q <= 0):
        raise InvalidInputError("exponential fit needs strictly positive values")
    slope, intercept = np.polyfit(t, np.log(q), 1)
    if slope >= 0:
        raise InvalidInputError("values do not decay")
    p0 = np.array([np.exp(intercept), -1 / slope])

    def resid(p):
        return p[0] * np.exp(-t / p[1]) - q

    def jac(p):
        e = np.exp(-t / p[1])
        return np.column_stack([e, p[0] * e * t / p[1] ** 2])

    return solve_damped_lsq(resid, p0, jac=jac, sigma=sigma, names=("amplitude", "decay_time"))


@dataclass
class DecayReport:
    status: str  # "decay" or "no decay detected"
    decay_time: Measured = None  # ns
    amplitude: Measured = None
    maxima: list = field(default_factory=list)
    reason: str = ""


def decay_from_maxima(tau, q, freq_MHz, noise_sigma=0.0, window=5, significance=2.0,
                      max_ratio=10.0):
    """Envelope decay time from the maxima of the slowest oscillation.

    Maxima closer than 0.7 periods of ``freq_MHz`` are merged, and the
    prominence cut is three standard errors of the ``window``-point average.
    No decay is reported when the fit fails, when the time constant exceeds
    ``max_ratio`` record lengths, or when 1/T is within ``significance``
    sigma of zero.
    """
    tau = np.asarray(tau, dtype=float)
    dt_us = (tau[1] - tau[0]) * 1e-3
    distance = max(1, int(0.7 / (freq_MHz * dt_us))) if freq_MHz > 0 else 1
    prominence = 3 * noise_sigma / np.sqrt(window)
    try:
        maxima = detect_envelope_maxima(tau, q, window, distance, prominence)
        res = fit_exp_decay(maxima)
    except (NoMaximaError, InvalidInputError, RankDeficiencyError) as exc:
        return DecayReport("no decay detected", reason=str(exc))
    amp, T = res.params
    sA, sT = res.errors
    duration = tau[-1] - tau[0]
    reason = ""
    if not (T > 0 and T < max_ratio * duration):
        reason = f"time constant {T:.4g} ns beyond {max_ratio:g} record lengths"
    elif np.isfinite(sT) and sT > 0 and T / sT < significance:
        reason = f"decay rate within {significance:g} sigma of zero"
    if reason:
        return DecayReport("no decay detected", maxima=maxima, reason=reason)
    return DecayReport("decay", Measured(float(T), float(sT)), Measured(float(amp), float(sA)),
                       maxima)

"""Damped-oscillator fit of the memory kernel and its exact Laplace transform.

The model is

    g(t) = [ a1 exp(-b1 t) cos(w1 t) + c1 exp(-d1 t) sin(w2 t) ] u(t)

with u the unit step.  Its Laplace transform is the rational function

    G(s) = a1 (s + b1) / ((s + b1)^2 + w1^2) + c1 w2 / ((s + d1)^2 + w2^2),

a proper degree-3 / degree-4 ratio whose denominator roots sit strictly in
the left half-plane whenever b1, d1 > 0.

By default the fit pins G(0) = 0 exactly: the true kernel integrates to
zero over [0, inf) because omega = 0 lies inside the spectral gap, and an
unconstrained fit leaves a tiny sign-arbitrary DC residue that turns into a
spurious near-origin pole of the transport characteristic polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AcausalFitError, DomainError, FitDivergenceError
from .kernel import KernelSamples
from .numerics import Polynomial, fit_least_squares

__all__ = [
    "DampedOscFit",
    "RationalLaplace",
    "damped_osc",
    "fit_kernel",
    "laplace_of_fit",
]

_P = np.polynomial.polynomial


@dataclass(frozen=True)
class DampedOscFit:
    """Six damped-oscillator parameters plus fit diagnostics.

    Gauge: w1 >= 0 (cosine makes its sign unobservable) and w2 > 0 (a sign
    flip of (c1, w2) is absorbed into c1).  b1, d1 > 0 is enforced; a
    non-decaying fit would be acausal.
    """

    a1: float
    b1: float
    c1: float
    d1: float
    w1: float
    w2: float
    residual_norm: float = float("nan")
    fit_window: tuple = (0.0, 0.0)
    dc_pinned: bool = False

    def __post_init__(self):
        if not np.isfinite([self.a1, self.b1, self.c1, self.d1, self.w1, self.w2]).all():
            raise DomainError("fit parameters must be finite")
        if (self.a1 != 0.0 or self.c1 != 0.0) and (self.b1 <= 0.0 or self.d1 <= 0.0):
            raise AcausalFitError(
                f"decay rates must be positive, got b1={self.b1}, d1={self.d1}")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.a1, self.b1, self.c1, self.d1, self.w1, self.w2])

    def __call__(self, t):
        return damped_osc(self.params, t)

    def dc_value(self) -> float:
        """G(0) = integral of g over [0, inf)."""
        return (self.a1 * self.b1 / (self.b1 ** 2 + self.w1 ** 2)
                + self.c1 * self.w2 / (self.d1 ** 2 + self.w2 ** 2))


def damped_osc(params, t):
    """Evaluate the damped-oscillator model; zero for t < 0 (step factor)."""
    a1, b1, c1, d1, w1, w2 = params
    t = np.asarray(t, dtype=float)
    live = t >= 0.0
    tt = np.where(live, t, 0.0)
    out = (a1 * np.exp(-b1 * tt) * np.cos(w1 * tt)
           + c1 * np.exp(-d1 * tt) * np.sin(w2 * tt))
    return np.where(live, out, 0.0)


def _heuristic_init(t, y):
    """Start values: amplitude from y(0), decay from the 1/e point of the
    local-maxima envelope, frequency from the first zero crossing."""
    a1 = y[0]
    scale = max(abs(a1), np.max(np.abs(y)), 1e-300)

    # envelope from local maxima of |y|
    ay = np.abs(y)
    idx = [i for i in range(1, len(y) - 1) if ay[i] >= ay[i - 1] and ay[i] >= ay[i + 1]]
    b1 = 0.5
    for i in idx:
        if ay[i] < scale / np.e:
            b1 = 1.0 / max(t[i], 1e-6)
            break

    cross = np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]
    if cross.size:
        w1 = np.pi / max(t[cross[0] + 1], 1e-6)
    else:
        w1 = np.pi / max(t[-1], 1e-6)
    return np.array([a1, b1, 0.0, b1 / 10.0, w1, w1 / 2.0])


def _pin_c1(p5):
    """c1 from the exact-DC constraint G(0) = 0 given the other five."""
    a1, b1, d1, w1, w2 = p5
    return -a1 * b1 * (d1 ** 2 + w2 ** 2) / (w2 * (b1 ** 2 + w1 ** 2))


def fit_kernel(samples: KernelSamples, init=None, window=None,
               pin_dc=True) -> DampedOscFit:
    """Least-squares damped-oscillator fit of sampled kernel data.

    With ``pin_dc`` (default) the amplitude c1 is eliminated through the
    exact constraint G(0) = 0, leaving five free parameters.  ``init`` may
    override the heuristic start values (six entries, paper order).

    Raises
    ------
    DomainError
        Fewer than 50 samples or a window shorter than two oscillation
        periods of the started frequency.
    FitDivergenceError / AcausalFitError
        Fit failed, or converged to non-positive decay rates.
    """
    t = samples.times
    y = samples.values
    if window is not None:
        lo, hi = window
        keep = (t >= lo) & (t <= hi)
        t, y = t[keep], y[keep]
    if t.size < 50:
        raise DomainError("kernel fit needs at least 50 samples")

    if np.max(np.abs(y)) == 0.0:
        return DampedOscFit(0.0, 1.0, 0.0, 1.0, 0.0, 1.0, residual_norm=0.0,
                            fit_window=(float(t[0]), float(t[-1])),
                            dc_pinned=pin_dc)

    x0 = _heuristic_init(t, y) if init is None else np.asarray(init, dtype=float)
    if (t[-1] - t[0]) * abs(x0[4]) < 4.0 * np.pi:
        raise DomainError("fit window spans fewer than two oscillation periods")

    if pin_dc:
        def model5(p, tt):
            a1, b1, d1, w1, w2 = p
            return damped_osc([a1, b1, _pin_c1(p), d1, w1, w2], tt)
        res = fit_least_squares(model5, t, y, np.delete(x0, 2))
        a1, b1, d1, w1, w2 = res.params
        c1 = _pin_c1(res.params)
    else:
        res = fit_least_squares(damped_osc, t, y, x0)
        a1, b1, c1, d1, w1, w2 = res.params

    if not res.converged:
        raise FitDivergenceError("kernel fit did not converge")

    # gauge fixing: w1 >= 0; w2 > 0 with the sign moved into c1
    w1 = abs(w1)
    if w2 < 0:
        w2, c1 = -w2, -c1
    return DampedOscFit(a1=float(a1), b1=float(b1), c1=float(c1), d1=float(d1),
                        w1=float(w1), w2=float(w2),
                        residual_norm=float(res.residual_norm),
                        fit_window=(float(t[0]), float(t[-1])),
                        dc_pinned=pin_dc)


@dataclass(frozen=True)
class RationalLaplace:
    """Proper rational Laplace transform num(s)/den(s), real coefficients."""

    numerator: Polynomial
    denominator: Polynomial

    def __post_init__(self):
        if self.numerator.degree >= self.denominator.degree:
            raise DomainError("Laplace transform must be a proper rational function")
        if not (self.numerator.is_real and self.denominator.is_real):
            raise DomainError("Laplace transform must have real coefficients")
        rts = np.roots(self.denominator.coefficients[::-1])
        if np.any(rts.real >= 0.0):
            raise AcausalFitError("denominator roots must lie strictly in Re(s) < 0")

    def __call__(self, s):
        return self.numerator(s) / self.denominator(s)


def laplace_of_fit(fit: DampedOscFit) -> RationalLaplace:
    """Exact rational Laplace transform of the fitted g(t).

    Expanded over the common denominator
    ((s+b1)^2 + w1^2) ((s+d1)^2 + w2^2); degree 3 over degree 4.
    """
    q1 = _P.polyadd(_P.polypow([fit.b1, 1.0], 2), [fit.w1 ** 2])
    q2 = _P.polyadd(_P.polypow([fit.d1, 1.0], 2), [fit.w2 ** 2])
    den = _P.polymul(q1, q2)
    num = _P.polyadd(_P.polymul([fit.a1 * fit.b1, fit.a1], q2),
                     _P.polymul([fit.c1 * fit.w2], q1))
    num = np.asarray(num, dtype=float)
    while num.size > 1 and num[-1] == 0.0:
        num = num[:-1]
    return RationalLaplace(numerator=Polynomial(num),
                           denominator=Polynomial(np.asarray(den, dtype=float)))

"""Self-contained numerical kernels used by every other module.

Complex log-gamma (Lanczos), confluent hypergeometric functions M and U,
simultaneous polynomial root finding, adaptive quadrature, and a small
Levenberg-Marquardt least-squares driver.  Everything here is a pure
function of its inputs and safe to call concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _scipy_integrate

from .errors import (
    ConvergenceError,
    DegenerateParameterError,
    DivergenceError,
    DomainError,
    NonConvergenceError,
    PoleError,
    SingularJacobianError,
    ToleranceError,
)

__all__ = [
    "log_gamma",
    "kummer_m",
    "tricomi_u",
    "Polynomial",
    "RootSet",
    "find_roots",
    "QuadResult",
    "integrate_adaptive",
    "LeastSquaresResult",
    "fit_least_squares",
]


# ---------------------------------------------------------------------------
# complex log-gamma
# ---------------------------------------------------------------------------

# Lanczos g = 7, n = 9 coefficient set (Godfrey).  Gives ~15 significant
# digits over the half-plane Re(z) >= 0.5; the reflection formula covers the
# rest.
_LANCZOS_G = 7.0
_LANCZOS_C = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _log_sin_pi(z):
    """log(sin(pi z)), stable for large |Im z| where sin overflows."""
    z = np.asarray(z, dtype=complex)
    big = np.abs(z.imag) > 30.0
    out = np.empty(z.shape, dtype=complex)
    safe = np.where(big, 0.25j, z)
    out[...] = np.log(np.sin(np.pi * safe))
    if np.any(big):
        zb = z[big]
        sgn = np.sign(zb.imag)
        # sin(pi z) ~ -sgn * exp(-i sgn pi z) / (2i) for Im z -> +/- inf
        out[big] = (-1j * sgn * np.pi * zb + np.log(0.5) + 1j * sgn * np.pi / 2
                    + np.log1p(-np.exp(2j * sgn * np.pi * zb).real))
    return out


def log_gamma(z):
    """Complex log-gamma via Lanczos, with reflection for Re(z) < 0.5.

    exp(log_gamma(z)) equals Gamma(z) everywhere; on the reflection region
    the imaginary part may differ from the principal branch by a multiple of
    2*pi.  Accepts scalars or arrays.

    Raises
    ------
    PoleError
        If any element of ``z`` is a non-positive integer.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)

    at_pole = (z.imag == 0.0) & (z.real <= 0.0) & (z.real == np.round(z.real))
    if np.any(at_pole):
        raise PoleError(f"log_gamma pole at z={z[at_pole][0]}")

    out = np.empty(z.shape, dtype=complex)
    refl = z.real < 0.5
    zz = np.where(refl, 1.0 - z, z)

    w = zz - 1.0
    x = np.full(zz.shape, _LANCZOS_C[0], dtype=complex)
    for k in range(1, len(_LANCZOS_C)):
        x = x + _LANCZOS_C[k] / (w + k)
    t = w + _LANCZOS_G + 0.5
    core = _LOG_SQRT_2PI + (w + 0.5) * np.log(t) - t + np.log(x)

    out[...] = core
    if np.any(refl):
        out[refl] = np.log(np.pi) - _log_sin_pi(z[refl]) - core[refl]
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# Kummer M and Tricomi U
# ---------------------------------------------------------------------------

def kummer_m(a, b, z, tol=1e-16, max_terms=10000):
    """Confluent hypergeometric M(a, b, z) by its power series.

    Terms are accumulated until three consecutive terms fall below ``tol``
    relative to the running sum (or the term budget is hit).  All arguments
    broadcast; complex values are fine.

    Raises
    ------
    PoleError
        If ``b`` is a non-positive integer.
    ConvergenceError
        If the series does not settle within ``max_terms`` terms.
    """
    a, b, z = np.broadcast_arrays(*map(lambda v: np.asarray(v, dtype=complex), (a, b, z)))
    scalar = a.ndim == 0
    a, b, z = np.atleast_1d(a, b, z)

    bad_b = (b.imag == 0.0) & (b.real <= 0.0) & (b.real == np.round(b.real))
    if np.any(bad_b):
        raise PoleError(f"kummer_m undefined at non-positive integer b={b[bad_b][0]}")

    total = np.ones(a.shape, dtype=complex)
    term = np.ones(a.shape, dtype=complex)
    quiet = np.zeros(a.shape, dtype=np.int64)
    for n in range(max_terms):
        term = term * (a + n) / ((b + n) * (n + 1.0)) * z
        total = total + term
        small = np.abs(term) <= tol * np.maximum(np.abs(total), 1e-300)
        quiet = np.where(small, quiet + 1, 0)
        if np.all(quiet >= 3):
            break
    else:
        raise ConvergenceError(
            f"kummer_m series did not converge within {max_terms} terms "
            f"(max |z| = {np.abs(z).max():.3g})")
    if not np.all(np.isfinite(total)):
        raise ConvergenceError("kummer_m series produced non-finite values")
    return total[0] if scalar else total


def _gamma_ratio(num, den):
    """Gamma(num)/Gamma(den), returning 0 where Gamma(den) has a pole."""
    num = np.asarray(num, dtype=complex)
    den = np.asarray(den, dtype=complex)
    den_pole = (den.imag == 0.0) & (den.real <= 0.0) & (den.real == np.round(den.real))
    if np.any(den_pole):
        safe_den = np.where(den_pole, 1.0, den)
        ratio = np.exp(log_gamma(num) - log_gamma(safe_den))
        return np.where(den_pole, 0.0, ratio)
    return np.exp(log_gamma(num) - log_gamma(den))


def _tricomi_u_integral(a, b, z, tol=1e-12):
    # Laplace representation, valid for Re(a) > 0, z > 0.  Used only for the
    # degenerate integer-b case the connection formula cannot reach.
    a = complex(a)
    b = complex(b)
    z = float(z)
    if a.real <= 0:
        raise DegenerateParameterError(
            f"tricomi_u with integer b-1 requires Re(a) > 0, got a={a}")

    def f_re(t):
        return (np.exp(-z * t) * t ** (a - 1.0) * (1.0 + t) ** (b - a - 1.0)).real

    def f_im(t):
        return (np.exp(-z * t) * t ** (a - 1.0) * (1.0 + t) ** (b - a - 1.0)).imag

    re = integrate_adaptive(f_re, 0.0, np.inf, tol=tol).value
    im = integrate_adaptive(f_im, 0.0, np.inf, tol=tol).value
    return (re + 1j * im) * np.exp(-log_gamma(a))


def tricomi_u(a, b, z, tol=1e-16, max_terms=10000):
    """Confluent hypergeometric U(a, b, z) for z > 0.

    Uses the connection formula

        U = G(1-b)/G(a-b+1) M(a,b,z) + G(b-1)/G(a) z^(1-b) M(a-b+1,2-b,z),

    which requires b-1 non-integer.  For integer b-1 (and Re(a) > 0) the
    Laplace integral representation is used instead; the two meet to
    quadrature accuracy.  Beware the formula's inherent cancellation for
    large z: accuracy degrades like exp(z) * eps, so callers should keep
    z below ~45 (the eigenfunction weight exp(-z/2) makes larger z
    irrelevant here).
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    zc = np.asarray(z, dtype=complex)
    scalar = max(a.ndim, b.ndim, zc.ndim) == 0

    bm1 = b - 1.0
    b_int = (np.asarray(bm1).imag == 0.0) & (np.asarray(bm1).real == np.round(np.asarray(bm1).real))
    if np.any(b_int):
        if not scalar:
            raise DegenerateParameterError(
                "vectorized tricomi_u requires non-integer b-1")
        return _tricomi_u_integral(complex(a), complex(b), float(np.real(z)))

    m1 = kummer_m(a, b, zc, tol=tol, max_terms=max_terms)
    m2 = kummer_m(a - b + 1.0, 2.0 - b, zc, tol=tol, max_terms=max_terms)
    c1 = _gamma_ratio(1.0 - b, a - b + 1.0)
    c2 = _gamma_ratio(b - 1.0, a)
    out = c1 * m1 + c2 * zc ** (1.0 - b) * m2
    return complex(out) if scalar else out


# ---------------------------------------------------------------------------
# polynomials and root finding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """Dense polynomial with coefficients in ascending degree order."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=complex))
        if c.size == 0:
            raise DomainError("polynomial needs at least one coefficient")
        if c.size > 1 and c[-1] == 0:
            raise DomainError("leading coefficient must be nonzero")
        if not np.all(np.isfinite(c)):
            raise DomainError("polynomial coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        out = np.zeros(s.shape, dtype=complex)
        for c in self.coefficients[::-1]:
            out = out * s + c
        return out

    def derivative(self) -> "Polynomial":
        c = self.coefficients
        if c.size == 1:
            return Polynomial(np.zeros(1, dtype=complex))
        return Polynomial(c[1:] * np.arange(1, c.size))

    @property
    def is_real(self) -> bool:
        return bool(np.all(np.abs(self.coefficients.imag)
                           <= 1e-14 * np.max(np.abs(self.coefficients))))


@dataclass(frozen=True)
class RootSet:
    """Roots of a polynomial plus a multiplicity flag and residual diagnostic."""

    roots: np.ndarray
    multiple: bool
    max_residual: float


def find_roots(p: Polynomial, tol=1e-12, max_iter=400, sep_tol=1e-7) -> RootSet:
    """All complex roots of ``p`` by Aberth-Ehrlich simultaneous iteration.

    Each root is polished with Newton steps; roots closer than
    ``sep_tol * max|root|`` to each other (or repeated roots at the origin)
    set the ``multiple`` flag.

    Raises
    ------
    NonConvergenceError
        If the iteration budget is exhausted before the update stalls.
    """
    c = np.asarray(p.coefficients, dtype=complex)
    if c.size < 2:
        raise DomainError("find_roots requires degree >= 1")

    # deflate exact roots at the origin
    nzero = 0
    while nzero < c.size - 1 and c[nzero] == 0:
        nzero += 1
    c = c[nzero:]
    n = c.size - 1

    roots = np.zeros(0, dtype=complex)
    if n > 0:
        cn = c / c[-1]
        radius = 1.0 + np.max(np.abs(cn[:-1]))
        angles = 2.0 * np.pi * np.arange(n) / n + 0.4
        roots = radius * np.exp(1j * angles)

        poly = Polynomial(c)
        dpoly = poly.derivative()
        converged = False
        for _ in range(max_iter):
            pv = poly(roots)
            dv = dpoly(roots)
            w = np.where(dv != 0, pv / np.where(dv == 0, 1, dv), 0.0)
            diff = roots[:, None] - roots[None, :]
            np.fill_diagonal(diff, np.inf)
            s = np.sum(1.0 / diff, axis=1)
            denom = 1.0 - w * s
            step = np.where(np.abs(denom) > 1e-300, w / np.where(denom == 0, 1, denom), w)
            roots = roots - step
            if np.all(np.abs(step) <= 1e-14 * (1.0 + np.abs(roots))):
                converged = True
                break
        if not converged:
            raise NonConvergenceError("Aberth iteration exhausted its budget")

        # Newton polish
        for _ in range(3):
            pv = poly(roots)
            dv = dpoly(roots)
            ok = np.abs(dv) > 1e-300
            roots = np.where(ok, roots - pv / np.where(ok, dv, 1), roots)

        scale = np.max(np.abs(c)) * np.maximum(1.0, np.abs(roots)) ** n
        max_res = float(np.max(np.abs(poly(roots)) / scale))
        if max_res > max(tol, 1e-9):
            raise NonConvergenceError(
                f"root residual {max_res:.3g} above tolerance {tol:.3g}")
    else:
        max_res = 0.0

    all_roots = np.concatenate([np.zeros(nzero, dtype=complex), roots])
    order = np.lexsort((all_roots.imag, all_roots.real))
    all_roots = all_roots[order]

    multiple = nzero > 1
    if all_roots.size > 1:
        scale = max(1.0, float(np.max(np.abs(all_roots))))
        d = np.abs(all_roots[:, None] - all_roots[None, :])
        np.fill_diagonal(d, np.inf)
        multiple = multiple or bool(np.min(d) < sep_tol * scale)

    return RootSet(roots=all_roots, multiple=multiple, max_residual=max_res)


# ---------------------------------------------------------------------------
# adaptive quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float


def integrate_adaptive(f, a, b, tol=1e-10, limit=300) -> QuadResult:
    """Adaptive quadrature of ``f`` over (a, b); b may be +inf.

    Infinite upper limits are mapped to a finite interval with the
    x = a + tan(theta) substitution before handing the panels to QUADPACK.
    The returned error bound is checked against ``tol`` (absolute, with a
    relative allowance for large values).

    Raises
    ------
    ToleranceError
        If the refinement budget is exhausted above the requested tolerance.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _scipy_integrate.IntegrationWarning)
        if np.isinf(b):
            def g(theta):
                x = a + np.tan(theta)
                return f(x) / np.cos(theta) ** 2
            val, err = _scipy_integrate.quad(
                g, 0.0, np.pi / 2.0, epsabs=tol, epsrel=tol, limit=limit)
        else:
            val, err = _scipy_integrate.quad(
                f, a, b, epsabs=tol, epsrel=tol, limit=limit)
    if not np.isfinite(val):
        raise ToleranceError("quadrature produced a non-finite value")
    if err > 50.0 * tol * max(1.0, abs(val)):
        raise ToleranceError(
            f"quadrature error bound {err:.3g} exceeds tolerance {tol:.3g}")
    return QuadResult(value=float(val), error=float(err))


# ---------------------------------------------------------------------------
# Levenberg-Marquardt least squares
# ---------------------------------------------------------------------------

@dataclass
class LeastSquaresResult:
    params: np.ndarray
    residual_norm: float
    converged: bool
    n_iter: int
    residual_history: list = field(default_factory=list)


def fit_least_squares(model, tdata, ydata, init, xtol=1e-12, ftol=1e-14,
                      max_iter=400, fd_step=1e-6) -> LeastSquaresResult:
    """Levenberg-Marquardt minimizer of sum((model(params, t) - y)^2).

    ``model`` maps (params, t-array) to a y-array.  The Jacobian is formed by
    forward differences with relative step ``fd_step``.  Accepted iterations
    never increase the residual norm; the history of accepted norms is
    returned for inspection.

    Raises
    ------
    DivergenceError
        If residuals become non-finite.
    SingularJacobianError
        If the damped normal equations stay singular.
    """
    t = np.asarray(tdata, dtype=float)
    y = np.asarray(ydata, dtype=float)
    if t.size == 0:
        raise DomainError("fit_least_squares needs non-empty data")
    x = np.asarray(init, dtype=float).copy()
    npar = x.size

    def residual(params):
        r = np.asarray(model(params, t), dtype=float) - y
        if not np.all(np.isfinite(r)):
            raise DivergenceError("model produced non-finite residuals")
        return r

    r = residual(x)
    norm = float(np.linalg.norm(r))
    history = [norm]
    mu = 1e-3
    converged = False
    it = 0

    for it in range(1, max_iter + 1):
        J = np.empty((t.size, npar))
        for j in range(npar):
            h = fd_step * max(abs(x[j]), 1.0)
            xp = x.copy()
            xp[j] += h
            J[:, j] = (residual(xp) - r) / h
        g = J.T @ r
        if np.linalg.norm(g, np.inf) < 1e-14 * max(1.0, norm):
            converged = True
            break
        A = J.T @ J
        diag = np.diag(A).copy()
        diag[diag <= 0] = np.max(diag) if np.max(diag) > 0 else 1.0

        accepted = False
        for _ in range(60):
            try:
                step = np.linalg.solve(A + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            if not np.all(np.isfinite(step)):
                mu *= 10.0
                continue
            x_new = x + step
            try:
                r_new = residual(x_new)
            except DivergenceError:
                mu *= 10.0
                continue
            norm_new = float(np.linalg.norm(r_new))
            if norm_new <= norm:
                x, r, norm = x_new, r_new, norm_new
                history.append(norm)
                mu = max(mu * 0.3, 1e-14)
                accepted = True
                if np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol):
                    converged = True
                if len(history) > 2 and abs(history[-2] - norm) <= ftol * max(norm, 1.0):
                    converged = True
                break
            mu *= 10.0
            if mu > 1e14:
                break
        if not accepted:
            if mu > 1e14:
                raise SingularJacobianError(
                    "damped normal equations made no progress")
            converged = True
            break
        if converged:
            break

    return LeastSquaresResult(params=x, residual_norm=norm, converged=converged,
                              n_iter=it, residual_history=history)

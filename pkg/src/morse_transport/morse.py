"""Spectral data of a shallow Morse trap.

The trap V(q) = D (exp(-2 a q) - 2 exp(-a q)) is kept shallow enough to hold
exactly one bound state; everything else is a scattering continuum labeled
by a dimensionless momentum kappa.  All eigenfunctions are evaluated in the
co-moving frame (q = x - trap center), so the transition moments computed
here carry no time dependence.

Reduced units with hbar = 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import (
    DomainError,
    MultiBoundStateError,
    NoBoundStateError,
    RealificationError,
)

__all__ = [
    "MorseModel",
    "MatrixElement",
    "build_model",
    "continuum_frequency",
    "gap_frequency",
    "bound_eigenfunction",
    "continuum_eigenfunction",
    "continuum_norm",
    "dipole_moment_closed",
    "dipole_moment_quadrature",
    "a_coefficient",
    "matrix_element",
]

# Above this z the continuum eigenfunction is exponentially dead
# (exp(-z/2) < 2e-10) while the connection formula for U loses ~exp(z)*eps
# to cancellation, so we cut the wall region off entirely.
Z_CUTOFF = 45.0


@dataclass(frozen=True)
class MorseModel:
    """Morse trap parameters plus derived single-bound-state data.

    D : trap depth, a : inverse-width, m : particle mass.
    N in (0, 1) guarantees exactly one bound level; omega0 < 0 is its
    frequency and m_star = m / a**2 the effective mass of the continuum
    dispersion omega_kappa = kappa**2 / (2 m_star).
    """

    D: float
    a: float
    m: float
    N: float
    m_star: float
    omega0: float

    @property
    def gap(self) -> float:
        """Distance |omega0| from the bound level to the continuum edge."""
        return -self.omega0


def build_model(D: float, a: float, m: float) -> MorseModel:
    """Validate trap parameters and derive the single-bound-state data.

    Raises
    ------
    NoBoundStateError / MultiBoundStateError
        Unless 0 < N < 1, with N = sqrt(2 m D)/a - 1/2.
    """
    if not (D > 0 and a > 0 and m > 0):
        raise DomainError("D, a, m must all be positive")
    N = math.sqrt(2.0 * m * D) / a - 0.5
    if N <= 0:
        raise NoBoundStateError(f"N = {N:.6g} <= 0: trap holds no bound state")
    if N >= 1:
        raise MultiBoundStateError(
            f"N = {N:.6g} >= 1: trap holds more than one bound state")
    m_star = m / a ** 2
    omega0 = -(a ** 2 / (2.0 * m)) * N ** 2
    # consistency with the closed form -(D - sqrt(D/(2 m*)) + 1/(8 m*))
    omega0_alt = -(D - math.sqrt(D / (2.0 * m_star)) + 1.0 / (8.0 * m_star))
    if abs(omega0 - omega0_alt) > 1e-12 * abs(omega0):
        raise DomainError("inconsistent omega0 derivations; parameters suspect")
    return MorseModel(D=float(D), a=float(a), m=float(m), N=N,
                      m_star=m_star, omega0=omega0)


def continuum_frequency(model: MorseModel, kappa):
    """Continuum dispersion omega_kappa = a^2 kappa^2 / (2 m), kappa >= 0."""
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise DomainError("kappa must be >= 0")
    return model.a ** 2 * kappa ** 2 / (2.0 * model.m)


def gap_frequency(model: MorseModel, kappa):
    """Bound-to-continuum gap omega_{kappa 0} = omega_kappa - omega0 > 0."""
    return continuum_frequency(model, kappa) - model.omega0


def _z_of(model: MorseModel, x):
    return (2.0 * model.N + 1.0) * np.exp(-model.a * np.asarray(x, dtype=float))


def bound_norm(model: MorseModel) -> float:
    """Normalization of the n = 0 bound state, sqrt(a / Gamma(2N)).

    Fixed by direct normalization of z^N e^(-z/2) over dx = -dz/(a z); the
    commonly printed normalization constant misses the sqrt(a) factor.
    """
    return math.sqrt(model.a / math.gamma(2.0 * model.N))


def bound_eigenfunction(model: MorseModel, x):
    """Ground-state wavefunction phi_0(x), unit-normalized over dx."""
    z = _z_of(model, x)
    return bound_norm(model) * z ** model.N * np.exp(-z / 2.0)


def continuum_norm(model: MorseModel, kappa):
    """Delta-normalization factor for the continuum states.

    N(kappa) = sqrt(a) |Gamma(-N - i kappa)| sqrt(kappa sinh(2 pi kappa)) / pi,
    evaluated in log space so large kappa cannot overflow.
    """
    kappa = np.asarray(kappa, dtype=float)
    out = np.zeros(kappa.shape)
    pos = kappa > 0
    if np.any(pos):
        kp = kappa[pos]
        lg = numerics.log_gamma(-model.N - 1j * kp).real
        # log(sinh(2 pi k)) = 2 pi k + log((1 - exp(-4 pi k)) / 2)
        log_sinh = 2.0 * np.pi * kp + np.log1p(-np.exp(-4.0 * np.pi * kp)) - math.log(2.0)
        out[pos] = np.exp(lg - math.log(math.pi) + 0.5 * (np.log(kp) + log_sinh)
                          + 0.5 * math.log(model.a))
    return out if out.ndim else float(out)


def _phi_kappa_matrix(model: MorseModel, kappa, x):
    """Continuum wavefunctions on a grid, shape (len(x), len(kappa)).

    Returns the complex values before realification; the wall region
    z > Z_CUTOFF is set to zero (the true amplitude there is < 2e-10 of the
    oscillatory amplitude).
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(kappa <= 0):
        raise DomainError("continuum states need kappa > 0")
    z = _z_of(model, x)
    live = z <= Z_CUTOFF
    zl = z[live]

    K, Z = np.meshgrid(kappa, zl, indexing="ij")
    a_par = -model.N - 1j * K
    b_par = 1.0 - 2j * K
    u = numerics.tricomi_u(a_par, b_par, Z.astype(complex))
    vals = (Z.astype(complex) ** (-1j * K)) * np.exp(-Z / 2.0) * u
    norm = continuum_norm(model, kappa)

    out = np.zeros((x.size, kappa.size), dtype=complex)
    out[live, :] = vals.T * norm[None, :]
    return out


def continuum_eigenfunction(model: MorseModel, kappa: float, x: float) -> float:
    """Continuum wavefunction phi_kappa(x), a real number.

    The underlying expression is complex; its imaginary residue is checked
    against the local amplitude envelope and must stay below 1e-8 of it,
    otherwise the special-function evaluation is deemed inaccurate.

    Raises
    ------
    RealificationError
        If the imaginary residue exceeds the tolerance.
    """
    val = _phi_kappa_matrix(model, [float(kappa)], [float(x)])[0, 0]
    z = float(_z_of(model, x))
    if z > Z_CUTOFF:
        return 0.0
    envelope = max(abs(val), continuum_norm(model, float(kappa)) * math.exp(-z / 2.0))
    if abs(val.imag) > 1e-8 * max(envelope, 1e-300):
        raise RealificationError(
            f"imaginary residue {val.imag:.3g} too large for phi(kappa={kappa}, x={x})")
    return float(val.real)


def _trap_force_factor(model: MorseModel, q):
    # dV/dq up to the sign carried by the velocity: 2 a D (exp(-2aq) - exp(-aq))
    q = np.asarray(q, dtype=float)
    return 2.0 * model.a * model.D * (np.exp(-2.0 * model.a * q) - np.exp(-model.a * q))


def dipole_moment_closed(model: MorseModel, kappa):
    """Bound-continuum transition moment mu~_{0 kappa} in closed form.

    mu~ = 2 D N0 N(kappa) / (2N+1)^2
          * [ |Gamma(N+2+i kappa)|^2 - (2N+1) |Gamma(N+1+i kappa)|^2 ],
    which is manifestly real.  Vectorized over kappa.
    """
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa <= 0):
        raise DomainError("kappa must be > 0")
    g1 = np.exp(2.0 * numerics.log_gamma(model.N + 2.0 + 1j * kappa).real)
    g2 = np.exp(2.0 * numerics.log_gamma(model.N + 1.0 + 1j * kappa).real)
    pref = 2.0 * model.D * bound_norm(model) * continuum_norm(model, kappa) \
        / (2.0 * model.N + 1.0) ** 2
    out = pref * (g1 - (2.0 * model.N + 1.0) * g2)
    return out if out.ndim else float(out)


def dipole_moment_quadrature(model: MorseModel, kappa: float, tol=1e-10) -> float:
    """mu~_{0 kappa} by direct quadrature of phi_0 * dV/dq * phi_kappa.

    The oracle partner of :func:`dipole_moment_closed`; the two agree to
    better than 1e-6 relative on the physically relevant kappa range.
    """
    kappa = float(kappa)
    if kappa <= 0:
        raise DomainError("kappa must be > 0")
    q_min = -math.log(Z_CUTOFF / (2.0 * model.N + 1.0)) / model.a
    # integrand decays like exp(-a N q) for q -> +inf
    q_max = 30.0 / (model.a * min(model.N, 1.0)) + 10.0

    def f(q):
        phi0 = bound_eigenfunction(model, q)
        phik = _phi_kappa_matrix(model, [kappa], [q])[0, 0].real
        return phi0 * _trap_force_factor(model, q) * phik

    res = numerics.integrate_adaptive(f, q_min, q_max, tol=tol)
    return res.value


def a_coefficient(model: MorseModel, kappa):
    """Leakage weight a_kappa = |mu~_{0 kappa}|^2 / omega_{kappa 0}^2 >= 0."""
    kappa = np.asarray(kappa, dtype=float)
    mu = dipole_moment_closed(model, kappa)
    w = gap_frequency(model, kappa)
    out = np.abs(mu) ** 2 / w ** 2
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MatrixElement:
    """Per-kappa coupling record: moment, gap frequency, leakage weight."""

    kappa: float
    mu_tilde: float
    omega_k0: float
    a_kappa: float


def matrix_element(model: MorseModel, kappa: float) -> MatrixElement:
    mu = float(dipole_moment_closed(model, kappa))
    w = float(gap_frequency(model, kappa))
    return MatrixElement(kappa=float(kappa), mu_tilde=mu, omega_k0=w,
                         a_kappa=mu * mu / (w * w))

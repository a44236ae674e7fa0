"""Constrained Euler-Lagrange optimization of the trap velocity.

The stationarity condition lambda * p''(t) = conv(p, kernel)(t) under the
fluence constraint integral(p'(tau)^2) = E is solved in the Laplace domain:
with G(s) the kernel transform, the optimal velocity transform is

    P(s) = p'(0) / (s^2 - G(s)/lambda),

inverted by locating the roots of Q(s) = s^2 den(s) - num(s)/lambda and
summing simple-pole residues.  The trap starts at rest (p(0) = 0) but needs
a nonzero initial acceleration p'(0) to move at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateInputError,
    DomainError,
    MultiplePoleError,
    NonConvergenceError,
    RealificationError,
    ZeroAccelerationError,
    ZeroLambdaError,
)
from .fitting import DampedOscFit, RationalLaplace, laplace_of_fit
from .kernel import KernelSamples
from .numerics import Polynomial, find_roots

__all__ = [
    "Trajectory",
    "PoleClassification",
    "characteristic_polynomial",
    "solve_trajectory",
    "velocity",
    "position",
    "acceleration",
    "fluence",
    "fluence_matched_horizon",
    "el_residual",
    "lagrange_selfcheck",
    "classify_poles",
    "lambda_sweep",
]

_P = np.polynomial.polynomial


# ---------------------------------------------------------------------------
# Laplace-domain solution
# ---------------------------------------------------------------------------

def characteristic_polynomial(gl: RationalLaplace, lam: float) -> Polynomial:
    """Q(s) = s^2 den(s) - num(s)/lambda; degree 6 for the degree-4 kernel."""
    if lam == 0.0:
        raise ZeroLambdaError("Lagrange multiplier must be nonzero")
    den = gl.denominator.coefficients.real
    num = gl.numerator.coefficients.real
    q = _P.polysub(_P.polymul([0.0, 0.0, 1.0], den), num / lam)
    return Polynomial(np.asarray(q, dtype=float))


@dataclass(frozen=True)
class Trajectory:
    """Pole/residue expansion of the optimal velocity p(t) = sum r_i e^{s_i t}.

    The (pole, residue) multiset is closed under conjugation, sum(r_i) = 0
    (rest start) and sum(r_i s_i) = p'(0).
    """

    poles: np.ndarray
    residues: np.ndarray
    lam: float
    p_dot0: float
    horizon: float

    def __post_init__(self):
        p = np.asarray(self.poles, dtype=complex)
        r = np.asarray(self.residues, dtype=complex)
        if p.shape != r.shape or p.ndim != 1:
            raise DomainError("poles and residues must be matching 1-d arrays")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "poles", p)
        object.__setattr__(self, "residues", r)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.residues == 0))


def solve_trajectory(fit: DampedOscFit, lam: float, p_dot0: float = 1.0,
                     horizon: float = 30.0) -> Trajectory:
    """Solve the Euler-Lagrange equation for the fitted kernel.

    Residues are r_i = p'(0) den(s_i) / Q'(s_i) at the simple roots s_i of
    the characteristic polynomial.

    Raises
    ------
    ZeroLambdaError / ZeroAccelerationError / MultiplePoleError
    """
    if p_dot0 == 0.0:
        raise ZeroAccelerationError(
            "p'(0) = 0 admits only the trivial no-transport solution")
    if horizon <= 0.0:
        raise DomainError("horizon must be positive")
    gl = laplace_of_fit(fit)
    q = characteristic_polynomial(gl, lam)
    rootset = find_roots(q)
    roots = rootset.roots
    scale = max(1.0, float(np.max(np.abs(roots))))
    d = np.abs(roots[:, None] - roots[None, :])
    np.fill_diagonal(d, np.inf)
    if rootset.multiple or np.min(d) <= 1e-8 * scale:
        raise MultiplePoleError(
            f"pole separation {np.min(d):.3g} below tolerance; residues unreliable")

    dq = q.derivative()
    residues = p_dot0 * gl.denominator(roots) / dq(roots)

    if abs(np.sum(residues)) > 1e-8 * np.max(np.abs(residues)):
        raise NonConvergenceError("residue sum violates the rest initial condition")
    if abs(np.sum(residues * roots) - p_dot0) > 1e-8 * max(1.0, abs(p_dot0)):
        raise NonConvergenceError("residues violate the initial-acceleration condition")
    return Trajectory(poles=roots, residues=residues, lam=float(lam),
                      p_dot0=float(p_dot0), horizon=float(horizon))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _check_range(traj: Trajectory, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > traj.horizon * (1.0 + 1e-12)):
        raise DomainError("t outside [0, horizon]")
    return t


def _realify(val, scale, what):
    scale = np.maximum(scale, 1e-300)
    if np.any(np.abs(val.imag) > 1e-9 * np.maximum(scale, 1.0)):
        raise RealificationError(f"{what} has imaginary residue above tolerance")
    return val.real


def velocity(traj: Trajectory, t):
    """Trap velocity p(t) = Re sum r_i exp(s_i t); p(0) = 0."""
    t = _check_range(traj, t)
    e = np.exp(np.multiply.outer(t, traj.poles))
    val = e @ traj.residues
    scale = np.abs(e) @ np.abs(traj.residues)
    return _realify(val, scale, "velocity")


def acceleration(traj: Trajectory, t):
    """p'(t) from the pole expansion; p'(0) equals the stored p_dot0."""
    t = _check_range(traj, t)
    rs = traj.residues * traj.poles
    e = np.exp(np.multiply.outer(t, traj.poles))
    return _realify(e @ rs, np.abs(e) @ np.abs(rs), "acceleration")


def _expm1_over(z, t):
    """(exp(z t) - 1)/z elementwise with the z -> 0 limit t."""
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    zt = np.multiply.outer(t, z) if t.ndim else t * z
    small = np.abs(zt) < 1e-8
    safe = np.where(np.abs(z) < 1e-300, 1.0, z)
    out = np.where(small,
                   (t[..., None] if t.ndim else t) * (1.0 + zt / 2.0 + zt * zt / 6.0),
                   (np.exp(zt) - 1.0) / safe)
    return out


def position(traj: Trajectory, t):
    """Trap displacement x(t) = Re sum r_i (exp(s_i t) - 1)/s_i, x(0) = 0."""
    t = _check_range(traj, t)
    tt = np.atleast_1d(t)
    terms = _expm1_over(traj.poles, tt)
    val = terms @ traj.residues
    scale = np.abs(terms) @ np.abs(traj.residues)
    out = _realify(val, scale, "position")
    return out if np.ndim(t) else float(out[0])


def fluence(traj: Trajectory, horizon: float | None = None) -> float:
    """E(T) = integral_0^T p'(tau)^2 dtau in closed form.

    Pair exponents s_i + s_j that cancel exactly contribute their
    linear-in-T limit term instead of a 0/0.
    """
    T = traj.horizon if horizon is None else float(horizon)
    rs = traj.residues * traj.poles
    if np.all(rs == 0):
        return 0.0
    s_sum = np.add.outer(traj.poles, traj.poles)
    small = np.abs(s_sum) * T < 1e-10
    safe = np.where(small, 1.0, s_sum)
    integ = np.where(small, T * (1.0 + s_sum * T / 2.0), np.expm1(safe * T) / safe)
    val = complex(np.outer(rs, rs).ravel() @ integ.ravel())
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise RealificationError("fluence came out complex")
    return float(val.real)


def fluence_matched_horizon(traj: Trajectory, target: float,
                            t_lo=0.05, t_hi=60.0) -> float:
    """Horizon T with E(T) = target; E is monotone, so T is unique.

    Raises
    ------
    DegenerateInputError
        If the target is not bracketed on [t_lo, t_hi].
    """
    f = lambda T: fluence(traj, T) - target
    lo, hi = f(t_lo), f(t_hi)
    if lo > 0 or hi < 0:
        raise DegenerateInputError(
            f"E({t_lo}) = {lo + target:.4g}, E({t_hi}) = {hi + target:.4g} "
            f"do not bracket {target}")
    return float(brentq(f, t_lo, t_hi, xtol=1e-12, rtol=1e-14))


# ---------------------------------------------------------------------------
# self-consistency diagnostics
# ---------------------------------------------------------------------------

def _fit_exponentials(fit: DampedOscFit):
    """g(t) = sum_m B_m exp(q_m t) over four complex exponentials."""
    B = np.array([fit.a1 / 2.0, fit.a1 / 2.0, fit.c1 / 2j, -fit.c1 / 2j])
    q = np.array([-fit.b1 + 1j * fit.w1, -fit.b1 - 1j * fit.w1,
                  -fit.d1 + 1j * fit.w2, -fit.d1 - 1j * fit.w2])
    return B, q


def _convolution_closed(traj: Trajectory, fit: DampedOscFit, t):
    """conv(t) = integral_0^t p(tau) g(t - tau) dtau, exactly."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    B, q = _fit_exponentials(fit)
    out = np.zeros(t.shape, dtype=complex)
    for r, s in zip(traj.residues, traj.poles):
        for Bm, qm in zip(B, q):
            dz = s - qm
            if abs(dz) < 1e-12:
                out += r * Bm * t * np.exp(s * t)
            else:
                out += r * Bm * (np.exp(s * t) - np.exp(qm * t)) / dz
    return out.real


def _convolution_numeric(traj: Trajectory, kernel_fn, t, n=800):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.shape)
    for i, ti in enumerate(t):
        if ti == 0.0:
            out[i] = 0.0
            continue
        taus = np.linspace(0.0, ti, n | 1)
        vals = velocity(traj, taus) * kernel_fn(ti - taus)
        out[i] = np.trapezoid(vals, taus)
    return out


def el_residual(traj: Trajectory, fit: DampedOscFit, t_grid,
                kernel_fn=None) -> float:
    """Normalized Euler-Lagrange residual on a grid.

    max_t |lambda p''(t) - conv(p, g)(t)| / max_t |lambda p''(t)|.  With the
    fitted kernel (``kernel_fn`` None) the convolution is closed-form and
    the residual is a pure roundoff measure of the Laplace inversion; with
    the true kernel it reports the fit-model error instead.
    """
    t = np.asarray(t_grid, dtype=float)
    if traj.is_zero:
        return 0.0
    # second derivative of the velocity profile, sum r_i s_i^2 exp(s_i t)
    rs2 = traj.residues * traj.poles ** 2
    e = np.exp(np.multiply.outer(t, traj.poles))
    lhs = traj.lam * _realify(e @ rs2, np.abs(e) @ np.abs(rs2), "p''")
    if kernel_fn is None:
        rhs = _convolution_closed(traj, fit, t)
    else:
        rhs = _convolution_numeric(traj, kernel_fn, t)
    denom = np.max(np.abs(lhs))
    if denom == 0.0:
        return 0.0
    return float(np.max(np.abs(lhs - rhs)) / denom)


def lagrange_selfcheck(traj: Trajectory, kernel, horizon=None, n=2001) -> float:
    """Recovered-over-input ratio for |lambda| from the fluence identity.

    |lambda|_rec = sqrt( integral_0^T D(tau)^2 dtau / E ) with
    D(tau) = integral_0^tau conv(p, kernel).  The identity drops the
    initial-acceleration boundary terms, so the ratio approaches 1 only
    once the growing part of the trajectory dominates p'(0); expect ~1
    for horizons a couple of oscillation periods long.

    ``kernel`` may be a DampedOscFit (closed-form convolution) or a
    KernelSamples (interpolated numeric convolution).  Sign of lambda is
    not recoverable; only the magnitude ratio is returned.
    """
    if traj.is_zero:
        raise DegenerateInputError("zero trajectory has no recoverable multiplier")
    T = traj.horizon if horizon is None else float(horizon)
    t = np.linspace(0.0, T, n | 1)
    if isinstance(kernel, DampedOscFit):
        conv = _convolution_closed(traj, kernel, t)
    elif isinstance(kernel, KernelSamples):
        fn = lambda dt: np.interp(np.abs(dt), kernel.times, kernel.values)
        conv = _convolution_numeric(traj, fn, t)
    else:
        conv = _convolution_numeric(traj, kernel, t)
    h = t[1] - t[0]
    # cumulative Simpson via trapezoid on the fine grid
    D = np.concatenate([[0.0], np.cumsum((conv[1:] + conv[:-1]) * 0.5 * h)])
    num = np.trapezoid(D * D, t)
    E = fluence(traj, T)
    if E <= 0.0:
        raise DegenerateInputError("fluence must be positive")
    return float(np.sqrt(num / E) / abs(traj.lam))


# ---------------------------------------------------------------------------
# pole classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoleClassification:
    n_real_positive: int
    n_real_negative: int
    n_neutral: int
    n_complex_rhp_pairs: int
    n_complex_lhp_pairs: int
    rhp_only_conjugate_pairs: bool
    verdict: str


def classify_poles(traj: Trajectory, tol=1e-9) -> PoleClassification:
    """Count pole types and issue a stability verdict.

    Real/imaginary parts within ``tol`` * scale of zero are treated as
    exactly zero (the DC-pinned kernel fit places one pole exactly at the
    origin).  Verdicts: "stable", "divergent-exponential" (a positive real
    pole), "growing-oscillatory" (right-half-plane poles only in conjugate
    pairs), "mixed".
    """
    s = traj.poles
    scale = max(1.0, float(np.max(np.abs(s))))
    re = np.where(np.abs(s.real) <= tol * scale, 0.0, s.real)
    im = np.where(np.abs(s.imag) <= tol * scale, 0.0, s.imag)

    real_mask = im == 0.0
    n_real_pos = int(np.sum(real_mask & (re > 0)))
    n_real_neg = int(np.sum(real_mask & (re < 0)))
    n_neutral = int(np.sum(re == 0.0))

    cplx = ~real_mask
    rhp_c = np.sum(cplx & (re > 0))
    lhp_c = np.sum(cplx & (re < 0))
    # conjugate pairing: complex poles come in +/- Im pairs for real signals
    paired = True
    idx = np.nonzero(cplx & (re > 0))[0]
    used = set()
    for i in idx:
        if i in used:
            continue
        partner = [j for j in idx if j != i and j not in used
                   and abs(s[j] - np.conj(s[i])) <= 1e-7 * scale]
        if partner:
            used.add(i)
            used.add(partner[0])
        else:
            paired = False
    rhp_only_pairs = bool(paired and n_real_pos == 0 and rhp_c > 0)

    if n_real_pos > 0:
        verdict = "divergent-exponential"
    elif rhp_c > 0:
        verdict = "growing-oscillatory" if paired else "mixed"
    elif lhp_c + n_real_neg + n_neutral == s.size and rhp_c == 0 and n_real_pos == 0:
        verdict = "stable"
    else:
        verdict = "mixed"
    return PoleClassification(
        n_real_positive=n_real_pos,
        n_real_negative=n_real_neg,
        n_neutral=n_neutral,
        n_complex_rhp_pairs=int(rhp_c) // 2,
        n_complex_lhp_pairs=int(lhp_c) // 2,
        rhp_only_conjugate_pairs=rhp_only_pairs,
        verdict=verdict,
    )


def lambda_sweep(fit: DampedOscFit, lambdas, p_dot0=1.0, horizon=30.0,
                 fluence_target=None):
    """Solve the trajectory for each lambda; returns one record per value."""
    records = []
    for lam in lambdas:
        traj = solve_trajectory(fit, float(lam), p_dot0=p_dot0, horizon=horizon)
        cls = classify_poles(traj)
        rec = {
            "lambda": float(lam),
            "verdict": cls.verdict,
            "max_re_pole": float(np.max(traj.poles.real)),
            "max_im_pole": float(np.max(np.abs(traj.poles.imag))),
        }
        if fluence_target is not None:
            try:
                rec["fluence_horizon"] = fluence_matched_horizon(
                    traj, fluence_target)
            except DegenerateInputError:
                rec["fluence_horizon"] = float("nan")
        records.append(rec)
    return records

"""Memory kernel of the non-adiabatic coupling and its leakage spectrum.

The kernel is K(t) = integral over kappa of 2 a_kappa cos(omega_{kappa 0} t);
its spectrum G(omega) vanishes identically inside the gap |omega| <= |omega0|
and behaves like sqrt(m*/2) a(kappa(omega)) / sqrt(|omega| - gap) outside.

Spectral convention: G here is the forward transform with a 1/(2 pi) factor,
i.e. G(omega) = (1/2pi) * FT[K](omega).  With that convention the spectral
survival-probability overlap carries unit weight on the positive lobe (see
the survival module), and the windowed-Fourier consistency check below is
normalization-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import morse
from .errors import DomainError, ToleranceError
from .numerics import integrate_adaptive

__all__ = [
    "KernelSamples",
    "LeakageSpectrum",
    "kappa_support",
    "memory_kernel",
    "kernel_on_grid",
    "sample_kernel",
    "leakage_spectrum_value",
    "spectrum_on_grid",
    "windowed_fourier",
]

_GAUSS_ORDER = 16
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(_GAUSS_ORDER)


def kappa_support(model: morse.MorseModel, rel_cut=1e-15) -> float:
    """Upper kappa beyond which a_kappa is negligible relative to its peak."""
    grid = np.linspace(1e-3, 40.0, 400)
    a = morse.a_coefficient(model, grid)
    peak = a.max()
    above = np.nonzero(a > rel_cut * peak)[0]
    return float(grid[above[-1]] + grid[1] - grid[0])


def _a_on_panels(model, kappa_max, width):
    """Gauss panel layout on [0, kappa_max] with cached a(kappa) values."""
    n_panels = max(4, int(math.ceil(kappa_max / width)))
    edges = np.linspace(0.0, kappa_max, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GAUSS_NODES[None, :]).ravel()
    weights = (half[:, None] * _GAUSS_WEIGHTS[None, :]).ravel()
    a_vals = morse.a_coefficient(model, nodes)
    return nodes, weights, a_vals


def memory_kernel(model: morse.MorseModel, t: float, tol=1e-10,
                  kappa_max=None) -> float:
    """Kernel value 2 Re Phi(t) by adaptive kappa-quadrature.

    For t != 0 the integration interval is split at the half-periods of
    cos(omega_{kappa 0} t) so the adaptive panels never straddle a sign
    change of the oscillation; the tail beyond the a_kappa support is
    dropped (bounded by the support cutoff).  Even in t by construction.
    """
    t = float(t)
    if not np.isfinite(t):
        raise DomainError("t must be finite")
    t = abs(t)
    if kappa_max is None:
        kappa_max = kappa_support(model)
    a2 = model.a ** 2 / (2.0 * model.m)
    gap = model.gap

    def integrand(k):
        return 2.0 * morse.a_coefficient(model, k) * math.cos((a2 * k * k + gap) * t)

    if t * (a2 * kappa_max ** 2 + gap) < 0.5:
        return integrate_adaptive(integrand, 0.0, kappa_max, tol=tol).value

    # phase zeros: (a2 k^2 + gap) t = pi (n + 1/2)
    edges = [0.0]
    n = 0
    while True:
        val = (math.pi * (n + 0.5) / t - gap) / a2
        n += 1
        if val <= 0:
            continue
        k = math.sqrt(val)
        if k >= kappa_max:
            break
        edges.append(k)
    edges.append(kappa_max)

    total = 0.0
    err = 0.0
    panel_tol = tol / max(1, len(edges))
    for lo, hi in zip(edges[:-1], edges[1:]):
        res = integrate_adaptive(integrand, lo, hi, tol=panel_tol)
        total += res.value
        err += res.error
    if err > 100.0 * tol * max(1.0, abs(total)):
        raise ToleranceError(f"kernel quadrature error {err:.3g} above tolerance")
    return total


def kernel_on_grid(model: morse.MorseModel, ts, phase_budget=1.0,
                   kappa_max=None) -> np.ndarray:
    """Vectorized kernel evaluation on an arbitrary grid of times.

    Times are processed in blocks of similar magnitude; each block gets a
    Gauss panel layout fine enough that the cosine phase advances at most
    ``phase_budget`` radians per panel at the block's largest |t|, which
    keeps the composite rule in its spectral-accuracy regime.  Agrees with
    :func:`memory_kernel` to quadrature accuracy.
    """
    ts = np.asarray(ts, dtype=float)
    flat = np.abs(ts.ravel())
    out = np.empty(flat.shape)
    if kappa_max is None:
        kappa_max = kappa_support(model)
    a2 = model.a ** 2 / (2.0 * model.m)
    gap = model.gap

    order = np.argsort(flat)
    sorted_t = flat[order]
    blocks = []
    lo = 0
    while lo < sorted_t.size:
        t_lo = sorted_t[lo]
        hi = int(np.searchsorted(sorted_t, max(2.0 * t_lo, t_lo + 1.0), side="right"))
        hi = max(hi, lo + 1)
        blocks.append((lo, hi))
        lo = hi

    for lo, hi in blocks:
        tt = sorted_t[lo:hi]
        t_max = tt[-1]
        # phase rate d(omega)/d(kappa) * t <= 2 a2 kappa_max * t
        rate = 2.0 * a2 * kappa_max * max(t_max, 1e-6)
        width = min(kappa_max / 8.0, phase_budget / rate)
        nodes, weights, a_vals = _a_on_panels(model, kappa_max, width)
        om = a2 * nodes * nodes + gap
        f = 2.0 * a_vals * weights
        chunk = max(1, int(4e6 // max(nodes.size, 1)))
        vals = np.empty(tt.shape)
        for i in range(0, tt.size, chunk):
            vals[i:i + chunk] = np.cos(np.outer(tt[i:i + chunk], om)) @ f
        out[order[lo:hi]] = vals
    return out.reshape(ts.shape)


@dataclass(frozen=True)
class KernelSamples:
    """Kernel values on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    quadrature_tol: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise DomainError("times and values must be matching 1-d arrays")
        if np.any(np.diff(t) <= 0):
            raise DomainError("time grid must be strictly increasing")
        if v.size and v[0] < v.max() - 1e-12 * max(1.0, abs(v[0])):
            raise DomainError("kernel samples must peak at the first node (t = 0)")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


def sample_kernel(model: morse.MorseModel, t_max=40.0, n=800,
                  quadrature_tol=1e-9) -> KernelSamples:
    """Uniform kernel samples on [0, t_max] for fitting and plotting."""
    if t_max <= 0:
        raise DomainError("t_max must be positive")
    if n < 16:
        raise DomainError("n below the minimum of 16 samples")
    ts = np.linspace(0.0, float(t_max), int(n))
    vals = kernel_on_grid(model, ts)
    return KernelSamples(times=ts, values=vals, quadrature_tol=float(quadrature_tol))


@dataclass(frozen=True)
class LeakageSpectrum:
    """Leakage spectrum of a Morse model: zero inside the gap, even, >= 0."""

    model: morse.MorseModel
    gap: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "gap", self.model.gap)


def leakage_spectrum_value(spec: LeakageSpectrum, omega):
    """G(omega) = sqrt(m*/2) a(kappa(|omega|)) / sqrt(|omega| - gap).

    Exactly zero for |omega| <= gap.  Near the band edge the equivalent
    stable form m* a(kappa)/kappa is used; a ~ kappa^2 there, so the edge
    value is 0 rather than a 0/0.
    """
    omega = np.asarray(omega, dtype=float)
    w = np.abs(omega)
    out = np.zeros(w.shape)
    m_star = spec.model.m_star
    outside = w > spec.gap
    if np.any(outside):
        kap = np.sqrt(2.0 * m_star * (w[outside] - spec.gap))
        live = kap > 1e-14
        vals = np.zeros(kap.shape)
        vals[live] = m_star * morse.a_coefficient(spec.model, kap[live]) / kap[live]
        out[outside] = vals
    return out if out.ndim else float(out)


def spectrum_on_grid(spec: LeakageSpectrum, omegas) -> np.ndarray:
    return np.asarray(leakage_spectrum_value(spec, np.asarray(omegas, dtype=float)))


def windowed_fourier(samples: KernelSamples, omegas, window="hann") -> np.ndarray:
    """Windowed cosine transform of sampled kernel data.

    Computes (1/pi) * integral_0^T w(t) K(t) cos(omega t) dt, the discrete
    counterpart of the spectral convention used by
    :func:`leakage_spectrum_value` (the kernel is even, so the two-sided
    transform folds onto [0, T]).  A Hann taper suppresses truncation
    leakage from the slowly decaying kernel tail.
    """
    t = samples.times
    v = samples.values
    if window == "hann":
        w = 0.5 * (1.0 + np.cos(np.pi * t / t[-1]))
    elif window == "boxcar":
        w = np.ones_like(t)
    else:
        raise DomainError(f"unknown window {window!r}")
    wk = w * v
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    out = np.empty(omegas.shape)
    for i, om in enumerate(omegas):
        out[i] = np.trapezoid(wk * np.cos(om * t), t) / np.pi
    return out

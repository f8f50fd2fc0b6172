"""Landauer transmission probabilities and evanescent heat fluxes.

Two configurations are handled, both built from free-standing slabs in vacuum:

* two-slab: body 1 | gap d | body 3
* three-slab: body 1 | gap d | relay (body 2, thickness delta) | gap d | body 3

Only evanescent modes (``ck > omega``) are integrated. Fluxes are the power
per unit area received by body 3, with the spectral density defined so that
``flux = integral(phi(omega) d omega / 2 pi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from . import materials as mat
from .constants import C0, HBAR, K_B
from .quadrature import NonConvergenceError, integrate_batch
from ._kernels import flux_kernel
from .scattering import (POLARIZATIONS, SingularDenominatorError, _check_pol, compose_reflection,
                         slab_response, vacuum_kz)
from .thermal import balance_temperature, occupation, occupation_difference

TWO_SLAB = "two-slab"
THREE_SLAB = "three-slab"


@dataclass(frozen=True)
class Numerics:
    """Quadrature controls.

    ``k_range_factor`` scales the wavevector cut ``U`` (in units of ``1/d``);
    ``omega_range_factor`` scales the upper frequency limit and divides the lower one.
    """

    rtol: float = 1e-6
    inner_rtol_ratio: float = 0.1
    omega_min_factor: float = 0.05
    omega_max_factor: float = 3.0
    k_range_factor: float = 1.0
    omega_range_factor: float = 1.0
    tail_rtol: float = 1e-6
    k_peak_ratio: float = 1e-12
    max_iter: int = 40

    def scaled(self, factor):
        return replace(self, k_range_factor=self.k_range_factor * factor,
                       omega_range_factor=self.omega_range_factor * factor)


DEFAULT_NUMERICS = Numerics()


@dataclass(frozen=True)
class SystemConfig:
    """Geometry, materials and temperatures of a run (SI units).

    ``T2 = None`` selects the monochromatic balance temperature at the surface
    mode of body 1 (see :func:`relay_temperature`).
    """

    material1: mat.DielectricModel = field(default_factory=lambda: mat.get_model("sic-palik"))
    material2: mat.DielectricModel = field(default_factory=lambda: mat.get_model("drude-matched"))
    material3: mat.DielectricModel = field(default_factory=lambda: mat.get_model("sic-palik"))
    t1: float = 5e-6
    t3: float = 5e-6
    delta: float = 0.0
    d: float = 200e-9
    T1: float = 400.0
    T2: Optional[float] = None
    T3: float = 300.0

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("d must be positive")
        if not self.delta >= 0:
            raise ValueError("delta must be non-negative")
        if not (self.t1 > 0 and self.t3 > 0):
            raise ValueError("slab thicknesses must be positive")
        temps = [self.T1, self.T3] + ([] if self.T2 is None else [self.T2])
        if not all(T > 0 for T in temps):
            raise ValueError("temperatures must be positive")

    def mirrored(self):
        return replace(self, material1=self.material3, material3=self.material1,
                       t1=self.t3, t3=self.t1, T1=self.T3, T3=self.T1)

    def replace(self, **changes):
        return replace(self, **changes)


def reference_frequency(config: SystemConfig) -> float:
    """Surface-mode frequency used for the monochromatic balance rule."""
    for m in (config.material1, config.material3, config.material2):
        try:
            return mat.surface_polariton_frequency(m)
        except mat.NoRootError:
            continue
    return mat.surface_polariton_frequency(mat.SIC)


def relay_temperature(config: SystemConfig) -> float:
    if config.T2 is not None:
        return float(config.T2)
    return balance_temperature(reference_frequency(config), config.T1, config.T3)


# ---------------------------------------------------------------------------
# Transmission probabilities
# ---------------------------------------------------------------------------

def _two_body(rho_a, rho_b, gap):
    return 4.0 * rho_a.imag * rho_b.imag * gap / np.abs(1.0 - rho_a * rho_b * gap) ** 2


def _channels(omega, k, pol, config, deltas, d, want_two=True):
    """Evanescent transmission channels on flat node arrays.

    Returns ``(T2s, T12, T23)`` with ``T2s`` of shape ``(n,)`` (or None) and the
    three-slab channels of shape ``(n, len(deltas))``.
    """
    eps1 = config.material1.permittivity(omega)
    eps3 = config.material3.permittivity(omega)
    rho1 = slab_response(omega, k, eps1, config.t1, pol).rho
    rho3 = slab_response(omega, k, eps3, config.t3, pol).rho
    gap = np.exp(-2.0 * vacuum_kz(omega, k).imag * d)
    t2s = _two_body(rho1, rho3, gap) if want_two else None
    if deltas is None or len(deltas) == 0:
        return t2s, None, None
    eps2 = config.material2.permittivity(omega)
    s2 = slab_response(omega[:, None], k[:, None], eps2[:, None], np.asarray(deltas)[None, :], pol)
    r1, r3, g = rho1[:, None], rho3[:, None], gap[:, None]
    rho12 = compose_reflection(r1, s2.rho, s2.tau, g)
    den = np.abs(1.0 - rho12 * r3 * g) ** 2
    den12 = np.abs(1.0 - r1 * s2.rho * g) ** 2
    t12 = 4.0 * np.abs(s2.tau) ** 2 * r1.imag * r3.imag * g * g / (den * den12)
    t23 = 4.0 * rho12.imag * r3.imag * g / den
    return t2s, t12, t23


def _evanescent(omega, k):
    omega = np.asarray(omega, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(C0 * k <= omega):
        raise ValueError("only evanescent modes (c k > omega) are supported")
    return np.broadcast_arrays(omega, k)


def transmission_two_slab(omega, k, pol, config: SystemConfig):
    """Two-slab transmission probability for evanescent modes."""
    _check_pol(pol)
    omega, k = _evanescent(omega, k)
    shape = omega.shape
    t2s, _, _ = _channels(omega.ravel(), k.ravel(), pol, config, None, config.d)
    out = t2s.reshape(shape)
    return float(out) if out.ndim == 0 else out


def transmission_three_slab(omega, k, pol, config: SystemConfig):
    """Three-slab channels ``(T12, T23)`` for the relay thickness ``config.delta``."""
    _check_pol(pol)
    omega, k = _evanescent(omega, k)
    shape = omega.shape
    _, t12, t23 = _channels(omega.ravel(), k.ravel(), pol, config, [config.delta], config.d,
                            want_two=False)
    t12, t23 = t12[:, 0].reshape(shape), t23[:, 0].reshape(shape)
    if t12.ndim == 0:
        return float(t12), float(t23)
    return t12, t23


# ---------------------------------------------------------------------------
# Wavevector integration
# ---------------------------------------------------------------------------

_PROBE_U = 0.25 * 2.0 ** np.arange(0, 13)  # 0.25 ... 1024
_MIN_U = 8.0


class _Kernel:
    """Weighted ``k``-integrands for a fixed geometry, summed over polarisations.

    Component layout: ``[two-slab]`` (if requested) followed by one three-slab
    component per relay thickness, then one body-2 power component per relay
    thickness when ``balance`` is set. Weights are occupation differences.
    """

    def __init__(self, config, d, deltas=(), two_slab=True, balance=False, weighted=True,
                 polarizations=POLARIZATIONS):
        self.config = config
        self.d = d
        self.deltas = np.asarray(deltas, dtype=float)
        self.two_slab = two_slab
        self.balance = balance
        self.weighted = weighted
        self.polarizations = tuple(polarizations)
        self.mirror = config.mirrored() if balance else None
        self.T2 = relay_temperature(config)
        self.n_comp = int(two_slab) + self.deltas.size * (2 if balance else 1)

    def weights(self, omega):
        c = self.config
        if not self.weighted:
            one = np.ones_like(omega)
            return one, one, one
        n1, n2, n3 = occupation(omega, c.T1), occupation(omega, self.T2), occupation(omega, c.T3)
        n13 = np.where(c.T1 == c.T3, 0.0, n1 - n3)
        n12 = np.where(c.T1 == self.T2, 0.0, n1 - n2)
        n23 = np.where(self.T2 == c.T3, 0.0, n2 - n3)
        return n13, n12, n23

    def __call__(self, omega, k):
        omega = np.ascontiguousarray(omega, dtype=float)
        return self.on_grid(omega, np.arange(omega.size), k)

    def on_grid(self, omegas, idx, k):
        """Integrand at nodes ``(omegas[idx[i]], k[i])``; material data is evaluated per frequency."""
        omegas = np.ascontiguousarray(omegas, dtype=float)
        idx = np.ascontiguousarray(idx, dtype=np.intp)
        k = np.ascontiguousarray(k, dtype=float)
        if idx.shape != k.shape or idx.ndim != 1:
            raise ValueError("idx and k must be 1-d arrays of equal length")
        if idx.size and (idx.min() < 0 or idx.max() >= omegas.size):
            raise IndexError("frequency index out of range")
        if np.any(k < omegas[idx] / C0):
            raise ValueError("integrand is defined for evanescent modes only (ck >= omega)")
        c = self.config
        n13, n12, n23 = (np.ascontiguousarray(np.broadcast_to(w, omegas.shape), dtype=float)
                         for w in self.weights(omegas))
        out = np.zeros((k.size, self.n_comp))
        eps = [np.ascontiguousarray(np.broadcast_to(m.permittivity(omegas), omegas.shape),
                                    dtype=complex)
               for m in (c.material1, c.material2, c.material3)]
        singular = flux_kernel(idx, omegas, k, eps[0], eps[1], eps[2], float(c.t1), float(c.t3),
                               self.deltas, float(self.d), n13, n12, n23, self.two_slab,
                               self.balance, "TE" in self.polarizations,
                               "TM" in self.polarizations, out)
        if singular:
            raise SingularDenominatorError("1 - rho1*rho2*exp(2i kz d) vanishes")
        return out

    def reference(self, omega, k):
        """Same integrand through the numpy scattering functions (slow, for checks)."""
        n13, n12, n23 = self.weights(omega)
        out = np.zeros((omega.size, self.n_comp))
        nd = self.deltas.size
        for pol in self.polarizations:
            t2s, t12, t23 = _channels(omega, k, pol, self.config, self.deltas, self.d,
                                      want_two=self.two_slab)
            col = 0
            if self.two_slab:
                out[:, 0] += n13 * t2s
                col = 1
            if nd:
                on3 = n12[:, None] * t12 + n23[:, None] * t23
                out[:, col:col + nd] += on3
                if self.balance:
                    _, m12, m23 = _channels(omega, k, pol, self.mirror, self.deltas, self.d,
                                            want_two=False)
                    # mirrored body order 3-2-1: weights n32 = -n23, n21 = -n12
                    on1 = -n23[:, None] * m12 - n12[:, None] * m23
                    out[:, col + nd:col + 2 * nd] -= on3 + on1
        return out * k[:, None]

    def breakpoints(self):
        out = []
        for m in (self.config.material1, self.config.material2, self.config.material3):
            if isinstance(m, mat.DrudeLorentz):
                out += [m.omega_t, m.omega_l, mat.surface_polariton_frequency(m)]
            elif isinstance(m, mat.Drude):
                try:
                    out.append(mat.surface_polariton_frequency(m))
                except mat.NoRootError:
                    pass
                out.append(m.omega_p)
        return sorted(set(out))

    def internal_light_lines(self, omega):
        """Per-node ``u`` values where a slab's internal light cone ends."""
        cols = []
        for m in (self.config.material1, self.config.material2, self.config.material3):
            re = np.real(m.permittivity(omega))
            cols.append(np.where(re > 1, (np.sqrt(np.maximum(re, 1.0)) - 1.0) * omega / C0 * self.d,
                                 np.nan))
        return np.stack(cols, axis=1)


@dataclass
class KIntegral:
    value: np.ndarray  # (n_omega, C): spectral flux density [W m^-2 s rad^-1]
    error: np.ndarray
    converged: np.ndarray
    u_max: np.ndarray


def k_integrals(kernel: _Kernel, omegas, numerics: Numerics = DEFAULT_NUMERICS,
                atol=0.0) -> KIntegral:
    """Spectral fluxes ``hbar w / (2 pi) * integral(kernel dk)`` over ``k > omega/c``.

    The variable ``u = (k - omega/c) d`` is used; the upper cut ``U`` is the
    first probe point beyond which every component stays below ``k_peak_ratio``
    times its probed peak, scaled by ``k_range_factor``. ``atol`` is in the
    units of the result.
    """
    omegas = np.asarray(omegas, dtype=float)
    n = omegas.size
    d = kernel.d
    k0 = omegas / C0
    pref = HBAR * omegas / (2.0 * math.pi * d)

    def f(owner, u):
        return kernel.on_grid(omegas, owner, k0[owner] + u / d) * pref[owner, None]

    npr = _PROBE_U.size
    own = np.repeat(np.arange(n), npr)
    up = np.tile(_PROBE_U, n)
    probe = np.abs(f(own, up)).reshape(n, npr, -1)
    peak = probe.max(axis=1)
    small = np.all(probe <= numerics.k_peak_ratio * peak[:, None, :], axis=2)
    # first index from which all later probes are small
    tail_ok = np.flip(np.cumprod(np.flip(small, axis=1), axis=1), axis=1).astype(bool)
    first = np.where(tail_ok.any(axis=1), np.argmax(tail_ok, axis=1), npr - 1)
    u_max = np.maximum(_PROBE_U[first], _MIN_U) * numerics.k_range_factor

    lines = kernel.internal_light_lines(omegas)
    owners, a_list, b_list = [], [], []
    for i in range(n):
        U = u_max[i]
        edges = [0.0] + list(U * 2.0 ** -np.arange(6, -1, -1))
        extra = lines[i][np.isfinite(lines[i]) & (lines[i] > 0) & (lines[i] < U)]
        edges = np.sqrt(np.unique(np.concatenate([edges, extra])))
        owners.append(np.full(edges.size - 1, i))
        a_list.append(edges[:-1])
        b_list.append(edges[1:])

    def fs(owner, s):
        return f(owner, s * s) * (2.0 * s)[:, None]

    res = integrate_batch(fs, np.concatenate(owners), np.concatenate(a_list), np.concatenate(b_list),
                          n, rtol=numerics.rtol * numerics.inner_rtol_ratio, atol=atol,
                          max_iter=numerics.max_iter)
    return KIntegral(res.value, res.error, res.converged, u_max)


def _spectral(kernel, omega, numerics):
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(~(omega > 0)):
        raise ValueError("omega must be positive")
    ki = k_integrals(kernel, omega, numerics)
    if not ki.converged.all():
        raise NonConvergenceError("k-integration did not converge", ki.value, ki.error)
    return ki.value


def spectral_flux_two_slab(omega, config: SystemConfig, numerics: Numerics = DEFAULT_NUMERICS,
                           polarizations=POLARIZATIONS):
    """Spectral flux on body 3, two-slab case [W m^-2 per rad/s, d omega / 2 pi convention]."""
    kernel = _Kernel(config, config.d, (), two_slab=True, polarizations=polarizations)
    phi = _spectral(kernel, omega, numerics)[:, 0]
    return float(phi[0]) if np.ndim(omega) == 0 else phi


def spectral_flux_three_slab(omega, config: SystemConfig, numerics: Numerics = DEFAULT_NUMERICS,
                             polarizations=POLARIZATIONS):
    """Spectral flux on body 3 with the relay in place."""
    kernel = _Kernel(config, config.d, [config.delta], two_slab=False, polarizations=polarizations)
    phi = _spectral(kernel, omega, numerics)[:, 0]
    return float(phi[0]) if np.ndim(omega) == 0 else phi


# ---------------------------------------------------------------------------
# Frequency integration
# ---------------------------------------------------------------------------

@dataclass
class FluxIntegral:
    value: np.ndarray  # (C,) W/m^2
    error: np.ndarray
    converged: bool
    omega_range: tuple
    neval: int


def _omega_limits(kernel, numerics):
    w_ref = reference_frequency(kernel.config)
    lo = numerics.omega_min_factor * w_ref / numerics.omega_range_factor
    hi = numerics.omega_max_factor * w_ref * numerics.omega_range_factor
    return lo, hi


def _frequency_pass(kernel, numerics, atol_spectral):
    lo, hi = _omega_limits(kernel, numerics)
    T_max = max(kernel.config.T1, kernel.config.T3, kernel.T2)
    decay = K_B * T_max / HBAR
    n = kernel.n_comp
    no_limit = np.full(n, np.inf)

    def f(_owner, w):
        # extra components carry the error of inner integrals that missed their
        # tolerance, so the outer rule weights them like the values themselves
        ki = k_integrals(kernel, w, numerics, atol=atol_spectral)
        miss = np.where(ki.converged[:, None], 0.0, ki.error)
        return np.hstack([ki.value, miss]) / (2.0 * math.pi)

    breaks = kernel.breakpoints()
    total = np.zeros(n)
    err = np.zeros(n)
    missed = np.zeros(n)
    converged = True
    neval = 0
    a, b = lo, hi
    for _ in range(12):
        pts = [p for p in breaks if a < p < b]
        edges = np.unique(np.concatenate([np.linspace(a, b, 9), pts]))
        # extension segments are judged against the running total
        seg_atol = np.maximum(atol_spectral * (b - a) / (2.0 * math.pi), numerics.rtol * np.abs(total))
        res = integrate_batch(f, np.zeros(edges.size - 1, dtype=np.intp), edges[:-1], edges[1:], 1,
                              rtol=numerics.rtol, atol=np.concatenate([seg_atol, no_limit]),
                              max_iter=numerics.max_iter)
        total += res.value[0, :n]
        err += res.error[0, :n]
        missed += res.value[0, n:]
        converged &= bool(res.converged[0])
        neval += res.neval
        # Bose-weighted tail beyond b decays at least like exp(-hbar w / kB T)
        tail = np.abs(f(None, np.array([b]))[0, :n]) * decay
        if np.all(tail <= numerics.tail_rtol * np.abs(total)):
            break
        a, b = b, 1.5 * b
    else:
        converged = False
    # inner misses are acceptable while their weighted sum fits the inner budget
    budget = numerics.inner_rtol_ratio * numerics.rtol * np.abs(total)
    converged = converged and bool(np.all(missed <= budget))
    err = err + missed
    return FluxIntegral(total, err, converged, (lo, b), neval)


def frequency_integral(kernel: _Kernel, numerics: Numerics = DEFAULT_NUMERICS) -> FluxIntegral:
    """``integral d omega / 2 pi`` of the spectral fluxes of every kernel component.

    Inner wavevector integrals are requested to an absolute accuracy tied to
    the size of the final answer, so resonances carrying negligible Bose
    weight are not over-resolved and inner noise stays well below the outer
    tolerance. The size is first guessed from a coarse trapezoid over sampled
    spectra; the pass is repeated if the guess proves more than 3x too large.
    """
    lo, hi = _omega_limits(kernel, numerics)
    coarse = replace(numerics, rtol=1e-3, inner_rtol_ratio=1.0)
    nodes = np.unique(np.concatenate([np.linspace(lo, hi, 33),
                                      [p for p in kernel.breakpoints() if lo < p < hi]]))
    spec = np.abs(k_integrals(kernel, nodes, coarse).value)
    guess = trapezoid(spec, nodes, axis=0) / (2.0 * math.pi)

    def atol_for(scale, w_hi):
        scale = np.maximum(np.abs(scale), 1e-300)
        return numerics.inner_rtol_ratio * numerics.rtol * 2.0 * math.pi * scale / (w_hi - lo)

    res = None
    neval = 0
    for _ in range(3):
        atol = atol_for(guess, hi)
        res = _frequency_pass(kernel, numerics, atol_spectral=atol)
        neval += res.neval
        hi = res.omega_range[1]
        if np.all(atol <= 3.0 * atol_for(res.value, hi)):
            break
        guess = np.abs(res.value)
    res.neval = neval
    return res


@dataclass
class FluxRow:
    """Total fluxes for one gap distance and several relay thicknesses."""

    d: float
    deltas: np.ndarray
    phi2s: float
    phi3s: np.ndarray
    error2s: float
    error3s: np.ndarray
    converged: bool


def flux_integral(config: SystemConfig, which: str = THREE_SLAB,
                  numerics: Numerics = DEFAULT_NUMERICS,
                  polarizations=POLARIZATIONS) -> FluxIntegral:
    """Total flux on body 3 with its error estimate; never raises on non-convergence."""
    if which == TWO_SLAB:
        kernel = _Kernel(config, config.d, (), two_slab=True, polarizations=polarizations)
    elif which == THREE_SLAB:
        kernel = _Kernel(config, config.d, [config.delta], two_slab=False,
                         polarizations=polarizations)
    else:
        raise ValueError(f"which must be {TWO_SLAB!r} or {THREE_SLAB!r}")
    return frequency_integral(kernel, numerics)


def flux_row(config: SystemConfig, deltas, numerics: Numerics = DEFAULT_NUMERICS,
             two_slab=True) -> FluxRow:
    """Two-slab flux at ``config.d`` and three-slab fluxes for each thickness in ``deltas``.

    Every cell is integrated on its own, so a value does not depend on which
    other thicknesses are requested alongside it.
    """
    deltas = np.asarray(deltas, dtype=float)
    phi2s, err2s, ok = float("nan"), float("nan"), True
    if two_slab:
        r = flux_integral(config, TWO_SLAB, numerics)
        phi2s, err2s, ok = float(r.value[0]), float(r.error[0]), r.converged
    cells = [flux_integral(replace(config, delta=float(dl)), THREE_SLAB, numerics)
             for dl in deltas]
    return FluxRow(config.d, deltas, phi2s,
                   np.array([c.value[0] for c in cells]), err2s,
                   np.array([c.error[0] for c in cells]),
                   ok and all(c.converged for c in cells))


def total_flux(config: SystemConfig, which: str = THREE_SLAB, numerics: Numerics = DEFAULT_NUMERICS,
               polarizations=POLARIZATIONS) -> float:
    """Total evanescent flux on body 3 [W/m^2].

    Raises :class:`NonConvergenceError` (carrying the estimate and error bound)
    if the quadrature misses its tolerance.
    """
    res = flux_integral(config, which, numerics, polarizations)
    if not res.converged:
        raise NonConvergenceError("total flux did not converge", res.value[0], res.error[0])
    return float(res.value[0])


def net_power_body2(config: SystemConfig, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """Net evanescent power absorbed by the relay [W/m^2].

    Energy conservation among the three bodies: the relay absorbs what bodies 1
    and 3 do not, ``P2 = -(P_on1 + P_on3)``, where ``P_on1`` is the three-slab
    flux of the mirrored stack. Both terms share one quadrature partition.
    """
    kernel = _Kernel(config, config.d, [config.delta], two_slab=False, balance=True)
    res = frequency_integral(kernel, numerics)
    if not res.converged:
        raise NonConvergenceError("relay power did not converge", res.value[1], res.error[1])
    return float(res.value[1])


def refine_relay_temperature(config: SystemConfig, numerics: Numerics = DEFAULT_NUMERICS,
                             xtol=1e-3) -> float:
    """Relay temperature zeroing :func:`net_power_body2`, searched on ``[T3, T1]``.

    An absent relay (zero thickness or vacuum) exchanges nothing, so the
    monochromatic balance value is returned unchanged in that case.
    """
    lo, hi = sorted((config.T1, config.T3))
    if lo == hi:
        return lo
    if config.delta == 0 or isinstance(config.material2, mat.Vacuum):
        return relay_temperature(replace(config, T2=None))

    def g(T2):
        return net_power_body2(replace(config, T2=T2), numerics)

    return brentq(g, lo, hi, xtol=xtol)

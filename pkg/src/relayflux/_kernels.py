"""Compiled flux integrand.

Fused per-node evaluation of the slab amplitudes and transmission channels
used inside the quadratures. It mirrors :mod:`relayflux.scattering` and
:func:`relayflux.transport._channels`, which remain the reference path.
"""

import math

import numpy as np
from numba import njit

OPAQUE_DEPTH = 20.0
SINGULAR_DENOMINATOR = 1e-14


@njit(cache=True)
def _kzm(k0sq, ksq, q, eps):
    if eps.real == 1.0 and eps.imag == 0.0:
        return 1j * q
    kzm = np.sqrt(eps * k0sq - ksq)
    if kzm.imag < 0.0:
        kzm = -kzm
    return kzm


@njit(cache=True)
def _fresnel(k0sq, ksq, q, eps, kzm, tm):
    if eps.real == 1.0 and eps.imag == 0.0:
        return 0j
    kz = 1j * q
    if tm:
        den = eps * kz + kzm
        return (eps - 1.0) * (eps * k0sq - (eps + 1.0) * ksq) / (den * den)
    den = kz + kzm
    return (1.0 - eps) * k0sq / (den * den)


@njit(cache=True)
def _phase(kzm, t, eps):
    """``exp(i kzm t)``, or 0 beyond the opaque depth for non-vacuum media."""
    if t == 0.0:
        return 1.0 + 0j
    if kzm.imag * t > OPAQUE_DEPTH and not (eps.real == 1.0 and eps.imag == 0.0):
        return 0j
    return np.exp(1j * kzm * t)


@njit(cache=True)
def _airy(r, ph, t):
    if t == 0.0:
        return 0j, 1.0 + 0j
    if ph == 0j and r != 0j:
        return r, 0j
    ph2 = ph * ph
    inv = 1.0 / (1.0 - r * r * ph2)
    return r * (1.0 - ph2) * inv, (1.0 - r * r) * ph * inv


@njit(cache=True)
def _abs2(z):
    return z.real * z.real + z.imag * z.imag


@njit(cache=True)
def _three(r1, r3, rho2, tau2, g):
    den12 = 1.0 - r1 * rho2 * g
    rho12 = rho2 + tau2 * tau2 * r1 * g / den12
    dd = _abs2(1.0 - rho12 * r3 * g)
    m2 = _abs2(den12)
    t12 = 4.0 * _abs2(tau2) * r1.imag * r3.imag * g * g / (dd * m2)
    t23 = 4.0 * rho12.imag * r3.imag * g / dd
    return t12, t23, m2


@njit(cache=True)
def flux_kernel(idx, omega, k, eps1, eps2, eps3, t1, t3, deltas, d, w13, w12, w23,
                two_slab, balance, use_te, use_tm, out):
    """Accumulate ``k * sum_p (weighted channels)`` into ``out``; returns True on a singular denominator.

    Node ``i`` has wavevector ``k[i]`` and frequency ``omega[idx[i]]``; the
    permittivities and occupation weights are given per frequency.
    """
    c0 = 2.99792458e8
    n = k.size
    nd = deltas.size
    off = 1 if two_slab else 0
    sing2 = SINGULAR_DENOMINATOR * SINGULAR_DENOMINATOR
    singular = False
    ph2 = np.empty(nd, dtype=np.complex128)
    for i in range(n):
        j0 = idx[i]
        k0 = omega[j0] / c0
        e1 = eps1[j0]
        e2 = eps2[j0]
        e3 = eps3[j0]
        same = e3 == e1 and t3 == t1
        ki = k[i]
        k0sq = k0 * k0
        ksq = ki * ki
        q = math.sqrt((ki - k0) * (ki + k0))
        g = math.exp(-2.0 * q * d)
        kzm1 = _kzm(k0sq, ksq, q, e1)
        ph1 = _phase(kzm1, t1, e1)
        kzm3 = kzm1
        ph3 = ph1
        if not same:
            kzm3 = _kzm(k0sq, ksq, q, e3)
            ph3 = _phase(kzm3, t3, e3)
        kzm2 = _kzm(k0sq, ksq, q, e2)
        for j in range(nd):
            ph2[j] = _phase(kzm2, deltas[j], e2)
        for tm in (False, True):
            if tm and not use_tm:
                continue
            if (not tm) and not use_te:
                continue
            r1, _ = _airy(_fresnel(k0sq, ksq, q, e1, kzm1, tm), ph1, t1)
            if same:
                r3 = r1
            else:
                r3, _ = _airy(_fresnel(k0sq, ksq, q, e3, kzm3, tm), ph3, t3)
            if two_slab:
                out[i, 0] += w13[j0] * 4.0 * r1.imag * r3.imag * g / _abs2(1.0 - r1 * r3 * g) * ki
            if nd == 0:
                continue
            rr2 = _fresnel(k0sq, ksq, q, e2, kzm2, tm)
            for j in range(nd):
                rho2, tau2 = _airy(rr2, ph2[j], deltas[j])
                t12, t23, m2 = _three(r1, r3, rho2, tau2, g)
                if m2 < sing2:
                    singular = True
                on3 = w12[j0] * t12 + w23[j0] * t23
                out[i, off + j] += on3 * ki
                if balance:
                    m12, m23, m2 = _three(r3, r1, rho2, tau2, g)
                    if m2 < sing2:
                        singular = True
                    on1 = -w23[j0] * m12 - w12[j0] * m23
                    out[i, off + nd + j] -= (on3 + on1) * ki
    return singular

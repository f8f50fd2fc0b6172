"""Bose-Einstein statistics, relay balance temperature and near-field limits."""

from __future__ import annotations

import math

import numpy as np

from .constants import H_PLANCK, HBAR, K_B


def _reduced_energy(omega, T):
    omega = np.asarray(omega, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(~(omega > 0)) or np.any(~(T > 0)):
        raise ValueError("omega and T must be positive")
    return HBAR * omega / (K_B * T)


def occupation(omega, T):
    """Mean photon number ``1/(exp(hbar w / kB T) - 1)``; underflows to 0, never NaN."""
    x = _reduced_energy(omega, T)
    with np.errstate(over="ignore", under="ignore"):
        em = np.exp(-x)
        n = em / -np.expm1(-x)
    return n[()] if n.ndim == 0 else n


def occupation_difference(omega, Ti, Tj):
    """``n(w, Ti) - n(w, Tj)``; exactly zero when ``Ti == Tj``."""
    diff = occupation(omega, Ti) - occupation(omega, Tj)
    diff = np.where(np.asarray(Ti) == np.asarray(Tj), 0.0, diff)
    return diff[()] if diff.ndim == 0 else diff


def balance_temperature(omega0, T1, T3):
    """Relay temperature with ``2 n(w0, T2) = n(w0, T1) + n(w0, T3)``.

    Closed form ``T2 = (hbar w0 / kB) / log1p(1/nbar)``; when ``T1 == T3`` the
    input temperature is returned unchanged.
    """
    nbar = 0.5 * (occupation(omega0, T1) + occupation(omega0, T3))
    T1a, T3a = np.asarray(T1, dtype=float), np.asarray(T3, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        T2 = (HBAR * np.asarray(omega0, dtype=float) / K_B) / np.log1p(1.0 / nbar)
    # both occupations underflowed: fall back to the colder-limit expansion
    lo, hi = np.minimum(T1a, T3a), np.maximum(T1a, T3a)
    T2 = np.where(nbar > 0, T2, hi)
    T2 = np.clip(T2, lo, hi)
    T2 = np.where(T1a == T3a, T1a, T2)
    return float(T2) if T2.ndim == 0 else T2


def cutoff_wavevector(eps1, eps2, d):
    """Channel cutoff ``ln(2 / sqrt(Im eps1 Im eps2)) / d``."""
    im1, im2 = np.imag(eps1), np.imag(eps2)
    if np.any(np.asarray(im1) <= 0) or np.any(np.asarray(im2) <= 0):
        raise ValueError("cutoff needs strictly absorbing media (Im eps > 0)")
    if np.any(np.asarray(d) <= 0):
        raise ValueError("d must be positive")
    return np.log(2.0 / np.sqrt(im1 * im2)) / d


def thermal_conductance_quantum(T):
    """``pi**2 kB**2 T / (3 hbar)`` as written in the two-body limit formula."""
    return math.pi**2 * K_B**2 * T / (3.0 * HBAR)


def thermal_conductance_quantum_conventional(T):
    """Standard ``pi**2 kB**2 T / (3 h)``; smaller than the above by ``2 pi``."""
    return math.pi**2 * K_B**2 * T / (3.0 * H_PLANCK)


def flux_limits(T1, T3, kc, T):
    """Two-body upper bounds ``(phi_max, h_max)`` for cutoff ``kc``.

    ``phi_max = kB**2 (T1**2 - T3**2) kc**2 / (6 hbar)`` [W/m^2] and
    ``h_max = g0 kc**2 / pi`` [W/m^2/K] with ``g0`` from
    :func:`thermal_conductance_quantum`.
    """
    if not T1 >= T3 > 0:
        raise ValueError("need T1 >= T3 > 0")
    if not kc > 0:
        raise ValueError("kc must be positive")
    phi_max = K_B**2 * (T1**2 - T3**2) * kc**2 / (6.0 * HBAR)
    h_max = thermal_conductance_quantum(T) * kc**2 / math.pi
    return phi_max, h_max

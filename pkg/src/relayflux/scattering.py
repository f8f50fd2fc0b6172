"""Plane-wave scattering by planar slabs in vacuum.

Everything here is vectorised over ``omega`` and ``k`` (numpy broadcasting).
The polarisation is ``"TE"`` or ``"TM"``. Normal wavevector components are
taken on the branch with non-negative imaginary part so that fields decay
away from their sources.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .constants import C0

POLARIZATIONS = ("TE", "TM")

# Im(kz) * thickness beyond which a slab is treated as semi-infinite
OPAQUE_DEPTH = 20.0
SINGULAR_DENOMINATOR = 1e-14


class SingularDenominatorError(ArithmeticError):
    """Multiple-reflection series diverges (lossless resonance hit exactly)."""


class ModePoint(NamedTuple):
    omega: float
    k: float
    pol: str = "TM"


class SlabResponse(NamedTuple):
    rho: complex
    tau: complex


def _check_pol(pol):
    if pol not in POLARIZATIONS:
        raise ValueError(f"polarization must be one of {POLARIZATIONS}, got {pol!r}")


def _sqrt_upper(z):
    s = np.sqrt(z)
    return np.where(s.imag < 0, -s, s)


def vacuum_kz(omega, k):
    """``sqrt(omega**2/c**2 - k**2)``; real for ``ck <= omega``, ``+i*gamma`` beyond the light line."""
    k0 = np.asarray(omega, dtype=float) / C0
    k = np.asarray(k, dtype=float)
    radicand = (k0 - k) * (k0 + k)
    mag = np.sqrt(np.abs(radicand))
    out = np.where(radicand >= 0, mag + 0j, 1j * mag)
    return out[()] if out.ndim == 0 else out


def medium_kz(omega, k, eps):
    """Normal wavevector inside a medium of permittivity ``eps`` (``Im >= 0`` branch)."""
    eps = np.asarray(eps, dtype=complex)
    k0 = np.asarray(omega, dtype=float) / C0
    k = np.asarray(k, dtype=float)
    kzm = _sqrt_upper(eps * k0 * k0 - k * k)
    out = np.where(eps == 1, vacuum_kz(omega, k), kzm)
    return out[()] if out.ndim == 0 else out


def fresnel_interface(omega, k, eps, pol):
    """Vacuum-to-medium reflection amplitude.

    ``r_TE = (kz - kzm)/(kz + kzm)`` and ``r_TM = (eps kz - kzm)/(eps kz + kzm)``,
    with numerators rewritten via ``kz**2 - kzm**2 = (1 - eps) k0**2`` so the
    large-``k`` limit is free of cancellation.
    """
    _check_pol(pol)
    eps = np.asarray(eps, dtype=complex)
    k0 = np.asarray(omega, dtype=float) / C0
    k = np.asarray(k, dtype=float)
    kz = vacuum_kz(omega, k)
    kzm = medium_kz(omega, k, eps)
    if pol == "TE":
        r = (1.0 - eps) * k0 * k0 / (kz + kzm) ** 2
    else:
        r = (eps - 1.0) * (eps * k0 * k0 - (eps + 1.0) * k * k) / (eps * kz + kzm) ** 2
    return r[()] if np.ndim(r) == 0 else r


def slab_response(omega, k, eps, thickness, pol) -> SlabResponse:
    """Airy-summed reflection and transmission amplitudes of a free-standing slab.

    ``tau`` includes the full propagation factor ``exp(i kzm t)`` through the
    slab, so a vacuum slab returns ``(0, exp(i kz t))``.
    """
    _check_pol(pol)
    t = np.asarray(thickness, dtype=float)
    if np.any(t < 0):
        raise ValueError("thickness must be non-negative")
    eps = np.asarray(eps, dtype=complex)
    r = fresnel_interface(omega, k, eps, pol)
    kzm = medium_kz(omega, k, eps)
    phase = np.exp(1j * kzm * t)
    phase2 = phase * phase
    den = 1.0 - r * r * phase2
    rho = r * (1.0 - phase2) / den
    tau = (1.0 - r * r) * phase / den

    opaque = (kzm.imag * t > OPAQUE_DEPTH) & (r != 0)
    rho = np.where(opaque, r, rho)
    tau = np.where(opaque, 0.0, tau)
    empty = t == 0
    rho = np.where(empty, 0.0, rho)
    tau = np.where(empty, 1.0, tau)
    if np.ndim(rho) == 0:
        return SlabResponse(complex(rho), complex(tau))
    return SlabResponse(rho, tau)


def gap_factor(omega, k, d):
    """Round-trip vacuum gap factor ``exp(2 i kz d)``."""
    return np.exp(2j * vacuum_kz(omega, k) * np.asarray(d, dtype=float))


def compose_reflection(rho1, rho2, tau2, gap):
    """Reflection of slab 2 backed by reflector ``rho1`` across a gap with round-trip factor ``gap``."""
    den = 1.0 - rho1 * rho2 * gap
    if np.any(np.abs(den) < SINGULAR_DENOMINATOR):
        raise SingularDenominatorError("1 - rho1*rho2*exp(2i kz d) vanishes")
    return rho2 + tau2 * tau2 * rho1 * gap / den


def dressed_reflection(rho1, slab2: SlabResponse, d, mode: ModePoint):
    """Effective reflection of the (slab 1, gap ``d``, slab 2) composite seen from slab 2's far side."""
    if not np.all(np.asarray(d) > 0):
        raise ValueError("gap distance must be positive")
    gap = gap_factor(mode.omega, mode.k, d)
    out = compose_reflection(rho1, slab2.rho, slab2.tau, gap)
    return out[()] if np.ndim(out) == 0 else out

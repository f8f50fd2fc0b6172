"""Independent reference implementations used by the tests.

Nothing here imports the package's scattering or transport code. Multilayer
responses come from a high-precision transfer-matrix product (mpmath), which
shares no formulas with the closed-form Airy/composition expressions.
"""

import math

import mpmath as mp

mp.mp.dps = 50

HBAR = mp.mpf("1.054571817e-34")
KB = mp.mpf("1.380649e-23")
C = mp.mpf("299792458")


def eps_drude(omega, wp, gamma):
    w = mp.mpf(omega)
    return 1 - mp.mpf(wp) ** 2 / (w * (w + 1j * mp.mpf(gamma)))


def eps_drude_lorentz(omega, eps_inf, wl, wt, gamma):
    w = mp.mpf(omega)
    g = mp.mpf(gamma)
    return mp.mpf(eps_inf) * (mp.mpf(wl) ** 2 - w**2 - 1j * g * w) / (mp.mpf(wt) ** 2 - w**2 - 1j * g * w)


def kz(eps, omega, k):
    """``sqrt(eps w^2/c^2 - k^2)`` on the branch with non-negative imaginary part."""
    k0 = mp.mpf(omega) / C
    s = mp.sqrt(mp.mpc(eps) * k0**2 - mp.mpf(k) ** 2)
    if mp.im(s) < 0 or (mp.im(s) == 0 and mp.re(s) < 0):
        s = -s
    return s


def _admittance(eps, q, pol):
    return q if pol == "TE" else q / eps


def stack_response(layers, omega, k, pol):
    """Reflection and transmission of a layer stack embedded in vacuum.

    ``layers`` is a list of ``(eps, thickness)`` from the illuminated side.
    Amplitudes are referred to the first and last interfaces (tangential E for
    TE, tangential H for TM). Uses characteristic matrices of each layer.
    """
    q0 = kz(1, omega, k)
    y0 = _admittance(1, q0, pol)
    m = mp.eye(2)
    for eps, t in layers:
        q = kz(eps, omega, k)
        y = _admittance(mp.mpc(eps), q, pol)
        ph = q * mp.mpf(t)
        if y == 0:
            raise ZeroDivisionError("layer at its own light line")
        layer = mp.matrix([[mp.cos(ph), -1j * mp.sin(ph) / y], [-1j * y * mp.sin(ph), mp.cos(ph)]])
        m = m * layer
    # vacuum on both sides: B, C for unit transmitted field
    b = m[0, 0] + m[0, 1] * y0
    c = m[1, 0] + m[1, 1] * y0
    r = (y0 * b - c) / (y0 * b + c)
    t = 2 * y0 / (y0 * b + c)
    return complex(r), complex(t)


def two_body(rho_a, rho_b, gap):
    return 4 * rho_a.imag * rho_b.imag * gap / abs(1 - rho_a * rho_b * gap) ** 2


def intermediate_scatterer(rho1, rho3, r_left, r_right, t_mid):
    """Transmission between two reflectors separated by a passive scatterer.

    ``r_left``/``r_right`` are the scatterer's reflections seen from bodies 1
    and 3 and ``t_mid`` its transmission, all referred to the faces of bodies
    1 and 3.
    """
    den = (1 - rho1 * r_left) * (1 - rho3 * r_right) - rho1 * rho3 * t_mid**2
    return 4 * rho1.imag * rho3.imag * abs(t_mid) ** 2 / abs(den) ** 2


def occupation(omega, T):
    x = HBAR * mp.mpf(omega) / (KB * mp.mpf(T))
    return 1 / mp.expm1(x)


def balance_temperature(omega, T1, T3):
    nbar = (occupation(omega, T1) + occupation(omega, T3)) / 2
    return HBAR * mp.mpf(omega) / KB / mp.log(1 + 1 / nbar)


def cutoff(im1, im2, d):
    return math.log(2.0 / math.sqrt(im1 * im2)) / d

"""Dielectric response of the slab materials.

Three local, non-magnetic permittivity laws are supported:

* :class:`Vacuum` -- ``eps = 1``
* :class:`Drude` -- ``eps = 1 - wp**2 / (w * (w + i*gamma))``
* :class:`DrudeLorentz` -- ``eps = eps_inf * (wl**2 - w**2 - i*G*w) / (wt**2 - w**2 - i*G*w)``

All angular frequencies are in rad/s and the time convention is ``exp(-i w t)``,
so passive media have ``Im eps >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq


class NoRootError(ValueError):
    """Raised when the surface-mode condition has no root in the search bracket."""


@dataclass(frozen=True)
class Vacuum:
    kind = "vacuum"

    def permittivity(self, omega):
        return np.ones_like(np.asarray(omega, dtype=float), dtype=complex)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Drude:
    """Free-electron permittivity with plasma frequency ``omega_p`` and damping ``gamma_p``."""

    omega_p: float
    gamma_p: float
    kind = "drude"

    def __post_init__(self):
        if not self.omega_p > 0:
            raise ValueError("omega_p must be positive")
        if not self.gamma_p >= 0:
            raise ValueError("gamma_p must be non-negative")

    def permittivity(self, omega):
        w = np.asarray(omega, dtype=float)
        # 1 - wp^2 (w - i g) / (w (w^2 + g^2)), split to keep Im >= 0 exactly;
        # Re uses (w - wp)(w + wp) to avoid cancellation near the plasma edge
        wp, g = self.omega_p, self.gamma_p
        mod2 = w * w + g * g
        re = ((w - wp) * (w + wp) + g * g) / mod2
        im = wp * wp * g / (w * mod2)
        return re + 1j * im

    def to_dict(self):
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class DrudeLorentz:
    """Single-oscillator polar-crystal permittivity (LO/TO phonon form)."""

    eps_inf: float
    omega_l: float
    omega_t: float
    gamma: float
    kind = "drude-lorentz"

    def __post_init__(self):
        if not self.eps_inf > 1:
            raise ValueError("eps_inf must exceed 1")
        if not self.omega_l > self.omega_t > 0:
            raise ValueError("need omega_l > omega_t > 0")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def permittivity(self, omega):
        w = np.asarray(omega, dtype=float)
        a = self.omega_l**2 - w * w
        c = self.omega_t**2 - w * w
        b = self.gamma * w
        den = c * c + b * b
        re = self.eps_inf * (a * c + b * b) / den
        im = self.eps_inf * b * (self.omega_l**2 - self.omega_t**2) / den
        return re + 1j * im

    def to_dict(self):
        return {"kind": self.kind, **asdict(self)}


DielectricModel = Union[Vacuum, Drude, DrudeLorentz]


def permittivity(model: DielectricModel, omega: ArrayLike):
    """Complex permittivity of ``model`` at angular frequency ``omega`` (scalar or array)."""
    w = np.asarray(omega, dtype=float)
    if np.any(~(w > 0)):
        raise ValueError("omega must be strictly positive")
    eps = model.permittivity(w)
    return complex(eps) if eps.ndim == 0 else eps


def surface_polariton_frequency(model: DielectricModel, bracket=None) -> float:
    """Frequency of the flat-interface surface mode, where ``Re eps(w) = -1``.

    For a Drude metal the condition is solved in closed form,
    ``w = sqrt(wp**2 / 2 - gamma**2)``. For a Drude-Lorentz crystal ``Re eps``
    dips below -1 twice inside the reststrahlen band; the upper crossing is the
    surface phonon polariton and is polished with Brent's method.
    """
    if isinstance(model, Drude) and bracket is None:
        w2 = 0.5 * model.omega_p**2 - model.gamma_p**2
        if w2 <= 0:
            raise NoRootError("overdamped Drude model has no surface mode")
        return math.sqrt(w2)
    if bracket is None:
        if isinstance(model, DrudeLorentz):
            bracket = (model.omega_t, model.omega_l)
        else:
            raise NoRootError(f"{model!r} supports no surface mode")

    lo, hi = bracket

    def g(w):
        return float(np.real(model.permittivity(w))) + 1.0

    grid = np.linspace(lo, hi, 4097)
    vals = np.real(model.permittivity(grid)) + 1.0
    # last upward crossing from Re eps < -1 to Re eps > -1
    idx = np.nonzero((vals[:-1] < 0) & (vals[1:] >= 0))[0]
    if idx.size == 0:
        raise NoRootError(f"Re eps + 1 has no sign change on [{lo:.6g}, {hi:.6g}]")
    i = idx[-1]
    if vals[i + 1] == 0:
        return float(grid[i + 1])
    return brentq(g, grid[i], grid[i + 1], xtol=1e-6, rtol=4 * np.finfo(float).eps, maxiter=200)


# Literature SiC phonon parameters (eps_inf, LO, TO, damping).
SIC = DrudeLorentz(eps_inf=6.7, omega_l=1.827e14, omega_t=1.495e14, gamma=0.9e12)


def matched_drude(host: DielectricModel = SIC, damping_ratio: float = 1e-3) -> Drude:
    """Drude relay whose surface plasmon coincides with the surface mode of ``host``."""
    wp = math.sqrt(2.0) * surface_polariton_frequency(host)
    return Drude(omega_p=wp, gamma_p=damping_ratio * wp)


BUILTIN_MODELS = {
    "sic-palik": SIC,
    "drude-matched": matched_drude(),
    "vacuum": Vacuum(),
}


def get_model(name: str) -> DielectricModel:
    try:
        return BUILTIN_MODELS[name]
    except KeyError:
        raise KeyError(f"unknown material {name!r}; built-ins are {sorted(BUILTIN_MODELS)}") from None


def model_from_dict(spec: dict) -> DielectricModel:
    """Build a model from a mapping such as ``{"kind": "drude", "omega_p": ..., "gamma_p": ...}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "vacuum":
        return Vacuum()
    if kind == "drude":
        if "damping_ratio" in spec:
            ratio = float(spec.pop("damping_ratio"))
            spec["gamma_p"] = ratio * float(spec["omega_p"])
        return Drude(**{k: float(v) for k, v in spec.items()})
    if kind in ("drude-lorentz", "drude_lorentz"):
        return DrudeLorentz(**{k: float(v) for k, v in spec.items()})
    raise ValueError(f"unknown material kind {kind!r}")

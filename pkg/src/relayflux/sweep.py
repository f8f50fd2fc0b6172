"""Parameter sweeps and figure-data generation.

Every flux cell is an independent task. Tasks are dispatched to a bounded
process pool and results are reassembled in task order, so the output does
not depend on the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import __version__
from . import constants
from . import materials as mat
from .quadrature import NonConvergenceError
from .scattering import POLARIZATIONS, SingularDenominatorError
from .transport import (DEFAULT_NUMERICS, THREE_SLAB, TWO_SLAB, Numerics, SystemConfig, _Kernel,
                        flux_integral, k_integrals, reference_frequency, refine_relay_temperature,
                        relay_temperature, transmission_three_slab, transmission_two_slab)

MAX_AXIS_POINTS = 512
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Task execution
# ---------------------------------------------------------------------------

def available_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


class CellResult(NamedTuple):
    value: float
    error: float
    converged: bool
    singular: bool = False


def _flux_cell(task):
    config, which, numerics = task
    try:
        res = flux_integral(config, which, numerics)
    except SingularDenominatorError:
        return CellResult(float("nan"), float("nan"), False, True)
    return CellResult(float(res.value[0]), float(res.error[0]), bool(res.converged))


def run_tasks(fn, tasks: Sequence, threads: Optional[int] = None) -> list:
    """``[fn(t) for t in tasks]`` on at most ``threads`` worker processes, in order."""
    tasks = list(tasks)
    workers = available_workers() if threads is None else int(threads)
    if workers < 1:
        raise ValueError("threads must be at least 1")
    workers = min(workers, len(tasks))
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def flux_cells(configs: Sequence[SystemConfig], which: str, numerics: Numerics = DEFAULT_NUMERICS,
               threads: Optional[int] = None) -> list:
    """Total fluxes of many configurations; failures are reported, never raised."""
    return run_tasks(_flux_cell, [(c, which, numerics) for c in configs], threads)


def resolve_t2(config: SystemConfig, mode: str = "balance",
               numerics: Numerics = DEFAULT_NUMERICS) -> SystemConfig:
    """Fix ``T2`` according to ``mode`` (``balance``, ``refine`` or ``fixed``)."""
    if mode == "fixed":
        if config.T2 is None:
            raise ValueError("fixed T2 mode needs a T2 value")
        return config
    if mode == "balance":
        return replace(config, T2=relay_temperature(replace(config, T2=None)))
    if mode == "refine":
        return replace(config, T2=refine_relay_temperature(replace(config, T2=None), numerics))
    raise ValueError(f"unknown T2 mode {mode!r}")


# ---------------------------------------------------------------------------
# Metadata
# ---------------------------------------------------------------------------

def run_metadata(config: SystemConfig, numerics: Optional[Numerics] = None, **extra) -> dict:
    """Constants, materials, geometry, temperatures and tolerances of a run."""
    meta = {
        "code_version": __version__,
        "constants": constants.as_dict(),
        "materials": {"material1": config.material1.to_dict(),
                      "material2": config.material2.to_dict(),
                      "material3": config.material3.to_dict()},
        "geometry": {"d": config.d, "delta": config.delta, "t1": config.t1, "t3": config.t3},
        "temperatures": {"T1": config.T1, "T2": relay_temperature(config), "T3": config.T3},
    }
    if numerics is not None:
        meta["numerics"] = asdict(numerics)
    meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# Amplification map
# ---------------------------------------------------------------------------

def _axis(lo, hi, count, name, cap):
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValueError(f"{name}: need min < max")
    if int(count) != count or count < 2:
        raise ValueError(f"{name}: count must be an integer >= 2")
    if count > cap:
        raise ValueError(f"{name}: count {count} exceeds the cap of {cap} points")
    return np.linspace(lo, hi, int(count))


@dataclass
class SweepSpec:
    """Rectangular (d, delta) grid; ranges are ``(min, max, count)`` in metres."""

    d_range: tuple = (50e-9, 800e-9, 20)
    delta_range: tuple = (0.0, 1e-6, 20)
    config: SystemConfig = field(default_factory=SystemConfig)
    numerics: Numerics = DEFAULT_NUMERICS
    output: Optional[str] = None
    max_points: int = MAX_AXIS_POINTS

    def axes(self):
        d = _axis(*self.d_range, "d_range", self.max_points)
        delta = _axis(*self.delta_range, "delta_range", self.max_points)
        if d[0] <= 0:
            raise ValueError("d_range: distances must be positive")
        if delta[0] < 0:
            raise ValueError("delta_range: thicknesses must be non-negative")
        return d, delta


@dataclass
class AmplificationGrid:
    d: np.ndarray  # (nd,)
    delta: np.ndarray  # (ndelta,)
    ratio: np.ndarray  # (nd, ndelta), phi3s / phi2s
    phi3s: np.ndarray
    phi2s: np.ndarray  # (nd,)
    error3s: np.ndarray
    error2s: np.ndarray
    converged: np.ndarray  # (nd, ndelta) bool, both fluxes converged
    degenerate: np.ndarray  # (nd, ndelta) bool, zero two-slab flux
    metadata: dict

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())

    def table(self):
        """Columns and rows in ``d``-major order."""
        cols = ["d_m", "delta_m", "ratio", "phi3s_W_m2", "phi2s_W_m2", "converged", "degenerate"]
        rows = []
        for i, d in enumerate(self.d):
            for j, dl in enumerate(self.delta):
                rows.append([d, dl, self.ratio[i, j], self.phi3s[i, j], self.phi2s[i],
                             bool(self.converged[i, j]), bool(self.degenerate[i, j])])
        return cols, rows


def amplification_map(spec: SweepSpec, threads: Optional[int] = None) -> AmplificationGrid:
    """Ratio of three- to two-slab total flux over the (d, delta) grid.

    ``T2`` is fixed once from ``spec.config`` (the balance value unless given),
    since it depends only on ``T1`` and ``T3``. Quadrature failures are
    recorded in ``converged``; cells with zero two-slab flux are flagged
    ``degenerate`` and get a NaN ratio.
    """
    d, delta = spec.axes()
    base = resolve_t2(spec.config, "balance" if spec.config.T2 is None else "fixed")
    two = [replace(base, d=float(x), delta=0.0) for x in d]
    three = [replace(base, d=float(x), delta=float(y)) for x in d for y in delta]
    tasks = [(c, TWO_SLAB, spec.numerics) for c in two] + \
            [(c, THREE_SLAB, spec.numerics) for c in three]
    res = run_tasks(_flux_cell, tasks, threads)
    r2, r3 = res[:len(two)], res[len(two):]
    nd, nl = d.size, delta.size
    phi2s = np.array([r.value for r in r2])
    err2s = np.array([r.error for r in r2])
    ok2 = np.array([r.converged for r in r2])
    phi3s = np.array([r.value for r in r3]).reshape(nd, nl)
    err3s = np.array([r.error for r in r3]).reshape(nd, nl)
    ok3 = np.array([r.converged for r in r3]).reshape(nd, nl)
    degenerate = np.broadcast_to((phi2s == 0.0)[:, None], (nd, nl)).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(degenerate, np.nan, phi3s / phi2s[:, None])
    meta = run_metadata(base, spec.numerics, command="amplification-map",
                        d_range=list(spec.d_range), delta_range=list(spec.delta_range))
    return AmplificationGrid(d, delta, ratio, phi3s, phi2s, err3s, err2s,
                             ok3 & ok2[:, None], degenerate, meta)


def connected_components(mask: np.ndarray) -> list:
    """4-connected components of a boolean matrix, as lists of index pairs."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    comps = []
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            i, j = stack.pop()
            comp.append((i, j))
            for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                if 0 <= a < mask.shape[0] and 0 <= b < mask.shape[1] and mask[a, b] and not seen[a, b]:
                    seen[a, b] = True
                    stack.append((a, b))
        comps.append(sorted(comp))
    return comps


# ---------------------------------------------------------------------------
# Optimal relay thickness
# ---------------------------------------------------------------------------

@dataclass
class OptimalThickness:
    d: float
    delta_star: float
    ratio_star: float
    monotone: bool  # maximum sits on a boundary of [0, 4d]
    converged: bool
    phi2s: float
    scan_delta: np.ndarray
    scan_ratio: np.ndarray
    metadata: dict = field(default_factory=dict)


def optimal_thickness(d: float, config: Optional[SystemConfig] = None,
                      numerics: Numerics = DEFAULT_NUMERICS, threads: Optional[int] = None,
                      scan_points: int = 33, xtol: float = 1e-9) -> OptimalThickness:
    """Relay thickness maximising ``phi3s / phi2s`` at gap ``d``.

    A ``scan_points`` scan over ``[0, 4d]`` brackets the best sample, then
    golden-section search narrows the bracket to ``xtol``. When the best
    sample is an end point the end point is returned with ``monotone`` set.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    base = replace(config or SystemConfig(), d=float(d), delta=0.0)
    base = resolve_t2(base, "balance" if base.T2 is None else "fixed")
    two = _flux_cell((base, TWO_SLAB, numerics))
    if two.value == 0.0:
        raise ZeroDivisionError("two-slab flux vanishes; ratio undefined")
    grid = np.linspace(0.0, 4.0 * d, scan_points)
    cells = flux_cells([replace(base, delta=float(x)) for x in grid], THREE_SLAB, numerics, threads)
    scan = np.array([c.value for c in cells]) / two.value
    converged = two.converged and all(c.converged for c in cells)
    i = int(np.nanargmax(scan))

    def ratio(x):
        nonlocal converged
        c = _flux_cell((replace(base, delta=float(x)), THREE_SLAB, numerics))
        converged = converged and c.converged
        return c.value / two.value

    monotone = i in (0, grid.size - 1)
    if monotone:
        best, best_val = grid[i], scan[i]
    else:
        a, b = grid[i - 1], grid[i + 1]
        x1, x2 = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        f1, f2 = ratio(x1), ratio(x2)
        while b - a > xtol:
            if f1 >= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - GOLDEN * (b - a)
                f1 = ratio(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + GOLDEN * (b - a)
                f2 = ratio(x2)
        best, best_val = (x1, f1) if f1 >= f2 else (x2, f2)
        if scan[i] > best_val:
            best, best_val = grid[i], scan[i]
    meta = run_metadata(replace(base, delta=float(best)), numerics, command="optimal-thickness")
    return OptimalThickness(float(d), float(best), float(best_val), monotone, converged,
                            two.value, grid, scan, meta)


# ---------------------------------------------------------------------------
# Spectra and transmission maps
# ---------------------------------------------------------------------------

@dataclass
class FluxSpectrum:
    omega: np.ndarray
    phi2s: np.ndarray  # W m^-2 per rad/s, flux = integral(phi d omega / 2 pi)
    phi3s: np.ndarray
    omega_spp: float
    metadata: dict = field(default_factory=dict)


def spectrum_grid(omega_ref, lo=0.5, hi=1.5, count=401, refine_width=0.02, refine_count=201):
    """Uniform grid on ``[lo, hi] * omega_ref`` plus a dense patch of relative half-width
    ``refine_width`` around ``omega_ref`` (which is always included)."""
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    base = np.linspace(lo, hi, count)
    patch = 1.0 + np.linspace(-refine_width, refine_width, refine_count)
    x = np.unique(np.concatenate([base, patch[patch > 0], [1.0]]))
    return x * omega_ref


def spectrum(config: SystemConfig, omegas=None, numerics: Numerics = DEFAULT_NUMERICS,
             polarizations=POLARIZATIONS) -> FluxSpectrum:
    """Two- and three-slab spectral fluxes on a shared frequency grid.

    Raises :class:`NonConvergenceError` if any wavevector integral misses its
    tolerance.
    """
    w_ref = reference_frequency(config)
    omegas = spectrum_grid(w_ref) if omegas is None else np.asarray(omegas, dtype=float)
    if omegas.ndim != 1 or omegas.size == 0 or np.any(~(omegas > 0)):
        raise ValueError("omegas must be a non-empty 1-d array of positive values")
    kernel = _Kernel(config, config.d, [config.delta], two_slab=True, polarizations=polarizations)
    ki = k_integrals(kernel, omegas, numerics)
    if not ki.converged.all():
        raise NonConvergenceError("spectral flux did not converge", ki.value, ki.error)
    meta = run_metadata(config, numerics, command="spectrum")
    return FluxSpectrum(omegas, ki.value[:, 0], ki.value[:, 1], w_ref, meta)


def ck_grid(x_max=60.0, count=600, x_min=1.001):
    """Dimensionless wavevectors ``c k / omega`` in the evanescent region."""
    if not 1.0 < x_min < x_max:
        raise ValueError("need 1 < x_min < x_max")
    return np.linspace(x_min, x_max, count)


def _channel_maps(omega, k, config, pol):
    t2s = transmission_two_slab(omega, k, pol, config)
    t12, t23 = transmission_three_slab(omega, k, pol, config)
    return {"T2s": t2s, "T3s": 0.5 * (t12 + t23), "half_T12": 0.5 * t12, "half_T23": 0.5 * t23}


def transmission_map(config: SystemConfig, omegas, x, polarizations=POLARIZATIONS) -> dict:
    """``{pol: {channel: (n_omega, n_x) array}}`` at ``k = x omega / c``."""
    omegas = np.asarray(omegas, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 1.0):
        raise ValueError("c k / omega must exceed 1 (evanescent region)")
    w, xx = np.meshgrid(omegas, x, indexing="ij")
    k = xx * w / constants.C0
    return {pol: _channel_maps(w, k, config, pol) for pol in polarizations}


def thickness_map(config: SystemConfig, omega, deltas, x, polarizations=POLARIZATIONS) -> dict:
    """``{pol: {channel: (n_delta, n_x) array}}`` at fixed ``omega``."""
    deltas = np.asarray(deltas, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 1.0):
        raise ValueError("c k / omega must exceed 1 (evanescent region)")
    if np.any(deltas < 0):
        raise ValueError("thicknesses must be non-negative")
    k = x * omega / constants.C0
    w = np.full_like(k, omega)
    out = {}
    for pol in polarizations:
        rows = [_channel_maps(w, k, replace(config, delta=float(dl)), pol) for dl in deltas]
        out[pol] = {name: np.stack([r[name] for r in rows]) for name in rows[0]}
    return out


def local_maxima(y) -> int:
    """Number of strict interior local maxima of a sampled curve."""
    y = np.asarray(y, dtype=float)
    return int(np.sum((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])))

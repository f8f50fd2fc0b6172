"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import materials as mat
from . import thermal
from .config import ConfigError, RunConfig, load_config, validate_numerics
from .output import write_table
from .quadrature import NonConvergenceError
from .scattering import POLARIZATIONS, SingularDenominatorError
from .sweep import (SweepSpec, amplification_map, ck_grid, flux_cells, optimal_thickness,
                    resolve_t2, run_metadata, spectrum, spectrum_grid, thickness_map,
                    transmission_map)
from .transport import THREE_SLAB, TWO_SLAB, reference_frequency, relay_temperature

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4


class _Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _t2_arg(text):
    if text in ("balance", "refine"):
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("T2 must be a number, 'balance' or 'refine'") from None


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration (overrides the config file)")
    g.add_argument("--config", help="TOML configuration file")
    g.add_argument("-o", "--output", help="output CSV path ('-' for stdout); a .json mirror is "
                                          "written next to it")
    g.add_argument("--threads", type=int, help="worker processes (default: available CPUs)")
    g.add_argument("--d", type=float, help="gap distance [m]")
    g.add_argument("--delta", type=float, help="relay thickness [m]")
    g.add_argument("--t1", type=float, help="thickness of slab 1 [m]")
    g.add_argument("--t3", type=float, help="thickness of slab 3 [m]")
    for i in (1, 2, 3):
        g.add_argument(f"--material{i}", choices=sorted(mat.BUILTIN_MODELS),
                       help=f"built-in model for slab {i}")
    g.add_argument("--T1", type=float, help="temperature of slab 1 [K]")
    g.add_argument("--T2", type=_t2_arg, help="relay temperature [K], 'balance' or 'refine'")
    g.add_argument("--T3", type=float, help="temperature of slab 3 [K]")
    g.add_argument("--rtol", type=float, help="relative quadrature tolerance")
    g.add_argument("--safety", type=float,
                   help="multiply the wavevector and frequency range safety factors")
    return p


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="relayflux",
        description="Near-field heat flux between slabs with and without a relay slab.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("permittivity", parents=[common], help="tabulate eps(omega)")
    p.add_argument("--material", default="sic-palik", choices=sorted(mat.BUILTIN_MODELS))
    p.add_argument("--omega-min", type=float, default=1.0e14)
    p.add_argument("--omega-max", type=float, default=2.5e14)
    p.add_argument("--count", type=int, default=301)

    p = sub.add_parser("spp", parents=[common], help="surface-polariton frequencies")
    p.add_argument("--material", action="append", choices=sorted(mat.BUILTIN_MODELS),
                   help="repeatable; default: the three configured slabs")

    p = sub.add_parser("transmission-map", parents=[common],
                       help="transmission probabilities over (omega, ck/omega) or (delta, ck/omega)")
    p.add_argument("--axis", choices=("omega", "delta"), default="omega")
    p.add_argument("--pol", choices=("TE", "TM", "both"), default="both")
    p.add_argument("--x-max", type=float, default=60.0, help="largest c k / omega")
    p.add_argument("--x-count", type=int, default=600)
    p.add_argument("--omega-min", type=float, help="[rad/s], default 0.8 omega_spp")
    p.add_argument("--omega-max", type=float, help="[rad/s], default 1.2 omega_spp")
    p.add_argument("--omega-count", type=int, default=201)
    p.add_argument("--omega", type=float, help="fixed frequency for --axis delta (default omega_spp)")
    p.add_argument("--delta-min", type=float, default=0.0)
    p.add_argument("--delta-max", type=float, default=1e-6)
    p.add_argument("--delta-count", type=int, default=101)

    p = sub.add_parser("spectrum", parents=[common], help="two- and three-slab flux spectra")
    p.add_argument("--lo", type=float, default=0.5, help="lower limit in units of omega_spp")
    p.add_argument("--hi", type=float, default=1.5, help="upper limit in units of omega_spp")
    p.add_argument("--count", type=int, default=401)
    p.add_argument("--refine-width", type=float, default=0.02,
                   help="relative half-width of the dense patch around omega_spp")
    p.add_argument("--refine-count", type=int, default=201)

    sub.add_parser("flux", parents=[common], help="total two- and three-slab fluxes")

    p = sub.add_parser("amplification-map", parents=[common],
                       help="phi3s/phi2s over a (d, delta) grid")
    for name in ("d-min", "d-max", "delta-min", "delta-max"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--d-count", type=int)
    p.add_argument("--delta-count", type=int)

    p = sub.add_parser("optimal-thickness", parents=[common],
                       help="relay thickness maximising the amplification at fixed d")
    p.add_argument("--scan-points", type=int, default=33)

    sub.add_parser("limits", parents=[common], help="cutoff wavevector and two-body flux limits")

    p = sub.add_parser("balance-temperature", parents=[common], help="relay balance temperature")
    p.add_argument("--omega", type=float, help="[rad/s], default omega_spp of slab 1")
    return parser


def _run_config(args) -> RunConfig:
    run = load_config(args.config)
    system, numerics, t2_mode = run.system, run.numerics, run.t2_mode
    changes = {k: getattr(args, k) for k in ("d", "delta", "t1", "t3", "T1", "T3")
               if getattr(args, k) is not None}
    for i in (1, 2, 3):
        name = getattr(args, f"material{i}")
        if name is not None:
            changes[f"material{i}"] = mat.get_model(name)
    if args.T2 is not None:
        if isinstance(args.T2, str):
            t2_mode, changes["T2"] = args.T2, None
        else:
            t2_mode, changes["T2"] = "fixed", args.T2
    try:
        system = replace(system, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.rtol is not None:
        numerics = replace(numerics, rtol=args.rtol)
    if args.safety is not None:
        if not args.safety > 0:
            raise ConfigError("--safety must be positive")
        numerics = numerics.scaled(args.safety)
    validate_numerics(numerics)
    output = args.output if args.output is not None else run.output
    return replace(run, system=system, numerics=numerics, t2_mode=t2_mode, output=output)


def _emit(run, columns, rows, meta):
    try:
        write_table(run.output, columns, rows, meta)
    except OSError as exc:
        raise _Failure(EXIT_IO, f"cannot write output: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _cmd_permittivity(args, run):
    if not 0 < args.omega_min < args.omega_max or args.count < 2:
        raise ConfigError("need 0 < omega-min < omega-max and count >= 2")
    model = mat.get_model(args.material)
    w = np.linspace(args.omega_min, args.omega_max, args.count)
    eps = mat.permittivity(model, w)
    meta = {"command": "permittivity", "material": model.to_dict()}
    _emit(run, ["omega_rad_s", "eps_re", "eps_im"],
          [[a, b.real, b.imag] for a, b in zip(w, eps)], meta)


def _cmd_spp(args, run):
    if args.material:
        models = [(n, mat.get_model(n)) for n in args.material]
    else:
        s = run.system
        models = [("material1", s.material1), ("material2", s.material2),
                  ("material3", s.material3)]
    rows = []
    for name, model in models:
        try:
            w = mat.surface_polariton_frequency(model)
            eps = complex(mat.permittivity(model, w))
            rows.append([name, w, eps.real, eps.imag])
        except mat.NoRootError:
            rows.append([name, float("nan"), float("nan"), float("nan")])
    meta = {"command": "spp", "materials": {n: m.to_dict() for n, m in models}}
    _emit(run, ["material", "omega_spp_rad_s", "eps_re", "eps_im"], rows, meta)


def _pols(choice):
    return POLARIZATIONS if choice == "both" else (choice,)


def _cmd_transmission_map(args, run):
    system = resolve_t2(run.system, run.t2_mode, run.numerics)
    w_ref = reference_frequency(system)
    x = ck_grid(args.x_max, args.x_count)
    pols = _pols(args.pol)
    rows = []
    if args.axis == "omega":
        lo = args.omega_min if args.omega_min is not None else 0.8 * w_ref
        hi = args.omega_max if args.omega_max is not None else 1.2 * w_ref
        if not 0 < lo < hi or args.omega_count < 2:
            raise ConfigError("need 0 < omega-min < omega-max and omega-count >= 2")
        axis = np.linspace(lo, hi, args.omega_count)
        maps = transmission_map(system, axis, x, pols)
        first = "omega_rad_s"
    else:
        if not 0 <= args.delta_min < args.delta_max or args.delta_count < 2:
            raise ConfigError("need 0 <= delta-min < delta-max and delta-count >= 2")
        omega = args.omega if args.omega is not None else w_ref
        axis = np.linspace(args.delta_min, args.delta_max, args.delta_count)
        maps = thickness_map(system, omega, axis, x, pols)
        first = "delta_m"
    channels = ("T2s", "T3s", "half_T12", "half_T23")
    for pol in pols:
        m = maps[pol]
        for i, a in enumerate(axis):
            for j, xv in enumerate(x):
                rows.append([a, xv, pol] + [m[c][i, j] for c in channels])
    meta = run_metadata(system, None, command="transmission-map", axis=args.axis)
    if args.axis == "delta":
        meta["omega_rad_s"] = omega
    _emit(run, [first, "ck_over_omega", "pol", *channels], rows, meta)


def _cmd_spectrum(args, run):
    system = resolve_t2(run.system, run.t2_mode, run.numerics)
    w_ref = reference_frequency(system)
    try:
        grid = spectrum_grid(w_ref, args.lo, args.hi, args.count, args.refine_width,
                             args.refine_count)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    spec = spectrum(system, grid, run.numerics)
    rows = [[w, a, b] for w, a, b in zip(spec.omega, spec.phi2s, spec.phi3s)]
    _emit(run, ["omega_rad_s", "phi2s_W_m2_s", "phi3s_W_m2_s"], rows, spec.metadata)


def _cmd_flux(args, run):
    system = resolve_t2(run.system, run.t2_mode, run.numerics)
    two = flux_cells([system], TWO_SLAB, run.numerics, threads=1)[0]
    three = flux_cells([system], THREE_SLAB, run.numerics, threads=1)[0]
    ratio = three.value / two.value if two.value != 0 else float("nan")
    ok = two.converged and three.converged
    rows = [[system.d, system.delta, relay_temperature(system), two.value, three.value, ratio,
             two.error, three.error, ok]]
    meta = run_metadata(system, run.numerics, command="flux", t2_mode=run.t2_mode)
    _emit(run, ["d_m", "delta_m", "T2_K", "phi2s_W_m2", "phi3s_W_m2", "ratio", "error2s_W_m2",
                "error3s_W_m2", "converged"], rows, meta)
    if not ok:
        raise _Failure(EXIT_NONCONVERGED, "flux quadrature did not converge")


def _cmd_amplification_map(args, run):
    sw = run.sweep
    pick = lambda a, b: b if a is None else a  # noqa: E731
    spec = SweepSpec(
        d_range=(pick(args.d_min, sw.d_min), pick(args.d_max, sw.d_max),
                 pick(args.d_count, sw.d_count)),
        delta_range=(pick(args.delta_min, sw.delta_min), pick(args.delta_max, sw.delta_max),
                     pick(args.delta_count, sw.delta_count)),
        config=resolve_t2(run.system, run.t2_mode, run.numerics), numerics=run.numerics,
        output=run.output, max_points=sw.max_points)
    try:
        spec.axes()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = amplification_map(spec, threads=args.threads)
    cols, rows = grid.table()
    _emit(run, cols, rows, grid.metadata)
    if not grid.all_converged:
        bad = int((~grid.converged).sum())
        raise _Failure(EXIT_NONCONVERGED, f"{bad} cell(s) did not converge")


def _cmd_optimal_thickness(args, run):
    system = resolve_t2(run.system, run.t2_mode, run.numerics)
    res = optimal_thickness(system.d, system, run.numerics, threads=args.threads,
                            scan_points=args.scan_points)
    meta = dict(res.metadata, delta_star_m=res.delta_star, ratio_star=res.ratio_star,
                monotone=res.monotone, converged=res.converged, phi2s_W_m2=res.phi2s)
    rows = [[res.d, x, r] for x, r in zip(res.scan_delta, res.scan_ratio)]
    rows.append([res.d, res.delta_star, res.ratio_star])
    _emit(run, ["d_m", "delta_m", "ratio"], rows, meta)
    print(f"delta* = {res.delta_star * 1e9:.1f} nm, ratio = {res.ratio_star:.6f}"
          + (" (boundary maximum)" if res.monotone else ""), file=sys.stderr)
    if not res.converged:
        raise _Failure(EXIT_NONCONVERGED, "flux quadrature did not converge")


def _cmd_limits(args, run):
    s = resolve_t2(run.system, run.t2_mode, run.numerics)
    w_ref = reference_frequency(s)
    eps1 = complex(s.material1.permittivity(w_ref))
    eps3 = complex(s.material3.permittivity(w_ref))
    try:
        kc = float(thermal.cutoff_wavevector(eps1, eps3, s.d))
        hot, cold = max(s.T1, s.T3), min(s.T1, s.T3)
        T = 0.5 * (hot + cold)
        phi_max, h_max = thermal.flux_limits(hot, cold, kc, T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [[s.d, w_ref, kc, phi_max, h_max, thermal.thermal_conductance_quantum(T),
             thermal.thermal_conductance_quantum_conventional(T), T]]
    meta = run_metadata(s, None, command="limits")
    _emit(run, ["d_m", "omega_rad_s", "kc_per_m", "phi_max_W_m2", "h_max_W_m2_K", "g0_W_K",
                "g0_conventional_W_K", "T_K"], rows, meta)


def _cmd_balance_temperature(args, run):
    s = replace(run.system, T2=None)
    omega = args.omega if args.omega is not None else reference_frequency(s)
    if not omega > 0:
        raise ConfigError("omega must be positive")
    t2 = thermal.balance_temperature(omega, s.T1, s.T3)
    cols, row = ["omega_rad_s", "T1_K", "T3_K", "T2_balance_K"], [omega, s.T1, s.T3, t2]
    if run.t2_mode == "refine":
        cols.append("T2_refined_K")
        row.append(resolve_t2(s, "refine", run.numerics).T2)
    meta = run_metadata(replace(s, T2=t2), run.numerics if run.t2_mode == "refine" else None,
                        command="balance-temperature")
    _emit(run, cols, [row], meta)


_COMMANDS = {
    "permittivity": _cmd_permittivity,
    "spp": _cmd_spp,
    "transmission-map": _cmd_transmission_map,
    "spectrum": _cmd_spectrum,
    "flux": _cmd_flux,
    "amplification-map": _cmd_amplification_map,
    "optimal-thickness": _cmd_optimal_thickness,
    "limits": _cmd_limits,
    "balance-temperature": _cmd_balance_temperature,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        run = _run_config(args)
        _COMMANDS[args.command](args, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, SingularDenominatorError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except _Failure as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

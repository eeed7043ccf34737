"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 I/O error, 4 fit did not converge.
"""
import argparse
import math
import sys

import numpy as np

from .electrostatics import GlassMonopoleSource, electrode_field_per_charge, glass_field_per_charge
from .errors import ConditioningError, ConfigError, DomainError, IonProbeError
from .estimation import (
    fit, fit_two_process, sensitivity, timeseries_problem, velocity_map_problem)
from .forward import synthesize_timeseries
from .io import (
    TraceFormatError, format_float, load_config, read_trace, read_velocity_map,
    write_field_map, write_trace)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_NOT_CONVERGED = 4


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load(path):
    try:
        return load_config(path)
    except OSError as exc:
        raise CommandError(f"cannot read config {path}: {exc.strerror}", EXIT_IO) from None


def _emit(lines, out):
    text = "".join(f"{k} = {v}\n" for k, v in lines)
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CommandError(f"cannot write {out}: {exc.strerror}", EXIT_IO) from None


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format_float(value)


def cmd_simulate(args):
    cfg = _load(args.config)
    if "seed" not in cfg:
        raise ConfigError("seed: required for simulate (no hidden entropy)", "seed")
    setup = cfg.setup()
    series = synthesize_timeseries(
        setup,
        cfg.electrode_params() if setup.has_electrode else None,
        cfg.glass_params() if setup.has_glass else None,
        cfg.schedule(),
        cadence=cfg.get("noise.cadence_s", 1.0),
        noise_sigma=None if "noise.sigma_um" not in cfg else cfg.get("noise.sigma_um") * 1e-6,
        rng_seed=cfg.get("seed"))
    if args.out is None:
        raise CommandError("simulate needs --out", EXIT_INPUT)
    try:
        write_trace(args.out, series)
    except OSError as exc:
        raise CommandError(f"cannot write {args.out}: {exc.strerror}", EXIT_IO) from None
    return EXIT_OK


def _result_lines(model, problem, result, units, with_efficiency):
    lines = [("model", model), ("kind", problem.kind), ("converged", result.converged),
             ("iterations", result.iterations), ("message", result.message),
             (f"residual_rms_{units}", result.residual_rms * 1e6)]
    if problem.processes == 2:
        lines.append(("poorly_identifiable", result.poorly_identifiable))
    for name in problem.parameter_names:
        lines.append((f"param.{name}", result.parameters[name]))
    for name, se in result.standard_error_proxy.items():
        lines.append((f"stderr.{name}", se))
    for name, value in result.derived.items():
        if name.startswith("eta") and not with_efficiency:
            continue
        lines.append((f"derived.{name}", value))
    return [(k, v if isinstance(v, str) else _fmt(v)) for k, v in lines]


def _read_input(reader, path, *extra):
    try:
        return reader(path, *extra)
    except TraceFormatError as exc:
        raise CommandError(f"{path}: {exc}", EXIT_INPUT) from None
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None


def cmd_fit_timeseries(args):
    cfg = _load(args.config)
    sigma = cfg.get("noise.sigma_um", 0.0) * 1e-6
    data = _read_input(read_trace, args.trace, sigma)
    setup = cfg.setup()
    model = args.model
    if model in ("glass", "both") and setup.glass_height is None:
        raise ConfigError("setup.glass_height_um: required for the glass model",
                          "setup.glass_height_um")
    kind_for = {"single": "electrode", "two-process": "electrode", "glass": "glass",
                "both": "both"}
    setup = setup.replace(source_kind=kind_for[model])
    problem = timeseries_problem(data, setup, cfg.schedule(), model,
                                 free_offset=cfg.get("fit.free_offset", False),
                                 max_iter=cfg.get("fit.max_iter", 200))
    result = fit_two_process(problem) if model == "two-process" else fit(problem)
    _emit(_result_lines(model, problem, result, "um", cfg.has_optics), args.out)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_fit_velocity_map(args):
    cfg = _load(args.config)
    data = _read_input(read_velocity_map, args.map)
    setup = cfg.setup()
    problem = velocity_map_problem(data, setup, args.model, max_iter=cfg.get("fit.max_iter", 200))
    result = fit(problem)
    _emit(_result_lines(args.model, problem, result, "um_per_s", cfg.has_optics), args.out)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_field_map(args):
    cfg = _load(args.config)
    setup = cfg.setup()
    start = cfg.get("field_map.start_um", -1000.0)
    stop = cfg.get("field_map.stop_um", 1000.0)
    step = cfg.get("field_map.step_um", 10.0)
    if not stop > start:
        raise ConfigError("field_map.stop_um: must exceed field_map.start_um", "field_map.stop_um")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    offsets = (start + step * np.arange(n)) * 1e-6
    source = cfg.get("field_map.source", setup.source_kind)
    count = cfg.get("field_map.charge_count", 1.0)
    trap = setup.trap
    fields = np.zeros(n)
    if source in ("electrode", "both"):
        fields += electrode_field_per_charge(offsets, trap.trap_height, setup.dipole_length,
                                             trap.consts)
    if source in ("glass", "both"):
        if setup.glass_height is None:
            raise ConfigError("setup.glass_height_um: required for a glass field map",
                              "setup.glass_height_um")
        # positive glass charge repels the ion
        fields -= glass_field_per_charge(offsets, setup.glass_height, trap.trap_height,
                                         setup.glass_image, trap.consts)
    if args.out is None:
        raise CommandError("field-map needs --out", EXIT_INPUT)
    try:
        write_field_map(args.out, offsets, fields * count)
    except OSError as exc:
        raise CommandError(f"cannot write {args.out}: {exc.strerror}", EXIT_IO) from None
    return EXIT_OK


def cmd_sensitivity(args):
    cfg = _load(args.config)
    trap = cfg.trap()
    glass = cfg.require("setup.glass_height_um") * 1e-6
    noise = cfg.get("sensitivity.position_noise_um", 0.12) * 1e-6
    t_int = cfg.get("sensitivity.integration_time_s", 1.0)
    reports = {}
    for image in (False, True):
        src = GlassMonopoleSource(0.0, glass, trap.trap_height, 1.0, image)
        reports[image] = sensitivity(trap, noise, trap.ion_count, t_int, src)
    r = reports[False]
    lines = [
        ("ion_count", trap.ion_count),
        ("integration_time_s", t_int),
        ("position_um_per_sqrthz", r.position_sensitivity * 1e6),
        ("field_mv_per_m_sqrthz", r.field_sensitivity * 1e3),
        ("force_zn_per_sqrthz", r.force_sensitivity * 1e21),
        ("threshold_displacement_um", r.threshold_displacement * 1e6),
        ("optimal_offset_um", r.optimal_offset * 1e6),
        ("min_charges", r.min_detectable_charges),
        ("min_charges_raw", r.min_detectable_charges_raw),
        ("min_charges_shielded", reports[True].min_detectable_charges),
        ("min_charges_shielded_raw", reports[True].min_detectable_charges_raw),
    ]
    _emit([(k, _fmt(v)) for k, v in lines], args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ionprobe",
        description="Simulate and fit light-induced charging seen by a trapped-ion string.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic COM trace")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-timeseries", help="fit charging kinetics to a COM trace")
    p.add_argument("config")
    p.add_argument("trace")
    p.add_argument("--model", choices=("single", "two-process", "glass", "both"),
                   default="single")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_timeseries)

    p = sub.add_parser("fit-velocity-map", help="fit a dipole or monopole velocity map")
    p.add_argument("config")
    p.add_argument("map")
    p.add_argument("--model", choices=("dipole", "monopole"), default="dipole")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_velocity_map)

    p = sub.add_parser("field-map", help="tabulate the axial field versus beam offset")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_field_map)

    p = sub.add_parser("sensitivity", help="print the probe's sensitivity figures")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sensitivity)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"ionprobe: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"ionprobe: config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, ConditioningError) as exc:
        print(f"ionprobe: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IonProbeError as exc:
        print(f"ionprobe: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

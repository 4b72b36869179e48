"""``cpcs`` command-line interface.

Subcommands: ``g2map``, ``scan``, ``spectrum``, ``validate`` and
``convert-units``. Physical values on the command line carry units, e.g.
``--delay 72fs`` or ``--dt 0.25au``.
"""

import argparse
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config, with_overrides
from .io import precision, read_scan_csv, write_map_csv, write_scan_csv, write_spectrum_csv, write_summary
from .units import UNITS, UnitError, au_to_fs, parse_quantity

log = logging.getLogger("cpcs")


class CliError(Exception):
    pass


def _quantity(text):
    """argparse type: keep the text but reject values that do not parse."""
    try:
        parse_quantity(text)
    except UnitError as e:
        raise argparse.ArgumentTypeError(str(e)) from None
    return text


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_common(p, delay=True):
    p.add_argument("--config", required=True, help="config file or bundled preset name (fig1c, fig2, fig3)")
    p.add_argument("--out", help="output directory (default: output.directory of the config)")
    p.add_argument("--dt", type=_quantity, help="integration step, e.g. 0.5au")
    if delay:
        p.add_argument("--delay", type=_quantity, help="pulse delay T, e.g. 72fs")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker count")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", help="fail on window truncation")
    mode.add_argument("--warn", dest="strict", action="store_false", help="warn on window truncation (default)")
    p.set_defaults(strict=False)
    p.add_argument("--delta", type=_quantity, help="override the Zeeman splitting (exciton-biexciton model)")
    p.add_argument("--coupling", type=_quantity, help="override the coupling g (coupled-emitter model)")


def build_parser():
    ap = argparse.ArgumentParser(prog="cpcs", description="Two-pulse photon coincidence simulations.")
    ap.add_argument("--version", action="version", version=f"cpcs {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("g2map", help="coincidence probability map p(t1, t2) at one delay")
    _add_common(p)
    p.add_argument("--stride", type=_positive_int, help="t1 lattice stride in steps")
    p.set_defaults(func=cmd_g2map)

    p = sub.add_parser("scan", help="c(T) and f(T) over a delay range")
    _add_common(p, delay=False)
    p.add_argument("--delay-min", type=_quantity)
    p.add_argument("--delay-max", type=_quantity)
    p.add_argument("--delay-step", type=_quantity)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("spectrum", help="Fourier magnitudes of a scan CSV")
    p.add_argument("--in", dest="input", required=True, help="scan CSV")
    p.add_argument("--channel", choices=("c", "f"), default="c")
    p.add_argument("--window", choices=("none", "hann"), default="none")
    p.add_argument("--keep-mean", action="store_true", help="do not subtract the mean before the transform")
    p.add_argument("--out", help="output CSV path (default: spectrum_<channel>.csv next to the input)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("validate", help="invariant checks and Monte-Carlo comparison")
    p.add_argument("--config", default="fig1c")
    p.add_argument("--delay", type=_quantity)
    p.add_argument("--n-traj", type=_positive_int, default=5000)
    p.add_argument("--seed", type=_seed, default=20240611)
    p.add_argument("--out", help="optional directory for validate.json")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert-units", help="convert a quantity, e.g. '2.0eV --to au'")
    p.add_argument("value", type=_quantity)
    p.add_argument("--to", required=True, help="target unit (au, eV, meV, Hz, fs, ps, V_per_m, D, ...)")
    p.add_argument("--kind", choices=("energy", "time", "field", "dipole", "rate_hz"), help="needed only for au to au")
    p.set_defaults(func=cmd_convert)
    return ap


def _config(args):
    try:
        cfg = load_config(args.config)
    except OSError as e:
        raise CliError(f"cannot read config: {e}") from None
    overrides = {}
    if getattr(args, "dt", None):
        overrides["numerics.dt"] = args.dt
    if getattr(args, "delay", None):
        overrides["numerics.delay"] = args.delay
    for flag, key in (("delay_min", "delay_min"), ("delay_max", "delay_max"), ("delay_step", "delay_step")):
        if getattr(args, flag, None):
            overrides[f"numerics.{key}"] = getattr(args, flag)
    if getattr(args, "stride", None):
        overrides["numerics.t1_stride"] = args.stride
    if getattr(args, "delta", None):
        if cfg.kind != "exciton_biexciton":
            raise CliError("--delta applies only to the exciton_biexciton model")
        overrides["model.delta"] = args.delta
    if getattr(args, "coupling", None):
        if cfg.kind != "coupled_emitters":
            raise CliError("--coupling applies only to the coupled_emitters model")
        overrides["model.g"] = args.coupling
    return with_overrides(cfg, **overrides) if overrides else cfg


def _out_dir(args, cfg):
    out = Path(args.out or cfg.output["directory"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(f"output directory {out} is not writable: {e}") from None
    return out


def _meta(cfg, **extra):
    return {"config_hash": cfg.hash, "config": cfg.canonical, **extra}


def cmd_g2map(args):
    from .lindblad import propagate
    from .regression import coincidence_probability_map, coincidence_rate, g2_grid

    cfg = _config(args)
    out = _out_dir(args, cfg)
    digits = precision(cfg.output["precision"])
    system = cfg.build_system()
    drive = cfg.drive()
    grid, stride = cfg.grid(system, drive)
    t0 = time.perf_counter()
    traj = propagate(system, drive, system.ground_state(), grid)
    cmap = g2_grid(system, drive, grid, stride, trajectory=traj, delay=cfg.numerics["delay"], workers=args.threads)
    det = cfg.detection_params()
    p = coincidence_probability_map(cmap, det.gamma_f, cmap.cell)
    rate = coincidence_rate(cmap, det, strict=args.strict)
    elapsed = time.perf_counter() - t0

    i, j = np.unravel_index(np.argmax(p), p.shape)
    t1, t2 = au_to_fs(cmap.times[i]), au_to_fs(cmap.times[j])
    meta = _meta(cfg, quantity="p(t1,t2) per lattice cell", lattice_cell_fs=au_to_fs(cmap.cell))
    path = write_map_csv(out / "p_map.csv", cmap.times, p, meta, digits)
    write_summary(out / "g2map_summary.json", {
        "config_hash": cfg.hash,
        "delay_fs": au_to_fs(cfg.numerics["delay"]),
        "coincidence_rate_Hz": rate,
        "max_at_fs": [t1, t2],
        "truncation_residual": cmap.residual,
        "n_steps": grid.n_steps,
        "t1_stride": stride,
        "elapsed_s": elapsed,
    })
    print(f"wrote {path}: max p at t1 = {t1:.3f} fs, t2 = {t2:.3f} fs; c = {rate:.6g} s^-1")
    return 0


def cmd_scan(args):
    from .scan import run_delay_scan

    cfg = _config(args)
    out = _out_dir(args, cfg)
    digits = precision(cfg.output["precision"])
    scfg = cfg.scan_config(strict=args.strict)
    t0 = time.perf_counter()
    res = run_delay_scan(scfg, workers=args.threads)
    elapsed = time.perf_counter() - t0
    path = write_scan_csv(out / "scan.csv", res, _meta(cfg, fs_per_au=au_to_fs(1.0)), digits)
    write_summary(out / "scan_summary.json", {
        "config_hash": cfg.hash,
        "n_delays": len(res.delays),
        "elapsed_s": elapsed,
        "threads": args.threads,
        "peak_excited_max": float(res.peak_excited.max()),
        **res.diagnostics,
    })
    print(f"wrote {path}: {len(res.delays)} delays in {elapsed:.1f} s")
    return 0


def cmd_spectrum(args):
    from .scan import spectrum_of

    src = Path(args.input)
    try:
        meta, delays, c, f = read_scan_csv(src)
    except (OSError, ValueError) as e:
        raise CliError(f"cannot read scan CSV: {e}") from None
    values = c if args.channel == "c" else f
    try:
        spec = spectrum_of(delays, values, window=args.window, subtract_mean=not args.keep_mean)
    except ValueError as e:
        raise CliError(str(e)) from None
    path = Path(args.out) if args.out else src.with_name(f"spectrum_{args.channel}.csv")
    meta_out = {
        "config_hash": meta.get("config_hash", "unknown"),
        "source": src.name,
        "channel": args.channel,
        "window": args.window,
        "subtract_mean": str(not args.keep_mean).lower(),
    }
    try:
        write_spectrum_csv(path, spec, meta_out)
    except OSError as e:
        raise CliError(f"cannot write {path}: {e}") from None
    k = 1 + int(np.argmax(spec.magnitude[1:])) if len(spec.magnitude) > 1 else 0
    print(f"wrote {path}: strongest component at omega = {spec.omega[k]:.6g} a.u.")
    return 0


def cmd_validate(args):
    from .validation import run_validation

    cfg = _config(args)
    report = run_validation(cfg, n_traj=args.n_traj, seed=args.seed)
    for check in report:
        print(f"{'PASS' if check['passed'] else 'FAIL'}  {check['name']}: {check['detail']}")
    if args.out:
        out = _out_dir(args, cfg)
        write_summary(out / "validate.json", {"config_hash": cfg.hash, "checks": report})
    return 0 if all(c["passed"] for c in report) else 1


def cmd_convert(args):
    value, unit = parse_quantity(args.value)
    kind = args.kind
    try:
        if kind is None:
            kind = UNITS.kind_of(unit) if unit != "au" else UNITS.kind_of(args.to)
        result = UNITS.from_au(UNITS.to_au(value, unit, kind), args.to, kind)
    except UnitError as e:
        hint = " (pass --kind when converting between atomic units)" if "au" in (unit, args.to) else ""
        raise CliError(f"{e}{hint}") from None
    print(f"{result!r} {args.to}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except (CliError, ConfigError, UnitError) as e:
        print(f"cpcs {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # numerical failures surface as a diagnostic, not a traceback
        if args.verbose:
            raise
        print(f"cpcs {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

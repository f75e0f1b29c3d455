"""Command-line entry point.

Every subcommand takes ``--config`` (a TOML file, or ``default`` for the
shipped one), ``--out`` (output directory) and ``--seed``.  Results go to CSV
files whose ``#`` header records the config hash, the seed and the command
line.  Exit status is 0 on success, 1 on a runtime failure and 2 on a usage
error; failures also print one JSON object on stderr.  The only
environment variable read is ``SIVKINETICS_BACKEND``, which picks between
kernel implementations with identical numerics.
"""

from __future__ import annotations

import argparse
import json
import math
import shlex
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, estfit, figures, selftest
from . import protocol as P
from .calibrate import CALIBRATION_KEYS, OBSERVABLES, calibrate
from .config import parse_config, write_config
from .errors import NonConvergence, SivError
from .io import SCHEMAS, load_series, write_csv
from .schottky import fit_iv

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

FIT_MODELS = {
    "sigmoid": (estfit.fit_sigmoid, "pl_vs_bias"),
    "biexp": (estfit.fit_biexp, "decay"),
    "monoexp": (estfit.fit_monoexp, "delay"),
    "powerlaw": (estfit.fit_powerlaw, "power"),
    "gauss_linear": (estfit.fit_gauss_linear, "spectrum"),
    "iv": (None, "iv"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    if step <= 0:
        raise UsageError("--step must be > 0")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    if n < 2:
        raise UsageError("the grid needs at least two points")
    return np.round(start + step * np.arange(n), 12)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default="default", help="config file, or 'default' (shipped)")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=None, help="RNG seed for shot noise")

    beam = _Parser(add_help=False)
    beam.add_argument("--power", type=float, help="laser power in mW (overrides [beam])")
    beam.add_argument("--energy", type=float, help="photon energy in eV")
    beam.add_argument("--waist", type=float, help="beam waist in um")
    beam.add_argument("--center", type=float, help="beam centre in um")

    parser = _Parser(prog="sivkinetics", description="SiV charge-state kinetics simulator and fitter.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common, beam], help="time trace of a configured protocol")
    p.add_argument("--protocol", default="turnoff", help="protocol name from the config")
    p.add_argument("--boxcar", type=float, help="fold the trace with this period (s)")

    p = sub.add_parser("scan-spatial", parents=[common, beam], help="steady PL/PC versus beam position")
    p.add_argument("--bias", type=float, default=160.0, help="bias in V")
    p.add_argument("--start", type=float, default=-3.0, help="first beam position in um")
    p.add_argument("--stop", type=float, default=None, help="default: gap length + 3 um")
    p.add_argument("--step", type=float, default=0.25, help="position step in um")

    p = sub.add_parser("sweep-bias", parents=[common, beam], help="steady PL/PC versus bias")
    p.add_argument("--start", type=float, default=-200.0, help="first bias in V")
    p.add_argument("--stop", type=float, default=0.0, help="last bias in V")
    p.add_argument("--step", type=float, default=5.0, help="bias step in V")

    p = sub.add_parser("sweep-power", parents=[common], help="turn-off rates and overshoot versus power")
    p.add_argument("--powers", type=_floats, default=[2.54, 5.0, 8.0, 14.0, 28.0],
                   help="comma-separated powers in mW")
    p.add_argument("--protocol", default="turnoff", help="turn-off protocol name from the config")
    p.add_argument("--reference-power", type=float, default=None,
                   help="power setting the common pre-conversion state (default: protocol beam)")

    p = sub.add_parser("sweep-energy", parents=[common, beam], help="conversion voltage versus photon energy (10 mW unless --power)")
    p.add_argument("--start", type=float, default=2.1, help="first photon energy in eV")
    p.add_argument("--stop", type=float, default=2.7, help="last photon energy in eV")
    p.add_argument("--step", type=float, default=0.05, help="energy step in eV")

    p = sub.add_parser("scan-delay", parents=[common, beam], help="overshoot versus dark delay")
    p.add_argument("--delays", type=_floats, default=list(np.arange(0.0, 75.1, 5.0)), help="comma-separated delays in ms")
    p.add_argument("--conv-bias", type=float, default=-50.0, help="conversion bias in V")
    p.add_argument("--laser-off", type=float, default=1e-6, help="dark time at the conversion bias (s)")

    p = sub.add_parser("fit", parents=[common], help="fit a model to a CSV series")
    p.add_argument("--model", required=True, choices=sorted(FIT_MODELS))
    p.add_argument("--in", dest="input", required=True, help="input CSV")
    p.add_argument("--x", help="x column (default from the model's schema)")
    p.add_argument("--y", help="y column (default from the model's schema)")
    p.add_argument("--t-start", type=float, default=None,
                   help="for decays: drop points before this time and shift it to zero")
    p.add_argument("--energy", type=float, help="photon energy for the iv model (default [schottky])")
    p.add_argument("--offset", type=float, default=None,
                   help="hold the offset of biexp/monoexp fits at this value instead of fitting it")

    p = sub.add_parser("calibrate", parents=[common], help="tune calibration constants to targets")
    p.add_argument("--target", action="append", required=True, metavar="OBS[@mW]=VALUE",
                   help=f"observable target; observables: {', '.join(sorted(OBSERVABLES))}")
    p.add_argument("--free", action="append", default=[], metavar="GROUP.KEY",
                   help=f"constant to fit; one of {', '.join(CALIBRATION_KEYS)}")
    p.add_argument("--tol", type=float, default=1e-3, help="relative tolerance on every target")

    sub.add_parser("selftest", parents=[common], help="run the built-in invariant checks")

    p = sub.add_parser("figures", parents=[common], help="regenerate every plot dataset")
    p.add_argument("--only", type=lambda s: [v for v in s.split(",") if v], default=None,
                   help=f"comma-separated subset of {', '.join(figures.NAMES)}")
    return parser


# -- helpers ------------------------------------------------------------------

ENERGY_SWEEP_MW = 10.0

def _beam(cfg, args):
    b = cfg.beam
    for flag, name in (("power", "power"), ("energy", "photon_energy"), ("waist", "waist"), ("center", "center")):
        v = getattr(args, flag, None)
        if v is not None:
            b = replace(b, **{name: float(v)})
    return b.validate()


class _Run:
    """Per-invocation context: config, output directory and CSV metadata."""

    def __init__(self, args, argv):
        self.args = args
        self.cfg = parse_config(args.config)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.meta = {
            "config_hash": self.cfg.hash(),
            "config": str(args.config),
            "seed": "none" if args.seed is None else str(args.seed),
            "command": "sivkinetics " + shlex.join(argv),
            "version": __version__,
        }
        self.meta.update({k: repr(float(self.cfg.get(k))) for k in CALIBRATION_KEYS})

    def write(self, name: str, series, **extra) -> Path:
        meta = dict(self.meta)
        meta.update({k: str(v) for k, v in extra.items()})
        path = write_csv(self.out / name, series, meta)
        print(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        header = "".join(f"# {k}={v}\n" for k, v in self.meta.items())
        path.write_text(header + text, encoding="utf-8")
        print(path)
        return path


# -- subcommands --------------------------------------------------------------

def cmd_simulate(run: _Run) -> int:
    a = run.args
    proto = run.cfg.protocol(a.protocol)
    proto = replace(proto, beam=_beam(replace(run.cfg, beam=proto.beam), a))
    trace = P.run(proto, run.cfg, seed=a.seed)
    if a.boxcar:
        trace = P.boxcar(trace, a.boxcar)
    run.write(f"trace_{a.protocol}.csv", trace.to_series(), protocol=a.protocol)
    return EXIT_OK


def cmd_scan_spatial(run: _Run) -> int:
    a = run.args
    stop = run.cfg.geometry.gap_length + 3.0 if a.stop is None else a.stop
    s = P.spatial_scan(_grid(a.start, stop, a.step), a.bias, run.cfg, _beam(run.cfg, a))
    run.write("spatial_scan.csv", s, bias_V=a.bias)
    return EXIT_OK


def cmd_sweep_bias(run: _Run) -> int:
    a = run.args
    s = P.bias_sweep(_grid(a.start, a.stop, a.step), run.cfg, _beam(run.cfg, a))
    fit = P.conversion_voltage(s)
    extra = {"conversion_voltage_V": "nan" if fit is None else repr(fit["center"])}
    run.write("pl_vs_bias.csv", s, **extra)
    print("conversion_voltage_V=" + extra["conversion_voltage_V"])
    return EXIT_OK


def cmd_sweep_power(run: _Run) -> int:
    a = run.args
    s = P.power_sweep(a.powers, run.cfg.protocol(a.protocol), run.cfg, a.reference_power)
    run.write("power_sweep.csv", s, protocol=a.protocol)
    ok = np.isfinite(s["fast_rate_Hz"]) & (s["fast_rate_Hz"] > 0)
    if ok.sum() >= 2:
        fit = estfit.fit_powerlaw(np.column_stack([s["power_mW"][ok], s["fast_rate_Hz"][ok]]))
        run.write_text("fast_rate_powerlaw.txt", fit.to_text())
        sys.stdout.write(fit.to_text())
    return EXIT_OK


def cmd_sweep_energy(run: _Run) -> int:
    a = run.args
    # 10 mW unless given: the config beam is not meant for this scan.  Setting
    # it as a parser default would leak into every subcommand sharing --power.
    beam = _beam(run.cfg, a)
    if a.power is None:
        beam = replace(beam, power=ENERGY_SWEEP_MW)
    s = P.energy_sweep(_grid(a.start, a.stop, a.step), run.cfg, beam)
    run.write("energy_sweep.csv", s)
    return EXIT_OK


def cmd_scan_delay(run: _Run) -> int:
    a = run.args
    s, fit = P.overshoot_delay_scan(a.delays, run.cfg, _beam(run.cfg, a), a.conv_bias, a.laser_off)
    run.write("delay_scan.csv", s)
    if fit is None:
        print("tau_ms=nan")
    else:
        run.write_text("delay_fit.txt", fit.to_text())
        print(f"tau_ms={fit['tau']!r}")
    return EXIT_OK


def cmd_fit(run: _Run) -> int:
    a = run.args
    fitter, schema = FIT_MODELS[a.model]
    x, y = SCHEMAS[schema]
    x, y = a.x or x, a.y or y
    series = load_series(a.input, (x, y))
    data = series.xy(x, y)
    if a.t_start is not None:
        data = data[data[:, 0] > a.t_start]
        data[:, 0] -= a.t_start
    if a.model == "iv":
        sp = run.cfg.schottky
        result = fit_iv(data, sp.temperature, a.energy if a.energy is not None else sp.photon_energy, sp)
    elif a.offset is not None:
        if a.model not in ("biexp", "monoexp"):
            raise UsageError("--offset applies to biexp and monoexp only")
        result = fitter(data, offset=a.offset)
    else:
        result = fitter(data)
    text = result.to_text()
    if a.model == "sigmoid":
        text += f"conversion_voltage_V={result['center']!r}\n"
    run.write_text(f"fit_{a.model}.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def _targets(items) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--target {item!r} is not OBS[@mW]=VALUE")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--target {item!r}: value is not a number") from None
    return out


def cmd_calibrate(run: _Run) -> int:
    a = run.args
    targets = _targets(a.target)
    try:
        report = calibrate(targets, a.free, run.cfg, tol=a.tol)
    except NonConvergence as exc:
        report = getattr(exc, "report", None)
        if report is not None:
            run.write_text("calibration.txt", report.to_text())
        raise
    write_config(report.config, run.out / "calibrated.toml")
    print(run.out / "calibrated.toml")
    run.write_text("calibration.txt", report.to_text() + f"calibrated_hash={report.config.hash()}\n")
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_selftest(run: _Run) -> int:
    return EXIT_OK if selftest.run(sys.stdout) else EXIT_RUNTIME


def cmd_figures(run: _Run) -> int:
    for name, ds in figures.build(run.cfg, run.args.only).items():
        run.write(f"{name}.csv", ds.series, dataset=name)
        script = run.out / f"{name}.gp"
        script.write_text(ds.gnuplot(f"{name}.csv"), encoding="utf-8")
        print(script)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "scan-spatial": cmd_scan_spatial,
    "sweep-bias": cmd_sweep_bias,
    "sweep-power": cmd_sweep_power,
    "sweep-energy": cmd_sweep_energy,
    "scan-delay": cmd_scan_delay,
    "fit": cmd_fit,
    "calibrate": cmd_calibrate,
    "selftest": cmd_selftest,
    "figures": cmd_figures,
}


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def _fail(kind: str, message: str, code: int, **extra) -> int:
    record = {"error": kind, "message": message, "exit": code}
    record.update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(record), file=sys.stderr)
    return code


def dispatch(argv=None) -> int:
    """Run one command line; returns the exit code instead of exiting."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        run = _Run(args, argv)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](run)
    except UsageError as exc:
        return _fail("UsageError", str(exc), EXIT_USAGE)
    except (SivError, KeyError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        return _fail(type(exc).__name__, str(msg), EXIT_RUNTIME, line=getattr(exc, "line", None),
                     field=getattr(exc, "field", None))


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

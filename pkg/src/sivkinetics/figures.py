"""Plot-ready datasets: a CSV plus a companion gnuplot script for each.

Multi-curve datasets use long format (one row per point, with the curve
parameter as a column), so column names never depend on config values.
Nothing here renders; the scripts are for gnuplot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import protocol as P
from .errors import SivError
from .estfit import biexp, fit_gauss_linear, gauss_linear
from .io import Series
from .schottky import fit_iv

# the wide beam used for photocurrent spectroscopy, everything else uses the focused one
WIDE_WAIST_UM = 28.0


@dataclass
class Dataset:
    series: Series
    xlabel: str
    ylabel: str
    x: str
    y: tuple[str, ...]
    group: str | None = None
    logx: bool = False
    logy: bool = False

    def gnuplot(self, csv_name: str) -> str:
        cols = self.series.names
        ix = cols.index(self.x) + 1
        lines = [
            'set datafile separator ","',
            "set datafile commentschars '#'",
            f'set xlabel "{self.xlabel}"',
            f'set ylabel "{self.ylabel}"',
            "set key left top",
        ]
        if self.logx:
            lines.append("set logscale x")
        if self.logy:
            lines.append("set logscale y")
        plots = []
        for name in self.y:
            iy = cols.index(name) + 1
            if self.group is None:
                plots.append(f'"{csv_name}" skip 1 using {ix}:{iy} with linespoints title "{name}"')
                continue
            ig = cols.index(self.group) + 1
            for g in map(float, np.unique(self.series[self.group])):
                sel = f"(abs(${ig}-{g!r})<1e-9*abs({g!r})+1e-12?${iy}:1/0)"
                plots.append(f'"{csv_name}" skip 1 using {ix}:{sel} with linespoints '
                             f'title "{name} {self.group}={g:g}"')
        lines.append("plot " + ", \\\n     ".join(plots))
        return "\n".join(lines) + "\n"


def _long(key: str, values, parts: list[Series]) -> Series:
    cols = {key: np.concatenate([np.full(len(s), float(v)) for v, s in zip(values, parts)])}
    for name in parts[0].names:
        cols[name] = np.concatenate([s[name] for s in parts])
    return Series(cols)


def iv_curves(cfg, energies=(2.1, 2.3, 2.4, 2.54, 2.7)) -> Dataset:
    """Photocurrent versus bias under the wide beam at several photon energies."""
    biases = np.linspace(-150.0, 150.0, 61)
    parts = []
    for e in energies:
        beam = replace(cfg.beam, waist=WIDE_WAIST_UM, photon_energy=float(e))
        s = P.bias_sweep(biases, cfg, beam)
        parts.append(Series({"bias_V": biases, "current_A": s["pc_A"]}))
    return Dataset(_long("energy_eV", energies, parts), "bias (V)", "photocurrent (A)", "bias_V",
                   ("current_A",), group="energy_eV")


def power_dependence(cfg, bias=160.0) -> Dataset:
    """Steady PL and photocurrent versus power, beam on the positive interface."""
    powers = np.logspace(-1, 4, 26)
    center = 0.0 if bias >= 0 else cfg.geometry.gap_length
    s = P.steady_power_sweep(powers, bias, cfg, replace(cfg.beam, center=center))
    return Dataset(s, "power (mW)", "PL (cps) / photocurrent (A)", "power_mW", ("pl_cps", "pc_A"),
                   logx=True, logy=True)


def spatial_profile(cfg, bias=160.0) -> Dataset:
    L = cfg.geometry.gap_length
    x = np.arange(-3.0, L + 3.0 + 1e-9, 0.25)
    s = P.spatial_scan(x, bias, cfg, cfg.beam)
    return Dataset(s, "beam position (um)", "PL (cps) / photocurrent (A)", "x_um", ("pl_cps", "pc_A"),
                   logy=True)


def bias_sweeps(cfg, energies=(2.3, 2.4, 2.5, 2.6), power=10.0) -> Dataset:
    """Steady PL versus bias at several photon energies."""
    biases = np.linspace(-200.0, 0.0, 41)
    parts = []
    for e in energies:
        s = P.bias_sweep(biases, cfg, replace(cfg.beam, photon_energy=float(e), power=power))
        parts.append(Series({"bias_V": biases, "pl_cps": s["pl_cps"]}))
    return Dataset(_long("energy_eV", energies, parts), "bias (V)", "PL (cps)", "bias_V", ("pl_cps",),
                   group="energy_eV")


def excitation_spectrum(cfg, bias=20.0, power=1.0, window=(2.1, 2.45)) -> Dataset:
    """Steady PL versus photon energy with the beam mid-gap, plus a Gaussian-on-a-line fit.

    The fit covers ``window`` only; its centre and FWHM go into the metadata.
    """
    energies = np.round(np.arange(1.77, 2.751, 0.01), 3)
    model = P.Model(cfg)
    beam = replace(cfg.beam, center=cfg.geometry.gap_length / 2, power=power)
    pl = np.array([P._steady_row(model, replace(beam, photon_energy=float(e)), bias)["pl"] for e in energies])
    sel = (energies >= window[0]) & (energies <= window[1])
    curve = np.full(energies.size, math.nan)
    meta = {}
    try:
        fit = fit_gauss_linear(np.column_stack([energies[sel], pl[sel]]))
        curve[sel] = gauss_linear(fit.params, energies[sel])
        meta = {"fit_center_eV": repr(fit["center"]), "fit_fwhm_eV": repr(fit["fwhm"])}
    except (SivError, np.linalg.LinAlgError):
        meta = {"fit_failed": "1"}
    s = Series({"energy_eV": energies, "pl_cps": pl, "fit_cps": curve}, meta)
    return Dataset(s, "photon energy (eV)", "PL (cps)", "energy_eV", ("pl_cps", "fit_cps"))


def ideality_spectrum(cfg) -> Dataset:
    """n1/n2 from Schottky fits to simulated wide-beam I-V curves.

    The simulated current sets its own amplitude, so the prefactor is the
    fitted member of the (phi0, prefactor) pair here.
    """
    energies = np.round(np.arange(2.0, 2.701, 0.05), 3)
    biases = np.linspace(-150.0, 150.0, 61)
    ratio, failed = [], []
    for e in energies:
        beam = replace(cfg.beam, waist=WIDE_WAIST_UM, photon_energy=float(e))
        i = P.bias_sweep(biases, cfg, beam)["pc_A"]
        try:
            fit = fit_iv(np.column_stack([biases, i]), cfg.schottky.temperature, float(e), cfg.schottky,
                         free="prefactor")
            ratio.append(fit["n1"] / fit["n2"])
            failed.append(0.0)
        except (SivError, ValueError, np.linalg.LinAlgError):
            ratio.append(math.nan)
            failed.append(1.0)
    s = Series({"energy_eV": energies, "ideality_ratio_1": ratio, "fit_failed_1": failed})
    return Dataset(s, "photon energy (eV)", "n1/n2", "energy_eV", ("ideality_ratio_1",))


def conversion_spectrum(cfg, power=10.0) -> Dataset:
    energies = np.round(np.arange(2.1, 2.701, 0.05), 3)
    s = P.energy_sweep(energies, cfg, replace(cfg.beam, power=power))
    return Dataset(s, "photon energy (eV)", "conversion voltage (V)", "energy_eV", ("conversion_voltage_V",))


def turnoff_trace(cfg, power=28.0) -> Dataset:
    proto = cfg.protocol("turnoff")
    proto = replace(proto, beam=replace(proto.beam, power=power))
    trace, _ = P.simulate(proto, cfg)
    t_step = proto.duration - proto.segments[-1].duration
    fit = P._decay_fit(trace, t_step)
    curve = np.where(trace.time > t_step, biexp(fit.params, trace.time - t_step), math.nan)
    s = trace.to_series()
    s.columns["fit_cps"] = curve
    return Dataset(s, "time (s)", "PL (cps)", "time_s", ("pl_cps", "fit_cps"))


def turnoff_rates(cfg, powers=(2.54, 5.0, 8.0, 14.0, 28.0)) -> tuple[Dataset, Dataset]:
    s = P.power_sweep(powers, cfg.protocol("turnoff"), cfg)
    rates = Dataset(s, "power (mW)", "rate (Hz)", "power_mW", ("fast_rate_Hz", "slow_rate_Hz"),
                    logx=True, logy=True)
    over = Dataset(Series({k: s[k] for k in ("power_mW", "overshoot_photons", "overshoot_norm_s")}),
                   "power (mW)", "normalised overshoot (s)", "power_mW", ("overshoot_norm_s",),
                   logx=True, logy=True)
    return rates, over


def overshoot_traces(cfg, powers=(2.54, 28.0), conv_bias=-50.0) -> Dataset:
    """PL after stepping from the conversion bias back to 0 V, from a common start."""
    model = P.Model(cfg)
    start = model.steady(model.drive(cfg.beam, conv_bias, True))
    parts = []
    for p in powers:
        beam = replace(cfg.beam, power=float(p))
        proto = P.Protocol((P.Segment(1e-3, 0.0),), bin_width=1e-6, beam=beam)
        trace, _ = P.simulate(proto, cfg, initial=start.copy(), model=model)
        parts.append(Series({"time_s": trace.time, "pl_cps": trace.pl}))
    return Dataset(_long("power_mW", powers, parts), "time (s)", "PL (cps)", "time_s", ("pl_cps",),
                   group="power_mW")


def overshoot_vs_delay(cfg) -> Dataset:
    delays = np.arange(0.0, 75.1, 5.0)
    s, _ = P.overshoot_delay_scan(delays, cfg, cfg.beam)
    return Dataset(s, "dark delay (s)", "normalised overshoot (s)", "delay_s", ("overshoot_norm_s",),
                   logy=True)


NAMES = ("iv_curves", "power_dependence", "spatial_profile", "bias_sweeps", "excitation_spectrum",
         "ideality_spectrum", "conversion_spectrum", "turnoff_trace", "turnoff_rates", "overshoot_traces",
         "overshoot_vs_power", "overshoot_vs_delay")


def build(cfg, only=None) -> dict[str, Dataset]:
    """All datasets by name, or just those listed in ``only``."""
    makers = {
        "iv_curves": lambda: iv_curves(cfg),
        "power_dependence": lambda: power_dependence(cfg),
        "spatial_profile": lambda: spatial_profile(cfg),
        "bias_sweeps": lambda: bias_sweeps(cfg),
        "excitation_spectrum": lambda: excitation_spectrum(cfg),
        "ideality_spectrum": lambda: ideality_spectrum(cfg),
        "conversion_spectrum": lambda: conversion_spectrum(cfg),
        "turnoff_trace": lambda: turnoff_trace(cfg),
        "turnoff_rates": None,
        "overshoot_traces": lambda: overshoot_traces(cfg),
        "overshoot_vs_power": None,
        "overshoot_vs_delay": lambda: overshoot_vs_delay(cfg),
    }
    wanted = list(NAMES) if not only else list(only)
    unknown = [w for w in wanted if w not in makers]
    if unknown:
        raise KeyError(f"unknown dataset(s) {unknown}; have {list(makers)}")
    out = {}
    if {"turnoff_rates", "overshoot_vs_power"} & set(wanted):
        rates, over = turnoff_rates(cfg)
        out["turnoff_rates"], out["overshoot_vs_power"] = rates, over
    for name in wanted:
        if makers[name] is not None:
            out[name] = makers[name]()
    return {k: out[k] for k in wanted}


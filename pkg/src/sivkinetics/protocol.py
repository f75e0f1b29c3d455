"""Experiment orchestration: stimuli, coupled transport and kinetics, binned observables.

A run freezes the optical and electrical drive per protocol segment and hands
the per-cell arrays to the compiled macro-stepping kernel.  Detected PL is the
sum over cells of the emitted rate times a confocal collection weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import _backend, kinetics
from .constants import E_CHARGE, UM2_PER_CM2
from .errors import DegenerateData, NonConvergence, ProtocolError, SivError, ValidationError
from .estfit import fit_biexp, fit_monoexp, fit_sigmoid
from .io import Series
from .schottky import device_current
from .transport import (BeamProfile, drift_direction, field as field_profile, generate_holes,
                        interface_window, photon_flux, under_metal)


@dataclass(frozen=True)
class DetectorParams:
    """Ideal photon counter behind a confocal pinhole.

    ``psf_waist`` is the 1/e^2 radius (um) of the collection spot; 0 means it
    equals the excitation waist.
    """

    efficiency: float = 1.0
    psf_waist: float = 0.0

    def validate(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValidationError("efficiency", "must lie in (0, 1]")
        if not self.psf_waist >= 0:
            raise ValidationError("psf_waist", "must be >= 0")
        return self


@dataclass(frozen=True)
class NumericsParams:
    macro_tol: float = 1e-3
    dt_min: float = 1e-12
    dt_cap: float = 0.0  # s; 0 caps macro-steps at the bin width
    steady_tol: float = 1e-10
    steady_max_iter: int = 1000
    overshoot_window: float = 2e-3

    def validate(self):
        checks = [
            ("macro_tol", 0 < self.macro_tol < 1, "must lie in (0, 1)"),
            ("dt_min", self.dt_min > 0, "must be > 0"),
            ("dt_cap", self.dt_cap >= 0, "must be >= 0"),
            ("steady_tol", 0 < self.steady_tol < 1, "must lie in (0, 1)"),
            ("steady_max_iter", self.steady_max_iter >= 1, "must be >= 1"),
            ("overshoot_window", self.overshoot_window > 0, "must be > 0"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ValidationError(name, msg)
        return self


@dataclass(frozen=True)
class Segment:
    duration: float
    bias: float = 0.0
    laser_on: bool = True
    power: float | None = None  # mW; None keeps the beam power


@dataclass(frozen=True)
class Protocol:
    segments: tuple
    repetitions: int = 1
    bin_width: float = 100e-9
    beam: BeamProfile = field(default_factory=BeamProfile)

    def validate(self):
        if not self.segments:
            raise ProtocolError("protocol has no segments")
        if self.repetitions < 1:
            raise ProtocolError("repetitions must be >= 1")
        if not self.bin_width > 0:
            raise ProtocolError("bin_width must be > 0")
        for k, seg in enumerate(self.segments):
            if not seg.duration > 0:
                raise ProtocolError(f"segment {k}: duration must be > 0")
            if seg.power is not None and seg.power < 0:
                raise ProtocolError(f"segment {k}: power must be >= 0")
            if self.bin_width > seg.duration / 4 * (1 + 1e-9):
                raise ProtocolError(f"segment {k}: bin_width exceeds a quarter of the duration")
            n = seg.duration / self.bin_width
            if abs(n - round(n)) > 1e-6 * n:
                raise ProtocolError(f"segment {k}: duration is not a whole number of bins")
        self.beam.validate()
        return self

    @property
    def bins_per_segment(self) -> list[int]:
        return [int(round(s.duration / self.bin_width)) for s in self.segments]

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)


@dataclass
class TimeTrace:
    time: np.ndarray
    pl: np.ndarray
    photocurrent: np.ndarray
    n_minus_total: np.ndarray
    pc_collection: np.ndarray
    pc_schottky: np.ndarray
    bin_width: float

    def __post_init__(self):
        n = len(self.time)
        for name in ("pl", "photocurrent", "n_minus_total", "pc_collection", "pc_schottky"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} bins, expected {n}")

    def __len__(self):
        return len(self.time)

    def to_series(self, meta=None) -> Series:
        return Series({
            "time_s": self.time,
            "pl_cps": self.pl,
            "pc_A": self.photocurrent,
            "pc_collection_A": self.pc_collection,
            "pc_schottky_A": self.pc_schottky,
            "n_minus_frac": self.n_minus_total,
        }, dict(meta or {}))

    def _replace(self, **kw) -> "TimeTrace":
        return replace(self, **kw)


@dataclass(frozen=True)
class Drive:
    """Per-cell inputs that stay fixed while bias, beam and gate are fixed."""

    gen: np.ndarray
    k_off: np.ndarray
    emit: np.ndarray
    det_overshoot: np.ndarray
    direction: int
    sign: float
    lateral: float
    pc_schottky: float


class Model:
    """Grid-level view of a :class:`DeviceConfig` with cached drives."""

    def __init__(self, device):
        self.device = device
        geo = device.geometry
        grid = geo.grid
        self.x = np.ascontiguousarray(grid.centers)
        self.dx = np.ascontiguousarray(grid.widths)
        self.n_total = np.full(grid.size, float(geo.siv_areal_density))
        self.coef = device.rates.sigma_cap / geo.layer_thickness
        self.i_lo = geo.electrode_cells
        self.i_hi = grid.size - geo.electrode_cells
        self.inv_tau = device.rates.dark_rate
        self.p_local = device.transport.p_local
        self.kernels = _backend.kernels
        self._metal = under_metal(geo, self.x)
        self.drive = lru_cache(maxsize=64)(self._drive)

    @property
    def size(self) -> int:
        return self.x.size

    def bright(self) -> np.ndarray:
        return self.n_total.copy()

    def _drive(self, beam: BeamProfile, bias: float, laser_on: bool) -> Drive:
        d = self.device
        geo = d.geometry
        n = self.size
        lit = laser_on and beam.power > 0
        if lit:
            flux = photon_flux(beam, geo, d.optics, self.x)
            gen = generate_holes(beam, geo, d.hole_spectrum, bias, d.optics, d.transport)
        else:
            flux = np.zeros(n)
            gen = np.zeros(n)
        k_off = kinetics.off_rate(flux, beam.photon_energy, field_profile(bias, geo, self.x),
                                  d.excitation_spectrum, d.rates)
        wc = d.detector.psf_waist or beam.waist
        psf = np.exp(-2.0 * (self.x - beam.center) ** 2 / wc**2)
        collect = np.where(self._metal, d.optics.transmission, 1.0)
        lateral_pl = math.sqrt(math.pi / 2.0) * beam.waist * wc / math.hypot(beam.waist, wc)
        det = d.detector.efficiency * collect * psf * self.dx * lateral_pl
        emit = kinetics.saturated_excitation(flux, beam.photon_energy, d.excitation_spectrum, d.rates) * det
        pc_s = 0.0
        if lit and bias != 0 and d.transport.g_if > 0:
            window = interface_window(geo, bias, self.x, d.transport.d_if)
            g_if = d.transport.g_if * flux / UM2_PER_CM2 * window
            total = float(np.dot(g_if, self.dx)) * beam.lateral_width
            params = replace(d.schottky, prefactor=d.transport.if_gain * E_CHARGE * total,
                             photon_energy=beam.photon_energy)
            pc_s = device_current(params, bias)
        arrays = [np.ascontiguousarray(a, dtype=float) for a in
                  (gen, np.broadcast_to(k_off, (n,)), emit, d.rates.overshoot_qe * det)]
        for a in arrays:
            a.setflags(write=False)
        direction = drift_direction(bias)
        return Drive(*arrays, direction=direction, sign=float(direction),
                     lateral=beam.lateral_width, pc_schottky=pc_s)

    # -- kernels ---------------------------------------------------------

    def capture(self, drv: Drive, n_minus: np.ndarray):
        """Per-site capture rate and collected hole rate (per um of strip)."""
        rate = np.empty(self.size)
        collected, _, _ = self.kernels.sweep(drv.gen, self.n_total - n_minus, self.n_total, self.dx,
                                             self.coef, drv.direction, self.i_lo, self.i_hi,
                                             self.p_local, rate)
        return rate, collected

    def integrate(self, drv: Drive, n_minus: np.ndarray, edges: np.ndarray, dt_cap: float):
        """Advance ``n_minus`` in place; returns per-bin (photons, collected holes, SiV- content)."""
        nb = edges.size - 1
        pl = np.zeros(nb)
        coll = np.zeros(nb)
        nm = np.zeros(nb)
        num = self.device.numerics
        self.kernels.run_segment(n_minus, self.n_total, drv.gen, self.dx, drv.k_off, drv.emit,
                                 drv.det_overshoot, self.coef, self.inv_tau, drv.direction,
                                 self.i_lo, self.i_hi, self.p_local, np.ascontiguousarray(edges),
                                 dt_cap, num.macro_tol, num.dt_min, pl, coll, nm)
        return pl, coll, nm

    def steady(self, drv: Drive, n_minus: np.ndarray | None = None) -> np.ndarray:
        """Self-consistent fixed point of the rate equations under a frozen drive."""
        num = self.device.numerics
        nm = self.bright() if n_minus is None else np.array(n_minus, dtype=float)
        has = self.n_total > 0
        tot = np.where(has, self.n_total, 1.0)
        relax = 1.0
        last = math.inf
        for _ in range(num.steady_max_iter):
            rate, _ = self.capture(drv, nm)
            k_on = rate + self.inv_tau
            kappa = k_on + drv.k_off
            n_eq = np.where(kappa > 0, self.n_total * k_on / np.where(kappa > 0, kappa, 1.0), nm)
            change = float(np.max(np.where(has, np.abs(n_eq - nm) / tot, 0.0)))
            if change > last:
                relax = max(relax * 0.5, 1e-3)
            last = change
            nm = nm + relax * (n_eq - nm)
            if change < num.steady_tol:
                return np.clip(nm, 0.0, self.n_total)
        raise NonConvergence(f"steady state not reached (last change {last:.3g})")

    def observe(self, drv: Drive, n_minus: np.ndarray) -> dict:
        """Instantaneous observables for a population profile."""
        rate, collected = self.capture(drv, n_minus)
        n2m = self.n_total - n_minus
        pl = float(np.dot(drv.emit, n_minus) + np.dot(drv.det_overshoot * rate, n2m))
        pc_c = drv.sign * E_CHARGE * collected * drv.lateral
        return {
            "pl": pl,
            "pc": pc_c + drv.pc_schottky,
            "pc_collection": pc_c,
            "pc_schottky": drv.pc_schottky,
            "n_minus_frac": self.fraction(n_minus),
        }

    def fraction(self, n_minus) -> float:
        total = float(np.dot(self.n_total, self.dx))
        return float(np.dot(n_minus, self.dx)) / total if total > 0 else 1.0


def _segment_beam(beam: BeamProfile, seg: Segment) -> BeamProfile:
    return beam if seg.power is None else replace(beam, power=seg.power)


def _initial(model: Model, protocol: Protocol, initial):
    if initial is None:
        seg = protocol.segments[0]
        drv = model.drive(_segment_beam(protocol.beam, seg), seg.bias, seg.laser_on)
        return model.steady(drv)
    if isinstance(initial, str):
        if initial == "bright":
            return model.bright()
        raise ProtocolError(f"unknown initial state {initial!r}")
    nm = np.array(initial, dtype=float)
    if nm.shape != (model.size,):
        raise ProtocolError(f"initial state must have {model.size} cells")
    if np.any(nm < 0) or np.any(nm > model.n_total):
        raise ProtocolError("initial state must lie within [0, n_total]")
    return nm


def simulate(protocol: Protocol, device, initial=None, model: Model | None = None):
    """One deterministic pass over the protocol; returns ``(trace, final n_minus)``.

    ``initial`` is None (steady state of the first segment), ``"bright"`` or a
    per-cell SiV- profile.
    """
    protocol.validate()
    model = model or Model(device)
    nm = _initial(model, protocol, initial)
    dt_cap = device.numerics.dt_cap or protocol.bin_width
    bw = protocol.bin_width
    parts = []
    t0 = 0.0
    for seg, nb in zip(protocol.segments, protocol.bins_per_segment):
        drv = model.drive(_segment_beam(protocol.beam, seg), seg.bias, seg.laser_on)
        edges = np.arange(nb + 1) * bw
        pl, coll, nmi = model.integrate(drv, nm, edges, dt_cap)
        pc_c = drv.sign * E_CHARGE * drv.lateral * coll / bw
        parts.append((t0 + (np.arange(nb) + 0.5) * bw, pl / bw, pc_c, drv.pc_schottky,
                      nmi / (bw * float(np.dot(model.n_total, model.dx)) or 1.0)))
        t0 += nb * bw
    time = np.concatenate([p[0] for p in parts])
    pl = np.concatenate([p[1] for p in parts])
    pc_c = np.concatenate([p[2] for p in parts])
    pc_s = np.concatenate([np.full(p[0].size, p[3]) for p in parts])
    frac = np.concatenate([p[4] for p in parts])
    trace = TimeTrace(time, np.maximum(pl, 0.0), pc_c + pc_s, frac, pc_c, pc_s, bw)
    return trace, nm


def run(protocol: Protocol, device, seed: int | None = None, initial=None) -> TimeTrace:
    """Simulate one repetition; with a seed, average ``repetitions`` shot-noise draws."""
    trace, _ = simulate(protocol, device, initial)
    if seed is None:
        return trace
    seeds = np.random.SeedSequence(seed).generate_state(protocol.repetitions)
    pl = np.mean([add_shot_noise(trace, int(s)).pl for s in seeds], axis=0)
    return trace._replace(pl=pl)


def boxcar(raw: TimeTrace, period: float) -> TimeTrace:
    """Fold a trace modulo ``period`` and average the folded bins."""
    per = period / raw.bin_width
    n_per = int(round(per))
    if n_per < 1 or abs(per - n_per) > 1e-9 * max(per, 1.0):
        raise ProtocolError("period is not a whole number of bins")
    k = len(raw) // n_per
    if k < 2:
        raise ProtocolError("trace must span at least two periods")

    def fold(a):
        return np.asarray(a[: k * n_per]).reshape(k, n_per).mean(axis=0)

    return TimeTrace(np.asarray(raw.time[:n_per]), fold(raw.pl), fold(raw.photocurrent),
                     fold(raw.n_minus_total), fold(raw.pc_collection), fold(raw.pc_schottky),
                     raw.bin_width)


def add_shot_noise(trace: TimeTrace, seed: int) -> TimeTrace:
    """Poisson counting noise on the PL bins; deterministic for a given seed."""
    if seed is None:
        raise ValueError("a seed is required")
    pl = np.asarray(trace.pl, dtype=float)
    if np.any(pl < 0):
        raise ValueError("PL must be >= 0")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(pl * trace.bin_width)
    return trace._replace(pl=counts / trace.bin_width)


# -- steady-state scans ----------------------------------------------------

def _steady_row(model: Model, beam: BeamProfile, bias: float) -> dict:
    drv = model.drive(beam, float(bias), True)
    return model.observe(drv, model.steady(drv))


def _steady_series(key: str, unit_values, rows, meta=None) -> Series:
    return Series({
        key: np.asarray(unit_values, dtype=float),
        "pl_cps": [r["pl"] for r in rows],
        "pc_A": [r["pc"] for r in rows],
        "pc_collection_A": [r["pc_collection"] for r in rows],
        "pc_schottky_A": [r["pc_schottky"] for r in rows],
        "n_minus_frac": [r["n_minus_frac"] for r in rows],
    }, dict(meta or {}))


def spatial_scan(positions, bias: float, device, beam: BeamProfile) -> Series:
    """Steady PL and photocurrent versus beam centre position."""
    model = Model(device)
    rows = [_steady_row(model, replace(beam, center=float(c)), bias) for c in positions]
    return _steady_series("x_um", positions, rows, {"bias_V": repr(float(bias))})


def bias_sweep(biases, device, beam: BeamProfile) -> Series:
    """Steady PL (and photocurrent) versus bias, each point from its own steady state."""
    model = Model(device)
    rows = [_steady_row(model, beam, b) for b in biases]
    return _steady_series("bias_V", biases, rows)


def steady_power_sweep(powers, bias: float, device, beam: BeamProfile) -> Series:
    model = Model(device)
    rows = [_steady_row(model, replace(beam, power=float(p)), bias) for p in powers]
    return _steady_series("power_mW", powers, rows, {"bias_V": repr(float(bias))})


# -- transient scans --------------------------------------------------------

def turnoff_protocol(beam: BeamProfile | None = None, base_bias=0.0, pulse_bias=-50.0,
                     pre=2e-6, pulse=20e-6, bin_width=100e-9) -> Protocol:
    """Baseline at ``base_bias`` then a ``pulse``-long step to ``pulse_bias`` under CW light."""
    return Protocol((Segment(pre, base_bias), Segment(pulse, pulse_bias)),
                    bin_width=bin_width, beam=beam or BeamProfile())


def overshoot(model: Model, beam: BeamProfile, n_minus: np.ndarray, bias: float, window: float) -> dict:
    """Integrated PL above the final plateau after switching to ``bias`` at t = 0.

    Returns photons in the transient (``area``), the plateau rate and the
    area normalised by the plateau (seconds).
    """
    drv = model.drive(beam, float(bias), True)
    plateau = model.observe(drv, model.steady(drv))["pl"]
    nm = np.array(n_minus, dtype=float)
    pl, _, _ = model.integrate(drv, nm, np.array([0.0, window]), window)
    area = float(pl[0]) - plateau * window
    return {"area": area, "plateau": plateau, "normalized": area / plateau if plateau > 0 else math.nan}


def _decay_fit(trace: TimeTrace, t_start: float):
    sel = trace.time > t_start
    t = trace.time[sel] - t_start
    return fit_biexp(np.column_stack([t, trace.pl[sel]]))


def power_sweep(powers, protocol_template: Protocol, device, reference_power: float | None = None) -> Series:
    """Turn-off rates and overshoot size versus laser power.

    The turn-off trace of ``protocol_template`` (baseline then conversion
    step) is fitted biexponentially from the last bias step.  The overshoot is
    measured after switching back to the baseline bias, starting from the
    steady state at the conversion bias under ``reference_power`` (default:
    the template beam power), so every power starts from the same profile.
    ``steady_ratio_frac`` is the model steady PL at the conversion bias over
    that at the baseline bias, for comparison with the fitted plateau.
    """
    protocol_template.validate()
    model = Model(device)
    base_bias = protocol_template.segments[0].bias
    conv_bias = protocol_template.segments[-1].bias
    t_step = protocol_template.duration - protocol_template.segments[-1].duration
    ref_beam = replace(protocol_template.beam, power=reference_power or protocol_template.beam.power)
    pre_state = model.steady(model.drive(ref_beam, float(conv_bias), True))
    window = device.numerics.overshoot_window
    cols = {k: [] for k in ("power_mW", "fast_rate_Hz", "slow_rate_Hz", "fast_amp_cps", "slow_amp_cps",
                            "plateau_cps", "fit_rms_cps", "overshoot_photons", "overshoot_norm_s",
                            "steady_pl_cps", "steady_ratio_frac", "fit_flag_1")}
    for p in powers:
        beam = replace(protocol_template.beam, power=float(p))
        proto = replace(protocol_template, beam=beam)
        trace, _ = simulate(proto, device, model=model)
        row = dict.fromkeys(cols, math.nan)
        row["power_mW"] = float(p)
        row["fit_flag_1"] = 0.0
        try:
            fit = _decay_fit(trace, t_step)
            row.update(fast_rate_Hz=1.0 / fit["tau1"], slow_rate_Hz=1.0 / fit["tau2"],
                       fast_amp_cps=fit["a1"], slow_amp_cps=fit["a2"], plateau_cps=fit["offset"],
                       fit_rms_cps=fit.rms_residual)
            if "tau_collapse" in fit.flags:
                row["fit_flag_1"] = 2.0
        except (SivError, np.linalg.LinAlgError):
            row["fit_flag_1"] = 1.0
        ov = overshoot(model, beam, pre_state, base_bias, window)
        conv = model.drive(beam, float(conv_bias), True)
        conv_pl = model.observe(conv, model.steady(conv))["pl"]
        row.update(overshoot_photons=ov["area"], overshoot_norm_s=ov["normalized"], steady_pl_cps=ov["plateau"],
                   steady_ratio_frac=conv_pl / ov["plateau"] if ov["plateau"] > 0 else math.nan)
        for k in cols:
            cols[k].append(row[k])
    return Series(cols)


def conversion_voltage(series: Series, min_contrast: float = 0.1):
    """Sigmoid centre of a PL(V) series, or None when no conversion is resolved.

    No conversion means the PL drop across the sweep is below ``min_contrast``
    of its maximum, the fit fails, or the centre falls outside the swept range.
    """
    v = series["bias_V"]
    pl = series["pl_cps"]
    top = float(np.max(pl))
    if top <= 0 or (top - float(np.min(pl))) < min_contrast * top:
        return None
    try:
        fit = fit_sigmoid(series.xy("bias_V", "pl_cps"))
    except (SivError, np.linalg.LinAlgError):
        return None
    c = fit["center"]
    if "center_unidentifiable" in fit.flags or not (v.min() <= c <= v.max()):
        return None
    return fit


def energy_sweep(energies, device, beam: BeamProfile, bias_grid=None, min_contrast: float = 0.1) -> Series:
    """Conversion voltage versus photon energy.

    Energies without a resolved conversion get NaN and ``no_conversion_1 = 1``.
    """
    if bias_grid is None:
        bias_grid = np.linspace(-200.0, 0.0, 41)
    volts, flags, widths = [], [], []
    for e in energies:
        sweep = bias_sweep(bias_grid, device, replace(beam, photon_energy=float(e)))
        fit = conversion_voltage(sweep, min_contrast)
        volts.append(math.nan if fit is None else fit["center"])
        widths.append(math.nan if fit is None else fit["width"])
        flags.append(1.0 if fit is None else 0.0)
    span = float(np.max(np.abs(bias_grid)))
    return Series({"energy_eV": energies, "conversion_voltage_V": volts, "sigmoid_width_V": widths,
                   "no_conversion_1": flags}, {"bias_span_V": repr(span)})


def delay_protocol_state(model: Model, beam: BeamProfile, conv_bias: float, laser_off: float,
                         delay: float) -> np.ndarray:
    """Steady state under light at ``conv_bias``, then dark for ``laser_off`` at that bias and ``delay`` at 0 V."""
    nm = model.steady(model.drive(beam, float(conv_bias), True))
    for dur, bias in ((laser_off, conv_bias), (delay, 0.0)):
        if dur > 0:
            drv = model.drive(beam, float(bias), False)
            model.integrate(drv, nm, np.array([0.0, dur]), dur)
    return nm


def overshoot_delay_scan(delays_ms, device, beam: BeamProfile, conv_bias: float = -50.0,
                         laser_off: float = 1e-6) -> tuple[Series, object]:
    """Overshoot size versus dark delay before the laser returns at 0 V.

    Returns the series and a mono-exponential fit of normalised area versus
    delay (in ms), whose ``tau`` estimates the dark lifetime.
    """
    model = Model(device)
    window = device.numerics.overshoot_window
    areas, norms = [], []
    for d in delays_ms:
        nm = delay_protocol_state(model, beam, conv_bias, laser_off, float(d) * 1e-3)
        ov = overshoot(model, beam, nm, 0.0, window)
        areas.append(ov["area"])
        norms.append(ov["normalized"])
    series = Series({"delay_s": np.asarray(delays_ms, dtype=float) * 1e-3, "overshoot_photons": areas,
                     "overshoot_norm_s": norms})
    try:
        fit = fit_monoexp(np.column_stack([np.asarray(delays_ms, dtype=float), norms]))
    except (DegenerateData, NonConvergence):
        fit = None
    return series, fit

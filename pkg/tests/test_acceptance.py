"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the terminal
summary) listing the measured quantities, then asserts.  Tolerances and
runtime limits are pinned here.
"""

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from sivkinetics import estfit as E
from sivkinetics import kinetics
from sivkinetics import protocol as P
from sivkinetics.calibrate import calibrate, contrast
from sivkinetics.config import parse_config
from sivkinetics.constants import E_CHARGE
from sivkinetics.errors import SivError
from sivkinetics.schottky import SchottkyParams, fit_iv, synthetic_iv
from sivkinetics.transport import generate_holes, photon_flux, sweep_and_capture

GOLDEN = Path(__file__).parent / "data" / "golden.toml"


class Criterion:
    """Collects named checks, then reports and asserts them on exit."""

    def __init__(self, store, number, title, limit=None):
        self.store, self.number, self.title, self.limit = store, number, title, limit
        self.checks = []

    def check(self, name, ok, detail):
        self.checks.append((name, bool(ok), detail))

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, etype, exc, tb):
        elapsed = time.perf_counter() - self.t0
        if self.limit is not None:
            self.check("runtime", elapsed < self.limit, f"{elapsed:.2f} s (limit {self.limit:g} s)")
        if exc is not None:
            self.check(etype.__name__, False, str(exc).splitlines()[0] if str(exc) else "raised")
        failed = [c for c in self.checks if not c[1]]
        shown = failed or self.checks
        line = (f"{'FAIL' if failed else 'PASS'} criterion {self.number:2d} {self.title}: "
                + "; ".join(f"{n} {d}" for n, _, d in shown))
        self.store[self.number] = line
        print(line)
        if exc is None and failed:
            raise AssertionError(line)
        return False


@pytest.fixture
def criterion(verdicts):
    return lambda number, title, limit=None: Criterion(verdicts, number, title, limit)


def _slopes(x, y):
    return np.diff(np.log(y)) / np.diff(np.log(x))


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_01_schottky_round_trip(criterion):
    p = SchottkyParams()
    v = np.linspace(-150.0, 150.0, 50)
    start = replace(p, phi0=0.8, n1=1.2, n2=1.2)
    keys = ("phi0", "n1", "n2")
    with criterion(1, "Schottky round trip", limit=1.0) as c:
        fit = fit_iv(synthetic_iv(p, v), p.temperature, p.photon_energy, start)
        clean = max(_rel(fit[k], getattr(p, k)) for k in keys)
        noisy = 0.0
        for seed in range(5):
            fit = fit_iv(synthetic_iv(p, v, noise=0.01, seed=seed), p.temperature, p.photon_energy, start)
            noisy = max(noisy, max(_rel(fit[k], getattr(p, k)) for k in keys))
        c.check("noiseless", clean <= 1e-3, f"worst rel {clean:.1e} <= 1e-3")
        c.check("1% noise", noisy <= 0.05, f"worst rel over 5 seeds {noisy:.1e} <= 5e-2")


def test_02_dark_relaxation(cfg, criterion):
    tau = cfg.rates.tau_dark
    with criterion(2, "dark relaxation", limit=30.0) as c:
        delays = np.linspace(0.0, 5 * tau, 11)
        _, fit = P.overshoot_delay_scan(delays, cfg, cfg.beam)
        c.check("tau vs config", _rel(fit["tau"], tau) <= 0.01, f"{fit['tau']:.3f} ms vs {tau} ms (1 %)")
        c.check("tau vs 36.4 ms", _rel(fit["tau"], 36.4) <= 0.01, f"rel {_rel(fit['tau'], 36.4):.1e}")


def test_03_overshoot_photon_invariance(cfg, criterion):
    with criterion(3, "overshoot photon invariance", limit=60.0) as c:
        s = P.power_sweep([2.54, 8.0, 28.0], cfg.protocol("turnoff"), cfg)
        ph = s["overshoot_photons"]
        spread = float(np.ptp(ph) / np.mean(ph))
        slope = float(np.polyfit(np.log(s["power_mW"]), np.log(s["overshoot_norm_s"]), 1)[0])
        c.check("photon spread", spread < 0.02, f"{spread:.2e} < 2e-2")
        c.check("normalised slope", abs(slope + 1.0) <= 0.05, f"{slope:.4f} = -1 +/- 0.05")


def test_04_linearity_and_saturation(cfg, criterion):
    L = cfg.geometry.gap_length
    sat = cfg.rates.sat_flux
    powers = np.geomspace(1e-3, 1e4, 29)
    # no field at 0 V, so the PL probes saturation alone
    mid = replace(cfg.beam, center=L / 2)
    edge = replace(cfg.beam, center=0.0)
    with criterion(4, "linearity and saturation") as c:
        flux = np.array([np.max(photon_flux(replace(mid, power=p), cfg.geometry, cfg.optics, cfg.geometry.grid.centers))
                         for p in powers])
        pl = P.steady_power_sweep(powers, 0.0, cfg, mid)["pl_cps"]
        pc = P.steady_power_sweep(powers, 160.0, cfg, edge)["pc_A"]
        low = flux <= 0.01 * sat
        high = flux > sat
        k_low = float(np.polyfit(np.log(powers[low]), np.log(pl[low]), 1)[0])
        local_low = _slopes(powers[low], pl[low])
        local_high = _slopes(powers[high], pl[high])
        pc_slopes = _slopes(powers, pc)
        c.check("low-flux PL slope", abs(k_low - 1) <= 0.02 and np.all(np.abs(local_low - 1) <= 0.02),
                f"{k_low:.4f} (local {local_low.min():.4f}..{local_low.max():.4f}, {low.sum()} powers)")
        c.check("above sat_flux", high.sum() >= 2 and np.all(local_high < 0.9),
                f"max local slope {local_high.max():.3f} < 0.9 ({high.sum()} powers)")
        c.check("PC slope", np.all(np.abs(pc_slopes - 1) <= 0.02),
                f"{pc_slopes.min():.4f}..{pc_slopes.max():.4f}")


def test_05_spatial_profile(cfg, criterion):
    L = cfg.geometry.gap_length
    eta2 = cfg.optics.transmission**2
    with criterion(5, "spatial profile") as c:
        x = np.arange(0.0, L + 1e-9, 0.25)
        s = P.spatial_scan(x, 160.0, cfg, cfg.beam)
        pl, pc = s["pl_cps"], s["pc_A"]
        c.check("PL ratio", pl[0] / pl[-1] >= 1.5, f"{pl[0] / pl[-1]:.2f} >= 1.5")
        c.check("PC ratio", pc[0] / pc[-1] >= 1.5, f"{pc[0] / pc[-1]:.3g} >= 1.5")
        # a beam centred on the edge is half over the metal, so both maxima sit
        # a little inside the gap; beyond them each profile falls monotonically
        for name, y in (("PL", pl), ("PC", pc)):
            top = int(np.argmax(y))
            c.check(f"{name} shape", x[top] <= cfg.beam.waist and np.all(np.diff(y[top:]) < 0),
                    f"peak at {x[top]:.2f} um (waist {cfg.beam.waist} um), strictly decreasing beyond")
        under = -cfg.geometry.electrode_width / 2
        flat = P.spatial_scan([L / 2, under], 0.0, cfg, cfg.beam)["pl_cps"]
        biased = P.spatial_scan([L / 2, under], 160.0, cfg, cfg.beam)["pl_cps"]
        r0 = flat[1] / flat[0]
        c.check("under electrode", abs(r0 / 4e-4 - 1) <= 0.2 and eta2 == pytest.approx(4e-4),
                f"{r0:.3e} vs eta^2 = {eta2:.1e} at 0 V (+160 V: {biased[1] / biased[0]:.2e})")


def test_06_conversion_voltage_spectrum(cfg, criterion):
    energies = np.round(np.arange(2.25, 2.7001, 0.05), 3)
    below = np.array([2.1, 2.15, 2.2])
    beam = replace(cfg.beam, power=10.0)
    with criterion(6, "conversion-voltage spectrum") as c:
        s = P.energy_sweep(energies, cfg, beam)
        v = s["conversion_voltage_V"]
        best = float(energies[np.nanargmin(np.abs(v))])
        c.check("minimum", abs(best - 2.4) <= 0.1 + 1e-9,
                f"|V| smallest at {best:.2f} eV ({np.isfinite(v).sum()}/{v.size} resolved)")
        low = P.energy_sweep(below, cfg, beam)
        flagged = np.all(low["no_conversion_1"] == 1.0) and np.all(np.isnan(low["conversion_voltage_V"]))
        c.check("below 2.25 eV", flagged,
                f"{int(low['no_conversion_1'].sum())}/{below.size} flagged")


def test_07_turnoff_dynamics(cfg, criterion):
    detuned = cfg.with_updates({"rates.sigma_ion": 2 * cfg.rates.sigma_ion})
    with criterion(7, "turn-off dynamics") as c:
        rep = calibrate({"fast_rate@28": 1e6}, ["rates.sigma_ion"], detuned)
        cal = rep.config
        c.check("calibration", abs(rep.relative_residuals["fast_rate@28"]) <= 1e-3,
                f"fast rate {rep.achieved['fast_rate@28'] / 1e6:.4f} MHz")
        proto = cal.protocol("turnoff")
        proto = replace(proto, beam=replace(proto.beam, power=28.0))
        trace, _ = P.simulate(proto, cal)
        t_step = proto.duration - proto.segments[-1].duration
        sel = trace.time > t_step
        t, y = trace.time[sel] - t_step, trace.pl[sel]
        fit = E.fit_biexp(np.column_stack([t, y]))
        norm = float(np.linalg.norm(y - E.biexp(fit.params, t)))
        c.check("biexp residual", norm <= 0.05 * np.ptp(y), f"||r|| / range = {norm / np.ptp(y):.2e} <= 5e-2")
        powers = [2.54, 5.0, 8.0, 14.0, 28.0]
        s = P.power_sweep(powers, cal.protocol("turnoff"), cal)
        rate = s["fast_rate_Hz"]
        k = E.fit_powerlaw(np.column_stack([powers, rate]))["exponent"]
        c.check("monotone", np.all(np.diff(rate) > 0), "fast rate rises with power")
        c.check("exponent", 0.6 <= k <= 1.0, f"{k:.3f} in [0.6, 1.0]")
        con = contrast(cal, 28.0)
        c.check("contrast", abs(con - 0.5) <= 0.1, f"{100 * con:.1f} % = 50 +/- 10 %")


def test_08_null_electrical_conversion(cfg, criterion):
    def first_lit(pulse_bias):
        segs = (P.Segment(2e-6, 0.0, False), P.Segment(20e-6, pulse_bias, False), P.Segment(5e-6, 0.0, True))
        proto = P.Protocol(segs, beam=cfg.beam)
        trace, _ = P.simulate(proto, cfg)
        i = int(round((segs[0].duration + segs[1].duration) / proto.bin_width))
        return trace.pl[i], trace.pl[i:]

    with criterion(8, "null electrical conversion") as c:
        ref, ref_tail = first_lit(0.0)
        worst = tail = 0.0
        for bias in (-50.0, -150.0, 100.0):
            pl, pl_tail = first_lit(bias)
            worst = max(worst, _rel(pl, ref))
            tail = max(tail, float(np.max(np.abs(pl_tail - ref_tail) / ref_tail)))
        c.check("first lit bin", worst < 1e-9, f"rel diff {worst:.1e} < 1e-9 (whole lit segment {tail:.1e})")


def test_09_conservation_and_convergence(cfg, criterion):
    rng = np.random.default_rng(9)
    with criterion(9, "conservation and convergence", limit=60.0) as c:
        n = rng.uniform(1.0, 1e3, 16)
        state = kinetics.CellState(n * rng.uniform(0, 1, 16), np.zeros(16))
        state = kinetics.CellState(state.n_minus, n - state.n_minus)
        pool = [(rng.uniform(0, 1e7, 16), rng.uniform(0, 1e7, 16)) for _ in range(64)]
        drift = 0.0
        for i in range(1_000_000):
            k_off, k_on = pool[i % 64]
            state = kinetics.advance(state, k_off, k_on, 1e-7)
            if i % 1000 == 999:
                drift = max(drift, float(np.max(np.abs(state.n_total - n) / n)))
        c.check("cell conservation", drift <= 1e-12, f"{drift:.1e} over 1e6 steps")

        geo = cfg.geometry
        balance = 0.0
        for bias in (160.0, 50.0, 0.0, -50.0, -150.0):
            gen = generate_holes(cfg.beam, geo, cfg.hole_spectrum, bias, cfg.optics, cfg.transport)
            total = float(np.dot(gen, geo.grid.widths))
            for _ in range(4):
                n2m = rng.uniform(0, geo.siv_areal_density, geo.grid.size)
                hf = sweep_and_capture(gen, n2m, bias, geo, cfg.rates.sigma_cap, cfg.transport.p_local)
                captured = float(np.dot(hf.capture_flux, geo.grid.widths))
                err = abs(captured + hf.collected_current / E_CHARGE + hf.discarded - total) / total
                balance = max(balance, err)
        c.check("hole bookkeeping", balance <= 1e-12, f"{balance:.1e}")

        golden = parse_config(GOLDEN)
        change = 0.0
        for name, proto in golden.protocols.items():
            a, _ = P.simulate(proto, golden)
            b, _ = P.simulate(proto, golden.with_updates({"numerics.dt_cap": proto.bin_width / 2}))
            pc_scale = np.max(np.abs(a.photocurrent))
            change = max(change, float(np.max(np.abs(b.pl - a.pl) / a.pl)),
                         float(np.max(np.abs(b.photocurrent - a.photocurrent)) / pc_scale),
                         float(np.max(np.abs(b.n_minus_total - a.n_minus_total))))
        c.check("half macro-step cap", change < 1e-3, f"worst change {change:.1e} over {len(golden.protocols)} traces")


# -- fit recovery ------------------------------------------------------------

V = np.linspace(-200.0, 0.0, 41)
E_AXIS = np.linspace(1.9, 2.7, 81)


def _draw(name, r):
    if name == "sigmoid":
        truth = {"center": r.uniform(-150, -50), "width": r.uniform(5, 30), "amplitude": r.uniform(0.5, 5),
                 "offset": r.uniform(0.5, 2)}
        return truth, V
    if name == "biexp":
        tau1, a1 = r.uniform(0.5, 2.0), r.uniform(1, 5)
        truth = {"a1": a1, "tau1": tau1, "a2": a1 * r.uniform(0.3, 1.0), "tau2": tau1 * r.uniform(5, 20),
                 "offset": r.uniform(0.5, 2)}
        return truth, np.linspace(0, 5 * truth["tau2"], 200)
    if name == "monoexp":
        truth = {"a": r.uniform(0.5, 5), "tau": r.uniform(1, 100), "offset": r.uniform(0.5, 2)}
        return truth, np.linspace(0, 5 * truth["tau"], 50)
    if name == "powerlaw":
        return {"exponent": r.uniform(-2, 2), "prefactor": 10 ** r.uniform(-3, 3)}, np.geomspace(1, 100, 8)
    truth = {"center": r.uniform(2.1, 2.5), "fwhm": r.uniform(0.03, 0.15), "amplitude": r.uniform(0.5, 5),
             "slope": r.uniform(0.5, 3), "offset": r.uniform(0.5, 2)}
    return truth, E_AXIS


FITS = {
    "sigmoid": (E.fit_sigmoid, E.sigmoid),
    "biexp": (E.fit_biexp, E.biexp),
    "monoexp": (E.fit_monoexp, E.monoexp),
    "powerlaw": (E.fit_powerlaw, lambda p, x: p["prefactor"] * x ** p["exponent"]),
    "gauss_linear": (E.fit_gauss_linear, E.gauss_linear),
}

# fixed truths for the Monte-Carlo runs: (truth, x, noise sigma)
MC_CASES = {
    "sigmoid": ({"amplitude": 1.0, "center": -80.0, "width": 15.0, "offset": 1.0}, V, 0.02),
    "biexp": ({"a1": 3.0, "tau1": 1.0, "a2": 1.0, "tau2": 6.0, "offset": 0.5}, np.linspace(0, 30, 200), 0.02),
    "monoexp": ({"a": 1.0, "tau": 36.4, "offset": 0.1}, np.linspace(0, 180, 37), 0.02),
    "powerlaw": ({"exponent": 0.85, "prefactor": 3e5}, np.geomspace(2.54, 28, 8), 0.03),
    "gauss_linear": ({"amplitude": 1.0, "center": 2.27, "fwhm": 0.08, "slope": 0.5, "offset": 0.5}, E_AXIS, 0.02),
}
REPLICATES = 500


def _coverage(name, rng):
    """Empirical scatter over mean reported stderr, per parameter; plus the failure count."""
    fitter, model = FITS[name]
    truth, x, sigma = MC_CASES[name]
    clean = model(truth, x)
    est, err, failures = [], [], 0
    for _ in range(REPLICATES):
        noise = rng.standard_normal(x.size)
        # the power law is fitted in log space, so its noise is multiplicative
        y = clean * np.exp(sigma * noise) if name == "powerlaw" else clean + sigma * noise
        try:
            res = fitter(np.column_stack([x, y]))
        except SivError:
            failures += 1
            continue
        est.append([res[k] for k in truth])
        err.append([res.stderr[k] for k in truth])
    est, err = np.array(est), np.array(err)
    ratio = est.std(axis=0, ddof=1) / np.sqrt(np.mean(err**2, axis=0))
    return dict(zip(truth, ratio)), failures


def test_10_fit_recovery(criterion):
    with criterion(10, "fit recovery", limit=120.0) as c:
        worst = {}
        for name, (fitter, model) in FITS.items():
            w = 0.0
            for seed in range(20):
                truth, x = _draw(name, np.random.default_rng(seed))
                res = fitter(np.column_stack([x, model(truth, x)]))
                w = max(w, max(_rel(res[k], v) for k, v in truth.items()))
            worst[name] = w
        bad = max(worst.values())
        c.check("noiseless round trips", bad <= 5e-3, f"worst rel {bad:.1e} <= 5e-3 (5 models x 20 draws)")
        rng = np.random.default_rng(2024)
        lo, hi, fails = math.inf, 0.0, 0
        for name in FITS:
            ratios, failures = _coverage(name, rng)
            lo, hi, fails = min(lo, *ratios.values()), max(hi, *ratios.values()), fails + failures
        c.check("stderr coverage", 1 / 1.5 <= lo and hi <= 1.5 and fails == 0,
                f"scatter/stderr {lo:.3f}..{hi:.3f} within x1.5, {fails} failed fits "
                f"({REPLICATES} replicates per model)")

"""Fast invariant checks shipped with the package, run by ``sivkinetics selftest``.

Each check returns ``None`` on success or a short failure description.  The
full test suite covers far more; these are the ones cheap enough to run on
every install.
"""

from __future__ import annotations

import io as _stdio
import math
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _backend, _kernels_py, estfit, kinetics
from . import protocol as P
from .constants import E_CHARGE
from .config import DeviceConfig, parse_config, parse_text, serialize
from .io import Series, load_series, write_csv
from .schottky import SchottkyParams, device_current, fit_iv, synthetic_iv
from .transport import generate_holes, sweep_and_capture


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def check_schottky():
    p = SchottkyParams()
    if device_current(p, 0.0) != 0.0:
        return "current at zero bias is not zero"
    data = synthetic_iv(p, np.linspace(-150, 150, 50))
    fit = fit_iv(data, p.temperature, p.photon_energy, replace(p, phi0=0.8, n1=1.2, n2=1.2))
    worst = max(_rel(fit[k], getattr(p, k)) for k in ("phi0", "n1", "n2"))
    return None if worst < 1e-3 else f"I-V round trip off by {worst:.2e}"


def check_hole_bookkeeping():
    cfg = DeviceConfig()
    geo = cfg.geometry
    rng = np.random.default_rng(1)
    n2m = rng.uniform(0, geo.siv_areal_density, geo.grid.size)
    for bias in (160.0, -50.0, 0.0):
        gen = generate_holes(cfg.beam, geo, cfg.hole_spectrum, bias, cfg.optics, cfg.transport)
        hf = sweep_and_capture(gen, n2m, bias, geo, cfg.rates.sigma_cap, cfg.transport.p_local)
        captured = float(np.dot(hf.capture_flux, geo.grid.widths))
        total = float(np.dot(gen, geo.grid.widths))
        collected = hf.collected_current / E_CHARGE
        err = abs(captured + collected + hf.discarded - total) / total
        if err > 1e-12:
            return f"hole balance off by {err:.2e} at {bias} V"
    return None


def check_kinetics():
    rng = np.random.default_rng(2)
    n = rng.uniform(0, 100, 64)
    nm = n * rng.uniform(0, 1, 64)
    state = kinetics.CellState(nm, n - nm)
    k_off, k_on = rng.uniform(0, 1e6, 64), rng.uniform(0, 1e6, 64)
    one = kinetics.advance(state, k_off, k_on, 2e-6)
    two = kinetics.advance(kinetics.advance(state, k_off, k_on, 1e-6), k_off, k_on, 1e-6)
    if np.max(np.abs(one.n_minus - two.n_minus) / n) > 1e-12:
        return "advance is not a semigroup"
    if np.max(np.abs(one.n_total - n) / n) > 1e-12:
        return "advance does not conserve each cell"
    return None


def check_backends():
    if _backend.NAME == "python":
        return None
    cfg = DeviceConfig()
    model = P.Model(cfg)
    drv = model.drive(cfg.beam, -50.0, True)
    out = []
    for k in (_backend.kernels, _kernels_py):
        nm = model.bright()
        pl, coll, nmi = np.zeros(20), np.zeros(20), np.zeros(20)
        k.run_segment(nm, model.n_total, drv.gen, model.dx, drv.k_off, drv.emit, drv.det_overshoot,
                      model.coef, model.inv_tau, drv.direction, model.i_lo, model.i_hi, model.p_local,
                      np.linspace(0, 2e-6, 21), 1e-7, cfg.numerics.macro_tol, cfg.numerics.dt_min,
                      pl, coll, nmi)
        out.append(np.concatenate([pl, coll, nmi, nm]))
    err = float(np.max(np.abs(out[0] - out[1]) / np.maximum(np.abs(out[1]), 1e-300)))
    return None if err < 1e-9 else f"compiled and Python kernels differ by {err:.2e}"


def check_null_conversion():
    cfg = DeviceConfig()
    segs = (P.Segment(2e-6, 0.0, False), P.Segment(20e-6, -50.0, False), P.Segment(5e-6, 0.0, True))
    ref = (P.Segment(2e-6, 0.0, False), P.Segment(20e-6, 0.0, False), P.Segment(5e-6, 0.0, True))
    a, _ = P.simulate(P.Protocol(segs, beam=cfg.beam), cfg, initial="bright")
    b, _ = P.simulate(P.Protocol(ref, beam=cfg.beam), cfg, initial="bright")
    i = 220
    return None if _rel(a.pl[i], b.pl[i]) < 1e-9 else "dark bias pulse changed the PL"


def check_fits():
    t = np.linspace(0, 20, 200)
    cases = [
        (estfit.fit_sigmoid, estfit.sigmoid, np.linspace(-200, 0, 41),
         {"amplitude": 1e6, "center": -60.0, "width": 12.0, "offset": 2e5}),
        (estfit.fit_biexp, estfit.biexp, t, {"a1": 3.0, "tau1": 1.0, "a2": 1.0, "tau2": 6.0, "offset": 0.5}),
        (estfit.fit_monoexp, estfit.monoexp, t, {"a": 2.0, "tau": 4.0, "offset": 0.1}),
        (estfit.fit_gauss_linear, estfit.gauss_linear, np.linspace(1.9, 2.7, 81),
         {"amplitude": 2.0, "center": 2.27, "fwhm": 0.05, "slope": 1.0, "offset": 0.1}),
    ]
    for fitter, model, x, truth in cases:
        res = fitter(np.column_stack([x, model(truth, x)]))
        worst = max(_rel(res[k], v) for k, v in truth.items())
        if worst > 5e-3:
            return f"{fitter.__name__} round trip off by {worst:.2e}"
    p = np.array([1.0, 2.0, 5.0, 10.0, 30.0])
    res = estfit.fit_powerlaw(np.column_stack([p, 3.0 * p**0.85]))
    return None if _rel(res["exponent"], 0.85) < 5e-3 else "fit_powerlaw round trip failed"


def check_config():
    cfg = parse_config("default")
    if cfg != DeviceConfig():
        return "shipped config differs from the built-in defaults"
    return None if parse_text(serialize(cfg)) == cfg else "config does not round-trip"


def check_csv():
    s = Series({"time_s": [0.0, 1e-7], "pl_cps": [1.0, math.pi]})
    with tempfile.TemporaryDirectory() as tmp:
        path = write_csv(Path(tmp) / "t.csv", s, {"config_hash": "x"})
        back = load_series(path, "trace")
    return None if np.array_equal(back["pl_cps"], s["pl_cps"]) else "CSV round trip lost precision"


CHECKS = {
    "schottky_round_trip": check_schottky,
    "hole_bookkeeping": check_hole_bookkeeping,
    "cell_conservation": check_kinetics,
    "kernel_backends_agree": check_backends,
    "null_electrical_conversion": check_null_conversion,
    "fit_round_trips": check_fits,
    "config_round_trip": check_config,
    "csv_round_trip": check_csv,
}


def run(stream=None) -> bool:
    """Run every check, print one line each, return True when all pass."""
    stream = stream or _stdio.StringIO()
    ok = True
    for name, check in CHECKS.items():
        try:
            problem = check()
        except Exception as exc:  # a crash is a failure, not an abort
            problem = f"{type(exc).__name__}: {exc}"
        ok &= problem is None
        print(f"{'PASS' if problem is None else 'FAIL'} {name}" + (f": {problem}" if problem else ""),
              file=stream)
    return ok

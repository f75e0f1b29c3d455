"""Least-squares tuning of calibration constants against simulated observables."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import protocol as P
from .errors import NonConvergence, SivError
from .estfit import FitResult, lm_minimize

CALIBRATION_KEYS = (
    "transport.g_bulk", "transport.g_if", "transport.d_if", "transport.p_local", "transport.if_gain",
    "rates.sigma_ion", "rates.sigma_cap", "rates.p_escape_halffield", "rates.escape_exponent",
    "rates.pl_brightness", "rates.sat_flux",
)


def _beam(cfg, power=None):
    return cfg.beam if power is None else replace(cfg.beam, power=float(power))


def fast_rate(cfg, power=None, bias=-50.0) -> float:
    """Fast rate (Hz) of the biexponential fitted to the turn-off trace."""
    proto = P.turnoff_protocol(_beam(cfg, power), pulse_bias=bias)
    trace, _ = P.simulate(proto, cfg)
    fit = P._decay_fit(trace, proto.segments[0].duration)
    return 1.0 / fit["tau1"]


def slow_rate(cfg, power=None, bias=-50.0) -> float:
    proto = P.turnoff_protocol(_beam(cfg, power), pulse_bias=bias)
    trace, _ = P.simulate(proto, cfg)
    return 1.0 / P._decay_fit(trace, proto.segments[0].duration)["tau2"]


def contrast(cfg, power=None, bias=-50.0) -> float:
    """1 - steady PL at ``bias`` / steady PL at 0 V."""
    s = P.bias_sweep([0.0, bias], cfg, _beam(cfg, power))
    return 1.0 - s["pl_cps"][1] / s["pl_cps"][0]


def conversion_voltage(cfg, power=None) -> float:
    s = P.bias_sweep(np.linspace(-200.0, 0.0, 41), cfg, _beam(cfg, power))
    fit = P.conversion_voltage(s)
    if fit is None:
        raise SivError("no conversion resolved")
    return fit["center"]


def spatial_pl_ratio(cfg, power=None, bias=160.0) -> float:
    """Steady PL with the beam on the positive interface over that on the negative one."""
    L = cfg.geometry.gap_length
    pos, neg = (0.0, L) if bias > 0 else (L, 0.0)
    s = P.spatial_scan([pos, neg], bias, cfg, _beam(cfg, power))
    return s["pl_cps"][0] / s["pl_cps"][1]


OBSERVABLES = {
    "fast_rate": fast_rate,
    "slow_rate": slow_rate,
    "contrast": contrast,
    "conversion_voltage": conversion_voltage,
    "spatial_pl_ratio": spatial_pl_ratio,
}


@dataclass
class Target:
    observable: str
    value: float
    power: float | None = None

    @classmethod
    def parse(cls, key: str, value: float) -> "Target":
        """``"fast_rate@28"`` means the fast rate at 28 mW."""
        name, _, power = key.partition("@")
        if name not in OBSERVABLES:
            raise KeyError(f"unknown observable {name!r}; have {sorted(OBSERVABLES)}")
        return cls(name, float(value), float(power) if power else None)

    def evaluate(self, cfg) -> float:
        return OBSERVABLES[self.observable](cfg, self.power)


@dataclass
class CalibrationReport:
    config: object
    targets: dict
    achieved: dict
    fit: FitResult | None
    condition: float = 1.0  # of the log-log sensitivity matrix at the solution

    @property
    def values(self) -> dict:
        return {} if self.fit is None else {n: self.config.get(n) for n in self.fit.params}

    @property
    def relative_residuals(self) -> dict:
        return {k: (self.achieved[k] - t.value) / t.value for k, t in self.targets.items()}

    def to_text(self) -> str:
        lines = []
        for k, t in self.targets.items():
            lines.append(f"{k}: target={t.value:.6g} achieved={self.achieved[k]:.6g} "
                         f"rel={self.relative_residuals[k]:+.3e}")
        for n, v in self.values.items():
            rel = self.fit.stderr[n]  # log-space stderr is a relative error
            lines.append(f"{n}={v:.9g} (±{100 * rel:.3g} %)")
        if self.fit is not None:
            lines.append(f"iterations={self.fit.iterations} converged={str(self.fit.converged).lower()} "
                         f"condition={self.condition:.3g}")
        return "\n".join(lines) + "\n"


COND_LIMIT = 1e6
SENS_STEP = 1e-3  # log-space step, well above the noise of fitted observables


def _condition(model, params, free, n_targets) -> float:
    """Condition number of d log(observable) / d log(constant); inf when under-determined."""
    if len(free) > n_targets:
        return math.inf
    cols = []
    for n in free:
        up, dn = dict(params), dict(params)
        up[n] += SENS_STEP
        dn[n] -= SENS_STEP
        cols.append((model(up, None) - model(dn, None)) / (2 * SENS_STEP))
    sv = np.linalg.svd(np.column_stack(cols), compute_uv=False)
    if not np.all(np.isfinite(sv)) or sv[-1] <= 0:
        return math.inf
    return float(sv[0] / sv[-1])


def calibrate(targets: dict, free_params, config, tol: float = 1e-3) -> CalibrationReport:
    """Fit the named calibration constants so simulated observables hit ``targets``.

    ``targets`` maps observable keys (see :class:`Target`) to values.  The
    constants are fitted in log space.  Raises :class:`NonConvergence` with the
    report attached when a target stays off by more than ``tol`` (relative),
    and warns when the targets cannot pin down every free constant.
    """
    parsed = {k: Target.parse(k, v) for k, v in targets.items()}
    free = list(free_params)
    for name in free:
        if name not in CALIBRATION_KEYS:
            raise KeyError(f"{name!r} is not a calibration constant")
    if not free:
        achieved = {k: t.evaluate(config) for k, t in parsed.items()}
        return CalibrationReport(config, parsed, achieved, None)
    if len(parsed) < 1:
        raise ValueError("need at least one target")

    keys = list(parsed)
    start = {n: math.log(config.get(n)) for n in free}

    def configured(p):
        return config.with_updates({n: math.exp(p[n]) for n in free})

    def model(p, _x):
        cfg = configured(p)
        try:
            return np.array([parsed[k].evaluate(cfg) / parsed[k].value for k in keys])
        except (SivError, ValueError, np.linalg.LinAlgError):
            # a simulation or fit that breaks down counts as a rejected step
            return np.full(len(keys), np.inf)

    # lm wants more rows than free constants; constant rows pad the system
    pad = max(1, len(free) + 1 - len(keys))
    x = np.arange(len(keys) + pad, dtype=float)
    y = np.ones(len(keys) + pad)

    def padded(p, xx):
        return np.concatenate([model(p, xx), np.ones(pad)])

    err = None
    try:
        fit = lm_minimize(padded, x, y, start, allow_singular=True, max_step=1.0)
    except NonConvergence as exc:
        fit, err = exc.result, exc
    cfg = configured(fit.params)
    achieved = {k: parsed[k].evaluate(cfg) for k in keys}
    cond = _condition(model, fit.params, free, len(keys))
    report = CalibrationReport(cfg, parsed, achieved, fit, cond)
    if cond > COND_LIMIT:
        warnings.warn(f"calibration constants are not all identifiable from these targets "
                      f"(sensitivity condition {cond:.3g})", stacklevel=2)
    worst = max(abs(r) for r in report.relative_residuals.values())
    if err is not None or worst > tol:
        exc = NonConvergence(f"calibration missed its targets (worst relative residual {worst:.3g})\n"
                             + report.to_text(), fit)
        exc.report = report
        raise exc
    return report

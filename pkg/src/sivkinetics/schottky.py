"""Back-to-back Schottky barrier photocurrent model.

Each junction carries ``I_j = prefactor * exp(-phi_j / (k_B T + h nu))`` with a
bias-shifted barrier ``phi_j = phi0 +/- bias * (1 - 1/n_j)``.  Positive bias
raises the barrier of electrode One and lowers that of electrode Two; the
device current is ``I_2 - I_1``.

Only ``prefactor * exp(-phi0 / (k_B T + h nu))`` is observable in an I-V
curve, so :func:`fit_iv` holds the prefactor at its supplied value and fits
``phi0, n1, n2`` (or the reverse with ``free="prefactor"``).
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .constants import K_B_EV
from .errors import DegenerateData, NonConvergence, SivError, ValidationError
from .estfit import FitResult, lm_minimize

CLAMP_A = 1e-15


class Electrode(enum.Enum):
    One = 1
    Two = 2


@dataclass(frozen=True)
class SchottkyParams:
    phi0: float = 1.0
    n1: float = 1.05
    n2: float = 1.10
    prefactor: float = 1e-9
    temperature: float = 8.0
    photon_energy: float = 2.4

    def validate(self):
        checks = [
            ("phi0", self.phi0 > 0, "must be > 0"),
            ("n1", self.n1 >= 1, "must be >= 1"),
            ("n2", self.n2 >= 1, "must be >= 1"),
            ("prefactor", self.prefactor > 0, "must be > 0"),
            ("temperature", self.temperature > 0, "must be > 0"),
            ("photon_energy", self.photon_energy >= 0, "must be >= 0"),
        ]
        for name, ok, msg in checks:
            if not ok or not math.isfinite(getattr(self, name)):
                raise ValidationError(name, msg)
        return self

    @property
    def energy_scale(self) -> float:
        return K_B_EV * self.temperature + self.photon_energy


def barrier_height(params: SchottkyParams, bias, electrode: Electrode):
    """Effective barrier (eV) of one junction at the given bias (V)."""
    bias = np.asarray(bias, dtype=float)
    if not np.all(np.isfinite(bias)):
        raise ValueError("bias must be finite")
    n = params.n1 if electrode is Electrode.One else params.n2
    sign = 1.0 if electrode is Electrode.One else -1.0
    out = params.phi0 + sign * bias * (1.0 - 1.0 / n)
    return float(out) if out.ndim == 0 else out


def junction_current(params: SchottkyParams, barrier):
    barrier = np.asarray(barrier, dtype=float)
    if np.any(np.isnan(barrier)):
        raise ValueError("barrier must not be NaN")
    out = params.prefactor * np.exp(-barrier / params.energy_scale)
    return float(out) if out.ndim == 0 else out


def device_current(params: SchottkyParams, bias):
    """Net photocurrent I_2 - I_1 (A); zero at zero bias, increasing in bias."""
    b = np.asarray(bias, dtype=float)
    eps = params.energy_scale
    a1 = (1.0 - 1.0 / params.n1) / eps
    a2 = (1.0 - 1.0 / params.n2) / eps
    # factor out the common exp(-phi0/eps) so the difference is exact at zero bias
    out = params.prefactor * math.exp(-params.phi0 / eps) * (np.exp(b * a2) - np.exp(-b * a1))
    return float(out) if out.ndim == 0 else out


def synthetic_iv(params: SchottkyParams, biases, noise: float = 0.0, seed: int | None = None):
    """Forward-model I-V series with optional multiplicative Gaussian noise."""
    v = np.asarray(biases, dtype=float)
    i = device_current(params, v)
    if noise:
        if seed is None:
            raise ValueError("a seed is required when noise is requested")
        rng = np.random.default_rng(seed)
        i = i * (1.0 + noise * rng.standard_normal(v.size))
    i = np.where(np.abs(i) < CLAMP_A, 0.0, i)
    return np.column_stack([v, i])


def fit_iv(data, temperature: float, photon_energy: float, init: SchottkyParams,
           free: str = "phi0", weights="relative") -> FitResult:
    """Least-squares fit of :func:`device_current` to an I-V series.

    ``free`` picks which member of the degenerate (phi0, prefactor) pair is
    fitted; the other stays at its value in ``init``.  Returns a FitResult with
    parameters ``phi0, n1, n2, prefactor``.

    ``weights="relative"`` (default) treats the noise as proportional to the
    current, weighting each point by 1/I^2 with a floor just above the clamp
    level.  Pass ``None`` for an unweighted fit or an array of inverse variances.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 8:
        raise DegenerateData("I-V fit needs at least 8 points")
    v, i = arr[:, 0], arr[:, 1]
    if not (np.any(v > 0) and np.any(v < 0)):
        raise DegenerateData("I-V data must span both bias signs")
    if np.all(i == 0):
        raise DegenerateData("all currents are zero; barrier is unidentifiable")
    if free not in ("phi0", "prefactor"):
        raise ValueError("free must be 'phi0' or 'prefactor'")

    base = replace(init, temperature=temperature, photon_energy=photon_energy).validate()

    def model(p, x):
        sp = replace(base, phi0=p["phi0"], n1=p["n1"], n2=p["n2"], prefactor=p["prefactor"])
        return device_current(sp, x)

    start = _tail_init(v, i, base, free) or {
        "phi0": base.phi0, "n1": base.n1, "n2": base.n2, "prefactor": base.prefactor}
    # ideality must stay strictly above 1 for the 1 + exp(u) map
    for k in ("n1", "n2"):
        start[k] = max(start[k], 1.0 + 1e-6)
    if isinstance(weights, str):
        if weights != "relative":
            raise ValueError("weights must be 'relative', None or an array")
        floor = max(10 * CLAMP_A, 1e-15 * np.max(np.abs(i)))
        weights = 1.0 / np.maximum(np.abs(i), floor) ** 2
    fixed = ("prefactor",) if free == "phi0" else ("phi0",)
    bounds = {"phi0": "positive", "prefactor": "positive", "n1": (1.0, None), "n2": (1.0, None)}
    return lm_minimize(model, v, i, start, weights=weights, bounds=bounds, fixed=fixed)


def _tail_init(v, i, base: SchottkyParams, free: str):
    """Starting values from log-linear fits of the two large-|bias| branches.

    Far from zero bias one junction dominates, so ln|I| is linear in |bias|
    with slope (1 - 1/n_j) / (k_B T + h nu) and a shared intercept.
    """
    eps = base.energy_scale
    vmax = np.max(np.abs(v))
    branches = {}
    for name, mask in (("n2", (v >= 0.5 * vmax) & (i > 0)), ("n1", (v <= -0.5 * vmax) & (i < 0))):
        if mask.sum() < 2:
            return None
        slope, icpt = np.polyfit(np.abs(v[mask]), np.log(np.abs(i[mask])), 1)
        if slope <= 0:
            return None
        branches[name] = (slope, icpt)
    out = {}
    for name, (slope, _) in branches.items():
        out[name] = 1.0 / max(1.0 - slope * eps, 1e-3)
    log_amp = 0.5 * (branches["n1"][1] + branches["n2"][1])
    if free == "phi0":
        out["prefactor"] = base.prefactor
        out["phi0"] = max(eps * (math.log(base.prefactor) - log_amp), 1e-3)
    else:
        out["phi0"] = base.phi0
        out["prefactor"] = math.exp(log_amp + base.phi0 / eps)
    return out


def _spectrum_point(item, temperature, init):
    energy, series = item
    try:
        res = fit_iv(series, temperature, energy, init)
        return energy, res.params["n1"] / res.params["n2"], ""
    except (SivError, ValueError, np.linalg.LinAlgError) as exc:
        return energy, math.nan, type(exc).__name__


def ideality_ratio_spectrum(datasets, temperature: float, init: SchottkyParams | None = None,
                            workers: int = 1):
    """n1/n2 versus photon energy, ascending; failed fits appear as NaN with a reason."""
    init = init or SchottkyParams()
    items = sorted(datasets.items())
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda it: _spectrum_point(it, temperature, init), items))
    else:
        rows = [_spectrum_point(it, temperature, init) for it in items]
    return rows


__all__ = [
    "Electrode", "SchottkyParams", "barrier_height", "junction_current", "device_current",
    "synthetic_iv", "fit_iv", "ideality_ratio_spectrum", "NonConvergence",
]

"""Two-charge-state (SiV- / SiV2-) rate equations with exact exponential stepping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .photophysics import ExcitationSpectrum, siv_cross_section


@dataclass(frozen=True)
class RateParams:
    sigma_ion: float = 5.79e-17
    p_escape_halffield: float = 50.0
    escape_exponent: float = 2.0
    sigma_cap: float = 2.616e-6
    tau_dark: float = 36.4
    pl_brightness: float = 7e-18
    sat_flux: float = 3e25
    overshoot_qe: float = 1.0

    def validate(self):
        for name in ("sigma_ion", "p_escape_halffield", "escape_exponent", "sigma_cap",
                     "tau_dark", "pl_brightness", "sat_flux"):
            v = getattr(self, name)
            if not (v > 0 and not math.isnan(v)):
                raise ValidationError(name, "must be > 0")
        if not 0.0 < self.overshoot_qe <= 1.0:
            raise ValidationError("overshoot_qe", "must lie in (0, 1]")
        return self

    @property
    def dark_rate(self) -> float:
        """1/tau_dark in s^-1 (tau_dark is stored in ms)."""
        return 1e3 / self.tau_dark


@dataclass
class CellState:
    """Per-cell SiV- and SiV2- densities; scalars or equal-shape arrays."""

    n_minus: np.ndarray
    n_2minus: np.ndarray

    @classmethod
    def bright(cls, n_total):
        n = np.array(n_total, dtype=float)
        return cls(n.copy(), np.zeros_like(n))

    @property
    def n_total(self):
        return self.n_minus + self.n_2minus

    def validate(self):
        if np.any(np.asarray(self.n_minus) < 0) or np.any(np.asarray(self.n_2minus) < 0):
            raise ValidationError("n_minus", "populations must be >= 0")
        return self


def escape_probability(field_magnitude, params: RateParams):
    """Probability that the photo-ionization hole escapes recapture.

    ``|E|^m / (|E|^m + E_half^m)``; the exponent m = 1 gives the plain
    hyperbolic form.
    """
    e = np.asarray(field_magnitude, dtype=float)
    if np.any(e < 0):
        raise ValueError("field magnitude must be >= 0")
    m = params.escape_exponent
    em = e**m
    denom = em + params.p_escape_halffield**m
    out = np.divide(em, denom, out=np.zeros_like(em), where=denom > 0)
    return float(out) if out.ndim == 0 else out


def off_rate(cell_flux, photon_energy: float, field, spectra: ExcitationSpectrum, params: RateParams):
    """SiV- -> SiV2- rate (s^-1) for photon flux in photons cm^-2 s^-1 and field in V/um."""
    phi = np.asarray(cell_flux, dtype=float)
    if np.any(phi < 0):
        raise ValueError("photon flux must be >= 0")
    esc = escape_probability(np.abs(np.asarray(field, dtype=float)), params)
    out = params.sigma_ion * siv_cross_section(spectra, photon_energy) * phi * esc
    return float(out) if np.ndim(out) == 0 else out


def on_rate(capture_flux_per_site, params: RateParams):
    """SiV2- -> SiV- rate (s^-1): hole capture plus dark relaxation."""
    f = np.asarray(capture_flux_per_site, dtype=float)
    if np.any(f < 0):
        raise ValueError("capture flux must be >= 0")
    out = f + params.dark_rate
    return float(out) if out.ndim == 0 else out


def steady_state(k_off, k_on):
    """Bright fraction k_on / (k_on + k_off)."""
    k_off = np.asarray(k_off, dtype=float)
    k_on = np.asarray(k_on, dtype=float)
    tot = k_on + k_off
    if np.any(tot <= 0):
        raise ValueError("steady state is undefined when both rates vanish")
    out = k_on / tot
    return float(out) if out.ndim == 0 else out


def advance(state: CellState, k_off, k_on, dt: float) -> CellState:
    """Exact update of the two-state linear ODE with rates frozen over ``dt``."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    n_minus0 = np.asarray(state.n_minus, dtype=float)
    n_tot = n_minus0 + state.n_2minus
    kappa = np.asarray(k_on, dtype=float) + k_off
    # cells with no rates at all keep their populations
    n_eq = np.divide(n_tot * k_on, kappa, out=np.array(n_minus0, dtype=float), where=kappa > 0)
    n_minus = n_eq + (n_minus0 - n_eq) * np.exp(-kappa * dt)
    n_minus = np.minimum(np.maximum(n_minus, 0.0), n_tot)
    return CellState(n_minus, n_tot - n_minus)


def saturated_excitation(cell_flux, photon_energy: float, spectra: ExcitationSpectrum, params: RateParams):
    """Steady PL per SiV- (photons/s) including optical saturation."""
    phi = np.asarray(cell_flux, dtype=float)
    return params.pl_brightness * siv_cross_section(spectra, photon_energy) * phi / (1.0 + phi / params.sat_flux)


def pl_rate(state: CellState, cell_flux, photon_energy: float, spectra: ExcitationSpectrum,
            params: RateParams, capture_flux_per_site=0.0):
    """Emitted ZPL photon rate: steady excitation of SiV- plus one photon per hole capture."""
    steady = saturated_excitation(cell_flux, photon_energy, spectra, params) * state.n_minus
    overshoot = params.overshoot_qe * np.asarray(capture_flux_per_site, dtype=float) * state.n_2minus
    out = steady + overshoot
    return float(out) if np.ndim(out) == 0 else out

"""Spectral response functions: SiV- excitation, hole generation, electrode optics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

FOUR_LN2 = 4.0 * math.log(2.0)
E_MIN, E_MAX = 1.0, 3.0


def gaussian(energy, center: float, fwhm: float):
    """Unit-height Gaussian parameterised by its full width at half maximum."""
    return np.exp(-FOUR_LN2 * (np.asarray(energy, dtype=float) - center) ** 2 / fwhm**2)


def _check_energy(energy):
    e = np.asarray(energy, dtype=float)
    if np.any(~np.isfinite(e)) or np.any(e < E_MIN) or np.any(e > E_MAX):
        raise ValueError(f"photon energy must lie in [{E_MIN}, {E_MAX}] eV")
    return e


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ExcitationSpectrum:
    """Resonance plus linear background; the background is floored at zero."""

    resonance_center: float = 2.27
    resonance_fwhm: float = 0.043
    resonance_amplitude: float = 2.5
    background_slope: float = 4.0
    background_offset: float = 0.2

    def validate(self):
        if not self.resonance_fwhm > 0:
            raise ValidationError("resonance_fwhm", "must be > 0")
        if not self.resonance_amplitude >= 0:
            raise ValidationError("resonance_amplitude", "must be >= 0")
        return self


@dataclass(frozen=True)
class Peak:
    center: float
    fwhm: float
    amplitude: float


def _default_peaks():
    # N_s0 band, divacancy band, and a broad stand-in for the absorption
    # continuum that keeps rising toward the UV
    return (Peak(2.2, 0.15, 5.0), Peak(2.54, 0.15, 1.0), Peak(2.95, 0.35, 15.0))


@dataclass(frozen=True)
class HoleGenerationSpectrum:
    """Flat baseline plus Gaussian defect absorption lines."""

    baseline: float = 0.002
    peaks: tuple = field(default_factory=_default_peaks)

    def validate(self):
        if not self.baseline >= 0:
            raise ValidationError("baseline", "must be >= 0")
        for k, p in enumerate(self.peaks):
            if not p.amplitude >= 0:
                raise ValidationError(f"peaks[{k}].amplitude", "must be >= 0")
            if not p.fwhm > 0:
                raise ValidationError(f"peaks[{k}].fwhm", "must be > 0")
        return self


@dataclass(frozen=True)
class ElectrodeOptics:
    transmission: float = 0.02

    def validate(self):
        if not 0.0 <= self.transmission <= 1.0:
            raise ValidationError("transmission", "must lie in [0, 1]")
        return self


class Path(enum.Enum):
    Free = "free"
    ExcitationThroughMetal = "excitation"
    ExcitationAndCollectionThroughMetal = "excitation_and_collection"


def siv_cross_section(spec: ExcitationSpectrum, photon_energy):
    """Relative SiV- excitation cross-section at ``photon_energy`` (eV)."""
    e = _check_energy(photon_energy)
    background = spec.background_offset + spec.background_slope * (e - spec.resonance_center)
    peak = spec.resonance_amplitude * gaussian(e, spec.resonance_center, spec.resonance_fwhm)
    return _scalar(np.maximum(peak + background, 0.0))


def hole_efficiency(spec: HoleGenerationSpectrum, photon_energy):
    """Relative efficiency of free-hole generation by defect absorption."""
    e = _check_energy(photon_energy)
    out = np.full(np.shape(e), spec.baseline, dtype=float)
    for p in spec.peaks:
        out = out + p.amplitude * gaussian(e, p.center, p.fwhm)
    return _scalar(out)


def attenuation(optics: ElectrodeOptics, path: Path) -> float:
    """Optical power factor for light crossing the semitransparent electrode."""
    eta = optics.transmission
    if path is Path.Free:
        return 1.0
    if path is Path.ExcitationThroughMetal:
        return eta
    if path is Path.ExcitationAndCollectionThroughMetal:
        return eta * eta
    raise ValueError(f"unknown path {path!r}")

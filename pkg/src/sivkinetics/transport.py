"""One-dimensional device geometry, beam, field and sweep-and-capture transport.

The x axis runs across the gap: the left electrode covers ``[-W, 0]``, the gap
``[0, L]`` and the right electrode ``[L, L + W]``.  The bias is the potential
of the left electrode relative to the grounded right one, so for positive bias
holes drift toward ``+x``.

Densities are per unit area of the implanted layer (um^-2), which is the same
number as a line density in a 1 um wide strip along x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _backend
from .constants import E_CHARGE, UM2_PER_CM2, photon_energy_joule
from .errors import ValidationError
from .photophysics import ElectrodeOptics, HoleGenerationSpectrum, hole_efficiency

LEFT, GAP, RIGHT = 0, 1, 2


@dataclass(frozen=True)
class DeviceGeometry:
    gap_length: float = 8.0
    electrode_width: float = 7.0
    cell_count: int = 200
    electrode_cells: int = 50
    siv_areal_density: float = 100.0
    temperature: float = 8.0
    layer_thickness: float = 0.05

    def validate(self):
        checks = [
            ("gap_length", self.gap_length > 0, "must be > 0"),
            ("electrode_width", self.electrode_width > 0, "must be > 0"),
            ("cell_count", self.cell_count >= 2, "must be >= 2"),
            ("electrode_cells", self.electrode_cells >= 1, "must be >= 1"),
            ("siv_areal_density", self.siv_areal_density >= 0, "must be >= 0"),
            ("temperature", self.temperature > 0, "must be > 0"),
            ("layer_thickness", self.layer_thickness > 0, "must be > 0"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ValidationError(name, msg)
        return self

    @cached_property
    def grid(self) -> "Grid":
        return Grid.build(self)


@dataclass(frozen=True)
class Grid:
    edges: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    region: np.ndarray

    @classmethod
    def build(cls, geo: DeviceGeometry) -> "Grid":
        w, L = geo.electrode_width, geo.gap_length
        ne, ng = geo.electrode_cells, geo.cell_count
        edges = np.concatenate([
            np.linspace(-w, 0.0, ne + 1)[:-1],
            np.linspace(0.0, L, ng + 1)[:-1],
            np.linspace(L, L + w, ne + 1),
        ])
        region = np.concatenate([np.full(ne, LEFT), np.full(ng, GAP), np.full(ne, RIGHT)])
        for a in (edges, region):
            a.setflags(write=False)
        centers = 0.5 * (edges[1:] + edges[:-1])
        widths = np.diff(edges)
        centers.setflags(write=False)
        widths.setflags(write=False)
        return cls(edges, centers, widths, region)

    @property
    def size(self) -> int:
        return self.centers.size


@dataclass(frozen=True)
class BeamProfile:
    center: float = 0.0
    waist: float = 2.2
    power: float = 28.0
    photon_energy: float = 2.4

    def validate(self):
        if not self.waist > 0:
            raise ValidationError("waist", "must be > 0")
        if not self.power >= 0:
            raise ValidationError("power", "must be >= 0")
        if not 1.0 <= self.photon_energy <= 3.0:
            raise ValidationError("photon_energy", "must lie in [1, 3] eV")
        return self

    @property
    def lateral_width(self) -> float:
        """Integral of the normalised Gaussian across the strip (um)."""
        return self.waist * math.sqrt(math.pi / 2.0)


@dataclass(frozen=True)
class TransportParams:
    """Hole-generation and recapture calibration constants.

    ``if_gain`` scales the Schottky photocurrent: its prefactor is
    ``if_gain * e * (interface hole generation rate)``.
    """

    g_bulk: float = 7e-6
    g_if: float = 2.6e-5
    d_if: float = 0.5
    p_local: float = 0.5
    if_gain: float = 1.0

    def validate(self):
        for name in ("g_bulk", "g_if", "d_if", "if_gain"):
            if not getattr(self, name) >= 0:
                raise ValidationError(name, "must be >= 0")
        if not 0.0 <= self.p_local <= 1.0:
            raise ValidationError("p_local", "must lie in [0, 1]")
        return self


@dataclass
class HoleField:
    generation: np.ndarray
    capture_flux: np.ndarray
    collected_current: float
    capture_rate: np.ndarray
    local: float = 0.0
    discarded: float = 0.0


def under_metal(geometry: DeviceGeometry, x):
    x = np.asarray(x, dtype=float)
    return (x < 0.0) | (x > geometry.gap_length)


def intensity(beam: BeamProfile, geometry: DeviceGeometry, optics: ElectrodeOptics, x):
    """Optical intensity (W/cm^2) on the SiV layer along the gap axis."""
    x = np.asarray(x, dtype=float)
    lo, hi = -geometry.electrode_width, geometry.gap_length + geometry.electrode_width
    if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
        raise ValueError("x lies outside the simulated device")
    w_cm = beam.waist * 1e-4
    peak = beam.power * 1e-3 * 2.0 / (math.pi * w_cm**2)
    out = peak * np.exp(-2.0 * (x - beam.center) ** 2 / beam.waist**2)
    out = np.where(under_metal(geometry, x), out * optics.transmission, out)
    return float(out) if out.ndim == 0 else out


def photon_flux(beam: BeamProfile, geometry: DeviceGeometry, optics: ElectrodeOptics, x):
    """Photon flux (photons cm^-2 s^-1)."""
    return intensity(beam, geometry, optics, x) / photon_energy_joule(beam.photon_energy)


def field(bias: float, geometry: DeviceGeometry, x):
    """Signed field (V/um): uniform in the gap, zero under the electrodes."""
    x = np.asarray(x, dtype=float)
    out = np.where(under_metal(geometry, x), 0.0, bias / geometry.gap_length)
    return float(out) if out.ndim == 0 else out


def interface_window(geometry: DeviceGeometry, bias: float, x, d_if: float):
    """True for points under the positive electrode or within d_if of its edge."""
    x = np.asarray(x, dtype=float)
    if bias > 0:
        return x <= d_if
    if bias < 0:
        return x >= geometry.gap_length - d_if
    return np.zeros(x.shape, dtype=bool)


def generate_holes(beam: BeamProfile, geometry: DeviceGeometry, spectra: HoleGenerationSpectrum,
                   bias: float, optics: ElectrodeOptics, transport: TransportParams):
    """Hole generation rate per cell (holes um^-2 s^-1, i.e. per um of a 1 um strip)."""
    x = geometry.grid.centers
    flux_um2 = photon_flux(beam, geometry, optics, x) / UM2_PER_CM2
    gen = transport.g_bulk * hole_efficiency(spectra, beam.photon_energy) * flux_um2
    if bias != 0 and transport.g_if > 0:
        gen = gen + transport.g_if * flux_um2 * interface_window(geometry, bias, x, transport.d_if)
    return gen


def drift_direction(bias: float) -> int:
    return 1 if bias > 0 else (-1 if bias < 0 else 0)


def sweep_and_capture(generation, n2m, bias: float, geometry: DeviceGeometry, sigma_cap: float,
                      p_local: float = 0.5, lateral_width: float = 1.0) -> HoleField:
    """Drift generated holes toward the negative electrode, capturing on SiV2- sites.

    ``sigma_cap`` is the capture cross-section (um^2); the attenuation per um of
    path is ``sigma_cap * n2m / layer_thickness``.  ``collected_current`` is in
    amperes for a strip ``lateral_width`` um wide.
    """
    grid = geometry.grid
    gen = np.ascontiguousarray(generation, dtype=float)
    n2m = np.ascontiguousarray(n2m, dtype=float)
    if gen.shape != (grid.size,) or n2m.shape != (grid.size,):
        raise ValueError(f"generation and n2m must have {grid.size} cells")
    if np.any(n2m < 0) or np.any(gen < 0):
        raise ValueError("generation and n2m must be nonnegative")
    n_total = np.full(grid.size, geometry.siv_areal_density)
    coef = sigma_cap / geometry.layer_thickness
    rate = np.empty(grid.size)
    ne = geometry.electrode_cells
    collected, local, discarded = _backend.kernels.sweep(
        gen, n2m, n_total, np.asarray(grid.widths), coef, drift_direction(bias),
        ne, grid.size - ne, p_local, rate)
    return HoleField(
        generation=gen,
        capture_flux=rate * n2m,
        collected_current=E_CHARGE * collected * lateral_width,
        capture_rate=rate,
        local=local,
        discarded=discarded,
    )

"""Classical scenarios: slit scans, superpositions, conjugate-phase checks and the
slit -> OAM transfer matrix.

Chain: illuminated slit(s) in the front focal plane -> Fourier lens (traversed
backwards, so a slit shift of one pitch adds one OAM quantum) -> reversed
log-polar sorter -> ring plane.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage, optimize
from scipy.signal import find_peaks

from .elements import (SlitArray, Slit, SorterLossWarning, SorterSpec, apply_aperture,
                       camera_image, lens_and_focus, resample, sorter_loss, sorter_reverse)
from .fieldgrid import (AzimuthalSpectrum, ComplexField, GridSpec, OAMSpectrum,
                        angular_harmonics, azimuthal_spectrum, gaussian_beam,
                        gaussian_coupling, lg_amplitudes, lg_radial, oam_spectrum,
                        plane_wave, polar_coords, recover_waist)


@dataclass(frozen=True)
class OpticalSetup:
    """Everything between the slit plane and the ring plane.

    ``illumination_waist=None`` means plane-wave illumination.
    """
    front: GridSpec
    ring: GridSpec
    lens_focal: float
    sorter: SorterSpec
    illumination_waist: float | None = 1e-3
    camera_focal: float = 0.5

    @property
    def pitch(self) -> float:
        return self.sorter.pitch(self.lens_focal, self.front.wavelength)

    def with_sorter_mode(self, mode: str) -> "OpticalSetup":
        return replace(self, sorter=replace(self.sorter, mode=mode))

    def illumination(self) -> ComplexField:
        if self.illumination_waist is None:
            return plane_wave(self.front)
        return gaussian_beam(self.front, self.illumination_waist)

    def slit_field(self, slits: SlitArray) -> ComplexField:
        return apply_aperture(self.illumination(), slits)

    def to_ring(self, f: ComplexField) -> tuple[ComplexField, float]:
        """Propagate a slit-plane field to the ring plane; returns (field, strip loss)."""
        strip = lens_and_focus(f, self.lens_focal, inverse=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SorterLossWarning)
            if self.sorter.mode == "physical_phases":
                strip = resample(strip, self.ring)
                loss = sorter_loss(strip, self.sorter, self.ring)
                return sorter_reverse(strip, self.sorter), loss
            loss = sorter_loss(strip, self.sorter, self.ring)
            return sorter_reverse(strip, self.sorter, self.ring), loss

    def coupling_waists(self) -> tuple[float, float]:
        return (self.sorter.b / 10, 2 * self.sorter.b)


# -- image analysis ----------------------------------------------------------

def ring_profile(f: ComplexField, n_theta: int = 720) -> tuple[float, np.ndarray]:
    """Radius carrying the most power per unit radius, and the intensity around it."""
    r, _, c = angular_harmonics(f, n_theta=n_theta)
    i = int(np.argmax(r * np.sum(np.abs(c) ** 2, axis=1)))
    g = f.grid
    th = 2 * np.pi * np.arange(n_theta) / n_theta - np.pi
    rows = r[i] * np.sin(th) / g.dy + g.ny // 2
    cols = r[i] * np.cos(th) / g.dx + g.nx // 2
    return float(r[i]), ndimage.map_coordinates(f.intensity, [rows, cols], order=3)


def _lobe_peaks(profile: np.ndarray, rel_prominence: float = 0.1) -> np.ndarray:
    p = np.asarray(profile)
    span = p.max() - p.min()
    if span <= 1e-3 * p.max():
        return np.array([], dtype=int)
    n = len(p)
    peaks, _ = find_peaks(np.concatenate([p, p, p]), prominence=rel_prominence * span)
    return peaks[(peaks >= n) & (peaks < 2 * n)] - n


def count_lobes(profile: np.ndarray, rel_prominence: float = 0.1) -> int:
    """Number of maxima of a periodic profile (0 for a flat ring)."""
    return int(len(_lobe_peaks(profile, rel_prominence)))


def ring_uniformity(profile: np.ndarray) -> float:
    """Spread (max - min) / (max + min) of the lobe maxima; of the whole profile if unlobed."""
    p = np.asarray(profile)
    peaks = _lobe_peaks(p)
    v = p[peaks] if len(peaks) > 1 else p
    return float((v.max() - v.min()) / (v.max() + v.min()))


def far_field_ring_radius(image: np.ndarray, pitch: float) -> float:
    n = image.shape[0]
    yy, xx = np.indices(image.shape) - n // 2
    rr = np.hypot(xx, yy)
    bins = np.arange(0, n // 2)
    idx = np.clip(np.round(rr).astype(int), 0, n // 2 - 1)
    prof = np.bincount(idx.ravel(), image.ravel(), minlength=n // 2) / \
        np.maximum(np.bincount(idx.ravel(), minlength=n // 2), 1)
    return float(bins[np.argmax(prof)] * pitch)


# -- scenarios ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScanPoint:
    position: float
    position_pitch: float
    spectrum: AzimuthalSpectrum
    near_image: np.ndarray = field(repr=False)
    far_image: np.ndarray = field(repr=False)
    far_pitch: float
    loss: float
    is_integer: bool
    lg: OAMSpectrum | None = None


def _single_slit(position: float, width: float, height: float) -> SlitArray:
    return SlitArray((Slit(position, width),), height)


def generate_at(position: float, setup: OpticalSetup, width: float = 100e-6,
                height: float = 4e-3, with_lg: bool = False) -> ScanPoint:
    half = setup.front.half_window
    if abs(position) + width / 2 > half:
        raise ValueError(f"slit position {position:g} m lies outside the front window")
    ringf, loss = setup.to_ring(setup.slit_field(_single_slit(position, width, height)))
    ringf = ringf.normalized()
    spec = azimuthal_spectrum(ringf)
    far, fp = camera_image(ringf, setup.camera_focal)
    rel = position / setup.pitch
    lg = oam_spectrum(ringf, (-12, 12), 3) if with_lg else None
    return ScanPoint(position, rel, spec, ringf.intensity, far, fp, loss,
                     bool(abs(rel - round(rel)) < 1e-9), lg)


def run_slit_scan(positions, setup: OpticalSetup, width: float = 100e-6,
                  height: float = 4e-3, with_lg: bool = False) -> list[ScanPoint]:
    """One ring-plane spectrum and image pair per slit position (meters)."""
    return [generate_at(float(x), setup, width, height, with_lg) for x in positions]


@dataclass(frozen=True, eq=False)
class SuperpositionResult:
    spectrum: AzimuthalSpectrum
    near_image: np.ndarray = field(repr=False)
    far_image: np.ndarray = field(repr=False)
    ring_radius: float
    ring_profile: np.ndarray = field(repr=False)
    lobes: int
    uniformity: float

    def phases(self, ls) -> dict[int, float]:
        return {l: float(self.spectrum.phase[np.searchsorted(self.spectrum.l, l)]) for l in ls}


def run_superposition(slits: SlitArray, setup: OpticalSetup) -> SuperpositionResult:
    if len(slits) < 1:
        raise ValueError("need at least one slit")
    ringf, _ = setup.to_ring(setup.slit_field(slits))
    ringf = ringf.normalized()
    spec = azimuthal_spectrum(ringf)
    far, _ = camera_image(ringf, setup.camera_focal)
    radius, prof = ring_profile(ringf)
    return SuperpositionResult(spec, ringf.intensity, far, radius, prof, count_lobes(prof),
                               ring_uniformity(prof))


def run_conjugate_test(l: int, setup: OpticalSetup, width: float = 100e-6,
                       height: float = 4e-3) -> tuple[float, float]:
    """Fibre coupling after the opposite-handed (matched) and same-handed hologram."""
    if abs(l) > 10:
        raise ValueError("|l| must be <= 10")
    ringf, _ = setup.to_ring(setup.slit_field(_single_slit(l * setup.pitch, width, height)))
    ringf = ringf.normalized()
    _, theta = polar_coords(ringf.grid)
    waists = setup.coupling_waists()
    matched = gaussian_coupling(ComplexField(ringf.grid, ringf.amplitude * np.exp(-1j * l * theta)),
                                waists)
    mismatched = gaussian_coupling(
        ComplexField(ringf.grid, ringf.amplitude * np.exp(1j * l * theta)), waists)
    return matched, mismatched


# -- transfer matrix ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Amplitudes of ring-plane modes per unit-power input through each slit.

    ``entries[i, p, k]``: LG(l_values[i], p) amplitude for slit k.
    ``detection[i, k]``: amplitude after a hologram exp(-i l theta) and a
    single-mode fibre with Gaussian waist ``detection_waist``.
    ``azimuthal[j, k]``: power in angular harmonic ``azimuthal_l[j]``.
    """
    l_values: tuple[int, ...]
    p_max: int
    entries: np.ndarray = field(repr=False)
    detection: np.ndarray = field(repr=False)
    azimuthal_l: np.ndarray = field(repr=False)
    azimuthal: np.ndarray = field(repr=False)
    residual: np.ndarray
    loss: np.ndarray
    output_power: np.ndarray
    designed_l: tuple[int, ...]
    lg_waist: float
    detection_waist: float
    metadata: dict = field(default_factory=dict)

    @property
    def n_slits(self) -> int:
        return self.entries.shape[2]

    def column_power(self, k: int) -> float:
        return float(np.sum(np.abs(self.entries[:, :, k]) ** 2))

    def detection_map(self, labels) -> np.ndarray:
        idx = [self.l_values.index(l) for l in labels]
        return self.detection[idx, :]

    def azimuthal_power(self, l: int, k: int) -> float:
        return float(self.azimuthal[np.searchsorted(self.azimuthal_l, l), k])

    def crosstalk(self, k: int, l: int) -> float:
        """Azimuthal power at ``l`` relative to the designed order of column k."""
        return self.azimuthal_power(l, k) / self.azimuthal_power(self.designed_l[k], k)

    def to_json_dict(self) -> dict:
        def cx(a):
            return np.stack([a.real, a.imag], axis=-1).tolist()
        return {
            "schema": "oamsim.transfer/1",
            "l_values": list(self.l_values),
            "p_max": self.p_max,
            "designed_l": list(self.designed_l),
            "lg_waist_m": self.lg_waist,
            "detection_waist_m": self.detection_waist,
            "entries": cx(self.entries),
            "detection": cx(self.detection),
            "azimuthal_l": self.azimuthal_l.tolist(),
            "azimuthal_power": self.azimuthal.tolist(),
            "residual": self.residual.tolist(),
            "sorter_loss": self.loss.tolist(),
            "output_power": self.output_power.tolist(),
            "metadata": self.metadata,
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json_dict(), indent=1, sort_keys=True))
        return path


def unit_slit_field(setup: OpticalSetup, slits: SlitArray, k: int) -> ComplexField:
    """Plane-wave illumination of slit k alone, normalized to unit transmitted power."""
    s = slits.slits[k]
    single = SlitArray((Slit(s.center_x, s.width),), slits.height)
    return apply_aperture(plane_wave(setup.front), single).normalized()


def _matched_waist(f: ComplexField, l: int, waists) -> float:
    r, theta = polar_coords(f.grid)
    flat = f.amplitude * np.exp(-1j * l * theta)

    def neg(logw):
        w = np.exp(logw)
        g = np.sqrt(2 / np.pi) / w * np.exp(-(r / w) ** 2)
        return -abs(np.sum(g * flat)) ** 2

    grid = np.linspace(np.log(waists[0]), np.log(waists[1]), 24)
    i = int(np.argmin([neg(t) for t in grid]))
    res = optimize.minimize_scalar(neg, bounds=(grid[max(i - 1, 0)], grid[min(i + 1, 23)]),
                                   method="bounded", options={"xatol": 1e-5})
    return float(np.exp(res.x))


def compute_transfer_matrix(slits: SlitArray, setup: OpticalSetup, l_range=(-6, 6),
                            p_max: int = 3, lg_waist: float | None = None,
                            detection_waist: float | None = None) -> TransferMatrix:
    """Column k = mode decomposition of the ring field produced by slit k alone."""
    setup = replace(setup, illumination_waist=None)
    ls = list(range(l_range[0], l_range[1] + 1))
    designed = tuple(int(round(s.center_x / setup.pitch)) for s in slits.slits)
    fields, losses = [], []
    for k in range(len(slits)):
        rf, loss = setup.to_ring(unit_slit_field(setup, slits, k))
        fields.append(rf)
        losses.append(loss)
    ref = int(np.argmin([abs(s.center_x) for s in slits.slits]))
    if lg_waist is None:
        lg_waist = recover_waist(fields[ref].normalized(), ls)
    if detection_waist is None:
        detection_waist = _matched_waist(fields[ref], designed[ref], setup.coupling_waists())

    ring = setup.ring
    r, theta = polar_coords(ring)
    stack = np.stack([f.amplitude for f in fields])
    entries = np.zeros((len(ls), p_max + 1, len(fields)), dtype=np.complex128)
    detection = np.zeros((len(ls), len(fields)), dtype=np.complex128)
    gauss = np.sqrt(2 / np.pi) / detection_waist * np.exp(-(r / detection_waist) ** 2)
    for i, l in enumerate(ls):
        weighted = stack * np.exp(-1j * l * theta)[None]
        detection[i] = np.tensordot(weighted, gauss, axes=([1, 2], [0, 1])) * ring.cell_area
        for p in range(p_max + 1):
            rad = lg_radial(l, p, lg_waist, r)
            entries[i, p] = np.tensordot(weighted, rad, axes=([1, 2], [0, 1])) * ring.cell_area
    spectra = [azimuthal_spectrum(f) for f in fields]
    az_l = spectra[0].l
    az = np.stack([s.power for s in spectra], axis=1)
    col_power = np.sum(np.abs(entries) ** 2, axis=(0, 1))
    meta = {"sorter": setup.sorter.to_dict(), "slits": slits.to_dict(),
            "front_grid": setup.front.to_dict(), "ring_grid": ring.to_dict(),
            "lens_focal_m": setup.lens_focal}
    return TransferMatrix(tuple(ls), p_max, entries, detection, az_l, az, 1.0 - col_power,
                          np.array(losses), np.array([f.power for f in fields]), designed,
                          float(lg_waist), float(detection_waist), meta)

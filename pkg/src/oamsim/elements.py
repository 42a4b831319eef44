"""Slit apertures, free-space propagation, Fourier lenses and the log-polar sorter.

Sorter geometry: in the *strip* plane the unwrapped azimuth runs along x
(``v = a * theta``) and the log-radius along y (``u = -a * ln(r / b)``). The
azimuthal cut sits on the -x axis of the ring plane, i.e. at the two ends
``v = +-pi a`` of the strip.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .fieldgrid import ComplexField, GridSpec, cartesian_coords, polar_coords


class UnresolvedSlitError(ValueError):
    """Slit narrower than three grid samples."""


class AliasingWarning(UserWarning):
    pass


class SorterLossWarning(UserWarning):
    pass


def _workers() -> int:
    env = os.environ.get("OAMSIM_THREADS")
    return max(1, int(env)) if env else -1


# -- apertures ---------------------------------------------------------------

@dataclass(frozen=True)
class Slit:
    center_x: float
    width: float
    transmission: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("slit width must be positive")
        if not 0.0 <= self.transmission <= 1.0:
            raise ValueError("transmission must lie in [0, 1]")


@dataclass(frozen=True)
class SlitArray:
    slits: tuple[Slit, ...]
    height: float

    def __post_init__(self):
        object.__setattr__(self, "slits", tuple(self.slits))
        if self.height <= 0:
            raise ValueError("slit height must be positive")
        edges = sorted((s.center_x - s.width / 2, s.center_x + s.width / 2) for s in self.slits)
        for (_, hi), (lo, _) in zip(edges, edges[1:]):
            if lo < hi:
                raise ValueError("slits overlap")

    def __len__(self):
        return len(self.slits)

    def only(self, k: int) -> "SlitArray":
        return SlitArray((self.slits[k],), self.height)

    def to_dict(self) -> dict:
        return {"height_m": self.height,
                "slits": [{"center_m": s.center_x, "width_m": s.width,
                           "transmission": s.transmission, "phase_rad": s.phase}
                          for s in self.slits]}

    @classmethod
    def from_dict(cls, d: dict) -> "SlitArray":
        slits = tuple(Slit(s["center_m"], s["width_m"], s.get("transmission", 1.0),
                           s.get("phase_rad", 0.0)) for s in d["slits"])
        return cls(slits, d["height_m"])


def _coverage(coords: np.ndarray, step: float, lo: float, hi: float) -> np.ndarray:
    """Fraction of each sample cell [c - step/2, c + step/2] inside [lo, hi]."""
    left = np.maximum(coords - step / 2, lo)
    right = np.minimum(coords + step / 2, hi)
    return np.clip(right - left, 0.0, None) / step


def aperture_mask(slits: SlitArray, grid: GridSpec) -> np.ndarray:
    cov_y = _coverage(grid.y, grid.dy, -slits.height / 2, slits.height / 2)
    row = np.zeros(grid.nx, dtype=np.complex128)
    for s in slits.slits:
        cov = _coverage(grid.x, grid.dx, s.center_x - s.width / 2, s.center_x + s.width / 2)
        row += s.transmission * np.exp(1j * s.phase) * cov
    return cov_y[:, None] * row[None, :]


def apply_aperture(f: ComplexField, slits: SlitArray) -> ComplexField:
    for s in slits.slits:
        if s.width < 3 * f.grid.dx * (1 - 1e-9):
            raise UnresolvedSlitError(
                f"slit width {s.width:g} m is below 3 samples ({3 * f.grid.dx:g} m)")
    return ComplexField(f.grid, f.amplitude * aperture_mask(slits, f.grid))


# -- propagation -------------------------------------------------------------

def _freqs(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    fx = sfft.fftfreq(grid.nx, grid.dx)
    fy = sfft.fftfreq(grid.ny, grid.dy)
    return np.meshgrid(fy, fx, indexing="ij")[::-1]


def propagate(f: ComplexField, distance: float) -> ComplexField:
    """Band-limited angular-spectrum propagation over ``distance`` (may be negative).

    Spatial frequencies beyond the band limit for this throw are removed with a
    hard circular cutoff; an ``AliasingWarning`` is raised if that discards more
    than 1e-6 of the power.
    """
    if distance == 0:
        return ComplexField(f.grid, f.amplitude.copy())
    g = f.grid
    lam = g.wavelength
    fx, fy = _freqs(g)
    f2 = fx ** 2 + fy ** 2
    d = abs(distance)
    f_lim = min(1 / (lam * np.sqrt((2 * d / (g.nx * g.dx)) ** 2 + 1)),
                1 / (lam * np.sqrt((2 * d / (g.ny * g.dy)) ** 2 + 1)))
    keep = f2 <= f_lim ** 2
    spec = sfft.fft2(f.amplitude, norm="ortho", workers=_workers())
    total = np.sum(np.abs(spec) ** 2)
    lost = np.sum(np.abs(spec[~keep]) ** 2)
    if total > 0 and lost / total > 1e-6:
        warnings.warn(f"band limit discards {lost / total:.2e} of the power", AliasingWarning,
                      stacklevel=2)
    kz = 2 * np.pi * np.sqrt(np.clip(1 / lam ** 2 - f2, 0.0, None))
    h = np.where(keep, np.exp(1j * kz * distance), 0.0)
    out = sfft.ifft2(spec * h, norm="ortho", workers=_workers())
    return ComplexField(g, out)


def fourier_grid(grid: GridSpec, focal: float) -> GridSpec:
    lf = grid.wavelength * focal
    return GridSpec(grid.nx, grid.ny, lf / (grid.nx * grid.dx), lf / (grid.ny * grid.dy),
                    grid.wavelength)


def lens_and_focus(f: ComplexField, focal: float, inverse: bool = False) -> ComplexField:
    """Front-to-back focal plane transform of a thin lens (2f system).

    The output lives on the Fourier-scaled grid with pitch ``lambda f / (N dx)``
    and has the same power as the input. ``inverse=True`` applies the
    conjugate kernel, i.e. light travelling backwards through the same lens.
    The constant ``-i`` prefactor is dropped, so two forward passes give the
    parity-flipped input.
    """
    g = f.grid
    out_grid = fourier_grid(g, focal)
    a = sfft.ifftshift(f.amplitude)
    if inverse:
        spec = sfft.ifft2(a, norm="ortho", workers=_workers())
    else:
        spec = sfft.fft2(a, norm="ortho", workers=_workers())
    scale = np.sqrt(g.cell_area / out_grid.cell_area)
    return ComplexField(out_grid, sfft.fftshift(spec) * scale)


def camera_image(f: ComplexField, focal: float, n_out: int = 256,
                 pitch: float | None = None) -> tuple[np.ndarray, float]:
    """Far-field intensity on an arbitrary output sampling via matrix DFTs.

    Returns ``(intensity, pitch)``; the default pitch zooms 4x relative to the
    FFT sampling.
    """
    g = f.grid
    lf = g.wavelength * focal
    if pitch is None:
        pitch = lf / (g.nx * g.dx) / 4
    xo = (np.arange(n_out) - n_out // 2) * pitch
    ex = np.exp(-2j * np.pi * np.outer(xo, g.x) / lf) * g.dx / np.sqrt(lf)
    ey = np.exp(-2j * np.pi * np.outer(xo, g.y) / lf) * g.dy / np.sqrt(lf)
    out = ey @ f.amplitude @ ex.T
    return np.abs(out) ** 2, pitch


# -- log-polar sorter --------------------------------------------------------

SORTER_MODES = ("ideal_remap", "physical_phases")


@dataclass(frozen=True)
class SorterSpec:
    a: float
    b: float
    f: float
    mode: str = "ideal_remap"

    def __post_init__(self):
        if min(self.a, self.b, self.f) <= 0:
            raise ValueError("sorter a, b, f must be positive")
        if self.mode not in SORTER_MODES:
            raise ValueError(f"unknown sorter mode {self.mode!r}")

    @classmethod
    def from_pitch(cls, pitch: float, lens_focal: float, wavelength: float, b: float,
                   f: float = 0.3, mode: str = "ideal_remap") -> "SorterSpec":
        """Scale ``a`` so a slit shift of ``pitch`` in front of the lens adds one OAM quantum."""
        return cls(wavelength * lens_focal / (2 * np.pi * pitch), b, f, mode)

    def pitch(self, lens_focal: float, wavelength: float) -> float:
        return wavelength * lens_focal / (2 * np.pi * self.a)

    @property
    def strip_length(self) -> float:
        return 2 * np.pi * self.a

    def to_dict(self) -> dict:
        return {"a_m": self.a, "b_m": self.b, "f_m": self.f, "mode": self.mode}

    @classmethod
    def from_dict(cls, d: dict) -> "SorterSpec":
        return cls(d["a_m"], d["b_m"], d["f_m"], d.get("mode", "ideal_remap"))


def _interp(amplitude: np.ndarray, rows: np.ndarray, cols: np.ndarray, order: int = 5
            ) -> np.ndarray:
    """Spline-interpolate a complex array at fractional (row, col) positions."""
    r0 = max(int(np.floor(rows.min())) - order - 2, 0)
    r1 = min(int(np.ceil(rows.max())) + order + 3, amplitude.shape[0])
    c0 = max(int(np.floor(cols.min())) - order - 2, 0)
    c1 = min(int(np.ceil(cols.max())) + order + 3, amplitude.shape[1])
    sub = amplitude[r0:r1, c0:c1]
    coords = np.array([rows - r0, cols - c0])
    out = np.empty(rows.shape, dtype=np.complex128)
    for part, sl in ((sub.real, "real"), (sub.imag, "imag")):
        coef = ndimage.spline_filter(part, order=order, mode="mirror")
        vals = ndimage.map_coordinates(coef, coords, order=order, prefilter=False,
                                       mode="mirror")
        if sl == "real":
            out.real = vals
        else:
            out.imag = vals
    return out


def _ring_limits(ring: GridSpec) -> tuple[float, float]:
    return 2 * max(ring.dx, ring.dy), ring.half_window


def sorter_loss(strip: ComplexField, spec: SorterSpec, ring: GridSpec) -> float:
    """Fraction of strip-plane power falling outside the region mapped onto ``ring``."""
    r_min, r_max = _ring_limits(ring)
    xx, yy = cartesian_coords(strip.grid)
    u_lo, u_hi = -spec.a * np.log(r_max / spec.b), -spec.a * np.log(r_min / spec.b)
    inside = (np.abs(xx) <= np.pi * spec.a) & (yy >= u_lo) & (yy <= u_hi)
    inten = strip.intensity
    total = inten.sum()
    return float(1.0 - inten[inside].sum() / total) if total > 0 else 0.0


def _reverse_ideal(strip: ComplexField, spec: SorterSpec, ring: GridSpec) -> ComplexField:
    r, theta = polar_coords(ring)
    r_min, r_max = _ring_limits(ring)
    sg = strip.grid
    sel = (r >= r_min) & (r <= r_max)
    u = -spec.a * np.log(r[sel] / spec.b)
    v = spec.a * theta[sel]
    rows = u / sg.dy + sg.ny // 2
    cols = v / sg.dx + sg.nx // 2
    ok = (rows >= 0) & (rows <= sg.ny - 1) & (cols >= 0) & (cols <= sg.nx - 1)
    vals = np.zeros(u.shape, dtype=np.complex128)
    if ok.any():
        vals[ok] = _interp(strip.amplitude, rows[ok], cols[ok])
    out = np.zeros((ring.ny, ring.nx), dtype=np.complex128)
    out[sel] = vals * (spec.a / r[sel])
    return ComplexField(ring, out)


def _forward_ideal(ringf: ComplexField, spec: SorterSpec, strip: GridSpec) -> ComplexField:
    rg = ringf.grid
    r_min, r_max = _ring_limits(rg)
    xx, yy = cartesian_coords(strip)
    sel = np.abs(xx) <= np.pi * spec.a
    rad = spec.b * np.exp(-yy[sel] / spec.a)
    th = xx[sel] / spec.a
    sel_idx = np.flatnonzero(sel)
    keep = (rad >= r_min) & (rad <= r_max)
    rows = rad[keep] * np.sin(th[keep]) / rg.dy + rg.ny // 2
    cols = rad[keep] * np.cos(th[keep]) / rg.dx + rg.nx // 2
    out = np.zeros(strip.ny * strip.nx, dtype=np.complex128)
    if keep.any():
        out[sel_idx[keep]] = _interp(ringf.amplitude, rows, cols) * rad[keep] / spec.a
    return ComplexField(strip, out.reshape(strip.ny, strip.nx))


def element_phases(spec: SorterSpec, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Total phases of the two refractive elements, focusing terms included.

    Element 1 sends the ray at (x, y) to (a theta, a ln(r/b)) one focal length
    downstream; element 2 removes the path-length error and recollimates.
    """
    k = 2 * np.pi / grid.wavelength
    xx, yy = cartesian_coords(grid)
    r = np.hypot(xx, yy)
    r = np.where(r == 0, 0.5 * min(grid.dx, grid.dy), r)
    th = np.arctan2(yy, xx)
    c = k * spec.a / spec.f
    lens = k * (xx ** 2 + yy ** 2) / (2 * spec.f)
    phi1 = c * (xx * th + yy * np.log(r / spec.b) - yy) - lens
    phi2 = (k * spec.a * spec.b / spec.f) * np.exp(yy / spec.a) * np.sin(xx / spec.a) - lens
    return phi1, phi2


def _flip_y(a: np.ndarray) -> np.ndarray:
    return np.roll(a[::-1, :], 1, axis=0)


def _forward_physical(f: ComplexField, spec: SorterSpec) -> ComplexField:
    phi1, phi2 = element_phases(spec, f.grid)
    mid = propagate(ComplexField(f.grid, f.amplitude * np.exp(1j * phi1)), spec.f)
    return ComplexField(f.grid, _flip_y(mid.amplitude * np.exp(1j * phi2)))


def _reverse_physical(f: ComplexField, spec: SorterSpec) -> ComplexField:
    phi1, phi2 = element_phases(spec, f.grid)
    mid = ComplexField(f.grid, _flip_y(f.amplitude) * np.exp(-1j * phi2))
    back = propagate(mid, -spec.f)
    return ComplexField(f.grid, back.amplitude * np.exp(-1j * phi1))


def sorter_reverse(f: ComplexField, spec: SorterSpec, out_grid: GridSpec | None = None
                   ) -> ComplexField:
    """Map a strip field to the ring plane (position/phase-gradient -> OAM).

    ``ideal_remap`` applies the energy-preserving coordinate remap
    r = b exp(-u/a), theta = v/a with the a/r amplitude Jacobian. It may resample
    onto ``out_grid``. ``physical_phases`` runs the two-element system
    backwards and keeps the input grid.
    """
    if spec.mode == "physical_phases":
        if out_grid is not None and out_grid != f.grid:
            raise ValueError("physical sorter works on a single grid")
        return _reverse_physical(f, spec)
    ring = out_grid or f.grid
    loss = sorter_loss(f, spec, ring)
    if loss > 0.01:
        warnings.warn(f"{loss:.1%} of the strip power falls outside the sorter annulus",
                      SorterLossWarning, stacklevel=2)
    return _reverse_ideal(f, spec, ring)


def sorter_forward(f: ComplexField, spec: SorterSpec, out_grid: GridSpec | None = None
                   ) -> ComplexField:
    """Map a ring-plane field to the strip (OAM -> transverse phase gradient)."""
    if spec.mode == "physical_phases":
        if out_grid is not None and out_grid != f.grid:
            raise ValueError("physical sorter works on a single grid")
        return _forward_physical(f, spec)
    return _forward_ideal(f, spec, out_grid or f.grid)


def resample(f: ComplexField, grid: GridSpec, order: int = 5) -> ComplexField:
    """Spline-resample ``f`` onto ``grid`` (same physical coordinates, zero outside)."""
    xx, yy = cartesian_coords(grid)
    cols = xx / f.grid.dx + f.grid.nx // 2
    rows = yy / f.grid.dy + f.grid.ny // 2
    ok = (rows >= 0) & (rows <= f.grid.ny - 1) & (cols >= 0) & (cols <= f.grid.nx - 1)
    out = np.zeros((grid.ny, grid.nx), dtype=np.complex128)
    if ok.any():
        out[ok] = _interp(f.amplitude, rows[ok], cols[ok], order=order)
    return ComplexField(grid, out)

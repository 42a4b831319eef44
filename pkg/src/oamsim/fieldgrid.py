"""Scalar complex fields on uniform grids, Laguerre-Gauss modes and OAM spectra.

Arrays are stored row-major with shape ``(ny, nx)``: axis 0 is y, axis 1 is x.
The optical axis sits at pixel ``(ny // 2, nx // 2)``. Inner products use the
continuous L2 convention ``sum(conj(a) * b) * dx * dy`` so that results do not
depend on the sampling density beyond discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy import ndimage, optimize
from scipy.special import eval_genlaguerre, gammaln

L_MAX_DEFAULT = 10


class GridMismatchError(ValueError):
    """Two fields live on different grids."""


class WindowTooSmallError(ValueError):
    """A requested mode does not fit inside the sampling window."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    dx: float
    dy: float
    wavelength: float

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 64 or n & (n - 1):
                raise ValueError(f"grid sizes must be powers of two >= 64, got {n}")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("sample pitch must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")

    @classmethod
    def square(cls, n: int, window: float, wavelength: float) -> "GridSpec":
        return cls(n, n, window / n, window / n, wavelength)

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    @property
    def half_window(self) -> float:
        return 0.5 * min(self.nx * self.dx, self.ny * self.dy)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "dx_m": self.dx, "dy_m": self.dy,
                "wavelength_m": self.wavelength}


@lru_cache(maxsize=8)
def _polar(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.meshgrid(grid.y, grid.x, indexing="ij")
    r = np.hypot(xx, yy)
    theta = np.arctan2(yy, xx)
    r.setflags(write=False)
    theta.setflags(write=False)
    return r, theta


def polar_coords(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return read-only ``(r, theta)`` arrays; theta in (-pi, pi], cut along -x."""
    return _polar(grid)


def cartesian_coords(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.meshgrid(grid.y, grid.x, indexing="ij")
    return xx, yy


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: GridSpec
    amplitude: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.amplitude, dtype=np.complex128)
        if a.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(f"amplitude shape {a.shape} does not match grid "
                             f"({self.grid.ny}, {self.grid.nx})")
        if not np.all(np.isfinite(a)):
            raise ValueError("field contains non-finite samples")
        object.__setattr__(self, "amplitude", a)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.grid.cell_area)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def normalized(self) -> "ComplexField":
        p = self.power
        if p <= 0:
            raise ValueError("cannot normalize a zero field")
        return ComplexField(self.grid, self.amplitude / np.sqrt(p))

    def scaled(self, c: complex) -> "ComplexField":
        return ComplexField(self.grid, self.amplitude * c)

    def __add__(self, other: "ComplexField") -> "ComplexField":
        _check_same_grid(self, other)
        return ComplexField(self.grid, self.amplitude + other.amplitude)


@dataclass(frozen=True)
class LGModeSpec:
    l: int
    p: int
    waist: float
    l_max: int = L_MAX_DEFAULT

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("radial index p must be >= 0")
        if abs(self.l) > self.l_max:
            raise ValueError(f"|l|={abs(self.l)} exceeds configured limit {self.l_max}")
        if self.waist <= 0:
            raise ValueError("waist must be positive")

    @property
    def mode_radius(self) -> float:
        return np.sqrt(abs(self.l) + 2 * self.p + 1) * self.waist


def _check_same_grid(a: ComplexField, b: ComplexField) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def lg_radial(l: int, p: int, waist: float, r: np.ndarray) -> np.ndarray:
    """Normalized radial LG profile; ``lg_radial * exp(i l theta)`` has unit L2 norm."""
    al = abs(l)
    lognorm = 0.5 * (np.log(2.0) + gammaln(p + 1) - np.log(np.pi) - gammaln(p + al + 1))
    rho2 = 2.0 * (r / waist) ** 2
    return (np.exp(lognorm) / waist) * rho2 ** (al / 2) * eval_genlaguerre(p, al, rho2) \
        * np.exp(-rho2 / 2)


def energy_radius(l: int, p: int, waist: float, tail: float = 1e-4) -> float:
    """Radius enclosing all but ``tail`` of the mode energy."""
    t = np.linspace(0.0, 12.0 + np.sqrt(abs(l) + 2 * p + 1) * 3, 40001) * waist
    dens = lg_radial(l, p, waist, t) ** 2 * 2 * np.pi * t
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))])
    return float(t[np.searchsorted(cum, 1.0 - tail)])


def lg_mode(spec: LGModeSpec, grid: GridSpec, check_window: bool = True) -> ComplexField:
    """Sample the LG_p^l mode at its waist plane (flat wavefront, no Gouy phase).

    Raises ``WindowTooSmallError`` if the 1e-4 energy radius leaves the window.
    """
    if check_window:
        rad = energy_radius(spec.l, spec.p, spec.waist)
        if rad > grid.half_window:
            raise WindowTooSmallError(
                f"LG(l={spec.l}, p={spec.p}, w={spec.waist:g}) needs radius {rad:g} m, "
                f"grid half-window is {grid.half_window:g} m")
    r, theta = polar_coords(grid)
    amp = lg_radial(spec.l, spec.p, spec.waist, r).astype(np.complex128)
    if spec.l:
        amp *= np.exp(1j * spec.l * theta)
    return ComplexField(grid, amp)


def gaussian_beam(grid: GridSpec, waist: float, center: tuple[float, float] = (0.0, 0.0)
                  ) -> ComplexField:
    """Unit-power real Gaussian exp(-r^2/w^2), optionally displaced."""
    xx, yy = cartesian_coords(grid)
    r2 = (xx - center[0]) ** 2 + (yy - center[1]) ** 2
    amp = np.sqrt(2 / np.pi) / waist * np.exp(-r2 / waist ** 2)
    return ComplexField(grid, amp.astype(np.complex128))


def plane_wave(grid: GridSpec) -> ComplexField:
    area = grid.nx * grid.ny * grid.cell_area
    return ComplexField(grid, np.full((grid.ny, grid.nx), 1 / np.sqrt(area), np.complex128))


def overlap(a: ComplexField, b: ComplexField) -> complex:
    """Inner product <a|b> = sum(conj(a) b) dx dy."""
    _check_same_grid(a, b)
    return complex(np.vdot(a.amplitude, b.amplitude) * a.grid.cell_area)


def _l_values(l_range) -> list[int]:
    if isinstance(l_range, tuple) and len(l_range) == 2:
        return list(range(int(l_range[0]), int(l_range[1]) + 1))
    return [int(l) for l in l_range]


def _require_unit(f: ComplexField, tol: float = 1e-6) -> None:
    if abs(f.power - 1.0) > tol:
        raise ValueError(f"expected a unit-norm field, got power {f.power:.9g}")


# -- azimuthal harmonics -------------------------------------------------

def angular_harmonics(f: ComplexField, n_theta: int = 512, n_r: int | None = None,
                      order: int = 3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Resample ``f`` onto a polar grid and Fourier-transform along theta.

    Returns ``(r, l, c)`` where ``c[i, k]`` is the mean of ``f exp(-i l_k theta)``
    on the circle of radius ``r[i]``. Power in harmonic l is
    ``sum(2 pi r |c|^2 dr)``.
    """
    g = f.grid
    n_r = n_r or min(g.nx, g.ny) // 2
    dr = g.half_window / n_r
    r = (np.arange(n_r) + 0.5) * dr
    th = 2 * np.pi * np.arange(n_theta) / n_theta - np.pi
    rr, tt = np.meshgrid(r, th, indexing="ij")
    cols = rr * np.cos(tt) / g.dx + g.nx // 2
    rows = rr * np.sin(tt) / g.dy + g.ny // 2
    coords = np.array([rows.ravel(), cols.ravel()])
    re = ndimage.map_coordinates(f.amplitude.real, coords, order=order, mode="constant")
    im = ndimage.map_coordinates(f.amplitude.imag, coords, order=order, mode="constant")
    samples = (re + 1j * im).reshape(n_r, n_theta)
    # theta starts at -pi: undo the offset so c matches exp(-i l theta) projections
    c = np.fft.fft(samples, axis=1) / n_theta
    l = np.fft.fftfreq(n_theta, 1.0 / n_theta).astype(int)
    c = c * np.exp(-1j * l * np.pi)[None, :]
    order_idx = np.argsort(l)
    return r, l[order_idx], c[:, order_idx]


@dataclass(frozen=True, eq=False)
class AzimuthalSpectrum:
    l: np.ndarray
    power: np.ndarray
    phase: np.ndarray

    @property
    def total(self) -> float:
        return float(self.power.sum())

    @property
    def normalized(self) -> np.ndarray:
        return self.power / self.power.sum()

    @property
    def mean(self) -> float:
        return float(np.sum(self.l * self.power) / self.power.sum())

    @property
    def dominant(self) -> int:
        return int(self.l[np.argmax(self.power)])

    def at(self, l: int) -> float:
        return float(self.power[np.searchsorted(self.l, l)])


def azimuthal_spectrum(f: ComplexField, n_theta: int = 512) -> AzimuthalSpectrum:
    """Power in each angular harmonic exp(i l theta), summed over all radii.

    Unlike ``oam_spectrum`` this is complete: no radial basis truncation. The
    reported phase is that of the harmonic at the radius of peak power.
    """
    r, l, c = angular_harmonics(f, n_theta=n_theta)
    dr = r[1] - r[0]
    dens = np.abs(c) ** 2 * (2 * np.pi * r * dr)[:, None]
    power = dens.sum(axis=0)
    ridx = np.argmax(dens, axis=0)
    phase = np.angle(c[ridx, np.arange(len(l))])
    return AzimuthalSpectrum(l, power, phase)


# -- LG decomposition ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class OAMSpectrum:
    powers: dict[int, float]
    amplitudes: dict[tuple[int, int], complex]
    residual: float
    waist: float

    @property
    def dominant(self) -> int:
        return max(self.powers, key=self.powers.get)

    @property
    def mean(self) -> float:
        tot = sum(self.powers.values())
        return sum(l * p for l, p in self.powers.items()) / tot

    def phase(self, l: int, p: int = 0) -> float:
        return float(np.angle(self.amplitudes[(l, p)]))


def lg_amplitudes(f: ComplexField, ls: Iterable[int], p_max: int, waist: float
                  ) -> dict[tuple[int, int], complex]:
    """<LG_lp | f> for every l in ``ls`` and p in 0..p_max (no norm requirement)."""
    r, theta = polar_coords(f.grid)
    out = {}
    for l in ls:
        weighted = f.amplitude * np.exp(-1j * l * theta) if l else f.amplitude
        for p in range(p_max + 1):
            rad = lg_radial(l, p, waist, r)
            out[(l, p)] = complex(np.sum(rad * weighted) * f.grid.cell_area)
    return out


def recover_waist(f: ComplexField, l_range=(-10, 10), bounds: tuple[float, float] | None = None
                  ) -> float:
    """Waist maximizing the p=0 capture summed over ``l_range``."""
    ls = _l_values(l_range)
    r, lh, c = angular_harmonics(f, n_theta=max(64, 4 * max(abs(l) for l in ls) + 8))
    dr = r[1] - r[0]
    cols = [int(np.searchsorted(lh, l)) for l in ls]
    if bounds is None:
        bounds = (4 * f.grid.dx, f.grid.half_window)

    def neg_capture(logw):
        w = np.exp(logw)
        tot = 0.0
        for l, k in zip(ls, cols):
            amp = np.sum(lg_radial(l, 0, w, r) * c[:, k] * 2 * np.pi * r) * dr
            tot += abs(amp) ** 2
        return -tot

    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    grid = np.linspace(lo, hi, 40)
    vals = [neg_capture(g) for g in grid]
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(neg_capture, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-5})
    return float(np.exp(res.x))


def oam_spectrum(f: ComplexField, l_range=(-10, 10), p_max: int = 5,
                 waist: float | None = None) -> OAMSpectrum:
    """Decompose a unit-norm field into LG modes.

    Power at azimuthal index l is the sum of |<LG_lp|f>|^2 over p = 0..p_max.
    When ``waist`` is None the basis waist is chosen to maximize p=0 capture.
    """
    _require_unit(f)
    ls = _l_values(l_range)
    if waist is None:
        waist = recover_waist(f, ls)
    amps = lg_amplitudes(f, ls, p_max, waist)
    powers = {l: sum(abs(amps[(l, p)]) ** 2 for p in range(p_max + 1)) for l in ls}
    residual = max(0.0, 1.0 - sum(powers.values()))
    return OAMSpectrum(powers, amps, residual, waist)


def gaussian_coupling(f: ComplexField, waist) -> float:
    """Power coupled into a centered fundamental Gaussian (single-mode fibre).

    ``waist`` is either a number or a ``(lo, hi)`` interval; an interval is
    scanned and the best coupling returned.
    """
    _require_unit(f)
    if np.isscalar(waist):
        g = lg_mode(LGModeSpec(0, 0, float(waist)), f.grid, check_window=False)
        return abs(overlap(g, f)) ** 2
    lo, hi = (float(w) for w in waist)
    if not (0 < lo <= hi):
        raise ValueError(f"empty waist scan interval ({lo}, {hi})")
    if lo == hi:
        return gaussian_coupling(f, lo)
    r, _ = polar_coords(f.grid)
    r2 = r ** 2

    def coupling(logw):
        w = np.exp(logw)
        g = np.sqrt(2 / np.pi) / w * np.exp(-r2 / w ** 2)
        return abs(np.sum(g * f.amplitude) * f.grid.cell_area) ** 2

    grid = np.linspace(np.log(lo), np.log(hi), 24)
    vals = [coupling(g) for g in grid]
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda t: -coupling(t), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-4})
    return float(max(vals[i], -res.fun))


def winding_number(f: ComplexField, radius: float, n: int = 2048) -> float:
    """Accumulated phase around a centered circle, in units of 2 pi."""
    g = f.grid
    th = np.linspace(-np.pi, np.pi, n + 1)
    cols = radius * np.cos(th) / g.dx + g.nx // 2
    rows = radius * np.sin(th) / g.dy + g.ny // 2
    coords = np.array([rows, cols])
    re = ndimage.map_coordinates(f.amplitude.real, coords, order=3)
    im = ndimage.map_coordinates(f.amplitude.imag, coords, order=3)
    ph = np.unwrap(np.angle(re + 1j * im))
    return float((ph[-1] - ph[0]) / (2 * np.pi))

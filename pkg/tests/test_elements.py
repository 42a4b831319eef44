import warnings

import numpy as np
import pytest

from oamsim.elements import (AliasingWarning, Slit, SlitArray, SorterLossWarning, SorterSpec,
                             UnresolvedSlitError, aperture_mask, apply_aperture, camera_image,
                             lens_and_focus, propagate, sorter_forward, sorter_reverse)
from oamsim.fieldgrid import (ComplexField, GridSpec, LGModeSpec, azimuthal_spectrum,
                              cartesian_coords, gaussian_beam, lg_mode, overlap, plane_wave,
                              winding_number)

WL = 810e-9
A = 2.578e-4
B = 2e-3


def test_slit_validation():
    with pytest.raises(ValueError):
        Slit(0.0, -1e-4)
    with pytest.raises(ValueError):
        Slit(0.0, 1e-4, transmission=1.5)
    with pytest.raises(ValueError, match="overlap"):
        SlitArray((Slit(0.0, 2e-4), Slit(1e-4, 2e-4)), 1e-3)


def test_slit_array_roundtrip():
    arr = SlitArray((Slit(-2.5e-4, 1.5e-4, 0.5, 0.2), Slit(2.5e-4, 1.5e-4)), 2e-3)
    assert SlitArray.from_dict(arr.to_dict()) == arr


def test_aperture_area_matches_geometry(small_grid):
    arr = SlitArray((Slit(1.3e-4, 1.7e-4),), 1.05e-3)
    area = np.abs(aperture_mask(arr, small_grid)).sum() * small_grid.cell_area
    assert area == pytest.approx(1.7e-4 * 1.05e-3, rel=1e-9)


def test_unresolved_slit(small_grid):
    with pytest.raises(UnresolvedSlitError):
        apply_aperture(plane_wave(small_grid), SlitArray((Slit(0.0, 2 * small_grid.dx),), 1e-3))


def test_propagation_round_trip_and_power(small_grid, no_warnings):
    f = lg_mode(LGModeSpec(2, 1, 2e-4), small_grid)
    g = propagate(f, 0.05)
    assert g.power == pytest.approx(f.power, abs=1e-12)
    back = propagate(g, -0.05)
    assert np.max(np.abs(back.amplitude - f.amplitude)) < 1e-9 * np.max(np.abs(f.amplitude))


def test_propagation_gaussian_spreading():
    g = GridSpec.square(512, 6e-3, WL)
    w0 = 3e-4
    z = 0.2
    zr = np.pi * w0 ** 2 / WL
    out = propagate(gaussian_beam(g, w0), z)
    xx, yy = cartesian_coords(g)
    r2 = (out.intensity * (xx ** 2 + yy ** 2)).sum() / out.intensity.sum()
    # second moment of a Gaussian: <r^2> = w^2 / 2
    assert np.sqrt(2 * r2) == pytest.approx(w0 * np.sqrt(1 + (z / zr) ** 2), rel=1e-4)


def test_aliasing_warning(small_grid):
    f = apply_aperture(plane_wave(small_grid), SlitArray((Slit(0.0, 4 * small_grid.dx),), 1e-3))
    with pytest.warns(AliasingWarning):
        propagate(f, 5.0)


def test_lens_twice_is_parity(small_grid):
    f = gaussian_beam(small_grid, 2e-4, (3e-4, -1e-4))
    spec = lens_and_focus(f, 0.3)
    back = lens_and_focus(spec, 0.3)
    assert back.grid == small_grid
    flipped = np.roll(np.roll(f.amplitude[::-1, ::-1], 1, 0), 1, 1)
    assert np.allclose(back.amplitude, flipped, atol=1e-9 * np.abs(f.amplitude).max())


def test_inverse_lens_undoes_lens(small_grid):
    f = lg_mode(LGModeSpec(-1, 0, 3e-4), small_grid)
    back = lens_and_focus(lens_and_focus(f, 0.3), 0.3, inverse=True)
    assert abs(overlap(back, f)) == pytest.approx(1.0, abs=1e-12)


def test_lens_maps_tilt_to_position(small_grid):
    # a plane-wave tilt kx maps to x = kx * lambda f / (2 pi) on the forward lens
    x_target = 10 * (WL * 0.3 / (small_grid.nx * small_grid.dx))
    kx = 2 * np.pi * x_target / (WL * 0.3)
    xx, _ = cartesian_coords(small_grid)
    f = ComplexField(small_grid, gaussian_beam(small_grid, 1e-3).amplitude * np.exp(1j * kx * xx))
    out = lens_and_focus(f, 0.3)
    iy, ix = np.unravel_index(np.argmax(out.intensity), out.intensity.shape)
    assert (ix - small_grid.nx // 2) * out.grid.dx == pytest.approx(x_target, rel=1e-9)


def test_camera_image_matches_fft(small_grid):
    f = gaussian_beam(small_grid, 3e-4)
    ref = lens_and_focus(f, 0.5)
    img, pitch = camera_image(f, 0.5, n_out=64, pitch=ref.grid.dx)
    c = small_grid.nx // 2
    assert np.allclose(img, ref.intensity[c - 32:c + 32, c - 32:c + 32], rtol=1e-9, atol=1e-12)


def test_sorter_spec_pitch_roundtrip():
    s = SorterSpec.from_pitch(150e-6, 0.3, WL, B)
    assert s.pitch(0.3, WL) == pytest.approx(150e-6)
    assert SorterSpec.from_dict(s.to_dict()) == s
    with pytest.raises(ValueError):
        SorterSpec(A, B, 0.3, "bogus")


def _strip(l, w=5e-5, n=1024, window=12.15e-3, one_period=False):
    g = GridSpec.square(n, window, WL)
    xx, yy = cartesian_coords(g)
    # periodic in v, so only the mapped period matters and no edge is sampled
    amp = np.exp(1j * l * xx / A) * np.exp(-(yy / w) ** 2)
    if one_period:
        amp = np.where(np.abs(xx) <= np.pi * A, amp, 0)
    return ComplexField(g, amp.astype(complex))


@pytest.mark.filterwarnings("ignore::oamsim.elements.SorterLossWarning")
@pytest.mark.parametrize("l", [0, 2, -5])
def test_ideal_remap_conserves_energy(l):
    w = 5e-5
    strip = _strip(l, w)
    ring = GridSpec.square(1024, 8e-3, WL)
    out = sorter_reverse(strip, SorterSpec(A, B, 0.3), ring)
    # strip power is 2 pi a * int exp(-2 u^2 / w^2) du
    assert out.power == pytest.approx(2 * np.pi * A * w * np.sqrt(np.pi / 2), rel=1e-6)
    spec = azimuthal_spectrum(out.normalized())
    assert spec.dominant == l
    assert winding_number(out, B, 4096) == pytest.approx(l, abs=1e-3)


def test_forward_inverts_reverse():
    strip = _strip(3, one_period=True)
    ring = GridSpec.square(1024, 8e-3, WL)
    spec = SorterSpec(A, B, 0.3)
    back = sorter_forward(sorter_reverse(strip, spec, ring), spec, strip.grid)
    fid = abs(overlap(back, strip)) ** 2 / (back.power * strip.power)
    assert fid > 0.9999


def test_sorter_loss_warning():
    strip = _strip(0, w=2e-3)
    with pytest.warns(SorterLossWarning):
        sorter_reverse(strip, SorterSpec(A, B, 0.3), GridSpec.square(512, 8e-3, WL))


def test_physical_sorter_round_trip():
    # exact inverse up to the propagation band limit near the r = 0 singularity
    g = GridSpec.square(1024, 8e-3, WL)
    spec = SorterSpec(A, B, 0.3, "physical_phases")
    f = lg_mode(LGModeSpec(2, 0, 1.2e-3), g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        back = sorter_reverse(sorter_forward(f, spec), spec)
    assert abs(overlap(back, f)) ** 2 > 0.995


def test_physical_sorter_rejects_regrid():
    g = GridSpec.square(256, 8e-3, WL)
    with pytest.raises(ValueError):
        sorter_reverse(plane_wave(g), SorterSpec(A, B, 0.3, "physical_phases"),
                       GridSpec.square(512, 8e-3, WL))

"""Internal consistency checks shared by the ``selftest`` command and the test suite."""

from __future__ import annotations

import warnings

import numpy as np

from . import biphoton as bp
from .certify import SchmidtVector, oracle_max_overlap, schmidt_bound
from .elements import lens_and_focus, propagate
from .fieldgrid import ComplexField, GridSpec, LGModeSpec, gaussian_beam, lg_mode


def _probe_fields(grid: GridSpec, n: int = 4) -> list[ComplexField]:
    """A few smooth, mutually non-orthogonal test fields well inside the window."""
    w = grid.half_window / 6
    out = [gaussian_beam(grid, w, (0.3 * w * k, -0.2 * w * k)) for k in range(n - 1)]
    out.append(lg_mode(LGModeSpec(2, 1, w / 2), grid))
    return out


def _gram(fields) -> np.ndarray:
    a = np.stack([f.amplitude.ravel() for f in fields])
    return a.conj() @ a.T * fields[0].grid.cell_area


def operator_unitarity_error(op, grid: GridSpec) -> float:
    """max |<Ua|Ub> - <a|b>| over probe fields (unit-power inputs)."""
    fields = _probe_fields(grid)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        outs = [op(f) for f in fields]
    return float(np.max(np.abs(_gram(outs) - _gram(fields))))


def lg_gram_error(grid: GridSpec, waist: float, l_max: int = 4, p_max: int = 2) -> float:
    modes = [lg_mode(LGModeSpec(l, p, waist), grid)
             for l in range(-l_max, l_max + 1) for p in range(p_max + 1)]
    g = _gram(modes)
    return float(np.max(np.abs(g - np.eye(len(modes)))))


def oracle_sweep(n_targets: int, restarts: int, seed: int = 0, dims=(2, 3, 4)
                 ) -> tuple[int, float]:
    """Random Schmidt vectors vs. the brute-force overlap; returns (cases, worst gap)."""
    rng = np.random.Generator(np.random.Philox(seed))
    worst, cases = 0.0, 0
    for t in range(n_targets):
        dim = dims[t % len(dims)]
        lam = SchmidtVector.from_amplitudes(rng.random(dim) + 1e-3)
        for d in range(1, dim):
            gap = abs(oracle_max_overlap(lam, d, restarts, seed + t) - schmidt_bound(lam, d))
            worst = max(worst, gap)
            cases += 1
    return cases, worst


def run_all(cfg, quick: bool = False) -> list[tuple[str, bool, str]]:
    checks = []
    grid = GridSpec.square(256 if quick else 512, 4e-3, cfg.grid.wavelength_m)

    n, restarts = (10, 20) if quick else (60, 200)
    cases, worst = oracle_sweep(n, restarts)
    checks.append(("oracle_matches_bound", worst < 1e-4,
                   f"{cases} cases, worst |oracle - bound| = {worst:.2e}"))

    for name, op in [("propagation_unitary", lambda f: propagate(f, 0.05)),
                     ("lens_unitary", lambda f: lens_and_focus(f, 0.3))]:
        err = operator_unitarity_error(op, grid)
        checks.append((name, err < 1e-9, f"max Gram deviation {err:.2e}"))

    err = lg_gram_error(grid, grid.half_window / 8, 3 if quick else 4, 2)
    checks.append(("lg_gram_identity", err < 1e-8, f"max deviation {err:.2e}"))

    if cfg.transfer_model == "simulated" and not quick:
        from .experiments import transfer_matrix
        t = transfer_matrix(cfg)
        worst = 0.0
        for k, l in enumerate(t.designed_l):
            for dl in (-3, 3):
                if (l + dl) in t.azimuthal_l:
                    worst = max(worst, t.crosstalk(k, l + dl))
        checks.append(("crosstalk_below_1pct", worst < 0.01,
                       f"worst neighbour power ratio {worst:.2e}"))

    if cfg.transfer_model == "ideal" or not quick:
        from .experiments import noisy_state
        w = cfg.noise.calibrated_white or cfg.noise.white
        lam_min = noisy_state(cfg, w).min_eigenvalue()
        checks.append(("state_psd", lam_min >= -1e-9, f"min eigenvalue {lam_min:.2e}"))
    mixed = bp.apply_noise(bp.BiphotonState.pure((0, 1), np.eye(2) / np.sqrt(2)), 0.5, 0.5)
    checks.append(("noise_psd", mixed.min_eigenvalue() >= -1e-9,
                   f"min eigenvalue {mixed.min_eigenvalue():.2e}"))
    return checks

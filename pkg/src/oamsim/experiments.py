"""End-to-end quantum scenarios: transfer matrix -> pair state -> counts -> witness / CHSH."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import biphoton as bp
from .certify import (CHSHResult, CHSHSettings, TargetState, WitnessReport, analyze_counts,
                      best_target, chsh_value, correlated_block, element_samples, estimate_matrix_elements,
                      fidelity, witness_settings, witness_verdict)
from .config import ConfigError, RunConfig
from .pipeline import TransferMatrix, compute_transfer_matrix


@lru_cache(maxsize=8)
def _transfer_cached(key: str, cfg: RunConfig) -> TransferMatrix:
    return compute_transfer_matrix(cfg.slits, cfg.setup(), cfg.transfer_l_range,
                                   cfg.transfer_p_max)


def transfer_matrix(cfg: RunConfig) -> TransferMatrix:
    """Simulated slit -> OAM transfer for ``cfg`` (memoized on the optical settings)."""
    key = json.dumps({k: cfg.raw[k] for k in ("grid", "optics", "slits", "transfer")},
                     sort_keys=True)
    return _transfer_cached(key, cfg)


def designed_labels(cfg: RunConfig) -> tuple[int, ...]:
    pitch = cfg.optics.pitch_m
    return tuple(int(round(cfg.slits.slits[i].center_x / pitch)) for i in cfg.state.slit_indices)


def path_spec(cfg: RunConfig) -> bp.PathStateSpec:
    amps = cfg.state.amplitudes
    if amps is None:
        slits = cfg.state_slits()
        amps = bp.pump_amplitudes([s.center_x for s in slits.slits], slits.slits[0].width,
                                  cfg.state.pump_fwhm_m)
    return bp.PathStateSpec.normalized(amps, cfg.state.phases_rad)


def target_amplitudes(cfg: RunConfig) -> tuple[float, ...]:
    spec = path_spec(cfg)
    return spec.amplitudes


def pure_oam_state(cfg: RunConfig) -> bp.BiphotonState:
    """Noise-free pair state in the OAM basis plus the sink mode (none for an ideal transfer)."""
    labels = list(designed_labels(cfg))
    path = bp.build_path_state(path_spec(cfg))
    if cfg.transfer_model == "ideal":
        return bp.transfer_to_oam(path, np.eye(len(labels)), labels, sink=False)
    t = transfer_matrix(cfg)
    cols = list(cfg.state.slit_indices)
    return bp.transfer_to_oam(path, t.detection_map(labels)[:, cols], labels)


def detected_state(cfg: RunConfig) -> bp.BiphotonState:
    """The pure state conditioned on both photons reaching a detector."""
    state = pure_oam_state(cfg)
    return state.postselect() if bp.SINK in state.labels else state


def white_level(cfg: RunConfig, calibrated: bool = False, white: float | None = None) -> float:
    if white is not None:
        return white
    if calibrated:
        if cfg.noise.calibrated_white is None:
            raise ConfigError(f"preset {cfg.name!r} ships no calibrated noise level")
        return cfg.noise.calibrated_white
    return cfg.noise.white


def calibrate(cfg: RunConfig) -> float:
    """White-noise weight that brings the detected-pair fidelity to the configured target."""
    if cfg.noise.target_fidelity is None:
        raise ConfigError("noise.target_fidelity is not set")
    state = detected_state(cfg)
    target = bp.aligned_target(state, list(designed_labels(cfg)), target_amplitudes(cfg))
    return bp.calibrate_white_noise(state, target, cfg.noise.target_fidelity,
                                    postselect=False, dephase=cfg.noise.dephase)


def noisy_state(cfg: RunConfig, white: float) -> bp.BiphotonState:
    """Detected pairs with background: noise acts after coincidence post-selection."""
    return bp.apply_noise(detected_state(cfg), white, cfg.noise.dephase)


@dataclass(frozen=True)
class WitnessRun:
    report: WitnessReport
    records: list
    elements: np.ndarray
    exact: np.ndarray
    target: TargetState


def run_witness(cfg: RunConfig, calibrated: bool = False, white: float | None = None,
                optimize_target: bool = False, seed: int | None = None) -> WitnessRun:
    seed = cfg.seed if seed is None else seed
    w = white_level(cfg, calibrated, white)
    state = noisy_state(cfg, w)
    labels = list(designed_labels(cfg))
    settings = witness_settings(labels)
    records = bp.sample_counts(state, settings, cfg.counts.rate_pairs_per_s,
                               cfg.counts.witness_time_s, seed)
    data = analyze_counts(records, labels)
    elements = estimate_matrix_elements(data)
    samples = element_samples(records, labels, cfg.counts.mc_trials, seed + 1)
    target = TargetState(labels, target_amplitudes(cfg)).aligned(elements)
    if optimize_target:
        target = best_target(elements, samples, labels, len(labels) - 1, target.amplitudes)
    f, sigma = fidelity(elements, target, samples)
    extra = {
        "preset": cfg.name,
        "labels": labels,
        "target_amplitudes": list(target.amplitudes),
        "target_phases_rad": list(target.phases),
        "white_noise": w,
        "dephase": cfg.noise.dephase,
        "seed": seed,
        "total_counts": int(sum(r.count for r in records)),
        "visibilities": {f"{a},{b}": s.visibility for (a, b), s in data.subspaces.items()},
        "anticorrelated_population": data.anticorrelated,
        "exact_fidelity": state.fidelity(target.matrix(state.labels)),
    }
    report = witness_verdict(f, sigma, target.schmidt, extra)
    return WitnessRun(report, records, elements, correlated_block(state, labels), target)


def chsh_settings(state: bp.BiphotonState, subspace) -> CHSHSettings:
    chi = float(np.angle(state.element((subspace[0],) * 2, (subspace[1],) * 2)))
    return CHSHSettings.optimal(subspace, chi)


def run_chsh(cfg: RunConfig, analytic: bool = False, calibrated: bool = False,
             white: float | None = None, seed: int | None = None
             ) -> tuple[CHSHResult, list]:
    """S on the first two designed modes; exact probabilities when ``analytic``."""
    seed = cfg.seed if seed is None else seed
    state = noisy_state(cfg, white_level(cfg, calibrated, white))
    labels = designed_labels(cfg)
    settings = chsh_settings(state, labels[:2])
    if analytic:
        return chsh_value(state, settings), []
    records = bp.sample_counts(state, settings.measurement_plan(), cfg.counts.rate_pairs_per_s,
                               cfg.counts.chsh_time_s, seed)
    return chsh_value(records, settings, cfg.counts.mc_trials, seed + 1), records

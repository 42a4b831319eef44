"""Recompute the white-noise weights shipped with the calibrated presets."""
import json

from oamsim import biphoton as bp
from oamsim.config import RunConfig
from oamsim.experiments import calibrate, designed_labels, detected_state, target_amplitudes

for name in ("qubit-paper", "qutrit-paper"):
    cfg = RunConfig.preset(name)
    w = calibrate(cfg)
    labels = list(designed_labels(cfg))
    det = detected_state(cfg)
    target = bp.aligned_target(det, labels, target_amplitudes(cfg))
    print(json.dumps({
        "preset": name,
        "target_fidelity": cfg.noise.target_fidelity,
        "calibrated_white": w,
        "shipped": cfg.noise.calibrated_white,
        "difference": abs(w - cfg.noise.calibrated_white),
        "noiseless_fidelity_after_transfer": det.fidelity(target),
        "populations": [round(det.population(l, l), 5) for l in labels],
    }, indent=2))

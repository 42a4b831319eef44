"""Command-line entry point: ``python -m oamsim <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import biphoton as bp
from .config import ConfigError, RunConfig, preset_names, validate
from .fieldio import write_pgm

log = logging.getLogger("oamsim")

EXIT_OK, EXIT_DOMAIN, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("UsageError", message, EXIT_CONFIG)
        sys.exit(EXIT_CONFIG)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def write_json(path: Path, doc: dict, schema: str) -> Path:
    doc = _jsonable(doc)
    validate(doc, schema)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", path)
    return path


def _emit_error(kind: str, message: str, code: int) -> None:
    doc = {"schema": "oamsim.error/1", "error": kind, "message": message, "exit_code": code}
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


# -- configuration -----------------------------------------------------------

def load_config(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    if args.config:
        cfg = RunConfig.load(args.config)
    else:
        cfg = RunConfig.preset(args.preset or _default_preset(args.command))
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["output_dir"] = args.out
    if args.grid is not None:
        g = cfg.grid
        over["grid.front_dx_m"] = g.front_dx_m * g.front_n / args.grid
        over["grid.front_n"] = args.grid
        over["grid.ring_n"] = args.grid
    return cfg.override(**over) if over else cfg


def _default_preset(command: str) -> str:
    return {"generate": "fig1", "witness": "qubit-paper", "chsh": "qubit-paper"}.get(
        command, "methods")


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_spectrum(path: Path, spectrum, l_max: int = 30) -> None:
    with open(path, "w") as fh:
        fh.write("l,power,phase_rad\n")
        for l, p, ph in zip(spectrum.l, spectrum.normalized, spectrum.phase):
            if abs(l) > l_max:
                continue
            fh.write(f"{int(l)},{float(p)!r},{float(ph)!r}\n")


# -- commands ----------------------------------------------------------------

def cmd_generate(cfg: RunConfig, args) -> dict:
    from .pipeline import generate_at, run_superposition
    setup = cfg.setup()
    out = _outdir(cfg)
    ring = setup.ring
    width, height = cfg.scan_slit_width_m, cfg.scan_slit_height_m
    doc = {"schema": "oamsim.generate/1", "preset": cfg.name, "pitch_m": setup.pitch, "slope": None}

    if args.scan:
        lo, hi = args.scan
        pts = [generate_at(k * setup.pitch, setup, width, height) for k in range(lo, hi + 1)]
        doc["mode"] = "scan"
        doc["points"] = [_point(p) for p in pts]
        x = np.array([p.position_pitch for p in pts])
        y = np.array([p.spectrum.mean for p in pts])
        doc["slope"] = float(np.polyfit(x, y, 1)[0]) if len(pts) > 1 else None
        with open(out / "scan.csv", "w") as fh:
            fh.write("position_pitch,dominant_l,mean_l,sorter_loss\n")
            for p in pts:
                fh.write(f"{p.position_pitch!r},{p.spectrum.dominant},{p.spectrum.mean!r},"
                         f"{p.loss!r}\n")
    elif args.l is not None or args.position is not None:
        pos = float(args.l if args.l is not None else args.position)
        p = generate_at(pos * setup.pitch, setup, width, height)
        doc["mode"] = "single"
        doc["points"] = [_point(p)]
        _write_spectrum(out / "spectrum.csv", p.spectrum)
        write_pgm(out / "image_near.pgm", p.near_image, ring)
        write_pgm(out / "image_far.pgm", p.far_image)
    else:
        r = run_superposition(cfg.slits, setup)
        doc["mode"] = "superposition"
        doc["points"] = [{"position_pitch": float(np.mean([s.center_x for s in cfg.slits.slits])
                                                  / setup.pitch),
                          "dominant_l": r.spectrum.dominant, "mean_l": r.spectrum.mean,
                          "lobes": r.lobes, "uniformity": r.uniformity,
                          "ring_radius_m": r.ring_radius}]
        _write_spectrum(out / "spectrum.csv", r.spectrum)
        write_pgm(out / "image_near.pgm", r.near_image, ring)
        write_pgm(out / "image_far.pgm", r.far_image)
    write_json(out / "generate.json", doc, "generate")
    return doc


def _point(p) -> dict:
    return {"position_m": p.position, "position_pitch": p.position_pitch,
            "dominant_l": p.spectrum.dominant, "mean_l": p.spectrum.mean,
            "sorter_loss": p.loss}


def cmd_witness(cfg: RunConfig, args) -> dict:
    from .experiments import run_witness, transfer_matrix
    out = _outdir(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run = run_witness(cfg, calibrated=args.noise_calibrated, white=args.white,
                          optimize_target=args.optimize_target)
    if cfg.transfer_model == "simulated":
        write_json(out / "transfer.json", transfer_matrix(cfg).to_json_dict(), "transfer")
    bp.write_counts_csv(out / "counts.csv", run.records)
    doc = run.report.to_json_dict()
    write_json(out / "witness_report.json", doc, "witness_report")
    return doc


def cmd_chsh(cfg: RunConfig, args) -> dict:
    from .experiments import run_chsh, white_level
    out = _outdir(cfg)
    res, records = run_chsh(cfg, analytic=args.analytic, calibrated=args.noise_calibrated,
                            white=args.white)
    doc = res.to_json_dict()
    doc.update({"mode": "analytic" if args.analytic else "sampled", "preset": cfg.name,
                "white_noise": white_level(cfg, args.noise_calibrated, args.white),
                "seed": cfg.seed})
    if records:
        bp.write_counts_csv(out / "chsh_counts.csv", records)
    write_json(out / "chsh.json", doc, "chsh")
    return doc


def cmd_calibrate(cfg: RunConfig, args) -> dict:
    from .experiments import calibrate
    w = calibrate(cfg)
    doc = {"preset": cfg.name, "target_fidelity": cfg.noise.target_fidelity,
           "calibrated_white": w, "shipped": cfg.noise.calibrated_white}
    print(json.dumps(doc, sort_keys=True))
    return doc


def cmd_selftest(cfg: RunConfig, args) -> dict:
    from . import selftest
    checks = selftest.run_all(cfg, quick=args.quick)
    doc = {"schema": "oamsim.selftest/1",
           "checks": [{"name": n, "ok": bool(ok), "detail": d} for n, ok, d in checks],
           "passed": sum(1 for _, ok, _ in checks if ok),
           "failed": sum(1 for _, ok, _ in checks if not ok)}
    write_json(_outdir(cfg) / "selftest.json", doc, "selftest")
    for n, ok, d in checks:
        log.info("%s %s: %s", "PASS" if ok else "FAIL", n, d)
    return doc


COMMANDS = {"generate": cmd_generate, "witness": cmd_witness, "chsh": cmd_chsh,
            "calibrate": cmd_calibrate, "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--preset", help=f"named preset ({', '.join(preset_names())})")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--grid", type=int, help="grid size N (front and ring planes)")
    common.add_argument("--quiet", action="store_true")

    p = _Parser(prog="oamsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="classical OAM generation")
    pos = g.add_mutually_exclusive_group()
    pos.add_argument("--l", type=int, help="slit at l pitches (integer OAM order)")
    pos.add_argument("--position", type=float, help="slit position in units of the pitch")
    pos.add_argument("--scan", type=int, nargs=2, metavar=("LMIN", "LMAX"),
                     help="scan integer positions LMIN..LMAX")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--noise-calibrated", action="store_true",
                       help="use the preset's shipped white-noise calibration")
    noise.add_argument("--white", type=float, help="white-noise weight in [0, 1]")

    w = sub.add_parser("witness", parents=[common, noise], help="Schmidt-number witness")
    w.add_argument("--optimize-target", action="store_true")

    c = sub.add_parser("chsh", parents=[common, noise], help="CHSH test")
    c.add_argument("--analytic", action="store_true", help="exact probabilities, no sampling")

    sub.add_parser("calibrate", parents=[common], help="recompute the noise calibration")
    s = sub.add_parser("selftest", parents=[common], help="internal consistency checks")
    s.add_argument("--quick", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        if getattr(args, "white", None) is not None and not 0 <= args.white <= 1:
            raise ConfigError("--white must lie in [0, 1]")
    except ConfigError as e:
        _emit_error("ConfigError", str(e), EXIT_CONFIG)
        return EXIT_CONFIG
    try:
        doc = COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        _emit_error("ConfigError", str(e), EXIT_CONFIG)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, KeyError) as e:
        _emit_error(type(e).__name__, str(e), EXIT_DOMAIN)
        return EXIT_DOMAIN
    if args.command == "selftest" and doc["failed"]:
        return EXIT_DOMAIN
    if not args.quiet and args.command != "calibrate":
        print(json.dumps(_summary(args.command, doc), sort_keys=True))
    return EXIT_OK


def _summary(command: str, doc: dict) -> dict:
    keys = {"witness": ("fidelity", "sigma_fidelity", "certified_dimension", "significance"),
            "chsh": ("S", "sigma", "violation_sigma", "total_counts"),
            "selftest": ("passed", "failed"),
            "generate": ("mode", "slope")}[command]
    out = {k: doc.get(k) for k in keys}
    if command == "generate":
        out["points"] = [{k: p[k] for k in ("position_pitch", "dominant_l", "mean_l")}
                         for p in doc["points"]]
    return _jsonable(out)


if __name__ == "__main__":
    sys.exit(main())

"""Run configuration: JSON files validated against a shipped schema, with preset inheritance."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .elements import Slit, SlitArray, SorterSpec
from .fieldgrid import GridSpec
from .pipeline import OpticalSetup

CONFIG_SCHEMA = "oamsim.config/1"


class ConfigError(ValueError):
    pass


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("oamsim").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc: dict, name: str) -> None:
    try:
        jsonschema.validate(doc, load_schema(name))
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{name}: {where}: {e.message}") from None


def preset_names() -> list[str]:
    d = resources.files("oamsim").joinpath("presets")
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".json"))


def _read_preset(name: str) -> dict:
    p = resources.files("oamsim").joinpath("presets", f"{name}.json")
    if not p.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(p.read_text())


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(doc: dict, _seen=()) -> dict:
    """Expand ``extends`` chains (presets by name) into one flat document."""
    doc = dict(doc)
    parent = doc.pop("extends", None)
    if parent is None:
        return doc
    if parent in _seen:
        raise ConfigError(f"preset inheritance cycle through {parent!r}")
    return _merge(resolve(_read_preset(parent), _seen + (parent,)), doc)


@dataclass(frozen=True)
class GridConfig:
    front_n: int
    front_dx_m: float
    ring_n: int
    ring_window_m: float
    wavelength_m: float


@dataclass(frozen=True)
class OpticsConfig:
    lens_focal_m: float
    pitch_m: float
    sorter_b_m: float
    sorter_f_m: float
    sorter_mode: str
    illumination_waist_m: float | None
    camera_focal_m: float


@dataclass(frozen=True)
class StateConfig:
    amplitudes: tuple[float, ...] | None
    phases_rad: tuple[float, ...]
    slit_indices: tuple[int, ...]
    pump_fwhm_m: float


@dataclass(frozen=True)
class NoiseConfig:
    white: float
    dephase: float
    target_fidelity: float | None
    calibrated_white: float | None


@dataclass(frozen=True)
class CountsConfig:
    rate_pairs_per_s: float
    witness_time_s: float
    chsh_time_s: float
    mc_trials: int


@dataclass(frozen=True)
class RunConfig:
    name: str
    grid: GridConfig
    optics: OpticsConfig
    slits: SlitArray
    scan_slit_width_m: float
    scan_slit_height_m: float
    transfer_model: str
    transfer_l_range: tuple[int, int]
    transfer_p_max: int
    state: StateConfig
    noise: NoiseConfig
    counts: CountsConfig
    seed: int
    output_dir: str
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    # -- construction --------------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        d = resolve(doc)
        validate(d, "config")
        g, o, s, n, c, t = (d["grid"], d["optics"], d["state"], d["noise"], d["counts"],
                            d["transfer"])
        try:
            slits = SlitArray.from_dict(d["slits"])
        except ValueError as e:
            raise ConfigError(f"slits: {e}") from None
        return cls(
            name=d.get("name", "custom"),
            grid=GridConfig(g["front_n"], g["front_dx_m"], g["ring_n"], g["ring_window_m"],
                            g["wavelength_m"]),
            optics=OpticsConfig(o["lens_focal_m"], o["pitch_m"], o["sorter_b_m"],
                                o["sorter_f_m"], o["sorter_mode"], o["illumination_waist_m"],
                                o["camera_focal_m"]),
            slits=slits,
            scan_slit_width_m=d["scan"]["slit_width_m"],
            scan_slit_height_m=d["scan"]["slit_height_m"],
            transfer_model=t["model"],
            transfer_l_range=(t["l_min"], t["l_max"]),
            transfer_p_max=t["p_max"],
            state=StateConfig(None if s.get("amplitudes") is None else tuple(s["amplitudes"]),
                              tuple(s.get("phases_rad", ())), tuple(s["slit_indices"]),
                              s["pump_fwhm_m"]),
            noise=NoiseConfig(n["white"], n["dephase"], n.get("target_fidelity"),
                              n.get("calibrated_white")),
            counts=CountsConfig(c["rate_pairs_per_s"], c["witness_time_s"], c["chsh_time_s"],
                                c["mc_trials"]),
            seed=d["seed"],
            output_dir=d["output_dir"],
            raw=d,
        )

    @classmethod
    def preset(cls, name: str) -> "RunConfig":
        return cls.from_dict({"extends": name})

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(doc)

    def override(self, **changes) -> "RunConfig":
        """New config with dotted-path overrides, e.g. ``{"noise.white": 0.1}``."""
        doc = copy.deepcopy(self.raw)
        for key, val in changes.items():
            node = doc
            *path, last = key.split(".")
            for p in path:
                node = node[p]
            node[last] = val
        return RunConfig.from_dict(doc)

    # -- derived objects -----------------------------------------------------
    def front_grid(self) -> GridSpec:
        g = self.grid
        return GridSpec(g.front_n, g.front_n, g.front_dx_m, g.front_dx_m, g.wavelength_m)

    def ring_grid(self) -> GridSpec:
        g = self.grid
        return GridSpec.square(g.ring_n, g.ring_window_m, g.wavelength_m)

    def setup(self) -> OpticalSetup:
        o = self.optics
        sorter = SorterSpec.from_pitch(o.pitch_m, o.lens_focal_m, self.grid.wavelength_m,
                                       o.sorter_b_m, o.sorter_f_m, o.sorter_mode)
        return OpticalSetup(self.front_grid(), self.ring_grid(), o.lens_focal_m, sorter,
                            o.illumination_waist_m, o.camera_focal_m)

    def state_slits(self) -> SlitArray:
        idx = self.state.slit_indices
        if max(idx) >= len(self.slits):
            raise ConfigError("state.slit_indices refer to missing slits")
        return SlitArray(tuple(self.slits.slits[i] for i in idx), self.slits.height)

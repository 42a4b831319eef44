"""Path-entangled photon pairs, their transfer to OAM, noise and coincidence counts.

Photon A is the H-polarized member of a pair and photon B the V-polarized one;
polarization plays no other role. Single-photon mode labels are OAM orders plus
one lumped ``SINK`` mode that collects everything the fibre filter rejects.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.special import erf

SINK = "sink"


class EmptySupportError(ValueError):
    pass


@dataclass(frozen=True)
class PathStateSpec:
    """Slit amplitudes (a, b[, c]) and phases relative to the first slit."""
    amplitudes: tuple[float, ...]
    phases: tuple[float, ...] = ()

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amplitudes)
        phases = tuple(float(p) for p in self.phases) or (0.0,) * (len(amps) - 1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "phases", phases)
        if len(amps) < 2:
            raise ValueError("need at least two slits")
        if len(phases) != len(amps) - 1:
            raise ValueError("need one phase per slit after the first")
        if min(amps) < 0:
            raise ValueError("amplitudes must be non-negative")
        if abs(sum(a * a for a in amps) - 1.0) > 1e-9:
            raise ValueError(f"amplitudes are not normalized: sum a^2 = "
                             f"{sum(a * a for a in amps):.12g}")

    @classmethod
    def normalized(cls, amplitudes, phases=()) -> "PathStateSpec":
        a = np.asarray(amplitudes, dtype=float)
        return cls(tuple(a / np.linalg.norm(a)), tuple(phases))

    @property
    def n_slits(self) -> int:
        return len(self.amplitudes)

    @property
    def coefficients(self) -> np.ndarray:
        ph = np.concatenate([[0.0], self.phases])
        return np.asarray(self.amplitudes) * np.exp(1j * ph)


def pump_amplitudes(centers: Sequence[float], width: float, fwhm: float = 1e-3
                    ) -> tuple[float, ...]:
    """Normalized pair amplitudes for slits under a Gaussian pump of given intensity FWHM.

    The pair amplitude at a slit is the pump field integrated over the slit.
    """
    sigma_field = np.sqrt(2) * fwhm / (2 * np.sqrt(2 * np.log(2)))
    s = sigma_field * np.sqrt(2)
    c = np.asarray(centers, dtype=float)
    amps = erf((c + width / 2) / s) - erf((c - width / 2) / s)
    return tuple(amps / np.linalg.norm(amps))


@dataclass(frozen=True, eq=False)
class PathState:
    """Pure two-photon state sum_k c_k |S_k>_H |S_k>_V."""
    coefficients: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.coefficients)

    @property
    def vector(self) -> np.ndarray:
        return self.matrix.ravel()


def build_path_state(spec: PathStateSpec) -> PathState:
    return PathState(spec.coefficients)


@dataclass(frozen=True, eq=False)
class BiphotonState:
    """Density matrix over ``labels x labels`` (photon A index major)."""
    labels: tuple
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        rho = np.asarray(self.rho, dtype=np.complex128)
        d = len(self.labels) ** 2
        if rho.shape != (d, d):
            raise ValueError(f"rho must be {d}x{d}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise ValueError("rho is not Hermitian")
        if abs(np.trace(rho).real - 1) > 1e-9:
            raise ValueError("rho does not have unit trace")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def pure(cls, labels, psi: np.ndarray) -> "BiphotonState":
        psi = np.asarray(psi, dtype=np.complex128).ravel()
        psi = psi / np.linalg.norm(psi)
        rho = np.outer(psi, psi.conj())
        return cls(labels, 0.5 * (rho + rho.conj().T))

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, la, lb) -> int:
        return self.labels.index(la) * self.dim + self.labels.index(lb)

    def element(self, bra: tuple, ket: tuple) -> complex:
        return complex(self.rho[self.index(*bra), self.index(*ket)])

    def population(self, la, lb) -> float:
        return self.element((la, lb), (la, lb)).real

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.rho)[0])

    def postselect(self) -> "BiphotonState":
        """Condition on both photons being found in a non-sink mode."""
        keep_labels = tuple(l for l in self.labels if l != SINK)
        idx = [self.index(a, b) for a in keep_labels for b in keep_labels]
        sub = self.rho[np.ix_(idx, idx)]
        tr = np.trace(sub).real
        if tr < 1e-12:
            raise EmptySupportError("no population left after postselection")
        sub = sub / tr
        return BiphotonState(keep_labels, 0.5 * (sub + sub.conj().T))

    def fidelity(self, target: np.ndarray) -> float:
        """<psi|rho|psi> for a pure target given as a labels x labels coefficient matrix."""
        psi = np.asarray(target, dtype=np.complex128).ravel()
        psi = psi / np.linalg.norm(psi)
        return float(np.real(psi.conj() @ self.rho @ psi))


def transfer_to_oam(path: PathState, transfer, labels: Sequence | None = None,
                    sink: bool = True) -> BiphotonState:
    """Send both photons of every path term through the slit -> mode map.

    ``transfer`` is a ``TransferMatrix`` (its fibre-detection amplitudes are
    used) or a plain ``(len(labels), n_slits)`` array. Amplitude not captured
    by ``labels`` goes to the sink mode of that photon.
    """
    if hasattr(transfer, "detection_map"):
        labels = list(labels) if labels is not None else sorted(set(transfer.designed_l))
        t = transfer.detection_map(labels)
    else:
        if labels is None:
            raise ValueError("labels are required with a bare transfer array")
        t = np.asarray(transfer, dtype=np.complex128)
        labels = list(labels)
    n = len(path.coefficients)
    if t.shape[1] < n:
        raise ValueError(f"transfer covers {t.shape[1]} slits, state uses {n}")
    t = t[:, :n]
    if sink:
        leftover = np.sqrt(np.clip(1.0 - np.sum(np.abs(t) ** 2, axis=0), 0.0, None))
        t = np.vstack([t, leftover[None, :]])
        labels = labels + [SINK]
    m = t @ np.diag(path.coefficients) @ t.T
    norm = np.linalg.norm(m)
    if norm < 1e-6:
        raise EmptySupportError(f"post-transfer norm {norm:.3g} is below 1e-6")
    return BiphotonState.pure(labels, m / norm)


def apply_noise(state: BiphotonState, white: float = 0.0, dephase: float = 0.0
                ) -> BiphotonState:
    """rho -> (1 - white) D(rho) + white I / dim^2, D scaling coherences by (1 - dephase)."""
    if not (0 <= white <= 1 and 0 <= dephase <= 1):
        raise ValueError("noise parameters must lie in [0, 1]")
    rho = state.rho
    diag = np.diag(np.diag(rho))
    deph = (1 - dephase) * rho + dephase * diag
    n = rho.shape[0]
    out = (1 - white) * deph + white * np.eye(n) / n
    return BiphotonState(state.labels, 0.5 * (out + out.conj().T))


def aligned_target(state: BiphotonState, labels: Sequence, amplitudes: Sequence[float]
                   ) -> np.ndarray:
    """Target coefficient matrix sum_i a_i e^{i t_i} |ii>, phases matched to ``state``.

    The reference mode is the one with the largest amplitude.
    """
    amps = np.asarray(amplitudes, dtype=float)
    amps = amps / np.linalg.norm(amps)
    ref = labels[int(np.argmax(amps))]
    d = state.dim
    m = np.zeros((d, d), dtype=np.complex128)
    for l, a in zip(labels, amps):
        ph = np.angle(state.element((l, l), (ref, ref)))
        i = state.labels.index(l)
        m[i, i] = a * np.exp(1j * ph)
    return m


def calibrate_white_noise(state: BiphotonState, target: np.ndarray, fidelity: float,
                          postselect: bool = True, dephase: float = 0.0) -> float:
    """White-noise weight giving the requested fidelity, found by bisection."""
    def f(w):
        s = apply_noise(state, w, dephase)
        if postselect:
            s = s.postselect()
        return s.fidelity(target) - fidelity

    lo, hi = f(0.0), f(1.0)
    if lo < 0 or hi > 0:
        raise ValueError(f"fidelity {fidelity} not bracketed: F(0)={lo + fidelity:.4f}, "
                         f"F(1)={hi + fidelity:.4f}")
    return float(optimize.bisect(f, 0.0, 1.0, xtol=1e-12))


# -- measurements ------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementSetting:
    """Projector onto |l1> or (|l1> + e^{i phase} |l2>)/sqrt(2)."""
    l1: object
    l2: object = None
    phase: float = 0.0

    def vector(self, labels: Sequence) -> np.ndarray:
        labels = list(labels)
        v = np.zeros(len(labels), dtype=np.complex128)
        if self.l1 not in labels or (self.l2 is not None and self.l2 not in labels):
            raise ValueError(f"setting {self} not in basis {labels}")
        if self.l2 is None:
            v[labels.index(self.l1)] = 1.0
        else:
            v[labels.index(self.l1)] = 1 / np.sqrt(2)
            v[labels.index(self.l2)] = np.exp(1j * self.phase) / np.sqrt(2)
        return v


def coincidence_probability(state: BiphotonState, a: MeasurementSetting,
                            b: MeasurementSetting) -> float:
    v = np.kron(a.vector(state.labels), b.vector(state.labels))
    p = float(np.real(v.conj() @ state.rho @ v))
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class CountRecord:
    setting_a: MeasurementSetting
    setting_b: MeasurementSetting
    expected_rate: float
    count: int
    time_s: float
    seed: int


def sample_counts(state: BiphotonState, settings: Sequence[tuple[MeasurementSetting,
                  MeasurementSetting]], rate_scale: float, time: float, seed: int
                  ) -> list[CountRecord]:
    """Poisson coincidence counts for each setting pair.

    Record i draws from its own Philox stream keyed by (seed, i), so the result
    for a setting does not depend on how the sweep is split or ordered.
    """
    if rate_scale <= 0 or time <= 0:
        raise ValueError("rate and integration time must be positive")
    out = []
    for i, (a, b) in enumerate(settings):
        rate = rate_scale * coincidence_probability(state, a, b)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(i,))))
        n = int(rng.poisson(rate * time)) if rate > 0 else 0
        out.append(CountRecord(a, b, rate, n, time, seed))
    return out


COUNT_COLUMNS = ["setting_a_l1", "setting_a_l2", "phase_a", "setting_b_l1", "setting_b_l2",
                 "phase_b", "expected_rate", "count", "time_s", "seed"]


def _lab(v) -> str:
    return "" if v is None else str(v)


def write_counts_csv(path, records: Sequence[CountRecord]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COUNT_COLUMNS)
        for r in records:
            w.writerow([_lab(r.setting_a.l1), _lab(r.setting_a.l2), repr(float(r.setting_a.phase)),
                        _lab(r.setting_b.l1), _lab(r.setting_b.l2), repr(float(r.setting_b.phase)),
                        repr(float(r.expected_rate)), int(r.count), repr(float(r.time_s)),
                        int(r.seed)])
    return path


def _parse_label(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        return s


def read_counts_csv(path) -> list[CountRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [CountRecord(
        MeasurementSetting(_parse_label(r["setting_a_l1"]), _parse_label(r["setting_a_l2"]),
                           float(r["phase_a"])),
        MeasurementSetting(_parse_label(r["setting_b_l1"]), _parse_label(r["setting_b_l2"]),
                           float(r["phase_b"])),
        float(r["expected_rate"]), int(r["count"]), float(r["time_s"]), int(r["seed"]))
        for r in rows]

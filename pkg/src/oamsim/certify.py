"""Schmidt-number witness, fringe analysis, CHSH and Monte-Carlo error bars."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import linalg, optimize

from .biphoton import BiphotonState, CountRecord, MeasurementSetting


class MissingSubspaceError(KeyError):
    pass


class FitError(ValueError):
    pass


class ZeroCountsError(ValueError):
    pass


class BiasWarning(UserWarning):
    pass


class FidelityRangeWarning(UserWarning):
    pass


def _rng(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,))))


# -- Schmidt vectors ---------------------------------------------------------

@dataclass(frozen=True)
class SchmidtVector:
    values: tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(x) for x in self.values)
        object.__setattr__(self, "values", v)
        if not v or min(v) < 0:
            raise ValueError("Schmidt coefficients must be non-negative")
        if any(v[i] < v[i + 1] for i in range(len(v) - 1)):
            raise ValueError("Schmidt coefficients must be sorted in decreasing order")
        if abs(sum(x * x for x in v) - 1) > 1e-9:
            raise ValueError("Schmidt coefficients are not normalized")

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "SchmidtVector":
        a = np.sort(np.abs(np.asarray(amplitudes, dtype=float)))[::-1]
        return cls(tuple(a / np.linalg.norm(a)))

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values)

    @property
    def rank(self) -> int:
        return int(np.sum(self.array > 1e-12))


def schmidt_decompose(coefficients: np.ndarray):
    """Schmidt vector and local bases (U, Vh) of a pure state's coefficient matrix.

    Diagonal input keeps its own basis, with equal coefficients left in input order.
    """
    m = np.asarray(coefficients, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError("expected a coefficient matrix")
    norm = np.linalg.norm(m)
    if abs(norm - 1) > 1e-6:
        raise ValueError(f"state is not normalized (norm {norm:.6g})")
    if m.shape[0] == m.shape[1] and np.count_nonzero(m - np.diag(np.diag(m))) == 0:
        d = np.diag(m)
        order = np.argsort(-np.abs(d), kind="stable")
        n = len(d)
        u = np.eye(n, dtype=np.complex128)[:, order]
        phases = np.exp(1j * np.angle(d[order]))
        vh = (np.eye(n, dtype=np.complex128)[:, order] * phases).T
        return SchmidtVector(tuple(np.abs(d[order]))), u, vh
    u, s, vh = np.linalg.svd(m)
    s = s / np.linalg.norm(s)
    return SchmidtVector(tuple(s)), u, vh


def schmidt_bound(target: SchmidtVector, d: int) -> float:
    """Largest fidelity to ``target`` reachable by states of Schmidt number at most d."""
    if not 1 <= d <= target.dim:
        raise ValueError(f"d must lie in 1..{target.dim}")
    if d == target.dim:
        return 1.0
    return float(np.sum(target.array[:d] ** 2))


# -- fringes -----------------------------------------------------------------

@dataclass(frozen=True)
class FringeFit:
    """A sin^2((phi + offset)/2) + background, with 1-sigma errors."""
    visibility: float
    offset: float
    amplitude: float
    background: float
    sigma_visibility: float
    sigma_offset: float
    sigma_amplitude: float


def _largest_gap(phases: np.ndarray) -> float:
    p = np.sort(np.mod(phases, 2 * np.pi))
    gaps = np.diff(np.concatenate([p, [p[0] + 2 * np.pi]]))
    return float(gaps.max())


def fit_visibility(phases, counts, max_iter: int = 200, tol: float = 1e-8) -> FringeFit:
    """Weighted least-squares sin^2 fit of a coincidence fringe.

    The model is linear in (c0, c1, c2) after writing it as c0 + c1 cos(phi) +
    c2 sin(phi). Poisson weights come from the current model prediction and are
    refined until the coefficients settle (iteratively reweighted least squares).
    """
    phi = np.asarray(phases, dtype=float)
    y = np.asarray(counts, dtype=float)
    if phi.shape != y.shape or phi.size < 8:
        raise FitError("need at least 8 fringe samples")
    if _largest_gap(phi) > 0.5 * np.pi + 1e-9:
        raise FitError("fringe phases must span at least 1.5 pi")
    if np.any(y < 0):
        raise FitError("counts must be non-negative")
    total = y.sum()
    if total <= 0:
        raise FitError("fringe has no counts")

    x = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    floor = max(1e-3 * y.mean(), 1.0)      # variance below one count is not resolvable
    var = np.full_like(y, y.mean())
    coef = None
    for _ in range(max_iter):
        xtw = x.T / var
        cov = np.linalg.inv(xtw @ x)
        new = cov @ (xtw @ y)
        if coef is not None and np.max(np.abs(new - coef)) <= tol * max(abs(new[0]), 1e-300):
            coef = new
            break
        # half steps: plain updates can flip-flop when the fringe minimum sits near zero
        coef = new if coef is None else 0.5 * (coef + new)
        var = np.maximum(x @ coef, floor)
    else:
        raise FitError(f"fringe fit did not converge in {max_iter} iterations")
    c0, c1, c2 = coef
    r = math.hypot(c1, c2)
    if c0 <= 0:
        raise FitError("fitted mean level is not positive")
    if r <= 1e-12 * c0:
        return FringeFit(0.0, 0.0, 0.0, float(c0), math.sqrt(2.0 / total), math.pi, 0.0)

    vis = r / c0
    g_v = np.array([-r / c0 ** 2, c1 / (r * c0), c2 / (r * c0)])
    g_d = np.array([0.0, c2 / r ** 2, -c1 / r ** 2])
    g_a = np.array([0.0, 2 * c1 / r, 2 * c2 / r])
    return FringeFit(
        visibility=float(min(max(vis, 0.0), 1.0)),
        offset=float(np.mod(math.atan2(c2, -c1), 2 * np.pi)),
        amplitude=float(2 * r),
        background=float(c0 - r),
        sigma_visibility=float(math.sqrt(g_v @ cov @ g_v)),
        sigma_offset=float(math.sqrt(g_d @ cov @ g_d)),
        sigma_amplitude=float(math.sqrt(g_a @ cov @ g_a)),
    )


# -- measurement plans and their analysis ------------------------------------

FIG4_PHI1 = tuple(np.deg2rad([0.0, 90.0, 180.0, 270.0]))
FIG4_PHI2 = tuple(np.arange(16) * np.pi / 8)


def witness_settings(labels: Sequence, phi1=FIG4_PHI1, phi2=FIG4_PHI2
                     ) -> list[tuple[MeasurementSetting, MeasurementSetting]]:
    """All basis-pair settings, then a phase scan in every two-mode subspace."""
    out = [(MeasurementSetting(a), MeasurementSetting(b)) for a in labels for b in labels]
    for li, lj in itertools.combinations(labels, 2):
        for p1 in phi1:
            for p2 in phi2:
                out.append((MeasurementSetting(li, lj, float(p1)),
                            MeasurementSetting(li, lj, float(p2))))
    return out


@dataclass(frozen=True)
class SubspaceFringe:
    fit: FringeFit
    coherence_phase: float

    @property
    def visibility(self) -> float:
        return self.fit.visibility


@dataclass(frozen=True)
class VisibilitySet:
    labels: tuple
    populations: Mapping            # label -> rho_{ll,ll}
    sigma_populations: Mapping
    subspaces: Mapping              # (li, lj) -> SubspaceFringe
    anticorrelated: float           # total population outside |ll>
    cross: Mapping = field(default_factory=dict)    # (li, lj) -> rho_{ij,ij} + rho_{ji,ji}

    def __post_init__(self):
        if sum(self.populations.values()) > 1 + 1e-9:
            raise ValueError("populations exceed unity")
        for s in self.subspaces.values():
            if not 0 <= s.visibility <= 1:
                raise ValueError("visibility outside [0, 1]")


def _counts_array(records: Sequence[CountRecord]) -> np.ndarray:
    return np.array([r.count for r in records], dtype=float)


def analyze_counts(records: Sequence[CountRecord], labels: Sequence,
                   counts: np.ndarray | None = None) -> VisibilitySet:
    """Populations from basis coincidences and one joint fringe fit per subspace.

    Fringe points are pooled over the analyzer-A settings by fitting against
    phi_A + phi_B, the phase the coherence term depends on.
    """
    labels = tuple(labels)
    c = _counts_array(records) if counts is None else np.asarray(counts, dtype=float)
    basis = {}
    fringes: dict = {}
    for r, n in zip(records, c):
        a, b = r.setting_a, r.setting_b
        if a.l2 is None and b.l2 is None:
            basis[(a.l1, b.l1)] = basis.get((a.l1, b.l1), 0.0) + n
        elif a.l2 is not None and b.l2 is not None and (a.l1, a.l2) == (b.l1, b.l2):
            fringes.setdefault((a.l1, a.l2), []).append((a.phase, b.phase, n))
    total = sum(basis.values())
    if total <= 0:
        raise ZeroCountsError("no basis coincidences recorded")
    pops = {l: basis.get((l, l), 0.0) / total for l in labels}
    sig = {l: math.sqrt(max(basis.get((l, l), 0.0), 1.0)) / total for l in labels}
    anti = 1.0 - sum(pops.values())
    subspaces = {}
    for key, pts in fringes.items():
        p1 = np.array([p[0] for p in pts])
        p2 = np.array([p[1] for p in pts])
        fit = fit_visibility(p1 + p2, [p[2] for p in pts])
        chi = float(np.mod(fit.offset - np.pi, 2 * np.pi))
        subspaces[key] = SubspaceFringe(fit, chi)
    cross = {(a, b): (basis.get((a, b), 0.0) + basis.get((b, a), 0.0)) / total
             for a, b in itertools.combinations(labels, 2)}
    return VisibilitySet(labels, pops, sig, subspaces, anti, cross)


def estimate_matrix_elements(data: VisibilitySet, anticorrelated: bool = True) -> np.ndarray:
    """Matrix of <ii|rho|jj> estimates indexed by position in ``data.labels``.

    |<ii|rho|jj>| = V_ij (rho_ii + rho_jj + rho_ij + rho_ji) / 2 with the fringe
    phase as argument. The anti-correlated terms are the fringe's mean level
    beyond the correlated populations; ``anticorrelated=False`` drops them.
    """
    labels = data.labels
    if not anticorrelated and data.anticorrelated > 0.01:
        warnings.warn(f"anti-correlated population {data.anticorrelated:.3%} exceeds 1%; "
                      "coherence estimates are biased", BiasWarning, stacklevel=2)
    n = len(labels)
    m = np.zeros((n, n), dtype=np.complex128)
    for i, li in enumerate(labels):
        if li not in data.populations:
            raise MissingSubspaceError(f"population of {li!r} missing")
        m[i, i] = data.populations[li]
    for i, j in itertools.combinations(range(n), 2):
        key = (labels[i], labels[j])
        if key in data.subspaces:
            s = data.subspaces[key]
            chi = s.coherence_phase
        elif key[::-1] in data.subspaces:
            s = data.subspaces[key[::-1]]
            chi = -s.coherence_phase
        else:
            raise MissingSubspaceError(f"no fringe for subspace {key}")
        extra = 0.0
        if anticorrelated:
            extra = data.cross.get(key, data.cross.get(key[::-1], 0.0))
        mag = s.visibility * (m[i, i].real + m[j, j].real + extra) / 2
        m[i, j] = mag * np.exp(1j * chi)
        m[j, i] = np.conj(m[i, j])
    return m


def correlated_block(state: BiphotonState, labels: Sequence) -> np.ndarray:
    """Exact <ii|rho|jj> of a state, for comparison with the estimates."""
    idx = [state.index(l, l) for l in labels]
    return state.rho[np.ix_(idx, idx)].copy()


# -- fidelity and the witness ------------------------------------------------

@dataclass(frozen=True)
class TargetState:
    """sum_i lambda_i e^{i theta_i} |ii> over ``labels``."""
    labels: tuple
    amplitudes: tuple[float, ...]
    phases: tuple[float, ...] = ()

    def __post_init__(self):
        a = np.abs(np.asarray(self.amplitudes, dtype=float))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "amplitudes", tuple(a / np.linalg.norm(a)))
        ph = tuple(float(p) for p in self.phases) or (0.0,) * len(a)
        if len(ph) != len(a) or len(self.labels) != len(a):
            raise ValueError("labels, amplitudes and phases must have equal length")
        object.__setattr__(self, "phases", ph)

    @property
    def schmidt(self) -> SchmidtVector:
        return SchmidtVector.from_amplitudes(self.amplitudes)

    @property
    def coefficients(self) -> np.ndarray:
        return np.asarray(self.amplitudes) * np.exp(1j * np.asarray(self.phases))

    def aligned(self, elements: np.ndarray) -> "TargetState":
        """Same amplitudes with phases taken from the estimated coherences."""
        ref = int(np.argmax(self.amplitudes))
        ph = tuple(float(np.angle(elements[i, ref])) if i != ref else 0.0
                   for i in range(len(self.amplitudes)))
        return TargetState(self.labels, self.amplitudes, ph)

    def matrix(self, basis: Sequence) -> np.ndarray:
        basis = list(basis)
        m = np.zeros((len(basis), len(basis)), dtype=np.complex128)
        for l, t in zip(self.labels, self.coefficients):
            i = basis.index(l)
            m[i, i] = t
        return m


def fidelity_value(elements: np.ndarray, target: TargetState) -> float:
    t = target.coefficients
    return float(np.real(np.conj(t) @ elements @ t))


def fidelity(elements: np.ndarray, target: TargetState, samples: np.ndarray | None = None
             ) -> tuple[float, float]:
    """F = sum_ij conj(t_i) t_j <ii|rho|jj>, with sigma from resampled element sets."""
    f = fidelity_value(elements, target)
    if not 0 <= f <= 1:
        warnings.warn(f"fidelity estimate {f:.4f} outside [0, 1]; clipped",
                      FidelityRangeWarning, stacklevel=2)
        f = min(max(f, 0.0), 1.0)
    sigma = 0.0
    if samples is not None:
        t = target.coefficients
        vals = np.real(np.einsum("i,nij,j->n", np.conj(t), samples, t))
        sigma = float(np.std(vals, ddof=1))
    return f, sigma


@dataclass(frozen=True)
class WitnessReport:
    target: SchmidtVector
    fidelity: float
    sigma: float
    bounds: dict
    certified_dimension: int
    significance: dict
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "schema": "oamsim.witness/1",
            "target_lambda": list(self.target.values),
            "fidelity": self.fidelity,
            "sigma_fidelity": self.sigma,
            "bounds": {str(d): v for d, v in self.bounds.items()},
            "certified_dimension": self.certified_dimension,
            "significance": {str(d): v for d, v in self.significance.items()},
            **self.extra,
        }


def witness_verdict(f: float, sigma: float, target: SchmidtVector, extra=None) -> WitnessReport:
    bounds = {d: schmidt_bound(target, d) for d in range(1, target.dim)}
    exceeded = [d for d, b in bounds.items() if f > b]
    certified = 1 + max(exceeded) if exceeded else 1
    sig = {d: ((f - b) / sigma if sigma > 0 else None) for d, b in bounds.items()}
    return WitnessReport(target, float(f), float(sigma), bounds, certified, sig, dict(extra or {}))


# -- Monte-Carlo errors ------------------------------------------------------

def error_mc(counts, estimator: Callable[[np.ndarray], float], trials: int = 1000,
             seed: int = 0) -> float:
    """Spread of ``estimator`` over Poisson resamplings of the observed counts."""
    if trials < 100:
        raise ValueError("at least 100 Monte-Carlo trials are required")
    vals = mc_resample(counts, estimator, trials, seed)
    return float(np.std(vals, axis=0, ddof=1))


def mc_resample(counts, estimator: Callable, trials: int, seed: int) -> np.ndarray:
    c = np.asarray(counts, dtype=float)
    return np.array([estimator(_rng(seed, t).poisson(c).astype(float)) for t in range(trials)])


def element_samples(records: Sequence[CountRecord], labels: Sequence, trials: int = 500,
                    seed: int = 0) -> np.ndarray:
    """Resampled <ii|rho|jj> matrices, shape (trials, D, D)."""
    def est(c):
        return estimate_matrix_elements(analyze_counts(records, labels, c))
    return mc_resample(_counts_array(records), est, trials, seed)


def best_target(elements: np.ndarray, samples: np.ndarray, labels: Sequence, d: int,
                start: Sequence[float]) -> TargetState:
    """Target amplitudes maximizing the significance (F - f_d)/sigma at bound d."""
    def target_of(x):
        amps = np.abs(np.asarray(x, dtype=float))
        return TargetState(labels, amps / np.linalg.norm(amps)).aligned(elements)

    def cost(x):
        if np.linalg.norm(x) == 0:
            return np.inf
        t = target_of(x)
        f, s = fidelity(elements, t, samples)
        bound = schmidt_bound(t.schmidt, d)
        return -(f - bound) / s if s > 0 else np.inf

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FidelityRangeWarning)
        res = optimize.minimize(cost, np.asarray(start, dtype=float), method="Nelder-Mead",
                                options={"xatol": 1e-4, "fatol": 1e-6, "maxiter": 400})
    return target_of(res.x)


# -- brute-force check of the bound ------------------------------------------

def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return linalg.expm(0.5j * (h + h.conj().T) * np.pi)


def _scrambled(target: SchmidtVector, rng) -> np.ndarray:
    n = target.dim
    return random_unitary(n, rng) @ np.diag(target.array) @ random_unitary(n, rng).T


def _overlap_rank_d(psi: np.ndarray, u: np.ndarray, w: np.ndarray) -> float:
    phi = u @ (u.conj().T @ psi @ w.conj()) @ w.T
    nrm = np.linalg.norm(phi)
    if nrm == 0:
        return 0.0
    return float(abs(np.vdot(phi, psi)) ** 2 / nrm ** 2)


def _alternating(psi, d, rng, tol=1e-6, max_iter=2000):
    n = psi.shape[0]
    w = random_unitary(n, rng)[:, :d]
    last = -1.0
    for _ in range(max_iter):
        u, _ = np.linalg.qr(psi @ w.conj())
        w, _ = np.linalg.qr(psi.T @ u.conj())
        val = _overlap_rank_d(psi, u, w)
        if abs(val - last) < tol * 1e-6:
            break
        last = val
    return val


def _gradient(psi, d, rng, tol=1e-6):
    n = psi.shape[0]

    def unpack(z):
        z = z[: 2 * n * d] + 1j * z[2 * n * d:]
        return z[: n * d].reshape(n, d), z[n * d:].reshape(n, d)

    def cost(z):
        x, y = unpack(z)
        c = x @ y.T
        nc = np.vdot(c, c).real
        ov = np.vdot(c, psi)
        val = abs(ov) ** 2 / nc
        g_c = (ov.conjugate() * psi - val * c) / nc        # d val / d conj(C) up to 2
        gx = g_c @ y.conj()
        gy = g_c.T @ x.conj()
        g = np.concatenate([gx.ravel(), gy.ravel()])
        return -val, -2 * np.concatenate([g.real, g.imag])

    x0 = random_unitary(n, rng)[:, :d]
    y0 = random_unitary(n, rng)[:, :d]
    z0 = np.concatenate([x0.ravel(), y0.ravel()])
    z0 = np.concatenate([z0.real, z0.imag])
    res = optimize.minimize(cost, z0, jac=True, method="L-BFGS-B",
                            options={"gtol": tol * 1e-4, "ftol": 1e-15, "maxiter": 2000})
    return -res.fun


def oracle_max_overlap(target: SchmidtVector, d: int, restarts: int = 200, seed: int = 0,
                       method: str = "alternating", scramble: bool = True) -> float:
    """Best-of-restarts max |<phi_d|psi>|^2 over states of Schmidt rank at most d.

    ``psi`` is the target dressed with random local unitaries so the search
    cannot exploit its diagonal form. Each restart uses its own random stream.
    """
    if not 1 <= d < target.dim:
        raise ValueError(f"d must lie in 1..{target.dim - 1}")
    psi = _scrambled(target, _rng(seed, 0)) if scramble else np.diag(target.array).astype(complex)
    run = {"alternating": _alternating, "gradient": _gradient}[method]
    return max(run(psi, d, _rng(seed, k + 1)) for k in range(restarts))


# -- CHSH --------------------------------------------------------------------

@dataclass(frozen=True)
class CHSHSettings:
    subspace: tuple
    alpha: float = 0.0
    alpha_prime: float = np.pi / 2
    beta: float = np.pi / 4
    beta_prime: float = -np.pi / 4

    @classmethod
    def optimal(cls, subspace, coherence_phase: float = 0.0) -> "CHSHSettings":
        """Settings maximizing S when E depends on alpha + beta + coherence phase."""
        return cls(tuple(subspace), -coherence_phase, -coherence_phase + np.pi / 2,
                   np.pi / 4, -np.pi / 4)

    def pairs(self) -> list[tuple[float, float, int]]:
        """(phase A, phase B, sign in S) for the four correlators."""
        return [(self.alpha, self.beta, 1), (self.alpha_prime, self.beta, -1),
                (self.alpha, self.beta_prime, 1), (self.alpha_prime, self.beta_prime, 1)]

    def measurement_plan(self) -> list[tuple[MeasurementSetting, MeasurementSetting]]:
        l1, l2 = self.subspace
        out = []
        for pa, pb, _ in self.pairs():
            for da in (0.0, np.pi):
                for db in (0.0, np.pi):
                    out.append((MeasurementSetting(l1, l2, float(np.mod(pa + da, 2 * np.pi))),
                                MeasurementSetting(l1, l2, float(np.mod(pb + db, 2 * np.pi)))))
        return out


@dataclass(frozen=True)
class CHSHResult:
    settings: CHSHSettings
    correlators: tuple[float, ...]
    s: float
    sigma: float
    total_counts: float

    def to_json_dict(self) -> dict:
        st = self.settings
        return {
            "schema": "oamsim.chsh/1",
            "subspace": list(st.subspace),
            "settings_rad": {"alpha": st.alpha, "alpha_prime": st.alpha_prime,
                             "beta": st.beta, "beta_prime": st.beta_prime},
            "correlators": list(self.correlators),
            "S": self.s,
            "sigma": self.sigma,
            "total_counts": self.total_counts,
            "violation_sigma": ((self.s - 2) / self.sigma) if self.sigma > 0 else None,
        }


def _s_from_quads(quads: np.ndarray) -> tuple[float, tuple]:
    """quads: (4 correlators, 4 outcomes ++,+-,-+,--)."""
    tot = quads.sum(axis=1)
    if np.any(tot <= 0):
        raise ZeroCountsError("a CHSH correlator has zero total counts")
    e = (quads[:, 0] - quads[:, 1] - quads[:, 2] + quads[:, 3]) / tot
    s = abs(e[0] - e[1] + e[2] + e[3])
    return float(s), tuple(float(v) for v in e)


def chsh_value(source, settings: CHSHSettings, trials: int = 1000, seed: int = 0
               ) -> CHSHResult:
    """S from a state (exact probabilities) or from counts measured with
    ``settings.measurement_plan()`` in plan order."""
    plan = settings.measurement_plan()
    if isinstance(source, BiphotonState):
        from .biphoton import coincidence_probability
        p = np.array([coincidence_probability(source, a, b) for a, b in plan])
        s, e = _s_from_quads(p.reshape(4, 4))
        return CHSHResult(settings, e, s, 0.0, 0.0)
    counts = np.asarray(source if not isinstance(source[0], CountRecord)
                        else _counts_array(source), dtype=float)
    if counts.shape != (16,):
        raise ValueError("expected 16 counts in measurement-plan order")
    if counts.sum() <= 0:
        raise ZeroCountsError("no CHSH counts")
    s, e = _s_from_quads(counts.reshape(4, 4))
    sigma = error_mc(counts, lambda c: _s_from_quads(c.reshape(4, 4))[0], trials, seed)
    return CHSHResult(settings, e, s, sigma, float(counts.sum()))


def product_chsh(a_vec, b_vec, settings: CHSHSettings) -> float:
    """Exact S for a product of two qubit states (2-vectors over the subspace)."""
    psi = np.kron(a_vec, b_vec)
    rho = np.outer(psi, psi.conj())
    return chsh_value(BiphotonState(settings.subspace, 0.5 * (rho + rho.conj().T)), settings).s

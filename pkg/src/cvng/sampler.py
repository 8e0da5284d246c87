"""Monte-Carlo simulation of circuits whose states, channels and detectors have positive Wigner functions.

A phase-space point is drawn from the product input distribution, pushed
through each local channel by sampling its Gaussian transition kernel, and
the detector outcomes are drawn from the detector Wigner values at the final
point. Every sample owns a counter-based random stream keyed by
``(seed, sample index)``, so results do not depend on how samples are
distributed over worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import conditional as cd
from . import fock_oracle as fo
from . import symplectic as sy
from . import wigner as wg
from .errors import NumericalError, ValidationError

POSITIVITY_TOL = 1e-12
MIN_ACCEPTANCE = 0.1
MAX_REJECTIONS = 10_000
GBS_MAX_CUTOFF = 25
GBS_MAX_MODES = 4
GBS_MAX_LEAK = 1e-4


def thread_count() -> int:
    """Worker count from ``CVNG_THREADS`` (default 1)."""
    raw = os.environ.get("CVNG_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValidationError(f"CVNG_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValidationError("CVNG_THREADS must be at least 1")
    return n


def sample_rng(seed: int, index: int) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise ValidationError("seed and sample index must be non-negative")
    return np.random.Generator(np.random.Philox(key=(int(seed) % 2**64) * 2**64 + int(index)))


def _validation_grid(lo, hi, n: int = 81) -> np.ndarray:
    gx = np.linspace(lo[0], hi[0], n)
    gp = np.linspace(lo[1], hi[1], n)
    X, P = np.meshgrid(gx, gp, indexing="ij")
    return np.column_stack([X.ravel(), P.ravel()])


def _form_box(W: wg.WignerForm, nsig: float = 8.0):
    return wg._bounding_box(W, nsig)


# ---------------------------------------------------------------------------
# inputs


class GaussianInput:
    """Single-mode Gaussian input, sampled exactly."""

    def __init__(self, state: sy.GaussianState):
        if state.m != 1:
            raise ValidationError("inputs are single-mode")
        self.state = state
        self._L = np.linalg.cholesky(state.V)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.state.xi + self._L @ rng.standard_normal(2)

    def moments(self):
        return self.state.xi.copy(), self.state.V.copy()


class FormInput:
    """Single-mode input with a positive polynomial-times-Gaussian Wigner function.

    Drawn by rejection under a Gaussian proposal whose covariance is at least
    twice the state's and 1.5 times every term's envelope covariance. The
    envelope constant is the largest ratio ``W/q`` found on a grid refined by
    local maximisation, with a 10 percent safety margin.
    """

    def __init__(self, W: wg.WignerForm, name: str = "input"):
        if W.n != 2:
            raise ValidationError(f"{name}: inputs are single-mode")
        self.W = W
        self.name = name
        lo, hi = _form_box(W)
        grid = _validation_grid(lo, hi)
        vals = W(grid)
        if np.min(vals) < -POSITIVITY_TOL:
            i = int(np.argmin(vals))
            raise ValidationError(f"{name}: Wigner function is negative ({vals[i]:.3e} at {grid[i].tolist()})")
        self.mean, cov = wg.moments(W)
        S = 2.0 * cov
        for t in W.terms:
            C = 1.5 * np.linalg.inv(wg._real_array(t.A))
            if np.linalg.eigvalsh(S - C)[0] < 0:
                S = S + C
        self.S = 0.5 * (S + S.T)
        self._L = np.linalg.cholesky(self.S)
        self._Sinv = np.linalg.inv(self.S)
        self._qnorm = 1.0 / (2 * np.pi * np.sqrt(np.linalg.det(self.S)))
        ratio = vals / self._q(grid)
        starts = grid[np.argsort(ratio)[-5:]]
        best = float(np.max(ratio))
        for x0 in starts:
            res = minimize(lambda x: -float(self.W(x[None, :])[0] / self._q(x[None, :])[0]), x0,
                           method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-12})
            best = max(best, -float(res.fun))
        ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        far = self.mean + 12.0 * (np.column_stack([np.cos(ang), np.sin(ang)]) @ self._L.T)
        if np.max(self.W(far) / self._q(far)) > best:
            raise ValidationError(f"{name}: proposal does not dominate the Wigner tails")
        self.c = 1.1 * best
        if 1.0 / self.c < MIN_ACCEPTANCE:
            raise ValidationError(f"{name}: rejection acceptance {1.0 / self.c:.3f} below {MIN_ACCEPTANCE}")

    def _q(self, X) -> np.ndarray:
        D = X - self.mean
        return self._qnorm * np.exp(-0.5 * np.sum((D @ self._Sinv) * D, axis=-1))

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        for _ in range(MAX_REJECTIONS):
            x = self.mean + self._L @ rng.standard_normal(2)
            u = rng.random()
            if u * self.c * self._q(x[None, :])[0] <= self.W(x[None, :])[0]:
                return x
        raise NumericalError(f"{self.name}: rejection sampler did not accept within {MAX_REJECTIONS} draws")

    def moments(self):
        return self.mean.copy(), wg.moments(self.W)[1]


def make_input(spec, name: str = "input"):
    if isinstance(spec, sy.GaussianState):
        return GaussianInput(spec)
    if isinstance(spec, wg.WignerForm):
        return FormInput(spec, name)
    if isinstance(spec, (GaussianInput, FormInput)):
        return spec
    raise ValidationError(f"{name}: unsupported input type {type(spec).__name__}")


def sample_initial(inputs, rng: np.random.Generator) -> np.ndarray:
    return np.concatenate([inp.draw(rng) for inp in inputs])


# ---------------------------------------------------------------------------
# channels


def _noise_factor(Vc, name: str) -> np.ndarray:
    w, U = np.linalg.eigh(Vc)
    if w.size and w[0] < -sy.PSD_TOL * max(1.0, abs(w[-1])):
        raise ValidationError(f"{name}: channel noise matrix is not positive semidefinite")
    return U * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class LocalChannel:
    """Gaussian channel acting on the listed modes, or a probabilistic mixture of such channels."""

    modes: tuple
    channels: tuple
    weights: tuple = (1.0,)
    name: str = "channel"

    def __post_init__(self):
        modes = tuple(int(j) for j in self.modes)
        chans = tuple(self.channels) if isinstance(self.channels, (list, tuple)) else (self.channels,)
        w = np.asarray(self.weights, dtype=float)
        if len(set(modes)) != len(modes) or not modes:
            raise ValidationError(f"{self.name}: invalid mode list")
        if len(chans) != w.size or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"{self.name}: mixture weights must be non-negative and sum to one")
        for ch in chans:
            if ch.m_in != len(modes) or ch.m_out != len(modes):
                raise ValidationError(f"{self.name}: channel acts on {ch.m_in} modes, {len(modes)} listed")
            if not ch.is_valid():
                raise ValidationError(f"{self.name}: channel violates the complete-positivity constraint")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        object.__setattr__(self, "_factors", tuple(_noise_factor(ch.Vc, self.name) for ch in chans))

    @property
    def idx(self) -> list:
        return [k for j in self.modes for k in (2 * j, 2 * j + 1)]


def step_channel(x: np.ndarray, lc: LocalChannel, rng: np.random.Generator) -> np.ndarray:
    k = 0 if len(lc.channels) == 1 else int(rng.choice(len(lc.channels), p=lc.weights))
    ch, L = lc.channels[k], lc._factors[k]
    idx = lc.idx
    out = x.copy()
    out[idx] = ch.X @ x[idx] + ch.alpha + L @ rng.standard_normal(L.shape[1])
    return out


# ---------------------------------------------------------------------------
# detectors


class Heterodyne:
    labels = None

    def outcome(self, x_mode: np.ndarray, rng: np.random.Generator):
        return x_mode + rng.standard_normal(2)


class DiscretePOVM:
    """Detector with finitely many outcomes, each with a Wigner form.

    At phase point ``x`` the outcome probabilities are ``4 pi W_k(x)``; the
    elements must be positive and sum to the identity.
    """

    def __init__(self, elements, labels=None, name: str = "detector"):
        self.elements = list(elements)
        self.labels = list(range(len(self.elements))) if labels is None else list(labels)
        self.name = name
        if len(self.labels) != len(self.elements) or not self.elements:
            raise ValidationError(f"{name}: labels and elements differ in number")
        for E in self.elements:
            if E.n != 2:
                raise ValidationError(f"{name}: detector elements are single-mode")
        lo = np.full(2, -8.0)
        hi = np.full(2, 8.0)
        for E in self.elements:
            try:
                l2, h2 = _form_box(E)
            except NumericalError:
                continue  # flat elements such as multiples of the identity
            lo, hi = np.minimum(lo, l2), np.maximum(hi, h2)
        grid = _validation_grid(lo, hi)
        P = self.probabilities(grid)
        k, i = np.unravel_index(np.argmin(P), P.shape)
        if P[k, i] < -POSITIVITY_TOL:
            raise ValidationError(f"{name}: element {self.labels[k]!r} has a negative Wigner function "
                                  f"({P[k, i] / (4 * np.pi):.3e} at {grid[i].tolist()})")
        if np.max(np.abs(P.sum(axis=0) - 1.0)) > 1e-8:
            raise ValidationError(f"{name}: elements do not sum to the identity")

    def probabilities(self, X) -> np.ndarray:
        return np.array([sy.TRACE_FACTOR * E(X) for E in self.elements])

    @classmethod
    def constant(cls, probs, labels=None, name: str = "detector") -> "DiscretePOVM":
        I = cd.povm_identity(1)
        return cls([I.scaled(float(p)) for p in probs], labels, name)

    def outcome(self, x_mode: np.ndarray, rng: np.random.Generator):
        p = np.clip(self.probabilities(x_mode[None, :])[:, 0], 0.0, None)
        return self.labels[int(rng.choice(len(p), p=p / p.sum()))]


class BinnedHomodyne:
    """Homodyne detection of ``cos(phi) x + sin(phi) p`` reported as a bin index."""

    def __init__(self, edges, phi: float = 0.0, name: str = "detector"):
        e = np.asarray(edges, dtype=float)
        if e.ndim != 1 or e.size < 1 or np.any(np.diff(e) <= 0):
            raise ValidationError(f"{name}: bin edges must be strictly increasing")
        self.edges, self.phi, self.name = e, float(phi), name
        self.labels = list(range(e.size + 1))

    def outcome(self, x_mode: np.ndarray, rng: np.random.Generator):
        q = np.cos(self.phi) * x_mode[0] + np.sin(self.phi) * x_mode[1]
        return int(np.searchsorted(self.edges, q, side="right"))


def onoff_click_wigner(x) -> np.ndarray:
    """Wigner function of the click element ``I - |0><0|`` of an on-off detector."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return (1.0 - 2.0 * np.exp(-0.5 * np.sum(x * x, axis=-1))) / (4 * np.pi)


def onoff_detector(name: str = "detector") -> DiscretePOVM:
    """On-off detector; its click element is Wigner-negative, so construction fails validation."""
    return DiscretePOVM([cd.povm_vacuum(1), cd.povm_click(1)], ["off", "on"], name)


def sample_detectors(x: np.ndarray, detectors, rng: np.random.Generator) -> list:
    return [det.outcome(x[2 * j: 2 * j + 2], rng) for j, det in enumerate(detectors)]


# ---------------------------------------------------------------------------
# circuits


@dataclass
class Circuit:
    inputs: list
    channels: list = field(default_factory=list)
    detectors: list = field(default_factory=list)

    def __post_init__(self):
        self.inputs = [make_input(s, f"inputs[{i}]") for i, s in enumerate(self.inputs)]
        m = len(self.inputs)
        if m == 0:
            raise ValidationError("circuit has no inputs")
        for i, lc in enumerate(self.channels):
            if not isinstance(lc, LocalChannel):
                raise ValidationError(f"channels[{i}]: expected a LocalChannel")
            if max(lc.modes) >= m or min(lc.modes) < 0:
                raise ValidationError(f"channels[{i}]: mode index out of range")
        if not self.detectors:
            self.detectors = [Heterodyne() for _ in range(m)]
        if len(self.detectors) != m:
            raise ValidationError("one detector per mode is required")

    @property
    def m(self) -> int:
        return len(self.inputs)

    def outcome_columns(self) -> list[str]:
        cols = []
        for j, det in enumerate(self.detectors):
            cols += [f"m{j}_x", f"m{j}_p"] if isinstance(det, Heterodyne) else [f"m{j}_label"]
        return cols


@dataclass(frozen=True)
class RunConfig:
    n_samples: int
    seed: int = 0
    streams: int | None = None

    def __post_init__(self):
        if self.n_samples < 0 or self.seed < 0:
            raise ValidationError("n_samples and seed must be non-negative")
        if self.streams is not None and self.streams < 1:
            raise ValidationError("streams must be at least 1")


@dataclass(frozen=True)
class SampleRecord:
    index: int
    point: np.ndarray
    outcomes: tuple
    chain: tuple | None = None

    def row(self) -> list:
        out = [self.index]
        for o in self.outcomes:
            out += list(np.atleast_1d(o)) if isinstance(o, np.ndarray) else [o]
        return out


def sample_one(circuit: Circuit, seed: int, index: int, keep_chain: bool = False) -> SampleRecord:
    rng = sample_rng(seed, index)
    x = sample_initial(circuit.inputs, rng)
    chain = [x.copy()] if keep_chain else None
    for lc in circuit.channels:
        x = step_channel(x, lc, rng)
        if keep_chain:
            chain.append(x.copy())
    outs = tuple(sample_detectors(x, circuit.detectors, rng))
    return SampleRecord(index, x, outs, tuple(chain) if keep_chain else None)


def run(circuit: Circuit, config: RunConfig, keep_chain: bool = False) -> list[SampleRecord]:
    n = config.n_samples
    if n == 0:
        return []
    streams = config.streams or thread_count()
    if streams == 1:
        return [sample_one(circuit, config.seed, i, keep_chain) for i in range(n)]
    chunks = np.array_split(np.arange(n), streams)

    def work(ids):
        return [sample_one(circuit, config.seed, int(i), keep_chain) for i in ids]

    with ThreadPoolExecutor(max_workers=streams) as pool:
        parts = list(pool.map(work, chunks))
    return [r for part in parts for r in part]


def analytic_moments(circuit: Circuit):
    """Mean and covariance of the final phase point, propagated through all channels."""
    means, covs = zip(*(inp.moments() for inp in circuit.inputs))
    mu = np.concatenate(means)
    R = _block_diag(covs) + np.outer(mu, mu)
    for lc in circuit.channels:
        idx = lc.idx
        mu_new = np.zeros_like(mu)
        R_new = np.zeros_like(R)
        for w, ch in zip(lc.weights, lc.channels):
            T = np.eye(mu.size)
            T[np.ix_(idx, idx)] = ch.X
            a = np.zeros(mu.size)
            a[idx] = ch.alpha
            N = np.zeros_like(R)
            N[np.ix_(idx, idx)] = ch.Vc
            m1 = T @ mu + a
            mu_new += w * m1
            R_new += w * (T @ R @ T.T + np.outer(T @ mu, a) + np.outer(a, T @ mu) + np.outer(a, a) + N)
        mu, R = mu_new, R_new
    return mu, R - np.outer(mu, mu)


def _block_diag(blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    k = 0
    for b in blocks:
        out[k: k + b.shape[0], k: k + b.shape[0]] = b
        k += b.shape[0]
    return out


def heterodyne_targets(circuit: Circuit):
    """Analytic mean and covariance of the outcome vector when every detector is heterodyne."""
    if not all(isinstance(d, Heterodyne) for d in circuit.detectors):
        raise ValidationError("analytic outcome moments need heterodyne detection on every mode")
    mu, V = analytic_moments(circuit)
    return mu, V + np.eye(mu.size)


def outcome_matrix(records) -> np.ndarray:
    return np.array([np.concatenate([np.atleast_1d(o) for o in r.outcomes]) for r in records], dtype=float)


@dataclass(frozen=True)
class MomentCheck:
    mean: np.ndarray
    cov: np.ndarray
    target_mean: np.ndarray
    target_cov: np.ndarray
    z_mean: np.ndarray
    z_cov: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return float(max(np.max(np.abs(self.z_mean)), np.max(np.abs(self.z_cov))))


def moment_check(Y: np.ndarray, target_mean, target_cov) -> MomentCheck:
    """Empirical outcome moments with z-scores against analytic targets."""
    n = Y.shape[0]
    if n < 2:
        raise ValidationError("need at least two samples for moment statistics")
    mean = Y.mean(axis=0)
    D = Y - mean
    cov = D.T @ D / (n - 1)
    se_mean = np.sqrt(np.diag(cov) / n)
    prod = D[:, :, None] * D[:, None, :]
    se_cov = np.sqrt(prod.var(axis=0, ddof=1) / n)
    z_mean = (mean - target_mean) / se_mean
    z_cov = (cov - target_cov) / se_cov
    return MomentCheck(mean, cov, np.asarray(target_mean), np.asarray(target_cov), z_mean, z_cov)


# ---------------------------------------------------------------------------
# photon-counting probabilities of Gaussian states


def gbs_distribution(state: sy.GaussianState, d: int) -> np.ndarray:
    """Photon-number distribution ``P[n_1, ..., n_m]`` with every ``n_j < d``."""
    if d > GBS_MAX_CUTOFF or state.m > GBS_MAX_MODES:
        raise ValidationError(f"photon counting limited to d <= {GBS_MAX_CUTOFF} and m <= {GBS_MAX_MODES}")
    rho = fo.gaussian_to_fock(state.V, state.xi, d=d, max_leak=GBS_MAX_LEAK)
    if rho.leakage > GBS_MAX_LEAK:
        raise NumericalError(f"truncation leakage {rho.leakage:.2e} exceeds {GBS_MAX_LEAK}")
    if rho.is_pure_ket:
        P = np.abs(rho.ket) ** 2
    else:
        P = np.real(np.diag(rho.rho))
    return P.reshape((d,) * state.m)


def gbs_probability(state: sy.GaussianState, pattern, d: int = 20) -> float:
    pattern = [int(n) for n in pattern]
    if len(pattern) != state.m:
        raise ValidationError("pattern length does not match the mode count")
    if any(n < 0 or n >= d for n in pattern):
        raise ValidationError("pattern entries must lie in [0, d)")
    return float(gbs_distribution(state, d)[tuple(pattern)])

"""Quantum non-Gaussianity witnesses, stellar rank and entropic non-Gaussianity."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.optimize import brentq

from . import fock_oracle as fo
from . import symplectic as sy
from .errors import NumericalError, ValidationError

WITNESS_MARGIN = 1e-12
RANK_TOL = 1e-9
ROOT_MERGE_RADIUS = 1e-6
SINGLE_PHOTON_FIDELITY = 0.478
MOMENT_TOL = 1e-6


# ---------------------------------------------------------------------------
# energy-constrained Wigner witness


def qng_energy_bound(nbar: float, m: int = 1) -> float:
    """Smallest value of ``W(0)`` a mixture of Gaussian states with mean photon number ``nbar`` can have."""
    if nbar < 0:
        raise ValidationError("mean photon number must be non-negative")
    return (2 * np.pi) ** (-m) * np.exp(-4.0 * nbar * (2.0 * nbar + 1.0))


def qng_energy_witness(W_at_origin: float, nbar: float, m: int = 1) -> bool:
    """True when ``W(0)`` certifies that the state lies outside the convex hull of Gaussian states."""
    if W_at_origin < 0:
        return True
    return bool(W_at_origin < qng_energy_bound(nbar, m) - WITNESS_MARGIN)


def fock_mixture_origin(gamma: float) -> tuple[float, float]:
    """``(W(0), nbar)`` for ``(1 - gamma)|0><0| + gamma|1><1|``."""
    return (1.0 - 2.0 * gamma) / (2 * np.pi), float(gamma)


def fock_mixture_threshold() -> float:
    """Smallest ``gamma`` above which the witness certifies the vacuum/one-photon mixture.

    Solves ``1 - 2 gamma = exp(-4 gamma (2 gamma + 1))`` on ``(0, 1/2)``; the
    certified set is ``(threshold, 1]``.
    """
    f = lambda g: (1.0 - 2.0 * g) - np.exp(-4.0 * g * (2.0 * g + 1.0))
    return float(brentq(f, 0.25, 0.5 - 1e-15, xtol=1e-15))


# ---------------------------------------------------------------------------
# stellar representation of finite superpositions of Fock states


@dataclass(frozen=True)
class CoreState:
    """Normalised amplitudes ``c_0 .. c_N`` of a single-mode state in the Fock basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if c.size == 0 or not np.any(c):
            raise ValidationError("core state has no non-zero amplitude")
        if abs(np.vdot(c, c).real - 1.0) > 1e-10:
            raise ValidationError("core state amplitudes are not normalised")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def normalized(cls, coeffs) -> "CoreState":
        c = np.asarray(coeffs, dtype=complex).ravel()
        nrm = np.linalg.norm(c)
        if nrm == 0:
            raise ValidationError("core state has no non-zero amplitude")
        return cls(c / nrm)

    @classmethod
    def fock(cls, n: int) -> "CoreState":
        c = np.zeros(n + 1, dtype=complex)
        c[n] = 1.0
        return cls(c)

    def to_truncated(self, d: int | None = None) -> fo.TruncatedState:
        d = max(self.coeffs.size + 1, d or 0)
        ket = np.zeros(d, dtype=complex)
        ket[: self.coeffs.size] = self.coeffs
        return fo.from_ket(ket, d, 1)


@dataclass(frozen=True)
class StellarReport:
    rank: int
    roots: np.ndarray

    def multiplicities(self) -> list[tuple[complex, int]]:
        out: list[tuple[complex, int]] = []
        for r in self.roots:
            if out and abs(out[-1][0] - r) == 0:
                out[-1] = (out[-1][0], out[-1][1] + 1)
            else:
                out.append((complex(r), 1))
        return out


def stellar_function(core: CoreState) -> np.ndarray:
    """Coefficients ``P_n = c_n / sqrt(n!)`` of the stellar polynomial ``P(z) = sum_n P_n z^n``.

    Zeros of ``P`` are the zeros of the Husimi function, with
    ``z = conj(beta)`` and ``beta = (x + i p) / 2`` the coherent amplitude.
    """
    c = core.coeffs
    if not np.any(c):
        raise ValidationError("core state has no non-zero amplitude")
    return np.array([c[n] / np.sqrt(float(factorial(n))) for n in range(c.size)])


def _merge_roots(roots: np.ndarray, radius: float) -> np.ndarray:
    roots = list(np.asarray(roots, dtype=complex))
    clusters: list[list[complex]] = []
    while roots:
        seed = roots.pop(0)
        cluster = [seed]
        grew = True
        while grew:
            grew = False
            for r in list(roots):
                if min(abs(r - c) for c in cluster) < radius:
                    cluster.append(r)
                    roots.remove(r)
                    grew = True
        clusters.append(cluster)
    out = []
    for cl in sorted(clusters, key=lambda cl: (abs(np.mean(cl)), np.angle(np.mean(cl)))):
        out.extend([complex(np.mean(cl))] * len(cl))
    return np.array(out, dtype=complex)


def stellar_rank(core: CoreState, tol: float = RANK_TOL) -> StellarReport:
    """Stellar rank and zeros (with multiplicity) of a finite core state."""
    c = core.coeffs
    above = np.nonzero(np.abs(c) > tol)[0]
    if above.size == 0:
        raise ValidationError("no amplitude above the rank threshold")
    rank = int(above[-1])
    if rank == 0:
        return StellarReport(0, np.zeros(0, dtype=complex))
    P = stellar_function(core)[: rank + 1]
    roots = np.roots(P[::-1])
    return StellarReport(rank, _merge_roots(roots, ROOT_MERGE_RADIUS))


def remove_displacement(series, beta: complex) -> np.ndarray:
    """Stellar coefficients with the displacement ``D(beta)`` stripped off.

    A displaced state has stellar function ``exp(beta z - |beta|^2/2) F(z - conj(beta))``.
    Multiplying the (truncated) series by ``exp(-beta z)`` leaves a polynomial
    with the zeros of ``F`` shifted, so its degree is the stellar rank.
    """
    P = np.asarray(series, dtype=complex)
    K = P.size
    e = np.array([(-beta) ** k / factorial(k) for k in range(K)], dtype=complex)
    return np.convolve(P, e)[:K]


def rank_certificate(fidelity: float, k: int = 0, threshold: float | None = None) -> bool:
    """Whether a fidelity with the target certifies stellar rank above ``k``.

    Only the ``k = 0`` threshold against the one-photon target is built in;
    other ranks need a caller-supplied threshold.
    """
    if not 0.0 <= fidelity <= 1.0 + 1e-12:
        raise ValidationError("fidelity must lie in [0, 1]")
    if threshold is None:
        if k != 0:
            raise ValidationError(f"no built-in fidelity threshold for rank {k}")
        threshold = SINGLE_PHOTON_FIDELITY
    return bool(fidelity > threshold)


# ---------------------------------------------------------------------------
# entropic non-Gaussianity


def entropic_nongaussianity(rho: fo.TruncatedState, V, xi, tol: float = MOMENT_TOL) -> float:
    """Entropy of the Gaussian state with the same moments minus the entropy of ``rho``."""
    V = np.asarray(V, dtype=float)
    xi = np.asarray(xi, dtype=float)
    xi_o, V_o = fo.moments(rho)
    if np.max(np.abs(V_o - V)) > tol or np.max(np.abs(xi_o - xi)) > tol:
        raise ValidationError("supplied moments do not match the state")
    delta = sy.gaussian_entropy(V) - fo.von_neumann_entropy(rho)
    if delta < -1e-8:
        raise NumericalError(f"negative entropic non-Gaussianity {delta:.3e}")
    return max(float(delta), 0.0)


# ---------------------------------------------------------------------------
# central limit behaviour of averaged quadratures


def disk_points(radius: float = 3.0, n: int = 13) -> np.ndarray:
    g = np.linspace(-radius, radius, n)
    X, P = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X.ravel(), P.ravel()])
    return pts[np.hypot(pts[:, 0], pts[:, 1]) <= radius + 1e-12]


def clt_convergence(core: CoreState, N: int, lambdas=None) -> float:
    """``max |chi(lambda/sqrt N)^N - chi_G(lambda)|`` for ``N`` copies of ``core``.

    The left side is the characteristic function of the quadratures averaged
    over ``N`` independent copies; ``chi_G`` is the Gaussian characteristic
    function with the same moments.
    """
    if N < 1:
        raise ValidationError("need at least one copy")
    lambdas = disk_points() if lambdas is None else np.atleast_2d(np.asarray(lambdas, dtype=float))
    state = core.to_truncated()
    xi, V = fo.moments(state)
    dev = 0.0
    for lam in lambdas:
        chi = fo.characteristic(state, lam / np.sqrt(N)) ** N
        chi_g = np.exp(1j * np.sqrt(N) * (lam @ xi) - 0.5 * lam @ V @ lam)
        dev = max(dev, abs(chi - chi_g))
    return float(dev)

"""Heralded non-Gaussian states prepared from Gaussian inputs.

A Gaussian state on modes ``f + g`` is measured on ``g`` with a POVM element
``A``; keeping the outcome leaves ``f`` in the state with Wigner function
``W_f(x_f) <A>_{g|x_f} / <A>``. All integrals are exact polynomial-times-Gaussian
integrals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import symplectic as sy
from . import wigner as wg
from ._poly import Poly
from .errors import ValidationError

ZERO_PROBABILITY = 1e-9
RICHARDSON_THETAS = (0.02, 0.01, 0.005)


@dataclass(frozen=True)
class Bipartition:
    f_modes: tuple
    g_modes: tuple

    def __post_init__(self):
        f, g = tuple(int(j) for j in self.f_modes), tuple(int(j) for j in self.g_modes)
        if not f or not g:
            raise ValidationError("both sides of a bipartition need at least one mode")
        if set(f) & set(g):
            raise ValidationError("bipartition sides overlap")
        if sorted(f + g) != list(range(len(f) + len(g))):
            raise ValidationError("bipartition must cover modes 0..m-1 exactly")
        object.__setattr__(self, "f_modes", f)
        object.__setattr__(self, "g_modes", g)

    @property
    def m(self) -> int:
        return len(self.f_modes) + len(self.g_modes)

    @property
    def f_idx(self) -> list:
        return [k for j in self.f_modes for k in (2 * j, 2 * j + 1)]

    @property
    def g_idx(self) -> list:
        return [k for j in self.g_modes for k in (2 * j, 2 * j + 1)]

    def swapped(self) -> "Bipartition":
        return Bipartition(self.g_modes, self.f_modes)


def split(m: int, f_modes) -> Bipartition:
    f = tuple(f_modes)
    return Bipartition(f, tuple(j for j in range(m) if j not in f))


def _check_part(state: sy.GaussianState, part: Bipartition):
    if part.m != state.m:
        raise ValidationError("bipartition does not match the mode count")


@dataclass(frozen=True)
class GaussianBlocks:
    Vf: np.ndarray
    Vg: np.ndarray
    Vgf: np.ndarray
    xi_f: np.ndarray
    xi_g: np.ndarray

    def reassemble(self, part: Bipartition) -> sy.GaussianState:
        n = 2 * part.m
        V = np.zeros((n, n))
        xi = np.zeros(n)
        f, g = part.f_idx, part.g_idx
        V[np.ix_(f, f)] = self.Vf
        V[np.ix_(g, g)] = self.Vg
        V[np.ix_(g, f)] = self.Vgf
        V[np.ix_(f, g)] = self.Vgf.T
        xi[f], xi[g] = self.xi_f, self.xi_g
        return sy.GaussianState(xi, V)


def blocks(state: sy.GaussianState, part: Bipartition) -> GaussianBlocks:
    _check_part(state, part)
    f, g = part.f_idx, part.g_idx
    V = state.V
    return GaussianBlocks(V[np.ix_(f, f)].copy(), V[np.ix_(g, g)].copy(), V[np.ix_(g, f)].copy(),
                          state.xi[f].copy(), state.xi[g].copy())


@dataclass(frozen=True)
class ConditionalGaussian:
    """Distribution of ``x_g`` given ``x_f``: covariance ``V_schur``, mean ``xi_g + gain (x_f - xi_f)``."""

    V_schur: np.ndarray
    gain: np.ndarray
    xi_f: np.ndarray
    xi_g: np.ndarray

    def mean(self, x_f) -> np.ndarray:
        return self.xi_g + self.gain @ (np.asarray(x_f, dtype=float) - self.xi_f)


def conditional_gaussian(bl: GaussianBlocks) -> ConditionalGaussian:
    if np.linalg.cond(bl.Vf) > 1e12:
        raise ValidationError("conditioning block is singular")
    gain = np.linalg.solve(bl.Vf, bl.Vgf.T).T
    S = bl.Vg - gain @ bl.Vgf.T
    return ConditionalGaussian(0.5 * (S + S.T), gain, bl.xi_f, bl.xi_g)


# ---------------------------------------------------------------------------
# POVM elements, normalised so that <A> = (4 pi)^m int W_rho W_A


def povm_identity(m: int = 1) -> wg.WignerForm:
    n = 2 * m
    term = wg.PolyGaussTerm(Poly.constant(n), np.zeros((n, n)), np.zeros(n, dtype=complex),
                            complex(-m * np.log(sy.TRACE_FACTOR)))
    return wg.WignerForm([term], n)


def povm_fock(n: int, m: int = 1, mode=None) -> wg.WignerForm:
    return wg.fock_wigner(n, mode, m)


def povm_vacuum(m: int = 1) -> wg.WignerForm:
    return wg.vacuum_wigner(m)


def povm_click(m: int = 1) -> wg.WignerForm:
    """On-off detector click, ``I - |0><0|``."""
    return povm_identity(m) + povm_vacuum(m).scaled(-1.0)


def povm_coherent(alpha) -> wg.WignerForm:
    return wg.coherent_wigner(alpha)


# ---------------------------------------------------------------------------
# heralding


@dataclass(frozen=True)
class HeraldedState:
    base: sy.GaussianState
    form: wg.WignerForm
    probability: float

    def factor(self, x_f) -> np.ndarray:
        """``<A>_{g|x_f} / <A>``: ratio of the heralded Wigner function to the unconditioned one."""
        return self.form(x_f) / wg.gaussian_wigner(self.base)(x_f)

    def __call__(self, x_f) -> np.ndarray:
        return self.form(x_f)


def herald(state: sy.GaussianState, part: Bipartition, A: wg.WignerForm) -> HeraldedState:
    _check_part(state, part)
    g = part.g_idx
    if A.n != len(g):
        raise ValidationError("POVM element acts on a different number of modes than the heralded side")
    n = 2 * state.m
    joint = wg.gaussian_wigner(state).product(A.embedded(n, g))
    prob = joint.integral() * sy.TRACE_FACTOR ** len(part.g_modes)
    if not prob > ZERO_PROBABILITY:
        raise ValidationError(f"herald succeeds with probability {prob:.3e}: rejected")
    out = joint.marginal(part.f_idx).scaled(sy.TRACE_FACTOR ** len(part.g_modes) / prob).simplified()
    return HeraldedState(state.reduced(part.f_modes), out, float(prob))


def _subtraction_norm(state: sy.GaussianState, B) -> float:
    Vb = B.T @ state.V @ B
    xib = B.T @ state.xi
    return float(np.trace(Vb) - 2.0 + xib @ xib)


def photon_subtract(state: sy.GaussianState, b) -> HeraldedState:
    """Limit of a weak tap on mode ``b`` heralded by a single photon (single-photon subtraction)."""
    B = sy.mode_matrix(b)
    if B.shape[0] != 2 * state.m:
        raise ValidationError("mode vector length does not match the mode count")
    norm = _subtraction_norm(state, B)
    if not norm > ZERO_PROBABILITY:
        raise ValidationError("photon subtraction from this mode has zero success probability")
    n = 2 * state.m
    V, Vinv = wg.precise_covariance(state.V)
    xi = np.array([wg.lift(v) for v in state.xi], dtype=object if wg.extended_precision_active() else float)
    G = B.T @ (np.eye(n) - Vinv)
    xib = B.T @ xi
    u = [Poly.linear(np.array([wg.lift(v) for v in G[i]], dtype=object), wg.lift(xib[i] - G[i] @ xi))
         for i in range(2)]
    const = 2 - (B[:, 0] @ Vinv @ B[:, 0] + B[:, 1] @ Vinv @ B[:, 1])
    exact_norm = (B[:, 0] @ V @ B[:, 0] + B[:, 1] @ V @ B[:, 1]) - 2 + xib @ xib
    poly = (u[0] * u[0] + u[1] * u[1] + wg.lift(const)) * (1 / wg.lift(exact_norm))
    base = wg.gaussian_wigner(state).terms[0]
    form = wg.WignerForm([base.with_poly(poly)], n)
    return HeraldedState(state, form, 0.0)


def subtraction_probability_rate(state: sy.GaussianState, b, theta: float) -> float:
    """Leading-order success probability of a weak tap of angle ``theta`` on mode ``b``.

    Equals ``theta^2`` times the mean photon number of mode ``b``.
    """
    B = sy.mode_matrix(b)
    return 0.25 * theta**2 * _subtraction_norm(state, B)


def _with_auxiliary(state: sy.GaussianState) -> sy.GaussianState:
    return sy.direct_sum(state, sy.GaussianState.vacuum(1))


def photon_subtract_finite(state: sy.GaussianState, b, theta: float) -> HeraldedState:
    """Beamsplitter tap of angle ``theta`` into a vacuum mode, heralded by one photon there."""
    m = state.m
    S = sy.mode_selective_beamsplitter(b, theta, m)
    joint = _with_auxiliary(state).transformed(S)
    return herald(joint, split(m + 1, range(m)), povm_fock(1))


def photon_add_finite(state: sy.GaussianState, b, theta: float) -> HeraldedState:
    """Two-mode squeezer of gain ``theta`` with a vacuum mode, heralded by one photon there."""
    if not 0 < theta <= 0.2:
        raise ValidationError("photon addition gain must lie in (0, 0.2]")
    m = state.m
    S = sy.mode_selective_two_mode_squeezer(b, theta, m)
    joint = _with_auxiliary(state).transformed(S)
    return herald(joint, split(m + 1, range(m)), povm_fock(1))


def photon_add(state: sy.GaussianState, b, theta: float | None = None) -> HeraldedState:
    """Single-photon addition on mode ``b``.

    With ``theta`` given, the finite-gain heralded state is returned. Without
    it, the weak-gain limit is extrapolated from gains 0.02, 0.01 and 0.005
    (Richardson in ``theta^2``, residual error of order ``theta^6``).
    """
    if theta is not None:
        return photon_add_finite(state, b, theta)
    outs = [photon_add_finite(state, b, t) for t in RICHARDSON_THETAS]
    f0, f1, f2 = (o.form for o in outs)
    r01 = f1.scaled(4.0 / 3.0) + f0.scaled(-1.0 / 3.0)
    r12 = f2.scaled(4.0 / 3.0) + f1.scaled(-1.0 / 3.0)
    limit = r12.scaled(16.0 / 15.0) + r01.scaled(-1.0 / 15.0)
    return HeraldedState(state, limit, 0.0)

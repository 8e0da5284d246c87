"""Closed-form Wigner functions as finite sums of polynomial-times-Gaussian terms.

A term is ``exp(logc) * poly(x) * exp(-x^T A x / 2 + b^T x)`` with ``A`` real
symmetric and ``b`` possibly complex, so oscillating interference terms are
Gaussians with an imaginary linear coefficient. Products, marginals and full
integrals of such terms are exact: after whitening the Gaussian, polynomial
moments follow from the standard normal moments (Isserlis' theorem).
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from math import comb, factorial

import mpmath as mp
import numpy as np
from scipy.special import gammainc, gammaln

from ._poly import Poly
from .errors import NumericalError, ValidationError
from . import symplectic as sy

LOG_2PI = np.log(2.0 * np.pi)

_PRECISION = {"dps": 0}


@contextmanager
def extended_precision(dps: int = 40):
    """Carry out polynomial expansions, integrals and marginals with ``dps`` decimal digits.

    Strongly squeezed states make monomial coefficients large while the
    integrated quantities stay of order one; the extra digits absorb the
    resulting cancellation.
    """
    old = _PRECISION["dps"]
    _PRECISION["dps"] = int(dps)
    try:
        if dps > 0:
            with mp.workdps(int(dps)):
                yield
        else:
            yield
    finally:
        _PRECISION["dps"] = old


def _mp_on() -> bool:
    return _PRECISION["dps"] > 0


def extended_precision_active() -> bool:
    return _mp_on()


def _is_mp(v) -> bool:
    return hasattr(v, "_mpf_") or hasattr(v, "_mpc_")


def lift(v):
    """Promote a scalar to extended precision when the precision context is active."""
    if not _mp_on() or _is_mp(v):
        return v
    c = complex(v)
    return mp.mpf(c.real) if c.imag == 0 else mp.mpc(c)


def _exp(v):
    return mp.exp(v) if _is_mp(v) else np.exp(v)


def _mp_matrix(M):
    return mp.matrix([[v if _is_mp(v) else mp.mpf(float(v)) for v in row] for row in np.atleast_2d(M)])


def _mp_vector(v):
    return [x if _is_mp(x) else mp.mpc(complex(x)) for x in np.ravel(v)]


def _mp_rows(M):
    return np.array([[M[i, j] for j in range(M.cols)] for i in range(M.rows)], dtype=object)


def _mp_dot(u, M, v):
    return mp.fsum(u[i] * M[i, j] * v[j] for i in range(len(u)) for j in range(len(v)))


def _real_array(A) -> np.ndarray:
    return np.array(A, dtype=float) if A.dtype == object else A


def _complex_array(b) -> np.ndarray:
    return np.array([complex(v) for v in b]) if b.dtype == object else b


def precise_covariance(V):
    """Covariance and its inverse for exact-arithmetic work.

    Outside the precision context this is ``(V, V^-1)`` in floating point. Inside
    it, a covariance that is pure to within ``1e-6`` is first projected onto the
    pure states with the iteration ``V <- (V + Omega V^-1 Omega^T) / 2``
    (quadratically convergent); rounding in ``V`` otherwise appears as a small
    mixedness that photon subtraction strongly amplifies.
    """
    V = np.asarray(V, dtype=float)
    if not _mp_on():
        return V, covariance_inverse(V)
    n = V.shape[0]
    with mp.workdps(_PRECISION["dps"]):
        Vm = _mp_matrix(V)
        if np.max(np.abs(sy.symplectic_eigenvalues(V) - 1.0)) < 1e-6:
            Om = _mp_matrix(sy.omega(n // 2))
            for _ in range(60):
                new = (Vm + Om * Vm**-1 * Om.T) / 2
                delta = mp.mnorm(new - Vm, 1)
                Vm = new
                if delta < mp.mpf(10) ** (-_PRECISION["dps"] + 5):
                    break
        Vm = (Vm + Vm.T) / 2
        Vi = Vm**-1
        Vi = (Vi + Vi.T) / 2
        return _mp_rows(Vm), _mp_rows(Vi)


@dataclass(frozen=True)
class PolyGaussTerm:
    poly: Poly
    A: np.ndarray
    b: np.ndarray
    logc: complex

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def Vinv(self) -> np.ndarray:
        return _real_array(self.A)

    @property
    def center(self) -> np.ndarray:
        return np.linalg.solve(self.Vinv, _complex_array(self.b))

    @property
    def weight(self) -> complex:
        return np.exp(complex(self.logc))

    def exponent(self, X) -> np.ndarray:
        A, b = _real_array(self.A), _complex_array(self.b)
        quad = np.sum((X @ A) * X, axis=-1)
        lin = X @ b.real if not np.any(b.imag) else X @ b
        return complex(self.logc) - 0.5 * quad + lin

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.exp(self.exponent(X)) * self.poly(X)

    def times(self, other: "PolyGaussTerm") -> "PolyGaussTerm":
        return PolyGaussTerm(self.poly * other.poly, self.A + other.A, self.b + other.b, self.logc + other.logc)

    def scaled(self, c: complex) -> "PolyGaussTerm":
        if c == 0:
            return PolyGaussTerm(Poly(self.n), self.A, self.b, self.logc)
        shift = mp.log(lift(c)) if _mp_on() else np.log(complex(c))
        return PolyGaussTerm(self.poly, self.A, self.b, self.logc + shift)

    def with_poly(self, poly: Poly) -> "PolyGaussTerm":
        return PolyGaussTerm(poly, self.A, self.b, self.logc)

    def integral(self) -> complex:
        """Integral over all coordinates (``A`` must be positive definite)."""
        n = self.n
        if self.poly.is_zero():
            return 0.0
        if _mp_on():
            return self._integral_mp()
        C = _pd_inverse(self.A)
        b = _complex_array(self.b)
        mu = C @ b
        L = np.linalg.cholesky(C)
        avg = self.poly.substitute(L, mu).gaussian_average(range(n))
        const = complex(avg.c.get((), 0.0))
        _, logdet = np.linalg.slogdet(C)
        return complex(np.exp(complex(self.logc) + 0.5 * b @ C @ b + 0.5 * (n * LOG_2PI + logdet)) * const)

    def _integral_mp(self) -> complex:
        n = self.n
        _pd_inverse(self.A)
        with mp.workdps(_PRECISION["dps"]):
            C = _mp_matrix(self.A) ** -1
            C = (C + C.T) / 2
            L = mp.cholesky(C)
            b = _mp_vector(self.b)
            mu = [mp.fsum(C[i, j] * b[j] for j in range(n)) for i in range(n)]
            avg = self.poly.substitute(_mp_rows(L), np.array(mu, dtype=object)).gaussian_average(range(n))
            const = avg.c.get((), 0)
            quad = _mp_dot(b, C, b)
            val = mp.exp(mp.mpc(self.logc) + quad / 2 + (n * mp.log(2 * mp.pi) + mp.log(mp.det(C))) / 2) * const
            return complex(val)

    def _marginal_mp(self, keep, drop) -> "PolyGaussTerm":
        n, nk, nd = self.n, len(keep), len(drop)
        _pd_inverse(_real_array(self.A)[np.ix_(drop, drop)])
        with mp.workdps(_PRECISION["dps"]):
            A = _mp_matrix(self.A)
            b = _mp_vector(self.b)
            Add = mp.matrix([[A[i, j] for j in drop] for i in drop])
            Adk = mp.matrix([[A[i, j] for j in keep] for i in drop])
            Cd = Add**-1
            Cd = (Cd + Cd.T) / 2
            Ld = mp.cholesky(Cd)
            bd = [b[i] for i in drop]
            CdAdk = Cd * Adk
            Cdbd = [mp.fsum(Cd[i, j] * bd[j] for j in range(nd)) for i in range(nd)]
            newA = np.empty((nk, nk), dtype=object)
            for i in range(nk):
                for j in range(nk):
                    newA[i, j] = A[keep[i], keep[j]] - mp.fsum(Adk[r, i] * CdAdk[r, j] for r in range(nd))
            newA = (newA + newA.T) / 2
            newb = np.array([b[keep[i]] - mp.fsum(Adk[r, i] * Cdbd[r] for r in range(nd)) for i in range(nk)],
                            dtype=object)
            newlogc = (mp.mpc(self.logc) + _mp_dot(bd, Cd, bd) / 2
                       + (nd * mp.log(2 * mp.pi) + mp.log(mp.det(Cd))) / 2)
            M = np.full((n, nk + nd), mp.mpf(0), dtype=object)
            shift = np.full(n, mp.mpf(0), dtype=object)
            for i, k in enumerate(keep):
                M[k, i] = mp.mpf(1)
            for r, d in enumerate(drop):
                for i in range(nk):
                    M[d, i] = -CdAdk[r, i]
                for j in range(nd):
                    M[d, nk + j] = Ld[r, j]
                shift[d] = Cdbd[r]
            poly = self.poly.substitute(M, shift).gaussian_average(range(nk, nk + nd))
        return PolyGaussTerm(poly, newA, newb, newlogc)

    def marginal(self, keep) -> "PolyGaussTerm":
        keep = list(keep)
        n = self.n
        drop = [i for i in range(n) if i not in keep]
        if not drop:
            return self
        if _mp_on():
            return self._marginal_mp(keep, drop)
        A, b = _real_array(self.A), _complex_array(self.b)
        Add = A[np.ix_(drop, drop)]
        Adk = A[np.ix_(drop, keep)]
        Akk = A[np.ix_(keep, keep)]
        Cd = _pd_inverse(Add)
        Ld = np.linalg.cholesky(Cd)
        nk, nd = len(keep), len(drop)
        newA = Akk - Adk.T @ Cd @ Adk
        newb = b[keep] - Adk.T @ Cd @ b[drop]
        _, logdet = np.linalg.slogdet(Cd)
        newlogc = complex(self.logc) + 0.5 * b[drop] @ Cd @ b[drop] + 0.5 * (nd * LOG_2PI + logdet)
        M = np.zeros((n, nk + nd))
        shift = np.zeros(n, dtype=complex)
        M[keep, np.arange(nk)] = 1.0
        M[np.ix_(drop, range(nk))] = -Cd @ Adk
        M[np.ix_(drop, range(nk, nk + nd))] = Ld
        shift[drop] = Cd @ b[drop]
        poly = self.poly.substitute(M, shift).gaussian_average(range(nk, nk + nd))
        return PolyGaussTerm(poly, 0.5 * (newA + newA.T), newb, newlogc)

    def substituted(self, M, c=None) -> "PolyGaussTerm":
        """Term as a function of ``y`` where ``x = M y + c``."""
        M = np.asarray(M, dtype=float)
        A, b = _real_array(self.A), _complex_array(self.b)
        c = np.zeros(M.shape[0]) if c is None else np.asarray(c, dtype=float)
        A2 = M.T @ A @ M
        b2 = M.T @ (b - A @ c)
        logc2 = complex(self.logc) - 0.5 * c @ A @ c + b @ c
        return PolyGaussTerm(self.poly.substitute(M, c), 0.5 * (A2 + A2.T), b2, logc2)

    def embedded(self, n_new: int, positions) -> "PolyGaussTerm":
        positions = list(positions)
        obj = self.A.dtype == object or self.b.dtype == object
        A = np.zeros((n_new, n_new), dtype=object if obj else float)
        A[np.ix_(positions, positions)] = self.A
        b = np.zeros(n_new, dtype=object if obj else complex)
        b[positions] = self.b
        return PolyGaussTerm(self.poly.embed(n_new, positions), A, b, self.logc)


def covariance_inverse(V) -> np.ndarray:
    """Inverse of a covariance matrix, correctly rounded from a 40-digit computation."""
    V = np.asarray(V, dtype=float)
    with mp.workdps(40):
        Ci = _mp_matrix(V) ** -1
        out = np.array([[float(Ci[i, j]) for j in range(Ci.cols)] for i in range(Ci.rows)])
    return 0.5 * (out + out.T)


def covariance_logdet(V) -> float:
    with mp.workdps(40):
        return float(mp.log(mp.det(_mp_matrix(V))))


def _pd_inverse(A):
    A = _real_array(A)
    A = 0.5 * (A + A.T)
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Gaussian factor is not integrable (precision matrix not positive definite)") from exc
    C = np.linalg.inv(A)
    return 0.5 * (C + C.T)


class WignerForm:
    """Finite sum of :class:`PolyGaussTerm` on ``n`` phase-space coordinates."""

    def __init__(self, terms, n: int):
        self.terms = [t for t in terms if not t.poly.is_zero()]
        self.n = int(n)
        for t in self.terms:
            if t.n != self.n:
                raise ValidationError("term dimension mismatch")

    @property
    def m(self) -> int:
        return self.n // 2

    def complex_values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n:
            raise ValidationError(f"points must have {self.n} coordinates")
        out = np.zeros(X.shape[:-1], dtype=complex)
        for t in self.terms:
            out = out + t(X)
        return out

    def __call__(self, X) -> np.ndarray:
        return np.real(self.complex_values(X))

    def __add__(self, other: "WignerForm") -> "WignerForm":
        if other.n != self.n:
            raise ValidationError("dimension mismatch")
        return WignerForm(self.terms + other.terms, self.n)

    def scaled(self, c: complex) -> "WignerForm":
        if c == 0:
            return WignerForm([], self.n)
        return WignerForm([t.scaled(c) for t in self.terms], self.n)

    def product(self, other: "WignerForm") -> "WignerForm":
        if other.n != self.n:
            raise ValidationError("dimension mismatch")
        return WignerForm([s.times(t) for s in self.terms for t in other.terms], self.n)

    def integral_complex(self) -> complex:
        return complex(sum(t.integral() for t in self.terms))

    def integral(self) -> float:
        return float(np.real(self.integral_complex()))

    def normalized(self) -> "WignerForm":
        z = self.integral()
        if abs(z) < 1e-300:
            raise NumericalError("form integrates to zero")
        return self.scaled(1.0 / z)

    def marginal(self, keep) -> "WignerForm":
        keep = [int(k) for k in keep]
        if not keep:
            raise ValidationError("marginal needs at least one kept axis")
        if len(set(keep)) != len(keep) or any(k < 0 or k >= self.n for k in keep):
            raise ValidationError("invalid axis selection")
        return WignerForm([t.marginal(keep) for t in self.terms], len(keep))

    def marginal_modes(self, modes) -> "WignerForm":
        return self.marginal([k for j in modes for k in (2 * j, 2 * j + 1)])

    def substituted(self, M, c=None) -> "WignerForm":
        """The function ``y -> W(M y + c)``."""
        M = np.asarray(M, dtype=float)
        return WignerForm([t.substituted(M, c) for t in self.terms], M.shape[1])

    def transformed(self, S, alpha=None) -> "WignerForm":
        """Wigner function after a Gaussian unitary with symplectic ``S`` and displacement ``alpha``."""
        S = np.asarray(S, dtype=float)
        Sinv = np.linalg.inv(S)
        c = None if alpha is None else -Sinv @ np.asarray(alpha, dtype=float)
        return self.substituted(Sinv, c)

    def embedded(self, n_new: int, positions) -> "WignerForm":
        return WignerForm([t.embedded(n_new, positions) for t in self.terms], n_new)

    def simplified(self, tol: float = 1e-12) -> "WignerForm":
        """Merge terms that share the same Gaussian factor."""
        groups: list = []
        for t in self.terms:
            for g in groups:
                r = g[0]
                scale = max(1.0, np.max(np.abs(r.A)), np.max(np.abs(r.b), initial=0))
                if np.max(np.abs(r.A - t.A)) <= tol * scale and np.max(np.abs(r.b - t.b), initial=0) <= tol * scale:
                    g.append(t)
                    break
            else:
                groups.append([t])
        out = []
        for g in groups:
            ref = max(g, key=lambda t: complex(t.logc).real)
            poly = Poly(self.n)
            for t in g:
                poly = poly + t.poly * _exp(t.logc - ref.logc)
            out.append(PolyGaussTerm(poly.prune(0.0), ref.A, ref.b, ref.logc))
        return WignerForm(out, self.n)

    def __repr__(self) -> str:
        return f"WignerForm(n={self.n}, terms={len(self.terms)})"


# ---------------------------------------------------------------------------
# constructors


def _gaussian_term(V, xi, weight_log: complex = 0.0, poly: Poly | None = None) -> PolyGaussTerm:
    V = np.asarray(V, dtype=float)
    n = V.shape[0]
    poly = Poly.constant(n) if poly is None else poly
    if _mp_on():
        Vm, A = precise_covariance(V)
        with mp.workdps(_PRECISION["dps"]):
            xi = np.array([lift(v) for v in np.ravel(xi)], dtype=object)
            b = A @ xi
            logdet = mp.log(mp.det(_mp_matrix(Vm)))
            logc = lift(weight_log) - (xi @ A @ xi) / 2 - (n * mp.log(2 * mp.pi) + logdet) / 2
        return PolyGaussTerm(poly, A, b, logc)
    A = covariance_inverse(V)
    xi = np.asarray(xi, dtype=complex)
    b = A @ xi
    logdet = covariance_logdet(V)
    logc = weight_log - 0.5 * xi @ A @ xi - 0.5 * (n * LOG_2PI + logdet)
    return PolyGaussTerm(poly, A, b, logc)


def gaussian_wigner(state: sy.GaussianState) -> WignerForm:
    return WignerForm([_gaussian_term(state.V, state.xi)], state.V.shape[0])


def vacuum_wigner(m: int = 1) -> WignerForm:
    return gaussian_wigner(sy.GaussianState.vacuum(m))


def coherent_wigner(alpha) -> WignerForm:
    return gaussian_wigner(sy.GaussianState.coherent(alpha))


def _mode_norm2(f, n: int) -> Poly:
    """``|x_f|^2 = (f.x)^2 + ((Omega f).x)^2`` as a polynomial."""
    B = sy.mode_matrix(f)
    if B.shape[0] != n:
        raise ValidationError("mode vector length does not match the phase-space dimension")
    u, v = Poly.linear(B[:, 0]), Poly.linear(B[:, 1])
    return u * u + v * v


def _fock_poly(nph: int, f, n: int) -> Poly:
    r2 = _mode_norm2(f, n)
    poly = Poly(n)
    power = Poly.constant(n)
    for k in range(nph + 1):
        poly = poly + power * (comb(nph, k) * (-1) ** (nph + k) / factorial(k))
        power = power * r2
    return poly


def fock_wigner(n: int, mode=None, m: int = 1) -> WignerForm:
    """Fock state ``|n>`` in mode ``mode`` (default: first mode), vacuum elsewhere."""
    if int(n) != n or n < 0:
        raise ValidationError("photon number must be a non-negative integer")
    mode = sy.unit_mode(0, m) if mode is None else np.asarray(mode, dtype=float)
    dim = 2 * m
    vac = _gaussian_term(np.eye(dim), np.zeros(dim))
    return WignerForm([vac.with_poly(_fock_poly(int(n), mode, dim))], dim)


def _check_orthonormal_modes(basis, n: int):
    Om = sy.omega(n // 2)
    for i, f in enumerate(basis):
        for j, g in enumerate(basis):
            dot = f @ g
            sdot = f @ Om @ g
            if abs(dot - (1.0 if i == j else 0.0)) > 1e-10 or abs(sdot) > 1e-10:
                raise ValidationError("modes are not orthonormal")


def multimode_fock_wigner(ns, basis=None) -> WignerForm:
    ns = [int(k) for k in ns]
    m = len(ns)
    dim = 2 * m
    basis = [sy.unit_mode(j, m) for j in range(m)] if basis is None else [np.asarray(f, dtype=float) for f in basis]
    if len(basis) != m:
        raise ValidationError("need one mode per photon number")
    _check_orthonormal_modes(basis, dim)
    poly = Poly.constant(dim)
    for k, f in zip(ns, basis):
        if k < 0:
            raise ValidationError("photon numbers must be non-negative")
        poly = poly * _fock_poly(k, f, dim)
    vac = _gaussian_term(np.eye(dim), np.zeros(dim))
    return WignerForm([vac.with_poly(poly)], dim)


def cross_wigner_displaced(V, mu_j, mu_k) -> PolyGaussTerm:
    """Wigner function of ``D(mu_j)|psi><psi|D(mu_k)^dag`` for a pure centred Gaussian ``psi``."""
    V = np.asarray(V, dtype=float)
    n = V.shape[0]
    Om = sy.omega(n // 2)
    mu_j, mu_k = np.asarray(mu_j, dtype=float), np.asarray(mu_k, dtype=float)
    d = mu_j - mu_k
    xbar = 0.5 * (mu_j + mu_k)
    k = Om @ d
    t = _gaussian_term(V, xbar)
    return PolyGaussTerm(t.poly, t.A, t.b - 0.5j * k, t.logc + 0.25j * (k @ xbar))


def superposition_wigner(amplitudes, displacements, V) -> WignerForm:
    """Normalised Wigner function of ``sum_j c_j D(mu_j)|psi>`` for pure Gaussian ``psi``."""
    amps = np.asarray(amplitudes, dtype=complex)
    mus = [np.asarray(mu, dtype=float) for mu in displacements]
    V = np.asarray(V, dtype=float)
    if abs(np.linalg.det(V) - 1.0) > 1e-8:
        raise ValidationError("superpositions need a pure Gaussian base state")
    terms = []
    for j, cj in enumerate(amps):
        for k, ck in enumerate(amps):
            w = cj * np.conj(ck)
            if w == 0:
                continue
            terms.append(cross_wigner_displaced(V, mus[j], mus[k]).scaled(w))
    form = WignerForm(terms, V.shape[0])
    return form.normalized()


def cat_wigner(parity: int, alpha) -> WignerForm:
    """Even (``parity=+1``) or odd (``-1``) superposition of coherent states ``|alpha>`` and ``|-alpha>``."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    if parity not in (1, -1):
        raise ValidationError("parity must be +1 or -1")
    if parity == -1 and np.linalg.norm(alpha) == 0:
        raise ValidationError("odd cat state is undefined for alpha = 0")
    n = alpha.size
    return superposition_wigner([1.0, float(parity)], [alpha, -alpha], np.eye(n))


def mixture_wigner(weights, forms) -> WignerForm:
    weights = np.asarray(weights, dtype=float)
    forms = list(forms)
    if len(weights) != len(forms) or len(forms) == 0:
        raise ValidationError("need one weight per form")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValidationError("weights must be non-negative and sum to one")
    n = forms[0].n
    out = WignerForm([], n)
    for w, f in zip(weights, forms):
        if f.n != n:
            raise ValidationError("forms have different dimensions")
        if w > 0:
            out = out + f.scaled(w)
    return out


def fock_vacuum_mixture(lam: float, n: int = 1) -> WignerForm:
    """``lam |0><0| + (1 - lam) |n><n|``."""
    return mixture_wigner([lam, 1.0 - lam], [fock_wigner(0), fock_wigner(n)])


def coherent_mixture(alpha) -> WignerForm:
    alpha = np.asarray(alpha, dtype=float)
    return mixture_wigner([0.5, 0.5], [coherent_wigner(alpha), coherent_wigner(-alpha)])


def gkp_wigner(logical: int, s: float, delta: float, k_range: int = 5) -> WignerForm:
    """Finite-energy GKP codeword: Gaussian-enveloped comb of displaced squeezed vacua.

    The squeezed vacuum has ``V = diag(1/s, s)``; peaks sit at ``2k sqrt(pi)``
    (logical 0) or ``(2k+1) sqrt(pi)`` (logical 1) along the amplitude axis.
    """
    if logical not in (0, 1):
        raise ValidationError("logical value must be 0 or 1")
    if not (s > 1 and delta > 0 and k_range >= 1):
        raise ValidationError("need s > 1, delta > 0 and k_range >= 1")
    ks = np.arange(-k_range, k_range + 1)
    shift = ks + 0.5 * logical
    amps = np.exp(-2.0 * np.pi * (shift * delta) ** 2)
    mus = [np.array([2.0 * sh * np.sqrt(np.pi), 0.0]) for sh in shift]
    return superposition_wigner(amps, mus, np.diag([1.0 / s, s]))


# ---------------------------------------------------------------------------
# integrals of products


def overlap(A: WignerForm, B: WignerForm) -> float:
    """``(4 pi)^m`` times the integral of ``W_A W_B``: equals ``tr(rho_A rho_B)``."""
    if A.n != B.n:
        raise ValidationError("dimension mismatch")
    return float(np.real(A.product(B).integral_complex()) * sy.TRACE_FACTOR ** (A.n / 2))


def purity(W: WignerForm) -> float:
    return overlap(W, W)


def q_function(W: WignerForm, alpha) -> float:
    """Husimi function: the Wigner function smoothed by a vacuum centred at ``alpha``."""
    alpha = np.asarray(alpha, dtype=float).ravel()
    if alpha.size != W.n:
        raise ValidationError("alpha has the wrong dimension")
    return float(np.real(W.product(coherent_wigner(alpha)).integral_complex()))


def marginal(W: WignerForm, kept_axes) -> WignerForm:
    return W.marginal(kept_axes)


def moments(W: WignerForm):
    """Mean and covariance of the quadratures, by exact Gaussian integrals."""
    n = W.n
    xs = [Poly.variable(n, i) for i in range(n)]

    def mom(p: Poly) -> float:
        return float(np.real(sum(t.with_poly(t.poly * p).integral() for t in W.terms)))

    mean = np.array([mom(x) for x in xs])
    R = np.array([[mom(xs[i] * xs[j]) for j in range(n)] for i in range(n)])
    return mean, R - np.outer(mean, mean)


def mean_photon_number(W: WignerForm) -> float:
    mean, cov = moments(W)
    return float((np.trace(cov) + mean @ mean - W.n) / 4.0)


def expectation(W: WignerForm, A: WignerForm) -> float:
    """``tr(rho A)`` for an operator with Wigner form ``A``."""
    return overlap(W, A)


# ---------------------------------------------------------------------------
# negativity


def _sphere_rule(n: int, level: int):
    """Directions and weights on the unit sphere in ``n`` dimensions."""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        k = 32 * 2**level
        phi = 2 * np.pi * np.arange(k) / k
        return np.column_stack([np.cos(phi), np.sin(phi)]), np.full(k, 2 * np.pi / k)
    if n == 3:
        nt, nphi = 16 * 2**level, 32 * 2**level
        z, wz = np.polynomial.legendre.leggauss(nt)
        phi = 2 * np.pi * np.arange(nphi) / nphi
        Z, P = np.meshgrid(z, phi, indexing="ij")
        r = np.sqrt(1 - Z**2)
        U = np.column_stack([(r * np.cos(P)).ravel(), (r * np.sin(P)).ravel(), Z.ravel()])
        w = (wz[:, None] * np.full(nphi, 2 * np.pi / nphi)[None, :]).ravel()
        return U, w
    if n == 4:
        # Hopf coordinates: (cos e cos a, cos e sin a, sin e cos b, sin e sin b)
        npan, q, nxi = 4 * 2**level, 12, 24 * 2**level
        g, wg = np.polynomial.legendre.leggauss(q)
        edges = np.linspace(0, np.pi / 2, npan + 1)
        eta = np.concatenate([0.5 * (edges[i + 1] - edges[i]) * g + 0.5 * (edges[i + 1] + edges[i]) for i in range(npan)])
        weta = np.concatenate([0.5 * (edges[i + 1] - edges[i]) * wg for i in range(npan)])
        weta = weta * np.cos(eta) * np.sin(eta)
        xi = 2 * np.pi * np.arange(nxi) / nxi
        E, A1, A2 = np.meshgrid(eta, xi, xi, indexing="ij")
        U = np.column_stack([
            (np.cos(E) * np.cos(A1)).ravel(), (np.cos(E) * np.sin(A1)).ravel(),
            (np.sin(E) * np.cos(A2)).ravel(), (np.sin(E) * np.sin(A2)).ravel(),
        ])
        w = (weta[:, None, None] * np.full((nxi, nxi), (2 * np.pi / nxi) ** 2)[None]).ravel()
        return U, w
    raise NumericalError(f"no spherical rule implemented for dimension {n}")


def _radial_moment(j: int, R):
    """``int_0^R r^j exp(-r^2/2) dr`` (vectorised in ``R``; ``R = inf`` allowed)."""
    a = 0.5 * (j + 1)
    full = np.exp(0.5 * (j - 1) * np.log(2.0) + gammaln(a))
    Rf = np.where(np.isfinite(R), R, 0.0)
    return np.where(np.isfinite(R), full * gammainc(a, 0.5 * Rf**2), full)


def _abs_integral_single(term: PolyGaussTerm, level: int) -> float:
    """``int |term|`` for a term with real Gaussian factor, by exact radial integration."""
    n = term.n
    C = _pd_inverse(term.A)
    b = np.real(term.b)
    mu = C @ b
    L = np.linalg.cholesky(C)
    q = term.poly.substitute(L, mu)
    # whitened: |F| * int |q(y)| exp(-|y|^2/2) dy
    logF = np.real(term.logc + 0.5 * b @ C @ b) + np.log(abs(np.linalg.det(L)))
    parts = q.homogeneous_parts()
    deg = max(parts) if parts else 0
    U, w = _sphere_rule(n, level)
    total = 0.0
    chunk = 20000
    for s in range(0, U.shape[0], chunk):
        Uc, wc = U[s : s + chunk], w[s : s + chunk]
        coef = np.zeros((Uc.shape[0], deg + 1))
        for k, mon in parts.items():
            coef[:, k] = np.real(Poly(n, mon)(Uc))
        total += float(wc @ _radial_abs(coef, n))
    return float(np.exp(logF) * total)


def _radial_abs(coef, n: int):
    """``int_0^inf |sum_k coef[:, k] r^k| r^(n-1) exp(-r^2/2) dr`` per row."""
    N, D1 = coef.shape
    deg = D1 - 1
    scale = np.max(np.abs(coef), axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    c = coef / scale
    if deg >= 1:
        lead = c[:, -1].copy()
        tiny = np.abs(lead) < 1e-13
        lead[tiny] = 1e-13
        comp = np.zeros((N, deg, deg))
        comp[:, 1:, :-1] = np.eye(deg - 1)[None] if deg > 1 else 0
        comp[:, :, -1] = -c[:, :-1] / lead[:, None]
        roots = np.linalg.eigvals(comp)
        real = (np.abs(roots.imag) <= 1e-9 * (1 + np.abs(roots.real))) & (roots.real > 0)
        r = np.where(real, roots.real, np.inf)
        r.sort(axis=1)
    else:
        r = np.full((N, 0), np.inf)
    bounds = np.concatenate([np.zeros((N, 1)), r, np.full((N, 1), np.inf)], axis=1)
    # cumulative moments at every boundary
    G = np.stack([_radial_moment(k + n - 1, bounds) for k in range(deg + 1)], axis=-1)
    vals = np.einsum("nbk,nk->nb", G, c)
    seg = np.diff(vals, axis=1)
    return np.sum(np.abs(seg), axis=1) * scale[:, 0]


def _single_real_envelope(W: WignerForm):
    S = W.simplified()
    if len(S.terms) == 1 and np.max(np.abs(np.imag(S.terms[0].b)), initial=0) < 1e-14:
        t = S.terms[0]
        return PolyGaussTerm(Poly(W.n, {e: v.real for e, v in t.poly.c.items()}), t.A, np.real(t.b).astype(complex),
                             complex(np.real(t.logc)) if abs(np.imag(t.logc)) < 1e-14 else t.logc)
    return None


def abs_integral(W: WignerForm, tol: float = 1e-7, max_level: int = 4) -> float:
    """``int |W|`` with an error estimate below ``tol`` (raises :class:`NumericalError` otherwise)."""
    term = _single_real_envelope(W)
    if term is not None and W.n <= 4:
        prev = None
        for level in range(max_level + 1 if W.n != 4 else 3):
            val = _abs_integral_single(term, level)
            if prev is not None and abs(val - prev) < tol:
                return val
            prev = val
        raise NumericalError("angular quadrature for the negativity did not converge")
    if W.n <= 2:
        return _abs_integral_cubature(W, tol)
    raise NumericalError("negativity volume is only available for one- and two-dimensional "
                         "multi-Gaussian forms or single-envelope forms up to four dimensions")


def _bounding_box(W: WignerForm, nsig: float = 10.0):
    lo = np.full(W.n, np.inf)
    hi = np.full(W.n, -np.inf)
    for t in W.terms:
        C = _pd_inverse(t.A)
        mu = np.real(C @ t.b)
        sig = np.sqrt(np.diag(C))
        lo = np.minimum(lo, mu - nsig * sig)
        hi = np.maximum(hi, mu + nsig * sig)
    return lo, hi


def _lines_abs_integral(W: WignerForm, ys, lo: float, hi: float, h: float = 0.02) -> np.ndarray:
    """``int |W(x, y)| dx`` over ``[lo, hi]`` for every ``y`` in ``ys``.

    The line is cut into cells of width about ``h``; cells where ``W`` changes
    sign are split at the zero (found by bisection) so that every piece is
    sign-definite and ``|int piece|`` equals ``int |piece|``.
    """
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    ncell = max(64, int(np.ceil((hi - lo) / h)))
    xs = np.linspace(lo, hi, ncell + 1)

    def f(x, y):
        return W(np.stack([x, np.broadcast_to(y, x.shape)], axis=-1))

    Y = ys[:, None]
    vals = f(np.broadcast_to(xs, (ys.size, xs.size)), Y)
    left, right = np.broadcast_to(xs[:-1], (ys.size, ncell)), np.broadcast_to(xs[1:], (ys.size, ncell))
    split = np.sign(vals[:, :-1]) * np.sign(vals[:, 1:]) < 0
    iy, ic = np.nonzero(split)
    a, b = xs[ic].copy(), xs[ic + 1].copy()
    fa = vals[iy, ic]
    yr = ys[iy]
    for _ in range(50):
        mid = 0.5 * (a + b)
        fm = f(mid, yr)
        same = np.sign(fm) == np.sign(fa)
        a = np.where(same, mid, a)
        fa = np.where(same, fm, fa)
        b = np.where(same, b, mid)
    root = np.broadcast_to(xs[1:], (ys.size, ncell)).copy()
    root[iy, ic] = 0.5 * (a + b)
    g, wg = np.polynomial.legendre.leggauss(3)

    def piece(p0, p1):
        hh = 0.5 * (p1 - p0)
        pts = 0.5 * (p0 + p1)[..., None] + hh[..., None] * g
        return np.abs(np.sum(wg * f(pts, Y[..., None]), axis=-1) * hh)

    return np.sum(piece(left, root) + piece(root, right), axis=1)


def _adaptive_gk(fun, a: float, b: float, tol: float, max_intervals: int = 4000) -> float:
    """Vectorised adaptive Gauss-Kronrod (7/15) quadrature of a batched integrand."""

    xk = np.array([0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
                   0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0])
    wk = np.array([0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
                   0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728])
    wg = np.array([0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469])
    nodes = np.concatenate([-xk[:-1], xk[::-1]])
    wkron = np.concatenate([wk[:-1], wk[::-1]])
    gauss_idx = [1, 3, 5, 7, 9, 11, 13]
    wgauss = np.concatenate([wg[:-1], wg[::-1]])
    done = 0.0
    done_err = 0.0
    intervals = np.linspace(a, b, 9)
    iv = np.column_stack([intervals[:-1], intervals[1:]])
    while True:
        c, hw = 0.5 * (iv[:, 0] + iv[:, 1]), 0.5 * (iv[:, 1] - iv[:, 0])
        pts = c[:, None] + hw[:, None] * nodes[None, :]
        fv = fun(pts.ravel()).reshape(pts.shape)
        k = hw * (fv @ wkron)
        gq = hw * (fv[:, gauss_idx] @ wgauss)
        err = np.abs(k - gq)
        width = 2 * hw
        ok = err <= tol * width / (b - a)
        done += float(np.sum(k[ok]))
        done_err += float(np.sum(err[ok]))
        if np.all(ok):
            return done
        bad = iv[~ok]
        if 2 * bad.shape[0] > max_intervals:
            raise NumericalError("cubature for the negativity did not converge")
        mid = 0.5 * (bad[:, 0] + bad[:, 1])
        iv = np.concatenate([np.column_stack([bad[:, 0], mid]), np.column_stack([mid, bad[:, 1]])])


def _abs_integral_cubature(W: WignerForm, tol: float) -> float:
    lo, hi = _bounding_box(W)
    if W.n == 1:
        W2 = WignerForm([t.embedded(2, [0]) for t in W.terms], 2)
        return float(_lines_abs_integral(W2, [0.0], lo[0], hi[0])[0])
    return _adaptive_gk(lambda y: _lines_abs_integral(W, y, lo[0], hi[0]), lo[1], hi[1], 0.1 * tol)


def negativity_volume(W: WignerForm, tol: float = 1e-7) -> float:
    """``int |W| - 1``."""
    z = W.integral()
    if abs(z - 1.0) > 1e-8:
        raise ValidationError(f"form integrates to {z}, not 1")
    return max(abs_integral(W, tol) - 1.0, 0.0)


def log_negativity(W: WignerForm, tol: float = 1e-7) -> float:
    """``log(negativity_volume + 1)``: additive over tensor products."""
    return float(np.log(negativity_volume(W, tol) + 1.0))


def minimum_value(W: WignerForm, rng: np.random.Generator | None = None, n_samples: int = 4000) -> float:
    """Smallest value of ``W`` (exact for single-envelope quadratic forms, searched otherwise).

    For a single real Gaussian envelope the sign of ``W`` is the sign of its
    polynomial, so for polynomials of degree at most two the infimum of the
    polynomial is returned (scaled by the envelope at that point).
    """
    term = _single_real_envelope(W)
    if term is not None and term.poly.degree <= 2:
        n = W.n
        Q = np.zeros((n, n))
        g = np.zeros(n)
        c0 = 0.0
        for e, v in term.poly.c.items():
            v = v.real
            idx = [i for i, a in enumerate(e) for _ in range(a)]
            if len(idx) == 0:
                c0 += v
            elif len(idx) == 1:
                g[idx[0]] += v
            else:
                i, j = idx
                if i == j:
                    Q[i, i] += v
                else:
                    Q[i, j] += v / 2
                    Q[j, i] += v / 2
        scale = max(1.0, np.max(np.abs(Q)), np.max(np.abs(g)), abs(c0))
        ev, U = np.linalg.eigh(Q)
        if ev[0] < -1e-12 * scale:
            return -np.inf
        pinv = np.where(np.abs(ev) > 1e-12 * scale, 1.0 / np.where(ev == 0, 1, ev), 0.0)
        gU = U.T @ g
        if np.any((np.abs(ev) <= 1e-12 * scale) & (np.abs(gU) > 1e-12 * scale)):
            return -np.inf
        xs = -0.5 * U @ (pinv * gU)
        pmin = c0 + 0.5 * g @ xs
        if pmin >= 0:
            # the polynomial never changes sign; report the smallest sampled value
            return max(pmin, 0.0) * float(np.real(np.exp(term.exponent(xs))))
        return float(pmin * np.real(np.exp(term.exponent(xs))))
    rng = np.random.default_rng(0) if rng is None else rng
    lo, hi = _bounding_box(W, 6.0)
    X = lo + (hi - lo) * rng.random((n_samples, W.n))
    vals = W(X)
    from scipy.optimize import minimize

    best = float(np.min(vals))
    for i in np.argsort(vals)[:5]:
        res = minimize(lambda x: float(W(x)), X[i], method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-14})
        best = min(best, float(res.fun))
    return best


def is_negative(W: WignerForm, tol: float = 1e-12) -> bool:
    return minimum_value(W) < -tol

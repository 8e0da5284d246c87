"""Truncated Fock-space brute force: the independent ground truth for the closed forms.

Everything here is computed from ladder-operator matrices and matrix
exponentials only. Phase-space objects enter solely through the quadrature
operators ``x = a + a^dag`` and ``p = -i (a - a^dag)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm, logm
from scipy.sparse.linalg import expm_multiply

from .errors import NumericalError, ValidationError
from . import symplectic as sy

DEFAULT_PAD = 30
MAX_TOTAL_DIM = 60**3


def ladder(d: int):
    """Annihilation and creation matrices on ``d`` levels."""
    if d < 2:
        raise ValidationError("truncation must be at least 2")
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)
    return a, a.T.copy()


def quadratures(d: int):
    a, ad = ladder(d)
    return a + ad, -1j * (a - ad)


def _ladder_sparse(d: int):
    return sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, format="csr")


def _local(op, j: int, m: int, d: int):
    """Sparse operator ``op`` acting on mode ``j`` of ``m`` modes."""
    out = sp.identity(1, format="csr")
    for k in range(m):
        out = sp.kron(out, op if k == j else sp.identity(d, format="csr"), format="csr")
    return out


@lru_cache(maxsize=4096)
def _displacement_cached(ax: float, ap: float, d: int) -> np.ndarray:
    xq, pq = quadratures(d)
    # D(alpha) = exp(-i q(Omega alpha) / 2) with Omega alpha = (-ap, ax)
    gen = -0.5j * (-ap * xq + ax * pq)
    return expm(gen)


def displacement(alpha, d: int) -> np.ndarray:
    """Single-mode displacement operator for the phase-space vector ``alpha``."""
    ax, ap = (float(v) for v in np.asarray(alpha, dtype=float).ravel())
    return _displacement_cached(ax, ap, d)


def squeezer(s: float, d: int) -> np.ndarray:
    """Unitary taking the vacuum to covariance ``diag(s, 1/s)``."""
    r = 0.5 * np.log(s)
    a, ad = ladder(d)
    return expm(0.5 * r * (ad @ ad - a @ a))


def beamsplitter(theta: float, d: int) -> np.ndarray:
    """Two-mode unitary matching ``symplectic.beamsplitter(theta)``."""
    a = _ladder_sparse(d)
    a1, a2 = _local(a, 0, 2, d), _local(a, 1, 2, d)
    gen = theta * (a1.T @ a2 - a2.T @ a1)
    return expm(gen.toarray())


def two_mode_squeezer(r: float, d: int) -> np.ndarray:
    """``exp{r [a^dag b^dag - a b]}``."""
    a = _ladder_sparse(d)
    a1, a2 = _local(a, 0, 2, d), _local(a, 1, 2, d)
    gen = r * (a1.T @ a2.T - a1 @ a2)
    return expm(gen.toarray())


@dataclass
class TruncatedState:
    """Density operator on ``m`` modes with ``d`` levels each.

    Pure states keep their ket; ``rho`` is then formed on demand.
    """

    d: int
    m: int
    rho: np.ndarray | None = None
    ket: np.ndarray | None = None
    leakage: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = self.d**self.m
        if self.ket is not None:
            self.ket = np.asarray(self.ket, dtype=complex).reshape(n)
        if self.rho is not None:
            self.rho = np.asarray(self.rho, dtype=complex).reshape(n, n)
        if self.ket is None and self.rho is None:
            raise ValidationError("need a ket or a density matrix")

    @property
    def dim(self) -> int:
        return self.d**self.m

    @property
    def is_pure_ket(self) -> bool:
        return self.ket is not None

    def density(self) -> np.ndarray:
        if self.rho is None:
            self.rho = np.outer(self.ket, self.ket.conj())
        return self.rho

    def trace(self) -> float:
        if self.ket is not None:
            return float(np.vdot(self.ket, self.ket).real)
        return float(np.trace(self.rho).real)

    def edge_population(self) -> float:
        """Population of the top two levels of any mode."""
        if self.ket is not None:
            probs = np.abs(self.ket.reshape((self.d,) * self.m)) ** 2
        else:
            probs = np.real(np.diag(self.rho)).reshape((self.d,) * self.m)
        tot = 0.0
        for j in range(self.m):
            sl = [slice(None)] * self.m
            sl[j] = slice(self.d - 2, self.d)
            tot += float(np.sum(probs[tuple(sl)]))
        return tot


def from_ket(ket, d: int, m: int = 1, normalize: bool = True) -> TruncatedState:
    ket = np.asarray(ket, dtype=complex).ravel()
    nrm = np.linalg.norm(ket)
    if nrm == 0:
        raise ValidationError("zero vector")
    return TruncatedState(d=d, m=m, ket=ket / nrm if normalize else ket)


def fock_ket(ns, d: int) -> np.ndarray:
    ns = [int(n) for n in np.atleast_1d(ns)]
    if any(n < 0 or n >= d for n in ns):
        raise ValidationError("photon number outside the truncation")
    ket = np.zeros((d,) * len(ns), dtype=complex)
    ket[tuple(ns)] = 1.0
    return ket.ravel()


def fock_state(ns, d: int) -> TruncatedState:
    ns = list(np.atleast_1d(ns))
    return from_ket(fock_ket(ns, d), d, len(ns))


def coherent_ket(alpha, d: int, pad: int = DEFAULT_PAD) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float).ravel()
    D = displacement(alpha, d + pad)
    return D[:d, 0].copy()


def _apply_local_dense(op, tensor, axis: int):
    out = np.tensordot(op, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _pad_ket(ket, d: int, m: int, dw: int):
    t = np.zeros((dw,) * m, dtype=complex)
    t[(slice(0, d),) * m] = ket.reshape((d,) * m)
    return t


def _pad_rho(rho, d: int, m: int, dw: int):
    t = np.zeros((dw,) * (2 * m), dtype=complex)
    t[(slice(0, d),) * (2 * m)] = rho.reshape((d,) * (2 * m))
    return t


def _parity_diag(dw: int, m: int):
    par = (-1.0) ** np.arange(dw)
    out = np.ones((dw,) * m)
    for j in range(m):
        shape = [1] * m
        shape[j] = dw
        out = out * par.reshape(shape)
    return out


def wigner_displaced_parity(state: TruncatedState, x, pad: int = DEFAULT_PAD, max_leak: float = 1e-6) -> float:
    """Wigner value from the displaced parity, ``(2 pi)^-m tr[rho D(x) (-1)^N D(x)^dag]``."""
    x = np.asarray(x, dtype=float).ravel()
    m, d = state.m, state.d
    if x.size != 2 * m:
        raise ValidationError("phase-space point has the wrong dimension")
    if state.edge_population() > max_leak:
        raise NumericalError("truncation leakage too high for a Wigner evaluation")
    dw = d + pad
    par = _parity_diag(dw, m)
    if state.is_pure_ket:
        t = _pad_ket(state.ket, d, m, dw)
        for j in range(m):
            t = _apply_local_dense(displacement(-x[2 * j : 2 * j + 2], dw), t, j)
        val = np.sum(par * np.abs(t) ** 2)
    else:
        t = _pad_rho(state.density(), d, m, dw)
        for j in range(m):
            D = displacement(-x[2 * j : 2 * j + 2], dw)
            t = _apply_local_dense(D, t, j)
            t = _apply_local_dense(D.conj(), t, m + j)
        diag = np.einsum(t.reshape(dw**m, dw**m), [0, 0], [0]).reshape((dw,) * m)
        val = np.sum(par * diag)
    return float(np.real(val)) / (2 * np.pi) ** m


def wigner_grid(state: TruncatedState, points, pad: int = DEFAULT_PAD) -> np.ndarray:
    return np.array([wigner_displaced_parity(state, p, pad) for p in np.atleast_2d(points)])


def characteristic(state: TruncatedState, lam, pad: int = DEFAULT_PAD) -> complex:
    """``tr[rho exp(i q(lambda))]`` by direct matrix exponentiation."""
    lam = np.asarray(lam, dtype=float).ravel()
    m, d = state.m, state.d
    dw = d + pad
    xq, pq = quadratures(dw)
    ops = [expm(1j * (lam[2 * j] * xq + lam[2 * j + 1] * pq)) for j in range(m)]
    if state.is_pure_ket:
        t = _pad_ket(state.ket, d, m, dw)
        u = t
        for j in range(m):
            u = _apply_local_dense(ops[j], u, j)
        return complex(np.vdot(t.ravel(), u.ravel()))
    t = _pad_rho(state.density(), d, m, dw)
    for j in range(m):
        t = _apply_local_dense(ops[j], t, j)
    return complex(np.trace(t.reshape(dw**m, dw**m)))


def moments(state: TruncatedState):
    """Mean field and covariance matrix from quadrature expectation values."""
    m, d = state.m, state.d
    xq, pq = quadratures(d)
    ops = []
    for j in range(m):
        ops.append(_local(sp.csr_matrix(xq), j, m, d))
        ops.append(_local(sp.csr_matrix(pq), j, m, d))
    n = 2 * m
    V = np.zeros((n, n))
    if state.is_pure_ket:
        psi = state.ket
        xi = np.array([np.vdot(psi, o @ psi).real for o in ops])
        I = sp.identity(d**m, format="csr")
        vecs = [(o - xi[i] * I) @ psi for i, o in enumerate(ops)]
        for i in range(n):
            for j in range(i, n):
                # tr(rho {A, B}) / 2 = Re <A psi, B psi> for Hermitian A, B
                V[i, j] = V[j, i] = np.vdot(vecs[i], vecs[j]).real
        return xi, V
    rho = state.density()
    xi = np.array([np.trace(o @ rho).real for o in ops])
    I = sp.identity(d**m, format="csr")
    sh = [o - xi[i] * I for i, o in enumerate(ops)]
    for i in range(n):
        Ai = sh[i] @ rho
        for j in range(i, n):
            V[i, j] = V[j, i] = np.trace(sh[j] @ Ai).real
    return xi, V


def von_neumann_entropy(state: TruncatedState) -> float:
    if state.is_pure_ket:
        return 0.0
    w = np.linalg.eigvalsh(state.density())
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log(w)))


def fidelity(state: TruncatedState, ket) -> float:
    ket = np.asarray(ket, dtype=complex).ravel()
    if state.is_pure_ket:
        return float(abs(np.vdot(ket, state.ket)) ** 2)
    return float(np.real(np.vdot(ket, state.density() @ ket)))


def entropy_fidelity(state: TruncatedState, psi=None):
    """Von Neumann entropy and, if ``psi`` is given, the fidelity with it."""
    if state.is_pure_ket is False:
        w = np.linalg.eigvalsh(state.density())
        if w[0] < -1e-9:
            raise ValidationError("density matrix is not positive semidefinite")
    S = von_neumann_entropy(state)
    return S, (None if psi is None else fidelity(state, psi))


def thermal_state(nu: float, d: int) -> TruncatedState:
    nbar = (nu - 1.0) / 2.0
    n = np.arange(d)
    p = nbar**n / (nbar + 1.0) ** (n + 1)
    return TruncatedState(d=d, m=1, rho=np.diag(p).astype(complex), leakage=float(1 - p.sum()))


# ---------------------------------------------------------------------------
# Gate sequences on kets in a padded working space


class _Circuit:
    """Sparse generators for ``m`` modes with ``dw`` levels each."""

    def __init__(self, m: int, dw: int):
        if dw**m > 4 * MAX_TOTAL_DIM:
            raise ValidationError("working Fock space too large")
        self.m, self.dw = m, dw
        a = _ladder_sparse(dw)
        self.a = [_local(a, j, m, dw) for j in range(m)]

    def passive(self, O):
        u = sy.unitary_from_passive(O)
        if np.allclose(u, np.eye(self.m)):
            return None
        L = logm(u)
        gen = sp.csr_matrix((self.dw**self.m,) * 2, dtype=complex)
        for j in range(self.m):
            for k in range(self.m):
                if abs(L[j, k]) > 0:
                    gen = gen + L[j, k] * (self.a[j].T @ self.a[k])
        return gen

    def squeeze(self, j: int, s: float):
        if abs(s - 1.0) < 1e-15:
            return None
        r = 0.5 * np.log(s)
        a = self.a[j]
        return (0.5 * r) * (a.T @ a.T - a @ a)

    def displace(self, xi):
        gen = sp.csr_matrix((self.dw**self.m,) * 2, dtype=complex)
        for j in range(self.m):
            beta = 0.5 * (xi[2 * j] + 1j * xi[2 * j + 1])
            if beta != 0:
                gen = gen + beta * self.a[j].T - np.conj(beta) * self.a[j]
        return gen if gen.nnz else None


def _run(gens, ket):
    for g in gens:
        if g is not None:
            ket = expm_multiply(g, ket)
    return ket


def _truncate(ket_w, m, dw, d):
    t = ket_w.reshape((dw,) * m)[(slice(0, d),) * m]
    return t.ravel()


def gaussian_recipe(V, xi):
    """Gate recipe ``(nu, O2, s, O1, xi)`` preparing the Gaussian state ``(V, xi)``.

    A thermal core with symplectic eigenvalues ``nu`` is sent through the
    interferometer ``O2``, single-mode squeezers ``s``, the interferometer
    ``O1`` and finally displaced by ``xi``.
    """
    W = sy.williamson(V)
    M = W.S.T
    bm = sy.bloch_messiah(M)
    return W.nu, bm.O2, bm.s, bm.O1, np.asarray(xi, dtype=float)


def gaussian_to_fock(V, xi=None, d: int = 40, pad: int = DEFAULT_PAD, max_leak: float = 1e-4,
                     thermal_cut: float = 1e-13) -> TruncatedState:
    """Prepare the Gaussian state ``(V, xi)`` in the truncated Fock space by gates."""
    V = np.asarray(V, dtype=float)
    m = V.shape[0] // 2
    xi = np.zeros(2 * m) if xi is None else np.asarray(xi, dtype=float)
    if d**m > MAX_TOTAL_DIM:
        raise ValidationError("truncated space too large")
    nu, O2, s, O1, xi = gaussian_recipe(V, xi)
    dw = d + pad
    circ = _Circuit(m, dw)
    gens = [circ.passive(O2)] + [circ.squeeze(j, s[j]) for j in range(m)] + [circ.passive(O1), circ.displace(xi)]
    pure = np.all(nu < 1.0 + 1e-9)
    if pure:
        ket = np.zeros(dw**m, dtype=complex)
        ket[0] = 1.0
        out = _truncate(_run(gens, ket), m, dw, d)
        leak = 1.0 - np.vdot(out, out).real
        if leak > max_leak:
            raise NumericalError(f"truncation leakage {leak:.2e} exceeds {max_leak:.0e}")
        return TruncatedState(d=d, m=m, ket=out / np.linalg.norm(out), leakage=leak)
    # mixed: propagate every significant thermal number state
    nbar = (nu - 1.0) / 2.0
    pops = []
    for nb in nbar:
        n = np.arange(dw)
        p = nb**n / (nb + 1.0) ** (n + 1) if nb > 0 else (n == 0).astype(float)
        pops.append(p)
    weights, cols = [], []
    for idx in np.ndindex(*(dw,) * m):
        w = float(np.prod([pops[j][idx[j]] for j in range(m)]))
        if w < thermal_cut:
            continue
        weights.append(w)
        cols.append(np.ravel_multi_index(idx, (dw,) * m))
    kets = np.zeros((dw**m, len(cols)), dtype=complex)
    kets[cols, np.arange(len(cols))] = 1.0
    kets = _run(gens, kets)
    out = kets.reshape((dw,) * m + (len(cols),))[(slice(0, d),) * m].reshape(d**m, len(cols))
    rho = (out * np.array(weights)) @ out.conj().T
    leak = 1.0 - np.trace(rho).real
    if leak > max_leak:
        raise NumericalError(f"truncation leakage {leak:.2e} exceeds {max_leak:.0e}")
    return TruncatedState(d=d, m=m, rho=rho / np.trace(rho).real, leakage=leak)


def apply_unitary(state: TruncatedState, U) -> TruncatedState:
    U = np.asarray(U)
    if state.is_pure_ket:
        return TruncatedState(d=state.d, m=state.m, ket=U @ state.ket)
    rho = state.density()
    return TruncatedState(d=state.d, m=state.m, rho=U @ rho @ U.conj().T)


def annihilate(state: TruncatedState, b) -> TruncatedState:
    """Normalised ``a(b) |psi>`` with ``a(b) = (q(b) + i q(Omega b)) / 2``."""
    if not state.is_pure_ket:
        raise ValidationError("annihilation implemented for kets")
    B = sy.mode_matrix(b)
    m, d = state.m, state.d
    xq, pq = quadratures(d)
    op = sp.csr_matrix((d**m, d**m), dtype=complex)
    for j in range(m):
        X = _local(sp.csr_matrix(xq), j, m, d)
        P = _local(sp.csr_matrix(pq), j, m, d)
        op = op + 0.5 * ((B[2 * j, 0] + 1j * B[2 * j, 1]) * X + (B[2 * j + 1, 0] + 1j * B[2 * j + 1, 1]) * P)
    return from_ket(op @ state.ket, d, m)


def create(state: TruncatedState, b) -> TruncatedState:
    """Normalised ``a^dag(b) |psi>``."""
    if not state.is_pure_ket:
        raise ValidationError("creation implemented for kets")
    B = sy.mode_matrix(b)
    m, d = state.m, state.d
    xq, pq = quadratures(d)
    op = sp.csr_matrix((d**m, d**m), dtype=complex)
    for j in range(m):
        X = _local(sp.csr_matrix(xq), j, m, d)
        P = _local(sp.csr_matrix(pq), j, m, d)
        op = op + 0.5 * ((B[2 * j, 0] - 1j * B[2 * j, 1]) * X + (B[2 * j + 1, 0] - 1j * B[2 * j + 1, 1]) * P)
    out = op @ state.ket
    if abs(out[-1]) > 1e-8:
        raise NumericalError("creation operator reached the truncation edge")
    return from_ket(out, d, m)


def photon_number_probability(state: TruncatedState, pattern) -> float:
    pattern = [int(n) for n in pattern]
    if any(n >= state.d for n in pattern):
        raise ValidationError("pattern exceeds truncation")
    idx = np.ravel_multi_index(pattern, (state.d,) * state.m)
    if state.is_pure_ket:
        return float(abs(state.ket[idx]) ** 2)
    return float(state.rho[idx, idx].real)


def partial_trace(state: TruncatedState, keep) -> TruncatedState:
    keep = list(keep)
    m, d = state.m, state.d
    rho = state.density().reshape((d,) * (2 * m))
    drop = [j for j in range(m) if j not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    ins = list(letters[: 2 * m])
    for j in drop:
        ins[m + j] = ins[j]
    out = [ins[j] for j in keep] + [ins[m + j] for j in keep]
    red = np.einsum("".join(ins) + "->" + "".join(out), rho)
    k = len(keep)
    return TruncatedState(d=d, m=k, rho=red.reshape(d**k, d**k))

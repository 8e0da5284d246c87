"""Phase-space conventions, Gaussian states, symplectic algebra and Gaussian channels.

Conventions used throughout the package:

* quadratures are ordered ``(x1, p1, x2, p2, ...)``;
* ``[x, p] = 2i`` so the vacuum covariance matrix is the identity;
* the symplectic form is ``Omega = diag([[0, -1], [1, 0]], ...)``;
* the trace of a product of two operators is ``(4 pi)^m`` times the phase-space
  integral of the product of their Wigner functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from .errors import ValidationError

#: Commutator scale: [x, p] = 2i.
HBAR = 2.0
#: Prefactor of the phase-space trace rule, per mode.
TRACE_FACTOR = 4.0 * np.pi
#: Tolerance for every positive-semidefinite test.
PSD_TOL = 1e-9
SYM_TOL = 1e-10


def omega(m: int) -> np.ndarray:
    """Symplectic form on ``m`` modes."""
    if int(m) != m or m < 1:
        raise ValidationError(f"mode count must be a positive integer, got {m!r}")
    return np.kron(np.eye(int(m)), np.array([[0.0, -1.0], [1.0, 0.0]]))


def _as_matrix(V, name="matrix") -> np.ndarray:
    V = np.array(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2:
        raise ValidationError(f"{name} must be a square matrix of even size, got shape {V.shape}")
    if not np.all(np.isfinite(V)):
        raise ValidationError(f"{name} has non-finite entries")
    return V


def _as_covariance(V) -> np.ndarray:
    V = _as_matrix(V, "covariance matrix")
    if np.max(np.abs(V - V.T)) > SYM_TOL * max(1.0, np.max(np.abs(V))):
        raise ValidationError("covariance matrix is not symmetric")
    return 0.5 * (V + V.T)


def heisenberg_min_eig(V) -> float:
    """Smallest eigenvalue of the Hermitian matrix ``V - i Omega``."""
    V = np.asarray(V, dtype=float)
    return float(np.linalg.eigvalsh(V - 1j * omega(V.shape[0] // 2))[0])


def is_physical(V) -> bool:
    """True iff ``V - i Omega`` is positive semidefinite (within ``PSD_TOL``)."""
    V = _as_covariance(V)
    return heisenberg_min_eig(V) >= -PSD_TOL


def is_symplectic(S, tol: float = 1e-9) -> bool:
    S = np.asarray(S, dtype=float)
    Om = omega(S.shape[0] // 2)
    return bool(np.linalg.norm(S.T @ Om @ S - Om) < tol)


def mode_matrix(b) -> np.ndarray:
    """The 2m x 2 matrix ``[b, Omega b]`` spanning the phase-space plane of mode ``b``."""
    b = np.asarray(b, dtype=float).ravel()
    if b.size % 2 or b.size == 0:
        raise ValidationError("mode vector must have even, non-zero length")
    if abs(np.linalg.norm(b) - 1.0) > 1e-12:
        raise ValidationError(f"mode vector must be normalised, |b| = {np.linalg.norm(b)}")
    return np.column_stack([b, omega(b.size // 2) @ b])


def unit_mode(j: int, m: int) -> np.ndarray:
    """Mode vector along the amplitude quadrature of mode ``j`` (0-based)."""
    b = np.zeros(2 * m)
    b[2 * j] = 1.0
    return b


@dataclass(frozen=True)
class GaussianState:
    """Mean field ``xi`` and covariance matrix ``V``."""

    xi: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        V = _as_covariance(self.V)
        xi = np.array(self.xi, dtype=float).ravel()
        if xi.shape[0] != V.shape[0]:
            raise ValidationError("mean field and covariance dimensions differ")
        if not np.all(np.isfinite(xi)):
            raise ValidationError("mean field has non-finite entries")
        if not is_physical(V):
            raise ValidationError("covariance matrix violates V - i Omega >= 0")
        V.setflags(write=False)
        xi.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "xi", xi)

    @property
    def m(self) -> int:
        return self.V.shape[0] // 2

    @classmethod
    def vacuum(cls, m: int = 1) -> "GaussianState":
        return cls(np.zeros(2 * m), np.eye(2 * m))

    @classmethod
    def coherent(cls, alpha) -> "GaussianState":
        alpha = np.asarray(alpha, dtype=float).ravel()
        return cls(alpha, np.eye(alpha.size))

    @classmethod
    def squeezed(cls, s: float, xi=None) -> "GaussianState":
        """Single-mode pure squeezed state with ``V = diag(s, 1/s)``."""
        if s <= 0:
            raise ValidationError("squeezing must be positive")
        return cls(np.zeros(2) if xi is None else xi, np.diag([s, 1.0 / s]))

    @classmethod
    def thermal(cls, nu: float, m: int = 1) -> "GaussianState":
        return cls(np.zeros(2 * m), nu * np.eye(2 * m))

    @classmethod
    def epr(cls, s: float, xi=None) -> "GaussianState":
        """Two-mode squeezed vacuum with correlated x and anti-correlated p quadratures."""
        a = (s * s + 1.0) / (2.0 * s)
        c = (s * s - 1.0) / (2.0 * s)
        V = np.array([[a, 0, c, 0], [0, a, 0, -c], [c, 0, a, 0], [0, -c, 0, a]])
        return cls(np.zeros(4) if xi is None else xi, V)

    def reduced(self, modes) -> "GaussianState":
        idx = _mode_indices(modes)
        return GaussianState(self.xi[idx], self.V[np.ix_(idx, idx)])

    def displaced(self, alpha) -> "GaussianState":
        return GaussianState(self.xi + np.asarray(alpha, dtype=float), self.V)

    def transformed(self, S) -> "GaussianState":
        """Apply a Gaussian unitary with symplectic matrix ``S``."""
        S = np.asarray(S, dtype=float)
        return GaussianState(S @ self.xi, S @ self.V @ S.T)


def direct_sum(*states: GaussianState) -> GaussianState:
    from scipy.linalg import block_diag

    return GaussianState(np.concatenate([s.xi for s in states]), block_diag(*[s.V for s in states]))


def _mode_indices(modes) -> np.ndarray:
    return np.array([k for j in modes for k in (2 * j, 2 * j + 1)], dtype=int)


@dataclass(frozen=True)
class WilliamsonDecomposition:
    """``V = S^T N S`` with ``N = diag(nu1, nu1, ..., num, num)``."""

    S: np.ndarray
    nu: np.ndarray

    @property
    def N(self) -> np.ndarray:
        return np.diag(np.repeat(self.nu, 2))

    def reconstruct(self) -> np.ndarray:
        return self.S.T @ self.N @ self.S


@dataclass(frozen=True)
class BlochMessiahDecomposition:
    """``S = O1 K O2`` with ``K = diag(s1^(1/2), s1^(-1/2), ...)``."""

    O1: np.ndarray
    s: np.ndarray
    O2: np.ndarray

    @property
    def K(self) -> np.ndarray:
        r = np.sqrt(self.s)
        return np.diag(np.ravel(np.column_stack([r, 1.0 / r])))

    def reconstruct(self) -> np.ndarray:
        return self.O1 @ self.K @ self.O2


def symplectic_eigenvalues(V) -> np.ndarray:
    """Moduli of the eigenvalues of ``i Omega V``, one per pair, sorted descending."""
    V = _as_covariance(V)
    ev = np.sort(np.abs(np.linalg.eigvals(1j * omega(V.shape[0] // 2) @ V)))[::-1]
    return ev[::2].copy()


def _sym_sqrt(V):
    w, U = np.linalg.eigh(V)
    return (U * np.sqrt(w)) @ U.T


def williamson(V) -> WilliamsonDecomposition:
    """Williamson normal form of a positive definite covariance matrix.

    The symplectic eigenvalues are the moduli of ``spec(i Omega V)``. The
    diagonalising matrix is built from the real Schur form of the
    antisymmetric matrix ``V^(1/2) Omega V^(1/2)``, which stays well defined
    when eigenvalues are degenerate.
    """
    V = _as_covariance(V)
    if np.linalg.eigvalsh(V)[0] <= 0:
        raise ValidationError("Williamson decomposition needs a positive definite matrix")
    m = V.shape[0] // 2
    Om = omega(m)
    root = _sym_sqrt(V)
    A = root @ Om @ root
    A = 0.5 * (A - A.T)
    T, Z = schur(A, output="real")
    cols, nus = [], []
    for j in range(m):
        i = 2 * j
        lower, upper = T[i + 1, i], T[i, i + 1]
        nu = np.sqrt(abs(lower * upper))
        u, v = Z[:, i], Z[:, i + 1]
        if lower < 0:
            u, v = v, u
        cols.append((u, v))
        nus.append(nu)
    nus = np.array(nus)
    order = sorted(range(m), key=lambda j: (-round(nus[j], 10), tuple(np.round(cols[j][0], 12))))
    O = np.column_stack([c for j in order for c in cols[j]])
    nus = nus[order]
    Nm = np.repeat(1.0 / np.sqrt(nus), 2)
    S = Nm[:, None] * (O.T @ root)
    return WilliamsonDecomposition(S=S, nu=nus)


def bloch_messiah(S, tol: float = 1e-10) -> BlochMessiahDecomposition:
    """Bloch-Messiah decomposition ``S = O1 K O2`` of a symplectic matrix.

    ``O1`` collects eigenvector pairs ``(v, Omega v)`` of the positive part of
    the polar decomposition; unsqueezed directions are completed with a
    symplectic Gram-Schmidt sweep.
    """
    S = _as_matrix(S, "symplectic matrix")
    if not is_symplectic(S):
        raise ValidationError("matrix is not symplectic")
    n = S.shape[0]
    m = n // 2
    Om = omega(m)
    w, U = np.linalg.eigh(S @ S.T)
    w = np.clip(w, 0, None)
    k = np.sqrt(w)
    order = np.argsort(-k, kind="stable")
    k, U = k[order], U[:, order]
    n_sq = int(np.sum(k > 1.0 + tol))
    n_sq = min(n_sq, m)
    chosen = []
    for j in range(n_sq):
        v = U[:, j].copy()
        chosen.append(v)
    # remaining directions have k ~ 1: complete them symplectically
    rest = [U[:, j] for j in range(n_sq, n - n_sq)]
    basis = []
    for v in chosen:
        basis.extend([v, Om @ v])
    for cand in rest:
        if len(basis) >= n:
            break
        v = cand.copy()
        for _ in range(2):
            for q in basis:
                v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv < 1e-6:
            continue
        v /= nv
        chosen.append(v)
        basis.extend([v, Om @ v])
    if len(chosen) != m:
        raise ValidationError("could not complete an orthonormal symplectic basis")
    cols = []
    for v in chosen:
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] < 0:
            v = -v
        cols.extend([v, Om @ v])
    O1 = np.column_stack(cols)
    kk = np.array([np.sqrt(v @ (S @ S.T) @ v) for v in chosen])
    kk = np.maximum(kk, 1.0)
    # polar decomposition S = P R with P = (S S^T)^(1/2)
    Pinv = (U / k) @ U.T
    R = Pinv @ S
    O2 = O1.T @ R
    return BlochMessiahDecomposition(O1=O1, s=kk**2, O2=O2)


def purity(state: GaussianState) -> float:
    d = float(np.linalg.det(state.V))
    if d < 1.0 - 1e-9:
        raise ValidationError(f"det V = {d} < 1: unphysical covariance matrix")
    return 1.0 / np.sqrt(d)


def _entropy_term(nu: float) -> float:
    if nu <= 1.0 + 1e-12:
        return 0.0
    a, b = (nu + 1.0) / 2.0, (nu - 1.0) / 2.0
    return a * np.log(a) - b * np.log(b)


def gaussian_entropy(V) -> float:
    """Von Neumann entropy of the Gaussian state with covariance ``V`` (nats)."""
    V = _as_covariance(V)
    if not is_physical(V):
        raise ValidationError("covariance matrix violates V - i Omega >= 0")
    return float(sum(_entropy_term(nu) for nu in symplectic_eigenvalues(V)))


def mean_photon_number(state: GaussianState) -> float:
    return float((np.trace(state.V) - state.V.shape[0] + state.xi @ state.xi) / 4.0)


@dataclass(frozen=True)
class GaussianChannel:
    """``V -> X V X^T + Vc`` and ``xi -> X xi + alpha``."""

    X: np.ndarray
    Vc: np.ndarray
    alpha: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Vc = np.array(self.Vc, dtype=float)
        if X.ndim != 2 or Vc.shape != (X.shape[0], X.shape[0]) or X.shape[0] % 2 or X.shape[1] % 2:
            raise ValidationError("channel matrices have inconsistent shapes")
        if np.max(np.abs(Vc - Vc.T), initial=0) > SYM_TOL * max(1.0, np.max(np.abs(Vc), initial=0)):
            raise ValidationError("channel noise matrix is not symmetric")
        alpha = np.zeros(X.shape[0]) if self.alpha is None else np.array(self.alpha, dtype=float).ravel()
        if alpha.shape[0] != X.shape[0]:
            raise ValidationError("channel displacement has the wrong length")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Vc", 0.5 * (Vc + Vc.T))
        object.__setattr__(self, "alpha", alpha)

    @property
    def m_in(self) -> int:
        return self.X.shape[1] // 2

    @property
    def m_out(self) -> int:
        return self.X.shape[0] // 2

    def constraint_min_eig(self) -> float:
        H = self.Vc - 1j * omega(self.m_out) + 1j * self.X @ omega(self.m_in) @ self.X.T
        return float(np.linalg.eigvalsh(H)[0])

    def is_valid(self) -> bool:
        return self.constraint_min_eig() >= -PSD_TOL

    @classmethod
    def identity(cls, m: int) -> "GaussianChannel":
        return cls(np.eye(2 * m), np.zeros((2 * m, 2 * m)))

    @classmethod
    def unitary(cls, S, alpha=None) -> "GaussianChannel":
        S = np.asarray(S, dtype=float)
        return cls(S, np.zeros_like(S), alpha)

    @classmethod
    def loss(cls, eta: float, m: int = 1) -> "GaussianChannel":
        """Uniform loss: a fraction ``eta`` of the light is replaced by vacuum."""
        if not 0.0 <= eta <= 1.0:
            raise ValidationError("loss must lie in [0, 1]")
        return cls(np.sqrt(1.0 - eta) * np.eye(2 * m), eta * np.eye(2 * m))

    @classmethod
    def displacement(cls, alpha) -> "GaussianChannel":
        alpha = np.asarray(alpha, dtype=float).ravel()
        n = alpha.size
        return cls(np.eye(n), np.zeros((n, n)), alpha)


def apply_channel(state: GaussianState, ch: GaussianChannel) -> GaussianState:
    if ch.X.shape[1] != state.V.shape[0]:
        raise ValidationError("channel input dimension does not match the state")
    if not ch.is_valid():
        raise ValidationError("channel violates the complete-positivity constraint")
    return GaussianState(ch.X @ state.xi + ch.alpha, ch.X @ state.V @ ch.X.T + ch.Vc)


def embed(S_local, modes, m: int) -> np.ndarray:
    """Embed a matrix acting on ``modes`` into the identity on ``m`` modes."""
    idx = _mode_indices(modes)
    S = np.eye(2 * m)
    S[np.ix_(idx, idx)] = S_local
    return S


def squeezer(s: float) -> np.ndarray:
    """Single-mode squeezer taking the vacuum to ``V = diag(s, 1/s)``."""
    return np.diag([np.sqrt(s), 1.0 / np.sqrt(s)])


def rotation(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def beamsplitter(theta: float) -> np.ndarray:
    """Two-mode beamsplitter mixing both quadratures with angle ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.block([[c * np.eye(2), s * np.eye(2)], [-s * np.eye(2), c * np.eye(2)]])


def two_mode_squeezer(theta: float) -> np.ndarray:
    """Symplectic matrix of ``exp{theta [a^dag(g) a^dag(b) - a(b) a(g)]}``.

    Amplitude quadratures mix with ``+sinh``, phase quadratures with ``-sinh``.
    """
    c, s = np.cosh(theta), np.sinh(theta)
    return np.array([[c, 0, s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, -s, 0, c]])


def mode_selective_beamsplitter(b, theta: float, m: int) -> np.ndarray:
    """Beamsplitter coupling mode ``b`` of ``m`` modes to one appended auxiliary mode."""
    B = mode_matrix(b)
    if B.shape[0] != 2 * m:
        raise ValidationError("mode vector length does not match the mode count")
    c, s = np.cos(theta), np.sin(theta)
    return np.block([[(c - 1.0) * B @ B.T + np.eye(2 * m), s * B], [-s * B.T, c * np.eye(2)]])


def mode_selective_two_mode_squeezer(b, theta: float, m: int) -> np.ndarray:
    """Two-mode squeezer coupling mode ``b`` of ``m`` modes to one appended auxiliary mode."""
    B = mode_matrix(b)
    if B.shape[0] != 2 * m:
        raise ValidationError("mode vector length does not match the mode count")
    c, s = np.cosh(theta), np.sinh(theta)
    Z = np.diag([1.0, -1.0])
    return np.block([[(c - 1.0) * B @ B.T + np.eye(2 * m), s * B @ Z], [s * Z @ B.T, c * np.eye(2)]])


def passive_from_unitary(U) -> np.ndarray:
    """Orthogonal symplectic matrix of the mode transformation ``a -> U a``."""
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    O = np.zeros((2 * m, 2 * m))
    for j in range(m):
        for k in range(m):
            re, im = U[j, k].real, U[j, k].imag
            O[2 * j : 2 * j + 2, 2 * k : 2 * k + 2] = [[re, -im], [im, re]]
    return O


def unitary_from_passive(O) -> np.ndarray:
    O = np.asarray(O, dtype=float)
    m = O.shape[0] // 2
    return O[0::2, 0::2] + 1j * O[1::2, 0::2]


def random_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_symplectic(m: int, rng: np.random.Generator, max_db: float = 10.0) -> np.ndarray:
    """Random symplectic matrix: interferometer, squeezers, interferometer."""
    s = 10.0 ** (rng.uniform(0.0, max_db, size=m) / 10.0)
    from scipy.linalg import block_diag

    K = block_diag(*[squeezer(x) for x in s])
    return passive_from_unitary(random_unitary(m, rng)) @ K @ passive_from_unitary(random_unitary(m, rng))


def random_covariance(m: int, rng: np.random.Generator, max_db: float = 10.0, max_nu: float = 4.0) -> np.ndarray:
    S = random_symplectic(m, rng, max_db)
    nu = rng.uniform(1.0, max_nu, size=m)
    return S.T @ np.diag(np.repeat(nu, 2)) @ S

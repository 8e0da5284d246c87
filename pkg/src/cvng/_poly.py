"""Sparse multivariate polynomials with complex coefficients.

Only the handful of operations needed for polynomial-times-Gaussian algebra
are provided: arithmetic, affine substitution and averaging over standard
normal variables.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def _coerce(v):
    # keep extended-precision scalars (mpmath) as they are
    return v if hasattr(v, "_mpf_") or hasattr(v, "_mpc_") else complex(v)


@lru_cache(maxsize=None)
def _double_factorial_moment(k: int) -> float:
    # E[w^k] for a standard normal w
    if k % 2:
        return 0.0
    out = 1.0
    for j in range(k - 1, 0, -2):
        out *= j
    return out


class Poly:
    """Polynomial in ``n`` variables stored as ``{exponent tuple: coefficient}``."""

    __slots__ = ("n", "c")

    def __init__(self, n: int, coeffs: dict | None = None):
        self.n = int(n)
        self.c = {} if coeffs is None else {k: _coerce(v) for k, v in coeffs.items() if v != 0}

    @classmethod
    def constant(cls, n: int, value: complex = 1.0) -> "Poly":
        return cls(n, {(0,) * n: value})

    @classmethod
    def variable(cls, n: int, i: int) -> "Poly":
        e = [0] * n
        e[i] = 1
        return cls(n, {tuple(e): 1.0})

    @classmethod
    def linear(cls, coef, shift: complex = 0.0) -> "Poly":
        coef = np.asarray(coef)
        n = coef.shape[0]
        out = {}
        if shift != 0:
            out[(0,) * n] = shift
        for i, v in enumerate(coef):
            if v != 0:
                e = [0] * n
                e[i] = 1
                out[tuple(e)] = v
        return cls(n, out)

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.c), default=0)

    def is_zero(self) -> bool:
        return not self.c

    def copy(self) -> "Poly":
        return Poly(self.n, dict(self.c))

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.n, other)
        out = dict(self.c)
        for e, v in other.c.items():
            out[e] = out.get(e, 0) + v
        return Poly(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.n, {e: -v for e, v in self.c.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.n, {e: v * other for e, v in self.c.items()})
        out: dict = {}
        for e1, v1 in self.c.items():
            for e2, v2 in other.c.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + v1 * v2
        return Poly(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        out = Poly.constant(self.n)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __call__(self, X) -> np.ndarray:
        """Evaluate at points ``X`` of shape (..., n)."""
        X = np.asarray(X)
        shape = X.shape[:-1]
        X = X.reshape(-1, self.n)
        if not self.c:
            return np.zeros(shape, dtype=complex)
        maxe = np.max(np.array(list(self.c.keys())), axis=0)
        pw = [[np.ones(X.shape[0])] for _ in range(self.n)]
        for i in range(self.n):
            for _ in range(int(maxe[i])):
                pw[i].append(pw[i][-1] * X[:, i])
        out = np.zeros(X.shape[0], dtype=complex)
        for e, v in self.c.items():
            t = np.full(X.shape[0], complex(v), dtype=complex)
            for i, k in enumerate(e):
                if k:
                    t = t * pw[i][k]
            out += t
        return out.reshape(shape)

    def substitute(self, M, shift=None) -> "Poly":
        """Return q(u) = p(M u + shift) with M of shape (n, k)."""
        M = np.asarray(M)
        k = M.shape[1]
        shift = np.zeros(self.n) if shift is None else np.asarray(shift)
        maxe = [0] * self.n
        for e in self.c:
            for i, a in enumerate(e):
                maxe[i] = max(maxe[i], a)
        powers = []
        for i in range(self.n):
            lin = Poly.linear(M[i], shift[i])
            seq = [Poly.constant(k)]
            for _ in range(maxe[i]):
                seq.append(seq[-1] * lin)
            powers.append(seq)
        acc: dict = {}
        for e, v in self.c.items():
            t = Poly.constant(k, v)
            for i, a in enumerate(e):
                if a:
                    t = t * powers[i][a]
            for ee, vv in t.c.items():
                acc[ee] = acc.get(ee, 0) + vv
        return Poly(k, acc)

    def gaussian_average(self, idx) -> "Poly":
        """Average over independent standard normal variables ``idx``; they are removed."""
        idx = sorted(set(int(i) for i in idx))
        keep = [i for i in range(self.n) if i not in idx]
        acc: dict = {}
        for e, v in self.c.items():
            w = 1.0
            for i in idx:
                w *= _double_factorial_moment(e[i])
                if w == 0.0:
                    break
            if w == 0.0:
                continue
            ek = tuple(e[i] for i in keep)
            acc[ek] = acc.get(ek, 0) + v * w
        return Poly(len(keep), acc)

    def embed(self, n_new: int, positions) -> "Poly":
        """Re-index into ``n_new`` variables, old variable i becoming ``positions[i]``."""
        out = {}
        for e, v in self.c.items():
            ne = [0] * n_new
            for i, a in enumerate(e):
                ne[positions[i]] = a
            out[tuple(ne)] = v
        return Poly(n_new, out)

    def prune(self, tol: float = 0.0) -> "Poly":
        return Poly(self.n, {e: v for e, v in self.c.items() if abs(v) > tol})

    def homogeneous_parts(self) -> dict:
        parts: dict = {}
        for e, v in self.c.items():
            parts.setdefault(sum(e), {})[e] = v
        return parts

    def max_abs_coeff(self) -> float:
        return max((float(abs(v)) for v in self.c.values()), default=0.0)

    def to_complex(self) -> "Poly":
        return Poly(self.n, {e: complex(v) for e, v in self.c.items()})

    def __repr__(self) -> str:
        return f"Poly(n={self.n}, terms={len(self.c)}, degree={self.degree})"

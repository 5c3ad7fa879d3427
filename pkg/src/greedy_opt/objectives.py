"""Convex target functions built from shifted p-th powers of l_p norms.

Two families are provided::

    ShiftedPNorm:  E(x) = ||x - f||_p^p
    Composite:     E(x) = ||x - f||_p^p * ||g||_q^q + ||x - g||_q^q * ||f||_p^p

Both are coordinate-separable, have continuous gradients for exponents
``> 1`` and expose the diagonal of their Hessian for the Newton-type inner
solvers.
"""
from dataclasses import dataclass

import numpy as np

from .vector_space import as_point


def _abs_pow(r, p):
    return np.abs(r) ** p


def _pow_grad(r, p):
    # p * sign(r) * |r|^(p-1); exactly 0 where r == 0 (limit for p > 1)
    return p * np.sign(r) * np.abs(r) ** (p - 1.0)


def _pow_curv(r, p, rel_floor):
    # |r_i| is floored relative to max|r| so that p < 2 stays finite at r_i = 0
    a = np.abs(r)
    a = np.maximum(a, rel_floor * a.max(initial=0.0) + 1e-300)
    return p * (p - 1.0) * a ** (p - 2.0)


class ObjectiveSpec:
    """Base class; subclasses implement ``value``, ``gradient``, ``hessian_diag``."""

    dim: int

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian_diag(self, x):
        raise NotImplementedError

    def value_rows(self, X):
        """Values at every row of the 2-D array ``X``."""
        return np.array([self.value(x) for x in X])

    def to_dict(self):
        raise NotImplementedError

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: got {x.shape}, expected ({self.dim},)")
        return x

    @staticmethod
    def from_dict(d):
        if d["kind"] == "shifted-pnorm":
            return ShiftedPNorm(d["f"], d["p"])
        if d["kind"] == "composite":
            return Composite(d["f"], d["p"], d["g"], d["q"])
        raise ValueError(f"unknown objective kind {d['kind']!r}")


class ShiftedPNorm(ObjectiveSpec):
    """E(x) = sum_i |x_i - f_i|^p with p > 1."""

    kind = "shifted-pnorm"

    def __init__(self, f, p):
        if not p > 1:
            raise ValueError(f"p must be > 1, got {p}")
        self.f = as_point(f)
        self.f.setflags(write=False)
        self.p = float(p)
        self.dim = self.f.shape[0]

    def value(self, x):
        return float(np.sum(_abs_pow(self._check(x) - self.f, self.p)))

    def value_rows(self, X):
        return np.sum(_abs_pow(np.asarray(X, dtype=float) - self.f, self.p), axis=1)

    def gradient(self, x):
        return _pow_grad(self._check(x) - self.f, self.p)

    def hessian_diag(self, x, rel_floor=1e-20):
        return _pow_curv(self._check(x) - self.f, self.p, rel_floor)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p, "f": self.f.tolist()}

    def __repr__(self):
        return f"ShiftedPNorm(dim={self.dim}, p={self.p})"


class Composite(ObjectiveSpec):
    """E(x) = ||x-f||_p^p ||g||_q^q + ||x-g||_q^q ||f||_p^p with p, q > 1.

    The two weights ``||g||_q^q`` and ``||f||_p^p`` are cached at
    construction.
    """

    kind = "composite"

    def __init__(self, f, p, g, q):
        if not (p > 1 and q > 1):
            raise ValueError(f"exponents must be > 1, got p={p}, q={q}")
        self.f = as_point(f)
        self.g = as_point(g, self.f.shape[0])
        self.f.setflags(write=False)
        self.g.setflags(write=False)
        self.p = float(p)
        self.q = float(q)
        self.dim = self.f.shape[0]
        self.g_qq = float(np.sum(_abs_pow(self.g, self.q)))
        self.f_pp = float(np.sum(_abs_pow(self.f, self.p)))

    def value(self, x):
        x = self._check(x)
        return float(np.sum(_abs_pow(x - self.f, self.p)) * self.g_qq
                     + np.sum(_abs_pow(x - self.g, self.q)) * self.f_pp)

    def value_rows(self, X):
        X = np.asarray(X, dtype=float)
        return (np.sum(_abs_pow(X - self.f, self.p), axis=1) * self.g_qq
                + np.sum(_abs_pow(X - self.g, self.q), axis=1) * self.f_pp)

    def gradient(self, x):
        x = self._check(x)
        return (self.g_qq * _pow_grad(x - self.f, self.p)
                + self.f_pp * _pow_grad(x - self.g, self.q))

    def hessian_diag(self, x, rel_floor=1e-20):
        x = self._check(x)
        return (self.g_qq * _pow_curv(x - self.f, self.p, rel_floor)
                + self.f_pp * _pow_curv(x - self.g, self.q, rel_floor))

    def to_dict(self):
        return {"kind": self.kind, "p": self.p, "q": self.q,
                "f": self.f.tolist(), "g": self.g.tolist()}

    def __repr__(self):
        return f"Composite(dim={self.dim}, p={self.p}, q={self.q})"


def value(obj, x):
    return obj.value(x)


def gradient(obj, x):
    return obj.gradient(x)


def grad_check(obj, x, h=1e-6):
    """Max relative error between the analytic gradient and central differences.

    The step for coordinate ``i`` is ``h * (1 + |x_i|)``; the relative error
    is measured against ``max(|analytic_i|, |numeric_i|, 1)``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    analytic = obj.gradient(x)
    numeric = np.empty_like(x)
    for i in range(x.shape[0]):
        step = h * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        numeric[i] = (obj.value(xp) - obj.value(xm)) / (xp[i] - xm[i])
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _unit_l1_directions(dim, n_random, rng):
    blocks = []
    if dim <= 64:
        eye = np.eye(dim)
        blocks += [eye, -eye]
    else:
        n_random = max(n_random, 256)
    if n_random:
        raw = rng.standard_normal((n_random, dim))
        raw /= np.abs(raw).sum(axis=1, keepdims=True)
        blocks.append(raw)
    return np.vstack(blocks)


def estimate_modulus(obj, sample_set, u, n_random=0, seed=0):
    """Sampled lower bound on the modulus of smoothness rho(E, S, u).

    Directions are unit vectors of l1: every ``+-e_i`` when ``dim <= 64`` and at
    least 256 random unit-l1 directions otherwise (``n_random`` adds more).
    """
    if not u > 0:
        raise ValueError("u must be positive")
    points = [np.asarray(x, dtype=float) for x in sample_set]
    if not points:
        raise ValueError("sample_set is empty")
    dirs = _unit_l1_directions(obj.dim, n_random, np.random.default_rng(seed))
    best = 0.0
    for x in points:
        ex = obj.value(x)
        for y in dirs:
            d = abs(obj.value(x + u * y) + obj.value(x - u * y) - 2.0 * ex)
            best = max(best, 0.5 * d)
    return best


@dataclass(frozen=True)
class SmoothnessProfile:
    """Power-type bound rho(E, S, u) <= gamma * u**q_power."""

    q_power: float
    gamma: float

    @property
    def dual_exponent(self):
        """p = q / (q - 1), the exponent appearing in rate estimates."""
        return self.q_power / (self.q_power - 1.0)

    def bound(self, u):
        return self.gamma * u ** self.q_power


def power_type_bound(p):
    """Smoothness profile of ``||x||_p^p``: (p, 1/p) for p <= 2, else (2, (p-1)/2).

    What the table guarantees is the first-order remainder bound
    ``0 <= E(x+uy) - E(x) - u<E'(x), y> <= 2 gamma (u ||y||_1)^q``.  The
    symmetric second difference itself can reach ``2 gamma u^q`` (it equals
    ``u^2`` for ``p = 2`` along a coordinate), so ``estimate_modulus`` should
    be compared with ``profile.bound(u)`` only up to that factor 2.

    For ``p > 2`` the bound only holds on bounded regions (it controls the
    second derivative ``p(p-1)|t|^(p-2)``, which is unbounded on the whole
    space); callers should sample inside ``|x_i - f_i| <= (2/p)^(1/(p-2))``.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p <= 2:
        return SmoothnessProfile(float(p), 1.0 / p)
    return SmoothnessProfile(2.0, (p - 1.0) / 2.0)

"""Low-dimensional convex minimizers used inside the greedy steps.

* :func:`minimize_scalar` -- bracketing plus golden-section search.
* :func:`minimize_ray` -- ``lambda >= 0`` line search from a base point.
* :func:`minimize_plane` -- the two-parameter free-relaxation problem.
* :func:`minimize_subspace` -- minimization over the span of a few atoms.
* :func:`minimize_full` -- unconstrained reference minimizer.
* :func:`soft_threshold` -- proximal map of ``kappa * ||.||_1``.
"""
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .objectives import ShiftedPNorm

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

SCALAR_TOL = 1e-10
SUBSPACE_GTOL = 1e-8


class SolverError(RuntimeError):
    """Raised when an inner solve cannot produce a meaningful answer."""


@dataclass
class SolveResult:
    argmin: Any
    min_value: float
    iterations: int
    converged: bool
    residual: float = 0.0


class _Tracked:
    """Wraps a scalar function and remembers the best point evaluated."""

    def __init__(self, f):
        self.f = f
        self.nevals = 0
        self.best_x = None
        self.best_f = math.inf

    def __call__(self, x):
        fx = float(self.f(x))
        self.nevals += 1
        if not math.isfinite(fx):
            raise SolverError(f"objective is not finite at {x!r}: {fx}")
        if fx < self.best_f or (fx == self.best_f and abs(x) < abs(self.best_x)):
            self.best_x, self.best_f = x, fx
        return fx


def _expand(f, origin, f_origin, step, max_doublings):
    """Walk from ``origin`` by doubling steps until ``f`` stops decreasing.

    Returns the bracket ``(left, right)`` in increasing order.  Requires
    ``f(origin + step) < f_origin``.
    """
    prevprev = origin
    prev, f_prev = origin + step, f(origin + step)
    k = 1
    while True:
        if k > max_doublings:
            raise SolverError("bracket expansion cap exceeded; function appears unbounded below")
        nxt = origin + step * 2.0 ** k
        f_nxt = f(nxt)
        if f_nxt >= f_prev:
            return (min(prevprev, nxt), max(prevprev, nxt))
        prevprev, prev, f_prev = prev, nxt, f_nxt
        k += 1


def _golden(f, a, b, tol, max_iter=400):
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        width = b - a
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        it += 1
        if not b - a < width:
            break
    f(0.5 * (a + b))
    return it, b - a <= tol


def minimize_scalar(f, lo=0.0, hi_hint=1.0, tol=SCALAR_TOL, max_doublings=60, start=0.0,
                    df=None, d2f=None):
    """Minimize a convex scalar function on ``[lo, inf)``.

    Pass ``lo=-math.inf`` for a search over the whole real line, started at
    ``start``.  The bracket is found by doubling ``hi_hint`` until ``f`` stops
    decreasing, then shrunk by golden section to width ``tol``.  The best
    evaluated point is returned, so the result is never worse than ``f(lo)``
    or ``f(lo + hi_hint)``.

    Golden section only locates the minimizer to about ``sqrt(eps)`` relative
    accuracy because ``f`` is flat there.  When the derivatives ``df`` and
    ``d2f`` are supplied, the result is refined by Newton steps on ``df`` that
    are kept only while ``|df|`` shrinks.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not hi_hint > 0:
        raise ValueError("hi_hint must be positive")
    tf = _Tracked(f)
    if math.isfinite(lo):
        origin = float(lo)
        f0 = tf(origin)
        if tf(origin + hi_hint) >= f0:
            bracket = (origin, origin + hi_hint)
        else:
            bracket = _expand(tf, origin, f0, hi_hint, max_doublings)
    else:
        origin = float(start)
        f0 = tf(origin)
        if tf(origin + hi_hint) < f0:
            bracket = _expand(tf, origin, f0, hi_hint, max_doublings)
        elif tf(origin - hi_hint) < f0:
            bracket = _expand(tf, origin, f0, -hi_hint, max_doublings)
        else:
            bracket = (origin - hi_hint, origin + hi_hint)
    _, ok = _golden(tf, bracket[0], bracket[1], tol)
    if df is not None:
        return _polish(tf, lo, df, d2f, ok)
    return SolveResult(tf.best_x, tf.best_f, tf.nevals, ok)


def _polish(tf, lo, df, d2f, ok, hi=math.inf, max_steps=200):
    # Safeguarded Newton on the monotone derivative: bracket a sign change of
    # df next to the golden-section point, then mix Newton steps with bisection.
    x0, f0 = tf.best_x, tf.best_f
    g0 = df(x0)
    if g0 == 0.0:
        return SolveResult(x0, f0, tf.nevals, ok, 0.0)
    direction = -1.0 if g0 > 0 else 1.0
    a, ga = x0, g0
    step = max(1e-12, 1e-9 * abs(x0))
    for _ in range(200):
        b = min(max(a + direction * step, lo), hi)
        gb = df(b)
        if gb == 0.0 or (gb > 0) != (g0 > 0):
            break
        if b == a:
            # boundary minimizer: df keeps its sign up to lo (or hi)
            return _accept(tf, x0, f0, g0, b, 0.0, ok)
        a, ga = b, gb
        step *= 4.0
    else:
        return SolveResult(x0, f0, tf.nevals, ok, abs(g0))
    if gb == 0.0:
        return _accept(tf, x0, f0, g0, b, 0.0, ok)
    lo_x, hi_x = (a, b) if a < b else (b, a)
    best_x, best_g = (a, ga) if abs(ga) <= abs(gb) else (b, gb)
    x, g = best_x, best_g
    bisect = False
    for _ in range(max_steps):
        cand = None
        if not bisect and d2f is not None:
            h = d2f(x)
            if h > 0:
                cand = x - g / h
        if cand is None or not lo_x < cand < hi_x:
            cand = 0.5 * (lo_x + hi_x)
        if cand <= lo_x or cand >= hi_x:
            break
        g_new = df(cand)
        bisect = abs(g_new) > 0.5 * abs(g)
        x, g = cand, g_new
        if abs(g) < abs(best_g):
            best_x, best_g = x, g
        if g == 0.0:
            break
        if (g > 0) == (g0 > 0):
            # same sign as the start: the root lies further along direction
            if direction > 0:
                lo_x = x
            else:
                hi_x = x
        elif direction > 0:
            hi_x = x
        else:
            lo_x = x
    return _accept(tf, x0, f0, g0, best_x, abs(best_g), ok)


def _accept(tf, x0, f0, g0, x, res, ok):
    # keep the refined point unless it is visibly worse than the golden one
    fx = tf.f(x)
    if fx <= f0 + 1e-13 * abs(f0) + 1e-300:
        return SolveResult(x, fx, tf.nevals, ok, res)
    return SolveResult(x0, f0, tf.nevals, ok, abs(g0))


def minimize_ray(obj, base, direction, tol=SCALAR_TOL, restricted=False):
    """Minimize ``lambda -> E(base + lambda * direction)`` over ``lambda >= 0``.

    With ``restricted=True`` the search is confined to ``[0, 1]``.
    """
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if not np.any(direction):
        raise ValueError("direction must be nonzero")

    def f(lam):
        return obj.value(base + lam * direction)

    def df(lam):
        return float(obj.gradient(base + lam * direction) @ direction)

    def d2f(lam):
        return float(obj.hessian_diag(base + lam * direction) @ direction ** 2)

    if not restricted:
        return minimize_scalar(f, 0.0, 1.0, tol, df=df, d2f=d2f)
    tf = _Tracked(f)
    tf(0.0)
    tf(1.0)
    _, ok = _golden(tf, 0.0, 1.0, tol)
    return _polish(tf, 0.0, df, d2f, ok, hi=1.0)


def minimize_plane(obj, G, phi, tol=SCALAR_TOL, gtol=SUBSPACE_GTOL, method="newton",
                   max_sweeps=200):
    """Minimize ``(omega, lam) -> E((1 - omega) G + lam phi)`` over the plane.

    The default ``method="newton"`` solves the 2-D problem in the coordinates
    ``(1 - omega, lam)`` with :func:`minimize_subspace`, started at ``(1, 0)``.
    ``method="sweeps"`` alternates exact 1-D searches over ``omega`` and
    ``lam``; it is kept for comparison and converges slowly when ``G`` and
    ``phi`` are strongly correlated.  ``argmin`` is the pair ``(omega, lam)``.
    """
    G = np.asarray(G, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if not np.any(phi):
        raise ValueError("phi must be nonzero")
    if method == "sweeps":
        return _plane_sweeps(obj, G, phi, tol, max_sweeps)
    if method != "newton":
        raise ValueError(f"unknown method {method!r}")
    if not np.any(G):
        r = minimize_subspace(obj, phi[None, :], None, gtol)
        return SolveResult((0.0, float(r.argmin[0])), r.min_value, r.iterations,
                           r.converged, r.residual)
    r = minimize_subspace(obj, np.vstack([G, phi]), np.array([1.0, 0.0]), gtol)
    scale, lam = r.argmin
    return SolveResult((1.0 - float(scale), float(lam)), r.min_value, r.iterations,
                       r.converged, r.residual)


def _plane_sweeps(obj, G, phi, tol, max_sweeps):
    def E(omega, lam):
        return obj.value((1.0 - omega) * G + lam * phi)

    omega, lam = 0.0, 0.0
    current = E(omega, lam)
    g_active = bool(np.any(G))
    sweeps = 0
    converged = False
    for sweeps in range(1, max_sweeps + 1):
        if g_active:
            r = minimize_scalar(lambda w: E(w, lam), -math.inf, 1.0, tol, start=omega)
            omega = r.argmin
        r = minimize_scalar(lambda t: E(omega, t), -math.inf, 1.0, tol, start=lam)
        lam = r.argmin
        improvement = current - r.min_value
        current = r.min_value
        if not g_active or improvement <= tol * (1.0 + abs(current)):
            converged = True
            break
    return SolveResult((omega, lam), current, sweeps, converged)


def _eval(obj, A, point, c):
    x = point(c)
    gc = A @ obj.gradient(x)
    return c, x, obj.value(x), gc, float(np.max(np.abs(gc)))


def _newton_direction(obj, A, x, gc):
    k = A.shape[0]
    H = (A * obj.hessian_diag(x)) @ A.T
    ridge = 1e-13 * max(np.trace(H) / k, 1e-300)
    try:
        d = -np.linalg.solve(H + ridge * np.eye(k), gc)
    except np.linalg.LinAlgError:
        return -gc
    if not np.all(np.isfinite(d)) or gc @ d >= 0:
        return -gc
    return d


def _newton_step(obj, A, point, c, d, fx, gc, res):
    """Choose a step length along the Newton direction ``d``.

    Full step under Armijo, then an exact line search on ``f``.  When ``f`` is
    flat to rounding the step is backtracked on the gradient norm instead.
    Returns ``None`` if no progress is possible.
    """
    flat_tol = 1e-13 * abs(fx) + 1e-300
    full = _eval(obj, A, point, c + d)
    if full[2] <= fx + 1e-4 * (gc @ d) and full[2] < fx - flat_tol:
        return full
    ls = minimize_scalar(lambda t: obj.value(point(c + t * d)), 0.0, 1.0, 1e-9)
    if ls.min_value < fx - flat_tol:
        return _eval(obj, A, point, c + ls.argmin * d)
    t = 1.0
    for _ in range(40):
        trial = full if t == 1.0 else _eval(obj, A, point, c + t * d)
        if trial[4] < res and trial[2] <= fx + flat_tol:
            return trial
        t *= 0.5
    return None


def minimize_subspace(obj, atoms, warm_start=None, gtol=SUBSPACE_GTOL, max_iters=5000,
                      basis=None):
    """Minimize ``c -> E(sum_k c_k atoms[k])`` over coefficient vectors.

    Damped Newton iteration in coefficient space.  The stopping rule is
    ``max_k |<E'(G), atoms[k]>| <= gtol``; hitting ``max_iters`` or stalling
    returns ``converged=False``.

    With ``basis`` (shape ``(k, natoms)``) the unknowns are ``c`` in
    ``G = (c @ basis) @ atoms``, and the point is formed in exactly that
    order.  Callers that store ``c @ basis`` as their representation then
    rebuild the very point the solver evaluated, which matters for exponents
    near 1 where one rounding step moves the gradient noticeably.
    """
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    if basis is None:
        A = atoms

        def point(v):
            return v @ atoms
    else:
        B = np.atleast_2d(np.asarray(basis, dtype=float))
        A = B @ atoms

        def point(v):
            return (v @ B) @ atoms
    k = A.shape[0]
    c = np.zeros(k) if warm_start is None else np.array(warm_start, dtype=float)
    if c.shape != (k,):
        raise ValueError(f"warm_start has shape {c.shape}, expected ({k},)")

    c, x, fx, gc, res = _eval(obj, A, point, c)
    stalls = 0
    it = 0
    while res > gtol and it < max_iters and stalls < 3:
        it += 1
        d = _newton_direction(obj, A, x, gc)
        step = _newton_step(obj, A, point, c, d, fx, gc, res)
        if step is None:
            stalls += 1
            continue
        stalls = 0
        c, x, fx, gc, res = step
    return SolveResult(c, fx, it, res <= gtol, res)


def minimize_full(obj, dim=None, gtol=SUBSPACE_GTOL, max_iters=5000):
    """Unconstrained minimizer of ``obj`` over the whole space.

    ``x = f`` is returned directly for shifted p-norms; otherwise this is
    :func:`minimize_subspace` over the canonical basis.
    """
    dim = obj.dim if dim is None else int(dim)
    if dim != obj.dim:
        raise ValueError(f"dimension mismatch: {dim} != {obj.dim}")
    if isinstance(obj, ShiftedPNorm):
        return SolveResult(obj.f.copy(), 0.0, 0, True, 0.0)
    return minimize_subspace(obj, np.eye(dim), None, gtol, max_iters)


def soft_threshold(v, kappa):
    """Component-wise ``sign(v) * max(|v| - kappa, 0)``."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)

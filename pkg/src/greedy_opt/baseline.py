"""l1-regularized comparison method.

Minimizes ``E(D^T c) + lam * ||c||_1`` over coefficient vectors ``c`` (one per
atom) by proximal gradient with backtracking, and sweeps ``lam`` over a
decreasing schedule with warm starts.  The l1 norm of the working
coefficients stands in for the atomic norm of the point.
"""
import math
from dataclasses import dataclass

import numpy as np

from .inner_solvers import soft_threshold

SPARSITY_EPS = 1e-8


@dataclass(frozen=True)
class LambdaSchedule:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("lambda schedule is empty")
        if any(not v > 0 for v in vals):
            raise ValueError("lambda values must be positive")
        object.__setattr__(self, "values", vals)

    @classmethod
    def default(cls):
        """``0.1 * 0.9**k`` for ``k = 0..49``."""
        return cls(tuple(0.1 * 0.9 ** k for k in range(50)))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass
class BaselineSolution:
    coefficients: np.ndarray
    lam: float
    objective_value: float
    penalized_value: float
    sparsity: int
    converged: bool
    iterations: int = 0
    eta: float = 1.0
    failed: bool = False


def _solution(obj, atoms, c, lam, converged, iterations, eta, failed=False):
    e = obj.value(c @ atoms)
    return BaselineSolution(
        coefficients=c,
        lam=lam,
        objective_value=e,
        penalized_value=e + lam * float(np.abs(c).sum()),
        sparsity=int(np.count_nonzero(np.abs(c) > SPARSITY_EPS)),
        converged=converged,
        iterations=iterations,
        eta=eta,
        failed=failed,
    )


def prox_solve(obj, dictionary, lam, warm_start=None, tol=1e-10, max_iters=5000, eta0=1.0,
               window=10, stall_limit=50):
    """Proximal gradient for ``E(D^T c) + lam * ||c||_1``.

    Each iteration backtracks (halving) from ``1.5 *`` the last accepted step
    until the penalized objective does not increase and the smooth part stays
    below its quadratic model at ``c``.  The run stops once the
    relative decrease stays below ``tol`` for ``window`` consecutive accepted
    steps.  If backtracking finds no acceptable step and the point is not a
    fixed point of the prox map, the failure is counted; after
    ``stall_limit`` consecutive failures the solver switches to diminishing
    steps ``eta0 / sqrt(k)`` and keeps the best iterate seen.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    atoms = dictionary.atoms
    c = np.zeros(dictionary.natoms) if warm_start is None else np.array(warm_start, dtype=float)
    if c.shape != (dictionary.natoms,):
        raise ValueError("warm start has the wrong length")

    def penalized(v):
        val = obj.value(v @ atoms) + lam * float(np.abs(v).sum())
        if not math.isfinite(val):
            raise FloatingPointError("non-finite objective in proximal gradient")
        return val

    fc = penalized(c)
    eta = eta0
    quiet = 0
    stalls = 0
    diminishing = 0
    best_c, best_f = c, fc
    for it in range(1, max_iters + 1):
        grad = atoms @ obj.gradient(c @ atoms)
        if diminishing:
            step = eta0 / math.sqrt(diminishing)
            diminishing += 1
            c = soft_threshold(c - step * grad, step * lam)
            fc = penalized(c)
            if fc < best_f:
                best_c, best_f = c, fc
            continue
        trial = 1.5 * eta
        accepted = False
        smooth = fc - lam * float(np.abs(c).sum())
        while trial > 1e-30:
            cand = soft_threshold(c - trial * grad, trial * lam)
            f_cand = penalized(cand)
            # quadratic upper model of the smooth part at c (sufficient decrease)
            step = cand - c
            model = smooth + grad @ step + (step @ step) / (2.0 * trial) \
                + lam * float(np.abs(cand).sum())
            if f_cand <= min(model, fc):
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            fixed = soft_threshold(c - eta * grad, eta * lam)
            if np.max(np.abs(fixed - c)) <= 1e-12 * max(1.0, np.max(np.abs(c))):
                return _solution(obj, atoms, c, lam, True, it, eta)
            stalls += 1
            if stalls >= stall_limit:
                diminishing = 1
            continue
        stalls = 0
        decrease = fc - f_cand
        c, fc, eta = cand, f_cand, trial
        best_c, best_f = c, fc
        if decrease <= tol * max(abs(fc), 1e-300):
            quiet += 1
            if quiet >= window:
                return _solution(obj, atoms, c, lam, True, it, eta)
        else:
            quiet = 0
    return _solution(obj, atoms, best_c, lam, False, max_iters, eta)


def sweep(obj, dictionary, schedule=None, tol=1e-10, max_iters=5000):
    """Solve for every lambda in order, warm-starting from the previous solution.

    A failed solve is recorded as a flagged zero solution and the sweep
    continues from the last good coefficients.
    """
    schedule = schedule or LambdaSchedule.default()
    out = []
    c = np.zeros(dictionary.natoms)
    eta = 1.0
    for lam in schedule:
        try:
            sol = prox_solve(obj, dictionary, lam, c, tol, max_iters, eta0=eta)
        except FloatingPointError:
            sol = _solution(obj, dictionary.atoms, np.zeros(dictionary.natoms), lam,
                            False, 0, eta, failed=True)
        else:
            c, eta = sol.coefficients, sol.eta
        out.append(sol)
    return out


def tradeoff(solutions):
    """Map sparsity -> minimal objective value over the non-failed solutions."""
    best = {}
    for sol in solutions:
        if sol.failed:
            continue
        if sol.objective_value < best.get(sol.sparsity, math.inf):
            best[sol.sparsity] = sol.objective_value
    return dict(sorted(best.items()))

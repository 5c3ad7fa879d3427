"""Weak biorthogonal greedy algorithms for convex minimization.

Three step rules are implemented, all starting from ``G_0 = 0``:

``wcga``
    Chebyshev step: re-minimize ``E`` over the span of every selected atom.
``wgafr``
    Free relaxation: ``G_m = (1 - omega) G_{m-1} + lam phi`` with
    ``(omega, lam)`` minimizing ``E`` over that plane.
``rwrga``
    Rescaled relaxation: a ray search ``lam >= 0`` along the new atom, then
    a global rescale ``mu`` of the whole iterate.

Each produces a sequence satisfying greedy selection, error reduction and
biorthogonality ``<E'(G_m), G_m> = 0``.  :func:`run` can additionally
perturb every step within an error schedule ``(delta_m, epsilon_m)``, and
:func:`verify_conditions` re-checks a finished trace against all of these.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .inner_solvers import (SCALAR_TOL, SUBSPACE_GTOL, minimize_ray, minimize_scalar,
                            minimize_subspace)
from .objectives import ObjectiveSpec
from .vector_space import AtomChoice, Dictionary, best_atom

logger = logging.getLogger(__name__)

ALGORITHMS = ("wcga", "wgafr", "rwrga")
SUPPORT_EPS = 1e-10
ZERO_SCORE = 1e-14


class GreedyRunError(RuntimeError):
    """A fatal inner-solver failure; ``trace`` holds the iterations so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class WeaknessSchedule:
    """Constant weakness sequence ``t_m = t``."""

    t: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"weakness t must lie in [0, 1], got {self.t}")

    def __call__(self, m):
        return self.t


@dataclass(frozen=True)
class ErrorSchedule:
    """Allowed step inaccuracies ``delta_m`` (objective) and ``epsilon_m`` (biorthogonality).

    ``kind`` is ``"zero"``, ``"constant"`` (``delta``, ``epsilon``) or
    ``"power"`` with ``delta_m = epsilon_m = (c / 2) m^(-q)``.
    """

    kind: str = "zero"
    delta: float = 0.0
    epsilon: float = 0.0
    c: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "power"):
            raise ValueError(f"unknown error schedule {self.kind!r}")
        if self.kind == "constant" and not (0.0 <= self.delta <= 1.0 and self.epsilon >= 0.0):
            raise ValueError("need 0 <= delta <= 1 and epsilon >= 0")
        if self.kind == "power" and not (self.c >= 0.0 and self.q > 0.0):
            raise ValueError("power schedule needs c >= 0 and q > 0")

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def constant(cls, delta, epsilon):
        return cls("constant", delta=delta, epsilon=epsilon)

    @classmethod
    def power_decay(cls, c, q):
        return cls("power", c=c, q=q)

    @classmethod
    def parse(cls, text):
        """Parse ``none``, ``power:c,q`` or ``constant:delta,epsilon``."""
        text = text.strip()
        if text in ("none", "zero"):
            return cls.zero()
        kind, _, args = text.partition(":")
        try:
            a, b = (float(v) for v in args.split(","))
        except ValueError:
            raise ValueError(f"cannot parse error schedule {text!r}") from None
        if kind == "power":
            return cls.power_decay(a, b)
        if kind == "constant":
            return cls.constant(a, b)
        raise ValueError(f"cannot parse error schedule {text!r}")

    @property
    def is_zero(self):
        return self.kind == "zero" or (self.kind == "constant" and self.delta == 0 == self.epsilon) \
            or (self.kind == "power" and self.c == 0)

    def delta_of(self, m):
        if self.kind == "constant":
            return self.delta
        if self.kind == "power":
            return min(1.0, 0.5 * self.c * m ** (-self.q))
        return 0.0

    def epsilon_of(self, m):
        if self.kind == "constant":
            return self.epsilon
        if self.kind == "power":
            return 0.5 * self.c * m ** (-self.q)
        return 0.0


@dataclass(frozen=True)
class ToleranceBundle:
    scalar_tol: float = SCALAR_TOL
    gtol: float = SUBSPACE_GTOL
    max_subspace_iters: int = 5000


@dataclass(frozen=True)
class StopRule:
    """Stop when any active criterion fires.

    ``max_iters`` defaults to ``20 * max_sparsity`` when only a sparsity
    target is given, so that runs which cannot reach it still terminate.
    """

    max_sparsity: int | None = None
    max_iters: int | None = None
    target_value: float | None = None

    def __post_init__(self):
        if self.max_sparsity is None and self.max_iters is None and self.target_value is None:
            raise ValueError("stop rule needs at least one active criterion")

    @property
    def iter_cap(self):
        if self.max_iters is not None:
            return self.max_iters
        if self.max_sparsity is not None:
            return 20 * self.max_sparsity
        return 100_000


@dataclass
class IterationRecord:
    m: int
    choice: AtomChoice
    indices: list
    coefficients: np.ndarray
    e_value: float
    biorth_residual: float
    step_params: dict = field(default_factory=dict)
    injected_delta: float = 0.0
    support_size: int = 0
    solver_converged: bool = True
    solver_residual: float = 0.0

    def to_dict(self):
        return {
            "m": self.m,
            "atom": self.choice.index,
            "sign": self.choice.sign,
            "score": self.choice.score,
            "indices": list(self.indices),
            "coefficients": np.asarray(self.coefficients).tolist(),
            "e_value": self.e_value,
            "biorth_residual": self.biorth_residual,
            "step_params": self.step_params,
            "injected_delta": self.injected_delta,
            "support_size": self.support_size,
            "solver_converged": self.solver_converged,
            "solver_residual": self.solver_residual,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            m=d["m"],
            choice=AtomChoice(d["atom"], d["sign"], d["score"]),
            indices=list(d["indices"]),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            e_value=d["e_value"],
            biorth_residual=d["biorth_residual"],
            step_params=dict(d.get("step_params", {})),
            injected_delta=d.get("injected_delta", 0.0),
            support_size=d["support_size"],
            solver_converged=d.get("solver_converged", True),
            solver_residual=d.get("solver_residual", 0.0),
        )


@dataclass
class GreedyTrace:
    algorithm: str
    objective: dict
    dictionary: dict
    weakness: WeaknessSchedule
    errors: ErrorSchedule
    e_zero: float
    restricted: bool = False
    records: list = field(default_factory=list)
    stop_reason: str = ""
    meta: dict = field(default_factory=dict)

    def e_values(self):
        return np.array([r.e_value for r in self.records])

    def iterations_to_sparsity(self, k):
        """First iteration whose support size reaches ``k``, or ``None``."""
        for r in self.records:
            if r.support_size >= k:
                return r.m
        return None

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "objective": self.objective,
            "dictionary": self.dictionary,
            "weakness": asdict(self.weakness),
            "errors": asdict(self.errors),
            "e_zero": self.e_zero,
            "restricted": self.restricted,
            "stop_reason": self.stop_reason,
            "meta": self.meta,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            algorithm=d["algorithm"],
            objective=d["objective"],
            dictionary=d["dictionary"],
            weakness=WeaknessSchedule(**d["weakness"]),
            errors=ErrorSchedule(**d["errors"]),
            e_zero=d["e_zero"],
            restricted=d.get("restricted", False),
            records=[IterationRecord.from_dict(r) for r in d["records"]],
            stop_reason=d.get("stop_reason", ""),
            meta=d.get("meta", {}),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def rebuild(self):
        """Reconstruct ``(objective, dictionary)`` from the stored descriptors."""
        return ObjectiveSpec.from_dict(self.objective), Dictionary.from_dict(self.dictionary)


@dataclass
class GreedyState:
    """Current iterate ``G = sum_k coefficients[k] * atoms[indices[k]]``."""

    indices: list
    coefficients: np.ndarray
    point: np.ndarray

    @classmethod
    def initial(cls, dim):
        return cls([], np.zeros(0), np.zeros(dim))

    @classmethod
    def from_coefficients(cls, dictionary, indices, coefficients):
        coefficients = np.asarray(coefficients, dtype=float)
        if indices:
            point = coefficients @ dictionary.atoms[indices]
        else:
            point = np.zeros(dictionary.dim)
        return cls(list(indices), coefficients, point)


def _finish(obj, dictionary, m, choice, indices, coeffs, params, converged=True, residual=0.0):
    state = GreedyState.from_coefficients(dictionary, indices, coeffs)
    record = IterationRecord(
        m=m,
        choice=choice,
        indices=list(indices),
        coefficients=state.coefficients,
        e_value=obj.value(state.point),
        biorth_residual=float(obj.gradient(state.point) @ state.point),
        step_params=params,
        support_size=int(np.count_nonzero(np.abs(state.coefficients) > SUPPORT_EPS)),
        solver_converged=bool(converged),
        solver_residual=float(residual),
    )
    return record, state


def _select(obj, dictionary, state, t_m):
    return best_atom(-obj.gradient(state.point), dictionary, t_m)


def step_wcga(obj, dictionary, state, t_m=1.0, tols=ToleranceBundle(), m=0, restricted=False):
    """Chebyshev step; a re-selected atom leaves the basis unchanged."""
    choice = _select(obj, dictionary, state, t_m)
    indices = list(state.indices)
    coeffs = state.coefficients.copy()
    if choice.index not in indices:
        indices.append(choice.index)
        coeffs = np.append(coeffs, 0.0)
    res = minimize_subspace(obj, dictionary.atoms[indices], coeffs, tols.gtol,
                            tols.max_subspace_iters)
    params = {"subspace_iterations": res.iterations}
    return _finish(obj, dictionary, m, choice, indices, res.argmin, params,
                   res.converged, res.residual)


def _with_atom(state, choice):
    """Indices including the chosen atom, and the previous coefficients padded to match."""
    indices = list(state.indices)
    coeffs = state.coefficients.copy()
    if choice.index not in indices:
        indices.append(choice.index)
        coeffs = np.append(coeffs, 0.0)
    return indices, coeffs, indices.index(choice.index)


def step_wgafr(obj, dictionary, state, t_m=1.0, tols=ToleranceBundle(), m=0, restricted=False):
    """Free-relaxation step ``G_m = (1 - omega) G_{m-1} + lam * phi``.

    The plane is parametrized by ``(1 - omega, lam)`` acting directly on the
    coefficient vector, so the stored coefficients reproduce the solver's point.
    """
    choice = _select(obj, dictionary, state, t_m)
    indices, prev, slot = _with_atom(state, choice)
    new_atom = np.zeros(len(indices))
    new_atom[slot] = choice.sign
    if np.any(prev):
        basis = np.vstack([prev, new_atom])
        warm = np.array([1.0, 0.0])
    else:
        basis = new_atom[None, :]
        warm = None
    res = minimize_subspace(obj, dictionary.atoms[indices], warm, tols.gtol,
                            tols.max_subspace_iters, basis=basis)
    coeffs = res.argmin @ basis
    scale, lam = (res.argmin if basis.shape[0] == 2 else (0.0, res.argmin[0]))
    params = {"omega": 1.0 - float(scale), "lambda": float(lam),
              "subspace_iterations": res.iterations}
    return _finish(obj, dictionary, m, choice, indices, coeffs, params,
                   res.converged, res.residual)


def step_rwrga(obj, dictionary, state, t_m=1.0, tols=ToleranceBundle(), m=0, restricted=False):
    """Ray search along the new atom followed by a rescale of the whole iterate."""
    choice = _select(obj, dictionary, state, t_m)
    phi = choice.sign * dictionary.atoms[choice.index]
    ray = minimize_ray(obj, state.point, phi, tols.scalar_tol, restricted=restricted)
    lam = float(ray.argmin)
    indices, coeffs, slot = _with_atom(state, choice)
    coeffs[slot] += lam * choice.sign
    A = dictionary.atoms[indices]
    y = coeffs @ A
    mu, mu_residual = 1.0, 0.0
    if np.any(y):
        # the point is formed from scaled coefficients, as the trace rebuilds it
        res = minimize_scalar(
            lambda s: obj.value((s * coeffs) @ A), -math.inf, 1.0, tols.scalar_tol,
            start=1.0,
            df=lambda s: float(obj.gradient((s * coeffs) @ A) @ y),
            d2f=lambda s: float(obj.hessian_diag((s * coeffs) @ A) @ (y * y)))
        mu, mu_residual = float(res.argmin), res.residual
    params = {"lambda": lam, "mu": mu}
    return _finish(obj, dictionary, m, choice, indices, mu * coeffs, params,
                   True, mu_residual)


STEPS = {"wcga": step_wcga, "wgafr": step_wgafr, "rwrga": step_rwrga}


def inject_error(record, obj, dictionary, delta_m, epsilon_m, rng, bisections=60):
    """Perturb an exact step within the allowance ``(delta_m, epsilon_m)``.

    The coefficients move along a random direction by the largest step found
    by bisection for which ``E(G) <= E_exact + delta_m`` and
    ``|<E'(G), G>| <= epsilon_m`` both hold.  Returns a new record; with
    ``delta_m = epsilon_m = 0`` the record is returned unchanged.
    """
    if delta_m == 0.0 and epsilon_m == 0.0:
        return record
    indices = record.indices
    A = dictionary.atoms[indices]
    c0 = np.asarray(record.coefficients, dtype=float)
    e_exact = record.e_value
    d = rng.standard_normal(c0.shape[0])
    norm = np.abs(d @ A).sum()
    if norm == 0.0:
        return record
    d /= norm

    def feasible(s):
        x = (c0 + s * d) @ A
        return (obj.value(x) <= e_exact + delta_m
                and abs(float(obj.gradient(x) @ x)) <= epsilon_m)

    if not feasible(0.0):
        return record
    lo, hi = 0.0, 1.0
    doublings = 0
    while feasible(hi) and doublings < 60:
        lo, hi = hi, 2.0 * hi
        doublings += 1
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        return record
    coeffs = c0 + lo * d
    new, _ = _finish(obj, dictionary, record.m, record.choice, indices, coeffs,
                     dict(record.step_params), record.solver_converged,
                     record.solver_residual)
    new.injected_delta = new.e_value - e_exact
    return new


def run(algorithm, obj, dictionary, weakness=None, errors=None, stop=None,
        tols=ToleranceBundle(), restricted=False, seed=0, meta=None):
    """Run one greedy algorithm from ``G_0 = 0`` and return its trace.

    ``restricted=True`` confines the ray search of ``rwrga`` to ``[0, 1]``.
    ``seed`` drives the random directions of error injection only.
    """
    if algorithm not in STEPS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if obj.dim != dictionary.dim:
        raise ValueError(f"objective dim {obj.dim} != dictionary dim {dictionary.dim}")
    weakness = weakness or WeaknessSchedule()
    errors = errors or ErrorSchedule.zero()
    stop = stop or StopRule(max_iters=100)
    step = STEPS[algorithm]
    rng = np.random.default_rng(seed)

    state = GreedyState.initial(dictionary.dim)
    trace = GreedyTrace(algorithm, obj.to_dict(), dictionary.to_dict(), weakness, errors,
                        e_zero=obj.value(state.point), restricted=restricted,
                        meta=dict(meta or {}))
    m = 0
    while True:
        if m >= stop.iter_cap:
            trace.stop_reason = "max_iters"
            break
        m += 1
        try:
            record, state = step(obj, dictionary, state, weakness(m), tols, m, restricted)
        except Exception as exc:
            trace.stop_reason = "error"
            raise GreedyRunError(f"{algorithm} failed at iteration {m}: {exc}", trace) from exc
        if record.choice.score <= ZERO_SCORE:
            trace.stop_reason = "converged"
            break
        if not record.solver_converged:
            logger.debug("%s m=%d: inner solve stopped at residual %.3g",
                         algorithm, m, record.solver_residual)
        if not errors.is_zero:
            record = inject_error(record, obj, dictionary, errors.delta_of(m),
                                  errors.epsilon_of(m), rng)
            state = GreedyState.from_coefficients(dictionary, record.indices,
                                                  record.coefficients)
        trace.records.append(record)
        if stop.max_sparsity is not None and record.support_size >= stop.max_sparsity:
            trace.stop_reason = "max_sparsity"
            break
        if stop.target_value is not None and record.e_value <= stop.target_value:
            trace.stop_reason = "target_value"
            break
    return trace


@dataclass
class ConditionReport:
    """Per-iteration outcome of the four class conditions."""

    rows: list
    tol: float

    CONDITIONS = ("selection", "error_reduction", "biorthogonality", "boundedness")

    @property
    def passed(self):
        return all(all(r[c] for c in self.CONDITIONS) for r in self.rows)

    def summary(self):
        """Map condition name -> number of failing iterations."""
        return {c: sum(not r[c] for r in self.rows) for c in self.CONDITIONS}

    def failures(self):
        return [r for r in self.rows if not all(r[c] for c in self.CONDITIONS)]


def _ray_grid_min(obj, G, phi, restricted, n=10_000):
    if restricted:
        lam_max = 1.0
    else:
        e0 = obj.value(G)
        lam_max = 1.0
        for _ in range(60):
            if obj.value(G + lam_max * phi) > e0:
                break
            lam_max *= 2.0
    grid = np.linspace(0.0, lam_max, n)
    best = math.inf
    for chunk in np.array_split(grid, max(1, n // 1000)):
        best = min(best, float(obj.value_rows(G + chunk[:, None] * phi).min()))
    return best


def verify_conditions(trace, obj=None, dictionary=None, tol=1e-6):
    """Re-evaluate the class conditions on every iteration of ``trace``.

    1. selection: chosen score >= t_m * max_j |<-E'(G_{m-1}), g_j>| - tol
    2. error reduction: E(G_m) <= min over a 10^4-point lambda grid of
       E(G_{m-1} + lambda phi_m) + delta_m + tol
    3. biorthogonality: |<E'(G_m), G_m>| <= epsilon_m + tol
    4. boundedness: E(G_m) <= E(0) + sum_m delta_m + tol
    """
    if obj is None or dictionary is None:
        obj, dictionary = trace.rebuild()
    c0 = sum(trace.errors.delta_of(r.m) for r in trace.records)
    e_zero = obj.value(np.zeros(dictionary.dim))
    prev = GreedyState.initial(dictionary.dim)
    rows = []
    for rec in trace.records:
        neg = -obj.gradient(prev.point)
        scores = dictionary.atoms @ neg
        chosen = rec.choice.sign * scores[rec.choice.index]
        selection = chosen >= trace.weakness(rec.m) * np.max(np.abs(scores)) - tol

        cur = GreedyState.from_coefficients(dictionary, rec.indices, rec.coefficients)
        e_cur = obj.value(cur.point)
        phi = rec.choice.sign * dictionary.atoms[rec.choice.index]
        ray_min = _ray_grid_min(obj, prev.point, phi, trace.restricted)
        reduction = e_cur <= ray_min + trace.errors.delta_of(rec.m) + tol

        biorth = abs(float(obj.gradient(cur.point) @ cur.point))
        rows.append({
            "m": rec.m,
            "selection": bool(selection),
            "error_reduction": bool(reduction),
            "biorthogonality": bool(biorth <= trace.errors.epsilon_of(rec.m) + tol),
            "boundedness": bool(e_cur <= e_zero + c0 + tol),
            "biorth_residual": biorth,
        })
        prev = cur
    return ConditionReport(rows, tol)

"""Random instances for the four benchmark settings and the multi-seed harness.

Examples 1-3 use a random-uniform dictionary and targets built as normal
combinations of randomly chosen atoms; Example 4 uses the canonical basis with
dense normal targets.  Scores are normalized to ``[0, 1]`` by
``(E - inf E) / (E(0) - inf E)`` and aggregated per support size.
"""
import csv
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baseline, greedy
from .greedy import ErrorSchedule, StopRule, ToleranceBundle, WeaknessSchedule
from .inner_solvers import minimize_full
from .objectives import Composite, ShiftedPNorm
from .vector_space import build_dictionary

logger = logging.getLogger(__name__)

GREEDY_ALGORITHMS = ("wcga", "wgafr", "rwrga")
ALL_ALGORITHMS = GREEDY_ALGORITHMS + ("l1",)

# paper-scale parameters of each setting
EXAMPLES = {
    1: {"dictionary": "random-uniform", "dim": 500, "natoms": 1000, "p": 1.2, "q": None,
        "support": (60,)},
    2: {"dictionary": "random-uniform", "dim": 500, "natoms": 1000, "p": 3.0, "q": 1.2,
        "support": (30, 30)},
    3: {"dictionary": "random-uniform", "dim": 100, "natoms": 200, "p": 4.0, "q": 1.5,
        "support": (30, 30)},
    4: {"dictionary": "canonical", "dim": 200, "natoms": 200, "p": 7.0, "q": 3.0,
        "support": None},
}
DESK_DIM = {1: 50, 2: 50, 3: 50, 4: 50}
PAPER_TARGET_SPARSITY = {1: 50, 2: 50, 3: 50, 4: 100}
RAW_HEADER = ["example", "algorithm", "seed", "iteration", "sparsity", "value_raw",
              "value_normalized"]
AGG_HEADER = ["example", "algorithm", "sparsity", "mean", "min", "max", "n_seeds"]
E_INF_GTOL = 1e-10


class DegenerateInstanceError(ValueError):
    pass


@dataclass
class InstanceMeta:
    example_id: int
    seed: int
    dim: int
    natoms: int
    p: float
    q: float | None
    f_support: list
    f_coefficients: list
    g_support: list | None = None
    g_coefficients: list | None = None

    def rebuild(self, dictionary):
        """Reassemble ``(f, g)`` from the stored supports and coefficients."""
        def combo(support, coeffs):
            if support is None:
                return None
            return np.asarray(coeffs) @ dictionary.atoms[support]
        return combo(self.f_support, self.f_coefficients), combo(self.g_support,
                                                                 self.g_coefficients)


def gen_example(example_id, seed, dim=None, natoms=None, support=None):
    """Generate ``(dictionary, objective, meta)`` for one setting.

    ``dim`` and ``natoms`` default to the full-size benchmark values; for random dictionaries
    ``natoms`` defaults to twice ``dim`` when only ``dim`` is overridden.
    Support sizes are capped at ``natoms`` unless given via ``support``.
    """
    if example_id not in EXAMPLES:
        raise ValueError(f"unknown example {example_id!r}; expected 1-4")
    ex = EXAMPLES[example_id]
    dim = int(dim or ex["dim"])
    if ex["dictionary"] == "canonical":
        natoms = dim
        dictionary = build_dictionary({"kind": "canonical", "dim": dim}, seed)
    else:
        natoms = int(natoms or (ex["natoms"] if dim == ex["dim"] else 2 * dim))
        dictionary = build_dictionary({"kind": "random-uniform", "dim": dim,
                                       "natoms": natoms}, seed)
    # separate stream from the one that drew the dictionary
    rng = np.random.default_rng([seed, example_id])
    p, q = ex["p"], ex["q"]
    if ex["support"] is None:
        full = list(range(dim))
        a1 = rng.standard_normal(dim)
        a2 = rng.standard_normal(dim)
        meta = InstanceMeta(example_id, seed, dim, natoms, p, q, full, a1.tolist(),
                            full, a2.tolist())
    else:
        sizes = support or ex["support"]
        if isinstance(sizes, int):
            sizes = (sizes,) * len(ex["support"])
        sizes = [min(int(k), natoms) for k in sizes]
        supports, coeffs = [], []
        for k in sizes:
            supports.append(rng.permutation(natoms)[:k].tolist())
            coeffs.append(rng.standard_normal(k).tolist())
        if len(sizes) == 1:
            meta = InstanceMeta(example_id, seed, dim, natoms, p, q, supports[0], coeffs[0])
        else:
            meta = InstanceMeta(example_id, seed, dim, natoms, p, q, supports[0], coeffs[0],
                                supports[1], coeffs[1])
    f, g = meta.rebuild(dictionary)
    obj = ShiftedPNorm(f, p) if g is None else Composite(f, p, g, q)
    return dictionary, obj, meta


def infimum(obj):
    """``inf E`` for the benchmark objectives.

    Zero for the shifted p-norm.  The composite objective is separable, so
    its infimum is found one coordinate at a time by a Newton solve on the
    full canonical basis (whose Hessian is diagonal).
    """
    if isinstance(obj, ShiftedPNorm):
        return 0.0
    return minimize_full(obj, obj.dim, gtol=E_INF_GTOL).min_value


def normalized_score(e_value, e_zero, e_inf):
    """Return ``(score, clamped)`` with the score clipped to ``[0, 1 + 1e-9]``."""
    if not e_zero > e_inf:
        raise DegenerateInstanceError(f"E(0) = {e_zero} is not above inf E = {e_inf}")
    s = (e_value - e_inf) / (e_zero - e_inf)
    if s < 0.0:
        return 0.0, True
    if s > 1.0 + 1e-9:
        return 1.0 + 1e-9, True
    return s, False


@dataclass
class ExperimentConfig:
    example_id: int
    n_sims: int = 20
    base_seed: int = 0
    max_sparsity: int = 50
    algorithms: tuple = GREEDY_ALGORITHMS + ("l1",)
    weakness: float = 1.0
    errors: str = "none"
    dim: int | None = None
    natoms: int | None = None
    support: int | None = None
    paper_scale: bool = False
    tols: ToleranceBundle = field(default_factory=ToleranceBundle)
    l1_max_iters: int = 5000
    workers: int = 1

    def __post_init__(self):
        if self.example_id not in EXAMPLES:
            raise ValueError(f"unknown example {self.example_id!r}; expected 1-4")
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        if self.max_sparsity < 1:
            raise ValueError("max_sparsity must be >= 1")
        bad = set(self.algorithms) - set(ALL_ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        ErrorSchedule.parse(self.errors)
        WeaknessSchedule(self.weakness)

    @property
    def instance_dim(self):
        if self.dim:
            return self.dim
        return None if self.paper_scale else DESK_DIM[self.example_id]

    @property
    def sparsity_cap(self):
        """Sparsity target, capped by what the instance can reach."""
        ex = EXAMPLES[self.example_id]
        dim = self.instance_dim or ex["dim"]
        if ex["dictionary"] == "canonical":
            reach = dim
        else:
            reach = min(dim, self.natoms or (ex["natoms"] if dim == ex["dim"] else 2 * dim))
        return min(self.max_sparsity, reach)

    def to_dict(self):
        d = asdict(self)
        d["algorithms"] = list(self.algorithms)
        return d


@dataclass
class SeedResult:
    seed: int
    meta: InstanceMeta
    e_zero: float
    e_inf: float
    # algorithm -> list of (iteration, sparsity, raw value, normalized)
    rows: dict
    # algorithm -> {sparsity: best normalized score at support <= sparsity}
    curves: dict
    # algorithm -> iterations to reach the sparsity target (None if not reached)
    iterations: dict
    clamped: int = 0
    error: str | None = None


@dataclass
class AggregateReport:
    example_id: int
    n_sims: int
    max_sparsity: int
    # algorithm -> {sparsity: (mean, min, max, n_seeds)}
    curves: dict
    # algorithm -> mean iterations to the sparsity target over seeds that reached it
    mean_iterations: dict
    failed_seeds: list
    clamped: int

    def to_dict(self):
        return {
            "example_id": self.example_id,
            "n_sims": self.n_sims,
            "max_sparsity": self.max_sparsity,
            "curves": {a: {str(s): list(v) for s, v in c.items()} for a, c in self.curves.items()},
            "mean_iterations": self.mean_iterations,
            "failed_seeds": self.failed_seeds,
            "clamped": self.clamped,
        }


def _greedy_curve(trace, e_zero, e_inf, cap):
    rows, best = [], {0: 1.0}
    clamped = 0
    for rec in trace.records:
        s, c = normalized_score(rec.e_value, e_zero, e_inf)
        clamped += c
        rows.append((rec.m, rec.support_size, rec.e_value, s))
        if rec.support_size <= cap:
            best[rec.support_size] = min(best.get(rec.support_size, math.inf), s)
    # best value achievable with support at most s
    curve, run = {}, math.inf
    for s in range(cap + 1):
        if s in best:
            run = min(run, best[s])
        if run < math.inf:
            curve[s] = run
    return rows, curve, clamped


def run_seed(config, seed):
    """Generate one instance and run every configured algorithm on it."""
    dictionary, obj, meta = gen_example(config.example_id, seed, config.instance_dim,
                                        config.natoms, config.support)
    e_zero = obj.value(np.zeros(obj.dim))
    e_inf = infimum(obj)
    if not e_zero > e_inf:
        raise DegenerateInstanceError(f"seed {seed}: E(0) <= inf E")
    cap = config.sparsity_cap
    stop = StopRule(max_sparsity=cap)
    errors = ErrorSchedule.parse(config.errors)
    weakness = WeaknessSchedule(config.weakness)
    result = SeedResult(seed, meta, e_zero, e_inf, {}, {}, {})
    for alg in config.algorithms:
        if alg == "l1":
            sols = baseline.sweep(obj, dictionary, max_iters=config.l1_max_iters)
            rows, curve = [], {}
            for k, sol in enumerate(sols, start=1):
                if sol.failed:
                    continue
                s, c = normalized_score(sol.objective_value, e_zero, e_inf)
                result.clamped += c
                rows.append((k, sol.sparsity, sol.objective_value, s))
                if sol.sparsity <= cap:
                    curve[sol.sparsity] = min(curve.get(sol.sparsity, math.inf), s)
            curve.setdefault(0, 1.0)
            result.rows[alg] = rows
            result.curves[alg] = dict(sorted(curve.items()))
            result.iterations[alg] = None
            continue
        trace = greedy.run(alg, obj, dictionary, weakness, errors, stop, config.tols,
                           seed=seed, meta={"example": config.example_id, "seed": seed})
        rows, curve, clamped = _greedy_curve(trace, e_zero, e_inf, cap)
        result.rows[alg] = rows
        result.curves[alg] = curve
        result.iterations[alg] = trace.iterations_to_sparsity(cap)
        result.clamped += clamped
    return result


def _run_seed_safe(args):
    config, seed = args
    try:
        return run_seed(config, seed)
    except Exception as exc:  # recorded per seed, excluded from aggregation
        return SeedResult(seed, None, math.nan, math.nan, {}, {}, {}, error=repr(exc))


def aggregate(config, results):
    ok = [r for r in results if r.error is None]
    curves, mean_iters = {}, {}
    for alg in config.algorithms:
        per_s = {}
        for r in ok:
            for s, v in r.curves.get(alg, {}).items():
                per_s.setdefault(s, []).append(v)
        curves[alg] = {s: (float(np.mean(v)), float(np.min(v)), float(np.max(v)), len(v))
                       for s, v in sorted(per_s.items())}
        if alg != "l1":
            its = [r.iterations[alg] for r in ok if r.iterations.get(alg) is not None]
            mean_iters[alg] = float(np.mean(its)) if its else None
    return AggregateReport(config.example_id, config.n_sims, config.sparsity_cap, curves,
                           mean_iters, [r.seed for r in results if r.error is not None],
                           sum(r.clamped for r in ok))


def run_batch(config):
    """Run every seed ``base_seed + i`` and aggregate in seed order.

    Returns ``(report, results)``; failed seeds carry their error string and
    are left out of the aggregates.
    """
    jobs = [(config, config.base_seed + i) for i in range(config.n_sims)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_seed_safe, jobs))
    else:
        results = [_run_seed_safe(j) for j in jobs]
    failed = [r for r in results if r.error is not None]
    if failed:
        warnings.warn(f"{len(failed)} of {len(results)} seeds failed: "
                      + "; ".join(f"{r.seed}: {r.error}" for r in failed))
    return aggregate(config, results), results


def _fmt(x):
    return repr(float(x))


def emit_csv(report, results, raw_path, agg_path):
    """Write the per-iteration raw CSV and the per-sparsity aggregate CSV."""
    with open(raw_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for r in results:
            if r.error is not None:
                continue
            for alg, rows in r.rows.items():
                for it, sp, raw, norm in rows:
                    w.writerow([report.example_id, alg, r.seed, it, sp, _fmt(raw), _fmt(norm)])
    with open(agg_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for alg, curve in report.curves.items():
            for s, (mean, lo, hi, n) in curve.items():
                w.writerow([report.example_id, alg, s, _fmt(mean), _fmt(lo), _fmt(hi), n])


def emit_json(config, report, results, path):
    warn = [f"seed {r.seed}: {r.error}" for r in results if r.error is not None]
    if report.clamped:
        warn.append(f"{report.clamped} normalized scores were clamped to [0, 1]")
    doc = {
        "config": config.to_dict(),
        "instances": [asdict(r.meta) for r in results if r.meta is not None],
        "aggregates": report.to_dict(),
        "warnings": warn,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def emit_svg(report, path):
    """Mean curve with a min-max band per algorithm, normalized score vs sparsity."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed salt keeps generated element ids, and so the file, reproducible
    with plt.rc_context({"svg.hashsalt": "greedy-opt"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for alg, curve in report.curves.items():
            if not curve:
                continue
            s = np.array(list(curve))
            vals = np.array(list(curve.values()))
            line, = ax.plot(s, vals[:, 0], label=alg.upper() if alg != "l1" else "l1-regularized")
            ax.fill_between(s, vals[:, 1], vals[:, 2], color=line.get_color(), alpha=0.2, lw=0)
        ax.set_xlabel("sparsity")
        ax.set_ylabel("normalized objective")
        ax.set_ylim(0.0, 1.02)
        ax.set_title(f"Example {report.example_id}: mean and min-max band over "
                     f"{report.n_sims} simulations")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def write_outputs(config, report, results, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, f"example{config.example_id}")
    paths = {"raw": stem + "_raw.csv", "aggregate": stem + "_aggregate.csv",
             "json": stem + "_report.json", "svg": stem + ".svg"}
    emit_csv(report, results, paths["raw"], paths["aggregate"])
    emit_json(config, report, results, paths["json"])
    emit_svg(report, paths["svg"])
    return paths

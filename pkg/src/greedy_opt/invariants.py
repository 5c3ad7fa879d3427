"""Property suites shared by the ``verify`` command and the test-suite.

Each check returns a :class:`CheckResult`; a suite is a list of them.
"""
from dataclasses import dataclass

import numpy as np

from .experiments import gen_example, infimum
from .greedy import ALGORITHMS, StopRule, run, verify_conditions
from .objectives import ShiftedPNorm, power_type_bound
from .vector_space import build_dictionary

BIORTH_TOL = 1e-6
MONOTONE_TOL = 1e-10
LEMMA_TOL = 1e-8
COINCIDE_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def small_instance(example_id, seed, dim=20, natoms=40):
    """Desk-size instance: random dictionaries use ``dim``/``natoms``, canonical uses ``dim``."""
    if example_id == 4:
        return gen_example(4, seed, dim=dim)
    return gen_example(example_id, seed, dim=dim, natoms=natoms, support=10)


def solved_target(obj):
    """Objective level at which an instance counts as solved (normalized 1e-12)."""
    e0 = obj.value(np.zeros(obj.dim))
    e_inf = infimum(obj)
    return e_inf + 1e-12 * (e0 - e_inf)


def check_conditions(traces, tol=BIORTH_TOL):
    """Conditions (selection, error reduction, biorthogonality, boundedness) on every trace."""
    bad = {}
    worst = 0.0
    for tr, obj, dic in traces:
        rep = verify_conditions(tr, obj, dic, tol)
        for k, v in rep.summary().items():
            bad[k] = bad.get(k, 0) + v
        worst = max([worst] + [r["biorth_residual"] for r in rep.rows])
    out = []
    for k, v in bad.items():
        detail = f"{v} failing iterations"
        if k == "biorthogonality":
            detail += f", max |<E'(G),G>| = {worst:.2e}"
        out.append(CheckResult(f"condition:{k}", v == 0, detail))
    return out


def check_monotone(traces, tol=MONOTONE_TOL):
    worst = 0.0
    for tr, _, _ in traces:
        e = np.concatenate([[tr.e_zero], tr.e_values()])
        if e.size > 1:
            worst = max(worst, float(np.max(np.diff(e))))
    return CheckResult("monotone decrease", worst <= tol, f"max increase {worst:.2e}")


def check_first_step(runs):
    """Iteration 1 is the same for all three algorithms."""
    worst = 0.0
    same_atom = True
    for by_alg in runs:
        recs = [tr.records[0] for tr in by_alg.values() if tr.records]
        if len(recs) < 2:
            continue
        same_atom &= len({(r.choice.index, r.choice.sign) for r in recs}) == 1
        e = [r.e_value for r in recs]
        worst = max(worst, max(e) - min(e))
    return CheckResult("first-step coincidence", same_atom and worst <= 1e-10,
                       f"max E spread {worst:.2e}, same atom: {same_atom}")


def check_lemma(seeds, dim=20, natoms=40, p=1.5, iters=20, k=8):
    """Per-iteration error-reduction inequality for shifted p-norms with p <= 2.

    With ``f = sum a_k g_k`` and ``A = max(1, sum |a_k|)``, ``f / A`` lies in the
    convex hull of the symmetric dictionary and ``E(f) = 0``, so every step
    must satisfy ``E_m <= E_{m-1} + min_{lam>=0} (-lam t E_{m-1} / A + 2 gamma lam^q)``.
    The minimum is ``-a lam* (1 - 1/q)`` at ``lam* = (a / (2 gamma q))^(1/(q-1))``.
    """
    prof = power_type_bound(p)
    q, gamma = prof.q_power, prof.gamma
    worst = -np.inf
    checked = 0
    for seed in seeds:
        dic = build_dictionary({"kind": "random-uniform", "dim": dim, "natoms": natoms}, seed)
        rng = np.random.default_rng([seed, 99])
        support = rng.permutation(natoms)[:k]
        a = rng.standard_normal(k)
        A = max(1.0, float(np.abs(a).sum()))
        obj = ShiftedPNorm(a @ dic.atoms[support], p)
        for alg in ALGORITHMS:
            tr = run(alg, obj, dic, stop=StopRule(max_iters=iters))
            prev = tr.e_zero
            floor = 1e-12 * tr.e_zero
            for rec in tr.records:
                if prev <= floor:
                    break
                slope = prev / A
                lam = (slope / (2.0 * gamma * q)) ** (1.0 / (q - 1.0))
                bound = prev - slope * lam * (1.0 - 1.0 / q)
                worst = max(worst, rec.e_value - bound)
                checked += 1
                prev = rec.e_value
    return CheckResult("error-reduction lemma", checked > 0 and worst <= LEMMA_TOL,
                       f"max excess over bound {worst:.2e} on {checked} steps")


def check_coincidence(seeds, dim=50, tol=COINCIDE_TOL):
    """Canonical basis with a separable objective: all three algorithms coincide.

    Values are compared relative to ``max(1, |E|)``; each run must also reach
    sparsity ``m`` at iteration ``m``.
    """
    worst = 0.0
    exact = True
    for seed in seeds:
        dic, obj, _ = gen_example(4, seed, dim=dim)
        traces = [run(alg, obj, dic, stop=StopRule(max_sparsity=dim)) for alg in ALGORITHMS]
        seqs = [tr.e_values() for tr in traces]
        n = min(len(s) for s in seqs)
        exact &= all(len(s) == dim for s in seqs)
        for tr in traces:
            exact &= all(r.support_size == r.m for r in tr.records)
        for i in range(len(seqs)):
            for j in range(i + 1, len(seqs)):
                diff = np.abs(seqs[i][:n] - seqs[j][:n]) / np.maximum(1.0, np.abs(seqs[i][:n]))
                worst = max(worst, float(diff.max(initial=0.0)))
    return CheckResult("canonical-basis coincidence", exact and worst <= tol,
                       f"max relative E gap {worst:.2e}, sparsity m at iteration m: {exact}")


def run_family(example_id, seeds, iters=30, dim=20, natoms=40):
    """Exact runs of every algorithm; returns ``[(trace, obj, dict)], [by-algorithm dicts]``."""
    traces, grouped = [], []
    for seed in seeds:
        dic, obj, _ = small_instance(example_id, seed, dim, natoms)
        stop = StopRule(max_iters=iters, target_value=solved_target(obj))
        by_alg = {}
        for alg in ALGORITHMS:
            tr = run(alg, obj, dic, stop=stop)
            by_alg[alg] = tr
            traces.append((tr, obj, dic))
        grouped.append(by_alg)
    return traces, grouped


def suite(example_id=3, seeds=range(5), with_lemma=True, with_coincidence=None):
    """All checks for one instance family."""
    seeds = list(seeds)
    traces, grouped = run_family(example_id, seeds)
    out = check_conditions(traces)
    out.append(check_monotone(traces))
    out.append(check_first_step(grouped))
    if with_lemma:
        out.append(check_lemma(seeds[:3]))
    if with_coincidence is None:
        with_coincidence = example_id == 4
    if with_coincidence:
        out.append(check_coincidence(seeds))
    return out

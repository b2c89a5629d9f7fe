"""EM versus CD comparison on a simulated corpus.

All four runs (EM and CD, each with and without extrapolation) start from
the same EM-prewarmed state and get the same iteration budget. A follow-up
run then applies CD starting from the final EM state, to check whether EM
had stalled short of the CD solution rather than found another optimum.
"""

from dataclasses import dataclass, field

import numpy as np

from .engine import FitConfig, fit_pnmf, init_fit
from .simulate import SimSpec, simulate_corpus

RUNS = {
    "em": ("em", False),
    "em_extrapolated": ("em", True),
    "cd": ("cd", False),
    "cd_extrapolated": ("cd", True),
}


@dataclass
class BenchmarkResult:
    sim: object
    init: object
    runs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def run_benchmark(scenario="B", budget_iters=750, prewarm=50, seed=1, followup_iters=200,
                  K=6, threads=1, sim_spec=None):
    spec = sim_spec if sim_spec is not None else SimSpec.scenario_spec(scenario, seed=seed)
    sim = simulate_corpus(spec)
    X = sim.X
    start = init_fit(X, K, seed=seed, prewarm=prewarm, threads=threads)
    result = BenchmarkResult(sim, start)
    for name, (method, extrapolate) in RUNS.items():
        cfg = FitConfig(K=K, method=method, extrapolate=extrapolate, num_outer=budget_iters,
                        tol_loglik=0.0, tol_kkt=0.0, threads=threads, prewarm=0)
        result.runs[name] = fit_pnmf(X, cfg, init=start)
    if followup_iters:
        cfg = FitConfig(K=K, method="cd", num_outer=followup_iters, tol_loglik=0.0,
                        tol_kkt=0.0, threads=threads, prewarm=0)
        result.runs["cd_from_em"] = fit_pnmf(X, cfg, init=result.runs["em"].fit)
    result.summary = summarize(result.runs)
    result.summary.update(
        scenario=spec.scenario, seed=spec.seed, budget_iters=budget_iters, prewarm=prewarm,
        followup_iters=followup_iters, K=K, sigma_56=float(spec.Sigma[4, 5]) if K >= 6 else None,
    )
    return result


def summarize(runs):
    final = {name: out.progress[-1].topic_loglik for name, out in runs.items() if out.progress}
    best = max(final.values())
    summary = {
        "final_topic_loglik": final,
        "gap_to_best": {name: best - v for name, v in final.items()},
        "final_max_kkt": {name: out.progress[-1].max_kkt for name, out in runs.items()
                          if out.progress},
    }
    if "em" in final and "cd" in final:
        gap = final["cd"] - final["em"]
        summary["cd_minus_em"] = gap
        if "cd_from_em" in final:
            summary["cd_from_em_gap_closed"] = (
                (final["cd_from_em"] - final["em"]) / gap if gap > 0 else float("nan")
            )
    if "cd" in final and "cd_extrapolated" in runs:
        target = final["cd"]
        trace = [p.topic_loglik for p in runs["cd_extrapolated"].progress]
        hit = np.flatnonzero(np.asarray(trace) >= target)
        summary["cd_extrapolated_iters_to_cd_final"] = int(hit[0]) + 1 if hit.size else None
    return summary

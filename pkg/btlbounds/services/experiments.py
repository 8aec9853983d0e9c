"""Batch experiments: Monte Carlo risk of EM against the bounds, topology and
random-graph sweeps, and home-field sweeps.

Each trial draws from its own ``SeedSequence`` child, and rows are sorted by
their parameter tuple before they leave a runner, so the thread count never
changes a table.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from btlbounds.core import logger, settings
from btlbounds.core.errors import ConfigError, UnsupportedPriorError
from btlbounds.models.models import (
    BoundSpec,
    ComparisonBudget,
    EmConfig,
    Norm,
    PriorHyperParams,
    ResultTable,
    Topology,
    TopologyKind,
)
from btlbounds.models.schemas import ExperimentConfig
from btlbounds.services.cramer_rao import bcrb_trace, bim, hcrb_trace, him
from btlbounds.services.em import em_fit, mse
from btlbounds.services.graph_design import (
    build_budget,
    edge_probability,
    split_home_budget,
)
from btlbounds.services.info_bounds import (
    ASYMPTOTIC_CAVEAT,
    cor1_bound,
    ha_it_bound,
    it_bound,
)
from btlbounds.services.sampling import sample_outcome, sample_skills

Z95 = float(stats.norm.ppf(0.975))

# bound order the BCRB traces are conjectured to follow
TRACE_ORDER = ("complete", "chain", "random_tree", "star")
# order the information-theoretic bounds follow exactly
IT_ORDER = ("chain", "random_tree", "star")

# below 0.6 the BCRB is dominated by isolated items
DEFAULT_NORMALIZED_P_GRID = [round(0.6 + 0.1 * i, 1) for i in range(15)]
DEFAULT_THETA_GRID = [1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0]


def _parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    """Order-preserving map, threaded when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def mean_ci(values: Sequence[float]) -> tuple[float, float]:
    """Mean and normal-approximation 95% half-width."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), Z95 * float(arr.std(ddof=1)) / math.sqrt(arr.size)


def _em_config(cfg: ExperimentConfig) -> EmConfig:
    return EmConfig(
        max_iters=settings.EM_MAX_ITERS,
        rel_change_tol=settings.EM_REL_CHANGE_TOL,
        estimator_kind=cfg.estimator_kind,
    )


def _require_bcrb_shape(cfg: ExperimentConfig) -> None:
    if not cfg.a > 2:
        raise ConfigError(f"Cramer-Rao bounds need a > 2, got a={cfg.a}")


def _cor1_variant(spec: BoundSpec) -> Optional[str]:
    if spec.norm == Norm.L1 and spec.r == 1:
        return "L1"
    if spec.norm == Norm.L2 and spec.r == 2:
        return "L2sq"
    return None


def _config_details(cfg: ExperimentConfig) -> dict:
    return {"config": cfg.model_dump(mode="json"), "seed": cfg.seed, "trials": cfg.trials}


def _em_trial(
    prior: PriorHyperParams, budget: ComparisonBudget, em_cfg: EmConfig, seed: np.random.SeedSequence
) -> float:
    rng = np.random.default_rng(seed)
    skills = sample_skills(prior, rng)
    outcome = sample_outcome(skills, budget, rng)
    trace = em_fit(prior, outcome, budget, em_cfg)
    return mse(skills, trace.estimate)


def scale_risk_floor(prior: PriorHyperParams) -> float:
    """Bayes risk no estimator can beat: the spread of sum(lambda) the data never see.

    With a common rate, s = sum(lambda) ~ Gamma(A, b) is independent of the
    proportions pi ~ Dirichlet(a) that drive every outcome, so
    E||lambda - E[lambda | W]||^2 >= Var(s) E||pi||^2.
    """
    if not prior.has_uniform_rate:
        raise UnsupportedPriorError("the scale floor needs a common prior rate")
    a = prior.a
    total = float(a.sum())
    b = float(prior.b[0])
    return (total / b**2) * float(np.sum(a * (a + 1.0))) / (total * (total + 1.0))


def run_mse_vs_bounds(cfg: ExperimentConfig) -> ResultTable:
    """Monte Carlo MSE of EM next to the IT bound, its Jensen form and the BCRB."""
    if len(cfg.topologies) != 1:
        raise ConfigError("mse-vs-bounds takes exactly one topology")
    k, a, b = cfg.k, cfg.a, cfg.rate()
    prior = cfg.prior()
    topo = cfg.topologies[0].build(k)
    em_cfg = _em_config(cfg)
    spec = BoundSpec(norm=Norm.L2, r=2.0, k=k)
    with_bcrb = a > 2
    scale_floor = scale_risk_floor(prior)
    logger.info(
        f"Starting experiment=mse-vs-bounds k={k} a={a} b={b} topology={topo.label} "
        f"trials={cfg.trials} workers={cfg.workers}"
    )

    table = ResultTable(
        columns=[
            "experiment", "k", "a", "b", "topology", "n", "trials", "seed",
            "em_mse", "em_mse_ci95", "it_bound", "log_it_bound", "cor1_bound", "bcrb",
        ]
    )
    streams = np.random.SeedSequence(cfg.seed).spawn(len(cfg.n_grid))
    dominance = []
    for n, stream in zip(cfg.n_grid, streams):
        budget = build_budget(topo, n)
        errors = _parallel_map(
            partial(_em_trial, prior, budget, em_cfg), stream.spawn(cfg.trials), cfg.workers
        )
        em_mse, ci = mean_ci(errors)
        it = it_bound(budget, prior, spec)
        cor1 = cor1_bound(n, k, a, b, "L2sq")
        bcrb = bcrb_trace(bim(budget, prior)) if with_bcrb else math.nan
        table.rows.append(
            ("mse-vs-bounds", k, a, b, topo.label, n, cfg.trials, cfg.seed,
             em_mse, ci, it.value, it.log_value, cor1.value, bcrb)
        )
        floor = max(it.value, bcrb) if with_bcrb else it.value
        dominance.append(
            {"n": n, "holds": em_mse - ci >= floor, "ratio_to_bcrb": em_mse / bcrb if with_bcrb else None}
        )
        logger.info(f"n={n} em_mse={em_mse:.6g} it_bound={it.value:.6g} bcrb={bcrb:.6g}")

    table.sort(["k", "topology", "n"])
    table.details = {
        **_config_details(cfg),
        "rows": len(table.rows),
        "dominance": dominance,
        "scale_risk_floor": scale_floor,
        "caveats": [ASYMPTOTIC_CAVEAT],
    }
    return table


def check_trace_ordering(
    values: dict[str, float], order: Sequence[str] = TRACE_ORDER, what: str = "BCRB trace"
) -> dict:
    """Check values[order[0]] <= values[order[1]] <= ... over the labels present."""
    present = [label for label in order if label in values]
    violations = [
        {"lower": left, "upper": right, "lower_value": values[left], "upper_value": values[right]}
        for left, right in zip(present, present[1:])
        if values[left] > values[right]
    ]
    if violations:
        logger.warning(f"{what} ordering violated: order={'<='.join(present)} violations={violations}")
    else:
        logger.info(f"{what} ordering holds: order={'<='.join(present)}")
    return {"order": present, "holds": not violations, "violations": violations}


def run_bounds(
    cfg: ExperimentConfig, include_it: bool = True, include_bcrb: bool = True
) -> ResultTable:
    """Bounds for every (topology, n) of the config, without Monte Carlo."""
    if include_bcrb:
        _require_bcrb_shape(cfg)
    k, a, b = cfg.k, cfg.a, cfg.rate()
    prior = cfg.prior()
    spec = BoundSpec(norm=cfg.norm, r=cfg.r, k=k)
    variant = _cor1_variant(spec)
    topologies = [t.build(k) for t in cfg.topologies]
    logger.info(
        f"Starting bounds k={k} a={a} b={b} topologies={[t.label for t in topologies]} "
        f"norm={spec.norm.value} r={spec.r}"
    )

    def evaluate(item: tuple[Topology, int]) -> tuple:
        topo, n = item
        budget = build_budget(topo, n)
        it = it_bound(budget, prior, spec) if include_it else None
        cor1 = cor1_bound(n, k, a, b, variant) if include_it and variant else None
        bcrb = bcrb_trace(bim(budget, prior)) if include_bcrb else None
        return (
            cfg.experiment, k, a, b, topo.label,
            -1 if topo.seed is None else topo.seed, n, spec.norm.value, spec.r,
            it.value if it else math.nan,
            it.log_value if it else math.nan,
            cor1.value if cor1 else math.nan,
            math.nan if bcrb is None else bcrb,
        )

    grid = [(topo, n) for topo in topologies for n in cfg.n_grid]
    table = ResultTable(
        columns=[
            "experiment", "k", "a", "b", "topology", "topology_seed", "n", "norm", "r",
            "it_bound", "log_it_bound", "cor1_bound", "bcrb",
        ],
        rows=_parallel_map(evaluate, grid, cfg.workers),
    )
    table.sort(["k", "topology", "topology_seed", "n"])
    table.details = {**_config_details(cfg), "rows": len(table.rows)}
    if include_it:
        table.details["caveats"] = [ASYMPTOTIC_CAVEAT]
    return table


def _values_at(table: ResultTable, n: int, column: str) -> dict[str, float]:
    return {
        record["topology"]: record[column]
        for record in table.records()
        if record["n"] == n and not math.isnan(record[column])
    }


def run_topology_sweep(
    cfg: ExperimentConfig, include_it: bool = True, include_bcrb: bool = True
) -> ResultTable:
    """Bounds across at least two topologies, with the ordering checks."""
    if len(cfg.topologies) < 2:
        raise ConfigError("a topology sweep needs at least two topologies")
    table = run_bounds(cfg, include_it=include_it, include_bcrb=include_bcrb)
    largest = cfg.n_grid[-1]
    checks = {}
    if include_bcrb:
        checks["bcrb_largest_n"] = check_trace_ordering(_values_at(table, largest, "bcrb"))
    if include_it:
        checks["it_by_n"] = {
            str(n): check_trace_ordering(_values_at(table, n, "it_bound"), IT_ORDER, "IT bound")
            for n in cfg.n_grid
        }
    table.details["ordering"] = checks
    return table


def _er_point(prior: PriorHyperParams, k: int, p: float, n: int, seed: int) -> tuple:
    topo = Topology(kind=TopologyKind.ERDOS_RENYI, k=k, p=p, seed=seed)
    budget = build_budget(topo, n)
    components, _ = connected_components(csr_matrix(budget.n > 0), directed=False)
    return (
        len(budget.edges()),
        components == 1,
        it_bound(budget, prior).value,
        bcrb_trace(bim(budget, prior)),
    )


def run_phase_transition(cfg: ExperimentConfig) -> ResultTable:
    """Seed-averaged bounds on random graphs against p normalized by ln(k)/k."""
    _require_bcrb_shape(cfg)
    grid = cfg.normalized_p_grid or DEFAULT_NORMALIZED_P_GRID
    table = ResultTable(
        columns=[
            "experiment", "k", "a", "b", "n", "normalized_p", "p", "seed", "seeds",
            "mean_edges", "connected_fraction", "it_bound", "log_it_bound", "bcrb",
        ]
    )
    for k in cfg.ks:
        prior = cfg.prior(k)
        b = cfg.rate(k)
        for n in cfg.n_grid:
            logger.info(f"Starting experiment=phase-transition k={k} n={n} points={len(grid)}")
            # one seed list for the whole grid: graphs grow by thresholding the same uniforms
            seeds = np.random.SeedSequence([cfg.seed, k, n]).generate_state(cfg.seeds_per_point)
            for q in grid:
                p = edge_probability(q, k)
                results = _parallel_map(
                    partial(_er_point, prior, k, p, n), [int(s) for s in seeds], cfg.workers
                )
                edges, connected, its, bcrbs = (np.array(col, dtype=float) for col in zip(*results))
                it_mean = float(its.mean())
                table.rows.append(
                    ("phase-transition", k, cfg.a, b, n, q, p, cfg.seed, cfg.seeds_per_point,
                     float(edges.mean()), float(connected.mean()),
                     it_mean, math.log(it_mean), float(bcrbs.mean()))
                )
    table.sort(["k", "n", "normalized_p"])
    table.details = {
        **_config_details(cfg),
        "rows": len(table.rows),
        "summary": phase_transition_summary(table),
        "caveats": [ASYMPTOTIC_CAVEAT],
    }
    return table


def phase_transition_summary(table: ResultTable) -> dict:
    """Per (k, n): where the BCRB curve drops most, and how curved the IT curve is."""
    groups: dict[tuple[int, int], list[dict]] = {}
    for record in table.records():
        groups.setdefault((record["k"], record["n"]), []).append(record)

    summary = {}
    for (k, n), records in sorted(groups.items()):
        records.sort(key=lambda r: r["normalized_p"])
        q = np.array([r["normalized_p"] for r in records])
        bcrb = np.array([r["bcrb"] for r in records])
        it = np.array([r["it_bound"] for r in records])
        entry = {"points": len(records)}
        if len(records) >= 2:
            steps = np.diff(bcrb)
            knee = int(np.argmin(steps))
            entry.update(
                knee_index=knee,
                knee_normalized_p=float(0.5 * (q[knee] + q[knee + 1])),
                largest_bcrb_drop=float(-steps[knee]),
            )
        if len(records) >= 3:
            spread = float(it.max() - it.min())
            curvature = float(np.abs(np.diff(it, 2)).max())
            entry["it_second_difference_ratio"] = curvature / spread if spread > 0 else 0.0
        summary[f"k={k},n={n}"] = entry
        logger.info(f"phase transition k={k} n={n} summary={entry}")
    return summary


def run_ha_sweeps(
    cfg: ExperimentConfig, include_it: bool = True, include_hcrb: bool = True
) -> ResultTable:
    """Home-field bounds over theta, home budgets split by the alpha rule."""
    if include_hcrb:
        _require_bcrb_shape(cfg)
    k, a, b = cfg.k, cfg.a, cfg.rate()
    prior = cfg.prior()
    topo = cfg.topologies[0].build(k)
    spec = BoundSpec(norm=cfg.norm, r=cfg.r, k=k)
    thetas = cfg.theta_grid or DEFAULT_THETA_GRID
    logger.info(
        f"Starting experiment=ha-sweep k={k} a={a} b={b} alpha={cfg.alpha} "
        f"thetas={len(thetas)} topology={topo.label}"
    )
    table = ResultTable(
        columns=[
            "experiment", "k", "a", "b", "topology", "n", "alpha", "theta",
            "it_bound", "log_it_bound", "basic_it_bound", "hcrb_total", "hcrb_skills", "bcrb",
        ]
    )
    for n in cfg.n_grid:
        budget = build_budget(topo, n)
        home = split_home_budget(budget, cfg.alpha)
        basic_it = it_bound(budget, prior, spec).value if include_it else math.nan
        basic_bcrb = bcrb_trace(bim(budget, prior)) if include_hcrb else math.nan

        def evaluate(theta: float) -> tuple:
            it = ha_it_bound(home, prior, theta, spec) if include_it else None
            hcrb = hcrb_trace(him(home, prior, theta)) if include_hcrb else None
            return (
                cfg.experiment, k, a, b, topo.label, n, cfg.alpha, theta,
                it.value if it else math.nan,
                it.log_value if it else math.nan,
                basic_it,
                hcrb.total if hcrb else math.nan,
                hcrb.skills if hcrb else math.nan,
                basic_bcrb,
            )

        table.rows.extend(_parallel_map(evaluate, list(thetas), cfg.workers))
    table.sort(["k", "topology", "n", "alpha", "theta"])
    table.details = {**_config_details(cfg), "rows": len(table.rows), "caveats": [ASYMPTOTIC_CAVEAT]}
    return table


def _simulate_trial(prior: PriorHyperParams, budget: ComparisonBudget, seed: np.random.SeedSequence):
    rng = np.random.default_rng(seed)
    skills = sample_skills(prior, rng)
    return skills, sample_outcome(skills, budget, rng)


def run_simulate(cfg: ExperimentConfig) -> ResultTable:
    """Draws of skills and win counts on every compared pair."""
    k = cfg.k
    prior = cfg.prior()
    topo = cfg.topologies[0].build(k)
    table = ResultTable(columns=["n", "trial", "i", "j", "n_ij", "w_ij", "w_ji", "lambda_i", "lambda_j"])
    for n, stream in zip(cfg.n_grid, np.random.SeedSequence(cfg.seed).spawn(len(cfg.n_grid))):
        budget = build_budget(topo, n)
        draws = _parallel_map(partial(_simulate_trial, prior, budget), stream.spawn(cfg.trials), cfg.workers)
        for trial, (skills, outcome) in enumerate(draws):
            for i, j in budget.edges():
                table.rows.append(
                    (n, trial, i, j, budget.n[i, j], outcome.w[i, j], outcome.w[j, i],
                     skills.lam[i], skills.lam[j])
                )
    table.sort(["n", "trial", "i", "j"])
    table.details = {**_config_details(cfg), "rows": len(table.rows)}
    return table


def _fit_trial(prior, budget, em_cfg, seed: np.random.SeedSequence):
    skills, outcome = _simulate_trial(prior, budget, seed)
    return skills, em_fit(prior, outcome, budget, em_cfg)


def run_em_fit(cfg: ExperimentConfig) -> ResultTable:
    """Per-item EM estimates next to the skills that generated the data."""
    k = cfg.k
    prior = cfg.prior()
    topo = cfg.topologies[0].build(k)
    em_cfg = _em_config(cfg)
    table = ResultTable(
        columns=["n", "trial", "item", "lambda_true", "lambda_hat", "iterations", "converged"]
    )
    for n, stream in zip(cfg.n_grid, np.random.SeedSequence(cfg.seed).spawn(len(cfg.n_grid))):
        budget = build_budget(topo, n)
        fits = _parallel_map(partial(_fit_trial, prior, budget, em_cfg), stream.spawn(cfg.trials), cfg.workers)
        for trial, (skills, trace) in enumerate(fits):
            for item in range(k):
                table.rows.append(
                    (n, trial, item, skills.lam[item], trace.estimate.lam[item],
                     trace.iterations_used, trace.converged)
                )
    table.sort(["n", "trial", "item"])
    table.details = {**_config_details(cfg), "rows": len(table.rows)}
    return table


RUNNERS: dict[str, Callable[[ExperimentConfig], ResultTable]] = {
    "mse-vs-bounds": run_mse_vs_bounds,
    "topology-it": partial(run_topology_sweep, include_bcrb=False),
    "topology-bcrb": partial(run_topology_sweep, include_it=False),
    "topology-sweep": run_topology_sweep,
    "phase-transition": run_phase_transition,
    "ha-it": partial(run_ha_sweeps, include_hcrb=False),
    "ha-hcrb": partial(run_ha_sweeps, include_it=False),
}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg)

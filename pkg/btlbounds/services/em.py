"""Skill estimation by the EM iteration of the Gamma-augmented BTL model.

The E-step replaces each latent time by its conditional mean
n_ij / (lam_i + lam_j); the M-step takes the mode (or mean) of the Gamma
posterior. For the mode this is an exact EM for p(lam, W), so the
log-posterior can never decrease.
"""

from typing import Optional

import numpy as np

from btlbounds.core import logger, settings
from btlbounds.core.errors import (
    DimensionMismatchError,
    MonotonicityError,
    NonFiniteIterateError,
    ShapeTooSmallError,
)
from btlbounds.models.models import (
    ComparisonBudget,
    ComparisonOutcome,
    EmConfig,
    EmTrace,
    EstimatorKind,
    HomeBudget,
    HomeOutcome,
    LatentTimes,
    PriorHyperParams,
    SkillVector,
)
from btlbounds.services.sampling import log_joint

# slack for round-off in the log-posterior when the iteration has stalled
MONOTONE_SLACK = 1e-9


def posterior_params(
    prior: PriorHyperParams, outcome: ComparisonOutcome, latent: LatentTimes
) -> PriorHyperParams:
    """Gamma posterior (a_i + w_i, b_i + z_i) of the skills given W and Z."""
    if not prior.k == outcome.k == latent.k:
        raise DimensionMismatchError(
            f"prior k={prior.k}, outcome k={outcome.k}, latent k={latent.k}"
        )
    return PriorHyperParams(
        a=prior.a + outcome.win_counts(),
        b=prior.b + latent.totals(),
    )


def home_posterior_params(
    prior: PriorHyperParams,
    home_outcome: HomeOutcome,
    home_latent: LatentTimes,
    home_budget: HomeBudget,
    theta: float,
) -> PriorHyperParams:
    """Gamma posterior of the skills under home-field advantage.

    Shape a_i + sum_j w^h_ij + sum_j (n^h_ji - w^h_ji); rate
    b_i + theta * sum_j zeta^h_ij + sum_j zeta^h_ji.
    """
    if not prior.k == home_outcome.k == home_latent.k:
        raise DimensionMismatchError(
            f"prior k={prior.k}, home outcome k={home_outcome.k}, latent k={home_latent.k}"
        )
    home_outcome.check_against(home_budget)
    wh = home_outcome.wh
    away_wins = (home_budget.nh - wh).sum(axis=0)
    zh = home_latent.z
    return PriorHyperParams(
        a=prior.a + wh.sum(axis=1) + away_wins,
        b=prior.b + theta * zh.sum(axis=1) + zh.sum(axis=0),
    )


def _expected_latent_totals(lam: np.ndarray, n: np.ndarray, active: np.ndarray) -> np.ndarray:
    z = np.zeros_like(n, dtype=float)
    pair_sums = lam[:, None] + lam[None, :]
    z[active] = n[active] / pair_sums[active]
    return z.sum(axis=1)


def em_fit(
    prior: PriorHyperParams,
    outcome: ComparisonOutcome,
    budget: ComparisonBudget,
    cfg: Optional[EmConfig] = None,
    init: Optional[SkillVector] = None,
) -> EmTrace:
    cfg = cfg or settings.em_config
    if not prior.k == outcome.k == budget.k:
        raise DimensionMismatchError(
            f"prior k={prior.k}, outcome k={outcome.k}, budget k={budget.k}"
        )
    outcome.check_against(budget)

    mode = cfg.estimator_kind == EstimatorKind.POSTERIOR_MODE
    numerator = prior.a + outcome.win_counts() - (1.0 if mode else 0.0)
    if mode and np.any(numerator <= 0):
        i = int(np.argmin(numerator))
        raise ShapeTooSmallError(
            f"posterior mode needs a_i + w_i > 1, item {i} has {numerator[i] + 1.0}",
            shape=float(numerator[i] + 1.0),
            minimum=1.0,
        )

    lam = (init or SkillVector(prior.mean)).lam.copy()
    if lam.size != prior.k:
        raise DimensionMismatchError(f"init has k={lam.size}, prior has k={prior.k}")

    n = budget.n.astype(float)
    active = budget.n > 0
    current = SkillVector(lam)
    iterates = [current]
    history = [log_joint(current, outcome, budget, prior)] if mode else []
    converged = False
    iteration = 0

    while iteration < cfg.max_iters:
        iteration += 1
        lam_new = numerator / (prior.b + _expected_latent_totals(lam, n, active))
        if not np.all(np.isfinite(lam_new)) or np.any(lam_new <= 0):
            raise NonFiniteIterateError(f"EM iterate left (0, inf) at iteration={iteration}")

        rel_change = float(np.max(np.abs(lam_new - lam) / lam))
        lam = lam_new
        current = SkillVector(lam)
        if cfg.keep_iterates:
            iterates.append(current)
        else:
            iterates[-1] = current

        if mode:
            value = log_joint(current, outcome, budget, prior)
            if value < history[-1] - MONOTONE_SLACK * max(1.0, abs(history[-1])):
                raise MonotonicityError(
                    f"log-posterior decreased at iteration={iteration}: "
                    f"{history[-1]:.17g} -> {value:.17g}"
                )
            history.append(value)

        if rel_change < cfg.rel_change_tol:
            converged = True
            break

    if not converged:
        logger.warning(
            f"EM did not converge: iterations={iteration} k={prior.k} "
            f"rel_change_tol={cfg.rel_change_tol}"
        )
    return EmTrace(
        iterates=iterates,
        converged=converged,
        iterations_used=iteration,
        log_posterior=history,
    )


def mse(true_skills: SkillVector, estimate: SkillVector) -> float:
    """Squared L2 error sum_i (lam_i - lam_hat_i)^2."""
    if true_skills.k != estimate.k:
        raise DimensionMismatchError(f"k={true_skills.k} vs k={estimate.k}")
    return float(np.sum((true_skills.lam - estimate.lam) ** 2))

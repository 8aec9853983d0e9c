"""Exact samplers and log-densities of the Bayesian BTL model.

Every sampler takes an injected ``numpy.random.Generator`` and is
deterministic given its state. Gamma laws are parameterised by rate, so
numpy's ``scale`` is always ``1 / rate``.
"""

from typing import Union

import numpy as np
from scipy.special import gammaln

from btlbounds.core.errors import DimensionMismatchError, ModelError
from btlbounds.models.models import (
    ComparisonBudget,
    ComparisonOutcome,
    HomeBudget,
    HomeOutcome,
    LatentTimes,
    PriorHyperParams,
    SkillVector,
    ThetaPrior,
    home_win_probabilities,
    win_probabilities,
)

ThetaLike = Union[float, ThetaPrior]


def _check_k(*objs) -> int:
    ks = {obj.k for obj in objs}
    if len(ks) != 1:
        raise DimensionMismatchError(f"inconsistent numbers of items: {sorted(ks)}")
    return ks.pop()


def _log_binom(n: np.ndarray, w: np.ndarray) -> np.ndarray:
    return gammaln(n + 1.0) - gammaln(w + 1.0) - gammaln(n - w + 1.0)


def sample_skills(prior: PriorHyperParams, rng: np.random.Generator) -> SkillVector:
    return SkillVector(rng.gamma(shape=prior.a, scale=1.0 / prior.b))


def sample_outcome(
    skills: SkillVector, budget: ComparisonBudget, rng: np.random.Generator
) -> ComparisonOutcome:
    """w_ij ~ Binomial(n_ij, lam_i / (lam_i + lam_j)) for i < j; w_ji = n_ij - w_ij."""
    k = _check_k(skills, budget)
    iu = np.triu_indices(k, 1)
    p = win_probabilities(skills)
    w = np.zeros((k, k), dtype=np.int64)
    w[iu] = rng.binomial(budget.n[iu], p[iu])
    w.T[iu] = budget.n[iu] - w[iu]
    return ComparisonOutcome(w)


def sample_latent(
    skills: SkillVector, budget: ComparisonBudget, rng: np.random.Generator
) -> LatentTimes:
    """zeta_ij = zeta_ji ~ Gamma(n_ij, rate lam_i + lam_j); 0 where n_ij == 0."""
    k = _check_k(skills, budget)
    iu = np.triu_indices(k, 1)
    lam = skills.lam
    rates = lam[iu[0]] + lam[iu[1]]
    shapes = budget.n[iu]
    upper = np.zeros(shapes.size)
    active = shapes > 0
    upper[active] = rng.gamma(shape=shapes[active], scale=1.0 / rates[active])
    z = np.zeros((k, k))
    z[iu] = upper
    z.T[iu] = upper
    return LatentTimes(z)


def _draw_theta(theta: ThetaLike, rng: np.random.Generator) -> float:
    prior = ThetaPrior.coerce(theta)
    if prior.is_point:
        return float(prior.values[0])
    return float(rng.choice(prior.values, p=prior.weights))


def sample_home_outcome(
    skills: SkillVector,
    home_budget: HomeBudget,
    theta: ThetaLike,
    rng: np.random.Generator,
) -> HomeOutcome:
    """w^h_ij ~ Binomial(n^h_ij, theta*lam_i / (theta*lam_i + lam_j)) over ordered pairs.

    A mixture theta is drawn once per call; the outcome records the drawn value.
    """
    _check_k(skills, home_budget)
    value = _draw_theta(theta, rng)
    q = home_win_probabilities(skills, value)
    wh = rng.binomial(home_budget.nh, q)
    return HomeOutcome(wh=wh, theta=ThetaPrior.point(value))


def sample_home_latent(
    skills: SkillVector,
    home_budget: HomeBudget,
    theta: float,
    rng: np.random.Generator,
) -> LatentTimes:
    """zeta^h_ij ~ Gamma(n^h_ij, rate theta*lam_i + lam_j), one per ordered pair.

    The matrix is generally asymmetric; home_posterior_params reads it by rows
    and columns separately.
    """
    _check_k(skills, home_budget)
    lam = skills.lam
    rates = theta * lam[:, None] + lam[None, :]
    z = np.zeros_like(rates)
    active = home_budget.nh > 0
    z[active] = rng.gamma(shape=home_budget.nh[active], scale=1.0 / rates[active])
    return LatentTimes(z)


# --- log-densities ---


def log_prior(skills: SkillVector, prior: PriorHyperParams) -> float:
    _check_k(skills, prior)
    a, b, lam = prior.a, prior.b, skills.lam
    return float(np.sum(a * np.log(b) - gammaln(a) + (a - 1.0) * np.log(lam) - b * lam))


def log_likelihood(
    skills: SkillVector, outcome: ComparisonOutcome, budget: ComparisonBudget
) -> float:
    """log p(W | lam): product of Binomial(w_ij; n_ij, P_ij) over i < j."""
    k = _check_k(skills, outcome, budget)
    outcome.check_against(budget)
    iu = np.triu_indices(k, 1)
    p = win_probabilities(skills)
    n, w = budget.n[iu], outcome.w[iu]
    return float(
        np.sum(_log_binom(n, w) + w * np.log(p[iu]) + (n - w) * np.log1p(-p[iu]))
    )


def log_joint(
    skills: SkillVector,
    outcome: ComparisonOutcome,
    budget: ComparisonBudget,
    prior: PriorHyperParams,
) -> float:
    """log p(lam, W), the objective the posterior-mode EM climbs."""
    return log_prior(skills, prior) + log_likelihood(skills, outcome, budget)


def _latent_pair_terms(
    outcome: ComparisonOutcome, latent: LatentTimes, budget: ComparisonBudget
) -> float:
    iu = np.triu_indices(budget.k, 1)
    n, w, z = budget.n[iu], outcome.w[iu], latent.z[iu]
    active = n > 0
    if np.any(z[active] <= 0):
        raise ModelError("latent times must be positive wherever n_ij > 0")
    n, w, z = n[active], w[active], z[active]
    return float(np.sum(_log_binom(n, w) + (n - 1.0) * np.log(z) - gammaln(n)))


def log_joint_latent(
    skills: SkillVector,
    outcome: ComparisonOutcome,
    latent: LatentTimes,
    budget: ComparisonBudget,
    prior: PriorHyperParams,
) -> float:
    """log p(lam, W, Z) of the latent-variable augmentation."""
    _check_k(skills, outcome, latent, budget, prior)
    a, b, lam = prior.a, prior.b, skills.lam
    w_i = outcome.win_counts()
    z_i = latent.totals()
    item_terms = a * np.log(b) - gammaln(a) + (a + w_i - 1.0) * np.log(lam) - (b + z_i) * lam
    return float(np.sum(item_terms)) + _latent_pair_terms(outcome, latent, budget)


def log_marginal_wz(
    outcome: ComparisonOutcome,
    latent: LatentTimes,
    budget: ComparisonBudget,
    prior: PriorHyperParams,
) -> float:
    """log p(W, Z) with the skills integrated out."""
    _check_k(outcome, latent, budget, prior)
    a, b = prior.a, prior.b
    shape = a + outcome.win_counts()
    rate = b + latent.totals()
    item_terms = a * np.log(b) - gammaln(a) + gammaln(shape) - shape * np.log(rate)
    return float(np.sum(item_terms)) + _latent_pair_terms(outcome, latent, budget)


def home_log_likelihood(
    skills: SkillVector,
    home_outcome: HomeOutcome,
    home_budget: HomeBudget,
    theta: float,
) -> float:
    """log p(W^h | lam, theta) over all ordered pairs."""
    _check_k(skills, home_outcome, home_budget)
    home_outcome.check_against(home_budget)
    q = home_win_probabilities(skills, theta)
    off = ~np.eye(home_budget.k, dtype=bool)
    n, w, q = home_budget.nh[off], home_outcome.wh[off], q[off]
    return float(np.sum(_log_binom(n, w) + w * np.log(q) + (n - w) * np.log1p(-q)))

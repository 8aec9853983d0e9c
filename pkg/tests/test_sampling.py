import numpy as np
import pytest

from btlbounds.core.errors import DimensionMismatchError, ModelError
from btlbounds.models.models import (
    ComparisonBudget,
    ComparisonOutcome,
    HomeBudget,
    HomeOutcome,
    PriorHyperParams,
    SkillVector,
    ThetaPrior,
)
from btlbounds.services.sampling import (
    home_log_likelihood,
    log_joint,
    log_likelihood,
    log_prior,
    sample_home_latent,
    sample_home_outcome,
    sample_latent,
    sample_outcome,
    sample_skills,
)


class TestDomainTypes:
    def test_prior_rejects_nonpositive_shape(self):
        with pytest.raises(ModelError):
            PriorHyperParams(a=[1.0, -1.0], b=[1.0, 1.0])

    def test_prior_rejects_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            PriorHyperParams(a=[1.0, 2.0, 3.0], b=[1.0, 1.0])

    def test_prior_needs_two_items(self):
        with pytest.raises(ModelError):
            PriorHyperParams.uniform(1, 2.0, 1.0)

    def test_ak_minus_one(self):
        prior = PriorHyperParams.ak_minus_one(10, 5.0)
        np.testing.assert_array_equal(prior.b, np.full(10, 49.0))
        np.testing.assert_allclose(prior.mean, 5.0 / 49.0)

    def test_budget_must_be_symmetric(self):
        with pytest.raises(ModelError):
            ComparisonBudget(np.array([[0, 2], [1, 0]]))

    def test_budget_diagonal_must_be_zero(self):
        with pytest.raises(ModelError):
            ComparisonBudget(np.array([[1, 2], [2, 0]]))

    def test_budget_rejects_fractional_counts(self):
        with pytest.raises(ModelError):
            ComparisonBudget(np.array([[0, 1.5], [1.5, 0]]))

    def test_budget_summaries(self):
        budget = ComparisonBudget.from_edges(3, {(0, 1): 4, (1, 2): 2})
        assert budget.total() == 6
        assert budget.edges() == [(0, 1), (1, 2)]
        np.testing.assert_array_equal(budget.node_loads(), [2.0, 3.0, 1.0])
        assert budget.node_load(1) == 3.0

    def test_budget_arrays_are_read_only(self):
        budget = ComparisonBudget.zeros(3)
        with pytest.raises(ValueError):
            budget.n[0, 1] = 1

    def test_skills_must_be_positive(self):
        with pytest.raises(ModelError):
            SkillVector([1.0, 0.0])

    def test_outcome_checked_against_budget(self):
        budget = ComparisonBudget.from_edges(2, {(0, 1): 3})
        outcome = ComparisonOutcome(np.array([[0, 1], [1, 0]]))
        with pytest.raises(ModelError):
            outcome.check_against(budget)

    def test_theta_prior_weights_sum_to_one(self):
        with pytest.raises(ModelError):
            ThetaPrior(values=[1.0, 2.0], weights=[0.5, 0.6])

    def test_theta_prior_expectation(self):
        theta = ThetaPrior(values=[1.0, 3.0], weights=[0.25, 0.75])
        assert theta.expect(lambda t: t * t) == pytest.approx(0.25 + 0.75 * 9.0)
        assert not theta.is_point
        assert ThetaPrior.coerce(2.0).is_point

    def test_home_outcome_aggregates_to_induced_budget(self):
        home = HomeBudget(np.array([[0, 3, 1], [2, 0, 0], [4, 5, 0]]))
        outcome = HomeOutcome(wh=np.array([[0, 2, 1], [1, 0, 0], [0, 3, 0]]), theta=1.5)
        aggregate = outcome.aggregate(home)
        np.testing.assert_array_equal(aggregate.w + aggregate.w.T, home.induced().n)
        assert aggregate.w[0, 1] == 2 + (2 - 1)


class TestSamplers:
    def test_skills_follow_prior_mean(self, rng):
        prior = PriorHyperParams.uniform(20000, 3.0, 2.0)
        lam = sample_skills(prior, rng).lam
        se = np.sqrt(3.0) / 2.0 / np.sqrt(lam.size)
        assert abs(lam.mean() - 1.5) < 4 * se

    def test_outcome_respects_budget(self, rng, prior_k10, random_budget):
        budget = random_budget(rng, 10)
        outcome = sample_outcome(sample_skills(prior_k10, rng), budget, rng)
        np.testing.assert_array_equal(outcome.w + outcome.w.T, budget.n)

    def test_outcome_frequency(self, rng):
        skills = SkillVector([1.0, 3.0])
        n = 40000
        budget = ComparisonBudget.from_edges(2, {(0, 1): n})
        w = sample_outcome(skills, budget, rng).w[0, 1]
        se = np.sqrt(0.25 * 0.75 / n)
        assert abs(w / n - 0.25) < 4 * se

    def test_same_seed_same_draw(self, prior_k10, random_budget):
        budget = random_budget(np.random.default_rng(1), 10)
        draws = []
        for _ in range(2):
            rng = np.random.default_rng(7)
            draws.append(sample_outcome(sample_skills(prior_k10, rng), budget, rng).w)
        np.testing.assert_array_equal(draws[0], draws[1])

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            sample_outcome(SkillVector([1.0, 2.0, 3.0]), ComparisonBudget.zeros(2), rng)

    def test_latent_times(self, rng):
        skills = SkillVector([0.5, 1.5, 2.0])
        budget = ComparisonBudget.from_edges(3, {(0, 1): 4})
        draws = np.array([sample_latent(skills, budget, rng).z for _ in range(4000)])
        assert np.all(draws[:, 0, 2] == 0.0)
        np.testing.assert_array_equal(draws[:, 0, 1], draws[:, 1, 0])
        # Gamma(4, rate 2): mean 2, sd 1
        assert abs(draws[:, 0, 1].mean() - 2.0) < 4 * 1.0 / np.sqrt(4000)

    def test_home_outcome_records_theta(self, rng):
        skills = SkillVector([1.0, 1.0, 2.0])
        home = HomeBudget(np.array([[0, 5, 2], [3, 0, 1], [0, 4, 0]]))
        outcome = sample_home_outcome(skills, home, 2.5, rng)
        assert np.all(outcome.wh <= home.nh)
        assert outcome.theta.is_point and outcome.theta.values[0] == 2.5

    def test_home_outcome_draws_from_mixture_support(self, rng):
        skills = SkillVector([1.0, 1.0])
        home = HomeBudget(np.array([[0, 5], [5, 0]]))
        mixture = ThetaPrior(values=[1.5, 4.0], weights=[0.5, 0.5])
        seen = {float(sample_home_outcome(skills, home, mixture, rng).theta.values[0]) for _ in range(50)}
        assert seen == {1.5, 4.0}

    def test_home_win_frequency(self, rng):
        skills = SkillVector([1.0, 1.0])
        n = 40000
        home = HomeBudget(np.array([[0, n], [0, 0]]))
        w = sample_home_outcome(skills, home, 3.0, rng).wh[0, 1]
        se = np.sqrt(0.75 * 0.25 / n)
        assert abs(w / n - 0.75) < 4 * se

    def test_home_latent_is_asymmetric(self, rng):
        skills = SkillVector([1.0, 2.0])
        home = HomeBudget(np.array([[0, 3], [0, 0]]))
        z = sample_home_latent(skills, home, 2.0, rng).z
        assert z[0, 1] > 0 and z[1, 0] == 0.0


class TestLogDensities:
    def test_log_prior_matches_scipy(self, rng, prior_k4):
        from scipy import stats

        skills = sample_skills(prior_k4, rng)
        expected = stats.gamma.logpdf(skills.lam, a=prior_k4.a, scale=1.0 / prior_k4.b).sum()
        assert log_prior(skills, prior_k4) == pytest.approx(expected, rel=1e-12)

    def test_log_likelihood_matches_scipy(self, rng, prior_k4, random_budget):
        from scipy import stats

        budget = random_budget(rng, 4)
        skills = sample_skills(prior_k4, rng)
        outcome = sample_outcome(skills, budget, rng)
        lam = skills.lam
        expected = sum(
            stats.binom.logpmf(outcome.w[i, j], budget.n[i, j], lam[i] / (lam[i] + lam[j]))
            for i, j in budget.edges()
        )
        assert log_likelihood(skills, outcome, budget) == pytest.approx(expected, rel=1e-12)
        assert log_joint(skills, outcome, budget, prior_k4) == pytest.approx(
            expected + log_prior(skills, prior_k4), rel=1e-12
        )

    def test_home_likelihood_at_theta_one_reduces_to_basic(self, rng):
        skills = SkillVector([0.7, 1.3, 2.1])
        nh = np.array([[0, 6, 2], [0, 0, 5], [0, 0, 0]])
        home = HomeBudget(nh)
        outcome = sample_home_outcome(skills, home, 1.0, rng)
        basic = log_likelihood(skills, outcome.aggregate(home), home.induced())
        assert home_log_likelihood(skills, outcome, home, 1.0) == pytest.approx(basic, rel=1e-12)

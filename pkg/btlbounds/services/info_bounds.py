"""Information-theoretic lower bounds on the Bayes risk.

Everything is assembled in the log domain; a bound is only exponentiated
by ``BoundValue.value``. The bounds hold asymptotically in the node loads
n_i but are evaluated at every budget, small ones included.
"""

import math
from functools import lru_cache
from typing import Literal, Optional, Union

import numpy as np
from scipy import special

from btlbounds.core.errors import (
    DimensionMismatchError,
    ModelError,
    SpecialFunctionDomainError,
    UnsupportedPriorError,
)
from btlbounds.models.models import (
    BoundSpec,
    BoundValue,
    ComparisonBudget,
    HomeBudget,
    Norm,
    PriorHyperParams,
    QuadratureSpec,
    ThetaPrior,
)
from btlbounds.services.special_fn import (
    beta_expectation,
    digamma,
    hyp2f1,
    incomplete_beta,
    log_gamma,
)

ThetaLike = Union[float, ThetaPrior]

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

ASYMPTOTIC_CAVEAT = (
    "information-theoretic bounds hold asymptotically as the node loads n_i grow; "
    "values at small n are the bound expression, not a guaranteed bound"
)


def log_unit_ball_volume(spec: BoundSpec) -> float:
    """ln V_k of the unit ball of the L1 or L2 norm in R^k."""
    k = spec.k
    if spec.norm == Norm.L2:
        return 0.5 * k * math.log(math.pi) - log_gamma(0.5 * k + 1.0)
    if spec.norm == Norm.L1:
        return k * math.log(2.0) - log_gamma(k + 1.0)
    raise ModelError(f"unsupported norm {spec.norm}")


def _exponent(prior: PriorHyperParams, loads: np.ndarray) -> float:
    terms = -HALF_LOG_2PI + np.log(prior.b) - special.digamma(prior.a) + 0.5 * np.log(prior.a + loads)
    return float(np.mean(terms))


def e_btl(budget: ComparisonBudget, prior: PriorHyperParams) -> float:
    """Per-item exponent of the basic model, driven by the node loads n_i."""
    if budget.k != prior.k:
        raise DimensionMismatchError(f"budget k={budget.k}, prior k={prior.k}")
    return _exponent(prior, budget.node_loads())


def it_lower_bound(e_exponent: float, spec: BoundSpec) -> BoundValue:
    """(k / (r e)) (V_k Gamma(1 + k/r))^(-r/k) e^(-r E), in log form."""
    if not math.isfinite(e_exponent):
        raise ModelError(f"exponent must be finite, got {e_exponent}")
    k, r = spec.k, spec.r
    log_value = (
        math.log(k)
        - math.log(r)
        - 1.0
        - (r / k) * (log_unit_ball_volume(spec) + log_gamma(1.0 + k / r))
        - r * e_exponent
    )
    return BoundValue(log_value)


def it_bound(
    budget: ComparisonBudget, prior: PriorHyperParams, spec: Optional[BoundSpec] = None
) -> BoundValue:
    spec = spec or BoundSpec(norm=Norm.L2, r=2.0, k=budget.k)
    if spec.k != budget.k:
        raise DimensionMismatchError(f"bound spec k={spec.k}, budget k={budget.k}")
    return it_lower_bound(e_btl(budget, prior), spec)


def cor1_bound(n: int, k: int, a: float, b: float, which: Literal["L1", "L2sq"]) -> BoundValue:
    """Jensen-relaxed closed forms for uniform priors, total budget n."""
    if n < 0 or k < 2 or a <= 0 or b <= 0:
        raise ModelError(f"invalid arguments n={n} k={k} a={a} b={b}")
    gap = math.log(b) - digamma(a)
    if which == "L1":
        log_value = 0.5 * math.log(math.pi / 2.0) - (gap + 1.0) + math.log(k) - 0.5 * math.log(a / k + n)
    elif which == "L2sq":
        log_value = -2.0 * gap - 1.0 + math.log(k) - math.log(a / k + n)
    else:
        raise ModelError(f"unknown corollary variant {which!r}, expected 'L1' or 'L2sq'")
    return BoundValue(log_value)


# --- home-field advantage ---


@lru_cache(maxsize=4096)
def _home_win_expectation(
    a_i: float, a_j: float, theta: float, quadrature: Optional[QuadratureSpec]
) -> float:
    """E[theta L_i / (theta L_i + L_j)] with L_i/(L_i+L_j) ~ Beta(a_i, a_j)."""
    if theta == 1.0 and a_i == a_j:
        return 0.5
    return beta_expectation(
        lambda x: theta * x / (theta * x + 1.0 - x), a_i, a_j, quadrature
    )


def home_win_expectation(
    a_i: float, a_j: float, theta: ThetaLike, quadrature: Optional[QuadratureSpec] = None
) -> float:
    prior = ThetaPrior.coerce(theta)
    return prior.expect(lambda t: _home_win_expectation(float(a_i), float(a_j), t, quadrature))


def home_expectation_fij(
    nh_ij: int,
    nh_ji: int,
    a_i: float,
    a_j: float,
    theta: ThetaLike,
    quadrature: Optional[QuadratureSpec] = None,
) -> float:
    """Expected home-adjusted win mass F_ij of item i against item j.

    Home games of i count with E[theta L_i / (theta L_i + L_j)], away games
    with E[L_i / (L_i + theta L_j)] = 1 - E[theta L_j / (theta L_j + L_i)].
    Both Beta reductions assume i and j share the prior rate.
    """
    if nh_ij < 0 or nh_ji < 0:
        raise ModelError("home counts must be nonnegative")
    home = home_win_expectation(a_i, a_j, theta, quadrature) if nh_ij else 0.0
    away = 1.0 - home_win_expectation(a_j, a_i, theta, quadrature) if nh_ji else 0.0
    return home * nh_ij + away * nh_ji


def f_closed_form(a: float, theta: float) -> float:
    """f(a, theta) = E[theta X / (theta X + 1 - X)] for X ~ Beta(a, a).

    For integer 2a (and for theta < 1) this is the incomplete-beta form
    a (-1 + 1/theta)^(-2a) theta^(-a) B[1 - theta, 2a, 1 - a]; otherwise the
    same quantity reduced to (theta^a / 2) 2F1(2a, a; 2a + 1; 1 - theta).
    """
    if not (a > 0 and theta > 0):
        raise SpecialFunctionDomainError(f"f needs a > 0 and theta > 0, got a={a} theta={theta}")
    if theta == 1.0:
        return 0.5
    two_a = 2.0 * a
    if two_a.is_integer() or theta < 1.0:
        return a * (-1.0 + 1.0 / theta) ** (-two_a) * theta ** (-a) * incomplete_beta(
            1.0 - theta, two_a, 1.0 - a
        )
    return 0.5 * theta**a * hyp2f1(two_a, a, two_a + 1.0, 1.0 - theta)


def f_quadrature(a: float, theta: float, quadrature: Optional[QuadratureSpec] = None) -> float:
    return home_win_expectation(a, a, theta, quadrature)


def home_win_masses(
    home_budget: HomeBudget,
    prior: PriorHyperParams,
    theta: ThetaLike,
    quadrature: Optional[QuadratureSpec] = None,
) -> np.ndarray:
    """Matrix of F_ij over ordered pairs (zero diagonal)."""
    if home_budget.k != prior.k:
        raise DimensionMismatchError(f"home budget k={home_budget.k}, prior k={prior.k}")
    if not prior.has_uniform_rate:
        raise UnsupportedPriorError(
            "home-field expectations need a common prior rate b for all items"
        )
    k = prior.k
    nh = home_budget.nh
    f = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j and (nh[i, j] or nh[j, i]):
                f[i, j] = home_expectation_fij(
                    int(nh[i, j]), int(nh[j, i]), prior.a[i], prior.a[j], theta, quadrature
                )
    return f


def e_ha(
    home_budget: HomeBudget,
    prior: PriorHyperParams,
    theta: ThetaLike,
    quadrature: Optional[QuadratureSpec] = None,
) -> float:
    """Per-item exponent of the home-field model; loads are sum_j F_ij."""
    masses = home_win_masses(home_budget, prior, theta, quadrature)
    return _exponent(prior, masses.sum(axis=1))


def ha_it_bound(
    home_budget: HomeBudget,
    prior: PriorHyperParams,
    theta: ThetaLike,
    spec: Optional[BoundSpec] = None,
    quadrature: Optional[QuadratureSpec] = None,
) -> BoundValue:
    spec = spec or BoundSpec(norm=Norm.L2, r=2.0, k=home_budget.k)
    return it_lower_bound(e_ha(home_budget, prior, theta, quadrature), spec)

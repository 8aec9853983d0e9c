"""Bayesian and hybrid Cramer-Rao bounds.

All Gamma-ratio expectations reduce to one-dimensional Beta integrals: with
common rate b, S = L_i + L_j ~ Gamma(a_i + a_j, b) is independent of
X = L_i / S ~ Beta(a_i, a_j). Quadrature is the engine; the hypergeometric
closed forms are kept as an independent validation path.
"""

import math
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, lapack
from scipy.special import betaln, gammaln

from btlbounds.core import logger
from btlbounds.core.errors import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    NumericalError,
    ShapeTooSmallError,
    SpecialFunctionDomainError,
    UnsupportedPriorError,
)
from btlbounds.models.models import (
    ComparisonBudget,
    FisherMatrix,
    HcrbTrace,
    HomeBudget,
    InfoKind,
    PriorHyperParams,
    QuadratureSpec,
)
from btlbounds.services.special_fn import beta_expectation, hyp2f1


def _require_shape(value: float, minimum: float, what: str) -> None:
    if not value > minimum:
        raise ShapeTooSmallError(f"{what} must exceed {minimum}, got {value}", value, minimum)


def t1(a_i: float, b: float) -> float:
    """E[L_i^-2] = b^2 / ((a_i - 1)(a_i - 2))."""
    _require_shape(a_i, 2.0, "a_i")
    return b * b / ((a_i - 1.0) * (a_i - 2.0))


def t2(a_i: float, a_j: float, b: float) -> float:
    """E[L_j / (L_i (L_i + L_j)^2)] = b^2 a_j / ((a_i - 1)(A - 1)(A - 2)), A = a_i + a_j."""
    _require_shape(a_i, 2.0, "a_i")
    s = a_i + a_j
    return b * b * a_j / ((a_i - 1.0) * (s - 1.0) * (s - 2.0))


@lru_cache(maxsize=1)
def _note_t3_sign() -> None:
    logger.debug(
        "t3 uses the positive expectation E[(L_i + L_j)^-2]; "
        "the bracketed gamma-ratio form evaluates to its negative"
    )


def t3(a_i: float, a_j: float, b: float) -> float:
    """E[(L_i + L_j)^-2] = b^2 / ((A - 1)(A - 2)), A = a_i + a_j."""
    s = a_i + a_j
    _require_shape(s, 2.0, "a_i + a_j")
    _note_t3_sign()
    return b * b / ((s - 1.0) * (s - 2.0))


def _pair_rate(prior: PriorHyperParams, i: int, j: int) -> float:
    if prior.b[i] != prior.b[j]:
        raise UnsupportedPriorError(
            f"items {i} and {j} are compared but have prior rates {prior.b[i]} != {prior.b[j]}"
        )
    return float(prior.b[i])


def bim(budget: ComparisonBudget, prior: PriorHyperParams) -> FisherMatrix:
    """Bayesian information matrix of the basic model."""
    if budget.k != prior.k:
        raise DimensionMismatchError(f"budget k={budget.k}, prior k={prior.k}")
    k = prior.k
    a, b, n = prior.a, prior.b, budget.n
    m = np.zeros((k, k))
    for i in range(k):
        m[i, i] = (a[i] - 1.0) * t1(a[i], b[i])
    for i, j in budget.edges():
        rate = _pair_rate(prior, i, j)
        m[i, i] += n[i, j] * t2(a[i], a[j], rate)
        m[j, j] += n[i, j] * t2(a[j], a[i], rate)
        m[i, j] = m[j, i] = -n[i, j] * t3(a[i], a[j], rate)
    return FisherMatrix(m=m, kind=InfoKind.BIM)


# above this size the d x d solve matrix is never materialised
BATCHED_SOLVE_MAX_DIM = 50


def _inverse_diagonal(fim: FisherMatrix) -> np.ndarray:
    """Diagonal of fim^-1 from its Cholesky factor, one solve per unit vector."""
    factor, info = lapack.dpotrf(fim.m, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"{fim.kind.value} is not positive definite: leading minor {info} fails",
            pivot=int(info) - 1,
        )
    if info < 0:
        raise NumericalError(f"dpotrf rejected argument {-info}")
    if fim.d <= BATCHED_SOLVE_MAX_DIM:
        identity = np.eye(fim.d)
        return np.diag(cho_solve((factor, True), identity, check_finite=False)).copy()
    diagonal = np.empty(fim.d)
    unit = np.zeros(fim.d)
    for i in range(fim.d):
        unit[i] = 1.0
        diagonal[i] = cho_solve((factor, True), unit, check_finite=False)[i]
        unit[i] = 0.0
    return diagonal


def bcrb_trace(fim: FisherMatrix) -> float:
    """Tr(I^-1), the Bayesian Cramer-Rao bound on the squared L2 risk."""
    return float(_inverse_diagonal(fim).sum())


# --- mu / nu expectations ---


def _check_exponents(a_i: float, a_j: float, t_i: float, t_j: float, theta: float, order: int):
    if not theta > 0:
        raise SpecialFunctionDomainError(f"theta must be > 0, got {theta}")
    if not (a_i + t_i > 0 and a_j + t_j > 0):
        raise SpecialFunctionDomainError(
            f"need a_i + t_i > 0 and a_j + t_j > 0, got ({a_i + t_i}, {a_j + t_j})"
        )
    total = a_i + a_j + t_i + t_j
    if not total > order:
        raise ShapeTooSmallError(
            f"expectation diverges: a_i + a_j + t_i + t_j = {total} <= {order}", total, order
        )


@lru_cache(maxsize=8192)
def _ratio_moment(
    a_i: float,
    a_j: float,
    b: float,
    t_i: float,
    t_j: float,
    theta: float,
    order: int,
    quadrature: Optional[QuadratureSpec],
) -> float:
    """E[L_i^t_i L_j^t_j / (theta L_i + L_j)^order] by Beta quadrature."""
    _check_exponents(a_i, a_j, t_i, t_j, theta, order)
    p, q = a_i + t_i, a_j + t_j
    s = p + q
    log_scale = (
        -(t_i + t_j - order) * math.log(b)
        + gammaln(s - order)
        - gammaln(a_i)
        - gammaln(a_j)
        + betaln(p, q)
    )
    integral = beta_expectation(lambda x: (theta * x + 1.0 - x) ** (-order), p, q, quadrature)
    return math.exp(log_scale) * integral


def mu(
    a_i: float,
    a_j: float,
    b: float,
    t_i: float,
    t_j: float,
    theta: float,
    quadrature: Optional[QuadratureSpec] = None,
) -> float:
    """E[L_i^t_i L_j^t_j / (theta L_i + L_j)] for L ~ Gamma(a, b) independent."""
    return _ratio_moment(
        float(a_i), float(a_j), float(b), float(t_i), float(t_j), float(theta), 1, quadrature
    )


def nu_shifted(
    a_i: float,
    a_j: float,
    b: float,
    t_i: float,
    t_j: float,
    theta: float,
    quadrature: Optional[QuadratureSpec] = None,
) -> float:
    """E[L_i^t_i L_j^t_j / (theta L_i + L_j)^2]."""
    return _ratio_moment(
        float(a_i), float(a_j), float(b), float(t_i), float(t_j), float(theta), 2, quadrature
    )


def nu(
    a_i: float, a_j: float, b: float, theta: float, quadrature: Optional[QuadratureSpec] = None
) -> float:
    """E[1 / (theta L_i + L_j)^2]."""
    return nu_shifted(a_i, a_j, b, 0.0, 0.0, theta, quadrature)


def mu_closed_form(a_i: float, a_j: float, b: float, t_i: float, t_j: float, theta: float) -> float:
    """mu by the hypergeometric closed form; a_j + t_j must be a positive integer.

    With s_i = t_i - 1, s_j = t_j, p = a_i + s_i, q = a_j + s_j, c = p + q:

        b^-(s_i+s_j) (-theta)^(q-1) / (Gamma(a_i) Gamma(a_j)) *
        [Gamma(c) theta^-c / c * 2F1(c, c; c+1; (theta-1)/theta)
         + sum_{m=1}^{q-1} (-theta)^-m (m-1)! Gamma(c-m)]

    The 2F1 is evaluated after the Euler transformation
    2F1(c, c; c+1; z) = (1-z)^(1-c) 2F1(1, 1; c+1; z).
    """
    _check_exponents(a_i, a_j, t_i, t_j, theta, 1)
    s_i, s_j = t_i - 1.0, t_j
    p, q = a_i + s_i, a_j + s_j
    if not (q >= 1 and float(q).is_integer()):
        raise SpecialFunctionDomainError(f"closed form needs integer a_j + t_j >= 1, got {q}")
    if not p > 0:
        raise SpecialFunctionDomainError(f"closed form needs a_i + t_i > 1, got {a_i + t_i}")
    q = int(q)
    c = p + q
    z = (theta - 1.0) / theta
    head = math.exp(gammaln(c)) / (c * theta) * hyp2f1(1.0, 1.0, c + 1.0, z)
    tail = sum(
        (-theta) ** (-m) * math.factorial(m - 1) * math.exp(gammaln(c - m)) for m in range(1, q)
    )
    prefactor = b ** (-(s_i + s_j)) * (-theta) ** (q - 1) / math.exp(gammaln(a_i) + gammaln(a_j))
    return prefactor * (head + tail)


def nu_closed_form(a_i: float, a_j: float, b: float, theta: float) -> float:
    """nu by integration by parts in L_j: (a_j - 1) mu(0, -1) - b mu(0, 0)."""
    _require_shape(a_j, 1.0, "a_j")
    return (a_j - 1.0) * mu_closed_form(a_i, a_j, b, 0.0, -1.0, theta) - b * mu_closed_form(
        a_i, a_j, b, 0.0, 0.0, theta
    )


# --- hybrid information matrix ---


def him(
    home_budget: HomeBudget,
    prior: PriorHyperParams,
    theta: float,
    quadrature: Optional[QuadratureSpec] = None,
) -> FisherMatrix:
    """Hybrid information matrix [[H^L, H^Lt], [H^Lt^T, H^t]] with theta last.

    Each ordered pair (i home, j away) contributes
    n^h_ij * theta * E[L_j / (L_i (theta L_i + L_j)^2)] to H_ii,
    n^h_ij * theta * E[L_i / (L_j (theta L_i + L_j)^2)] to H_jj,
    -n^h_ij * theta * E[1 / (theta L_i + L_j)^2] to H_ij,
    n^h_ij * E[L_i L_j / (theta L_i + L_j)^2] / theta to H^t,
    n^h_ij * E[L_j / (theta L_i + L_j)^2] to H^Lt_i and
    -n^h_ij * E[L_i / (theta L_i + L_j)^2] to H^Lt_j.
    """
    if home_budget.k != prior.k:
        raise DimensionMismatchError(f"home budget k={home_budget.k}, prior k={prior.k}")
    if not theta > 0:
        raise SpecialFunctionDomainError(f"theta must be > 0, got {theta}")
    k = prior.k
    a, b, nh = prior.a, prior.b, home_budget.nh
    m = np.zeros((k + 1, k + 1))
    for i in range(k):
        m[i, i] = (a[i] - 1.0) * t1(a[i], b[i])

    for i, j in zip(*np.nonzero(nh)):
        i, j = int(i), int(j)
        n_ij = float(nh[i, j])
        rate = _pair_rate(prior, i, j)

        def moment(t_i: float, t_j: float) -> float:
            return nu_shifted(a[i], a[j], rate, t_i, t_j, theta, quadrature)

        m[i, i] += n_ij * theta * moment(-1.0, 1.0)
        m[j, j] += n_ij * theta * moment(1.0, -1.0)
        cross = n_ij * theta * moment(0.0, 0.0)
        m[i, j] -= cross
        m[j, i] -= cross
        m[k, k] += n_ij * moment(1.0, 1.0) / theta
        m[i, k] += n_ij * moment(0.0, 1.0)
        m[j, k] -= n_ij * moment(1.0, 0.0)

    m[k, :k] = m[:k, k]
    return FisherMatrix(m=m, kind=InfoKind.HIM)


def hcrb_trace(fim: FisherMatrix) -> HcrbTrace:
    """Tr(H^-1) over the full block, with its skill and theta parts."""
    if fim.kind != InfoKind.HIM:
        raise DimensionMismatchError("hcrb_trace needs a hybrid information matrix")
    diag = _inverse_diagonal(fim)
    return HcrbTrace(total=float(diag.sum()), skills=float(diag[:-1].sum()), theta=float(diag[-1]))

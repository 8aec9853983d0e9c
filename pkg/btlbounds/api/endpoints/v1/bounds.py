import math

from fastapi import APIRouter, Request

from btlbounds.api.deps import as_budget, as_home_budget, as_outcome, get_em_defaults, get_quadrature, http_errors
from btlbounds.core.logging import logger
from btlbounds.models.models import BoundSpec, EmConfig
from btlbounds.models.schemas import (
    BoundRequest,
    BoundResponse,
    EmFitRequest,
    EmFitResponse,
    HcrbResponse,
    HomeBoundRequest,
)
from btlbounds.services.cramer_rao import bcrb_trace, bim, hcrb_trace, him
from btlbounds.services.em import em_fit
from btlbounds.services.info_bounds import ha_it_bound, it_bound


router = APIRouter()


@router.post("/bounds/it", response_model=BoundResponse)
def information_bound(body: BoundRequest):
    """Information-theoretic lower bound on E||lambda - lambda_hat||^r."""
    with http_errors("bounds/it"):
        budget = as_budget(body.budget)
        bound = it_bound(budget, body.prior.build(), BoundSpec(norm=body.norm, r=body.r, k=budget.k))
    logger.info(f"it bound k={budget.k} total_n={budget.total()} log_value={bound.log_value:.6g}")
    return BoundResponse(value=bound.value, log_value=bound.log_value)


@router.post("/bounds/bcrb", response_model=BoundResponse)
def bayesian_cramer_rao(body: BoundRequest):
    """Trace of the inverse Bayesian information matrix."""
    with http_errors("bounds/bcrb"):
        budget = as_budget(body.budget)
        trace = bcrb_trace(bim(budget, body.prior.build()))
    logger.info(f"bcrb k={budget.k} total_n={budget.total()} trace={trace:.6g}")
    return BoundResponse(value=trace, log_value=math.log(trace))


@router.post("/bounds/ha-it", response_model=BoundResponse)
def home_information_bound(request: Request, body: HomeBoundRequest):
    with http_errors("bounds/ha-it"):
        home = as_home_budget(body.home_budget)
        spec = BoundSpec(norm=body.norm, r=body.r, k=home.k)
        bound = ha_it_bound(home, body.prior.build(), body.theta, spec, get_quadrature(request))
    return BoundResponse(value=bound.value, log_value=bound.log_value)


@router.post("/bounds/hcrb", response_model=HcrbResponse)
def hybrid_cramer_rao(request: Request, body: HomeBoundRequest):
    """Trace of the inverse hybrid information matrix, theta treated as fixed."""
    with http_errors("bounds/hcrb"):
        home = as_home_budget(body.home_budget)
        trace = hcrb_trace(him(home, body.prior.build(), body.theta, get_quadrature(request)))
    logger.info(f"hcrb k={home.k} theta={body.theta} total={trace.total:.6g}")
    return HcrbResponse(total=trace.total, skills=trace.skills, theta=trace.theta)


@router.post("/em/fit", response_model=EmFitResponse)
def fit_skills(request: Request, body: EmFitRequest):
    """Posterior mode (or mean) of the skills given one comparison outcome."""
    defaults = get_em_defaults(request)
    with http_errors("em/fit"):
        cfg = EmConfig(
            max_iters=body.max_iters or defaults.max_iters,
            rel_change_tol=body.rel_change_tol or defaults.rel_change_tol,
            estimator_kind=body.estimator_kind,
        )
        trace = em_fit(body.prior.build(), as_outcome(body.outcome), as_budget(body.budget), cfg)
    logger.info(f"em fit k={trace.estimate.k} converged={trace.converged} iterations={trace.iterations_used}")
    return EmFitResponse(
        skills=trace.estimate.lam.tolist(),
        converged=trace.converged,
        iterations_used=trace.iterations_used,
        log_posterior=trace.log_posterior[-1] if trace.log_posterior else None,
    )

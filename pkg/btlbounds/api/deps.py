from contextlib import contextmanager
from typing import Iterator

import numpy as np
from fastapi import HTTPException, Request

from btlbounds.core.errors import BtlError, ConfigError, ModelError, NumericalError
from btlbounds.core.logging import logger
from btlbounds.models.models import ComparisonBudget, ComparisonOutcome, EmConfig, HomeBudget, QuadratureSpec


def get_quadrature(request: Request) -> QuadratureSpec:
    """Quadrature tolerances loaded at startup."""
    return request.app.state.quadrature


def get_em_defaults(request: Request) -> EmConfig:
    return request.app.state.em_config


def _matrix(rows: list[list[int]], what: str) -> np.ndarray:
    try:
        return np.asarray(rows, dtype=np.int64)
    except ValueError as e:
        raise ModelError(f"{what} must be a square integer matrix: {e}") from e


def as_budget(rows: list[list[int]]) -> ComparisonBudget:
    return ComparisonBudget(_matrix(rows, "budget"))


def as_home_budget(rows: list[list[int]]) -> HomeBudget:
    return HomeBudget(_matrix(rows, "home budget"))


def as_outcome(rows: list[list[int]]) -> ComparisonOutcome:
    return ComparisonOutcome(_matrix(rows, "outcome"))


@contextmanager
def http_errors(route: str) -> Iterator[None]:
    """Turn library errors into HTTP responses: bad input 422, numerical trouble 500."""
    try:
        yield
    except (ModelError, ConfigError) as e:
        logger.warning(f"Rejected request route={route}: {e}")
        raise HTTPException(status_code=422, detail=str(e)) from e
    except NumericalError as e:
        logger.error(f"Numerical failure route={route}: {e}")
        raise HTTPException(status_code=500, detail=str(e)) from e
    except BtlError as e:
        logger.error(f"Error route={route}: {e}")
        raise HTTPException(status_code=500, detail=str(e)) from e

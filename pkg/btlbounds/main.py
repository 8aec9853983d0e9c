from contextlib import asynccontextmanager

from fastapi import FastAPI

from btlbounds.api.endpoints.api import api_router
from btlbounds.core.config import settings
from btlbounds.core.logging import logger


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Loads numerical settings once at startup."""
    app.state.quadrature = settings.quadrature_spec
    app.state.em_config = settings.em_config
    logger.info(
        f"Bounds service ready quad_rel_tol={settings.QUAD_REL_TOL} "
        f"em_max_iters={settings.EM_MAX_ITERS}"
    )

    yield

    logger.info("Bounds service shut down")


app = FastAPI(
    title="BTL Bounds",
    description="Bayes-risk lower bounds and EM fits for the Bayesian Bradley-Terry-Luce model.",
    version="0.1.0",
    lifespan=lifespan,
)

app.include_router(api_router, prefix="/api")


@app.get("/", status_code=204)
async def health():
    """Health check."""
    return

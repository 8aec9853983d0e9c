from btlbounds.api.endpoints.v1.bounds import router as bounds_router

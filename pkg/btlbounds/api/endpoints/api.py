from fastapi import APIRouter

from btlbounds.api.endpoints.v1 import bounds_router


api_router = APIRouter()
api_router.include_router(bounds_router, prefix="/v1", tags=["bounds"])

from btlbounds.api.endpoints.api import api_router

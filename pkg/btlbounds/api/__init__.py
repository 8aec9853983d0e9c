from btlbounds.api.deps import (
    as_budget,
    as_home_budget,
    as_outcome,
    get_em_defaults,
    get_quadrature,
    http_errors,
)

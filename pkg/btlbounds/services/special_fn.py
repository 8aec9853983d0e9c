"""Special functions and 1-D quadrature used by the bound formulas.

Thin, validated wrappers over ``scipy.special`` and ``scipy.integrate.quad``:
every routine checks its domain, refuses to return non-finite values and
raises the typed errors of ``btlbounds.core.errors`` instead.
"""

import math
import warnings
from typing import Callable, Optional

from scipy import integrate as scipy_integrate
from scipy import special

from btlbounds.core import settings
from btlbounds.core.errors import (
    ConvergenceError,
    SpecialFunctionDomainError,
    ToleranceNotMetError,
)
from btlbounds.models.models import QuadratureSpec

DEFAULT_QUADRATURE = settings.quadrature_spec


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise SpecialFunctionDomainError(f"log_gamma needs x > 0, got {x}")
    return float(special.gammaln(x))


def digamma(x: float) -> float:
    if not x > 0:
        raise SpecialFunctionDomainError(f"digamma needs x > 0, got {x}")
    return float(special.digamma(x))


def log_beta(x: float, y: float) -> float:
    if not (x > 0 and y > 0):
        raise SpecialFunctionDomainError(f"log_beta needs x, y > 0, got ({x}, {y})")
    return float(special.betaln(x, y))


def _is_nonpositive_integer(c: float) -> bool:
    return c <= 0 and float(c).is_integer()


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric 2F1(a, b; c; z) for real z < 1.

    For z < -1 the Pfaff transformation 2F1(a,b;c;z) = (1-z)^(-b) 2F1(c-a,b;c;z/(z-1))
    maps the argument into (1/2, 1).
    """
    if _is_nonpositive_integer(c):
        raise SpecialFunctionDomainError(f"hyp2f1 undefined for nonpositive integer c={c}")
    if not z < 1:
        raise SpecialFunctionDomainError(f"hyp2f1 needs real z < 1, got z={z}")
    if z == 0:
        return 1.0
    if z < -1:
        value = (1.0 - z) ** (-b) * float(special.hyp2f1(c - a, b, c, z / (z - 1.0)))
    else:
        value = float(special.hyp2f1(a, b, c, z))
    if not math.isfinite(value):
        raise ConvergenceError(f"hyp2f1({a}, {b}; {c}; {z}) did not converge")
    return value


def incomplete_beta(z: float, x: float, y: float) -> float:
    """B[z, x, y] = (z^x / x) * 2F1(x, 1 - y; x + 1; z).

    This is the analytic continuation the home-field closed form evaluates at
    negative z; z^x is real there only for integer x.
    """
    if not x > 0:
        raise SpecialFunctionDomainError(f"incomplete_beta needs x > 0, got {x}")
    if z > 1:
        raise SpecialFunctionDomainError(f"incomplete_beta needs z <= 1, got {z}")
    if z == 0:
        return 0.0
    if z < 0 and not float(x).is_integer():
        raise SpecialFunctionDomainError(
            f"incomplete_beta at negative z={z} is complex for non-integer x={x}"
        )
    if z == 1:
        if not y > 0:
            raise SpecialFunctionDomainError(f"complete beta needs y > 0, got {y}")
        return math.exp(log_beta(x, y))
    return z**x / x * hyp2f1(x, 1.0 - y, x + 1.0, z)


def integrate(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    spec: Optional[QuadratureSpec] = None,
) -> float:
    """Adaptive Gauss-Kronrod quadrature of f over [lo, hi].

    Raises ToleranceNotMetError carrying the best estimate and its error bound
    when QUADPACK cannot meet the requested tolerance.
    """
    spec = spec or DEFAULT_QUADRATURE
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy_integrate.IntegrationWarning)
        value, abserr, info, *_ = scipy_integrate.quad(
            f,
            lo,
            hi,
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            limit=spec.max_subdivisions,
            full_output=1,
        )
    tolerance = max(spec.abs_tol, spec.rel_tol * abs(value))
    if not math.isfinite(value) or abserr > tolerance:
        raise ToleranceNotMetError(
            f"quadrature on [{lo}, {hi}] reached error {abserr:.3g} > {tolerance:.3g}",
            estimate=float(value),
            error_bound=float(abserr),
        )
    return float(value)


def beta_expectation(
    g: Callable[[float], float],
    p: float,
    q: float,
    spec: Optional[QuadratureSpec] = None,
) -> float:
    """E[g(X)] for X ~ Beta(p, q), by quadrature of g against the Beta density."""
    log_norm = log_beta(p, q)

    def integrand(x: float) -> float:
        if x <= 0.0 or x >= 1.0:
            return 0.0
        log_density = (p - 1.0) * math.log(x) + (q - 1.0) * math.log1p(-x) - log_norm
        return float(g(x)) * math.exp(log_density)

    return integrate(integrand, 0.0, 1.0, spec)

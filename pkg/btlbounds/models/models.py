from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from btlbounds.core.errors import (
    DimensionMismatchError,
    ModelError,
)


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_square(m: np.ndarray, name: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{name} must be a square matrix, got shape {m.shape}")
    if m.shape[0] < 2:
        raise ModelError(f"{name} needs k >= 2 items, got k={m.shape[0]}")


def _check_count_matrix(values, name: str) -> np.ndarray:
    raw = np.asarray(values)
    if raw.size and not np.all(np.isfinite(raw)):
        raise ModelError(f"{name} has non-finite entries")
    if raw.size and np.any(raw != np.round(raw)):
        raise ModelError(f"{name} must hold integer counts")
    m = _frozen_array(np.round(raw), np.int64)
    _check_square(m, name)
    if np.any(m < 0):
        raise ModelError(f"{name} has negative entries")
    if np.any(np.diag(m) != 0):
        raise ModelError(f"{name} must have a zero diagonal")
    return m


# --- Numerical plumbing ---


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ModelError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ModelError("max_subdivisions must be >= 1")


# --- Bayesian BTL model ---


@dataclass(frozen=True)
class PriorHyperParams:
    """Independent Gamma(a_i, rate b_i) priors on the k skills."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _frozen_array(self.a, float)
        b = _frozen_array(self.b, float)
        if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
            raise DimensionMismatchError(
                f"shape vector a{a.shape} and rate vector b{b.shape} must be equal-length vectors"
            )
        if a.size < 2:
            raise ModelError(f"prior needs k >= 2 items, got k={a.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ModelError("prior hyperparameters must be finite")
        if np.any(a <= 0) or np.any(b <= 0):
            raise ModelError("prior shapes and rates must be strictly positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def uniform(cls, k: int, a: float, b: float) -> "PriorHyperParams":
        return cls(a=np.full(k, float(a)), b=np.full(k, float(b)))

    @classmethod
    def ak_minus_one(cls, k: int, a: float) -> "PriorHyperParams":
        """Uniform prior with rate b = a*k - 1, the choice used in every figure."""
        return cls.uniform(k, a, a * k - 1.0)

    @property
    def k(self) -> int:
        return int(self.a.size)

    @property
    def mean(self) -> np.ndarray:
        return self.a / self.b

    @property
    def has_uniform_rate(self) -> bool:
        return bool(np.all(self.b == self.b[0]))

    @property
    def has_uniform_shape(self) -> bool:
        return bool(np.all(self.a == self.a[0]))

    def permuted(self, perm: Sequence[int]) -> "PriorHyperParams":
        perm = np.asarray(perm)
        return PriorHyperParams(a=self.a[perm], b=self.b[perm])


@dataclass(frozen=True)
class ComparisonBudget:
    """Symmetric count matrix N: item i and j are compared n_ij times."""

    n: np.ndarray

    def __post_init__(self):
        n = _check_count_matrix(self.n, "budget")
        if not np.array_equal(n, n.T):
            raise ModelError("budget must be symmetric (n_ij == n_ji)")
        object.__setattr__(self, "n", n)

    @classmethod
    def zeros(cls, k: int) -> "ComparisonBudget":
        return cls(np.zeros((k, k), dtype=np.int64))

    @classmethod
    def from_edges(cls, k: int, edges: dict) -> "ComparisonBudget":
        n = np.zeros((k, k), dtype=np.int64)
        for (i, j), weight in edges.items():
            n[i, j] += weight
            n[j, i] += weight
        return cls(n)

    @property
    def k(self) -> int:
        return int(self.n.shape[0])

    def total(self) -> int:
        return int(np.triu(self.n, 1).sum())

    def node_load(self, i: int) -> float:
        return 0.5 * float(self.n[i].sum())

    def node_loads(self) -> np.ndarray:
        return 0.5 * self.n.sum(axis=1).astype(float)

    def edges(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.n, 1))
        return list(zip(rows.tolist(), cols.tolist()))

    def permuted(self, perm: Sequence[int]) -> "ComparisonBudget":
        perm = np.asarray(perm)
        return ComparisonBudget(self.n[np.ix_(perm, perm)])


@dataclass(frozen=True)
class HomeBudget:
    """Possibly asymmetric counts: n^h_ij games of i (at home) against j."""

    nh: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nh", _check_count_matrix(self.nh, "home budget"))

    @property
    def k(self) -> int:
        return int(self.nh.shape[0])

    def induced(self) -> ComparisonBudget:
        return ComparisonBudget(self.nh + self.nh.T)

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.nh, self.nh.T))


@dataclass(frozen=True)
class SkillVector:
    lam: np.ndarray

    def __post_init__(self):
        lam = _frozen_array(self.lam, float)
        if lam.ndim != 1:
            raise DimensionMismatchError(f"skills must be a vector, got shape {lam.shape}")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ModelError("skills must be strictly positive and finite")
        object.__setattr__(self, "lam", lam)

    @property
    def k(self) -> int:
        return int(self.lam.size)


@dataclass(frozen=True)
class ComparisonOutcome:
    """Win counts: w_ij is how often i beat j."""

    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", _check_count_matrix(self.w, "outcome"))

    @property
    def k(self) -> int:
        return int(self.w.shape[0])

    def win_count(self, i: int) -> int:
        return int(self.w[i].sum())

    def win_counts(self) -> np.ndarray:
        return self.w.sum(axis=1)

    def check_against(self, budget: ComparisonBudget) -> None:
        if budget.k != self.k:
            raise DimensionMismatchError(f"outcome has k={self.k}, budget has k={budget.k}")
        if not np.array_equal(self.w + self.w.T, budget.n):
            raise ModelError("outcome does not match its budget: w_ij + w_ji != n_ij")


@dataclass(frozen=True)
class LatentTimes:
    """Symmetric latent Gamma times zeta_ij (0 where n_ij == 0)."""

    z: np.ndarray

    def __post_init__(self):
        z = _frozen_array(self.z, float)
        _check_square(z, "latent times")
        if not np.all(np.isfinite(z)) or np.any(z < 0):
            raise ModelError("latent times must be finite and nonnegative")
        object.__setattr__(self, "z", z)

    @property
    def k(self) -> int:
        return int(self.z.shape[0])

    def totals(self) -> np.ndarray:
        return self.z.sum(axis=1)


@dataclass(frozen=True)
class ThetaPrior:
    """Home-field advantage as a point mass or a finite mixture {(theta_m, p_m)}."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = _frozen_array(np.atleast_1d(self.values), float)
        weights = _frozen_array(np.atleast_1d(self.weights), float)
        if values.shape != weights.shape or values.ndim != 1 or values.size == 0:
            raise DimensionMismatchError("theta support and weights must be equal-length vectors")
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise ModelError("theta support must lie in (0, inf)")
        if np.any(weights < 0) or not np.isclose(weights.sum(), 1.0, rtol=0, atol=1e-12):
            raise ModelError("theta weights must be nonnegative and sum to 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point(cls, theta: float) -> "ThetaPrior":
        return cls(values=np.array([float(theta)]), weights=np.array([1.0]))

    @classmethod
    def coerce(cls, theta) -> "ThetaPrior":
        return theta if isinstance(theta, ThetaPrior) else cls.point(float(theta))

    @property
    def is_point(self) -> bool:
        return self.values.size == 1

    def expect(self, fn: Callable[[float], float]) -> float:
        return float(sum(p * fn(float(t)) for t, p in zip(self.values, self.weights) if p > 0))


@dataclass(frozen=True)
class HomeOutcome:
    """w^h_ij: wins of i at home against j, generated with home advantage theta."""

    wh: np.ndarray
    theta: ThetaPrior

    def __post_init__(self):
        object.__setattr__(self, "wh", _check_count_matrix(self.wh, "home outcome"))
        object.__setattr__(self, "theta", ThetaPrior.coerce(self.theta))

    @property
    def k(self) -> int:
        return int(self.wh.shape[0])

    def check_against(self, home_budget: HomeBudget) -> None:
        if home_budget.k != self.k:
            raise DimensionMismatchError(f"home outcome has k={self.k}, home budget has k={home_budget.k}")
        if np.any(self.wh > home_budget.nh):
            raise ModelError("home outcome exceeds its budget: w^h_ij > n^h_ij")

    def aggregate(self, home_budget: HomeBudget) -> ComparisonOutcome:
        """Total wins regardless of venue: w_ij = w^h_ij + (n^h_ji - w^h_ji)."""
        self.check_against(home_budget)
        return ComparisonOutcome(self.wh + (home_budget.nh.T - self.wh.T))

    def q(self, skills: SkillVector) -> np.ndarray:
        """Q_ij = theta*lam_i / (theta*lam_i + lam_j), for a point theta."""
        if not self.theta.is_point:
            raise ModelError("Q_ij needs a point value of theta")
        return home_win_probabilities(skills, float(self.theta.values[0]))


def home_win_probabilities(skills: SkillVector, theta: float) -> np.ndarray:
    lam = skills.lam
    num = theta * lam[:, None]
    q = num / (num + lam[None, :])
    np.fill_diagonal(q, 0.0)
    return q


def win_probabilities(skills: SkillVector) -> np.ndarray:
    return home_win_probabilities(skills, 1.0)


# --- EM ---


class EstimatorKind(str, Enum):
    POSTERIOR_MODE = "posterior-mode"
    POSTERIOR_MEAN = "posterior-mean"


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 10000
    rel_change_tol: float = 1e-9
    estimator_kind: EstimatorKind = EstimatorKind.POSTERIOR_MODE
    # False keeps only the final iterate; the log-posterior history is always kept
    keep_iterates: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ModelError("max_iters must be >= 1")
        if not self.rel_change_tol > 0:
            raise ModelError("rel_change_tol must be > 0")
        object.__setattr__(self, "estimator_kind", EstimatorKind(self.estimator_kind))


@dataclass(frozen=True)
class EmTrace:
    """Final estimate and log-posterior history; every iterate only when EmConfig.keep_iterates is set."""

    iterates: list[SkillVector]
    converged: bool
    iterations_used: int
    log_posterior: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.iterates:
            raise ModelError("an EM trace holds at least the initial iterate")

    @property
    def estimate(self) -> SkillVector:
        return self.iterates[-1]


# --- Bounds ---


class Norm(str, Enum):
    L1 = "L1"
    L2 = "L2"


@dataclass(frozen=True)
class BoundSpec:
    """Distortion ||lambda - lambda_hat||^r under the L1 or L2 norm in R^k."""

    norm: Norm
    r: float
    k: int

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm(self.norm))
        if not self.r >= 1:
            raise ModelError(f"distortion exponent r must be >= 1, got {self.r}")
        if self.k < 2:
            raise ModelError(f"k must be >= 2, got {self.k}")


@dataclass(frozen=True)
class BoundValue:
    log_value: float

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))


class InfoKind(str, Enum):
    BIM = "BIM"
    HIM = "HIM"


@dataclass(frozen=True)
class FisherMatrix:
    """BIM (k x k) or HIM ((k+1) x (k+1), theta block last)."""

    m: np.ndarray
    kind: InfoKind

    def __post_init__(self):
        m = _frozen_array(self.m, float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"information matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ModelError("information matrix has non-finite entries")
        scale = max(1.0, float(np.abs(m).max()))
        if not np.allclose(m, m.T, rtol=0, atol=1e-12 * scale):
            raise ModelError("information matrix must be symmetric")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "kind", InfoKind(self.kind))

    @property
    def d(self) -> int:
        return int(self.m.shape[0])

    @property
    def skill_block(self) -> np.ndarray:
        return self.m if self.kind == InfoKind.BIM else self.m[:-1, :-1]


@dataclass(frozen=True)
class HcrbTrace:
    """Trace of the inverse HIM, split into its skill and theta parts."""

    total: float
    skills: float
    theta: float


# --- Graph design ---


class TopologyKind(str, Enum):
    COMPLETE = "complete"
    CYCLE = "cycle"
    STAR = "star"
    CHAIN = "chain"
    RANDOM_TREE = "random_tree"
    ERDOS_RENYI = "erdos_renyi"


@dataclass(frozen=True)
class Topology:
    kind: TopologyKind
    k: int
    p: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TopologyKind(self.kind))
        if self.k < 2:
            raise ModelError(f"topology needs k >= 2, got {self.k}")
        if self.kind == TopologyKind.ERDOS_RENYI:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ModelError("erdos_renyi topology needs an edge probability p in [0, 1]")

    @property
    def label(self) -> str:
        return self.kind.value


# --- Experiment output ---


@dataclass
class ResultTable:
    """Rows of one experiment, each carrying its full parameter tuple."""

    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def sort(self, key_columns: Sequence[str]) -> "ResultTable":
        idx = [self.columns.index(c) for c in key_columns]
        self.rows.sort(key=lambda row: tuple(row[i] for i in idx))
        return self

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]

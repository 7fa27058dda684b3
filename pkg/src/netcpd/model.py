"""Shared domain types: model configuration, batches and posterior containers.

All matrices are dense float64.  N and K are assumed to be desk scale
(N up to ~1000), so there is no sparse storage anywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

ROW_SUM_TOL = 1e-9


class ConfigError(ValueError):
    """A model or run configuration violates one of its invariants."""


def _as_matrix(value, shape: tuple[int, int]) -> np.ndarray:
    out = np.asarray(value, dtype=np.float64)
    if out.ndim == 0:
        out = np.full(shape, float(out))
    if out.shape != shape:
        raise ConfigError(f"expected shape {shape}, got {out.shape}")
    return out


def _as_vector(value, n: int) -> np.ndarray:
    out = np.asarray(value, dtype=np.float64)
    if out.ndim == 0:
        out = np.full(n, float(out))
    if out.shape != (n,):
        raise ConfigError(f"expected shape ({n},), got {out.shape}")
    return out


@dataclass
class ModelConfig:
    """Configuration shared by the three inference engines.

    ``gamma0`` / ``xi0`` default to ``None``, meaning the engine draws them
    uniformly on [0.95, 1.05] at initialisation from its own seed.
    """

    n_nodes: int
    n_groups: int
    delta: float = 0.1
    n_conn_groups: int = 1
    truncation: int = 10
    delta_lambda: float = 1.0
    delta_z: float = 1.0
    delta_pi: float = 1.0
    delta_u: float = 1.0
    n_cavi: int = 3
    alpha0: float | np.ndarray = 1.0
    beta0: float | np.ndarray = 1.0
    gamma0: np.ndarray | None = None
    eta0: float | np.ndarray = 1.0
    zeta0: float | np.ndarray = 1.0
    xi0: np.ndarray | None = None
    gem_concentration: float = 1.0
    epsilon_occupancy: float = 0.1
    fp_tol: float = 1e-6
    fp_max_iters: int = 100

    def replace(self, **kwargs) -> "ModelConfig":
        return replace(self, **kwargs)


def validate(config: ModelConfig) -> ModelConfig:
    """Check every invariant of ``config``; return it unchanged if valid.

    Raises ``ConfigError`` naming the offending field otherwise.
    """
    if config.n_nodes < 2:
        raise ConfigError(f"n_nodes must be >= 2, got {config.n_nodes}")
    if config.n_groups < 1:
        raise ConfigError(f"n_groups must be >= 1, got {config.n_groups}")
    if config.n_conn_groups < 1:
        raise ConfigError(f"n_conn_groups must be >= 1, got {config.n_conn_groups}")
    if config.truncation < 1:
        raise ConfigError(f"truncation must be >= 1, got {config.truncation}")
    if not config.delta > 0:
        raise ConfigError(f"delta must be > 0, got {config.delta}")
    for name in ("delta_lambda", "delta_z", "delta_pi", "delta_u"):
        value = getattr(config, name)
        if not 0.0 < value <= 1.0:
            raise ConfigError(f"{name} must be in (0, 1], got {value}")
    if config.n_cavi < 1:
        raise ConfigError(f"n_cavi must be >= 1, got {config.n_cavi}")
    k = config.n_groups
    kc = config.n_conn_groups
    for name, shape in (("alpha0", (k, k)), ("beta0", (k, k)),
                        ("eta0", (kc, kc)), ("zeta0", (kc, kc))):
        mat = _as_matrix(getattr(config, name), shape)
        if not np.all(mat > 0):
            raise ConfigError(f"{name} must be strictly positive")
    if config.gamma0 is not None:
        vec = _as_vector(config.gamma0, k)
        if not np.all(vec > 0):
            raise ConfigError("gamma0 must be strictly positive")
    if config.xi0 is not None:
        vec = _as_vector(config.xi0, kc)
        if not np.all(vec > 0):
            raise ConfigError("xi0 must be strictly positive")
    if not config.gem_concentration > 0:
        raise ConfigError("gem_concentration must be > 0")
    if not config.epsilon_occupancy > 0:
        raise ConfigError("epsilon_occupancy must be > 0")
    return config


@dataclass
class EventBatch:
    """Aggregated edge counts for one update interval of width ``width``.

    ``counts[i, j]`` is the number of events on edge (i, j) with timestamps
    in the half-open interval ((r-1)*width, r*width].
    """

    counts: np.ndarray
    interval_index: int
    width: float

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError(f"counts must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @property
    def n_nodes(self) -> int:
        return self.counts.shape[0]


@dataclass
class RatePosterior:
    """Gamma shape/rate matrices for the block rates."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.alpha.shape != self.beta.shape:
            raise ValueError("alpha and beta shapes differ")

    @property
    def mean(self) -> np.ndarray:
        return self.alpha / self.beta

    def check(self) -> None:
        if not (np.all(self.alpha > 0) and np.all(self.beta > 0)):
            raise ValueError("gamma parameters must stay strictly positive")

    def copy(self) -> "RatePosterior":
        return RatePosterior(self.alpha.copy(), self.beta.copy())


@dataclass
class MembershipPosterior:
    """Row-stochastic node-by-group probability matrix."""

    tau: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=np.float64)

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.tau, axis=1)

    def check(self) -> None:
        if np.any(self.tau < 0):
            raise ValueError("tau entries must be non-negative")
        if np.max(np.abs(self.tau.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("tau rows must sum to 1")

    def copy(self) -> "MembershipPosterior":
        return MembershipPosterior(self.tau.copy())


@dataclass
class MixturePosterior:
    """Dirichlet parameters of the group proportions."""

    gamma: np.ndarray

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)

    @property
    def proportions(self) -> np.ndarray:
        return self.gamma / self.gamma.sum()

    def check(self) -> None:
        if not np.all(self.gamma > 0):
            raise ValueError("gamma must be strictly positive")

    def copy(self) -> "MixturePosterior":
        return MixturePosterior(self.gamma.copy())


@dataclass
class SbmPosterior:
    """Posterior state specific to the unknown-adjacency variant."""

    sigma: np.ndarray           # N x N edge probabilities
    nu: np.ndarray              # N x K_conn connection memberships
    eta: np.ndarray             # K_conn x K_conn beta shape
    zeta: np.ndarray            # K_conn x K_conn beta shape
    xi: np.ndarray              # K_conn Dirichlet parameters

    @property
    def rho_mean(self) -> np.ndarray:
        return self.eta / (self.eta + self.zeta)

    def check(self) -> None:
        if np.any(self.sigma < 0) or np.any(self.sigma > 1):
            raise ValueError("sigma must lie in [0, 1]")
        if np.max(np.abs(self.nu.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("nu rows must sum to 1")
        if not (np.all(self.eta > 0) and np.all(self.zeta > 0) and np.all(self.xi > 0)):
            raise ValueError("eta, zeta, xi must be strictly positive")

    def copy(self) -> "SbmPosterior":
        return SbmPosterior(self.sigma.copy(), self.nu.copy(), self.eta.copy(),
                            self.zeta.copy(), self.xi.copy())


@dataclass
class GemPosterior:
    """Posterior state specific to the unknown-group-count variant."""

    omega: np.ndarray           # L stick beta shape
    nu_stick: np.ndarray        # L stick beta shape
    rate: RatePosterior         # L x L
    tau: np.ndarray             # N x L
    delta_lambda_matrix: np.ndarray   # L x L per-block forgetting factors
    epsilon_occupancy: float

    def check(self) -> None:
        if not (np.all(self.omega > 0) and np.all(self.nu_stick > 0)):
            raise ValueError("stick parameters must be strictly positive")
        if np.max(np.abs(self.tau.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("tau rows must sum to 1")
        self.rate.check()


def stick_to_proportions(u: np.ndarray) -> np.ndarray:
    """Map truncated stick draws to mixture proportions.

    ``u`` must have its last component equal to 1 (truncation) and all
    components in [0, 1].  Returns the simplex vector with
    ``pi_k = u_k * prod_{l<k} (1 - u_l)``.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1 or u.size < 1:
        raise ValueError("u must be a non-empty vector")
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("stick draws must lie in [0, 1]")
    if u[-1] != 1.0:
        raise ValueError("the final stick draw must equal 1 (truncation)")
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - u[:-1])])
    return u * remaining

"""Online variational engines for the three model variants.

All three engines consume one ``EventBatch`` per step.  A step runs
``n_cavi`` coordinate-ascent cycles: the membership fixed point first,
then the mixture and rate parameter updates, all computed against the
tempered previous-step posterior (the tempering never compounds across
cycles within one step).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .model import (
    EventBatch,
    GemPosterior,
    MembershipPosterior,
    MixturePosterior,
    ModelConfig,
    RatePosterior,
    SbmPosterior,
    validate,
)


def update_rates(rate: RatePosterior, counts: np.ndarray, tau: np.ndarray,
                 weights: np.ndarray, delta_lambda: float | np.ndarray,
                 delta: float) -> RatePosterior:
    """Tempered conjugate update of the gamma rate posterior.

    ``weights`` is the edge weighting: a binary adjacency for the known
    graph, or the current edge-probability matrix sigma otherwise.
    ``delta_lambda`` may be a per-block matrix (unknown-group-count variant).
    """
    block_counts = tau.T @ (counts * weights) @ tau
    block_mass = tau.T @ weights @ tau
    alpha = delta_lambda * (rate.alpha - 1.0) + block_counts + 1.0
    beta = delta_lambda * rate.beta + delta * block_mass
    return RatePosterior(alpha, beta)


def update_mixture(gamma_prev: np.ndarray, tau: np.ndarray,
                   delta_pi: float, delta_z: float) -> MixturePosterior:
    """Tempered Dirichlet pseudo-count accumulation for the proportions."""
    gamma = delta_pi * (gamma_prev - 1.0) + delta_z * tau.sum(axis=0) + 1.0
    return MixturePosterior(gamma)


def membership_fixed_point(tau: np.ndarray, counts: np.ndarray,
                           weights: np.ndarray, log_prior: np.ndarray,
                           rate: RatePosterior, delta: float,
                           max_iters: int = 100, tol: float = 1e-6,
                           ) -> tuple[np.ndarray, bool, int]:
    """Row-wise Gauss-Seidel fixed point for the membership probabilities.

    Sweeps nodes in index order, recomputing each row from the current
    values of all other rows, until the largest row change falls below
    ``tol``.  ``log_prior`` is the node-independent per-group log-prior
    term (Dirichlet or stick-breaking expectations, already scaled by
    the membership forgetting factor).

    Returns (tau, converged, n_sweeps); warm-start by passing the
    previous step's tau.
    """
    tau = np.array(tau, dtype=np.float64)
    n = tau.shape[0]
    s_mat = digamma(rate.alpha) - np.log(rate.beta)   # E[log lambda]
    m_mat = rate.alpha / rate.beta                     # E[lambda]
    s_diag = np.diag(s_mat).copy()
    m_diag = np.diag(m_mat).copy()
    xw = counts * weights
    st = s_mat.T.copy()
    mt = m_mat.T.copy()
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iters + 1):
        max_change = 0.0
        for i in range(n):
            c_out = xw[i] @ tau
            d_out = weights[i] @ tau
            c_in = xw[:, i] @ tau
            d_in = weights[:, i] @ tau
            logits = (log_prior
                      + s_mat @ c_out - delta * (m_mat @ d_out)
                      + st @ c_in - delta * (mt @ d_in))
            w_ii = weights[i, i]
            if w_ii != 0.0:
                self_term = counts[i, i] * s_diag - delta * m_diag
                logits += w_ii * (1.0 - 2.0 * tau[i]) * self_term
            logits -= logits.max()
            row = np.exp(logits)
            row /= row.sum()
            change = np.abs(row - tau[i]).max()
            if change > max_change:
                max_change = change
            tau[i] = row
        if max_change < tol:
            converged = True
            break
    return tau, converged, sweeps


def _draw_dirichlet_init(k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.95, 1.05, size=k)


@dataclass
class BhppState:
    rate: RatePosterior
    membership: MembershipPosterior
    mixture: MixturePosterior
    step_index: int
    fp_converged: bool = True

    def check(self) -> None:
        self.rate.check()
        self.membership.check()
        self.mixture.check()


class BhppEngine:
    """Online VB for the known-graph, known-K variant."""

    def __init__(self, config: ModelConfig, adjacency: np.ndarray | None = None,
                 seed: int | None = None,
                 fixed_memberships: np.ndarray | None = None):
        self.config = validate(config)
        n, k = config.n_nodes, config.n_groups
        if adjacency is None:
            adjacency = np.ones((n, n))
        self.adjacency = np.asarray(adjacency, dtype=np.float64)
        rng = np.random.default_rng(seed)
        gamma0 = (np.asarray(config.gamma0, dtype=np.float64)
                  if config.gamma0 is not None else _draw_dirichlet_init(k, rng))
        alpha0 = np.broadcast_to(np.asarray(config.alpha0, dtype=np.float64), (k, k)).copy()
        beta0 = np.broadcast_to(np.asarray(config.beta0, dtype=np.float64), (k, k)).copy()
        if fixed_memberships is not None:
            tau = np.zeros((n, k))
            tau[np.arange(n), np.asarray(fixed_memberships, dtype=np.int64)] = 1.0
        else:
            tau = np.full((n, k), 1.0 / k)
        self._fixed_tau = fixed_memberships is not None
        self.state = BhppState(RatePosterior(alpha0, beta0),
                               MembershipPosterior(tau),
                               MixturePosterior(gamma0), 0)

    def step(self, batch: EventBatch) -> BhppState:
        cfg = self.config
        if abs(batch.width - cfg.delta) > 1e-12:
            raise ValueError(f"batch width {batch.width} != configured delta {cfg.delta}")
        counts = np.asarray(batch.counts, dtype=np.float64)
        prev_rate = self.state.rate
        prev_gamma = self.state.mixture.gamma
        tau = self.state.membership.tau
        rate, mixture = prev_rate, self.state.mixture
        fp_ok = True
        for _ in range(cfg.n_cavi):
            if not self._fixed_tau:
                log_prior = cfg.delta_z * (digamma(mixture.gamma)
                                           - digamma(mixture.gamma.sum()))
                tau, ok, _ = membership_fixed_point(
                    tau, counts, self.adjacency, log_prior, rate, cfg.delta,
                    cfg.fp_max_iters, cfg.fp_tol)
                fp_ok = fp_ok and ok
            mixture = update_mixture(prev_gamma, tau, cfg.delta_pi, cfg.delta_z)
            rate = update_rates(prev_rate, counts, tau, self.adjacency,
                                cfg.delta_lambda, cfg.delta)
        self.state = BhppState(rate, MembershipPosterior(tau), mixture,
                               self.state.step_index + 1, fp_ok)
        self.state.check()
        return self.state


@dataclass
class SbmState:
    rate: RatePosterior
    membership: MembershipPosterior
    mixture: MixturePosterior
    sbm: SbmPosterior
    cumulative_counts: np.ndarray
    cumulative_rate_means: np.ndarray
    step_index: int
    fp_converged: bool = True

    def check(self) -> None:
        self.rate.check()
        self.membership.check()
        self.mixture.check()
        self.sbm.check()


def _conn_fixed_point(nu: np.ndarray, sigma: np.ndarray, log_prior: np.ndarray,
                      eta: np.ndarray, zeta: np.ndarray,
                      max_iters: int = 100, tol: float = 1e-6,
                      ) -> tuple[np.ndarray, bool]:
    """Gauss-Seidel fixed point for the connection-group memberships."""
    nu = np.array(nu, dtype=np.float64)
    n = nu.shape[0]
    p_mat = digamma(eta) - digamma(eta + zeta)     # E[log rho]
    q_mat = digamma(zeta) - digamma(eta + zeta)    # E[log (1 - rho)]
    p_diag = np.diag(p_mat).copy()
    q_diag = np.diag(q_mat).copy()
    converged = False
    for _ in range(max_iters):
        max_change = 0.0
        for i in range(n):
            s_out = sigma[i] @ nu
            u_out = nu.sum(axis=0) - s_out
            s_in = sigma[:, i] @ nu
            u_in = nu.sum(axis=0) - s_in
            logits = (log_prior
                      + p_mat @ s_out + q_mat @ u_out
                      + p_mat.T @ s_in + q_mat.T @ u_in)
            self_term = sigma[i, i] * p_diag + (1.0 - sigma[i, i]) * q_diag
            logits += (1.0 - 2.0 * nu[i]) * self_term
            logits -= logits.max()
            row = np.exp(logits)
            row /= row.sum()
            change = np.abs(row - nu[i]).max()
            if change > max_change:
                max_change = change
            nu[i] = row
        if max_change < tol:
            converged = True
            break
    return nu, converged


def edge_probability(cum_counts, rho_edge, exponent):
    """Posterior probability that an edge exists.

    An observed event settles the question; otherwise the prior edge
    probability is discounted by the evidence of silence over the whole
    stream so far (``exponent`` = expected events had the edge existed).
    """
    cum_counts = np.asarray(cum_counts, dtype=np.float64)
    decay = np.exp(-np.asarray(exponent, dtype=np.float64))
    denom = 1.0 - rho_edge + rho_edge * decay
    return np.where(cum_counts > 0, 1.0, rho_edge * decay / denom)


class SbmEngine:
    """Online VB for the unknown-adjacency variant.

    Each step first runs the CAVI cycles for the dynamic parameters
    (rates, memberships, proportions) weighted by the previous edge
    probabilities sigma, then refreshes sigma from the cumulative counts
    and running rate-mean sums, and finally updates the static SBM
    parameters (connection memberships and their priors) using the fresh
    sigma.  Static parameters are never tempered.
    """

    def __init__(self, config: ModelConfig, seed: int | None = None):
        self.config = validate(config)
        n, k, kc = config.n_nodes, config.n_groups, config.n_conn_groups
        rng = np.random.default_rng(seed)
        gamma0 = (np.asarray(config.gamma0, dtype=np.float64)
                  if config.gamma0 is not None else _draw_dirichlet_init(k, rng))
        xi0 = (np.asarray(config.xi0, dtype=np.float64)
               if config.xi0 is not None else _draw_dirichlet_init(kc, rng))
        alpha0 = np.broadcast_to(np.asarray(config.alpha0, dtype=np.float64), (k, k)).copy()
        beta0 = np.broadcast_to(np.asarray(config.beta0, dtype=np.float64), (k, k)).copy()
        eta0 = np.broadcast_to(np.asarray(config.eta0, dtype=np.float64), (kc, kc)).copy()
        zeta0 = np.broadcast_to(np.asarray(config.zeta0, dtype=np.float64), (kc, kc)).copy()
        sbm = SbmPosterior(sigma=np.full((n, n), 0.5),
                           nu=np.full((n, kc), 1.0 / kc),
                           eta=eta0, zeta=zeta0, xi=xi0)
        self.state = SbmState(RatePosterior(alpha0, beta0),
                              MembershipPosterior(np.full((n, k), 1.0 / k)),
                              MixturePosterior(gamma0), sbm,
                              cumulative_counts=np.zeros((n, n)),
                              cumulative_rate_means=alpha0 / beta0, step_index=0)

    def step(self, batch: EventBatch) -> SbmState:
        cfg = self.config
        st = self.state
        counts = np.asarray(batch.counts, dtype=np.float64)
        sigma_prev = st.sbm.sigma
        prev_rate, prev_gamma = st.rate, st.mixture.gamma
        prev_eta, prev_zeta, prev_xi = st.sbm.eta, st.sbm.zeta, st.sbm.xi
        tau, nu = st.membership.tau, st.sbm.nu
        rate, mixture = prev_rate, st.mixture
        eta, zeta, xi = prev_eta, prev_zeta, prev_xi
        fp_ok = True

        # Dynamic-parameter CAVI cycles, weighted by sigma^(r-1).
        for _ in range(cfg.n_cavi):
            rate = update_rates(prev_rate, counts, tau, sigma_prev,
                                cfg.delta_lambda, cfg.delta)
            eta = prev_eta + nu.T @ sigma_prev @ nu
            zeta = prev_zeta + nu.T @ (1.0 - sigma_prev) @ nu
            log_prior = cfg.delta_z * (digamma(mixture.gamma)
                                       - digamma(mixture.gamma.sum()))
            tau, ok, _ = membership_fixed_point(
                tau, counts, sigma_prev, log_prior, rate, cfg.delta,
                cfg.fp_max_iters, cfg.fp_tol)
            fp_ok = fp_ok and ok
            mixture = update_mixture(prev_gamma, tau, cfg.delta_pi, cfg.delta_z)

        # Edge-probability refresh from cumulative evidence.
        cum_counts = st.cumulative_counts + counts
        cum_means = st.cumulative_rate_means + rate.mean
        exponent = cfg.delta * (tau @ cum_means @ tau.T)
        rho_hat = eta / (eta + zeta)
        rho_edge = nu @ rho_hat @ nu.T
        sigma = edge_probability(cum_counts, rho_edge, exponent)

        # Static connection memberships, using the fresh sigma.
        log_prior_nu = digamma(xi) - digamma(xi.sum())
        nu, ok = _conn_fixed_point(nu, sigma, log_prior_nu, eta, zeta,
                                   cfg.fp_max_iters, cfg.fp_tol)
        fp_ok = fp_ok and ok
        xi = prev_xi + nu.sum(axis=0)

        sbm = SbmPosterior(sigma, nu, eta, zeta, xi)
        self.state = SbmState(rate, MembershipPosterior(tau), mixture, sbm,
                              cum_counts, cum_means, st.step_index + 1, fp_ok)
        self.state.check()
        return self.state


@dataclass
class GemState:
    posterior: GemPosterior
    step_index: int
    occupancy: np.ndarray | None = None
    fp_converged: bool = True

    @property
    def rate(self) -> RatePosterior:
        return self.posterior.rate

    @property
    def membership(self) -> MembershipPosterior:
        return MembershipPosterior(self.posterior.tau)

    def check(self) -> None:
        self.posterior.check()


def stick_log_prior(omega: np.ndarray, nu_stick: np.ndarray) -> np.ndarray:
    """Per-group stick-breaking log-prior expectations.

    Component k gets E[log u_k] + sum_{l<k} E[log(1 - u_l)] under the
    current beta stick posteriors.
    """
    e_log_u = digamma(omega) - digamma(omega + nu_stick)
    e_log_1mu = digamma(nu_stick) - digamma(omega + nu_stick)
    tail = np.concatenate([[0.0], np.cumsum(e_log_1mu[:-1])])
    return e_log_u + tail


class GemEngine:
    """Online VB for the unknown-group-count variant.

    Works at truncation level L with beta stick posteriors in place of
    the Dirichlet mixture.  Blocks whose soft occupancy falls below the
    epsilon threshold get a forgetting factor of 1 for the step, which
    stops their beta parameters decaying to zero while the block is empty.
    """

    def __init__(self, config: ModelConfig, adjacency: np.ndarray | None = None,
                 seed: int | None = None):
        self.config = validate(config)
        n, ell = config.n_nodes, config.truncation
        if adjacency is None:
            adjacency = np.ones((n, n))
        self.adjacency = np.asarray(adjacency, dtype=np.float64)
        alpha0 = np.broadcast_to(np.asarray(config.alpha0, dtype=np.float64),
                                 (ell, ell)).copy()
        beta0 = np.broadcast_to(np.asarray(config.beta0, dtype=np.float64),
                                (ell, ell)).copy()
        posterior = GemPosterior(
            omega=np.ones(ell),
            nu_stick=np.full(ell, config.gem_concentration),
            rate=RatePosterior(alpha0, beta0),
            tau=np.full((n, ell), 1.0 / ell),
            delta_lambda_matrix=np.full((ell, ell), config.delta_lambda),
            epsilon_occupancy=config.epsilon_occupancy)
        occupancy = posterior.tau.T @ self.adjacency @ posterior.tau
        self.state = GemState(posterior, 0, occupancy)

    def step(self, batch: EventBatch) -> GemState:
        cfg = self.config
        st = self.state
        counts = np.asarray(batch.counts, dtype=np.float64)
        post = st.posterior
        prev_rate = post.rate
        prev_omega, prev_nu = post.omega, post.nu_stick
        tau = post.tau
        rate, omega, nu_stick = prev_rate, prev_omega, prev_nu
        # Occupancy gate fixed for the whole step, from last step's tau.
        delta_mat = np.where(st.occupancy < cfg.epsilon_occupancy,
                             1.0, cfg.delta_lambda)
        fp_ok = True
        for _ in range(cfg.n_cavi):
            log_prior = cfg.delta_z * stick_log_prior(omega, nu_stick)
            tau, ok, _ = membership_fixed_point(
                tau, counts, self.adjacency, log_prior, rate, cfg.delta,
                cfg.fp_max_iters, cfg.fp_tol)
            fp_ok = fp_ok and ok
            group_mass = tau.sum(axis=0)
            # tail_mass[k] = mass assigned to groups strictly after k
            tail_mass = group_mass.sum() - np.cumsum(group_mass)
            omega = cfg.delta_u * (prev_omega - 1.0) + cfg.delta_z * group_mass + 1.0
            nu_stick = cfg.delta_u * (prev_nu - 1.0) + cfg.delta_z * tail_mass + 1.0
            rate = update_rates(prev_rate, counts, tau, self.adjacency,
                                delta_mat, cfg.delta)
        occupancy = tau.T @ self.adjacency @ tau
        posterior = GemPosterior(omega, nu_stick, rate, tau, delta_mat,
                                 cfg.epsilon_occupancy)
        self.state = GemState(posterior, st.step_index + 1, occupancy, fp_ok)
        self.state.check()
        return self.state

    def occupied_groups(self) -> np.ndarray:
        """Indices of groups whose diagonal-block occupancy clears epsilon."""
        occ = np.diag(self.state.occupancy)
        return np.nonzero(occ >= self.config.epsilon_occupancy)[0]


def align_blocks(reference_mean: np.ndarray, candidate_mean: np.ndarray) -> np.ndarray:
    """Greedy group relabelling for offline evaluation only.

    Matches candidate groups to reference groups by closeness of the
    diagonal posterior rate means; returns the permutation to apply to
    the candidate labels.
    """
    k = reference_mean.shape[0]
    ref = np.diag(reference_mean)
    cand = np.diag(candidate_mean)
    perm = np.full(k, -1)
    taken = set()
    for idx in np.argsort(-ref):
        best, best_d = None, np.inf
        for j in range(k):
            if j in taken:
                continue
            d = abs(ref[idx] - cand[j])
            if d < best_d:
                best, best_d = j, d
        perm[idx] = best
        taken.add(best)
    return perm

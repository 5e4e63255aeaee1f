"""Probability terms of the preference posterior.

Choices follow a Bradley-Terry model on comprehensive values. Response times
and per-criterion attention durations follow exponential, Gamma, or Poisson
duration models whose parameters are log-linear in the (marginal) value
difference of the compared pair; both duration channels share one regression
coefficient block. Priors: Dirichlet on the simplex parameter, hierarchical
Gaussian / inverse-Wishart on the regression coefficients.

The joint unnormalized log posterior and its analytic gradient in the
unconstrained parameterization live in :mod:`prefbayes.kernel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, multigammaln

from .domain import ATTENTION_FLOOR_S, Dataset, Problem
from .valuefn import (
    PiecewiseConfig,
    characteristic_matrix,
    from_unconstrained,
    to_unconstrained,
)

PC_ONLY = "pc_only"
PC_RT = "pc_rt"
PC_ATT = "pc_att"
PC_RT_ATT = "pc_rt_att"

EXPONENTIAL = "exponential"
GAMMA = "gamma"
POISSON = "poisson"

_FAMILY_CODE = {EXPONENTIAL: 0, GAMMA: 1, POISSON: 2}

# CLI variant codes: channel set x duration family.
VARIANT_CODES = {
    "bor": (PC_ONLY, EXPONENTIAL),
    "i1": (PC_RT_ATT, GAMMA),
    "i2": (PC_RT_ATT, EXPONENTIAL),
    "i3": (PC_RT_ATT, POISSON),
    "ii1": (PC_RT, GAMMA),
    "ii2": (PC_RT, EXPONENTIAL),
    "ii3": (PC_RT, POISSON),
    "iii1": (PC_ATT, GAMMA),
    "iii2": (PC_ATT, EXPONENTIAL),
    "iii3": (PC_ATT, POISSON),
}


@dataclass(frozen=True)
class VariantSpec:
    channels: str = PC_RT_ATT
    family: str = EXPONENTIAL

    def __post_init__(self):
        if self.channels not in (PC_ONLY, PC_RT, PC_ATT, PC_RT_ATT):
            raise ValueError(f"unknown channel set {self.channels!r}")
        if self.family not in _FAMILY_CODE:
            raise ValueError(f"unknown duration family {self.family!r}")

    @property
    def k(self) -> int:
        """Regression-coefficient count; zero when no duration channel."""
        if self.channels == PC_ONLY:
            return 0
        return 4 if self.family == GAMMA else 2

    @property
    def use_rt(self) -> bool:
        return self.channels in (PC_RT, PC_RT_ATT)

    @property
    def use_att(self) -> bool:
        return self.channels in (PC_ATT, PC_RT_ATT)

    @classmethod
    def from_code(cls, code: str) -> "VariantSpec":
        try:
            channels, family = VARIANT_CODES[code.lower()]
        except KeyError:
            raise ValueError(f"unknown variant code {code!r}") from None
        return cls(channels=channels, family=family)

    def code(self) -> str:
        for code, (ch, fam) in VARIANT_CODES.items():
            if ch == self.channels and (ch == PC_ONLY or fam == self.family):
                return code
        raise AssertionError("unreachable")


@dataclass
class Hyperparams:
    tau: np.ndarray  # Dirichlet concentration, length gamma
    zeta: np.ndarray  # prior mean of mu, length k
    Gamma_cov: np.ndarray  # prior covariance of mu, k x k SPD
    epsilon: float  # inverse-Wishart degrees of freedom
    Psi: np.ndarray  # inverse-Wishart scale, k x k SPD

    @classmethod
    def defaults(cls, gamma_dim: int, k: int) -> "Hyperparams":
        k = max(k, 1)  # keep arrays well-formed even for the choice-only model
        return cls(
            tau=np.ones(gamma_dim),
            zeta=np.zeros(k),
            Gamma_cov=100.0 * np.eye(k),
            epsilon=float(k + 2),
            Psi=1e-2 * np.eye(k),
        )

    def validate(self, gamma_dim: int, k: int) -> None:
        if self.tau.shape != (gamma_dim,) or np.any(self.tau <= 0):
            raise ValueError("tau must be positive with one entry per u component")
        if k > 0:
            if self.zeta.shape != (k,):
                raise ValueError("zeta length mismatch")
            if self.epsilon <= k - 1:
                raise ValueError("epsilon must exceed k - 1")
            for name, mat in (("Gamma_cov", self.Gamma_cov), ("Psi", self.Psi)):
                if mat.shape != (k, k) or not np.allclose(mat, mat.T):
                    raise ValueError(f"{name} must be symmetric k x k")
                if np.any(np.linalg.eigvalsh(mat) <= 0):
                    raise ValueError(f"{name} must be positive definite")


@dataclass
class LatentState:
    u: np.ndarray
    c: np.ndarray | None = None
    mu: np.ndarray | None = None
    Sigma: np.ndarray | None = None

    def validate(self) -> None:
        if np.any(self.u < 0) or abs(self.u.sum() - 1.0) > 1e-10:
            raise ValueError("u must lie on the simplex")
        if self.Sigma is not None:
            if np.any(np.linalg.eigvalsh(self.Sigma) <= 0):
                raise ValueError("Sigma must be positive definite")


# ---------------------------------------------------------------------------
# Individual probability terms


def bt_log_prob(u: np.ndarray, v_winner: np.ndarray, v_loser: np.ndarray) -> float:
    """Log probability that the winner is chosen over the loser."""
    s = float(np.dot(u, v_winner - v_loser))
    return -np.logaddexp(0.0, -s)


def duration_log_prob(family: str, c: np.ndarray, delta: float, t: float) -> float:
    """Log density (or log pmf of the rounded-up value) of one duration.

    delta is the absolute (marginal) value difference of the compared pair;
    the duration model's parameters are exp of a linear function of delta.
    """
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise ValueError("regression coefficients must be finite")
    if t <= 0:
        raise ValueError("duration must be positive")
    if family == EXPONENTIAL:
        eta = c[0] * delta + c[1]
        return float(eta - math.exp(eta) * t)
    if family == GAMMA:
        # Shape-scale form with mean alpha * beta.
        eta_a = c[0] * delta + c[1]
        eta_b = c[2] * delta + c[3]
        alpha = math.exp(eta_a)
        return float(
            (alpha - 1.0) * math.log(t)
            - t * math.exp(-eta_b)
            - alpha * eta_b
            - gammaln(alpha)
        )
    if family == POISSON:
        n = math.ceil(t)
        eta = c[0] * delta + c[1]
        return float(n * eta - math.exp(eta) - gammaln(n + 1))
    raise ValueError(f"unknown duration family {family!r}")


def dirichlet_log_prob(u: np.ndarray, tau: np.ndarray) -> float:
    log_b = float(np.sum(gammaln(tau)) - gammaln(np.sum(tau)))
    return float(np.sum((tau - 1.0) * np.log(u))) - log_b


def mvn_log_prob(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    k = x.size
    q = x - mean
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise ValueError("covariance must be positive definite")
    return float(
        -0.5 * k * math.log(2.0 * math.pi)
        - 0.5 * logdet
        - 0.5 * q @ np.linalg.solve(cov, q)
    )


def invwishart_log_prob(Sigma: np.ndarray, epsilon: float, Psi: np.ndarray) -> float:
    k = Sigma.shape[0]
    sign_p, logdet_psi = np.linalg.slogdet(Psi)
    sign_s, logdet_sig = np.linalg.slogdet(Sigma)
    if sign_p <= 0 or sign_s <= 0:
        raise ValueError("scale matrix and Sigma must be positive definite")
    return float(
        0.5 * epsilon * logdet_psi
        - 0.5 * epsilon * k * math.log(2.0)
        - multigammaln(0.5 * epsilon, k)
        - 0.5 * (epsilon + k + 1) * logdet_sig
        - 0.5 * np.trace(Psi @ np.linalg.inv(Sigma))
    )


def prior_log_prob(state: LatentState, theta: Hyperparams, spec: VariantSpec) -> float:
    logp = dirichlet_log_prob(state.u, theta.tau)
    if spec.channels == PC_ONLY:
        return logp
    logp += mvn_log_prob(state.mu, theta.zeta, theta.Gamma_cov)
    logp += invwishart_log_prob(state.Sigma, theta.epsilon, theta.Psi)
    logp += mvn_log_prob(state.c, state.mu, state.Sigma)
    return logp


def log_posterior(
    state: LatentState,
    dataset: Dataset,
    problem: Problem,
    config: PiecewiseConfig,
    spec: VariantSpec,
    theta: Hyperparams,
) -> float:
    """Unnormalized log posterior: prior plus all active likelihood channels.

    Attention entries below the missing-data floor contribute no term. This
    is the readable term-by-term path; the sampler uses the fused kernel.
    """
    V = characteristic_matrix(problem, config)
    blocks = config.block_slices(problem)
    crit_ids = [c.id for c in problem.criteria]
    logp = prior_log_prob(state, theta, spec)
    for rec in dataset.records:
        a, b = rec.pair
        winner = rec.choice
        loser = b if winner == a else a
        v_w = V[problem.alt_index(winner)]
        v_l = V[problem.alt_index(loser)]
        logp += bt_log_prob(state.u, v_w, v_l)
        if spec.use_rt:
            delta = abs(float(np.dot(state.u, v_w - v_l)))
            logp += duration_log_prob(spec.family, state.c, delta, rec.response_time_s)
        if spec.use_att:
            for blk, cid in zip(blocks, crit_ids):
                t = rec.attention_s.get(cid, 0.0)
                if t < ATTENTION_FLOOR_S:
                    continue
                delta_m = abs(float(np.dot(state.u[blk], (v_w - v_l)[blk])))
                logp += duration_log_prob(spec.family, state.c, delta_m, t)
    return logp


# ---------------------------------------------------------------------------
# Fused kernel data and unconstrained parameterization


@dataclass
class KernelData:
    """Precomputed arrays consumed by the log-posterior kernels."""

    D: np.ndarray  # (L, gamma) winner-minus-loser characteristic vectors
    R: np.ndarray  # (L,) response times
    T: np.ndarray  # (L, M) attention durations (0 where missing)
    att_mask: np.ndarray  # (L, M) float 0/1, observed attention entries
    block_start: np.ndarray  # (M + 1,) int64 block boundaries
    family: int
    use_rt: bool
    use_att: bool
    k: int
    gamma_dim: int
    tau: np.ndarray
    log_b_tau: float
    zeta: np.ndarray
    Gamma_inv: np.ndarray
    logdet_Gamma: float
    epsilon: float
    Psi: np.ndarray
    iw_const: float
    ceil_R: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lgamma_ceil_R: np.ndarray = field(default_factory=lambda: np.zeros(0))
    log_R: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ceil_T: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    lgamma_ceil_T: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    log_T: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))


def build_kernel_data(
    dataset: Dataset,
    problem: Problem,
    config: PiecewiseConfig,
    spec: VariantSpec,
    theta: Hyperparams | None = None,
) -> KernelData:
    V = characteristic_matrix(problem, config)
    gamma_dim = V.shape[1]
    k = spec.k
    if theta is None:
        theta = Hyperparams.defaults(gamma_dim, k)
    theta.validate(gamma_dim, k)

    L = len(dataset.records)
    M = problem.n_criteria
    crit_ids = [c.id for c in problem.criteria]
    D = np.zeros((L, gamma_dim))
    R = np.zeros(L)
    T = np.zeros((L, M))
    att_mask = np.zeros((L, M))
    for l, rec in enumerate(dataset.records):
        a, b = rec.pair
        winner = rec.choice
        loser = b if winner == a else a
        D[l] = V[problem.alt_index(winner)] - V[problem.alt_index(loser)]
        R[l] = rec.response_time_s
        for m, cid in enumerate(crit_ids):
            t = rec.attention_s.get(cid, 0.0)
            if t >= ATTENTION_FLOOR_S:
                T[l, m] = t
                att_mask[l, m] = 1.0

    blocks = config.block_slices(problem)
    block_start = np.array([b.start for b in blocks] + [gamma_dim], dtype=np.int64)

    log_b_tau = float(np.sum(gammaln(theta.tau)) - gammaln(np.sum(theta.tau)))
    if k > 0:
        sign, logdet_Gamma = np.linalg.slogdet(theta.Gamma_cov)
        Gamma_inv = np.linalg.inv(theta.Gamma_cov)
        _, logdet_psi = np.linalg.slogdet(theta.Psi)
        iw_const = float(
            0.5 * theta.epsilon * logdet_psi
            - 0.5 * theta.epsilon * k * math.log(2.0)
            - multigammaln(0.5 * theta.epsilon, k)
        )
    else:
        Gamma_inv = np.zeros((0, 0))
        logdet_Gamma = 0.0
        iw_const = 0.0

    with np.errstate(divide="ignore"):
        log_R = np.where(R > 0, np.log(np.maximum(R, 1e-300)), 0.0)
        log_T = np.where(T > 0, np.log(np.maximum(T, 1e-300)), 0.0)
    ceil_R = np.ceil(R)
    ceil_T = np.ceil(T)
    return KernelData(
        D=D,
        R=R,
        T=T,
        att_mask=att_mask,
        block_start=block_start,
        family=_FAMILY_CODE[spec.family],
        use_rt=spec.use_rt,
        use_att=spec.use_att,
        k=k,
        gamma_dim=gamma_dim,
        tau=theta.tau.astype(float),
        log_b_tau=log_b_tau,
        zeta=theta.zeta.astype(float)[:k],
        Gamma_inv=np.ascontiguousarray(Gamma_inv[:k, :k]),
        logdet_Gamma=float(logdet_Gamma) if k else 0.0,
        epsilon=float(theta.epsilon),
        Psi=np.ascontiguousarray(theta.Psi[:k, :k].astype(float)),
        iw_const=iw_const,
        ceil_R=ceil_R,
        lgamma_ceil_R=gammaln(ceil_R + 1.0),
        log_R=log_R,
        ceil_T=ceil_T,
        lgamma_ceil_T=gammaln(ceil_T + 1.0),
        log_T=log_T,
    )


def unconstrained_dim(gamma_dim: int, k: int) -> int:
    return gamma_dim - 1 + (2 * k + k * (k + 1) // 2 if k > 0 else 0)


def pack_state(state: LatentState, k: int) -> np.ndarray:
    """Map a constrained latent state to the unconstrained sampling vector.

    The regression block is stored non-centered: the vector carries
    e = L^-1 (c - mu) rather than c itself, with Sigma = L L^T.
    """
    parts = [to_unconstrained(state.u)]
    if k > 0:
        L = np.linalg.cholesky(state.Sigma)
        c = np.asarray(state.c, dtype=float)
        mu = np.asarray(state.mu, dtype=float)
        from scipy.linalg import solve_triangular

        parts.append(solve_triangular(L, c - mu, lower=True))
        parts.append(mu)
        ell = []
        for i in range(k):
            for j in range(i + 1):
                ell.append(math.log(L[i, i]) if i == j else L[i, j])
        parts.append(np.array(ell))
    return np.concatenate(parts)


def unpack_state(x: np.ndarray, gamma_dim: int, k: int) -> LatentState:
    z = x[: gamma_dim - 1]
    u, _ = from_unconstrained(z)
    if k == 0:
        return LatentState(u=u)
    off = gamma_dim - 1
    e = np.array(x[off : off + k])
    mu = np.array(x[off + k : off + 2 * k])
    ell = x[off + 2 * k :]
    L = np.zeros((k, k))
    idx = 0
    for i in range(k):
        for j in range(i + 1):
            L[i, j] = math.exp(ell[idx]) if i == j else ell[idx]
            idx += 1
    return LatentState(u=u, c=mu + L @ e, mu=mu, Sigma=L @ L.T)


class PosteriorKernel:
    """Fused unnormalized log posterior and gradient over the unconstrained
    state, backed by the compiled extension when available."""

    def __init__(
        self,
        dataset: Dataset,
        problem: Problem,
        config: PiecewiseConfig,
        spec: VariantSpec,
        theta: Hyperparams | None = None,
        backend: str | None = None,
    ):
        self.spec = spec
        self.data = build_kernel_data(dataset, problem, config, spec, theta)
        self.gamma_dim = self.data.gamma_dim
        self.k = self.data.k
        self.dim = unconstrained_dim(self.gamma_dim, self.k)
        from . import kernel as _kernel

        self._impl = _kernel.make_impl(self.data, backend)
        self.backend = _kernel.active_backend(backend)

    def logp_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        return self._impl(np.ascontiguousarray(x, dtype=float))

    def logp(self, x: np.ndarray) -> float:
        return self.logp_and_grad(x)[0]

    def unpack(self, x: np.ndarray) -> LatentState:
        return unpack_state(x, self.gamma_dim, self.k)

    def pack(self, state: LatentState) -> np.ndarray:
        return pack_state(state, self.k)

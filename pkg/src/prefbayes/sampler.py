"""Hamiltonian Monte Carlo over the unconstrained latent state.

Fixed-length leapfrog trajectories with a Metropolis correction; step size
adapted by dual averaging during warmup, diagonal mass matrix estimated
from doubling windows of warmup draws (the final, dominant window covers
the later part of warmup). Warmup draws are discarded; the retained draws
are returned in constrained space. Everything is deterministic given
(config, seed).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import PosteriorKernel

DIVERGENCE_THRESHOLD = 1000.0


class DiagnosticError(RuntimeError):
    """Sampling produced unusable output (persistent divergences)."""


@dataclass
class SamplerConfig:
    draws: int = 10_000  # retained draws per chain
    warmup: int = 1_000  # discarded adaptation draws
    chains: int = 3
    leapfrog_steps: int = 32
    step_size: float = 0.1  # initial; adapted during warmup
    target_accept: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1 or self.warmup < 1 or self.chains < 1:
            raise ValueError("draws, warmup, and chains must be positive")


@dataclass
class SampleSet:
    """Post-burn-in posterior draws in constrained space, per chain."""

    u: np.ndarray  # (chains, draws, gamma)
    c: np.ndarray | None  # (chains, draws, k)
    mu: np.ndarray | None
    Sigma: np.ndarray | None  # (chains, draws, k, k)
    accept_rates: list[float]
    step_sizes: list[float]
    divergences: list[int]
    config: SamplerConfig
    gamma_dim: int
    k: int

    @property
    def n_chains(self) -> int:
        return self.u.shape[0]

    def pooled_u(self) -> np.ndarray:
        return self.u.reshape(-1, self.u.shape[-1])


def leapfrog(position, momentum, step_size, n_steps, grad_fn, inv_mass=None):
    """Leapfrog integration of Hamiltonian dynamics.

    grad_fn returns the gradient of the log density (not of the potential).
    Returns (position, momentum, divergent).
    """
    q = np.array(position, dtype=float)
    p = np.array(momentum, dtype=float)
    if n_steps == 0:
        return q, p, False
    if inv_mass is None:
        inv_mass = np.ones_like(q)
    g = grad_fn(q)
    if not np.all(np.isfinite(g)):
        return q, p, True
    p = p + 0.5 * step_size * g
    for step in range(n_steps):
        q = q + step_size * p * inv_mass
        g = grad_fn(q)
        if not np.all(np.isfinite(g)):
            return q, p, True
        p = p + (step_size if step < n_steps - 1 else 0.5 * step_size) * g
    return q, p, False


def _kinetic(p: np.ndarray, inv_mass: np.ndarray) -> float:
    # Overflow to inf is fine: the transition is then treated as divergent.
    with np.errstate(over="ignore"):
        return 0.5 * float(np.sum(p * p * inv_mass))


@dataclass
class _DualAveraging:
    """Nesterov dual averaging of the log step size (Hoffman-Gelman schedule)."""

    mu: float
    target: float
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    m: int = 0
    h_bar: float = 0.0
    log_eps_bar: float = 0.0

    def update(self, accept_prob: float) -> float:
        self.m += 1
        eta = 1.0 / (self.m + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob)
        log_eps = self.mu - math.sqrt(self.m) / self.gamma * self.h_bar
        weight = self.m ** (-self.kappa)
        self.log_eps_bar = weight * log_eps + (1.0 - weight) * self.log_eps_bar
        return math.exp(log_eps)

    def frozen(self) -> float:
        return math.exp(self.log_eps_bar)


def _mass_windows(warmup: int) -> list[tuple[int, int]]:
    """Adaptation plan for the diagonal mass matrix.

    Step-size-only head (15% of warmup), then doubling estimation windows,
    then a step-size-only tail (15%) under the final metric. The head keeps
    the initialization transient out of every estimation window; the
    doubling windows let late (well-mixed) draws dominate the final
    estimate.
    """
    if warmup < 40:
        return []
    head = int(0.15 * warmup)
    tail_start = warmup - int(0.15 * warmup)
    windows = []
    width = max(1, int(0.1 * warmup))
    pos = head
    while pos < tail_start:
        end = min(pos + width, tail_start)
        if tail_start - end < 2 * width:
            end = tail_start
        windows.append((pos, end))
        pos = end
        width *= 2
    return windows


def run_chain(
    logp_and_grad,
    dim: int,
    config: SamplerConfig,
    chain_seed,
    init: np.ndarray | None = None,
) -> dict:
    """One HMC chain; returns unconstrained draws and adaptation metadata.

    Raises DiagnosticError when more than 10% of post-warmup transitions
    diverge.
    """
    rng = np.random.default_rng(chain_seed)
    x = np.zeros(dim) if init is None else np.array(init, dtype=float)

    cache = {}

    def logp(q):
        key = q.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = logp_and_grad(q)
        return cache[key]

    def grad_fn(q):
        return logp(q)[1]

    inv_mass = np.ones(dim)
    mass_sd = np.ones(dim)  # momentum scale = sqrt(mass) = 1/sqrt(inv_mass)
    eps = config.step_size
    da = _DualAveraging(mu=math.log(10.0 * eps), target=config.target_accept)
    warm_draws = np.empty((config.warmup, dim))
    draws = np.empty((config.draws, dim))
    n_accept = 0
    n_divergent = 0
    windows = {end: start for start, end in _mass_windows(config.warmup)}

    total = config.warmup + config.draws
    for it in range(total):
        warming = it < config.warmup
        lp0, _ = logp(x)
        p0 = rng.normal(size=dim) * mass_sd
        h0 = -lp0 + _kinetic(p0, inv_mass)
        q1, p1, divergent = leapfrog(
            x, p0, eps, config.leapfrog_steps, grad_fn, inv_mass
        )
        if divergent:
            accept_prob = 0.0
        else:
            lp1, _ = logp(q1)
            h1 = -lp1 + _kinetic(p1, inv_mass)
            delta_h = h1 - h0
            if not math.isfinite(delta_h) or delta_h > DIVERGENCE_THRESHOLD:
                divergent = True
                accept_prob = 0.0
            else:
                accept_prob = 1.0 if delta_h <= 0 else math.exp(-delta_h)
        if accept_prob > 0 and rng.random() < accept_prob:
            x = q1
            if not warming:
                n_accept += 1
        if warming:
            eps = da.update(accept_prob)
            warm_draws[it] = x
            if it + 1 in windows:
                # Estimate the diagonal mass from this window's draws only,
                # shrunk slightly toward a small floor so a window with a
                # stuck coordinate cannot produce a degenerate metric. The
                # step size is then re-adapted under the new metric.
                lo = windows[it + 1]
                n_win = it + 1 - lo
                var = warm_draws[lo : it + 1].var(axis=0)
                if np.all(np.isfinite(var)):
                    var = (n_win / (n_win + 5.0)) * var + (5.0 / (n_win + 5.0)) * 1e-3
                    inv_mass = var
                    mass_sd = 1.0 / np.sqrt(var)
                eps = max(min(da.frozen(), 10.0), 1e-8)
                da = _DualAveraging(
                    mu=math.log(10.0 * eps), target=config.target_accept
                )
            if it == config.warmup - 1:
                eps = da.frozen()
        else:
            if divergent:
                n_divergent += 1
            draws[it - config.warmup] = x

    if n_divergent > 0.1 * config.draws:
        raise DiagnosticError(
            f"{n_divergent}/{config.draws} divergent transitions; "
            "decrease the step size or increase target_accept, and check that "
            "durations in the dataset are positive and finite"
        )
    return {
        "draws": draws,
        "accept_rate": n_accept / config.draws,
        "step_size": eps,
        "divergences": n_divergent,
    }


def _constrain_draws(xs: np.ndarray, gamma_dim: int, k: int):
    """Vectorized map of unconstrained draws to (u, c, mu, Sigma)."""
    n = xs.shape[0]
    z = xs[:, : gamma_dim - 1]
    w = 1.0 / (
        1.0 + np.exp(-(z - np.log(np.arange(gamma_dim - 1, 0, -1))[None, :]))
    )
    u = np.empty((n, gamma_dim))
    remaining = np.ones(n)
    for i in range(gamma_dim - 1):
        u[:, i] = remaining * w[:, i]
        remaining = remaining * (1.0 - w[:, i])
    u[:, gamma_dim - 1] = remaining
    if k == 0:
        return u, None, None, None
    off = gamma_dim - 1
    e = xs[:, off : off + k]
    mu = xs[:, off + k : off + 2 * k]
    ell = xs[:, off + 2 * k :]
    Lmat = np.zeros((n, k, k))
    idx = 0
    for i in range(k):
        for j in range(i + 1):
            Lmat[:, i, j] = np.exp(ell[:, idx]) if i == j else ell[:, idx]
            idx += 1
    Sigma = np.einsum("nij,nkj->nik", Lmat, Lmat)
    c = mu + np.einsum("nij,nj->ni", Lmat, e)
    return u, c, mu, Sigma


def run_sampler(
    kernel: PosteriorKernel,
    config: SamplerConfig,
    progress_callback=None,
) -> SampleSet:
    """Run all chains sequentially with per-chain jittered initial points.

    progress_callback, when given, is called with the number of completed
    chains after each chain finishes.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(config.chains)
    # Center of the initialization: uniform simplex point, zero regression
    # block, covariance at its prior mean; each chain jitters around it.
    center = np.zeros(kernel.dim)
    if kernel.k > 0:
        denom = max(kernel.data.epsilon - kernel.k - 1, 1.0)
        idx = kernel.gamma_dim - 1 + 2 * kernel.k
        for i in range(kernel.k):
            for j in range(i + 1):
                if i == j:
                    center[idx] = 0.5 * math.log(kernel.data.Psi[i, i] / denom)
                idx += 1
    u_all, c_all, mu_all, s_all = [], [], [], []
    accept_rates, step_sizes, divergences = [], [], []
    for chain, seed in enumerate(seeds):
        init_rng = np.random.default_rng(seed.spawn(1)[0])
        init = center + 0.1 * init_rng.normal(size=kernel.dim)
        result = run_chain(kernel.logp_and_grad, kernel.dim, config, seed, init)
        u, c, mu, Sigma = _constrain_draws(
            result["draws"], kernel.gamma_dim, kernel.k
        )
        u_all.append(u)
        accept_rates.append(result["accept_rate"])
        step_sizes.append(result["step_size"])
        divergences.append(result["divergences"])
        if kernel.k > 0:
            c_all.append(c)
            mu_all.append(mu)
            s_all.append(Sigma)
        if progress_callback is not None:
            progress_callback(chain + 1)
    return SampleSet(
        u=np.stack(u_all),
        c=np.stack(c_all) if c_all else None,
        mu=np.stack(mu_all) if mu_all else None,
        Sigma=np.stack(s_all) if s_all else None,
        accept_rates=accept_rates,
        step_sizes=step_sizes,
        divergences=divergences,
        config=config,
        gamma_dim=kernel.gamma_dim,
        k=kernel.k,
    )


# ---------------------------------------------------------------------------
# Convergence diagnostics


def rhat(chains: np.ndarray) -> float:
    """Potential scale reduction factor for one scalar across chains.

    chains: (n_chains, n) array. Zero total variance returns 1.0.
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2 or chains.shape[1] < 4:
        raise ValueError("need >= 2 chains of equal length >= 4")
    n = chains.shape[1]
    within = chains.var(axis=1, ddof=1).mean()
    means = chains.mean(axis=1)
    between_over_n = means.var(ddof=1)
    if within == 0 and between_over_n == 0:
        return 1.0
    if within == 0:
        return math.inf
    v = (n - 1) / n * within + between_over_n
    return float(math.sqrt(v / within))


def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalized autocovariance at lags 0..max_lag (FFT-based)."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n <= max_lag:
        raise ValueError("series must be longer than max_lag")
    x = x - x.mean()
    var = np.dot(x, x) / n
    if var == 0:
        out = np.zeros(max_lag + 1)
        out[0] = 1.0
        return out
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1] / n
    return acov / acov[0]


def ess(series: np.ndarray) -> float:
    """Effective sample size by Geyer's initial positive sequence."""
    x = np.asarray(series, dtype=float)
    n = x.size
    rho = autocorrelation(x, min(n - 1, 2 * int(math.sqrt(n)) + 200))
    tau = -1.0
    m = 0
    while 2 * m + 1 < rho.size:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
        m += 1
    tau = max(tau, 1.0)
    return n / tau


def diagnostics(samples: SampleSet, acf_lag: int = 50) -> dict:
    """Per-coordinate R-hat and ESS for u (and c when present), plus
    acceptance and divergence summaries."""
    out = {
        "accept_rate": samples.accept_rates,
        "step_size": samples.step_sizes,
        "divergences": samples.divergences,
    }
    for name, arr in (("u", samples.u), ("c", samples.c)):
        if arr is None:
            continue
        n_coord = arr.shape[2]
        out[f"rhat_{name}"] = [rhat(arr[:, :, i]) for i in range(n_coord)]
        out[f"ess_{name}"] = [
            float(sum(ess(arr[ch, :, i]) for ch in range(arr.shape[0])))
            for i in range(n_coord)
        ]
        out[f"acf{acf_lag}_{name}"] = [
            [
                float(autocorrelation(arr[ch, :, i], acf_lag)[acf_lag])
                for ch in range(arr.shape[0])
            ]
            for i in range(n_coord)
        ]
    return out


def save_draws_csv(samples: SampleSet, path: str) -> None:
    """Posterior dump: chain, iter, u entries, regression block, and the
    row-major upper triangle of Sigma."""
    gd, k = samples.gamma_dim, samples.k
    header = ["chain", "iter"]
    header += [f"u_{i + 1}" for i in range(gd)]
    header += [f"c_{i + 1}" for i in range(k)]
    header += [f"mu_{i + 1}" for i in range(k)]
    header += [f"Sigma_{i + 1}_{j + 1}" for i in range(k) for j in range(i, k)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for ch in range(samples.n_chains):
            for it in range(samples.u.shape[1]):
                row = [ch, it]
                row += [repr(float(v)) for v in samples.u[ch, it]]
                if k > 0:
                    row += [repr(float(v)) for v in samples.c[ch, it]]
                    row += [repr(float(v)) for v in samples.mu[ch, it]]
                    row += [
                        repr(float(samples.Sigma[ch, it, i, j]))
                        for i in range(k)
                        for j in range(i, k)
                    ]
                writer.writerow(row)


def load_draws_csv(path: str) -> SampleSet:
    """Inverse of :func:`save_draws_csv` (diagnostic tooling)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader]
    gd = sum(1 for h in header if h.startswith("u_"))
    k = sum(1 for h in header if h.startswith("c_"))
    chains = sorted({int(r[0]) for r in rows})
    per_chain = {ch: [r for r in rows if int(r[0]) == ch] for ch in chains}
    n = min(len(v) for v in per_chain.values())
    u = np.zeros((len(chains), n, gd))
    c = np.zeros((len(chains), n, k)) if k else None
    mu = np.zeros((len(chains), n, k)) if k else None
    Sigma = np.zeros((len(chains), n, k, k)) if k else None
    for ci, ch in enumerate(chains):
        for it, r in enumerate(per_chain[ch][:n]):
            vals = [float(v) for v in r[2:]]
            u[ci, it] = vals[:gd]
            if k:
                c[ci, it] = vals[gd : gd + k]
                mu[ci, it] = vals[gd + k : gd + 2 * k]
                tri = vals[gd + 2 * k :]
                idx = 0
                for i in range(k):
                    for j in range(i, k):
                        Sigma[ci, it, i, j] = Sigma[ci, it, j, i] = tri[idx]
                        idx += 1
    cfg = SamplerConfig(draws=n, warmup=1, chains=len(chains))
    return SampleSet(
        u=u,
        c=c,
        mu=mu,
        Sigma=Sigma,
        accept_rates=[],
        step_sizes=[],
        divergences=[],
        config=cfg,
        gamma_dim=gd,
        k=k,
    )

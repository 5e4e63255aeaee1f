"""Synthetic decision makers and the datasets they generate.

A synthetic decision maker is a draw from the model's own prior: a simplex
parameter u, and (when duration channels are in play) regression
coefficients c drawn from the hierarchical Gaussian / inverse-Wishart
layer. Datasets are then generated forward: winners from the Bradley-Terry
choice probabilities, response times from the duration family evaluated at
the pair's absolute value difference, and per-criterion attention durations
at the per-criterion value differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import invwishart

from .domain import Dataset, PreferenceRecord, Problem, candidate_pairs
from .likelihood import EXPONENTIAL, GAMMA, POISSON, Hyperparams, VariantSpec
from .valuefn import PiecewiseConfig, characteristic_matrix


@dataclass
class SyntheticDM:
    u_true: np.ndarray
    c_true: np.ndarray | None
    mu_true: np.ndarray | None
    Sigma_true: np.ndarray | None
    family: str
    seed: int

    def to_json(self) -> dict:
        return {
            "u_true": self.u_true.tolist(),
            "c_true": None if self.c_true is None else self.c_true.tolist(),
            "mu_true": None if self.mu_true is None else self.mu_true.tolist(),
            "Sigma_true": None if self.Sigma_true is None else self.Sigma_true.tolist(),
            "family": self.family,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticDM":
        arr = lambda v: None if v is None else np.array(v, dtype=float)
        return cls(
            u_true=np.array(obj["u_true"], dtype=float),
            c_true=arr(obj["c_true"]),
            mu_true=arr(obj["mu_true"]),
            Sigma_true=arr(obj["Sigma_true"]),
            family=obj["family"],
            seed=int(obj["seed"]),
        )


def sample_dm(theta: Hyperparams, spec: VariantSpec, seed: int) -> SyntheticDM:
    """Draw one decision maker from the prior; deterministic per seed."""
    rng = np.random.default_rng(seed)
    u = rng.dirichlet(theta.tau)
    if spec.k == 0:
        return SyntheticDM(u, None, None, None, spec.family, seed)
    k = spec.k
    mu = rng.multivariate_normal(theta.zeta[:k], theta.Gamma_cov[:k, :k])
    Sigma = invwishart.rvs(
        df=theta.epsilon, scale=theta.Psi[:k, :k], random_state=rng
    )
    Sigma = np.atleast_2d(Sigma)
    c = rng.multivariate_normal(mu, Sigma)
    return SyntheticDM(u, c, mu, Sigma, spec.family, seed)


def sample_pairs(problem: Problem, n_pairs: int, seed) -> list[tuple[str, str]]:
    """Seeded uniform sample without replacement from the non-dominated pool."""
    pool = candidate_pairs(problem)
    if n_pairs > len(pool):
        raise ValueError(
            f"requested {n_pairs} pairs but only {len(pool)} non-dominated pairs exist"
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pool), size=n_pairs, replace=False)
    return [pool[i] for i in idx]


def _truncated_poisson(rng: np.random.Generator, lam: float) -> int:
    """Zero-truncated Poisson count by CDF inversion."""
    p0 = math.exp(-lam)
    target = p0 + rng.random() * (1.0 - p0)
    n, pmf, cum = 0, p0, p0
    while cum < target and n < 10_000_000:
        n += 1
        pmf *= lam / n
        cum += pmf
    return max(n, 1)


def draw_duration(rng: np.random.Generator, family: str, c: np.ndarray, delta: float) -> float:
    """One duration draw at value difference delta.

    Exponential: rate exp(c1*delta + c2). Gamma: shape exp(c1*delta + c2),
    scale exp(c3*delta + c4). Poisson: a zero-truncated count n at rate
    exp(c1*delta + c2), reported as a continuous time in (n-1, n] so that
    its ceiling recovers n.
    """
    eta = c[0] * delta + c[1]
    if family == EXPONENTIAL:
        return float(rng.exponential(math.exp(-eta)))
    if family == GAMMA:
        alpha = math.exp(eta)
        beta = math.exp(c[2] * delta + c[3])
        return float(rng.gamma(alpha, beta))
    if family == POISSON:
        n = _truncated_poisson(rng, math.exp(eta))
        return float(n - rng.random())
    raise ValueError(f"unknown duration family {family!r}")


def simulate_dataset(
    dm: SyntheticDM,
    problem: Problem,
    config: PiecewiseConfig,
    pairs: list[tuple[str, str]],
    seed: int,
    lognormal_noise_sd: float = 0.0,
    choice_sharpness: float = 1.0,
) -> Dataset:
    """Generate one preference record per pair; deterministic per seed.

    choice_sharpness scales the value difference inside the Bradley-Terry
    choice probability. 1.0 samples winners exactly from the model; large
    values emulate the near-deterministic consistency of real respondents,
    whose choices are far less noisy than a Bradley-Terry sampler with
    value differences bounded by 1. Durations are unaffected.

    lognormal_noise_sd, when positive, multiplies every duration by
    exp(sd * standard normal) — a deliberate misspecification knob for
    robustness experiments, off by default.
    """
    if not pairs:
        raise ValueError("empty pair list")
    if dm.c_true is None:
        raise ValueError("decision maker has no regression block; cannot "
                         "generate durations")
    rng = np.random.default_rng(seed)
    V = characteristic_matrix(problem, config)
    blocks = config.block_slices(problem)
    crit_ids = [c.id for c in problem.criteria]
    records = []
    for a, b in pairs:
        va = V[problem.alt_index(a)]
        vb = V[problem.alt_index(b)]
        s = float(np.dot(dm.u_true, va - vb))
        p_a = 1.0 / (1.0 + math.exp(-min(max(choice_sharpness * s, -700), 700)))
        choice = a if rng.random() < p_a else b
        delta = abs(s)
        noise = lambda: (
            math.exp(lognormal_noise_sd * rng.standard_normal())
            if lognormal_noise_sd > 0
            else 1.0
        )
        rt = draw_duration(rng, dm.family, dm.c_true, delta) * noise()
        attention = {}
        for cid, blk in zip(crit_ids, blocks):
            delta_m = abs(float(np.dot(dm.u_true[blk], va[blk] - vb[blk])))
            attention[cid] = draw_duration(rng, dm.family, dm.c_true, delta_m) * noise()
        records.append(
            PreferenceRecord(
                pair=(a, b),
                choice=choice,
                response_time_s=rt,
                attention_s=attention,
            )
        )
    return Dataset(problem_ref="", records=records)


def save_manifest(dms: list[SyntheticDM], path: str) -> None:
    """Ground-truth manifest for recovery scoring."""
    with open(path, "w", encoding="utf-8") as fh:
        for dm in dms:
            fh.write(json.dumps(dm.to_json()) + "\n")


def load_manifest(path: str) -> list[SyntheticDM]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(SyntheticDM.from_json(json.loads(line)))
    return out

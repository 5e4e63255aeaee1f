"""Posterior analytics: pairwise winning indices, rank acceptability indices,
HPD intervals, criterion weight shares, held-out accuracy metrics, and fuzzy
C-means profiling.

All functions are pure: the same samples and inputs always produce the same
output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Dataset, PreferenceRecord, Problem
from .sampler import SampleSet
from .valuefn import PiecewiseConfig, characteristic_matrix


def comprehensive_values(samples: SampleSet, problem: Problem, config: PiecewiseConfig) -> np.ndarray:
    """(S, N) matrix of comprehensive values, pooled across chains."""
    V = characteristic_matrix(problem, config)
    return samples.pooled_u() @ V.T


def pwi_from_values(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise winning indices from a (draws, alternatives) value matrix.

    Returns (pwi, tie_share); exact value ties count toward neither
    direction, so pwi[a, b] + pwi[b, a] + tie_share[a, b] == 1 off-diagonal.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("need a non-empty (draws, alternatives) matrix")
    n = values.shape[1]
    pwi = np.zeros((n, n))
    ties = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            pwi[a, b] = np.mean(values[:, a] > values[:, b])
            ties[a, b] = np.mean(values[:, a] == values[:, b])
    return pwi, ties


def rai_from_values(values: np.ndarray) -> np.ndarray:
    """Rank acceptability indices: entry (a, r) is the fraction of draws in
    which alternative a attains rank r under descending comprehensive value.
    Ties are broken by alternative index."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("need a non-empty (draws, alternatives) matrix")
    s, n = values.shape
    order = np.argsort(-values, axis=1, kind="stable")  # alternative at each rank
    flat = (order * n + np.arange(n)[None, :]).ravel()
    counts = np.bincount(flat, minlength=n * n).reshape(n, n)
    return counts / s


def pwi(samples: SampleSet, problem: Problem, config: PiecewiseConfig) -> np.ndarray:
    return pwi_from_values(comprehensive_values(samples, problem, config))[0]


def rai(samples: SampleSet, problem: Problem, config: PiecewiseConfig) -> np.ndarray:
    return rai_from_values(comprehensive_values(samples, problem, config))


def hpd(series: np.ndarray, mass: float = 0.95) -> tuple[float, float]:
    """Shortest contiguous window of sorted samples holding ceil(mass*n)."""
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must lie in (0, 1)")
    x = np.sort(np.asarray(series, dtype=float))
    n = x.size
    if n < 20:
        raise ValueError("need at least 20 samples for an empirical HPD")
    m = math.ceil(mass * n)
    widths = x[m - 1 :] - x[: n - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


def _pair_pwi(pwi_matrix: np.ndarray, problem: Problem, record: PreferenceRecord) -> float:
    a, b = record.pair
    winner = record.choice
    loser = b if winner == a else a
    return float(pwi_matrix[problem.alt_index(winner), problem.alt_index(loser)])


def asp(test_records: list[PreferenceRecord], pwi_matrix: np.ndarray, problem: Problem) -> float:
    """Mean pairwise winning index of the observed winner over the loser."""
    if not test_records:
        raise ValueError("empty test set")
    return float(np.mean([_pair_pwi(pwi_matrix, problem, r) for r in test_records]))


def art(test_records: list[PreferenceRecord], pwi_matrix: np.ndarray, problem: Problem) -> float:
    """Fraction of test records whose winner's pairwise winning index > 0.5."""
    if not test_records:
        raise ValueError("empty test set")
    return float(
        np.mean([_pair_pwi(pwi_matrix, problem, r) > 0.5 for r in test_records])
    )


def weight_shares(posterior_mean_u: np.ndarray, problem: Problem, config: PiecewiseConfig) -> dict[str, float]:
    """Per-criterion maximal marginal value: the sum of that criterion's
    block of u. Shares sum to 1 when u does."""
    out = {}
    for crit, block in zip(problem.criteria, config.block_slices(problem)):
        out[crit.id] = float(np.sum(posterior_mean_u[block]))
    return out


def fcm(
    points,
    k: int,
    fuzzifier: float = 2.0,
    tol: float = 1e-6,
    max_iter: int = 1000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Fuzzy C-means: returns (centers (k, d), memberships (n, k)).

    Standard alternating updates; membership rows sum to 1 and the objective
    is non-increasing across iterations.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and pts.shape[1] > 1 and np.ndim(points) == 1:
        pts = pts.T
    n = pts.shape[0]
    if k < 1 or k > n:
        raise ValueError("need 1 <= k <= number of points")
    if fuzzifier <= 1.0:
        raise ValueError("fuzzifier must exceed 1")
    rng = np.random.default_rng(seed)
    membership = rng.dirichlet(np.ones(k), size=n)
    power = 2.0 / (fuzzifier - 1.0)
    centers = np.zeros((k, pts.shape[1]))
    for _ in range(max_iter):
        weights = membership**fuzzifier
        centers = (weights.T @ pts) / weights.sum(axis=0)[:, None]
        d2 = np.maximum(
            ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), 1e-300
        )
        inv = d2 ** (-power / 2.0)
        new_membership = inv / inv.sum(axis=1, keepdims=True)
        # Points coincident with a center get crisp membership there.
        hit = d2 < 1e-290
        rows = hit.any(axis=1)
        if np.any(rows):
            new_membership[rows] = hit[rows] / hit[rows].sum(axis=1, keepdims=True)
        shift = float(np.max(np.abs(new_membership - membership)))
        membership = new_membership
        if shift < tol:
            break
    return centers, membership


@dataclass
class ResultBundle:
    """Decision outputs of one fit."""

    alt_ids: list[str]
    criterion_ids: list[str]
    pwi: np.ndarray  # (N, N)
    tie_share: np.ndarray  # (N, N)
    rai: np.ndarray  # (N, N) alternative x rank
    posterior_mean_u: np.ndarray
    hpd_u: list[tuple[float, float]]
    weight_shares: dict[str, float]
    metrics: dict | None = None
    diagnostics: dict | None = None

    def to_json(self) -> dict:
        return {
            "alternatives": self.alt_ids,
            "criteria": self.criterion_ids,
            "pwi": [[round(v, 12) for v in row] for row in self.pwi.tolist()],
            "tie_share": [
                [round(v, 12) for v in row] for row in self.tie_share.tolist()
            ],
            "rai_percent": [
                [round(100.0 * v, 10) for v in row] for row in self.rai.tolist()
            ],
            "posterior_mean": [round(v, 12) for v in self.posterior_mean_u.tolist()],
            "hpd": [[round(lo, 12), round(hi, 12)] for lo, hi in self.hpd_u],
            "weight_shares": {k: round(v, 12) for k, v in self.weight_shares.items()},
            "metrics": self.metrics,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ResultBundle":
        rai_arr = np.array(payload["rai_percent"], dtype=float) / 100.0
        return cls(
            alt_ids=list(payload["alternatives"]),
            criterion_ids=list(payload["criteria"]),
            pwi=np.array(payload["pwi"], dtype=float),
            tie_share=np.array(payload["tie_share"], dtype=float),
            rai=rai_arr,
            posterior_mean_u=np.array(payload["posterior_mean"], dtype=float),
            hpd_u=[(float(lo), float(hi)) for lo, hi in payload["hpd"]],
            weight_shares={k: float(v) for k, v in payload["weight_shares"].items()},
            metrics=payload.get("metrics"),
            diagnostics=payload.get("diagnostics"),
        )


def build_result_bundle(
    samples: SampleSet,
    problem: Problem,
    config: PiecewiseConfig,
    test_records: list[PreferenceRecord] | None = None,
    diagnostics: dict | None = None,
    hpd_mass: float = 0.95,
) -> ResultBundle:
    values = comprehensive_values(samples, problem, config)
    pwi_matrix, ties = pwi_from_values(values)
    rai_matrix = rai_from_values(values)
    pooled = samples.pooled_u()
    mean_u = pooled.mean(axis=0)
    hpd_u = [hpd(pooled[:, i], hpd_mass) for i in range(pooled.shape[1])]
    metrics = None
    if test_records:
        metrics = {
            "asp": asp(test_records, pwi_matrix, problem),
            "art": art(test_records, pwi_matrix, problem),
        }
    return ResultBundle(
        alt_ids=[a.id for a in problem.alternatives],
        criterion_ids=[c.id for c in problem.criteria],
        pwi=pwi_matrix,
        tie_share=ties,
        rai=rai_matrix,
        posterior_mean_u=mean_u,
        hpd_u=hpd_u,
        weight_shares=weight_shares(mean_u, problem, config),
        metrics=metrics,
        diagnostics=diagnostics,
    )


def save_report(bundle: ResultBundle, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str) -> ResultBundle:
    with open(path, encoding="utf-8") as fh:
        return ResultBundle.from_json(json.load(fh))

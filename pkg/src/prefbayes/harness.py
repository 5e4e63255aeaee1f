"""Evaluation protocol: train/test splits, subinterval-count selection,
multi-variant ablation runs, and report aggregation.

Everything is deterministic given the master seed: per-repeat splits are
shared across variants so the ablation compares models on identical data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .analytics import art, asp, pwi_from_values
from .domain import Dataset, Problem
from .likelihood import PosteriorKernel, VariantSpec
from .sampler import DiagnosticError, SampleSet, SamplerConfig, rhat, run_sampler
from .valuefn import PiecewiseConfig, characteristic_matrix


@dataclass
class ExperimentPlan:
    variants: list[str]
    repeats: int = 20
    train_fraction: float = 0.8
    gamma_candidates: tuple[int, ...] = (1, 2, 3, 4)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.gamma_candidates:
            raise ValueError("need at least one subinterval-count candidate")


def split(dataset: Dataset, fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Disjoint train/test partition with |train| = round(fraction * L)."""
    records = dataset.records
    n = len(records)
    if n < 2:
        raise ValueError("need at least 2 records to split")
    n_train = round(fraction * n)
    if n_train == 0 or n_train == n:
        raise ValueError(f"fraction {fraction} leaves an empty side for {n} records")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    train_idx = sorted(perm[:n_train])
    test_idx = sorted(perm[n_train:])
    return (
        Dataset(dataset.problem_ref, [records[i] for i in train_idx]),
        Dataset(dataset.problem_ref, [records[i] for i in test_idx]),
    )


def fit(
    dataset: Dataset,
    problem: Problem,
    config: PiecewiseConfig,
    spec: VariantSpec,
    sampler_config: SamplerConfig,
    progress_callback=None,
) -> SampleSet:
    """One posterior fit.

    On a divergence failure the fit is retried with progressively more
    conservative settings (smaller step size, higher acceptance target,
    longer warmup) before the error propagates. The escalation is
    deterministic, so repeated runs still produce identical output.
    """
    kernel = PosteriorKernel(dataset, problem, config, spec)
    attempts = [
        sampler_config,
        replace(
            sampler_config,
            step_size=sampler_config.step_size / 10.0,
            target_accept=0.95,
            seed=sampler_config.seed + 15485863,
        ),
        replace(
            sampler_config,
            step_size=sampler_config.step_size / 30.0,
            target_accept=0.99,
            warmup=2 * sampler_config.warmup,
            seed=sampler_config.seed + 32452843,
        ),
    ]
    for cfg in attempts[:-1]:
        try:
            return run_sampler(kernel, cfg, progress_callback=progress_callback)
        except DiagnosticError:
            continue
    return run_sampler(kernel, attempts[-1], progress_callback=progress_callback)


def _max_rhat_u(samples: SampleSet) -> float:
    return max(rhat(samples.u[:, :, i]) for i in range(samples.u.shape[2]))


def _holdout_metrics(samples, problem, config, test_records):
    V = characteristic_matrix(problem, config)
    values = samples.pooled_u() @ V.T
    pwi_matrix, _ = pwi_from_values(values)
    return (
        asp(test_records, pwi_matrix, problem),
        art(test_records, pwi_matrix, problem),
    )


def select_gamma(
    train: Dataset,
    problem: Problem,
    candidates,
    spec: VariantSpec,
    sampler_config: SamplerConfig,
    seed,
) -> int:
    """Pick the subinterval count maximizing validation accuracy.

    One 75/25 split of the training data; ties go to the smaller count.
    """
    candidates = sorted(set(candidates))
    if len(candidates) == 1:
        return candidates[0]
    inner_train, validation = split(train, 0.75, seed)
    best_gamma, best_score = candidates[0], -1.0
    for i, gamma in enumerate(candidates):
        config = PiecewiseConfig.shared(problem, gamma)
        cfg = replace(sampler_config, seed=sampler_config.seed + 7919 * i)
        samples = fit(inner_train, problem, config, spec, cfg)
        score, _ = _holdout_metrics(samples, problem, config, validation.records)
        if score > best_score:
            best_gamma, best_score = gamma, score
    return best_gamma


def run_experiment(problem: Problem, datasets: list[Dataset], plan: ExperimentPlan) -> dict:
    """Full ablation: for each dataset x repeat, split once and score every
    variant on the shared split. A fit with max R-hat >= 1.1 is re-run once
    with a fresh seed, then flagged if still not converged."""
    cells = []
    for d_idx, dataset in enumerate(datasets):
        for rep in range(plan.repeats):
            cell_ss = np.random.SeedSequence(
                entropy=plan.master_seed, spawn_key=(d_idx, rep)
            )
            split_seed, gamma_seed, fit_seed = cell_ss.generate_state(3).tolist()
            train, test = split(dataset, plan.train_fraction, split_seed)
            for v_idx, code in enumerate(plan.variants):
                spec = VariantSpec.from_code(code)
                gamma = select_gamma(
                    train,
                    problem,
                    plan.gamma_candidates,
                    spec,
                    replace(plan.sampler, seed=gamma_seed + v_idx),
                    gamma_seed + v_idx,
                )
                config = PiecewiseConfig.shared(problem, gamma)
                cfg = replace(plan.sampler, seed=fit_seed + v_idx)
                samples = fit(train, problem, config, spec, cfg)
                max_rhat = _max_rhat_u(samples)
                reran = False
                if max_rhat >= 1.1:
                    reran = True
                    cfg = replace(plan.sampler, seed=fit_seed + v_idx + 104729)
                    samples = fit(train, problem, config, spec, cfg)
                    max_rhat = _max_rhat_u(samples)
                a, r = _holdout_metrics(samples, problem, config, test.records)
                cells.append(
                    {
                        "dataset": d_idx,
                        "repeat": rep,
                        "variant": code,
                        "gamma": gamma,
                        "asp": round(a, 12),
                        "art": round(r, 12),
                        "max_rhat_u": round(max_rhat, 8),
                        "converged": bool(max_rhat < 1.1),
                        "reran": reran,
                    }
                )
    summary = {}
    for code in plan.variants:
        rows = [c for c in cells if c["variant"] == code]
        asps = np.array([c["asp"] for c in rows])
        arts = np.array([c["art"] for c in rows])
        summary[code] = {
            "asp_mean": round(float(asps.mean()), 12),
            "asp_sd": round(float(asps.std(ddof=1)) if len(rows) > 1 else 0.0, 12),
            "art_mean": round(float(arts.mean()), 12),
            "art_sd": round(float(arts.std(ddof=1)) if len(rows) > 1 else 0.0, 12),
            "n_cells": len(rows),
            "n_flagged": sum(not c["converged"] for c in rows),
        }
    return {
        "plan": {
            "variants": list(plan.variants),
            "repeats": plan.repeats,
            "train_fraction": plan.train_fraction,
            "gamma_candidates": list(plan.gamma_candidates),
            "draws": plan.sampler.draws,
            "warmup": plan.sampler.warmup,
            "chains": plan.sampler.chains,
            "master_seed": plan.master_seed,
        },
        "cells": cells,
        "summary": summary,
    }


def render_report(report: dict) -> str:
    """Text table: one row per variant, mean(sd) of both metrics."""
    lines = [f"{'variant':<10}{'ASP':>18}{'ART':>18}{'flagged':>10}"]
    for code, row in report["summary"].items():
        lines.append(
            f"{code:<10}"
            f"{row['asp_mean']:.3f} ({row['asp_sd']:.3f})".rjust(18)
            + f"{row['art_mean']:.3f} ({row['art_sd']:.3f})".rjust(18)
            + f"{row['n_flagged']:>10}"
        )
    return "\n".join(lines)


def save_report_json(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_report_csv(report: dict, path: str) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["variant", "asp_mean", "asp_sd", "art_mean", "art_sd", "n_cells", "n_flagged"]
        )
        for code, row in report["summary"].items():
            writer.writerow(
                [
                    code,
                    row["asp_mean"],
                    row["asp_sd"],
                    row["art_mean"],
                    row["art_sd"],
                    row["n_cells"],
                    row["n_flagged"],
                ]
            )

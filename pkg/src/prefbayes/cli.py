"""Command-line interface.

Subcommands: simulate (synthetic decision makers and datasets), fit (one
dataset, one variant), evaluate (full experiment plan), diagnose
(convergence statistics from a posterior dump), report (render result
tables), serve (HTTP elicitation service). Exit code is non-zero on
validation or convergence errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .analytics import build_result_bundle, load_report, save_report
from .domain import (
    Dataset,
    load_bundled_problem,
    load_dataset,
    load_problem,
    save_dataset,
    validate_dataset,
)
from .harness import ExperimentPlan, fit as fit_model, run_experiment, render_report, save_report_csv, save_report_json
from .likelihood import Hyperparams, VariantSpec
from .sampler import (
    DiagnosticError,
    SamplerConfig,
    diagnostics,
    load_draws_csv,
    rhat,
    save_draws_csv,
)
from .simulator import sample_dm, sample_pairs, save_manifest, simulate_dataset
from .valuefn import PiecewiseConfig


class CliError(Exception):
    pass


def _load_problem(path: str | None):
    return load_problem(path) if path else load_bundled_problem()


def _add_common(p):
    p.add_argument("--problem", help="problem JSON file (default: bundled fixture)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file or directory")


def _add_sampler(p):
    p.add_argument("--samples", type=int, default=10_000, help="retained draws per chain")
    p.add_argument("--burnin", type=int, default=1_000, help="warmup draws per chain")
    p.add_argument("--chains", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefbayes")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic decision makers")
    _add_common(p)
    p.add_argument("--dms", type=int, default=1, help="number of decision makers")
    p.add_argument("--pairs", type=int, default=30, help="comparisons per decision maker")
    p.add_argument("--gamma", type=int, default=2, help="subintervals per criterion")
    p.add_argument("--variant", default="i2", help="duration family source variant")
    p.add_argument(
        "--sharpness",
        type=float,
        default=1.0,
        help="choice consistency multiplier (1.0 = exact model)",
    )

    p = sub.add_parser("fit", help="fit one dataset with one variant")
    _add_common(p)
    _add_sampler(p)
    p.add_argument("--data", required=True, help="preference log (JSON lines)")
    p.add_argument("--variant", default="i2")
    p.add_argument("--gamma", type=int, default=2)

    p = sub.add_parser("evaluate", help="run an experiment plan")
    _add_common(p)
    _add_sampler(p)
    p.add_argument("--data", required=True, nargs="+", help="one or more preference logs")
    p.add_argument("--variant", default="i2,bor", help="comma-separated variant codes")
    p.add_argument("--gamma", default="2", help="comma-separated candidate subinterval counts")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--train-fraction", type=float, default=0.8)

    p = sub.add_parser("diagnose", help="convergence statistics from a posterior dump")
    p.add_argument("--data", required=True, help="posterior CSV from a fit")
    p.add_argument("--out", help="output JSON (default: stdout)")

    p = sub.add_parser("report", help="render a report or result bundle as text")
    p.add_argument("--data", required=True, help="report JSON from evaluate or fit")

    p = sub.add_parser("serve", help="start the elicitation HTTP service")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--state-dir", default="./prefbayes-sessions")
    return parser


def _cmd_simulate(args) -> int:
    problem = _load_problem(args.problem)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    spec = VariantSpec.from_code(args.variant)
    if spec.k == 0:
        raise CliError("choice-only variants cannot generate durations; pick i1/i2/i3")
    config = PiecewiseConfig.shared(problem, args.gamma)
    theta = Hyperparams.defaults(config.total_dim(problem), spec.k)
    ss = np.random.SeedSequence(args.seed)
    dms = []
    for i in range(args.dms):
        dm_seed, pair_seed, data_seed = ss.spawn(1)[0].generate_state(3).tolist()
        dm = sample_dm(theta, spec, dm_seed)
        pairs = sample_pairs(problem, args.pairs, pair_seed)
        dataset = simulate_dataset(
            dm, problem, config, pairs, data_seed, choice_sharpness=args.sharpness
        )
        path = os.path.join(out_dir, f"dm_{i:03d}.jsonl")
        save_dataset(dataset, path)
        dms.append(dm)
        print(f"wrote {path} ({len(dataset.records)} records)")
    manifest = os.path.join(out_dir, "manifest.jsonl")
    save_manifest(dms, manifest)
    print(f"wrote {manifest}")
    return 0


def _cmd_fit(args) -> int:
    problem = _load_problem(args.problem)
    dataset = load_dataset(args.data)
    violations = validate_dataset(dataset, problem)
    if violations:
        for v in violations:
            print(f"invalid dataset: {v}", file=sys.stderr)
        return 2
    spec = VariantSpec.from_code(args.variant)
    config = PiecewiseConfig.shared(problem, args.gamma)
    cfg = SamplerConfig(
        draws=args.samples, warmup=args.burnin, chains=args.chains, seed=args.seed
    )
    samples = fit_model(dataset, problem, config, spec, cfg)
    diag = diagnostics(samples)
    max_rhat = max(diag["rhat_u"])
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    save_draws_csv(samples, os.path.join(out_dir, "posterior.csv"))
    with open(os.path.join(out_dir, "diagnostics.json"), "w", encoding="utf-8") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
        fh.write("\n")
    bundle = build_result_bundle(samples, problem, config, diagnostics=diag)
    save_report(bundle, os.path.join(out_dir, "result.json"))
    print(f"wrote posterior.csv, diagnostics.json, result.json to {out_dir}")
    if max_rhat >= 1.1:
        print(f"not converged: max R-hat {max_rhat:.3f} >= 1.1", file=sys.stderr)
        return 3
    return 0


def _cmd_evaluate(args) -> int:
    problem = _load_problem(args.problem)
    datasets = []
    for path in args.data:
        ds = load_dataset(path)
        violations = validate_dataset(ds, problem)
        if violations:
            for v in violations:
                print(f"invalid dataset {path}: {v}", file=sys.stderr)
            return 2
        datasets.append(ds)
    plan = ExperimentPlan(
        variants=[v.strip() for v in args.variant.split(",") if v.strip()],
        repeats=args.repeats,
        train_fraction=args.train_fraction,
        gamma_candidates=tuple(int(g) for g in args.gamma.split(",")),
        sampler=SamplerConfig(
            draws=args.samples, warmup=args.burnin, chains=args.chains, seed=args.seed
        ),
        master_seed=args.seed,
    )
    report = run_experiment(problem, datasets, plan)
    out = args.out or "report.json"
    save_report_json(report, out)
    save_report_csv(report, os.path.splitext(out)[0] + ".csv")
    print(render_report(report))
    print(f"wrote {out}")
    flagged = sum(r["n_flagged"] for r in report["summary"].values())
    if flagged:
        print(f"{flagged} cell(s) failed to converge", file=sys.stderr)
        return 3
    return 0


def _cmd_diagnose(args) -> int:
    samples = load_draws_csv(args.data)
    diag = diagnostics(samples)
    text = json.dumps(diag, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    max_rhat = max(diag["rhat_u"])
    if max_rhat >= 1.1:
        print(f"not converged: max R-hat {max_rhat:.3f} >= 1.1", file=sys.stderr)
        return 3
    return 0


def _cmd_report(args) -> int:
    with open(args.data, encoding="utf-8") as fh:
        payload = json.load(fh)
    if "summary" in payload:
        print(render_report(payload))
        return 0
    bundle = load_report(args.data)
    n = len(bundle.alt_ids)
    print("Rank acceptability indices (%):")
    header = "alt".ljust(8) + "".join(f"r{r + 1:>6}" for r in range(n))
    print(header)
    for i, aid in enumerate(bundle.alt_ids):
        print(aid.ljust(8) + "".join(f"{100 * v:7.1f}" for v in bundle.rai[i]))
    print("\nWeight shares:")
    for cid, share in bundle.weight_shares.items():
        print(f"  {cid}: {share:.3f}")
    if bundle.metrics:
        print(f"\nMetrics: {bundle.metrics}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    problem = _load_problem(args.problem)
    app = create_app(state_dir=args.state_dir, bundled_problem=problem)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "evaluate": _cmd_evaluate,
    "diagnose": _cmd_diagnose,
    "report": _cmd_report,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.seterr(over="ignore")
    try:
        return _COMMANDS[args.command](args)
    except (CliError, DiagnosticError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

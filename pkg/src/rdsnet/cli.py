"""Command-line interface.

Subcommands:

* ``simulate``    generate a population graph, run one synthetic study,
                  write the observables as a recruitment CSV plus the truth
* ``reconstruct`` estimate the hidden subgraph from a recruitment CSV
                  (posterior sampling or simulated-annealing MAP search)
* ``experiment``  replication grid from a JSON config file
* ``score``       compare an estimated edge list against the truth
* ``clean``       apply the standard repairs to a raw recruitment CSV
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    ExperimentConfig,
    export_results,
    run_experiment,
    write_edge_list,
    _write_json,
)
from .ingest import ingest_recruitment_csv, write_recruitment_csv
from .metrics import score as score_adjacency
from .sampler import (
    AnnealSchedule,
    ChainConfig,
    PriorSpec,
    empirical_prior_bounds,
    run_map,
    run_posterior,
)
from .simulate import RecruitmentModel, generate_er_graph, load_population_graph, simulate_rds


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdsnet",
        description="Hidden-network reconstruction for respondent-driven sampling studies",
    )
    sub = parser.add_subparsers(required=True)

    sim = sub.add_parser("simulate", help="simulate one synthetic RDS study")
    net = sim.add_mutually_exclusive_group()
    net.add_argument("--population-file", help="edge-list file for the population graph")
    net.add_argument("--n-vertices", type=int, default=1000, help="ER population size")
    sim.add_argument("--edge-prob", type=float, default=0.005, help="ER edge probability")
    sim.add_argument("--sample-size", type=int, default=150)
    sim.add_argument("--num-seeds", type=int, default=10)
    sim.add_argument("--coupons", type=int, default=3)
    sim.add_argument("--model", choices=["exponential", "gamma", "turn-taking"],
                     default="exponential")
    sim.add_argument("--rate", type=float, default=1.0)
    sim.add_argument("--shape", type=float, default=1.0, help="gamma waiting-time shape")
    sim.add_argument("--stall", choices=["reseed", "stop"], default="reseed")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=_cmd_simulate)

    rec = sub.add_parser("reconstruct", help="estimate the hidden subgraph from a CSV")
    rec.add_argument("--observed", required=True, help="recruitment CSV")
    rec.add_argument("--mode", choices=["map", "posterior"], default="map")
    rec.add_argument("--prior-mean", type=float, default=None)
    rec.add_argument("--prior-sd", type=float, default=None)
    rec.add_argument("--empirical-prior-eta", type=float, default=None,
                     help="use the data-driven rate bracket with this Gamma shape")
    rec.add_argument("--sweeps", type=int, default=1000)
    rec.add_argument("--burn-in", type=int, default=200)
    rec.add_argument("--thin", type=int, default=1)
    rec.add_argument("--decay", type=float, default=0.995, help="annealing decay per sweep")
    rec.add_argument("--floor", type=float, default=1e-3, help="annealing temperature floor")
    rec.add_argument("--samples", action="store_true", help="record edge-list snapshots")
    rec.add_argument("--compress-idle-days", action="store_true")
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--out", required=True)
    rec.set_defaults(func=_cmd_reconstruct)

    exp = sub.add_parser("experiment", help="run a replication grid from a config file")
    exp.add_argument("--config", required=True, help="JSON experiment config")
    exp.add_argument("--seed", type=int, default=None, help="override the config seed")
    exp.add_argument("--out", required=True)
    exp.set_defaults(func=_cmd_experiment)

    sco = sub.add_parser("score", help="score an estimated edge list against the truth")
    sco.add_argument("--estimate", required=True)
    sco.add_argument("--truth", required=True)
    sco.add_argument("--n", type=int, default=None,
                     help="vertex count (default: union of both files)")
    sco.set_defaults(func=_cmd_score)

    cln = sub.add_parser("clean", help="repair a raw recruitment CSV")
    cln.add_argument("--input", required=True)
    cln.add_argument("--output", required=True)
    cln.add_argument("--compress-idle-days", action="store_true")
    cln.set_defaults(func=_cmd_clean)

    return parser


def _cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.population_file:
        graph = load_population_graph(args.population_file)
    else:
        graph = generate_er_graph(args.n_vertices, args.edge_prob, rng)
    model = RecruitmentModel(variant=args.model, rate=args.rate, shape=args.shape)
    sim = simulate_rds(
        graph, args.sample_size, args.num_seeds, args.coupons, model, rng, stall=args.stall
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels = [f"S{k:04d}" for k in range(sim.n)]
    write_recruitment_csv(out / "observed.csv", sim.observed, labels)
    ii, jj = np.nonzero(np.triu(sim.adjacency, 1))
    write_edge_list(out / "truth_edges.txt", zip(ii, jj), labels)
    with open(out / "event_log.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "recruiter", "recruit"])
        for time, rec, idx in sim.events:
            writer.writerow([repr(float(time)), labels[rec] if rec >= 0 else "", labels[idx]])
    _write_json(
        out / "summary.json",
        {
            "population": graph.meta or {"n": graph.n_vertices},
            "population_edges": graph.edge_count,
            "sample_size": sim.n,
            "model": {"variant": model.variant, "rate": model.rate, "shape": model.shape},
            "true_edge_count": int(ii.size),
            "truncated": sim.truncated,
            "seed": args.seed,
        },
    )
    print(f"wrote {out / 'observed.csv'} ({sim.n} subjects, {ii.size} true edges)")
    return 0


def _make_prior(args, observed):
    if args.empirical_prior_eta is not None:
        bounds = empirical_prior_bounds(observed)
        return bounds.gamma_prior(args.empirical_prior_eta)
    if args.prior_mean is not None and args.prior_sd is not None:
        return PriorSpec.from_mean_sd(args.prior_mean, args.prior_sd)
    if args.prior_mean is not None or args.prior_sd is not None:
        raise ValueError("give both --prior-mean and --prior-sd, or neither")
    return None


def _cmd_reconstruct(args) -> int:
    observed, report, ids = ingest_recruitment_csv(
        args.observed, compress_idle_days=args.compress_idle_days
    )
    if report.total_repairs:
        print(f"cleaning repairs applied: {json.dumps(report.as_dict(), sort_keys=True)}",
              file=sys.stderr)
    prior = _make_prior(args, observed)
    config = ChainConfig(
        sweeps=args.sweeps,
        burn_in=args.burn_in,
        thin=args.thin,
        mode=args.mode,
        seed=args.seed,
        anneal=AnnealSchedule(gamma0=1.0, decay=args.decay, floor=args.floor),
        record_edges=args.samples,
    )
    if args.mode == "map":
        result = run_map(observed, prior, config)
    else:
        result = run_posterior(observed, prior, config)
    export_results(result, args.out, labels=ids, extra_summary={"cleaning": report.as_dict()})
    print(f"wrote results to {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if args.seed is not None:
        payload["seed"] = args.seed
    config = ExperimentConfig.from_dict(payload)
    result = run_experiment(config, out_dir=args.out)
    for cell in result.cells:
        if cell.summary is None:
            print(f"cell delta={cell.delta} prior_sd={cell.prior_sd}: too few successes")
            continue
        s = cell.summary
        print(
            f"delta={cell.delta} prior_sd={cell.prior_sd}: "
            f"accuracy={s.accuracy_mean:.4f} tpr={s.tpr_mean:.4f} "
            f"tnr={s.tnr_mean:.4f} lambda={s.lambda_mean:.4f}"
        )
    return 0


def _read_edge_file(path) -> set[tuple[str, str]]:
    edges = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two vertex IDs")
            a, b = sorted(parts)
            if a != b:
                edges.add((a, b))
    return edges


def _cmd_score(args) -> int:
    est_edges = _read_edge_file(args.estimate)
    truth_edges = _read_edge_file(args.truth)
    names = sorted({v for e in est_edges | truth_edges for v in e})
    index = {v: k for k, v in enumerate(names)}
    n = args.n if args.n is not None else len(names)
    if n < len(names):
        raise ValueError(f"--n {n} is below the {len(names)} vertices present")
    est = np.zeros((n, n), dtype=np.uint8)
    truth = np.zeros((n, n), dtype=np.uint8)
    for target, edges in ((est, est_edges), (truth, truth_edges)):
        for a, b in edges:
            i, j = index[a], index[b]
            target[i, j] = target[j, i] = 1
    sc = score_adjacency(est, truth)
    print(json.dumps(
        {
            "accuracy": sc.accuracy,
            "tpr": sc.tpr,
            "tnr": sc.tnr,
            "recall": sc.recall,
            "edges_estimated": sc.edge_count_est,
            "edges_true": sc.edge_count_true,
            "pairs": sc.n_pairs,
        },
        indent=2, sort_keys=True,
    ))
    return 0


def _cmd_clean(args) -> int:
    observed, report, ids = ingest_recruitment_csv(
        args.input, compress_idle_days=args.compress_idle_days
    )
    write_recruitment_csv(args.output, observed, ids)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

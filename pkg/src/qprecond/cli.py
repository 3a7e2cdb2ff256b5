"""Command-line front end.

Thin shell over the library modules: every subcommand parses flags,
calls one module operation, and prints/serializes the result.  Exit
codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench, diagnostics, precond, problems, solvers
from .errors import InvalidParameterError, QPrecondError
from .qaoa import AngleSchedule


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="qprecond", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="generate a random problem instance")
    gen.add_argument("family", choices=["regular", "sk"],
                     help="regular: d-regular unit-weight max-cut; sk: Gaussian all-to-all")
    gen.add_argument("--n", type=int, required=True, help="number of variables")
    gen.add_argument("--d", type=int, default=3, help="degree (regular only)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True, help="output problem file")

    pre = sub.add_parser("precondition", help="replace couplings with QAOA correlations")
    pre.add_argument("-i", "--input", required=True)
    pre.add_argument("--p", type=int, default=1, help="circuit depth")
    pre.add_argument("--engine", default="auto",
                     choices=[e.value for e in precond.Engine])
    pre.add_argument("--angles", default="sk-default",
                     help="'sk-default', 'optimize:R' (R restarts), or 'file:angles.json'")
    pre.add_argument("--samples", type=int, default=None,
                     help="estimate correlations from K shots instead of exactly")
    pre.add_argument("--sample-seed", type=int, default=0)
    pre.add_argument("--noise-f", type=float, default=None,
                     help="global depolarizing fidelity in [0,1]")
    pre.add_argument("--seed", type=int, default=0, help="angle-optimization seed")
    pre.add_argument("-o", "--output", required=True)

    sol = sub.add_parser("solve", help="run a solver on a problem file")
    sol.add_argument("-i", "--input", required=True)
    sol.add_argument("--solver", required=True, choices=["sa", "bm", "greedy", "brute"])
    sol.add_argument("--iters", type=int, default=1000,
                     help="sweeps (sa) or iterations (bm)")
    sol.add_argument("--seed", type=int, default=0)
    sol.add_argument("--checkpoints", default=None,
                     help="comma-separated iteration counts to record")
    sol.add_argument("-o", "--output", default=None, help="trace CSV output")

    dia = sub.add_parser("diagnose", help="print quality/hardness metrics")
    dia.add_argument("-i", "--input", required=True)
    dia.add_argument("--zopt", default=None,
                     help="spin-vector file (one +-1 per line); brute-forced when omitted")
    dia.add_argument("--metrics", default="terms,gap",
                     help="comma list from: alpha,frustration,gap,overlap,terms")

    cam = sub.add_parser("campaign", help="run a benchmark campaign from JSON config")
    cam.add_argument("-c", "--config", required=True)
    cam.add_argument("-o", "--output", required=True, help="records CSV")
    cam.add_argument("--jobs", type=int, default=None, help="parallel instance workers")

    bud = sub.add_parser("budget", help="preconditioning-budget table from a records CSV")
    bud.add_argument("-i", "--input", required=True)
    bud.add_argument("--alpha-target", type=float, required=True)

    mpes = sub.add_parser("mpes-load", help="ingest a grid bus-line table as a problem")
    mpes.add_argument("-i", "--input", required=True)
    mpes.add_argument("-o", "--output", required=True)

    return parser


def _load_spins(path) -> np.ndarray:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            values.extend(int(tok) for tok in line.split())
    return problems.as_spins(np.array(values))


def _parse_angles(spec: str, p: int, problem, seed: int, engine: str):
    if spec == "sk-default":
        return precond.AngleSource.SK_DEFAULT, None, 1
    if spec.startswith("optimize"):
        restarts = int(spec.split(":", 1)[1]) if ":" in spec else 4
        return precond.AngleSource.OPTIMIZE, None, restarts
    if spec.startswith("file:"):
        with open(spec[5:], "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return (
            precond.AngleSource.PROVIDED,
            AngleSchedule(gammas=raw["gammas"], betas=raw["betas"]),
            1,
        )
    raise QPrecondError(
        f"unknown angle spec {spec!r}; use sk-default, optimize:R, or file:PATH"
    )


def _cmd_generate(args) -> int:
    if args.family == "regular":
        prob = problems.gen_random_regular(args.n, args.d, args.seed)
    else:
        prob = problems.gen_sk(args.n, args.seed)
    problems.write_problem(prob, args.output)
    print(f"wrote {prob.kind.value} problem: N={prob.n_vars}, "
          f"{prob.n_terms} terms -> {args.output}")
    return 0


def _cmd_precondition(args) -> int:
    prob = problems.read_problem(args.input)
    source, angles, restarts = _parse_angles(
        args.angles, args.p, prob, args.seed, args.engine
    )
    opts = precond.PrecondOptions(
        p=args.p,
        angle_source=source,
        angles=angles,
        restarts=restarts,
        opt_seed=args.seed,
        engine=precond.Engine(args.engine),
        sampling=None if args.samples is None else (args.samples, args.sample_seed),
        noise_f=args.noise_f,
    )
    out = precond.precondition(prob, opts)
    problems.write_problem(out, args.output)
    print(f"preconditioned via {out.provenance.get('engine')}: "
          f"{out.n_terms} terms -> {args.output}")
    return 0


def _cmd_solve(args) -> int:
    prob = problems.read_problem(args.input)
    checkpoints = None
    if args.checkpoints:
        checkpoints = [int(c) for c in args.checkpoints.split(",")]
    if args.solver == "brute":
        z, value = solvers.brute_force(prob)
        rows = [(1, value, 0.0)]
    elif args.solver == "greedy":
        rng = np.random.default_rng(args.seed)
        z0 = 1 - 2 * rng.integers(0, 2, size=prob.n_vars)
        z = solvers.greedy_local_descent(prob, z0)
        value = problems.evaluate_objective(prob, z)
        rows = [(1, value, 0.0)]
    else:
        run = solvers.simulated_annealing if args.solver == "sa" else solvers.burer_monteiro
        trace = run(prob, args.iters, args.seed, checkpoints)
        z, value, rows = trace.best_z, trace.best_objective, trace.checkpoints
    print(f"objective {value!r}")
    if prob.kind in problems.CUT_KINDS:
        print(f"cut {problems.evaluate_cut(prob, z)!r}")
    print("z " + "".join("+" if s > 0 else "-" for s in z))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write("n_iter,objective,elapsed_s\n")
            for n_iter, obj, elapsed in rows:
                fh.write(f"{n_iter},{obj!r},{elapsed!r}\n")
    return 0


def _cmd_diagnose(args) -> int:
    prob = problems.read_problem(args.input)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    known = {"alpha", "frustration", "gap", "overlap", "terms"}
    unknown = set(metrics) - known
    if unknown:
        raise QPrecondError(f"unknown metrics: {sorted(unknown)}")
    z = _load_spins(args.zopt) if args.zopt else None
    z_opt = None
    if {"alpha", "frustration", "overlap"} & set(metrics):
        z_opt, _ = solvers.brute_force(prob)
    for metric in metrics:
        if metric == "terms":
            print(f"terms {diagnostics.count_nonzero_terms(prob)}")
        elif metric == "gap":
            print(f"gap {diagnostics.normalized_gap(prob)!r}")
        elif metric == "frustration":
            print(f"frustration {diagnostics.frustration_index(prob, z if z is not None else z_opt)!r}")
        elif metric == "alpha":
            cand = z if z is not None else z_opt
            c_opt = diagnostics.optimum_value(prob, z_opt)
            print(f"alpha {diagnostics.approximation_ratio(prob, cand, c_opt)!r}")
        elif metric == "overlap":
            cand = z if z is not None else z_opt
            print(f"overlap {diagnostics.overlap(cand, z_opt)!r}")
    return 0


def _cmd_campaign(args) -> int:
    config = bench.CampaignConfig.from_json(args.config)
    if args.jobs is not None:
        config.jobs = args.jobs
    records = bench.run_campaign(config)
    bench.write_records(records, args.output)
    print(f"{len(records)} records -> {args.output}")
    return 0


def _cmd_budget(args) -> int:
    records = bench.read_records(args.input)
    rows = bench.budget_report(records, args.alpha_target)
    print("n_vars,solver,variant,t_original,t_preconditioned,budget,precond_s,fits")
    for r in rows:
        if r.unreachable:
            print(f"{r.n_vars},{r.solver},{r.variant},unreachable,,,{r.precond_mean_s!r},")
        else:
            print(f"{r.n_vars},{r.solver},{r.variant},{r.t_original!r},"
                  f"{r.t_preconditioned!r},{r.budget!r},{r.precond_mean_s!r},"
                  f"{'yes' if r.fits_budget else 'no'}")
    return 0


def _cmd_mpes_load(args) -> int:
    prob, pmap = problems.load_mpes(args.input)
    problems.write_problem(prob, args.output)
    comps = ", ".join(str(len(c)) for c in pmap.components)
    print(f"raw {prob.provenance['raw_n_vars']} buses / "
          f"{prob.provenance['raw_n_terms']} lines; pruned to "
          f"{sum(len(c) for c in pmap.components)} buses / {prob.n_terms} lines; "
          f"components [{comps}] -> {args.output}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "precondition": _cmd_precondition,
    "solve": _cmd_solve,
    "diagnose": _cmd_diagnose,
    "campaign": _cmd_campaign,
    "budget": _cmd_budget,
    "mpes-load": _cmd_mpes_load,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except InvalidParameterError as exc:
        # bad parameter values are usage errors, like bad flags
        print(f"qprecond: {exc}", file=sys.stderr)
        return 1
    except (QPrecondError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"qprecond: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

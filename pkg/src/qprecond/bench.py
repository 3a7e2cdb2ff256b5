"""Experiment orchestration.

A campaign sweeps (instance x variant x solver x n_iter x seed) cells,
timing preconditioning separately from solving, and emits flat records
with a fixed CSV schema.  Approximation ratios are always computed on
the original problem; the optimum is exact (brute force) when every
instance is small enough, otherwise the best value found anywhere in
the campaign (recorded per instance so results are reproducible from
the CSV alone).

Each SA cell runs a fresh anneal of exactly n_iter sweeps, because the
temperature schedule depends on the sweep budget; BM cells likewise run
n_iter fresh iterations.  All cell seeds derive deterministically from
the campaign seed base, so the record multiset is independent of the
parallelism width.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .precond import PrecondOptions, ideal_preconditioner, precondition
from .problems import (
    CUT_KINDS,
    Problem,
    evaluate_cut,
    evaluate_objective,
    gen_random_regular,
    gen_sk,
    read_problem,
)
from .solvers import (
    BRUTE_FORCE_CAP,
    brute_force,
    burer_monteiro,
    greedy_local_descent,
    simulated_annealing,
)

CSV_HEADER = [
    "instance_id", "kind", "n_vars", "n_terms", "variant", "p", "engine",
    "K", "F", "solver", "n_iter", "objective", "alpha", "elapsed_s",
    "precond_s", "seed",
]


@dataclass
class VariantSpec:
    """One input variant: the original problem, a preconditioned copy,
    or the ideal infinite-depth preconditioner (small N only)."""

    name: str
    mode: str = "original"            # original | precond | ideal
    options: PrecondOptions | None = None

    def __post_init__(self):
        if self.mode not in ("original", "precond", "ideal"):
            raise InvalidParameterError(f"unknown variant mode {self.mode!r}")
        if self.mode == "precond" and self.options is None:
            raise InvalidParameterError(f"variant {self.name!r} needs options")


@dataclass
class SolverSpec:
    """A solver with its iteration grid and number of seeds per cell."""

    solver: str                        # sa | bm
    n_iters: list[int]
    seeds_per_instance: int = 1

    def __post_init__(self):
        if self.solver not in ("sa", "bm"):
            raise InvalidParameterError(f"unknown solver {self.solver!r}")
        if not self.n_iters:
            raise InvalidParameterError("empty n_iter grid")
        if any(int(m) < 1 for m in self.n_iters):
            raise InvalidParameterError("n_iter values must be >= 1")
        if self.seeds_per_instance < 1:
            raise InvalidParameterError("need at least one seed per instance")


@dataclass
class CampaignConfig:
    kind: str                          # regular | sk | file
    n: int
    count: int
    seed_base: int
    d: int = 3
    path: str | None = None            # for kind == "file"
    variants: list[VariantSpec] = field(default_factory=list)
    solvers: list[SolverSpec] = field(default_factory=list)
    jobs: int = 1

    def __post_init__(self):
        if not self.variants:
            raise InvalidParameterError("campaign needs at least one variant")
        if not self.solvers:
            raise InvalidParameterError("campaign needs at least one solver")
        if self.count < 1:
            raise InvalidParameterError("need at least one instance")
        if self.kind not in ("regular", "sk", "file"):
            raise InvalidParameterError(f"unknown problem kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise InvalidParameterError("kind 'file' needs a path")

    @classmethod
    def from_json(cls, path) -> "CampaignConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        variants = []
        for v in raw.get("variants", []):
            v = dict(v)
            name = v.pop("name")
            mode = v.pop("mode", "original" if name == "original" else
                         "ideal" if name == "ideal" else "precond")
            options = PrecondOptions(**v) if mode == "precond" else None
            variants.append(VariantSpec(name=name, mode=mode, options=options))
        solvers = [SolverSpec(**s) for s in raw.get("solvers", [])]
        return cls(
            kind=raw["kind"],
            n=int(raw.get("n", 0)),
            count=int(raw["count"]),
            seed_base=int(raw["seed_base"]),
            d=int(raw.get("d", 3)),
            path=raw.get("path"),
            variants=variants,
            solvers=solvers,
            jobs=int(raw.get("jobs", 1)),
        )


@dataclass
class RunRecord:
    instance_id: str
    kind: str
    n_vars: int
    n_terms: int
    variant: str
    p: int | None
    engine: str | None
    K: int | None
    F: float | None
    solver: str
    n_iter: int
    objective: float          # on the original problem, in the alpha convention
    alpha: float | None
    elapsed_s: float
    precond_s: float
    seed: int


def _cell_seed(seed_base: int, *coords) -> int:
    ss = np.random.SeedSequence(entropy=seed_base, spawn_key=tuple(coords))
    return int(ss.generate_state(1)[0])


def _instance_problem(config: CampaignConfig, index: int) -> Problem:
    seed = _cell_seed(config.seed_base, 0, index)
    if config.kind == "regular":
        return gen_random_regular(config.n, config.d, seed)
    if config.kind == "sk":
        return gen_sk(config.n, seed)
    return read_problem(config.path)


def _original_value(problem: Problem, z) -> float:
    """Candidate value in the campaign's alpha convention."""
    if problem.kind in CUT_KINDS:
        return evaluate_cut(problem, z)
    return evaluate_objective(problem, z)


def _run_instance(config: CampaignConfig, index: int) -> list[RunRecord]:
    problem = _instance_problem(config, index)
    instance_id = f"{config.kind}-n{problem.n_vars}-{index}"
    c_opt = None
    z_opt = None
    if problem.n_vars <= BRUTE_FORCE_CAP:
        z_opt, _ = brute_force(problem)
        c_opt = _original_value(problem, z_opt)
    records: list[RunRecord] = []
    for vi, variant in enumerate(config.variants):
        precond_s = 0.0
        meta = {"p": None, "engine": None, "K": None, "F": None}
        if variant.mode == "original":
            target = problem
        elif variant.mode == "ideal":
            if z_opt is None:
                raise InvalidParameterError(
                    "ideal variant needs a brute-forceable instance"
                )
            t0 = time.perf_counter()
            target = ideal_preconditioner(z_opt)
            precond_s = time.perf_counter() - t0
            meta["engine"] = "ideal"
        else:
            t0 = time.perf_counter()
            target = precondition(problem, variant.options)
            precond_s = time.perf_counter() - t0
            meta["p"] = variant.options.p
            meta["engine"] = target.provenance.get("engine")
            meta["K"] = target.provenance.get("K")
            meta["F"] = target.provenance.get("F")
        for si, spec in enumerate(config.solvers):
            for m in spec.n_iters:
                for rep in range(spec.seeds_per_instance):
                    seed = _cell_seed(config.seed_base, 1, index, vi, si, int(m), rep)
                    if spec.solver == "sa":
                        trace = simulated_annealing(target, int(m), seed)
                    else:
                        trace = burer_monteiro(target, int(m), seed)
                    value = _original_value(problem, trace.best_z)
                    records.append(RunRecord(
                        instance_id=instance_id,
                        kind=problem.kind.value,
                        n_vars=problem.n_vars,
                        n_terms=target.n_terms,
                        variant=variant.name,
                        p=meta["p"],
                        engine=meta["engine"],
                        K=meta["K"],
                        F=meta["F"],
                        solver=spec.solver,
                        n_iter=int(m),
                        objective=value,
                        alpha=None if c_opt is None else value / c_opt,
                        elapsed_s=trace.checkpoints[-1][2],
                        precond_s=precond_s,
                        seed=seed,
                    ))
    if c_opt is None:
        # best-found-overall optimum policy for instances too large to
        # brute force; cut conventions maximize, Ising minimizes
        values = [r.objective for r in records]
        best = max(values) if problem.kind in CUT_KINDS else min(values)
        for r in records:
            r.alpha = r.objective / best
    return records


def run_campaign(config: CampaignConfig) -> list[RunRecord]:
    """Execute every campaign cell; deterministic per seed base."""
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_run_instance, [config] * config.count,
                                   range(config.count)))
    else:
        chunks = [_run_instance(config, i) for i in range(config.count)]
    records = [r for chunk in chunks for r in chunk]
    return records


def write_records(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([
                r.instance_id, r.kind, r.n_vars, r.n_terms, r.variant,
                "" if r.p is None else r.p,
                "" if r.engine is None else r.engine,
                "" if r.K is None else r.K,
                "" if r.F is None else r.F,
                r.solver, r.n_iter,
                repr(r.objective),
                "" if r.alpha is None else repr(r.alpha),
                repr(r.elapsed_s), repr(r.precond_s), r.seed,
            ])


def read_records(path) -> list[RunRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise InvalidParameterError(f"{path}: unexpected CSV header")
        for row in reader:
            records.append(RunRecord(
                instance_id=row[0], kind=row[1], n_vars=int(row[2]),
                n_terms=int(row[3]), variant=row[4],
                p=int(row[5]) if row[5] else None,
                engine=row[6] or None,
                K=int(row[7]) if row[7] else None,
                F=float(row[8]) if row[8] else None,
                solver=row[9], n_iter=int(row[10]),
                objective=float(row[11]),
                alpha=float(row[12]) if row[12] else None,
                elapsed_s=float(row[13]), precond_s=float(row[14]),
                seed=int(row[15]),
            ))
    return records


@dataclass
class BudgetRow:
    """Time-budget accounting for one (N, solver, variant) group."""

    n_vars: int
    solver: str
    variant: str
    alpha_target: float
    t_original: float | None
    t_preconditioned: float | None
    budget: float | None              # t_original - t_preconditioned
    precond_mean_s: float
    fits_budget: bool | None
    unreachable: bool


def _time_to_target(cells: dict, target: float) -> float | None:
    """cells: n_iter -> (mean alpha, mean elapsed).  Smallest mean time
    among iteration counts whose mean alpha reaches the target."""
    times = [t for (a, t) in cells.values() if a is not None and a >= target]
    return min(times) if times else None


def budget_report(records, alpha_target: float) -> list[BudgetRow]:
    """Per (N, solver, preconditioned-variant): how much solver time the
    preconditioning saves at the target alpha, and whether the measured
    preconditioning time fits inside that budget."""
    groups: dict[tuple, dict] = {}
    precond_times: dict[tuple, list] = {}
    for r in records:
        key = (r.n_vars, r.solver, r.variant)
        cell = groups.setdefault(key, {}).setdefault(r.n_iter, [])
        cell.append((r.alpha, r.elapsed_s))
        precond_times.setdefault((r.n_vars, r.solver, r.variant), []).append(r.precond_s)

    def mean_cells(key):
        out = {}
        for n_iter, vals in groups.get(key, {}).items():
            alphas = [a for a, _ in vals if a is not None]
            times = [t for _, t in vals]
            out[n_iter] = (
                sum(alphas) / len(alphas) if alphas else None,
                sum(times) / len(times),
            )
        return out

    variants = sorted({(r.n_vars, r.solver, r.variant) for r in records
                       if r.variant != "original"})
    rows = []
    for n_vars, solver, variant in variants:
        t_orig = _time_to_target(mean_cells((n_vars, solver, "original")), alpha_target)
        t_pre = _time_to_target(mean_cells((n_vars, solver, variant)), alpha_target)
        pre_times = precond_times[(n_vars, solver, variant)]
        pre_mean = sum(pre_times) / len(pre_times)
        unreachable = t_orig is None or t_pre is None
        budget = None if unreachable else t_orig - t_pre
        rows.append(BudgetRow(
            n_vars=n_vars, solver=solver, variant=variant,
            alpha_target=alpha_target,
            t_original=t_orig, t_preconditioned=t_pre, budget=budget,
            precond_mean_s=pre_mean,
            fits_budget=None if unreachable else pre_mean <= budget,
            unreachable=unreachable,
        ))
    return rows


def greedy_alpha(problem: Problem, variant: Problem, seed: int) -> float:
    """Single greedy descent on ``variant`` scored on ``problem``."""
    rng = np.random.default_rng(seed)
    z0 = 1 - 2 * rng.integers(0, 2, size=problem.n_vars)
    z = greedy_local_descent(variant, z0)
    return _original_value(problem, z)

"""Quantum preconditioning of QUBO/Ising problems.

Replaces a problem's coupling matrix with the negated two-point
correlation matrix of a shallow QAOA circuit (computed by exact
emulation, light-cone decomposition, or a p=1 closed form), then solves
either version with classical heuristics and reports quality/hardness
diagnostics.
"""

from .errors import (
    CapacityError,
    DimensionError,
    FormatError,
    IntegrityError,
    InvalidParameterError,
    QPrecondError,
)
from .precond import (
    AngleSource,
    Engine,
    PrecondOptions,
    apply_depolarizing,
    ideal_preconditioner,
    precondition,
    sk_default_angles,
)
from .problems import (
    Problem,
    ProblemKind,
    evaluate_cut,
    evaluate_objective,
    gen_random_regular,
    gen_sk,
    load_mpes,
    read_problem,
    write_problem,
)
from .qaoa import AngleSchedule, apply_qaoa, optimize_angles
from .solvers import (
    SolveTrace,
    brute_force,
    burer_monteiro,
    greedy_local_descent,
    simulated_annealing,
)

__version__ = "0.1.0"

__all__ = [
    "AngleSchedule",
    "AngleSource",
    "CapacityError",
    "DimensionError",
    "Engine",
    "FormatError",
    "IntegrityError",
    "InvalidParameterError",
    "PrecondOptions",
    "Problem",
    "ProblemKind",
    "QPrecondError",
    "SolveTrace",
    "apply_depolarizing",
    "apply_qaoa",
    "brute_force",
    "burer_monteiro",
    "evaluate_cut",
    "evaluate_objective",
    "gen_random_regular",
    "gen_sk",
    "greedy_local_descent",
    "ideal_preconditioner",
    "load_mpes",
    "optimize_angles",
    "precondition",
    "read_problem",
    "simulated_annealing",
    "sk_default_angles",
    "write_problem",
]

"""Preconditioning front door.

Replaces a problem's coupling matrix W with the negated QAOA two-point
correlation matrix, Z_ij = -<Z_i Z_j>_p for i != j (the diagonal is
never stored).  Three interchangeable engines compute the correlations:

* ``analytic-p1``: the closed-form p=1 expression, O(N) per pair;
* ``lightcone``: per-pair emulation of the relevant subcircuit, for
  sparse problems of any size;
* ``full-statevector``: whole-graph emulation, any p, N <= qubit cap.

Also provides the infinite-depth ideal preconditioner built from a known
optimum, finite-sample estimation, and global depolarizing rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CapacityError, DimensionError, InvalidParameterError
from .lightcone import build_correlation_matrix, optimize_angles_lightcone
from .problems import Problem, ProblemKind, as_spins
from .qaoa import (
    DEFAULT_QUBIT_CAP,
    AngleSchedule,
    apply_qaoa,
    correlation_matrix_full,
    optimize_angles,
    sample_bitstrings,
)

SPARSITY_THRESHOLD = 1e-12


class Engine(str, Enum):
    AUTO = "auto"
    ANALYTIC_P1 = "analytic-p1"
    LIGHTCONE = "lightcone"
    FULL_STATEVECTOR = "full-statevector"


class AngleSource(str, Enum):
    PROVIDED = "provided"
    SK_DEFAULT = "sk-default"
    OPTIMIZE = "optimize"


@dataclass
class PrecondOptions:
    """Configuration for :func:`precondition`."""

    p: int = 1
    angle_source: AngleSource = AngleSource.SK_DEFAULT
    angles: AngleSchedule | None = None
    restarts: int = 4
    opt_seed: int = 0
    engine: Engine = Engine.AUTO
    sampling: tuple[int, int] | None = None   # (K, seed)
    noise_f: float | None = None
    threshold: float = SPARSITY_THRESHOLD
    qubit_cap: int = DEFAULT_QUBIT_CAP

    def __post_init__(self):
        self.engine = Engine(self.engine)
        self.angle_source = AngleSource(self.angle_source)
        if self.p < 1:
            raise InvalidParameterError("need p >= 1")
        if self.engine is Engine.ANALYTIC_P1 and self.p != 1:
            raise InvalidParameterError("the closed-form engine requires p=1")
        if self.angle_source is AngleSource.PROVIDED and self.angles is None:
            raise InvalidParameterError("angle_source 'provided' needs angles")
        if self.angles is not None and self.angles.p != self.p:
            raise InvalidParameterError(
                f"angles have p={self.angles.p}, options have p={self.p}"
            )
        if self.sampling is not None and self.sampling[0] < 1:
            raise InvalidParameterError("sample count K must be >= 1")
        if self.noise_f is not None and not (0.0 <= self.noise_f <= 1.0):
            raise InvalidParameterError("noise fidelity must lie in [0, 1]")


def sk_default_angles(n: int) -> AngleSchedule:
    """Size-scaled p=1 angles for dense Gaussian problems: gamma = 1/(2 sqrt(N)),
    beta = pi/8, skipping variational optimization."""
    if n < 2:
        raise InvalidParameterError("need n >= 2")
    return AngleSchedule(gammas=[0.5 / math.sqrt(n)], betas=[math.pi / 8.0])


def perturbed_sk_angles(n: int, epsilon: float, theta: float) -> AngleSchedule:
    """Default angles displaced by polar offset (epsilon, theta) in the
    (gamma*sqrt(N), beta) plane; epsilon=0 recovers the defaults."""
    if epsilon < 0:
        raise InvalidParameterError("need epsilon >= 0")
    gamma = (epsilon * math.cos(theta) + 0.5) / math.sqrt(n)
    beta = epsilon * math.sin(theta) + math.pi / 8.0
    return AngleSchedule(gammas=[gamma], betas=[beta])


# -- closed-form p=1 ---------------------------------------------------


def analytic_p1_correlation(problem: Problem, gamma: float, beta: float,
                            i: int, j: int) -> float:
    """<Z_i Z_j> after one layer, in closed form.

    Absent couplings contribute cos(0)=1 to the products, so only the
    neighborhoods of i and j enter: O(deg) per pair.
    """
    n = problem.n_vars
    if not (0 <= i < n and 0 <= j < n):
        raise DimensionError(f"indices ({i},{j}) out of range")
    if i == j:
        raise InvalidParameterError("need two distinct indices")
    adj = problem.neighbors()
    wi = {k: w for k, w in adj[i]}
    wj = {k: w for k, w in adj[j]}
    w_ij = wi.get(j, 0.0)
    prod_i = prod_j = prod_sum = prod_diff = 1.0
    for k in set(wi) | set(wj):
        if k == i or k == j:
            continue
        a = wi.get(k, 0.0)
        b = wj.get(k, 0.0)
        prod_i *= math.cos(gamma * a)
        prod_j *= math.cos(gamma * b)
        prod_sum *= math.cos(gamma * (a + b))
        prod_diff *= math.cos(gamma * (b - a))
    s2b, c2b = math.sin(2 * beta), math.cos(2 * beta)
    return (
        -s2b * c2b * math.sin(gamma * w_ij) * (prod_i + prod_j)
        - 0.5 * s2b * s2b * (prod_sum - prod_diff)
    )


def analytic_p1_matrix(problem: Problem, gamma: float, beta: float) -> np.ndarray:
    """All pairwise p=1 correlations, vectorized to O(N^3).

    Row products over the full cosine matrix are corrected by dividing
    out the k in {i, j} factors; pairs where that factor is near zero
    fall back to the O(N) scalar path.
    """
    n = problem.n_vars
    w = problem.dense()
    cw = np.cos(gamma * w)                       # cw[i,i] = 1
    row_prod = cw.prod(axis=1)
    s2b, c2b = math.sin(2 * beta), math.cos(2 * beta)
    out = np.zeros((n, n))
    tiny = 1e-8
    for i in range(n):
        # each row product includes k in {i, j}; divide those out
        denom = cw[i]
        p_i = row_prod[i] / denom                # [j] -> prod_{k != i,j} cos(g W_ik)
        p_j = row_prod / denom                   # [j] -> prod_{k != i,j} cos(g W_jk)
        sums = np.cos(gamma * (w + w[i][None, :]))    # [j,k] = cos(g(W_ik + W_jk))
        diffs = np.cos(gamma * (w - w[i][None, :]))   # [j,k] = cos(g(W_jk - W_ik))
        p_sum = sums.prod(axis=1) / denom ** 2
        p_diff = diffs.prod(axis=1) / denom ** 2
        out[i] = (
            -s2b * c2b * np.sin(gamma * w[i]) * (p_i + p_j)
            - 0.5 * s2b * s2b * (p_sum - p_diff)
        )
        bad = np.nonzero(np.abs(denom) < tiny)[0]
        for j in bad:
            if j != i:
                out[i, j] = analytic_p1_correlation(problem, gamma, beta, i, j)
        out[i, i] = 1.0
    return out


# -- engines -----------------------------------------------------------


def _entries_from_matrix(corr: np.ndarray, threshold: float) -> dict:
    n = corr.shape[0]
    entries = {}
    for i in range(n):
        for j in range(i + 1, n):
            z = -corr[i, j]
            if abs(z) >= threshold:
                entries[(i, j)] = z
    return entries


def _is_dense(problem: Problem) -> bool:
    n = problem.n_vars
    return problem.n_terms > 3 * n and problem.n_terms > 0.25 * n * (n - 1) / 2


def _resolve_engine(problem: Problem, opts: PrecondOptions) -> Engine:
    if opts.engine is not Engine.AUTO:
        return opts.engine
    if opts.p == 1 and _is_dense(problem) and opts.sampling is None:
        return Engine.ANALYTIC_P1
    if not _is_dense(problem):
        return Engine.LIGHTCONE
    if problem.n_vars <= opts.qubit_cap:
        return Engine.FULL_STATEVECTOR
    raise CapacityError(
        f"no feasible engine: dense problem with N={problem.n_vars} at p={opts.p}"
    )


def _resolve_angles(problem: Problem, opts: PrecondOptions, engine: Engine) -> AngleSchedule:
    if opts.angle_source is AngleSource.PROVIDED:
        return opts.angles
    if opts.angle_source is AngleSource.SK_DEFAULT:
        if opts.p != 1:
            raise InvalidParameterError("the default angle preset is p=1 only")
        return sk_default_angles(problem.n_vars)
    if problem.n_vars <= opts.qubit_cap:
        angles, _ = optimize_angles(
            problem, opts.p, opts.restarts, opts.opt_seed, qubit_cap=opts.qubit_cap
        )
        return angles
    if engine is Engine.LIGHTCONE or not _is_dense(problem):
        angles, _ = optimize_angles_lightcone(
            problem, opts.p, opts.restarts, opts.opt_seed, qubit_cap=opts.qubit_cap
        )
        return angles
    raise CapacityError(
        f"cannot optimize angles for a dense problem with N={problem.n_vars}"
    )


def precondition(problem: Problem, opts: PrecondOptions) -> Problem:
    """Compute the preconditioned problem Z^(p) per the configured engine."""
    engine = _resolve_engine(problem, opts)
    angles = _resolve_angles(problem, opts, engine)
    provenance = {
        "parent_kind": problem.kind.value,
        "p": opts.p,
        "engine": engine.value,
        "gammas": [float(g) for g in angles.gammas],
        "betas": [float(b) for b in angles.betas],
    }

    if engine is Engine.ANALYTIC_P1:
        if opts.sampling is not None:
            raise InvalidParameterError(
                "the closed-form engine has no sampling mode; "
                "use full-statevector or lightcone"
            )
        corr = analytic_p1_matrix(problem, float(angles.gammas[0]), float(angles.betas[0]))
        entries = _entries_from_matrix(corr, opts.threshold)
        result = Problem(
            n_vars=problem.n_vars,
            entries=entries,
            kind=ProblemKind.PRECONDITIONED,
            provenance=provenance,
        )
    elif engine is Engine.FULL_STATEVECTOR:
        state = apply_qaoa(problem, angles, qubit_cap=opts.qubit_cap)
        if opts.sampling is not None:
            # one shared sample set for every pair
            k, seed = opts.sampling
            samples = sample_bitstrings(state, k, seed)
            corr = (samples.astype(np.float64).T @ samples) / k
            provenance["K"] = int(k)
        else:
            corr = correlation_matrix_full(state)
        entries = _entries_from_matrix(corr, opts.threshold)
        result = Problem(
            n_vars=problem.n_vars,
            entries=entries,
            kind=ProblemKind.PRECONDITIONED,
            provenance=provenance,
        )
    else:
        result = build_correlation_matrix(
            problem,
            opts.p,
            angles,
            sampling=opts.sampling,
            qubit_cap=opts.qubit_cap,
            threshold=opts.threshold,
        )
        result.provenance.update(provenance)
        result.provenance["engine"] = engine.value

    if opts.noise_f is not None:
        result = apply_depolarizing(result, opts.noise_f)
    return result


# -- ideal, noise, sampling helpers ------------------------------------


def ideal_preconditioner(z_opt) -> Problem:
    """Infinite-depth limit built from a known optimum: Z_ij = -z_i z_j.

    The resulting objective is minimized exactly at +-z_opt with value
    -N(N-1)/2 (every unordered pair contributes -1; -N(N-1) counting
    ordered pairs), and every term is satisfied there (zero frustration).
    """
    z = as_spins(z_opt)
    n = len(z)
    entries = {}
    for i in range(n):
        for j in range(i + 1, n):
            entries[(i, j)] = -float(z[i] * z[j])
    return Problem(
        n_vars=n,
        entries=entries,
        kind=ProblemKind.IDEAL_INFINITE_DEPTH,
        provenance={"z_opt": [int(v) for v in z]},
    )


def apply_depolarizing(preconditioned: Problem, fidelity: float) -> Problem:
    """Scale every entry by the global fidelity F (exactly linear).

    Entries are retained even when the scaled value falls below the
    sparsity threshold, so F only rescales — it never re-sparsifies.
    """
    if not (0.0 <= fidelity <= 1.0):
        raise InvalidParameterError("fidelity must lie in [0, 1]")
    entries = {pair: fidelity * w for pair, w in preconditioned.entries.items()}
    return Problem(
        n_vars=preconditioned.n_vars,
        entries=entries,
        kind=preconditioned.kind,
        provenance=dict(preconditioned.provenance, F=fidelity),
    )


def estimate_from_samples(samples, i: int, j: int) -> float:
    """(1/K) sum_k z_i^(k) z_j^(k) over rows of a (K, n) spin array."""
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise InvalidParameterError("need a non-empty (K, n) sample array")
    n = samples.shape[1]
    if not (0 <= i < n and 0 <= j < n):
        raise DimensionError(f"indices ({i},{j}) out of range")
    return float(np.mean(samples[:, i].astype(np.float64) * samples[:, j]))

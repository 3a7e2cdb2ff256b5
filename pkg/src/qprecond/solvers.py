"""Classical heuristics and oracles.

* simulated annealing with a data-derived geometric temperature schedule,
* Burer-Monteiro low-rank relaxation with hyperplane rounding,
* greedy single-flip descent,
* exact brute force for small instances.

All solvers are deterministic given (problem, parameters, seed).  The hot
loops are numba-compiled; randomness is pre-drawn with numpy Generators
outside the kernels so results do not depend on numba's threading.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CapacityError, DimensionError, InvalidParameterError
from .problems import Problem, as_spins, evaluate_objective

BRUTE_FORCE_CAP = 26


@dataclass
class TemperatureSchedule:
    """Sweep temperatures T_1..T_M, geometric in inverse temperature."""

    temps: np.ndarray
    t_hot: float
    t_cold: float


@dataclass
class SolveTrace:
    """Result of one solver run with best-so-far checkpoints."""

    best_z: np.ndarray
    best_objective: float
    checkpoints: list[tuple[int, float, float]] = field(default_factory=list)
    seed: int = 0


def temperature_schedule(problem: Problem, m: int) -> TemperatureSchedule:
    """Derive (T_hot, T_cold) from the couplings and interpolate M sweeps.

    T_hot = 2 max_i h_i / ln 2 with h_i = sum_j |W_ij| (largest possible
    single-flip energy gap); T_cold = 2 min|W_ij| / ln(100 nu) where nu
    counts spins whose minimal incident |weight| equals the global
    minimum.  1/T_l interpolates geometrically from just below 1/T_hot
    down to exactly 1/T_cold at l = M.
    """
    if m < 1:
        raise InvalidParameterError("need M >= 1")
    if not problem.entries:
        raise InvalidParameterError("cannot build a schedule for an empty problem")
    ii, jj, ww = problem.edge_arrays()
    aw = np.abs(ww)
    h = np.zeros(problem.n_vars)
    np.add.at(h, ii, aw)
    np.add.at(h, jj, aw)
    t_hot = 2.0 * float(h.max()) / math.log(2.0)
    w_min = float(aw.min())
    min_incident = np.full(problem.n_vars, np.inf)
    np.minimum.at(min_incident, ii, aw)
    np.minimum.at(min_incident, jj, aw)
    nu = int(np.count_nonzero(min_incident == w_min))
    t_cold = 2.0 * w_min / math.log(100.0 * nu)
    ell = np.arange(1, m + 1)
    log_inv = math.log(1.0 / t_hot) + ell * (
        math.log(1.0 / t_cold) - math.log(1.0 / t_hot)
    ) / m
    temps = np.exp(-log_inv)
    return TemperatureSchedule(temps=temps, t_hot=t_hot, t_cold=t_cold)


@njit(cache=True)
def _sa_chunk(indptr, indices, weights, z, fields, temps, proposals, logu,
              current, best, best_z):
    n = z.shape[0]
    pos = 0
    for s in range(temps.shape[0]):
        inv_t = 1.0 / temps[s]
        for _ in range(n):
            i = proposals[pos]
            delta = -2.0 * z[i] * fields[i]
            if delta <= 0.0 or logu[pos] < -delta * inv_t:
                z[i] = -z[i]
                current += delta
                for idx in range(indptr[i], indptr[i + 1]):
                    fields[indices[idx]] += 2.0 * z[i] * weights[idx]
                if current < best:
                    best = current
                    for q in range(n):
                        best_z[q] = z[q]
            pos += 1
    return current, best


def _local_fields(problem: Problem, z: np.ndarray) -> np.ndarray:
    ii, jj, ww = problem.edge_arrays()
    fields = np.zeros(problem.n_vars)
    np.add.at(fields, ii, ww * z[jj])
    np.add.at(fields, jj, ww * z[ii])
    return fields


def _normalize_checkpoints(checkpoints, m: int) -> list[int]:
    if checkpoints is None:
        return [m]
    cps = sorted(set(int(c) for c in checkpoints))
    if not cps or cps[0] < 1 or cps[-1] > m:
        raise InvalidParameterError(f"checkpoints must lie in [1, {m}]")
    return cps


def simulated_annealing(problem: Problem, m: int, seed: int,
                        checkpoints=None) -> SolveTrace:
    """Metropolis annealing: M sweeps of N uniformly-random flip proposals.

    The flip gain is maintained incrementally through cached local
    fields, so a sweep costs O(N + accepted-degree).  Best-so-far is
    recorded at each requested checkpoint (sweep counts).
    """
    if m < 1:
        raise InvalidParameterError("need M >= 1")
    cps = _normalize_checkpoints(checkpoints, m)
    t0 = time.perf_counter()
    schedule = temperature_schedule(problem, m)
    rng = np.random.default_rng(seed)
    n = problem.n_vars
    z = (1 - 2 * rng.integers(0, 2, size=n)).astype(np.float64)
    fields = _local_fields(problem, z)
    indptr, indices, weights = problem.csr()
    current = 0.5 * float(z @ fields)
    best = current
    best_z = z.copy()
    rows = []
    done = 0
    for cp in cps:
        span = cp - done
        proposals = rng.integers(0, n, size=span * n)
        logu = np.log(rng.random(size=span * n))
        current, best = _sa_chunk(
            indptr, indices, weights, z, fields,
            schedule.temps[done:cp], proposals, logu, current, best, best_z,
        )
        done = cp
        rows.append((cp, best, time.perf_counter() - t0))
    return SolveTrace(
        best_z=best_z.astype(np.int8),
        best_objective=float(best),
        checkpoints=rows,
        seed=seed,
    )


@njit(cache=True)
def _normalize_rows(v):
    n, k = v.shape
    for i in range(n):
        norm = 0.0
        for q in range(k):
            norm += v[i, q] * v[i, q]
        norm = math.sqrt(norm)
        if norm > 0.0:
            for q in range(k):
                v[i, q] /= norm


@njit(cache=True)
def _bm_pass(indptr, indices, weights, v, order):
    for t in range(order.shape[0]):
        i = order[t]
        k = v.shape[1]
        acc = np.zeros(k)
        for idx in range(indptr[i], indptr[i + 1]):
            j = indices[idx]
            w = weights[idx]
            for q in range(k):
                acc[q] -= w * v[j, q]
        norm = 0.0
        for q in range(k):
            norm += acc[q] * acc[q]
        norm = math.sqrt(norm)
        if norm > 0.0:
            for q in range(k):
                v[i, q] = acc[q] / norm


@njit(cache=True)
def _greedy_pass(indptr, indices, weights, z):
    n = z.shape[0]
    fields = np.zeros(n)
    for i in range(n):
        for idx in range(indptr[i], indptr[i + 1]):
            fields[i] += weights[idx] * z[indices[idx]]
    improved = True
    while improved:
        improved = False
        for i in range(n):
            if z[i] * fields[i] > 0.0:
                z[i] = -z[i]
                for idx in range(indptr[i], indptr[i + 1]):
                    fields[indices[idx]] += 2.0 * z[i] * weights[idx]
                improved = True
    return 0.5 * float(np.dot(z, fields))


def greedy_local_descent(problem: Problem, z0) -> np.ndarray:
    """Flip spins (sweep order, first improvement) until 1-opt optimal.

    Zero-gain flips are rejected so the descent always terminates.
    """
    z = as_spins(z0, problem.n_vars).astype(np.float64)
    indptr, indices, weights = problem.csr()
    _greedy_pass(indptr, indices, weights, z)
    return z.astype(np.int8)


def burer_monteiro(problem: Problem, n_iter: int, seed: int,
                   checkpoints=None) -> SolveTrace:
    """Low-rank relaxation: spins become unit vectors of rank
    k = min(20, ceil(sqrt(2N))).

    Each iteration runs one random-order coordinate-descent pass
    (v_i <- normalize(-sum_j W_ij v_j)), then rounds with a random
    hyperplane, polishes with greedy descent, and keeps the best.
    """
    if n_iter < 1:
        raise InvalidParameterError("need n_iter >= 1")
    cps = _normalize_checkpoints(checkpoints, n_iter)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    n = problem.n_vars
    k = min(20, math.ceil(math.sqrt(2 * n)))
    # uniform directions are as good as Gaussian for a heuristic start
    # and an order of magnitude cheaper to draw
    v = rng.random((n, k)) - 0.5
    _normalize_rows(v)
    indptr, indices, weights = problem.csr()
    best = np.inf
    best_z = np.ones(n)
    rows = []
    next_cp = 0
    for it in range(1, n_iter + 1):
        order = rng.permutation(n)
        _bm_pass(indptr, indices, weights, v, order)
        r = rng.standard_normal(k)
        z = np.where(v @ r >= 0.0, 1.0, -1.0)
        obj = _greedy_pass(indptr, indices, weights, z)
        if obj < best:
            best = obj
            best_z = z.copy()
        if it == cps[next_cp]:
            rows.append((it, best, time.perf_counter() - t0))
            next_cp += 1
    return SolveTrace(
        best_z=best_z.astype(np.int8),
        best_objective=float(best),
        checkpoints=rows,
        seed=seed,
    )


def relaxed_objective(problem: Problem, v: np.ndarray) -> float:
    """sum_{i<j} W_ij v_i . v_j for a (n, k) unit-vector configuration."""
    ii, jj, ww = problem.edge_arrays()
    return float(np.dot(ww, np.sum(v[ii] * v[jj], axis=1)))


def brute_force(problem: Problem) -> tuple[np.ndarray, float]:
    """Exact minimizer by enumeration, exploiting z -> -z symmetry.

    The last spin is fixed to +1, halving the state space; evaluation is
    chunked so memory stays bounded for N up to 26.
    """
    n = problem.n_vars
    if n > BRUTE_FORCE_CAP:
        raise CapacityError(f"brute force capped at {BRUTE_FORCE_CAP} spins, got {n}")
    ii, jj, ww = problem.edge_arrays()
    size = 1 << max(n - 1, 0)
    chunk = 1 << 22
    best_val = np.inf
    best_idx = 0
    for start in range(0, size, chunk):
        idx = np.arange(start, min(start + chunk, size), dtype=np.uint64)
        vals = np.zeros(len(idx))
        for e in range(len(ww)):
            differ = ((idx >> np.uint64(ii[e])) ^ (idx >> np.uint64(jj[e]))) & np.uint64(1)
            vals += ww[e] * (1.0 - 2.0 * differ.astype(np.float64))
        arg = int(np.argmin(vals))
        if vals[arg] < best_val:
            best_val = float(vals[arg])
            best_idx = start + arg
    bits = (best_idx >> np.arange(n)) & 1
    z = (1 - 2 * bits).astype(np.int8)
    assert abs(evaluate_objective(problem, z) - best_val) < 1e-9
    return z, best_val

"""Exact state-vector emulation of the p-layer QAOA.

Qubit i is bit i (little-endian) of the basis-state index; a bit b maps
to the spin z = 1 - 2b.  The phase separator uses the cut-form cost
operator sum_{i<j} w_ij (1 - Z_i Z_j) / 2, applied (up to a global
phase) as the diagonal phase e^{+i (gamma/2) C(z)} from a precomputed
objective table; the mixer is N single-qubit X rotations e^{-i beta X}.
With this convention a single edge w gives <Z_0 Z_1> at p=1 of
-sin(4 beta) sin(gamma w), matching the closed-form p=1 engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import CapacityError, DimensionError, InvalidParameterError
from .problems import Problem, evaluate_objective

DEFAULT_QUBIT_CAP = 26


@dataclass
class AngleSchedule:
    """QAOA parameters (gamma_1..gamma_p, beta_1..beta_p)."""

    gammas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        self.gammas = np.atleast_1d(np.asarray(self.gammas, dtype=np.float64))
        self.betas = np.atleast_1d(np.asarray(self.betas, dtype=np.float64))
        if self.gammas.shape != self.betas.shape:
            raise DimensionError("gammas and betas must have equal length")

    @property
    def p(self) -> int:
        return len(self.gammas)

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "AngleSchedule":
        p = len(x) // 2
        return cls(gammas=x[:p], betas=x[p:])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.gammas, self.betas])


@dataclass
class StateVector:
    """2^n complex amplitudes."""

    amplitudes: np.ndarray
    n_qubits: int


def objective_table(problem: Problem, dtype=np.float64) -> np.ndarray:
    """C(z) for every basis state, indexed little-endian."""
    n = problem.n_vars
    size = 1 << n
    idx = np.arange(size, dtype=np.uint64)
    table = np.zeros(size, dtype=dtype)
    for (i, j), w in problem.entries.items():
        differ = ((idx >> np.uint64(i)) ^ (idx >> np.uint64(j))) & np.uint64(1)
        # z_i z_j = +1 when bits agree, -1 when they differ
        table += w * (1.0 - 2.0 * differ.astype(dtype))
    return table


def spin_signs(n_qubits: int, i: int) -> np.ndarray:
    """z_i over all basis states as a float array of +-1."""
    idx = np.arange(1 << n_qubits, dtype=np.uint64)
    return 1.0 - 2.0 * ((idx >> np.uint64(i)) & np.uint64(1)).astype(np.float64)


def _apply_mixer(amp: np.ndarray, n_qubits: int, beta: float) -> np.ndarray:
    """In-place e^{-i beta X} on every qubit."""
    c = np.cos(beta)
    s = -1j * np.sin(beta)
    for q in range(n_qubits):
        view = amp.reshape(-1, 2, 1 << q)
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = c * a0 + s * a1
        view[:, 1, :] = s * a0 + c * a1
    return amp


def apply_qaoa(
    problem: Problem,
    angles: AngleSchedule,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
    table: np.ndarray | None = None,
) -> StateVector:
    """Run the p-layer circuit starting from the uniform superposition.

    ``table`` optionally supplies a precomputed objective table, reused
    across calls with the same problem.
    """
    n = problem.n_vars
    if n > qubit_cap:
        raise CapacityError(f"{n} qubits exceeds cap {qubit_cap}")
    if table is None:
        table = objective_table(problem)
    amp = np.full(1 << n, 2.0 ** (-n / 2.0), dtype=np.complex128)
    for gamma, beta in zip(angles.gammas, angles.betas):
        amp *= np.exp(0.5j * gamma * table)
        _apply_mixer(amp, n, beta)
    return StateVector(amplitudes=amp, n_qubits=n)


def probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def expectation_objective(state: StateVector, problem: Problem) -> float:
    """<C> = sum_z |amp(z)|^2 C(z)."""
    if problem.n_vars != state.n_qubits:
        raise DimensionError("state and problem dimensions differ")
    return float(probabilities(state) @ objective_table(problem))


def correlation(state: StateVector, i: int, j: int) -> float:
    """<Z_i Z_j> over the state."""
    n = state.n_qubits
    if not (0 <= i < n and 0 <= j < n):
        raise DimensionError(f"indices ({i},{j}) out of range for {n} qubits")
    if i == j:
        return 1.0
    probs = probabilities(state)
    return float(probs @ (spin_signs(n, i) * spin_signs(n, j)))


def correlation_matrix_full(state: StateVector) -> np.ndarray:
    """All pairwise <Z_i Z_j> via one weighted sign-matrix product."""
    n = state.n_qubits
    idx = np.arange(1 << n, dtype=np.uint64)
    signs = np.empty((1 << n, n))
    for q in range(n):
        signs[:, q] = 1.0 - 2.0 * ((idx >> np.uint64(q)) & np.uint64(1)).astype(np.float64)
    probs = probabilities(state)
    return (signs * probs[:, None]).T @ signs


def sample_bitstrings(state: StateVector, k: int, seed: int) -> np.ndarray:
    """K i.i.d. spin vectors drawn from |<z|Psi>|^2, shape (K, n)."""
    if k < 1:
        raise InvalidParameterError("need at least one sample")
    n = state.n_qubits
    rng = np.random.default_rng(seed)
    draws = rng.choice(1 << n, size=k, p=probabilities(state))
    bits = (draws[:, None] >> np.arange(n)) & 1
    return (1 - 2 * bits).astype(np.int8)


def sample_counts(state: StateVector, k: int, seed) -> np.ndarray:
    """Multinomial draw of K shots over basis states (counts per state)."""
    if k < 1:
        raise InvalidParameterError("need at least one sample")
    rng = np.random.default_rng(seed)
    return rng.multinomial(k, probabilities(state))


def correlation_from_counts(counts: np.ndarray, n_qubits: int, i: int, j: int) -> float:
    """Estimated <Z_i Z_j> from per-basis-state shot counts."""
    k = counts.sum()
    signs = spin_signs(n_qubits, i) * spin_signs(n_qubits, j)
    return float(np.dot(counts, signs) / k)


# -- variational angle search -----------------------------------------


def central_gradient(fun, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient."""
    g = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def multistart_minimize(fun, p: int, restarts: int, seed: int, gtol: float = 1e-8,
                        maxiter: int = 500):
    """Multi-start BFGS with central finite-difference gradients.

    Starts are uniform over gamma in [-pi, pi) and beta in [0, pi).
    Returns (best_x, best_value).
    """
    if restarts < 1:
        raise InvalidParameterError("need at least one restart")
    rng = np.random.default_rng(seed)
    best_x, best_val = None, np.inf
    for _ in range(restarts):
        x0 = np.concatenate([
            rng.uniform(-np.pi, np.pi, size=p),
            rng.uniform(0.0, np.pi, size=p),
        ])
        res = minimize(
            fun,
            x0,
            jac=lambda x: central_gradient(fun, x),
            method="BFGS",
            options={"gtol": gtol, "maxiter": maxiter},
        )
        if not np.isfinite(res.fun):
            raise ArithmeticError("non-finite objective during angle search")
        if res.fun < best_val:
            best_val, best_x = float(res.fun), res.x
    return best_x, best_val


def optimize_angles(
    problem: Problem,
    p: int,
    restarts: int,
    seed: int,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> tuple[AngleSchedule, float]:
    """Minimize <C>_p over (gammas, betas) via whole-graph emulation."""
    if problem.n_vars > qubit_cap:
        raise CapacityError(f"{problem.n_vars} qubits exceeds cap {qubit_cap}")
    table = objective_table(problem)

    def fun(x):
        angles = AngleSchedule.from_vector(x)
        state = apply_qaoa(problem, angles, qubit_cap=qubit_cap, table=table)
        return float(probabilities(state) @ table)

    best_x, best_val = multistart_minimize(fun, p, restarts, seed)
    return AngleSchedule.from_vector(best_x), best_val

"""Quality/hardness metrics and hardware cost models.

Approximation ratio is always measured on the ORIGINAL problem (cut
value for max-cut style problems, raw objective otherwise), no matter
which variant produced the candidate.  Also: frustration index,
rank-1-ness of I+W via singular values, spin overlap, circuit/sampling
time models, global depolarizing fidelity, and the linear run-time fit
t/n = A*n_iter + B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .problems import CUT_KINDS, Problem, as_spins, evaluate_cut, evaluate_objective


@dataclass
class HardwareTimingParams:
    """Gate/measurement/reset durations in seconds."""

    t_2q: float = 80e-9
    t_1q: float = 40e-9
    t_mes: float = 1e-6
    t_res: float = 200e-6
    t_overhead: float = 0.0

    def __post_init__(self):
        for name in ("t_2q", "t_1q", "t_mes", "t_res", "t_overhead"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be non-negative")


@dataclass
class RuntimeFit:
    """t/n = a_slope * n_iter + b_intercept with goodness of fit."""

    a_slope: float
    b_intercept: float
    r_squared: float
    b_stderr: float = 0.0


def approximation_ratio(original: Problem, z, c_opt: float) -> float:
    """alpha = value(z) / c_opt on the original problem.

    ``c_opt`` must be in the same convention: optimal cut for cut-kind
    problems, optimal (minimal) objective otherwise.
    """
    if c_opt == 0:
        raise InvalidParameterError("c_opt must be nonzero")
    z = as_spins(z, original.n_vars)
    if original.kind in CUT_KINDS:
        return evaluate_cut(original, z) / c_opt
    return evaluate_objective(original, z) / c_opt


def optimum_value(problem: Problem, z_opt) -> float:
    """The c_opt convention for a known optimal spin vector."""
    if problem.kind in CUT_KINDS:
        return evaluate_cut(problem, z_opt)
    return evaluate_objective(problem, z_opt)


def frustration_index(problem: Problem, z_opt) -> float:
    """f = 1/2 + (sum_ij W_ij z_i z_j) / (2 sum_ij |W_ij|), in [0, 1].

    Zero when every weighted interaction is satisfied at z_opt.
    """
    z = as_spins(z_opt, problem.n_vars)
    _, _, ww = problem.edge_arrays()
    denom = float(np.abs(ww).sum())
    if denom == 0.0:
        raise InvalidParameterError("frustration undefined for an empty problem")
    return 0.5 + evaluate_objective(problem, z) / (2.0 * denom)


def normalized_gap(problem: Problem) -> float:
    """Rank-1-ness of I + W: (sigma_2 - sigma_1) / (sigma_N - sigma_1)
    with singular values sorted in descending order.

    Equals 1 exactly when I + W is rank 1; an all-equal (degenerate)
    spectrum returns 0 by convention.
    """
    if problem.n_vars < 2:
        raise InvalidParameterError("need at least two variables")
    mat = np.eye(problem.n_vars) + problem.dense()
    sigma = np.linalg.svd(mat, compute_uv=False)  # descending
    spread = sigma[-1] - sigma[0]
    if spread == 0.0:
        return 0.0
    return float((sigma[1] - sigma[0]) / spread)


def overlap(z, z_opt) -> float:
    """Squared mean agreement q^2 = ((1/N) sum_i z_opt_i z_i)^2."""
    z = as_spins(z)
    z_opt = as_spins(z_opt)
    if len(z) != len(z_opt):
        raise DimensionError("spin vectors differ in length")
    q = float(np.mean(z.astype(np.float64) * z_opt))
    return q * q


def count_nonzero_terms(problem: Problem) -> int:
    """Stored couplings (entries below the sparsity threshold were
    already dropped at construction time)."""
    return problem.n_terms


# -- hardware cost models ----------------------------------------------


def circuit_time(n_qubits: int, p: int, params: HardwareTimingParams | None = None) -> float:
    """One-shot duration of the depth-p circuit on an all-to-all-routed
    square-lattice layout:

        t_circ = 3Np t_2q + [2(2N+1)p + 1] t_1q + t_mes + t_res.
    """
    if n_qubits < 1 or p < 1:
        raise InvalidParameterError("need positive n_qubits and p")
    params = params or HardwareTimingParams()
    return (
        3 * n_qubits * p * params.t_2q
        + (2 * (2 * n_qubits + 1) * p + 1) * params.t_1q
        + params.t_mes
        + params.t_res
    )


def sampling_time(k: int, n_qubits: int, p: int,
                  params: HardwareTimingParams | None = None) -> float:
    """Collection time of K shots: t(K) = t_overhead + K * t_circ."""
    if k < 1:
        raise InvalidParameterError("need K >= 1")
    params = params or HardwareTimingParams()
    return params.t_overhead + k * circuit_time(n_qubits, p, params)


def fidelity_model(f: float, n_qubits: int = 0, p: int = 0,
                   n_2q: int | None = None) -> float:
    """Global circuit fidelity F = f^(number of two-qubit gates).

    Defaults to the naive swap-network count 3pN^2/2; pass ``n_2q`` to
    use an explicit gate count instead.
    """
    if not (0.0 < f <= 1.0):
        raise InvalidParameterError("per-gate fidelity must lie in (0, 1]")
    if n_2q is None:
        if n_qubits < 1 or p < 1:
            raise InvalidParameterError("need n_qubits and p (or explicit n_2q)")
        n_2q = 3 * p * n_qubits * n_qubits / 2
    return float(f ** n_2q)


def fit_runtime_model(rows) -> RuntimeFit:
    """Least squares for t/n = A*n_iter + B over (n_terms, n_iter, seconds).

    Returns slope, intercept, R^2, and the intercept's standard error
    (so "indistinguishable from zero" is checkable).
    """
    rows = list(rows)
    if len(rows) < 2:
        raise InvalidParameterError("need at least two rows")
    x = np.array([r[1] for r in rows], dtype=np.float64)
    y = np.array([r[2] / r[0] for r in rows], dtype=np.float64)
    if np.all(x == x[0]):
        raise InvalidParameterError("all n_iter values are equal; fit is degenerate")
    design = np.column_stack([x, np.ones_like(x)])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    a, b = float(coef[0]), float(coef[1])
    resid = y - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    dof = max(len(x) - 2, 1)
    var = ss_res / dof
    xtx_inv = np.linalg.inv(design.T @ design)
    b_stderr = float(np.sqrt(var * xtx_inv[1, 1]))
    return RuntimeFit(a_slope=a, b_intercept=b, r_squared=max(min(r2, 1.0), 0.0),
                      b_stderr=b_stderr)

"""Problem representation, generators, MPES ingestion, and file I/O.

A :class:`Problem` is a sparse symmetric coupling matrix over N spin
variables.  Each unordered pair is stored once; the objective is

    C(z) = sum_{i<j} w_ij * z_i * z_j

which equals (1/2) z^T W z for the symmetric dense matrix W with both
orderings populated.  Spin vectors are plain numpy arrays over {-1, +1}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DimensionError,
    FormatError,
    IntegrityError,
    InvalidParameterError,
)


class ProblemKind(str, Enum):
    MAXCUT_REGULAR = "maxcut_regular"
    SK = "sk"
    MPES = "mpes"
    PRECONDITIONED = "preconditioned"
    IDEAL_INFINITE_DEPTH = "ideal_infinite_depth"
    CUSTOM = "custom"


# Kinds whose approximation ratio is measured in cut space.
CUT_KINDS = frozenset({ProblemKind.MAXCUT_REGULAR, ProblemKind.MPES})


@dataclass(eq=False)
class Problem:
    """Sparse symmetric spin-coupling problem.

    ``entries`` maps (i, j) with i < j to a real weight.  Treated as
    immutable after construction; derived views are cached lazily.
    """

    n_vars: int
    entries: dict[tuple[int, int], float]
    kind: ProblemKind = ProblemKind.CUSTOM
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_vars < 1:
            raise InvalidParameterError("n_vars must be positive")
        normalized = {}
        for (i, j), w in self.entries.items():
            if i == j:
                raise IntegrityError(f"self-loop entry ({i},{i}) is not allowed")
            if not (0 <= i < self.n_vars and 0 <= j < self.n_vars):
                raise IntegrityError(f"entry ({i},{j}) outside [0,{self.n_vars})")
            key = (i, j) if i < j else (j, i)
            if key in normalized and normalized[key] != w:
                raise IntegrityError(f"conflicting weights for pair {key}")
            normalized[key] = float(w)
        self.entries = normalized
        self._cache = {}

    # -- derived views -------------------------------------------------

    @property
    def n_terms(self) -> int:
        return len(self.entries)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(ii, jj, ww) arrays over stored unordered pairs."""
        if "edges" not in self._cache:
            if self.entries:
                pairs = sorted(self.entries)
                ii = np.array([p[0] for p in pairs], dtype=np.int64)
                jj = np.array([p[1] for p in pairs], dtype=np.int64)
                ww = np.array([self.entries[p] for p in pairs], dtype=np.float64)
            else:
                ii = np.empty(0, dtype=np.int64)
                jj = np.empty(0, dtype=np.int64)
                ww = np.empty(0, dtype=np.float64)
            self._cache["edges"] = (ii, jj, ww)
        return self._cache["edges"]

    def dense(self) -> np.ndarray:
        """Symmetric dense matrix W with zero diagonal."""
        if "dense" not in self._cache:
            w = np.zeros((self.n_vars, self.n_vars))
            ii, jj, ww = self.edge_arrays()
            w[ii, jj] = ww
            w[jj, ii] = ww
            self._cache["dense"] = w
        return self._cache["dense"]

    def neighbors(self) -> list[list[tuple[int, float]]]:
        """Adjacency list: neighbors()[i] = [(j, w_ij), ...]."""
        if "adj" not in self._cache:
            adj = [[] for _ in range(self.n_vars)]
            for (i, j), w in self.entries.items():
                adj[i].append((j, w))
                adj[j].append((i, w))
            self._cache["adj"] = adj
        return self._cache["adj"]

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric adjacency in CSR form (indptr, indices, weights)."""
        if "csr" not in self._cache:
            adj = self.neighbors()
            indptr = np.zeros(self.n_vars + 1, dtype=np.int64)
            for i, row in enumerate(adj):
                indptr[i + 1] = indptr[i] + len(row)
            indices = np.empty(indptr[-1], dtype=np.int64)
            weights = np.empty(indptr[-1], dtype=np.float64)
            pos = 0
            for row in adj:
                for j, w in row:
                    indices[pos] = j
                    weights[pos] = w
                    pos += 1
            self._cache["csr"] = (indptr, indices, weights)
        return self._cache["csr"]

    def degrees(self) -> np.ndarray:
        ii, jj, _ = self.edge_arrays()
        deg = np.zeros(self.n_vars, dtype=np.int64)
        np.add.at(deg, ii, 1)
        np.add.at(deg, jj, 1)
        return deg

    def total_weight(self) -> float:
        _, _, ww = self.edge_arrays()
        return float(ww.sum())


def as_spins(z, n: int | None = None) -> np.ndarray:
    """Validate and return a {-1,+1} spin vector as an int8 array."""
    z = np.asarray(z)
    if z.ndim != 1:
        raise DimensionError("spin vector must be one-dimensional")
    if n is not None and z.shape[0] != n:
        raise DimensionError(f"spin vector has length {z.shape[0]}, expected {n}")
    if not np.all(np.abs(z) == 1):
        raise InvalidParameterError("spin values must be -1 or +1")
    return z.astype(np.int8)


def evaluate_objective(problem: Problem, z) -> float:
    """C(z) = sum over unordered pairs of w_ij z_i z_j."""
    z = as_spins(z, problem.n_vars)
    ii, jj, ww = problem.edge_arrays()
    return float(np.dot(ww, z[ii] * z[jj]))


def evaluate_cut(problem: Problem, z) -> float:
    """Cut value = (1/2) total weight - (1/2) C(z)."""
    z = as_spins(z, problem.n_vars)
    return 0.5 * problem.total_weight() - 0.5 * evaluate_objective(problem, z)


# -- generators --------------------------------------------------------


def gen_random_regular(n: int, d: int, seed: int) -> Problem:
    """Random d-regular unit-weight graph via the pairing model.

    Restarts from scratch whenever the pairing produces a self-loop or a
    multi-edge, so the output is simple with all degrees exactly d.
    """
    if d >= n:
        raise InvalidParameterError(f"need d < n, got d={d}, n={n}")
    if (n * d) % 2 != 0:
        raise InvalidParameterError(f"n*d must be even, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    while True:
        stubs = np.repeat(np.arange(n), d)
        rng.shuffle(stubs)
        edges = set()
        ok = True
        for a, b in zip(stubs[0::2], stubs[1::2]):
            if a == b:
                ok = False
                break
            key = (int(a), int(b)) if a < b else (int(b), int(a))
            if key in edges:
                ok = False
                break
            edges.add(key)
        if ok:
            entries = {e: 1.0 for e in edges}
            return Problem(
                n_vars=n,
                entries=entries,
                kind=ProblemKind.MAXCUT_REGULAR,
                provenance={"generator": "pairing_model", "d": d, "seed": seed},
            )


def gen_sk(n: int, seed: int) -> Problem:
    """Complete graph with i.i.d. standard-normal weights."""
    if n < 2:
        raise InvalidParameterError(f"need n >= 2, got n={n}")
    rng = np.random.default_rng(seed)
    entries = {}
    for i in range(n):
        row = rng.standard_normal(n - 1 - i)
        for k, j in enumerate(range(i + 1, n)):
            entries[(i, j)] = float(row[k])
    return Problem(
        n_vars=n,
        entries=entries,
        kind=ProblemKind.SK,
        provenance={"generator": "sk_gaussian", "seed": seed},
    )


# -- pruning and reconstruction ---------------------------------------


@dataclass
class PruneMap:
    """Record of dangling-branch removal and the surviving components.

    ``removed`` lists (leaf, anchor, weight) in removal order; replaying
    it in reverse reattaches every leaf to a vertex already present.
    ``components`` partitions the surviving non-isolated vertices.
    """

    removed: list[tuple[int, int, float]]
    components: list[list[int]]


def prune_dangling(problem: Problem) -> tuple[Problem, PruneMap]:
    """Iteratively strip degree-1 vertices; core has min degree >= 2."""
    adj = {i: dict() for i in range(problem.n_vars)}
    for (i, j), w in problem.entries.items():
        adj[i][j] = w
        adj[j][i] = w
    removed = []
    queue = [v for v in adj if len(adj[v]) == 1]
    while queue:
        leaf = queue.pop()
        if len(adj[leaf]) != 1:
            continue
        (anchor, w), = adj[leaf].items()
        removed.append((leaf, anchor, w))
        del adj[leaf][anchor]
        del adj[anchor][leaf]
        if len(adj[anchor]) == 1:
            queue.append(anchor)
    entries = {}
    for i, row in adj.items():
        for j, w in row.items():
            if i < j:
                entries[(i, j)] = w
    core = Problem(
        n_vars=problem.n_vars,
        entries=entries,
        kind=problem.kind,
        provenance=dict(problem.provenance, pruned=True),
    )
    return core, PruneMap(removed=removed, components=connected_components(core))


def connected_components(problem: Problem) -> list[list[int]]:
    """Connected components among vertices with at least one edge."""
    adj = problem.neighbors()
    seen = [False] * problem.n_vars
    comps = []
    for start in range(problem.n_vars):
        if seen[start] or not adj[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v)
            for u, _ in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        comps.append(sorted(comp))
    comps.sort(key=len, reverse=True)
    return comps


def extract_component(problem: Problem, vertices: list[int]) -> tuple[Problem, dict[int, int]]:
    """Sub-problem induced on ``vertices``, plus original->local index map."""
    index = {v: k for k, v in enumerate(sorted(vertices))}
    entries = {}
    for (i, j), w in problem.entries.items():
        if i in index and j in index:
            a, b = index[i], index[j]
            entries[(a, b) if a < b else (b, a)] = w
    sub = Problem(
        n_vars=len(index),
        entries=entries,
        kind=problem.kind,
        provenance=dict(problem.provenance, component=sorted(vertices)[:4]),
    )
    return sub, index


def reconstruct_solution(core_z, pmap: PruneMap, problem: Problem) -> np.ndarray:
    """Reattach pruned leaves so each removed edge is locally satisfied.

    ``core_z`` is a full-length spin vector valid on the surviving core
    (entries at removed vertices are ignored and overwritten).
    """
    z = as_spins(core_z, problem.n_vars).copy()
    for leaf, anchor, w in reversed(pmap.removed):
        key = (leaf, anchor) if leaf < anchor else (anchor, leaf)
        if problem.entries.get(key) != w:
            raise IntegrityError(f"prune map edge {key} missing from problem")
        z[leaf] = -int(math.copysign(1.0, w)) * z[anchor] if w != 0 else z[anchor]
    return z


# -- MPES ingestion ----------------------------------------------------


def load_mpes(path) -> tuple[Problem, PruneMap]:
    """Load a grid-energy (MPES) problem from a bus-line table.

    Expected columns: bus_from, bus_to, R, X (header optional; comma or
    whitespace delimited).  Weights are 1/sqrt(R^2 + X^2); parallel lines
    between the same bus pair are merged by summing their weights.
    Returns the pruned problem plus the prune/component map.
    """
    raw_entries: dict[tuple[int, int], float] = {}
    bus_ids: dict[str, int] = {}

    def bus_index(tag: str) -> int:
        if tag not in bus_ids:
            bus_ids[tag] = len(bus_ids)
        return bus_ids[tag]

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f for f in line.replace(",", " ").split() if f]
            if lineno == 1 and any(not _is_number(f) for f in fields[2:4]):
                continue  # header row
            if len(fields) < 4:
                raise FormatError(f"{path}:{lineno}: expected 4 columns, got {len(fields)}")
            ftag, ttag = fields[0], fields[1]
            try:
                r, x = float(fields[2]), float(fields[3])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric R/X fields") from exc
            if r == 0.0 and x == 0.0:
                raise FormatError(f"{path}:{lineno}: line with R=X=0 has undefined weight")
            a, b = bus_index(ftag), bus_index(ttag)
            if a == b:
                raise FormatError(f"{path}:{lineno}: line connects bus {ftag} to itself")
            key = (a, b) if a < b else (b, a)
            w = 1.0 / math.hypot(r, x)
            raw_entries[key] = raw_entries.get(key, 0.0) + w

    if not raw_entries:
        raise FormatError(f"{path}: no line records found")
    raw = Problem(
        n_vars=len(bus_ids),
        entries=raw_entries,
        kind=ProblemKind.MPES,
        provenance={
            "source": str(path),
            "parallel_lines": "merged_by_weight_sum",
            "raw_n_vars": len(bus_ids),
            "raw_n_terms": len(raw_entries),
        },
    )
    core, pmap = prune_dangling(raw)
    core.provenance.update(raw.provenance)
    return core, pmap


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# -- edge-list file format --------------------------------------------

_KIND_BY_NAME = {k.value: k for k in ProblemKind}


def write_problem(problem: Problem, path) -> None:
    """Write the text edge-list format: "qubo <N>" then "<i> <j> <w>" lines.

    Kind and provenance ride along as '#'-prefixed comment lines so that
    minimal parsers of the plain format still work.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"qubo {problem.n_vars}\n")
        fh.write(f"# kind {problem.kind.value}\n")
        if problem.provenance:
            fh.write(f"# provenance {json.dumps(problem.provenance, default=str)}\n")
        for (i, j) in sorted(problem.entries):
            fh.write(f"{i} {j} {problem.entries[(i, j)]!r}\n")


def read_problem(path) -> Problem:
    """Inverse of :func:`write_problem`; round-trips weights bitwise."""
    entries: dict[tuple[int, int], float] = {}
    n_vars = None
    kind = ProblemKind.CUSTOM
    provenance: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split(None, 1)
                if fields and fields[0] == "kind" and len(fields) > 1:
                    kind = _KIND_BY_NAME.get(fields[1].strip(), ProblemKind.CUSTOM)
                elif fields and fields[0] == "provenance" and len(fields) > 1:
                    try:
                        provenance = json.loads(fields[1])
                    except json.JSONDecodeError:
                        pass
                continue
            if n_vars is None:
                parts = line.split()
                if len(parts) != 2 or parts[0] != "qubo":
                    raise FormatError(f"{path}:{lineno}: expected header 'qubo <N>'")
                try:
                    n_vars = int(parts[1])
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad vertex count") from exc
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected '<i> <j> <weight>'")
            try:
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: malformed edge line") from exc
            if i == j:
                raise FormatError(f"{path}:{lineno}: self-loop ({i},{i})")
            key = (i, j) if i < j else (j, i)
            if key in entries:
                if entries[key] != w:
                    raise IntegrityError(
                        f"{path}:{lineno}: duplicate pair {key} with conflicting weights"
                    )
                raise IntegrityError(f"{path}:{lineno}: duplicate pair {key}")
            entries[key] = w
    if n_vars is None:
        raise FormatError(f"{path}: missing 'qubo <N>' header")
    return Problem(n_vars=n_vars, entries=entries, kind=kind, provenance=provenance)

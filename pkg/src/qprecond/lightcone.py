"""Light-cone decomposition of QAOA correlations on sparse problems.

A depth-p circuit spreads coherence p graph steps, so <Z_i Z_j> only
depends on the neighborhood of the pair.  For each pair within graph
distance 2p we emulate the QAOA on a small subgraph; pairs further apart
have exactly zero correlation by the global sign-flip symmetry.

Two subgraph notions appear:

* the *light-cone subgraph* (union of the two p-balls, induced edges),
  which is the documented object with the closed-form size bound;
* the *dependency subgraph* actually emulated: the connected component
  of (i, j) using only edges with an endpoint within distance p-1 of i
  or j.  Edges between two fringe vertices commute through the
  back-propagated observable and never affect the value, so dropping
  them is exact and frequently turns a cyclic neighborhood into a
  cacheable tree.

Tree-shaped dependency subgraphs are canonically labeled (AHU-style,
marks and edge weights folded into the label) and their correlation
values cached, so the number of distinct emulations stays N-independent
at shallow p.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DimensionError, InvalidParameterError
from .problems import Problem, ProblemKind
from .qaoa import (
    AngleSchedule,
    apply_qaoa,
    multistart_minimize,
    probabilities,
    sample_counts,
    spin_signs,
)

DEFAULT_THRESHOLD = 1e-12


@dataclass
class LightconeSubgraph:
    """Induced subgraph on the union of the p-balls around a pair."""

    vertices: list[int]                      # original indices, sorted
    edges: list[tuple[int, int, float]]      # local indices
    i_local: int
    j_local: int

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


@dataclass
class CorrelationCache:
    """Canonical-subgraph-key -> correlation value, with hit/miss counters.

    Values depend on (p, angles); ``fingerprint`` guards against reuse
    across different circuits.  By default only tree-shaped subgraphs
    are cached; ``cache_nontrees`` extends caching to arbitrary
    subgraphs via an exact (branch-bounded) canonical labeling, which
    pays off when one cache serves a whole ensemble of instances.
    """

    fingerprint: tuple = ()
    values: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0
    cache_nontrees: bool = False


def _adjacency(problem: Problem) -> list[list[tuple[int, float]]]:
    return problem.neighbors()


def _ball(adj, v: int, radius: int) -> set[int]:
    seen = {v}
    frontier = [v]
    for _ in range(radius):
        nxt = []
        for u in frontier:
            for w, _ in adj[u]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return seen


def lightcone_subgraph(problem: Problem, i: int, j: int, p: int):
    """Union of the p-balls around i and j, or None when they are disjoint."""
    n = problem.n_vars
    if not (0 <= i < n and 0 <= j < n):
        raise DimensionError(f"indices ({i},{j}) out of range")
    if i == j:
        raise InvalidParameterError("need two distinct endpoints")
    if p < 1:
        raise InvalidParameterError("need p >= 1")
    adj = _adjacency(problem)
    ball_i = _ball(adj, i, p)
    ball_j = _ball(adj, j, p)
    if not (ball_i & ball_j):
        return None
    vertices = sorted(ball_i | ball_j)
    index = {v: k for k, v in enumerate(vertices)}
    edges = []
    for (a, b), w in problem.entries.items():
        if a in index and b in index:
            edges.append((index[a], index[b], w))
    return LightconeSubgraph(
        vertices=vertices, edges=edges, i_local=index[i], j_local=index[j]
    )


def subgraph_size_bound(d: int, p: int, n: int) -> int:
    """Closed-form max vertex count of a pair light cone at max degree d."""
    if d == 2:
        return min(1 + 4 * p, n)
    if d < 2:
        return min(2 + 2 * p, n)
    return min(1 + (2 * d * ((d - 1) ** p - 1)) // (d - 2), n)


def is_tree(sub: LightconeSubgraph) -> bool:
    """True iff connected with exactly n_vertices - 1 edges."""
    n = sub.n_vertices
    if len(sub.edges) != n - 1:
        return False
    adj = [[] for _ in range(n)]
    for a, b, _ in sub.edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                count += 1
                stack.append(u)
    return count == n


def canonical_tree_key(sub: LightconeSubgraph):
    """AHU-style canonical form of the marked weighted tree.

    Rooted at the tree center (one or two, via leaf stripping); marks on
    the target pair and edge weights are folded into the labels, so two
    subgraphs share a key exactly when an isomorphism maps edges to
    equal-weight edges and the marked pair onto the marked pair.
    """
    n = sub.n_vertices
    marks = [0] * n
    marks[sub.i_local] = 1
    marks[sub.j_local] = 1
    if n == 1:
        return (1, marks[0])
    adj = [[] for _ in range(n)]
    for a, b, w in sub.edges:
        adj[a].append((b, w))
        adj[b].append((a, w))

    # tree center via iterative leaf removal
    degree = [len(a) for a in adj]
    layer = [v for v in range(n) if degree[v] <= 1]
    removed = 0
    remaining = list(range(n))
    while n - removed > 2:
        nxt = []
        for v in layer:
            removed += 1
            for u, _ in adj[v]:
                degree[u] -= 1
                if degree[u] == 1:
                    nxt.append(u)
        layer = nxt
    centers = layer if layer else remaining

    def encode(v: int, parent: int):
        children = sorted(
            (w, encode(u, v)) for u, w in adj[v] if u != parent
        )
        return (marks[v], tuple(children))

    if len(centers) == 1:
        return ("c1", encode(centers[0], -1))
    c1, c2 = centers
    w_mid = next(w for u, w in adj[c1] if u == c2)
    halves = sorted([encode(c1, c2), encode(c2, c1)])
    return ("c2", w_mid, tuple(halves))


def canonical_graph_key(sub: LightconeSubgraph, budget: int = 4096):
    """Canonical form of an arbitrary connected marked weighted subgraph.

    Decomposes into the 2-core plus pendant trees: pendant trees are
    folded into their core vertex's color via the same AHU encoding used
    for whole trees (marks and weights included), then the small core is
    canonically labeled by a branch-on-ties search over color-minimal
    extensions.  Every rule consults only isomorphism-invariant data, so
    isomorphic marked subgraphs produce equal keys.  Returns None if the
    tie budget is exhausted (caller emulates directly) or the graph has
    no cycle (use :func:`canonical_tree_key`).
    """
    n = sub.n_vertices
    marks = [0] * n
    marks[sub.i_local] = 1
    marks[sub.j_local] = 1
    adj = [[] for _ in range(n)]
    for a, b, w in sub.edges:
        adj[a].append((b, w))
        adj[b].append((a, w))

    # peel to the 2-core
    deg = [len(x) for x in adj]
    in_core = [True] * n
    queue = [v for v in range(n) if deg[v] <= 1]
    while queue:
        v = queue.pop()
        in_core[v] = False
        for u, _ in adj[v]:
            if in_core[u]:
                deg[u] -= 1
                if deg[u] == 1:
                    queue.append(u)
    core = [v for v in range(n) if in_core[v]]
    if not core:
        return None

    def encode_pendant(v, parent):
        children = sorted(
            (w, encode_pendant(u, v)) for u, w in adj[v]
            if u != parent and not in_core[u]
        )
        return (marks[v], tuple(children))

    color = {}
    for c in core:
        pendants = sorted(
            (w, encode_pendant(u, c)) for u, w in adj[c] if not in_core[u]
        )
        color[c] = (marks[c], tuple(pendants))

    core_edges = [(a, b, w) for a, b, w in sub.edges if in_core[a] and in_core[b]]
    best = None
    steps = [budget]

    def extend(order, pos):
        nonlocal best
        if steps[0] <= 0:
            raise RuntimeError
        steps[0] -= 1
        if len(order) == len(core):
            enc = (
                tuple(color[v] for v in order),
                tuple(sorted(
                    (min(pos[a], pos[b]), max(pos[a], pos[b]), w)
                    for a, b, w in core_edges
                )),
            )
            if best is None or enc < best:
                best = enc
            return
        sigs = {}
        for v in core:
            if v in pos:
                continue
            labeled = sorted((pos[u], w) for u, w in adj[v] if u in pos)
            if labeled:
                sigs[v] = (tuple(labeled), color[v])
        min_sig = min(sigs.values())
        for v, sig in sigs.items():
            if sig == min_sig:
                pos[v] = len(order)
                order.append(v)
                extend(order, pos)
                order.pop()
                del pos[v]

    min_color = min(color[v] for v in core)
    try:
        for start in core:
            if color[start] == min_color:
                extend([start], {start: 0})
    except RuntimeError:
        return None
    return ("g", n, best)


def _dependency_subgraph(problem: Problem, adj, i: int, j: int, p: int,
                         inner: set[int]) -> LightconeSubgraph:
    """Connected component of (i, j) using only edges touching ``inner``."""
    nbrs: dict[int, list[tuple[int, float]]] = {}
    for v in inner:
        for u, w in adj[v]:
            nbrs.setdefault(v, []).append((u, w))
            # edges are symmetric; record the reverse direction too so the
            # component walk can cross fringe vertices back into the core
            nbrs.setdefault(u, [])
            if u not in inner:
                nbrs[u].append((v, w))
    seen = {i}
    stack = [i]
    while stack:
        v = stack.pop()
        for u, _ in nbrs.get(v, ()):  # isolated endpoints have no entry
            if u not in seen:
                seen.add(u)
                stack.append(u)
    vertices = sorted(seen)
    index = {v: k for k, v in enumerate(vertices)}
    edges = []
    for v in vertices:
        if v in inner:
            for u, w in adj[v]:
                if u in index and (v < u or u not in inner):
                    edges.append((index[v], index[u], w))
    return LightconeSubgraph(
        vertices=vertices, edges=edges, i_local=index[i], j_local=index[j]
    )


def _local_problem(sub: LightconeSubgraph) -> Problem:
    entries = {}
    for a, b, w in sub.edges:
        entries[(a, b) if a < b else (b, a)] = w
    return Problem(n_vars=sub.n_vertices, entries=entries, kind=ProblemKind.CUSTOM)


def _emulate_correlation(sub: LightconeSubgraph, angles: AngleSchedule,
                         qubit_cap: int) -> float:
    state = apply_qaoa(_local_problem(sub), angles, qubit_cap=qubit_cap)
    probs = probabilities(state)
    signs = spin_signs(sub.n_vertices, sub.i_local) * spin_signs(
        sub.n_vertices, sub.j_local
    )
    return float(probs @ signs)


def _sampled_correlation(sub: LightconeSubgraph, angles: AngleSchedule,
                         k: int, seed, qubit_cap: int) -> float:
    state = apply_qaoa(_local_problem(sub), angles, qubit_cap=qubit_cap)
    counts = sample_counts(state, k, seed)
    signs = spin_signs(sub.n_vertices, sub.i_local) * spin_signs(
        sub.n_vertices, sub.j_local
    )
    return float(np.dot(counts, signs) / k)


def pairs_within_2p(problem: Problem, p: int):
    """All unordered pairs within graph distance 2p (the only candidates
    for a nonzero correlation)."""
    adj = _adjacency(problem)
    for v in range(problem.n_vars):
        for u in _ball(adj, v, 2 * p):
            if u > v:
                yield (v, u)


def pair_correlation(problem: Problem, i: int, j: int, p: int,
                     angles: AngleSchedule, cache: CorrelationCache | None = None,
                     sampling: tuple[int, object] | None = None,
                     qubit_cap: int = 26, stats: dict | None = None) -> float:
    """<Z_i Z_j> via the dependency subgraph, using the tree cache."""
    adj = _adjacency(problem)
    ball_i = _ball(adj, i, p)
    if j not in _ball(adj, i, 2 * p):
        return 0.0
    ball_j = _ball(adj, j, p)
    if not (ball_i & ball_j):
        return 0.0
    inner = _ball(adj, i, p - 1) | _ball(adj, j, p - 1)
    sub = _dependency_subgraph(problem, adj, i, j, p, inner)
    return _pair_value(sub, angles, cache, sampling, (i, j), qubit_cap, stats)


def _pair_value(sub, angles, cache, sampling, pair, qubit_cap, stats):
    if sub.n_vertices > qubit_cap:
        raise CapacityError(
            f"pair {pair}: subgraph of {sub.n_vertices} vertices exceeds cap {qubit_cap}"
        )
    if stats is not None:
        stats["max_dependency_size"] = max(
            stats.get("max_dependency_size", 0), sub.n_vertices
        )
    if sampling is not None:
        k, seed = sampling
        if k < 1:
            raise InvalidParameterError("sample count must be >= 1")
        pair_seed = np.random.SeedSequence(
            entropy=int(seed), spawn_key=(pair[0], pair[1])
        )
        if stats is not None:
            stats["emulations"] = stats.get("emulations", 0) + 1
        return _sampled_correlation(sub, angles, k, pair_seed, qubit_cap)
    if cache is not None:
        if is_tree(sub):
            key = canonical_tree_key(sub)
        elif cache.cache_nontrees:
            key = canonical_graph_key(sub)
        else:
            key = None
        if key is not None:
            if key in cache.values:
                cache.hits += 1
                return cache.values[key]
            value = _emulate_correlation(sub, angles, qubit_cap)
            cache.values[key] = value
            cache.misses += 1
            if stats is not None:
                stats["emulations"] = stats.get("emulations", 0) + 1
            return value
    if stats is not None:
        stats["emulations"] = stats.get("emulations", 0) + 1
        if cache is not None:
            stats["noncached"] = stats.get("noncached", 0) + 1
    return _emulate_correlation(sub, angles, qubit_cap)


def angle_fingerprint(p: int, angles: AngleSchedule) -> tuple:
    return (p, tuple(np.round(angles.gammas, 15)), tuple(np.round(angles.betas, 15)))


def build_correlation_matrix(
    problem: Problem,
    p: int,
    angles: AngleSchedule,
    sampling: tuple[int, object] | None = None,
    cache: CorrelationCache | None = None,
    use_cache: bool = True,
    qubit_cap: int = 26,
    threshold: float = DEFAULT_THRESHOLD,
    stats: dict | None = None,
    cache_nontrees: bool = False,
) -> Problem:
    """Assemble the preconditioned problem Z_ij = -<Z_i Z_j> for all
    pairs within distance 2p, dropping entries below ``threshold``.

    In sampled mode each pair's subcircuit draws its own K shots from a
    seed derived from (seed, i, j); the cache is bypassed since every
    pair's estimate is an independent random variable.
    """
    if angles.p != p:
        raise InvalidParameterError(f"angle schedule has p={angles.p}, expected {p}")
    if use_cache and sampling is None:
        if cache is None:
            cache = CorrelationCache(fingerprint=angle_fingerprint(p, angles),
                                     cache_nontrees=cache_nontrees)
        elif not cache.values:
            cache.fingerprint = angle_fingerprint(p, angles)
        elif cache.fingerprint != angle_fingerprint(p, angles):
            raise InvalidParameterError("cache was built for different angles")
    else:
        cache = None

    adj = _adjacency(problem)
    balls_inner = [_ball(adj, v, p - 1) for v in range(problem.n_vars)]
    entries = {}
    for i, j in pairs_within_2p(problem, p):
        inner = balls_inner[i] | balls_inner[j]
        sub = _dependency_subgraph(problem, adj, i, j, p, inner)
        value = _pair_value(sub, angles, cache, sampling, (i, j), qubit_cap, stats)
        z = -value
        if abs(z) >= threshold:
            entries[(i, j)] = z
        if stats is not None:
            stats["pairs"] = stats.get("pairs", 0) + 1
    if stats is not None and cache is not None:
        stats["tree_hits"] = cache.hits
        stats["tree_misses"] = cache.misses
        stats["distinct_emulations"] = cache.misses + stats.get("noncached", 0)
    provenance = {
        "parent_kind": problem.kind.value,
        "p": p,
        "engine": "lightcone",
        "gammas": [float(g) for g in angles.gammas],
        "betas": [float(b) for b in angles.betas],
    }
    if sampling is not None:
        provenance["K"] = int(sampling[0])
    return Problem(
        n_vars=problem.n_vars,
        entries=entries,
        kind=ProblemKind.PRECONDITIONED,
        provenance=provenance,
    )


def expectation_lightcone(problem: Problem, p: int, angles: AngleSchedule,
                          cache: CorrelationCache | None = None,
                          qubit_cap: int = 26) -> float:
    """<C>_p = sum_edges w_ij <Z_i Z_j>, each term via its light cone."""
    if cache is None:
        cache = CorrelationCache(fingerprint=angle_fingerprint(p, angles),
                                 cache_nontrees=True)
    adj = _adjacency(problem)
    balls_inner = [_ball(adj, v, p - 1) for v in range(problem.n_vars)]
    total = 0.0
    for (i, j), w in problem.entries.items():
        inner = balls_inner[i] | balls_inner[j]
        sub = _dependency_subgraph(problem, adj, i, j, p, inner)
        total += w * _pair_value(sub, angles, cache, None, (i, j), qubit_cap, None)
    return total


def optimize_angles_lightcone(problem: Problem, p: int, restarts: int, seed: int,
                              qubit_cap: int = 26) -> tuple[AngleSchedule, float]:
    """Angle search minimizing the light-cone expectation of C.

    Used for sparse problems too large for whole-graph emulation; a
    fresh cache is built per objective evaluation since cached values
    depend on the angles.
    """

    def fun(x):
        angles = AngleSchedule.from_vector(x)
        return expectation_lightcone(problem, p, angles, qubit_cap=qubit_cap)

    best_x, best_val = multistart_minimize(fun, p, restarts, seed)
    return AngleSchedule.from_vector(best_x), best_val

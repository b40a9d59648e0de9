"""Dominant-eigenpair machinery for constrained channels.

A constraint on sequences over a finite alphabet is represented by a
nonnegative irreducible weight matrix M whose (a, b) entry counts (or
weights) the allowed transitions a -> b.  The capacity of the constraint
is lg of the dominant eigenvalue, and the entropy-maximizing Markov chain
on the graph is built from the dominant left/right eigenvectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

LG2 = math.log(2.0)


class ReducibleGraph(ValueError):
    """Raised when a weight matrix is not strongly connected."""

    def __init__(self, components):
        self.components = components
        super().__init__(
            "graph is reducible; strongly connected components: %r" % (components,)
        )


class NoConvergence(RuntimeError):
    pass


class EmptyModel(ValueError):
    pass


class ForbiddenPath(ValueError):
    pass


def strongly_connected_components(weights: np.ndarray) -> list[list[int]]:
    """Tarjan's algorithm (iterative) on the nonzero pattern of `weights`."""
    n = len(weights)
    adj = [np.nonzero(weights[i])[0].tolist() for i in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for k in range(pi, len(adj[v])):
                w = adj[v][k]
                if index[w] == -1:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


@dataclass(frozen=True)
class WeightedGraph:
    """Nonnegative irreducible weight matrix with node labels."""

    weights: np.ndarray
    labels: tuple[str, ...]

    def __init__(self, weights, labels=None):
        w = np.array(weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weight matrix must be square")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if not np.any(w > 0):
            raise ValueError("weight matrix has no edges")
        if labels is None:
            labels = tuple(str(i) for i in range(len(w)))
        else:
            labels = tuple(str(x) for x in labels)
        if len(labels) != len(w):
            raise ValueError("label count does not match matrix size")
        comps = strongly_connected_components(w)
        if len(comps) != 1:
            raise ReducibleGraph(comps)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.weights)


def decompose(weights) -> list[WeightedGraph]:
    """Split a reducible matrix into its strongly connected blocks.

    Components without any internal edge (isolated transient nodes) are
    dropped, since they carry no bi-infinite sequences.
    """
    w = np.asarray(weights, dtype=float)
    out = []
    for comp in strongly_connected_components(w):
        block = w[np.ix_(comp, comp)]
        if np.any(block > 0):
            out.append(WeightedGraph(block, [str(i) for i in comp]))
    return out


def build_from_constraints(labels: Sequence, allowed: Callable[[int, int], bool]) -> WeightedGraph:
    """0/1 graph over `labels` with an edge a -> b whenever allowed(a, b)."""
    n = len(labels)
    w = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if allowed(a, b):
                w[a, b] = 1.0
    return WeightedGraph(w, labels)


def block_symbols(alphabet: Sequence, l: int, window_ok: Callable[[tuple], bool]) -> WeightedGraph:
    """Blocked graph over valid l-symbol windows.

    `window_ok` must accept any window of length up to l+1 and decide
    whether it is consistent with the constraints.  Nodes are the valid
    l-windows; an edge joins v -> w when they overlap in l-1 symbols and
    the combined (l+1)-window is consistent.  Windows that cannot occur in
    a bi-infinite sequence (no predecessor or no successor) are trimmed.
    """
    if l < 1:
        raise ValueError("window length must be >= 1")
    from itertools import product

    nodes = [w for w in product(alphabet, repeat=l) if window_ok(w)]
    if not nodes:
        raise EmptyModel("no valid window of length %d" % l)
    idx = {w: i for i, w in enumerate(nodes)}
    edges: dict[int, list[int]] = {i: [] for i in range(len(nodes))}
    for v in nodes:
        for c in alphabet:
            w = v[1:] + (c,)
            if w in idx and window_ok(v + (c,)):
                edges[idx[v]].append(idx[w])
    alive = set(range(len(nodes)))
    while True:
        has_in = {j for i in alive for j in edges[i] if j in alive}
        keep = {i for i in alive if i in has_in and any(j in alive for j in edges[i])}
        if keep == alive:
            break
        alive = keep
        if not alive:
            raise EmptyModel("every window is transient")
    order = sorted(alive)
    remap = {old: new for new, old in enumerate(order)}
    n = len(order)
    w = np.zeros((n, n))
    for i in order:
        for j in edges[i]:
            if j in alive:
                w[remap[i], remap[j]] = 1.0
    labels = ["".join(str(s) for s in nodes[i]) for i in order]
    return WeightedGraph(w, labels)


@dataclass(frozen=True)
class Potentials:
    """Vertex and edge potentials; +inf forbids a vertex or edge."""

    vertex: np.ndarray
    edge: np.ndarray

    def __init__(self, vertex, edge):
        v = np.array(vertex, dtype=float)
        e = np.array(edge, dtype=float)
        if v.ndim != 1 or e.shape != (len(v), len(v)):
            raise ValueError("edge potential must be n x n for n vertex potentials")
        object.__setattr__(self, "vertex", v)
        object.__setattr__(self, "edge", e)


def from_potentials(pot: Potentials, labels=None) -> WeightedGraph:
    """Weight matrix M_ij = exp(-(V_i/2 + V'_ij + V_j/2)); inf maps to 0."""
    half = 0.5 * pot.vertex
    expo = half[:, None] + pot.edge + half[None, :]
    with np.errstate(over="ignore"):
        w = np.exp(-expo)
    w[~np.isfinite(expo)] = 0.0
    w[np.isposinf(pot.edge)] = 0.0
    return WeightedGraph(w, labels)


@dataclass(frozen=True)
class EigenSystem:
    """Dominant eigenvalue with left/right eigenvectors.

    `right` has unit max norm, `left` is scaled so left . right == 1.
    `residual` is the max eigen-equation residual achieved on the
    max-norm-normalized vectors.
    """

    value: float
    left: np.ndarray
    right: np.ndarray
    residual: float
    iterations: int


def dominant_eigs(graph: WeightedGraph, tol: float = 1e-12, max_iter: int = 10 ** 6) -> EigenSystem:
    """Power iteration on M and its transpose, run simultaneously.

    Periodic graphs make plain iteration oscillate; that is detected from
    the Rayleigh-quotient history and handled by averaging each iterate
    with its predecessor (kills the equal-modulus rotated components).
    """
    M = graph.weights
    MT = M.T.copy()
    n = graph.size
    v = np.full(n, 1.0 / n)
    u = np.full(n, 1.0 / n)
    v_prev = v.copy()
    u_prev = u.copy()
    lam = float(u @ (M @ v) / (u @ v))
    averaged = False
    it = 0
    while it < max_iter:
        it += 1
        mv = M @ v
        mu = MT @ u
        if averaged:
            mv = mv + lam * v
            mu = mu + lam * u
        sv = mv.sum()
        su = mu.sum()
        if sv <= 0 or su <= 0:
            raise NoConvergence("iterate collapsed to zero")
        v2 = mv / sv
        u2 = mu / su
        lam = float(u2 @ (M @ v2) / (u2 @ v2))
        delta = max(float(np.max(np.abs(v2 - v))), float(np.max(np.abs(u2 - u))))
        # two-step change; near zero while delta stays large means a
        # period-2 oscillation from equal-modulus eigenvalues
        delta2 = max(float(np.max(np.abs(v2 - v_prev))), float(np.max(np.abs(u2 - u_prev))))
        v_prev, u_prev = v, u
        v, u = v2, u2
        if delta < tol:
            psi = v / np.max(v)
            res = _residual(M, lam, u, psi)
            if res < 10 * tol:
                phi = u / float(u @ psi)
                return EigenSystem(lam, phi, psi, res, it)
        elif not averaged and it >= 4 and delta2 < 1e-3 * delta:
            averaged = True
    raise NoConvergence("no convergence after %d iterations" % max_iter)


def _residual(M, lam, phi, psi) -> float:
    p = psi / np.max(np.abs(psi))
    q = phi / np.max(np.abs(phi))
    r1 = float(np.max(np.abs(M @ p - lam * p)))
    r2 = float(np.max(np.abs(q @ M - lam * q)))
    return max(r1, r2)


@dataclass(frozen=True)
class MarkovCoder:
    """Row-stochastic transition matrix with its stationary distribution."""

    transition: np.ndarray
    stationary: np.ndarray
    entropy_bits: float


def merw_coder(graph: WeightedGraph, eigs: EigenSystem) -> MarkovCoder:
    """Entropy-maximizing chain S_ab = M_ab psi_b / (lambda psi_a).

    The row divisor is evaluated as (M psi)_a, which equals lambda psi_a at
    the fixed point but keeps the rows summing to one at machine precision
    instead of at the eigensolver residual.
    """
    M = graph.weights
    psi = eigs.right
    phi = eigs.left
    S = M * psi[None, :] / (M @ psi)[:, None]
    p = phi * psi
    p = p / p.sum()
    return MarkovCoder(S, p, math.log(eigs.value, 2))


def chain_entropy_bits(coder: MarkovCoder) -> float:
    """Entropy rate -sum_a p_a sum_b S_ab lg S_ab of the chain itself."""
    S = coder.transition
    p = coder.stationary
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(S > 0, S * np.log2(np.where(S > 0, S, 1.0)), 0.0)
    return float(-(p @ t.sum(axis=1)))


def pair_probs(graph: WeightedGraph, eigs: EigenSystem) -> np.ndarray:
    """Stationary edge probabilities p_ab = phi_a M_ab psi_b / (lambda phi.psi)."""
    phi, psi = eigs.left, eigs.right
    P = phi[:, None] * graph.weights * psi[None, :]
    return P / (eigs.value * float(phi @ psi))


def path_prob(coder: MarkovCoder, path: Sequence[int]) -> float:
    """Probability of following `path` (node indices) from its first node."""
    S = coder.transition
    p = 1.0
    for a, b in zip(path[:-1], path[1:]):
        s = S[a, b]
        if s == 0.0:
            raise ForbiddenPath("transition %d -> %d has zero weight" % (a, b))
        p *= s
    return p


def binary_entropy(q: float) -> float:
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def ternary_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> tuple[float, float]:
    """Maximize a unimodal function; returns (argmax, max)."""
    while hi - lo > tol:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    x = 0.5 * (lo + hi)
    return x, f(x)


def kmodel_graph(k: int) -> WeightedGraph:
    """State machine for the run-length constraint: a 1 is followed by >= k zeros.

    State i > 0 owes i more zeros; state 0 is unconstrained.  Weights count
    symbol choices, so k = 0 gets a doubled self-loop.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    n = k + 1
    w = np.zeros((n, n))
    w[0, 0] = 2.0 if k == 0 else 1.0
    if k > 0:
        w[0, k] = 1.0
        for i in range(1, n):
            w[i, i - 1] = 1.0
    return WeightedGraph(w, [str(i) for i in range(n)])


def kmodel_capacity(k: int, tol: float = 1e-12) -> float:
    """max over q of h(q) / (1 + k q), bits per node."""
    if k < 0:
        raise ValueError("k must be >= 0")
    _, best = ternary_max(lambda q: binary_entropy(q) / (1.0 + k * q), 0.0, 1.0, tol)
    return best


def kmodel_benefit(k: int) -> int:
    """Percent gain of coding k+1 nodes jointly over one bit per group."""
    return round(100.0 * ((k + 1) * kmodel_capacity(k) - 1.0))


def load_graph(text: str) -> WeightedGraph:
    """Parse the plain text matrix format: first line n, then n weight rows."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty graph file")
    try:
        n = int(lines[0].split()[0])
    except ValueError as e:
        raise ValueError("first line must be the matrix size") from e
    if len(lines) < n + 1:
        raise ValueError("expected %d weight rows" % n)
    rows = []
    for ln in lines[1 : n + 1]:
        parts = ln.split()
        if len(parts) != n:
            raise ValueError("expected %d weights per row" % n)
        row = []
        for p in parts:
            x = float(p)
            if not math.isfinite(x):
                raise ValueError("weights must be finite, got %r" % p)
            row.append(x)
        rows.append(row)
    return WeightedGraph(np.array(rows))


def _fmt(x: float) -> str:
    return "%.15g" % x


def report_text(graph: WeightedGraph, eigs: EigenSystem, coder: MarkovCoder) -> str:
    """Flat key-value summary used by the command line tools."""
    lines = [
        "nodes = %d" % graph.size,
        "lambda = %s" % _fmt(eigs.value),
        "entropy_bits = %s" % _fmt(coder.entropy_bits),
        "psi = %s" % " ".join(_fmt(x) for x in eigs.right),
        "phi = %s" % " ".join(_fmt(x) for x in eigs.left),
        "stationary = %s" % " ".join(_fmt(x) for x in coder.stationary),
    ]
    return "\n".join(lines) + "\n"

"""Heuristic hard-square writers and the numeric reproduction report.

Two Monte-Carlo lattice writers live here.  The first is a two-pass
checkerboard scheme with a closed-form rate: the even sublattice is
written as independent Bernoulli(q) draws, then every odd node whose four
neighbours are 0 carries one fair payload bit.  The second visits nodes
in a random time order and writes a 1 with a time-dependent probability
(a "charging profile"); it is a measurement device, not a codec.

`reproduce_tables` recomputes every frozen reference value shipped with
the package and reports pass/fail per row.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import lattice as lat
from .ans import (AbsStreamDecoder, AbsStreamEncoder, CapacityExceeded,
                  CorruptStream, abs_decode_step)
from .rng import SplitMix64
from .spectral import (binary_entropy, dominant_eigs, kmodel_benefit,
                       kmodel_capacity, kmodel_graph)
from .strip import ConfigMismatch, EncodeResult, InvalidLattice, strip_capacity

HARD_SQUARE_ENTROPY = lat.HARD_SQUARE_ENTROPY


# ---------------------------------------------------------------------------
# checkerboard writer


def algorithm1_entropy(q: float) -> float:
    """Closed-form rate of the checkerboard writer, bits per node.

    Half the nodes carry h(q) bits each.  A second-pass node is writable
    only when its four first-pass neighbours are all 0, which happens
    with probability (1-q)^4, and then carries one full bit.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    return 0.5 * binary_entropy(q) + 0.5 * (1.0 - q) ** 4


def _algorithm1_slope(q: float) -> float:
    return 0.5 * math.log2((1.0 - q) / q) - 2.0 * (1.0 - q) ** 3


def algorithm1_optimum(lo: float = 0.0, hi: float = 1.0,
                       tol: float = 1e-14) -> tuple[float, float]:
    """(argmax, max) of the closed-form checkerboard rate over [lo, hi].

    The rate is strictly concave in q, so the maximizer is the root of
    the slope; bisection pins it to machine precision where a pure
    comparison search would wobble at the sqrt(eps) noise floor.
    """
    a = max(lo, 1e-12)
    b = min(hi, 1.0 - 1e-12)
    if _algorithm1_slope(a) <= 0.0:
        return a, algorithm1_entropy(a)
    if _algorithm1_slope(b) >= 0.0:
        return b, algorithm1_entropy(b)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if _algorithm1_slope(mid) > 0.0:
            a = mid
        else:
            b = mid
    x = 0.5 * (a + b)
    return x, algorithm1_entropy(x)


def _dims(dims) -> tuple[int, int]:
    if isinstance(dims, int):
        dims = (dims, dims)
    rows, cols = int(dims[0]), int(dims[1])
    if rows < 1 or cols < 1:
        raise ValueError("dimensions must be positive")
    return rows, cols


def _dyadic(q: float, l: int):
    """(m, forced): m/l approximates q, or a forced symbol at the endpoints."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if q == 0.0:
        return None, 0
    if q == 1.0:
        return None, 1
    return min(max(round(q * l), 1), l - 1), -1


def _checkerboard(rows: int, cols: int, phase: int):
    for i in range(rows):
        for j in range((i + phase) % 2, cols, 2):
            yield i, j


def _blocked(grid: np.ndarray, i: int, j: int) -> bool:
    # zero boundary: nodes outside the grid never block
    rows, cols = grid.shape
    if i > 0 and grid[i - 1, j]:
        return True
    if i + 1 < rows and grid[i + 1, j]:
        return True
    if j > 0 and grid[i, j - 1]:
        return True
    return j + 1 < cols and bool(grid[i, j + 1])


def algorithm1_encode(dims, q: float, bits, precision: int = 16,
                      partial: bool = False) -> EncodeResult:
    """Fill a hard-square lattice with payload bits via the two-pass writer.

    Pass one writes the even checkerboard sublattice as Bernoulli(q)
    draws, with q quantized to m/2^R identically at encode and decode.
    Pass two visits the odd sublattice: a node with all four neighbours 0
    (zero boundary) carries one fair payload bit, anything else is forced
    to 0 and consumes nothing.  Raises CapacityExceeded when the lattice
    cannot absorb every payload bit unless `partial` is set.
    """
    rows, cols = _dims(dims)
    l = 1 << precision
    mq, forced = _dyadic(q, l)
    dec = AbsStreamDecoder(bits, precision)
    grid = np.zeros((rows, cols), dtype=np.int8)
    for i, j in _checkerboard(rows, cols, 0):
        grid[i, j] = forced if mq is None else dec.draw(mq)
    half = l >> 1
    for i, j in _checkerboard(rows, cols, 1):
        if not _blocked(grid, i, j):
            grid[i, j] = dec.draw(half)
    if not partial and dec.consumed < len(bits):
        raise CapacityExceeded(dec.consumed)
    return EncodeResult(grid, dec.x, dec.consumed, dec.padded)


def algorithm1_decode(grid, q: float, final_state: int, nbits: int,
                      precision: int = 16) -> list:
    """Invert the two-pass writer; exact inverse of `algorithm1_encode`."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ConfigMismatch("expected a 2-d grid")
    l = 1 << precision
    if not l <= final_state < 2 * l:
        raise ConfigMismatch("final coder state out of range")
    mq, forced = _dyadic(q, l)
    rows, cols = grid.shape
    draws = []
    for i, j in _checkerboard(rows, cols, 0):
        b = int(grid[i, j])
        if b not in (0, 1):
            raise InvalidLattice("non-binary value at (%d, %d)" % (i, j))
        if mq is None:
            if b != forced:
                raise InvalidLattice("forced node disagrees at (%d, %d)" % (i, j))
        else:
            draws.append((b, mq))
    half = l >> 1
    for i, j in _checkerboard(rows, cols, 1):
        b = int(grid[i, j])
        if b not in (0, 1):
            raise InvalidLattice("non-binary value at (%d, %d)" % (i, j))
        if _blocked(grid, i, j):
            if b != 0:
                raise InvalidLattice("blocked node holds a 1 at (%d, %d)" % (i, j))
        else:
            draws.append((b, half))
    enc = AbsStreamEncoder(final_state, precision)
    for s, m in reversed(draws):
        enc.absorb(s, m)
    out = enc.finish()
    if len(out) < nbits:
        raise CorruptStream("stream holds fewer bits than declared")
    return out[:nbits]


@dataclass(frozen=True)
class Algorithm1Rate:
    q: float
    side: int
    trials: int
    rates: tuple
    mean: float
    stderr: float
    closed_form: float


def _alg1_trial(args):
    q, side, precision, seed, t, verify = args
    rng = SplitMix64(seed).spawn(t)
    nodes = side * side
    bits = [rng.randbelow(2) for _ in range(nodes + 64)]
    res = algorithm1_encode((side, side), q, bits, precision, partial=True)
    if verify:
        back = algorithm1_decode(res.grid, q, res.final_state, res.consumed,
                                 precision)
        if back != bits[:res.consumed]:
            raise AssertionError("roundtrip mismatch in rate trial")
        if lat.scan(res.grid, lat.hard_square()):
            raise AssertionError("rate trial emitted an invalid lattice")
    net = res.consumed - (precision + 1)
    return t, net / nodes


def algorithm1_rate(q: float, side: int = 256, trials: int = 4, seed: int = 0,
                    precision: int = 16, jobs: int = 1,
                    verify: bool = False) -> Algorithm1Rate:
    """Measured payload rate of the checkerboard writer on random bits.

    The final coder state is charged as precision+1 bits, so the rate is
    net payload per node.  Trials run on independent seed streams; the
    reduction is deterministic for a fixed seed.
    """
    args = [(q, side, precision, seed, t, verify) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            got = list(ex.map(_alg1_trial, args))
    else:
        got = [_alg1_trial(a) for a in args]
    rates = tuple(r for _, r in sorted(got))
    mean = float(np.mean(rates))
    stderr = float(np.std(rates, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return Algorithm1Rate(q, side, trials, rates, mean, stderr,
                          algorithm1_entropy(q))


# ---------------------------------------------------------------------------
# random-order writer


@dataclass(frozen=True)
class ChargingProfile:
    """Write-probability schedule q(t): a quartic in t, clamped to [0, 1]."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if len(c) > 5:
            raise ValueError("at most degree 4")
        object.__setattr__(self, "coeffs", c + (0.0,) * (5 - len(c)))

    def __call__(self, t):
        c = self.coeffs
        v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])))
        return np.clip(v, 0.0, 1.0)

    @classmethod
    def linear(cls, a: float, b: float) -> "ChargingProfile":
        return cls((a, b))


# calibrated so the measured entropy sits just under the hard-square
# constant; see the shipped report for the realized gap
DEFAULT_PROFILE = ChargingProfile.linear(0.2266, 0.2734)


@dataclass(frozen=True)
class ExperimentReport:
    """Named measurements with uncertainties plus the sampled curves."""

    name: str
    scalars: dict
    curves: dict
    samples: dict
    seed: int


def _h_array(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    inside = (p > 0.0) & (p < 1.0)
    pi = p[inside]
    out[inside] = -pi * np.log2(pi) - (1.0 - pi) * np.log2(1.0 - pi)
    return out


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _algo2_trial(args):
    side, coeffs, seed, t_index, bins = args
    profile = ChargingProfile(coeffs)
    rng = SplitMix64(seed).spawn(t_index)
    n = side * side
    t = np.fromiter((rng.uniform() for _ in range(n)), dtype=float, count=n)
    draw = np.fromiter((rng.uniform() for _ in range(n)), dtype=float, count=n)
    q = np.asarray(profile(t), dtype=float)
    hq = _h_array(q)
    tau = np.full(n, np.inf)
    slot = np.minimum((t * bins).astype(int), bins - 1)
    visits = np.bincount(slot, minlength=bins).astype(float)
    frees = np.zeros(bins)
    h_sum = 0.0
    for idx in np.argsort(t, kind="stable"):
        if t[idx] >= tau[idx]:
            continue
        frees[slot[idx]] += 1.0
        h_sum += hq[idx]
        if draw[idx] < q[idx]:
            s = t[idx]
            i, j = divmod(int(idx), side)
            if i > 0 and tau[idx - side] > s:
                tau[idx - side] = s
            if i + 1 < side and tau[idx + side] > s:
                tau[idx + side] = s
            if j > 0 and tau[idx - 1] > s:
                tau[idx - 1] = s
            if j + 1 < side and tau[idx + 1] > s:
                tau[idx + 1] = s
    edges = np.linspace(0.0, 1.0, bins + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    stimes = np.sort(tau)
    a_block = 1.0 - np.searchsorted(stimes, edges, side="right") / n
    a_visit = np.where(visits > 0, frees / np.maximum(visits, 1.0), 1.0)
    h_visit = float(np.sum(a_visit * _h_array(profile(mids))) / bins)
    h_block = float(_trapezoid(a_block * _h_array(profile(edges)), edges))
    return t_index, h_sum / n, h_visit, h_block, a_block, a_visit, frees.sum() / n


def algorithm2_simulate(side: int, trials: int = 4,
                        profile: ChargingProfile = DEFAULT_PROFILE,
                        seed: int = 0, bins: int = 50,
                        jobs: int = 1) -> ExperimentReport:
    """Measure the entropy of the random-order writer.

    Every node gets an independent uniform timestamp; nodes are visited
    in time order and a still-free node (no neighbour written to 1 yet)
    is set to 1 with probability q(t).

    Three entropy estimates come back.  `entropy_direct` sums h(q(t))
    over the Bernoulli choices the writer actually faced and is the
    authoritative number.  `entropy_integral` integrates h(q(t)) against
    the per-visit availability curve (fraction of nodes free at their
    own visit time, binned by timestamp); it agrees with the direct sum
    up to binning and sampling error.  `entropy_integral_blocking` uses
    the blocking-time curve a(t) = fraction of nodes with no 1-neighbour
    by time t instead; it is biased high because a node that has not yet
    been visited cannot have shielded its neighbours, and is reported as
    the diagnostic for exactly that mismatch.
    """
    if side < 50:
        raise ValueError("side must be at least 50 to suppress edge effects")
    if trials < 1:
        raise ValueError("need at least one trial")
    args = [(side, profile.coeffs, seed, t, bins) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            got = list(ex.map(_algo2_trial, args))
    else:
        got = [_algo2_trial(a) for a in args]
    got.sort()
    direct = np.array([g[1] for g in got])
    visit = np.array([g[2] for g in got])
    block = np.array([g[3] for g in got])
    curves_block = np.array([g[4] for g in got])
    curves_visit = np.array([g[5] for g in got])
    free = np.array([g[6] for g in got])

    def pack(x):
        m = float(np.mean(x))
        s = float(np.std(x, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        return m, s

    edges = np.linspace(0.0, 1.0, bins + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    scalars = {
        "entropy_direct": pack(direct),
        "entropy_integral": pack(visit),
        "entropy_integral_blocking": pack(block),
        "entropy_gap": (HARD_SQUARE_ENTROPY - float(np.mean(direct)),
                        pack(direct)[1]),
        "free_fraction": pack(free),
        "a_at_1": pack(curves_block[:, -1]),
        "q_at_0": (float(profile(0.0)), 0.0),
    }
    curves = {
        "q": (tuple(edges), tuple(float(x) for x in profile(edges))),
        "a": (tuple(edges),
              tuple(float(x) for x in curves_block.mean(axis=0))),
        "a_visit": (tuple(mids),
                    tuple(float(x) for x in curves_visit.mean(axis=0))),
    }
    return ExperimentReport(name="random-order writer",
                            scalars=scalars,
                            curves=curves,
                            samples={"trials": trials, "nodes": side * side},
                            seed=seed)


# ---------------------------------------------------------------------------
# reproduction report

KMODEL_BENEFITS = (0, 39, 65, 86, 103, 117, 129, 141, 151, 160, 168, 176, 183)

# decode map for q = 3/10 over states 0..18, cells as (symbol, reduced state)
ABS_Q3_TABLE = ((1, 0), (0, 0), (0, 1), (1, 1), (0, 2), (0, 3), (1, 2),
                (0, 4), (0, 5), (0, 6), (1, 3), (0, 7), (0, 8), (1, 4),
                (0, 9), (0, 10), (1, 5), (0, 11), (0, 12))

ALGORITHM1_GAP = 0.0217


@dataclass(frozen=True)
class TableRow:
    name: str
    computed: str
    reference: str
    tolerance: str
    passed: bool


def _automaton_capacity(k: int) -> float:
    return math.log2(dominant_eigs(kmodel_graph(k)).value)


def reproduce_tables() -> tuple[list, bool]:
    """Recompute every frozen reference value and compare row by row.

    Returns (rows, all_passed).  The verdict is honest: a row that does
    not reproduce stays red instead of being patched around.
    """
    rows = []
    for k in range(13):
        got = kmodel_benefit(k)
        rows.append(TableRow("k-model benefit k=%d" % k, "%d" % got,
                             "%d" % KMODEL_BENEFITS[k], "exact",
                             got == KMODEL_BENEFITS[k]))
    worst = max(abs(kmodel_capacity(k) - _automaton_capacity(k))
                for k in range(13))
    rows.append(TableRow("k-model closed form vs automaton", "%.3e" % worst,
                         "0", "1e-9", worst < 1e-9))
    for x in range(19):
        got = abs_decode_step(x, Fraction(3, 10))
        ref = ABS_Q3_TABLE[x]
        rows.append(TableRow("abs q=0.3 decode x=%d" % x, "%d:%d" % got,
                             "%d:%d" % ref, "exact", got == ref))
    _, best = algorithm1_optimum()
    gap = HARD_SQUARE_ENTROPY - best
    rows.append(TableRow("checkerboard writer entropy gap", "%.6f" % gap,
                         "%.4f" % ALGORITHM1_GAP, "5e-4",
                         abs(gap - ALGORITHM1_GAP) < 5e-4))
    cap = strip_capacity(lat.hard_square(), 12, "cyclic")
    rows.append(TableRow("hard-square entropy, cyclic strip n=12",
                         "%.9f" % cap, "%.16f" % HARD_SQUARE_ENTROPY, "1e-3",
                         abs(cap - HARD_SQUARE_ENTROPY) < 1e-3))
    return rows, all(r.passed for r in rows)

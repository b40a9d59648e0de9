"""Translation-invariant constrained lattice models.

A model is a dimension, a finite alphabet and a finite set of forbidden
patterns (stored as translation representatives anchored at the origin).
A valuation of a finite region is valid when no translate of a forbidden
pattern, fully contained in the known cells, matches.

The module provides the brute-force machinery everything else is checked
against: valuation enumeration and counting (with a column-DP fast path
for two-dimensional binary models), entropy estimates, exact/empirical
statistical descriptions, local-optimality and bound diagnostics, and the
single-site-flip thermalization sampler.

Boundary modes for finite regions:

* ``free``   - cells outside the region are unconstrained; patterns that
               stick out are ignored;
* ``zero``   - cells outside are clamped to the neutral symbol 0;
* ``cyclic`` - the region is a full rectangle and coordinates wrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .rng import SplitMix64

# bits/node of the hard-square model, the reference constant for every
# capacity comparison in this package
HARD_SQUARE_ENTROPY = 0.5878911617753406

WORK_GUARD = 1 << 28


class TooLarge(RuntimeError):
    pass


class EmptyConditioning(ValueError):
    pass


class ZeroPrefix(ValueError):
    pass


Coord = tuple
Pattern = dict


def _anchor(pattern: Mapping) -> tuple:
    """Translate a pattern so its lexicographically smallest cell is the
    origin; returns a hashable sorted item tuple."""
    cells = sorted(pattern)
    base = cells[0]
    return tuple((tuple(c - b for c, b in zip(x, base)), pattern[x]) for x in cells)


@dataclass(frozen=True)
class LatticeModel:
    dimension: int
    alphabet: tuple
    forbidden: tuple  # anchored item-tuples
    name: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if len(set(self.alphabet)) < 2:
            raise ValueError("alphabet needs at least two symbols")
        anchored = []
        for pat in self.forbidden:
            d = dict(pat)
            if not d:
                raise ValueError("empty forbidden pattern")
            if any(len(x) != self.dimension for x in d):
                raise ValueError("pattern coordinate dimension mismatch")
            anchored.append(_anchor(d))
        object.__setattr__(self, "forbidden", tuple(sorted(set(anchored))))

    @property
    def neighborhood(self) -> frozenset:
        """N0: all difference vectors between cells of one forbidden
        pattern (contains the origin)."""
        diffs = {(0,) * self.dimension}
        for pat in self.forbidden:
            cells = [x for x, _ in pat]
            for a in cells:
                for b in cells:
                    diffs.add(tuple(i - j for i, j in zip(a, b)))
        return frozenset(diffs)

    @property
    def constraint_range(self) -> int:
        return max((max(abs(c) for c in x) for x in self.neighborhood), default=0)

    def pattern_placements(self, cell: Coord):
        """All (pattern, base) pairs whose translate covers the cell."""
        out = []
        for pat in self.forbidden:
            for d, _ in pat:
                base = tuple(c - dc for c, dc in zip(cell, d))
                out.append((pat, base))
        return out


def hard_square() -> LatticeModel:
    return LatticeModel(2, (0, 1),
                        (((((0, 0)), 1), ((1, 0), 1)),
                         ((((0, 0)), 1), ((0, 1), 1))),
                        name="hard-square")


def kmodel(k: int) -> LatticeModel:
    if k < 1:
        raise ValueError("k must be >= 1 for a constrained chain")
    pats = tuple(((((0,), 1), ((j,), 1))) for j in range(1, k + 1))
    return LatticeModel(1, (0, 1), pats, name="k-model:%d" % k)


def no111() -> LatticeModel:
    return LatticeModel(1, (0, 1), (((((0,)), 1), ((1,), 1), ((2,), 1)),), name="no-111")


def unconstrained(dimension: int = 2) -> LatticeModel:
    """Binary model with no constraints; handy as a null reference."""
    m = LatticeModel.__new__(LatticeModel)
    object.__setattr__(m, "dimension", dimension)
    object.__setattr__(m, "alphabet", (0, 1))
    object.__setattr__(m, "forbidden", ())
    object.__setattr__(m, "name", "unconstrained")
    return m


def model_preset(name: str) -> LatticeModel:
    if name == "hard-square":
        return hard_square()
    if name == "no-111":
        return no111()
    if name.startswith("k-model:"):
        return kmodel(int(name.split(":", 1)[1]))
    if name == "unconstrained":
        return unconstrained()
    raise ValueError("unknown model preset %r" % name)


def rect(rows: int, cols: int, origin: Coord = (0, 0)) -> frozenset:
    r0, c0 = origin
    return frozenset((r0 + i, c0 + j) for i in range(rows) for j in range(cols))


def centered_square(side: int) -> frozenset:
    if side % 2 == 0:
        raise ValueError("need an odd side to center on the origin")
    h = side // 2
    return rect(side, side, (-h, -h))


def segment(n: int, origin: int = 0) -> frozenset:
    return frozenset((origin + i,) for i in range(n))


def interior(region: frozenset, model: LatticeModel) -> frozenset:
    n0 = model.neighborhood
    return frozenset(x for x in region
                     if all(tuple(c + d for c, d in zip(x, off)) in region for off in n0))


def boundary(region: frozenset, model: LatticeModel) -> frozenset:
    return frozenset(region) - interior(region, model)


def thicken(region: Iterable, model: LatticeModel) -> frozenset:
    n0 = model.neighborhood
    return frozenset(tuple(c + d for c, d in zip(x, off)) for x in region for off in n0)


def _resolve_context(region, model, clamp, boundary_mode, dims):
    """Clamped cells visible to the counting engine (region cells excluded)."""
    ctx = {}
    if clamp:
        for x, s in clamp.items():
            if s not in model.alphabet:
                raise ValueError("clamp symbol %r not in alphabet" % (s,))
            ctx[tuple(x)] = s
    if boundary_mode == "zero":
        for x in thicken(region, model) - frozenset(region):
            ctx.setdefault(x, model.alphabet[0])
    elif boundary_mode == "cyclic":
        if dims is None:
            raise ValueError("cyclic boundary needs dims")
    elif boundary_mode != "free":
        raise ValueError("unknown boundary mode %r" % boundary_mode)
    return ctx


def _wrap(cell, dims):
    return tuple(c % d for c, d in zip(cell, dims))


def _compile_checks(cells, model, ctx, boundary_mode, dims):
    """Per-cell constraint checks for the backtracking engine.

    Returns checks[i] = list of (required symbol of cell i,
    [(earlier index, required symbol), ...]) triggered when cell i is
    assigned; context cells are folded in at compile time.
    """
    index = {x: i for i, x in enumerate(cells)}
    cellset = set(cells)
    checks = [[] for _ in cells]
    seen = set()
    for cell in cells:
        for pat, base in model.pattern_placements(cell):
            if (pat, base) in seen:
                continue
            seen.add((pat, base))
            need = {}
            ok = True
            for off, sym in pat:
                y = tuple(b + o for b, o in zip(base, off))
                if boundary_mode == "cyclic":
                    y = _wrap(y, dims)
                if y in need and need[y] != sym:
                    ok = False  # self-overlapping translate, unsatisfiable
                    break
                need[y] = sym
            if not ok:
                continue
            inside = []
            for y, sym in need.items():
                if y in cellset:
                    inside.append((index[y], sym))
                elif y in ctx:
                    if ctx[y] != sym:
                        ok = False
                        break
                else:
                    if boundary_mode != "free":
                        raise AssertionError("unresolved cell %r" % (y,))
                    ok = False  # sticks outside a free region
                    break
            if not ok or not inside:
                continue
            last = max(i for i, _ in inside)
            rest = [(i, s) for i, s in inside if i != last]
            sym_last = next(s for i, s in inside if i == last)
            checks[last].append((sym_last, rest))
    return checks


def _iter_valuations(region, model, clamp, boundary_mode, dims, count_only,
                     guard=WORK_GUARD):
    cells = sorted(region)
    ctx = _resolve_context(region, model, clamp, boundary_mode, dims)
    fixed = {x: ctx[x] for x in cells if x in ctx}
    free = [x for x in cells if x not in ctx]
    if len(model.alphabet) ** max(len(free), 1) > guard:
        raise TooLarge("region of %d free cells exceeds the work guard" % len(free))
    order = [x for x in cells if x in fixed] + free
    checks = _compile_checks(order, model, {k: v for k, v in ctx.items() if k not in fixed},
                             boundary_mode, dims)
    nfixed = len(order) - len(free)
    assign = [fixed[x] for x in order[:nfixed]] + [None] * len(free)
    # fixed prefix must itself be conflict-free
    for i in range(nfixed):
        for sym, rest in checks[i]:
            if assign[i] == sym and all(assign[j] == s for j, s in rest):
                return iter(()) if not count_only else iter((0,))
    alphabet = model.alphabet
    n = len(order)

    def rec(i):
        if i == n:
            if count_only:
                yield 1
            else:
                yield dict(zip(order, assign))
            return
        for sym in alphabet:
            bad = False
            for want, rest in checks[i]:
                if sym == want and all(assign[j] == s for j, s in rest):
                    bad = True
                    break
            if bad:
                continue
            assign[i] = sym
            yield from rec(i + 1)
        assign[i] = None

    return rec(nfixed)


def enumerate_valuations(region, model, clamp=None, boundary="free", dims=None):
    """All valid valuations of the region agreeing with the clamp."""
    return list(_iter_valuations(region, model, clamp, boundary, dims, False))


def _is_rect(region):
    rows = sorted({x[0] for x in region})
    cols = sorted({x[1] for x in region})
    if rows != list(range(rows[0], rows[-1] + 1)):
        return None
    if cols != list(range(cols[0], cols[-1] + 1)):
        return None
    if len(region) != len(rows) * len(cols):
        return None
    return rows[0], cols[0], len(rows), len(cols)


def _all_ones_patterns(model):
    return (model.alphabet == (0, 1)
            and all(all(s == 1 for _, s in pat) for pat in model.forbidden))


def _column_window(model):
    """Max |column offset| inside any forbidden pattern; DP needs <= 1."""
    w = 0
    for pat in model.forbidden:
        cs = [x[1] for x, _ in pat]
        w = max(w, max(cs) - min(cs))
    return w


def _valid_column_masks(model, rows):
    """Bitmasks of single columns violating no intra-column pattern."""
    masks = []
    pats = [[x[0] for x, _ in pat] for pat in model.forbidden
            if all(x[1] == 0 for x, _ in pat)]
    for m in range(1 << rows):
        ok = True
        for rowoffs in pats:
            span = max(rowoffs)
            for r in range(rows - span):
                if all(m >> (r + o) & 1 for o in rowoffs):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            masks.append(m)
    return masks


def _column_pair_ok(model, rows, m1, m2):
    for pat in model.forbidden:
        cols = [x[1] for x, _ in pat]
        if max(cols) - min(cols) != 1:
            continue
        spans = [x[0] for x, _ in pat]
        lo = min(spans)
        span = max(spans) - lo
        for r in range(rows - span):
            hit = True
            for (dr, dc), _ in pat:
                m = m2 if dc > min(cols) else m1
                if not (m >> (r + dr - lo)) & 1:
                    hit = False
                    break
            if hit:
                return False
    return True


def _rect_dp_count(row0, col0, rows, cols, model, ctx) -> Optional[int]:
    """Column-by-column transfer count for 2D binary models whose patterns
    span at most two adjacent columns and demand only 1s.  ctx holds
    clamped symbols (inside or adjacent to the rectangle); returns None
    when the configuration is outside this fast path."""
    if model.dimension != 2 or not _all_ones_patterns(model):
        return None
    if _column_window(model) > 1 or rows > 20:
        return None
    vr = model.constraint_range
    for (r, c) in ctx:
        inside_rows = row0 <= r < row0 + rows
        if inside_rows and not (col0 - 1 <= c <= col0 + cols):
            if col0 - vr <= c < col0 + cols + vr and ctx[(r, c)] == 1:
                return None  # influences through a wider window
        if not inside_rows:
            if row0 - vr <= r < row0 + rows + vr and ctx[(r, c)] == 1:
                if not (r == row0 - 1 or r == row0 + rows):
                    return None
    masks = _valid_column_masks(model, rows)
    pair_ok = {m1: [m2 for m2 in masks if _column_pair_ok(model, rows, m1, m2)]
               for m1 in masks}
    # per-column allowed masks from clamps inside and directly above/below
    force = [dict() for _ in range(cols)]
    side = {}
    for (r, c), s in ctx.items():
        j = c - col0
        if row0 <= r < row0 + rows and 0 <= j < cols:
            force[j][r - row0] = s
        elif 0 <= j < cols and (r == row0 - 1 or r == row0 + rows) and s == 1:
            # vertical neighbor outside: adjacent rectangle bit must be 0
            force[j][0 if r < row0 else rows - 1] = -1
        elif row0 <= r < row0 + rows and (j == -1 or j == cols):
            side.setdefault(j, 0)
            if s == 1:
                side[j] |= 1 << (r - row0)

    def allowed(j):
        out = []
        for m in masks:
            ok = True
            for r, s in force[j].items():
                bit = (m >> r) & 1
                if s == -1 and bit:
                    ok = False
                    break
                if s in (0, 1) and bit != s:
                    ok = False
                    break
            if ok:
                out.append(m)
        return out

    cur = {}
    for m in allowed(0):
        if -1 in side and not _column_pair_ok(model, rows, side[-1], m):
            continue
        cur[m] = cur.get(m, 0) + 1
    for j in range(1, cols):
        nxt = {}
        ok_j = set(allowed(j))
        for m1, cnt in cur.items():
            for m2 in pair_ok[m1]:
                if m2 in ok_j:
                    nxt[m2] = nxt.get(m2, 0) + cnt
        cur = nxt
    if cols in side:
        return sum(c for m, c in cur.items()
                   if _column_pair_ok(model, rows, m, side[cols]))
    return sum(cur.values())


def count(region, model, clamp=None, boundary="free", dims=None, method="auto") -> int:
    """N(A, u): valid valuations of the region extending the clamp."""
    if method not in ("auto", "backtracking", "dp"):
        raise ValueError("unknown method %r" % method)
    if method != "backtracking" and model.dimension == 2 and boundary in ("free", "zero"):
        shape = _is_rect(region)
        if shape is not None:
            ctx = _resolve_context(region, model, clamp, boundary, dims)
            ctx = {x: s for x, s in ctx.items() if x not in region}
            if clamp:
                for x, s in clamp.items():
                    ctx[tuple(x)] = s
            n = _rect_dp_count(shape[0], shape[1], shape[2], shape[3], model, ctx)
            if n is not None:
                return n
    if method == "dp":
        raise TooLarge("no DP fast path for this configuration")
    return sum(_iter_valuations(region, model, clamp, boundary, dims, True))


def lg(n: int) -> float:
    """Exact-ish lg for big integers."""
    if n <= 0:
        raise ValueError("lg of nonpositive count")
    bl = n.bit_length()
    if bl <= 512:
        return math.log2(n)
    shift = bl - 512
    return shift + math.log2(n >> shift)


def entropy_estimate(side: int, model: LatticeModel, boundary: str = "free") -> float:
    """lg N(side-hypercube) / side^m."""
    if model.dimension == 1:
        region = segment(side)
    elif model.dimension == 2:
        region = rect(side, side)
    else:
        raise NotImplementedError("only 1D and 2D lattices here")
    dims = (side,) * model.dimension if boundary == "cyclic" else None
    n = count(region, model, boundary=boundary, dims=dims)
    return lg(n) / side ** model.dimension


def scan(grid: np.ndarray, model: LatticeModel, boundary: str = "free") -> list:
    """All violated forbidden-pattern placements; empty means valid."""
    arr = np.asarray(grid)
    if arr.ndim == 1:
        arr = arr[None, :] if model.dimension == 1 else arr
    if model.dimension == 1:
        cells = {(j,): int(arr.flat[j]) for j in range(arr.size)}
        dims = (arr.size,)
    else:
        cells = {(i, j): int(arr[i, j]) for i in range(arr.shape[0])
                 for j in range(arr.shape[1])}
        dims = arr.shape
    out = []
    for x in cells:
        for pat, base in model.pattern_placements(x):
            if base != x:
                continue  # one check per placement
            hit = True
            for off, sym in pat:
                y = tuple(b + o for b, o in zip(base, off))
                if boundary == "cyclic":
                    y = _wrap(y, dims)
                if y in cells:
                    if cells[y] != sym:
                        hit = False
                        break
                elif boundary == "zero":
                    if sym != model.alphabet[0]:
                        hit = False
                        break
                else:
                    hit = False
                    break
            if hit:
                out.append((base, pat))
    return out


def is_valid(grid, model, boundary="free") -> bool:
    return not scan(grid, model, boundary)


def approx_description(region, model, clamp, pattern, boundary="free") -> float:
    """p_f^{A,v} = N(A, v + f) / N(A, v)."""
    pattern = dict(pattern)
    base = dict(clamp) if clamp else {}
    for x in pattern:
        if tuple(x) in base:
            raise ValueError("pattern overlaps the clamp")
    denom = count(region, model, base, boundary)
    if denom == 0:
        raise EmptyConditioning("conditioning context has no valid extension")
    merged = dict(base)
    merged.update(pattern)
    return count(region, model, merged, boundary) / denom


class Description:
    """Pattern probabilities backed by per-shape joint tables.

    Probabilities of sub-patterns come from marginalizing the smallest
    stored shape containing them, so the one-node extension rule (summing
    children reproduces the parent) holds exactly by construction.
    """

    def __init__(self, tables: Mapping, alphabet=(0, 1)):
        self.alphabet = tuple(alphabet)
        self.tables = {}
        for shape, probs in tables.items():
            shape = tuple(sorted(map(tuple, shape)))
            self.tables[shape] = dict(probs)
        self.shapes = sorted(self.tables, key=len)

    def prob(self, pattern) -> float:
        items = dict(pattern)
        if not items:
            return 1.0
        support = set(map(tuple, items))
        for shape in self.shapes:
            if support <= set(shape):
                idx = [shape.index(x) for x in sorted(support)]
                want = [items[x] for x in sorted(support)]
                total = 0.0
                for assign, p in self.tables[shape].items():
                    if all(assign[i] == w for i, w in zip(idx, want)):
                        total += p
                return total
        raise KeyError("no stored shape covers the pattern support")

    def normalization_error(self) -> float:
        """Largest defect of total mass 1 and of the extension rule
        inside each stored shape."""
        worst = 0.0
        for shape, probs in self.tables.items():
            worst = max(worst, abs(sum(probs.values()) - 1.0))
            if len(shape) < 2:
                continue
            for drop in range(len(shape)):
                margin = {}
                for assign, p in probs.items():
                    key = assign[:drop] + assign[drop + 1:]
                    margin[key] = margin.get(key, 0.0) + p
                sub = {x for i, x in enumerate(shape) if i != drop}
                for assign, p in margin.items():
                    pat = dict(zip(sorted(sub), assign))
                    worst = max(worst, abs(self.prob(pat) - p))
        return worst


def _shape_assignments(shape, alphabet):
    import itertools
    return itertools.product(alphabet, repeat=len(shape))


def exact_description(region, model, shapes, clamp=None, boundary="free") -> Description:
    """Counting-based description: p(f) = N(A, clamp+f)/N(A, clamp)."""
    base = dict(clamp) if clamp else {}
    denom = count(region, model, base, boundary)
    if denom == 0:
        raise EmptyConditioning("clamp admits no valid valuation")
    tables = {}
    for shape in shapes:
        shape = tuple(sorted(map(tuple, shape)))
        if not set(shape) <= set(region):
            raise ValueError("shape must lie inside the region")
        probs = {}
        for assign in _shape_assignments(shape, model.alphabet):
            merged = dict(base)
            merged.update(zip(shape, assign))
            probs[assign] = count(region, model, merged, boundary) / denom
        tables[shape] = probs
    return Description(tables, model.alphabet)


def empirical_description(samples: Sequence[np.ndarray], shapes, alphabet=(0, 1)) -> Description:
    """Translation-averaged pattern frequencies over 2D sample grids.

    All shapes are counted over one common placement window (where the
    union bounding box fits), so marginalizing any stored table down to a
    smaller stored shape is exact by construction.
    """
    shapes = [tuple(sorted(map(tuple, s))) for s in shapes]
    allcells = [x for s in shapes for x in s]
    r0 = min(x[0] for x in allcells)
    r1 = max(x[0] for x in allcells)
    c0 = min(x[1] for x in allcells)
    c1 = max(x[1] for x in allcells)
    tables = {}
    for shape in shapes:
        counts = {}
        total = 0
        for arr in samples:
            arr = np.asarray(arr)
            for i in range(-r0, arr.shape[0] - r1):
                for j in range(-c0, arr.shape[1] - c1):
                    key = tuple(int(arr[i + dr, j + dc]) for dr, dc in shape)
                    counts[key] = counts.get(key, 0) + 1
                    total += 1
        if total == 0:
            raise ValueError("shapes do not fit inside the samples")
        tables[shape] = {a: counts.get(a, 0) / total
                         for a in _shape_assignments(shape, alphabet)}
    return Description(tables, alphabet)


def _locally_valid(pattern: Mapping, model: LatticeModel) -> bool:
    cells = {tuple(x): s for x, s in pattern.items()}
    for x in cells:
        for pat, base in model.pattern_placements(x):
            need = {tuple(b + o for b, o in zip(base, off)): sym for off, sym in pat}
            if all(y in cells and cells[y] == s for y, s in need.items()):
                return False
    return True


def check_pLOC(description: Description, model: LatticeModel, context_shapes) -> float:
    """Largest probability gap between valid symbols at the origin over
    all stored context valuations; 0 certifies local optimality."""
    origin = (0,) * model.dimension
    worst = 0.0
    for shape in context_shapes:
        shape = tuple(sorted(map(tuple, shape)))
        if origin in shape:
            raise ValueError("context shape must exclude the origin")
        for assign in _shape_assignments(shape, description.alphabet):
            ctx = dict(zip(shape, assign))
            if description.prob(ctx) <= 0:
                continue
            ps = []
            for a in model.alphabet:
                ext = dict(ctx)
                ext[origin] = a
                if _locally_valid(ext, model):
                    ps.append(description.prob(ext))
            if len(ps) >= 2:
                worst = max(worst, max(ps) - min(ps))
    return worst


def sequential_description(p, order, alphabet, assignment) -> list:
    """Conditional laws q(b) = p(prefix + b)/p(prefix) along a node order,
    following the given assignment; raises ZeroPrefix on a dead prefix."""
    if isinstance(p, Description):
        fn = p.prob
    else:
        fn = p
    out = []
    prefix = {}
    for x in order:
        x = tuple(x)
        pp = fn(prefix) if prefix else 1.0
        if pp <= 0:
            raise ZeroPrefix("prefix has probability zero")
        qs = {}
        for b in alphabet:
            ext = dict(prefix)
            ext[x] = b
            qs[b] = fn(ext) / pp
        out.append(qs)
        prefix[x] = assignment[x]
    return out


def description_bounds(regions, model, pattern, boundary="free"):
    """(p-check, p-hat, d) over a nested region chain: extremes of the
    conditional pattern probability over valid boundary valuations.

    The spread d is checked non-increasing along the chain (proved
    monotone for nested regions); violation raises AssertionError.
    """
    pattern = {tuple(x): s for x, s in dict(pattern).items()}
    need = thicken(pattern, model)
    rows = []
    prev_d = None
    prev = None
    for region in regions:
        region = frozenset(region)
        if not need <= region:
            raise ValueError("region must contain the thickened pattern support")
        if prev is not None and not prev < region:
            raise ValueError("regions must be strictly nested")
        prev = region
        res = _bounds_one_region(region, model, pattern, boundary)
        if prev_d is not None:
            assert res[2] <= prev_d + 1e-12, "bound spread grew on a larger region"
        prev_d = res[2]
        rows.append(res)
    return rows


def _bounds_one_region(region, model, pattern, boundary):
    inner = interior(region, model)
    ring = frozenset(region) - inner
    if not set(pattern) <= inner:
        raise ValueError("pattern must sit in the interior")
    fast = _bounds_fast_hs(region, model, pattern, boundary)
    if fast is not None:
        return fast
    lo, hi = None, None
    for v in enumerate_valuations(ring, model, boundary=boundary):
        denom = count(region, model, v, boundary)
        if denom == 0:
            continue
        merged = dict(v)
        merged.update(pattern)
        p = count(region, model, merged, boundary) / denom
        lo = p if lo is None else min(lo, p)
        hi = p if hi is None else max(hi, p)
    if lo is None:
        raise EmptyConditioning("no boundary valuation admits a completion")
    return lo, hi, hi - lo


def _bounds_fast_hs(region, model, pattern, boundary):
    """Batched column-DP for the hard-square shape on centered squares.

    Only the ring cells orthogonally adjacent to the interior influence
    the conditional, so valid ring valuations are grouped by that contact
    key; each group costs one 13-ish-state transfer product, vectorized
    over all keys at once."""
    if boundary != "free" or model.name != "hard-square":
        return None
    shape = _is_rect(region)
    if shape is None or shape[2] != shape[3] or shape[2] < 5:
        return None
    row0, col0, side, _ = shape
    inner_side = side - 2
    inner = rect(inner_side, inner_side, (row0 + 1, col0 + 1))
    if not set(pattern) <= inner:
        return None
    ring = sorted(frozenset(region) - inner)
    # contact cells: ring cells adjacent to the interior (non-corner)
    contact = [x for x in ring
               if any(tuple(c + d for c, d in zip(x, off)) in inner
                      for off in ((1, 0), (-1, 0), (0, 1), (0, -1)))]
    cidx = {x: i for i, x in enumerate(contact)}
    keys = set()
    for v in enumerate_valuations(frozenset(ring), model):
        key = 0
        for x, i in cidx.items():
            if v[x]:
                key |= 1 << i
        keys.add(key)
    keys = sorted(keys)
    K = len(keys)
    masks = _valid_column_masks(model, inner_side)
    M = len(masks)
    T = np.zeros((M, M))
    for a, m1 in enumerate(masks):
        for b, m2 in enumerate(masks):
            T[a, b] = 1.0 if (m1 & m2) == 0 else 0.0
    keyarr = np.array(keys, dtype=np.int64)
    maskarr = np.array(masks, dtype=np.int64)
    # per-key, per-column allowed masks
    allow = np.ones((K, inner_side, M), dtype=bool)
    for j in range(inner_side):
        top = cidx[(row0, col0 + 1 + j)]
        bot = cidx[(row0 + side - 1, col0 + 1 + j)]
        topset = (keyarr >> top) & 1
        botset = (keyarr >> bot) & 1
        bit0 = (maskarr & 1).astype(bool)
        bitn = ((maskarr >> (inner_side - 1)) & 1).astype(bool)
        allow[:, j, :] &= ~(topset[:, None].astype(bool) & bit0[None, :])
        allow[:, j, :] &= ~(botset[:, None].astype(bool) & bitn[None, :])
    left = np.zeros(K, dtype=np.int64)
    right = np.zeros(K, dtype=np.int64)
    for i in range(inner_side):
        l = cidx[(row0 + 1 + i, col0)]
        r = cidx[(row0 + 1 + i, col0 + side - 1)]
        left |= ((keyarr >> l) & 1) << i
        right |= ((keyarr >> r) & 1) << i
    lcompat = ((left[:, None] & maskarr[None, :]) == 0)
    rcompat = ((right[:, None] & maskarr[None, :]) == 0)

    def run(filtered):
        V = (allow[:, 0, :] & lcompat & filtered[0][None, :]).astype(float)
        for j in range(1, inner_side):
            V = V @ T
            V *= allow[:, j, :] * filtered[j][None, :]
        return (V * rcompat).sum(axis=1)

    free_f = [np.ones(M, dtype=bool) for _ in range(inner_side)]
    denom = run(free_f)
    pat_f = [np.ones(M, dtype=bool) for _ in range(inner_side)]
    for (r, c), s in pattern.items():
        j = c - (col0 + 1)
        bit = ((maskarr >> (r - (row0 + 1))) & 1).astype(bool)
        pat_f[j] &= bit if s == 1 else ~bit
    numer = run(pat_f)
    good = denom > 0
    ps = numer[good] / denom[good]
    return float(ps.min()), float(ps.max()), float(ps.max() - ps.min())


def thermalize(shape, model=None, seed=0, samples=1, warmup_sweeps=5,
               spacing_moves=None, boundary="free"):
    """Single-site-flip sampler over an all-zeros start.

    One move: pick a uniform node; toggle it when the toggled value stays
    locally valid.  The proposal is symmetric and acceptance depends only
    on validity, so the chain is doubly stochastic over valid valuations
    and converges to the uniform law.  Emits `samples` grids, the first
    after warmup_sweeps*|A| moves per sweep, then every spacing_moves
    (default |A|) moves.
    """
    if model is None:
        model = hard_square()
    if model.dimension == 2:
        rows, cols = shape
    else:
        rows, cols = 1, shape if isinstance(shape, int) else shape[0]
    area = rows * cols
    spacing = area if spacing_moves is None else spacing_moves
    rng = SplitMix64(seed)
    arr = np.zeros((rows, cols), dtype=np.int8)
    cells = {}
    if model.dimension == 2:
        coords = [(i, j) for i in range(rows) for j in range(cols)]
    else:
        coords = [(j,) for j in range(cols)]

    def flip_ok(x):
        cur = arr[x] if model.dimension == 2 else arr[0, x[0]]
        new = 1 - int(cur)
        for pat, base in model.pattern_placements(x):
            hit = True
            for off, sym in pat:
                y = tuple(b + o for b, o in zip(base, off))
                yy = y if model.dimension == 2 else (0, y[0])
                if y == x:
                    val = new
                elif 0 <= yy[0] < rows and 0 <= yy[1] < cols:
                    val = int(arr[yy])
                elif boundary == "cyclic":
                    val = int(arr[yy[0] % rows, yy[1] % cols])
                elif boundary == "zero":
                    val = model.alphabet[0]
                else:
                    hit = False
                    break
                if val != sym:
                    hit = False
                    break
            if hit:
                return False
        return True

    def move():
        x = coords[rng.randbelow(area)]
        if flip_ok(x):
            xx = x if model.dimension == 2 else (0, x[0])
            arr[xx] = 1 - arr[xx]

    for _ in range(warmup_sweeps * area * area):
        move()
    out = []
    for k in range(samples):
        if k:
            for _ in range(spacing):
                move()
        out.append(arr.copy())
    return out


def thermalize_chain_matrix(shape, model=None, boundary="free"):
    """Explicit single-site-flip transition matrix over all valid
    valuations of a small rectangle; states returned alongside."""
    if model is None:
        model = hard_square()
    rows, cols = shape
    region = rect(rows, cols)
    states = enumerate_valuations(region, model, boundary=boundary)
    if len(states) > 10 ** 4:
        raise TooLarge("state space too big for an explicit matrix")
    keys = [tuple(sorted(s.items())) for s in states]
    index = {k: i for i, k in enumerate(keys)}
    n = len(states)
    area = rows * cols
    P = np.zeros((n, n))
    for i, st in enumerate(states):
        for x in sorted(region):
            nxt = dict(st)
            nxt[x] = 1 - nxt[x]
            arr = np.zeros((rows, cols), dtype=np.int8)
            for (r, c), v in nxt.items():
                arr[r, c] = v
            if is_valid(arr, model, boundary):
                j = index[tuple(sorted(nxt.items()))]
                P[i, j] += 1.0 / area
            else:
                P[i, i] += 1.0 / area
    return states, P


def save_grid(arr: np.ndarray, alphabet: str = "01") -> str:
    arr = np.asarray(arr)
    if arr.ndim == 1:
        arr = arr[None, :]
        m = 1
    else:
        m = 2
    rows, cols = arr.shape
    lines = ["%d %d %d %s" % (m, rows, cols, alphabet)]
    for i in range(rows):
        lines.append("".join(alphabet[int(v)] for v in arr[i]))
    return "\n".join(lines) + "\n"


def load_grid(text: str):
    lines = text.strip().split("\n")
    head = lines[0].split()
    if len(head) != 4:
        raise ValueError("bad grid header")
    m, rows, cols = int(head[0]), int(head[1]), int(head[2])
    alphabet = head[3]
    if len(lines) != rows + 1:
        raise ValueError("row count mismatch")
    arr = np.zeros((rows, cols), dtype=np.int8)
    for i in range(rows):
        row = lines[1 + i]
        if len(row) != cols:
            raise ValueError("column count mismatch on row %d" % i)
        for j, ch in enumerate(row):
            arr[i, j] = alphabet.index(ch)
    if m == 1:
        return arr[0], alphabet
    return arr, alphabet

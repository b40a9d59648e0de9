import math
from itertools import product

import numpy as np
import pytest

from latticecode import spectral as sp
from latticecode.rng import SplitMix64

GOLDEN = (1 + 5 ** 0.5) / 2


def brute_growth(allowed_pair, length, alphabet=(0, 1)):
    """Count strings with every adjacent pair allowed; independent oracle."""
    counts = {a: 1 for a in alphabet}
    for _ in range(length - 1):
        nxt = {a: 0 for a in alphabet}
        for a, c in counts.items():
            for b in alphabet:
                if allowed_pair(a, b):
                    nxt[b] += c
        counts = nxt
    return sum(counts.values())


def fib_graph():
    return sp.build_from_constraints(["0", "1"], lambda a, b: not (a == 1 and b == 1))


def test_fibonacci_eigensystem():
    g = fib_graph()
    e = sp.dominant_eigs(g)
    assert abs(e.value - GOLDEN) < 1e-12
    # brute-force growth rate agrees
    n40 = brute_growth(lambda a, b: not (a == 1 and b == 1), 40)
    n41 = brute_growth(lambda a, b: not (a == 1 and b == 1), 41)
    assert abs(n41 / n40 - e.value) < 1e-6
    # psi proportional to (phi, 1)
    assert abs(e.right[0] / e.right[1] - GOLDEN) < 1e-10


def test_fibonacci_coder_closed_form():
    g = fib_graph()
    e = sp.dominant_eigs(g)
    c = sp.merw_coder(g, e)
    S = c.transition
    assert abs(S[0, 0] - 1 / GOLDEN) < 1e-12
    assert abs(S[0, 1] - 1 / GOLDEN ** 2) < 1e-12
    assert abs(S[1, 0] - 1.0) < 1e-12
    assert S[1, 1] == 0.0
    # stationary distribution proportional to (phi^2, 1)
    assert abs(c.stationary[0] / c.stationary[1] - GOLDEN ** 2) < 1e-10
    assert abs(c.entropy_bits - math.log2(GOLDEN)) < 1e-12


def test_alternating_chain_zero_capacity():
    g = sp.WeightedGraph([[0, 1], [1, 0]])
    e = sp.dominant_eigs(g)
    assert abs(e.value - 1.0) < 1e-12
    # oracle: N_k is constant 2, so lg N_k / k -> 0
    for k in (10, 20):
        assert brute_growth(lambda a, b: a != b, k) == 2


def test_weighted_periodic_graph():
    # period-2 structure with unequal weights; plain iteration oscillates
    g = sp.WeightedGraph([[0, 2], [8, 0]])
    e = sp.dominant_eigs(g)
    assert abs(e.value - 4.0) < 1e-10
    assert abs(e.right[1] / e.right[0] - 2.0) < 1e-8


def test_reducible_rejected_and_decomposed():
    w = [[1, 1, 0], [0, 1, 0], [0, 1, 1]]
    with pytest.raises(sp.ReducibleGraph):
        sp.WeightedGraph(w)
    blocks = sp.decompose(w)
    assert len(blocks) == 3
    assert all(b.size == 1 for b in blocks)


def test_all_zero_rejected():
    with pytest.raises(ValueError):
        sp.WeightedGraph(np.zeros((2, 2)))


def test_build_from_constraints_rejects_dead_symbol():
    # symbol 1 allows nothing incoming: reducible
    with pytest.raises(sp.ReducibleGraph):
        sp.build_from_constraints([0, 1], lambda a, b: b == 0)


def no111_ok(w):
    for i in range(len(w) - 2):
        if w[i] == w[i + 1] == w[i + 2] == 1:
            return False
    return True


def test_block_symbols_no111():
    g = sp.block_symbols([0, 1], 2, no111_ok)
    assert g.size == 4
    e = sp.dominant_eigs(g)
    # oracle: tribonacci growth x^3 = x^2 + x + 1
    root = np.roots([1, -1, -1, -1])
    lam = max(r.real for r in root if abs(r.imag) < 1e-12)
    assert abs(e.value - lam) < 1e-10
    assert abs(math.log2(e.value) - 0.8791) < 1e-4


def kmodel_window_ok(k):
    def ok(w):
        for i, v in enumerate(w):
            if v == 1:
                for j in range(i + 1, min(i + 1 + k, len(w))):
                    if w[j] == 1:
                        return False
        return True

    return ok


def test_block_symbols_matches_direct_kmodel():
    k = 2
    blocked = sp.block_symbols([0, 1], k, kmodel_window_ok(k))
    assert blocked.size == 3
    direct = sp.kmodel_graph(k)
    lb = sp.dominant_eigs(blocked).value
    ld = sp.dominant_eigs(direct).value
    assert abs(lb - ld) < 1e-10


def test_block_symbols_empty_model():
    with pytest.raises(sp.EmptyModel):
        sp.block_symbols([0, 1], 2, lambda w: False)


def test_kmodel_capacity_closed_forms():
    assert abs(sp.kmodel_capacity(0) - 1.0) < 1e-12
    assert abs(sp.kmodel_capacity(1) - math.log2(GOLDEN)) < 1e-11
    # real root of x^3 = x^2 + 1
    root = max(r.real for r in np.roots([1, -1, 0, -1]) if abs(r.imag) < 1e-12)
    assert abs(sp.kmodel_capacity(2) - math.log2(root)) < 1e-11


def test_kmodel_capacity_matches_automaton():
    for k in range(0, 13):
        cap = sp.kmodel_capacity(k)
        lam = sp.dominant_eigs(sp.kmodel_graph(k)).value
        assert abs(cap - math.log2(lam)) < 1e-9


def test_kmodel_capacity_monotone():
    caps = [sp.kmodel_capacity(k) for k in range(9)]
    assert all(a > b for a, b in zip(caps, caps[1:]))
    # group rate (k+1)*capacity grows with k
    rates = [(k + 1) * c for k, c in enumerate(caps)]
    assert all(a < b for a, b in zip(rates, rates[1:]))


def test_kmodel_benefit_values():
    assert sp.kmodel_benefit(1) == 39
    assert sp.kmodel_benefit(4) == 103


def random_irreducible_graph(rng, n):
    """Random 0/1 digraph, forced irreducible by a random Hamiltonian cycle."""
    w = np.zeros((n, n))
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.randbelow(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    for i in range(n):
        w[perm[i], perm[(i + 1) % n]] = 1.0
    for a in range(n):
        for b in range(n):
            if rng.randbelow(3) == 0:
                w[a, b] = 1.0
    return sp.WeightedGraph(w)


def all_paths(weights, length):
    n = len(weights)
    paths = [[a] for a in range(n)]
    for _ in range(length):
        nxt = []
        for p in paths:
            for b in range(n):
                if weights[p[-1], b] > 0:
                    nxt.append(p + [b])
        paths = nxt
    return paths


def test_merw_identities_random_graphs():
    rng = SplitMix64(2024)
    checked = 0
    for trial in range(24):
        n = 2 + rng.randbelow(11)
        g = random_irreducible_graph(rng, n)
        e = sp.dominant_eigs(g)
        c = sp.merw_coder(g, e)
        S, p = c.transition, c.stationary
        assert np.max(np.abs(S.sum(axis=1) - 1.0)) < 1e-12
        assert np.max(np.abs(p @ S - p)) < 1e-10
        assert abs(c.entropy_bits - sp.chain_entropy_bits(c)) < 1e-9
        # pair probabilities consistent both ways
        P = sp.pair_probs(g, e)
        assert abs(P.sum() - 1.0) < 1e-10
        assert np.max(np.abs(P - p[:, None] * S)) < 1e-12
        checked += 1
    assert checked >= 20


def test_fibonacci_digram_frequencies():
    # pair probabilities against a simulated walk, each cell within 3 sigma
    g = fib_graph()
    e = sp.dominant_eigs(g)
    c = sp.merw_coder(g, e)
    P = sp.pair_probs(g, e)
    rng = SplitMix64(5150)
    n = 1_000_000
    state = 0
    counts = np.zeros((2, 2))
    for _ in range(n):
        nxt = 0 if rng.uniform() < c.transition[state, 0] else 1
        counts[state, nxt] += 1
        state = nxt
    for a in range(2):
        for b in range(2):
            p = P[a, b]
            sigma = math.sqrt(max(p * (1 - p), 1e-12) / n)
            assert abs(counts[a, b] / n - p) < 3 * sigma
    assert counts[1, 1] == 0


def test_path_probability_uniformity():
    # all equal-length paths between fixed endpoints are equally likely
    rng = SplitMix64(7)
    for trial in range(6):
        n = 3 + rng.randbelow(4)
        g = random_irreducible_graph(rng, n)
        e = sp.dominant_eigs(g)
        c = sp.merw_coder(g, e)
        k = 5
        lam = e.value
        psi = e.right
        for path in all_paths(g.weights, k)[:400]:
            pr = sp.path_prob(c, path)
            expect = lam ** (-k) * psi[path[-1]] / psi[path[0]]
            assert abs(pr - expect) < 1e-12


def test_forbidden_path():
    g = fib_graph()
    c = sp.merw_coder(g, sp.dominant_eigs(g))
    with pytest.raises(sp.ForbiddenPath):
        sp.path_prob(c, [1, 1])


def test_potentials_symmetric():
    rng = SplitMix64(99)
    n = 5
    v = np.array([rng.uniform() for _ in range(n)])
    edge = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            edge[i, j] = edge[j, i] = rng.uniform()
    pot = sp.Potentials(v, edge)
    g = sp.from_potentials(pot)
    # symmetric M: left and right eigenvectors coincide
    assert np.allclose(g.weights, g.weights.T)
    e = sp.dominant_eigs(g)
    l = e.left / np.linalg.norm(e.left)
    r = e.right / np.linalg.norm(e.right)
    assert np.max(np.abs(l - r)) < 1e-9
    # stationary p_i = psi_i^2 under unit 2-norm
    c = sp.merw_coder(g, e)
    psi2 = r ** 2
    assert np.max(np.abs(c.stationary - psi2)) < 1e-9


def test_potentials_infinite_edge_forbids():
    v = [0.0, 0.0]
    edge = [[0.0, 0.0], [0.0, np.inf]]
    g = sp.from_potentials(sp.Potentials(v, edge))
    assert g.weights[1, 1] == 0.0
    assert g.weights[0, 0] > 0


def test_load_graph_roundtrip_and_errors():
    g = sp.load_graph("2\n0 1\n1 0\n")
    assert g.size == 2
    with pytest.raises(ValueError):
        sp.load_graph("2\n0 inf\n1 0\n")
    with pytest.raises(ValueError):
        sp.load_graph("")
    with pytest.raises(ValueError):
        sp.load_graph("2\n0 1\n")


def test_report_text_format():
    g = fib_graph()
    e = sp.dominant_eigs(g)
    c = sp.merw_coder(g, e)
    out = sp.report_text(g, e, c)
    lines = dict(ln.split(" = ", 1) for ln in out.strip().splitlines())
    assert float(lines["lambda"]) == pytest.approx(GOLDEN, abs=1e-12)
    assert float(lines["entropy_bits"]) == pytest.approx(math.log2(GOLDEN), abs=1e-12)
    assert len(lines["stationary"].split()) == 2


def test_eigen_residual_invariant():
    for mat in ([[1, 1], [1, 0]], [[0, 2], [8, 0]], [[1, 2, 0], [0, 1, 3], [4, 0, 1]]):
        g = sp.WeightedGraph(mat)
        e = sp.dominant_eigs(g, tol=1e-12)
        assert e.residual < 1e-11
        assert np.all(e.right > 0) and np.all(e.left > 0)
        assert abs(float(e.left @ e.right) - 1.0) < 1e-12

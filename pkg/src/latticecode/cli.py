"""Command line front end for the whole toolkit.

One executable, one subcommand per pipeline: capacities, the maximal
entropy walk, file entropy coders, lattice samplers, statistical
descriptions, the strip codec, both heuristic writers, and the frozen
reference report.  Every run prints its resolved configuration to stderr
and routes all randomness through one --seed, so identical argv gives
byte-identical output.  Exit codes: 0 success, 1 data error, 2 usage.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import ans
from . import experiments as exp
from . import lattice as lat
from . import spectral as spec
from . import strip as st

class UsageError(Exception):
    """Bad flag combination or malformed flag value; exits 2."""


_DATA_ERRORS = (ValueError, KeyError, OSError,
                ans.CorruptStream,
                st.TooWide, st.InvalidLattice, st.ConfigMismatch,
                spec.ReducibleGraph, spec.NoConvergence, spec.EmptyModel,
                spec.ForbiddenPath,
                lat.TooLarge, lat.EmptyConditioning, lat.ZeroPrefix)


def _fmt(x: float) -> str:
    return "%.15g" % x


def _bits_from_bytes(data: bytes) -> list:
    out = []
    for byte in data:
        for k in range(7, -1, -1):
            out.append((byte >> k) & 1)
    return out


def _bytes_from_bits(bits) -> bytes:
    if len(bits) % 8:
        raise ValueError("bit count %d is not a whole number of bytes" % len(bits))
    out = bytearray()
    for i in range(0, len(bits), 8):
        byte = 0
        for b in bits[i:i + 8]:
            byte = (byte << 1) | int(b)
        out.append(byte)
    return bytes(out)


def _read_text(path: str) -> str:
    return Path(path).read_text()


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_shape(token: str):
    try:
        r, c = token.lower().split("x")
        rows, cols = int(r), int(c)
    except ValueError:
        raise UsageError("bad shape %r, expected ROWSxCOLS" % token)
    if rows < 1 or cols < 1:
        raise UsageError("shape sides must be positive")
    return tuple(sorted((i, j) for i in range(rows) for j in range(cols)))


def _load_grids(text: str) -> list:
    """Parse a file of concatenated grid blocks."""
    lines = [ln for ln in text.split("\n") if ln.strip()]
    grids = []
    pos = 0
    while pos < len(lines):
        head = lines[pos].split()
        if len(head) != 4:
            raise ValueError("bad grid header on line %d" % (pos + 1))
        rows = int(head[1])
        block = "\n".join(lines[pos:pos + rows + 1])
        arr, _ = lat.load_grid(block)
        grids.append(np.atleast_2d(arr))
        pos += rows + 1
    if not grids:
        raise ValueError("no grids in input")
    return grids


# ---------------------------------------------------------------------------
# subcommands


def _chain_capacity(model: lat.LatticeModel) -> float:
    """lg of the Perron root of the sliding-window automaton of a chain."""
    r = max(1, model.constraint_range)

    def ok(cells):
        return not lat.scan(np.array(cells, dtype=int), model)

    states = [w for w in itertools.product(model.alphabet, repeat=r) if ok(w)]

    def allowed(i, j):
        return (states[i][1:] == states[j][:-1]
                and ok(states[i] + (states[j][-1],)))

    graph = spec.build_from_constraints(states, allowed)
    return math.log2(spec.dominant_eigs(graph).value)


def cmd_capacity(args) -> int:
    name = args.model
    print("model %s" % name)
    if name.startswith("k-model:"):
        k = int(name.split(":", 1)[1])
        if args.width:
            raise UsageError("--width applies to 2-d models only")
        print("capacity %.6f" % spec.kmodel_capacity(k))
        print("benefit %d%%" % spec.kmodel_benefit(k))
        return 0
    model = lat.model_preset(name)
    if model.dimension == 1:
        if args.width:
            raise UsageError("--width applies to 2-d models only")
        print("capacity %.6f" % _chain_capacity(model))
        return 0
    if not args.width:
        raise UsageError("2-d models need --width for the strip bound")
    print("width %d" % args.width)
    print("boundary %s" % args.boundary)
    print("capacity %.6f" % st.strip_capacity(model, args.width, args.boundary))
    return 0


def cmd_merw(args) -> int:
    graph = spec.load_graph(_read_text(args.graph))
    eigs = spec.dominant_eigs(graph)
    coder = spec.merw_coder(graph, eigs)
    sys.stdout.write(spec.report_text(graph, eigs, coder))
    for i in range(graph.size):
        print("S[%d] = %s" % (i, " ".join(_fmt(x) for x in coder.transition[i])))
    if args.path:
        path = [int(x) for x in args.path.split(",")]
        print("path_prob = %s" % _fmt(spec.path_prob(coder, path)))
    return 0


def _binary_table(q: Fraction, precision: int, key: int) -> ans.AnsTable:
    if not 0 < q < 1:
        raise UsageError("q must lie strictly inside (0, 1)")
    return ans.ans_build_table([1 - q, q], 1 << precision, 2, key)


def _parse_fraction(text: str, what: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError("bad %s %r" % (what, text))


def cmd_abs(args) -> int:
    q = _parse_fraction(args.q, "--q")
    table = _binary_table(q, args.precision, args.key)
    if args.mode == "encode":
        bits = _bits_from_bytes(Path(args.infile).read_bytes())
        digits, x = ans.ans_stream_encode(bits, table)
        blob = ans.pack_container(table, x, digits)
        Path(args.out).write_bytes(blob)
        if args.verify:
            t2, x2, d2 = ans.unpack_container(blob)
            if ans.ans_stream_decode(d2, t2, x2) != bits:
                raise ans.CorruptStream("verification reread mismatch")
        print("symbols %d" % len(bits))
        print("stored_bits %d" % ans.stream_bits(len(digits), table))
    else:
        table2, x, digits = ans.unpack_container(Path(args.infile).read_bytes())
        bits = ans.ans_stream_decode(digits, table2, x)
        Path(args.out).write_bytes(_bytes_from_bits(bits))
        print("symbols %d" % len(bits))
    return 0


def cmd_ans(args) -> int:
    qs = [_parse_fraction(tok, "--probs entry") for tok in args.probs.split(",")]
    if any(q <= 0 for q in qs) or sum(qs) != 1:
        raise UsageError("probabilities must be positive and sum to 1")
    n = len(qs)
    if args.forbidden_eps:
        qs = ans.forbidden_symbol_wrap(qs, _parse_fraction(args.forbidden_eps,
                                                            "--forbidden-eps"))
    table = ans.ans_build_table(qs, 1 << args.precision, 1 << args.digit_bits,
                                args.key)
    if args.mode == "encode":
        data = Path(args.infile).read_bytes()
        if any(byte >= n for byte in data):
            raise ValueError("input byte outside the %d-symbol alphabet" % n)
        digits, x = ans.ans_stream_encode(list(data), table)
        blob = ans.pack_container(table, x, digits)
        Path(args.out).write_bytes(blob)
        if args.verify:
            t2, x2, d2 = ans.unpack_container(blob)
            if ans.ans_stream_decode(d2, t2, x2) != list(data):
                raise ans.CorruptStream("verification reread mismatch")
        print("symbols %d" % len(data))
        print("stored_bits %d" % ans.stream_bits(len(digits), table))
    else:
        table2, x, digits = ans.unpack_container(Path(args.infile).read_bytes())
        if args.forbidden_eps:
            syms, hit = ans.ans_stream_decode_checked(digits, table2, x,
                                                      table2.n - 1)
            if hit is not None:
                raise ans.CorruptStream("forbidden symbol at position %d"
                                        % hit.position)
        else:
            syms = ans.ans_stream_decode(digits, table2, x)
        Path(args.out).write_bytes(bytes(syms))
        print("symbols %d" % len(syms))
    return 0


def cmd_sample(args) -> int:
    model = lat.model_preset(args.model)
    shape = (args.cols,) if model.dimension == 1 else (args.rows, args.cols)
    grids = lat.thermalize(shape, model, seed=args.seed, samples=args.samples,
                           warmup_sweeps=args.warmup,
                           spacing_moves=args.spacing, boundary=args.boundary)
    _emit(args, "".join(lat.save_grid(g) for g in grids))
    return 0


def cmd_describe(args) -> int:
    model = lat.model_preset(args.model)
    shapes = [_parse_shape(tok) for tok in args.shapes.split(",")]
    if model.dimension == 1:
        if any(x[0] != 0 for s in shapes for x in s):
            raise UsageError("chain shapes must be 1xC")
        shapes = [tuple((j,) for _, j in s) for s in shapes]
    context = None
    if args.ploc:
        origin = (0,) * model.dimension
        context = tuple(sorted(x for x in model.neighborhood if x != origin))
        if not context:
            raise ValueError("model has no neighbourhood to condition on")
        shapes.append(tuple(sorted(model.neighborhood)))
    if args.exact:
        if model.dimension == 1:
            region = lat.segment(args.cols, -(args.cols // 2))
        else:
            region = lat.rect(args.rows, args.cols,
                              (-(args.rows // 2), -(args.cols // 2)))
        desc = lat.exact_description(region, model, shapes,
                                     boundary=args.boundary)
    else:
        if model.dimension == 1:
            raise UsageError("empirical description works on 2-d samples")
        if not args.infile:
            raise UsageError("empirical description needs --in sample grids")
        desc = lat.empirical_description(_load_grids(_read_text(args.infile)),
                                         shapes, model.alphabet)
    print("normalization_error %s" % _fmt(desc.normalization_error()))
    for shape in sorted(desc.tables):
        cells = ";".join("%d,%d" % x if len(x) == 2 else "%d" % x
                         for x in shape)
        for assign in sorted(desc.tables[shape]):
            word = "".join(str(s) for s in assign)
            print("p[%s][%s] = %s" % (cells, word, _fmt(desc.tables[shape][assign])))
    if args.ploc:
        print("ploc_violation %s" % _fmt(lat.check_pLOC(desc, model, [context])))
    return 0


def cmd_strip(args) -> int:
    model = lat.model_preset(args.model)
    if args.mode in ("build", "capacity"):
        strip = st.strip_model(model, args.width, args.boundary)
        if args.mode == "build":
            print("columns %d" % len(strip.columns))
            print("degenerate_cyclic %s" % strip.degenerate_cyclic)
        print("capacity %.6f" % strip.capacity)
        return 0
    if args.mode == "encode":
        if not args.infile:
            raise UsageError("encode needs --in")
        strip = st.strip_model(model, args.width, args.boundary)
        codec = st.LatticeCodec(strip, args.precision)
        bits = _bits_from_bytes(Path(args.infile).read_bytes())
        try:
            res = codec.encode(bits, args.columns)
        except ans.CapacityExceeded as e:
            print("error: lattice holds only %d of %d payload bits"
                  % (e.achieved_bits, len(bits)), file=sys.stderr)
            return 1
        text = st.encode_to_text(strip, res, len(bits), args.precision)
        if args.verify and st.decode_text(text) != bits:
            raise ans.CorruptStream("verification reread mismatch")
        _emit(args, text)
        print("consumed %d" % res.consumed, file=sys.stderr)
        return 0
    if args.mode == "decode":
        if not args.infile or not args.out:
            raise UsageError("decode needs --in and --out")
        bits = st.decode_text(_read_text(args.infile))
        Path(args.out).write_bytes(_bytes_from_bits(bits))
        return 0
    rep = st.evaluate_rate(args.model, args.width, args.columns,
                           trials=args.trials, boundary=args.boundary,
                           precision=args.precision, seed=args.seed,
                           jobs=args.jobs, verify=args.verify)
    if args.format == "csv":
        print("trial,rate")
        for i, r in enumerate(rep.rates):
            print("%d,%s" % (i, _fmt(r)))
        print("mean,%s" % _fmt(rep.mean))
        print("stderr,%s" % _fmt(rep.stderr))
        print("capacity,%s" % _fmt(rep.capacity))
    else:
        for i, r in enumerate(rep.rates):
            print("rate[%d] = %s" % (i, _fmt(r)))
        print("mean = %s" % _fmt(rep.mean))
        print("stderr = %s" % _fmt(rep.stderr))
        print("capacity = %s" % _fmt(rep.capacity))
        print("gap = %s" % _fmt(rep.capacity - rep.mean))
    return 0


def cmd_algo1(args) -> int:
    if args.mode == "rate":
        if args.q is None:
            q, closed = exp.algorithm1_optimum()
            print("optimal_q = %s" % _fmt(q))
        else:
            q = args.q
            closed = exp.algorithm1_entropy(q)
        rep = exp.algorithm1_rate(q, side=args.side, trials=args.trials,
                                  seed=args.seed, precision=args.precision,
                                  jobs=args.jobs, verify=args.verify)
        print("closed_form = %s" % _fmt(closed))
        print("mean = %s" % _fmt(rep.mean))
        print("stderr = %s" % _fmt(rep.stderr))
        print("gap = %s" % _fmt(closed - rep.mean))
        return 0
    if args.mode == "encode":
        if not args.infile:
            raise UsageError("encode needs --in")
        if args.q is None:
            args.q, _ = exp.algorithm1_optimum()
        bits = _bits_from_bytes(Path(args.infile).read_bytes())
        try:
            res = exp.algorithm1_encode((args.rows, args.cols), args.q, bits,
                                        args.precision)
        except ans.CapacityExceeded as e:
            print("error: lattice holds only %d of %d payload bits"
                  % (e.achieved_bits, len(bits)), file=sys.stderr)
            return 1
        head = ("algo1 q=%r R=%d x=%d bits=%d"
                % (args.q, args.precision, res.final_state, len(bits)))
        _emit(args, head + "\n" + lat.save_grid(res.grid))
        return 0
    if not args.infile or not args.out:
        raise UsageError("decode needs --in and --out")
    text = _read_text(args.infile)
    first, rest = text.split("\n", 1)
    head = first.split()
    if not head or head[0] != "algo1":
        raise st.ConfigMismatch("missing algo1 header")
    meta = dict(tok.split("=", 1) for tok in head[1:])
    grid, _ = lat.load_grid(rest)
    bits = exp.algorithm1_decode(np.atleast_2d(grid), float(meta["q"]),
                                 int(meta["x"]), int(meta["bits"]),
                                 int(meta["R"]))
    Path(args.out).write_bytes(_bytes_from_bits(bits))
    return 0


def cmd_algo2(args) -> int:
    profile = exp.DEFAULT_PROFILE
    if args.profile:
        try:
            coeffs = tuple(float(x) for x in args.profile.split(","))
        except ValueError:
            raise UsageError("bad --profile %r" % args.profile)
        profile = exp.ChargingProfile(coeffs)
    rep = exp.algorithm2_simulate(args.side, trials=args.trials,
                                  profile=profile, seed=args.seed,
                                  bins=args.bins, jobs=args.jobs)
    if args.format == "csv":
        print("name,value,stderr")
        for name in sorted(rep.scalars):
            v, s = rep.scalars[name]
            print("%s,%s,%s" % (name, _fmt(v), _fmt(s)))
        for cname in sorted(rep.curves):
            xs, ys = rep.curves[cname]
            print("curve,%s" % cname)
            for x, y in zip(xs, ys):
                print("%s,%s" % (_fmt(x), _fmt(y)))
    else:
        for name in sorted(rep.scalars):
            v, s = rep.scalars[name]
            print("%s = %s +- %s" % (name, _fmt(v), _fmt(s)))
    return 0


def cmd_report(args) -> int:
    rows, ok = exp.reproduce_tables()
    if args.format == "csv":
        print("name,computed,reference,tolerance,pass")
        for r in rows:
            print("%s,%s,%s,%s,%s" % (r.name, r.computed, r.reference,
                                      r.tolerance, r.passed))
    else:
        width = max(len(r.name) for r in rows)
        for r in rows:
            print("%-*s  %12s  %12s  (tol %s)  %s"
                  % (width, r.name, r.computed, r.reference, r.tolerance,
                     "pass" if r.passed else "FAIL"))
    print("verdict %s" % ("pass" if ok else "FAIL"))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0)


def _add_jobs(p):
    p.add_argument("--jobs", type=int, default=1)


def _add_format(p):
    p.add_argument("--format", choices=("text", "csv"), default="text")


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="latticecode", description=__doc__)
    sub = top.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("capacity", help="1-d automaton or 2-d strip capacity")
    p.add_argument("--model", default="hard-square")
    p.add_argument("--width", type=int, default=0)
    p.add_argument("--boundary", choices=("zero", "cyclic"), default="zero")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("merw", help="maximal entropy walk of a weighted graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--path", default="")
    p.set_defaults(func=cmd_merw)

    p = sub.add_parser("abs", help="binary entropy coder over a file")
    p.add_argument("mode", choices=("encode", "decode"))
    p.add_argument("--q", default="0.5", help="probability of bit 1")
    p.add_argument("--precision", type=int, default=12)
    p.add_argument("--key", type=int, default=0)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_abs)

    p = sub.add_parser("ans", help="n-symbol entropy coder over a file")
    p.add_argument("mode", choices=("encode", "decode"))
    p.add_argument("--probs", default="0.5,0.5")
    p.add_argument("--precision", type=int, default=12)
    p.add_argument("--digit-bits", type=int, default=1)
    p.add_argument("--key", type=int, default=0)
    p.add_argument("--forbidden-eps", default="")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_ans)

    p = sub.add_parser("sample", help="uniform valid valuations by flip chain")
    p.add_argument("--model", default="hard-square")
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--spacing", type=int, default=None)
    p.add_argument("--boundary", choices=("free", "zero", "cyclic"),
                   default="free")
    p.add_argument("--out", default="")
    _add_seed(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("describe", help="pattern probabilities of a model")
    p.add_argument("--model", default="hard-square")
    p.add_argument("--shapes", default="1x1")
    p.add_argument("--in", dest="infile", default="")
    p.add_argument("--exact", action="store_true")
    p.add_argument("--rows", type=int, default=5)
    p.add_argument("--cols", type=int, default=5)
    p.add_argument("--boundary", choices=("free", "zero", "cyclic"),
                   default="free")
    p.add_argument("--ploc", action="store_true")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("strip", help="width-n strip codec pipelines")
    p.add_argument("mode",
                   choices=("build", "capacity", "encode", "decode",
                            "evaluate"))
    p.add_argument("--model", default="hard-square")
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--boundary", choices=("zero", "cyclic"), default="zero")
    p.add_argument("--columns", type=int, default=256)
    p.add_argument("--precision", type=int, default=16)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--in", dest="infile", default="")
    p.add_argument("--out", default="")
    p.add_argument("--verify", action="store_true")
    _add_seed(p)
    _add_jobs(p)
    _add_format(p)
    p.set_defaults(func=cmd_strip)

    p = sub.add_parser("algo1", help="two-pass checkerboard writer")
    p.add_argument("mode", choices=("rate", "encode", "decode"), nargs="?",
                   default="rate")
    p.add_argument("--q", type=float, default=None,
                   help="write probability; optimal when omitted")
    p.add_argument("--side", type=int, default=256)
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--trials", type=int, default=4)
    p.add_argument("--precision", type=int, default=16)
    p.add_argument("--in", dest="infile", default="")
    p.add_argument("--out", default="")
    p.add_argument("--verify", action="store_true")
    _add_seed(p)
    _add_jobs(p)
    p.set_defaults(func=cmd_algo1)

    p = sub.add_parser("algo2", help="random-order writer measurement")
    p.add_argument("--side", type=int, default=100)
    p.add_argument("--trials", type=int, default=4)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--profile", default="",
                   help="comma-separated polynomial coefficients")
    _add_seed(p)
    _add_jobs(p)
    _add_format(p)
    p.set_defaults(func=cmd_algo2)

    p = sub.add_parser("report", help="recompute the frozen reference values")
    _add_format(p)
    p.set_defaults(func=cmd_report)

    return top


def _log_config(args) -> None:
    pairs = sorted((k, v) for k, v in vars(args).items() if k != "func")
    print("# " + " ".join("%s=%s" % kv for kv in pairs), file=sys.stderr)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _log_config(args)
    try:
        return args.func(args)
    except UsageError as e:
        print("usage error: %s" % e, file=sys.stderr)
        return 2
    except ans.CapacityExceeded as e:
        print("error: capacity exceeded after %d bits" % e.achieved_bits,
              file=sys.stderr)
        return 1
    except _DATA_ERRORS as e:
        print("error: %s" % e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

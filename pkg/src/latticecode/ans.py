"""Asymmetric-numeral-system coders.

Two layers:

* Two-symbol closed-form coder.  The state x accumulates information; the
  decode split sends x to (s, x_s) with

      ceiling variant:  s = ceil((x+1) q) - ceil(x q)
                        x_1 = ceil(x q),  x_0 = x - ceil(x q)
      floor variant:    s = floor((x+1) q) - floor(x q)
                        x_1 = floor(x q), x_0 = x - floor(x q)

  and the encode step is the inverse C(s, x_s).  All arithmetic is exact
  rational (q given as a Fraction or numerator/denominator pair).

* Tabled multi-symbol coder over the state interval I = {l, ..., b l - 1}.
  The decode table is filled either by a keyed shuffle (a pool holding
  (b-1) l_s copies of each symbol is consumed by the pinned splitmix64
  stream: i = rng.randbelow(m); s = pool[i]; pool[i] = pool[m-1]; m -= 1)
  or by the deterministic rule that places symbol s at the states where
  ceil(x R_s) - ceil(x R_{s+1}) increments, R_s being the suffix sum
  q_s + ... + q_{n-1}.  For two symbols the deterministic rule reproduces
  the ceiling-variant closed form exactly.

Stream coding renormalizes the state into I with base-b digit moves.  The
encoder walks its input back to front so the decoder emits symbols in
natural order; the emitted digit sequence is returned already reversed
into decoder order, which makes decoding a single forward pass.
"""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .rng import SplitMix64


class DegenerateSymbol(ValueError):
    pass


class CorruptStream(ValueError):
    pass


class CapacityExceeded(RuntimeError):
    """Payload does not fit; carries the achieved bit count."""

    def __init__(self, achieved_bits: int):
        self.achieved_bits = achieved_bits
        super().__init__("payload does not fit; stored %d bits" % achieved_bits)


@dataclass(frozen=True)
class ErrorDetected:
    """Corruption flag raised by the forbidden-symbol mechanism."""

    position: int


@dataclass(frozen=True)
class AbsParams:
    """Two-symbol stream parameters: q = P(1), interval base l = 2^precision."""

    q: Fraction
    precision: int
    digit_bits: int = 1
    variant: str = "ceiling"

    def __post_init__(self):
        q = Fraction(self.q)
        object.__setattr__(self, "q", q)
        if not 0 < q < 1:
            raise ValueError("q must be strictly between 0 and 1")
        if self.precision < 1 or self.digit_bits < 1:
            raise ValueError("precision and digit_bits must be positive")
        if self.variant not in ("ceiling", "floor"):
            raise ValueError("variant must be 'ceiling' or 'floor'")


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _as_ratio(q) -> tuple[int, int]:
    f = Fraction(q)
    return f.numerator, f.denominator


def abs_decode_step(x: int, q, variant: str = "ceiling") -> tuple[int, int]:
    """Split state x into (symbol, reduced state)."""
    if x < 0:
        raise ValueError("state must be nonnegative")
    num, den = _as_ratio(q)
    if not 0 < num < den:
        raise ValueError("q must be strictly between 0 and 1")
    if variant == "ceiling":
        x1 = _ceil_div(x * num, den)
        s = _ceil_div((x + 1) * num, den) - x1
    elif variant == "floor":
        x1 = (x * num) // den
        s = ((x + 1) * num) // den - x1
    else:
        raise ValueError("unknown variant %r" % variant)
    return (1, x1) if s else (0, x - x1)


def abs_encode_step(s: int, xs: int, q, variant: str = "ceiling") -> int:
    """Inverse of abs_decode_step: merge symbol s into reduced state xs."""
    if xs < 0:
        raise ValueError("state must be nonnegative")
    num, den = _as_ratio(q)
    if not 0 < num < den:
        raise ValueError("q must be strictly between 0 and 1")
    if variant == "ceiling":
        if s:
            return (xs * den) // num
        return _ceil_div((xs + 1) * den, den - num) - 1
    if variant == "floor":
        if s:
            return _ceil_div((xs + 1) * den, num) - 1
        return (xs * den) // (den - num)
    raise ValueError("unknown variant %r" % variant)


@dataclass(frozen=True)
class AbsValidation:
    ok: bool
    reason: str = ""
    residue: int = 0


def abs_validate(params: AbsParams) -> AbsValidation:
    """Check that the digit intervals are base-2^w absorbing for this q.

    Requires q dyadic with at most `precision` fractional bits, and the
    boundary count ceil(2^(R+w) q) (floor for the floor variant) to be a
    multiple of 2^w.
    """
    num, den = params.q.numerator, params.q.denominator
    l = 1 << params.precision
    if l % den != 0:
        return AbsValidation(False, "q is not dyadic with <= %d fractional bits" % params.precision)
    b = 1 << params.digit_bits
    scaled = b * l * num
    edge = _ceil_div(scaled, den) if params.variant == "ceiling" else scaled // den
    residue = edge % b
    if residue:
        return AbsValidation(False, "interval edge not divisible by digit base", residue)
    return AbsValidation(True)


def largest_remainder(l: int, qs: Sequence[float]) -> list[int]:
    """Apportion l state slots to probabilities; ties broken by symbol index."""
    fr = [Fraction(q) for q in qs]
    total = sum(fr)
    if total <= 0:
        raise ValueError("probabilities must be positive")
    fr = [f / total for f in fr]
    base = [int(f * l) for f in fr]
    rem = l - sum(base)
    order = sorted(range(len(fr)), key=lambda s: (-(fr[s] * l - base[s]), s))
    out = list(base)
    for s in order[:rem]:
        out[s] += 1
    return out


class AnsTable:
    """Decode/encode tables over I = {l, ..., b l - 1}."""

    def __init__(self, l: int, b: int, l_s: Sequence[int], dec_sym: Sequence[int], key: int = 0):
        self.l = l
        self.b = b
        self.l_s = list(l_s)
        self.n = len(self.l_s)
        self.key = key
        if sum(self.l_s) != l:
            raise ValueError("l_s must sum to l")
        if any(v <= 0 for v in self.l_s):
            raise DegenerateSymbol("every symbol needs at least one slot")
        if len(dec_sym) != (b - 1) * l:
            raise ValueError("decode column has wrong length")
        self.dec_sym = list(dec_sym)
        self.dec_xs = [0] * len(self.dec_sym)
        counters = list(self.l_s)
        self.enc = [[0] * ((b - 1) * ls) for ls in self.l_s]
        for i, s in enumerate(self.dec_sym):
            xs = counters[s]
            counters[s] += 1
            self.dec_xs[i] = xs
            self.enc[s][xs - self.l_s[s]] = l + i
        for s, ls in enumerate(self.l_s):
            if counters[s] != b * ls:
                raise ValueError("symbol %d occupies %d slots, expected %d" % (s, counters[s] - ls, (b - 1) * ls))

    @property
    def probabilities(self) -> list[Fraction]:
        return [Fraction(ls, self.l) for ls in self.l_s]

    def decode_step(self, x: int) -> tuple[int, int]:
        i = x - self.l
        return self.dec_sym[i], self.dec_xs[i]

    def encode_step(self, s: int, xs: int) -> int:
        return self.enc[s][xs - self.l_s[s]]


def ans_build_table(qs: Sequence[float], l: int, b: int = 2, key: int = 0) -> AnsTable:
    """Keyed pseudo-random table: pool of (b-1) l_s copies per symbol,
    consumed by the pinned splitmix64 stream in state order x = l .. bl-1."""
    l_s = largest_remainder(l, qs)
    if any(v == 0 for v in l_s):
        raise DegenerateSymbol("a probability rounded to zero slots; increase l")
    pool: list[int] = []
    for s, ls in enumerate(l_s):
        pool.extend([s] * ((b - 1) * ls))
    rng = SplitMix64(key)
    m = len(pool)
    dec_sym = []
    for _ in range(m):
        i = rng.randbelow(m)
        dec_sym.append(pool[i])
        pool[i] = pool[m - 1]
        m -= 1
    return AnsTable(l, b, l_s, dec_sym, key)


def ans_build_table_precise(qs: Sequence[float], l: int, b: int = 2) -> AnsTable:
    """Deterministic table built from chained two-way ceiling splits.

    With suffix slot counts R_s = l_s + ... + l_{n-1}, state x is classified
    by asking "symbol >= s+1?" at the conditional ratio R_{s+1}/R_s: the
    answer is yes when ceil((v+1) R_{s+1} / R_s) > ceil(v R_{s+1} / R_s),
    in which case v moves to that ceiling and the chain continues.  Each
    split is the exact two-symbol ceiling-variant bijection, so every
    symbol receives exactly (b-1) l_s states and the single-split case
    reproduces abs_decode_step."""
    l_s = largest_remainder(l, qs)
    if any(v == 0 for v in l_s):
        raise DegenerateSymbol("a probability rounded to zero slots; increase l")
    n = len(l_s)
    suffix = [0] * (n + 1)
    for s in range(n - 1, -1, -1):
        suffix[s] = suffix[s + 1] + l_s[s]

    def symbol_at(x):
        v, den = x, l
        for s in range(n - 1):
            num = suffix[s + 1]
            if num == 0:
                return s
            v1 = _ceil_div(v * num, den)
            if _ceil_div((v + 1) * num, den) == v1:
                return s
            v, den = v1, num
        return n - 1

    dec_sym = [symbol_at(x) for x in range(l, b * l)]
    return AnsTable(l, b, l_s, dec_sym, key=0)


class StreamState:
    """Incremental coder state: x in I plus the digit buffer.

    Encoding pushes symbols in reverse message order, stacking fresh digits
    at the front (LIFO); decoding pops symbols in message order, consuming
    the buffer front (FIFO).  ans_stream_encode / ans_stream_decode are the
    batch equivalents."""

    def __init__(self, table: AnsTable, x: Optional[int] = None, digits: Iterable[int] = ()):
        self.table = table
        self.x = table.l if x is None else x
        if not table.l <= self.x < table.b * table.l:
            raise ValueError("state outside the coding interval")
        self.digits = deque(digits)

    def push(self, s: int) -> None:
        t = self.table
        x = self.x
        top = t.b * t.l_s[s] - 1
        while x > top:
            self.digits.appendleft(x % t.b)
            x //= t.b
        self.x = t.encode_step(s, x)

    def pop(self) -> int:
        t = self.table
        s, x = t.decode_step(self.x)
        while x < t.l:
            if not self.digits:
                raise CorruptStream("digit stream exhausted during renormalization")
            x = x * t.b + self.digits.popleft()
        self.x = x
        return s


def ans_table_from_abs(q, l: int, b: int = 2, variant: str = "ceiling") -> AnsTable:
    """Two-symbol table whose state layout comes from the closed-form coder
    at exact rational q (not quantized to a multiple of 1/l)."""
    dec_sym = [abs_decode_step(x, q, variant)[0] for x in range(l, b * l)]
    ones = sum(dec_sym)
    if ones % (b - 1):
        raise DegenerateSymbol("symbol slots not divisible by b-1")
    l1 = ones // (b - 1)
    if l1 == 0 or l1 == l:
        raise DegenerateSymbol("q too extreme for this interval")
    return AnsTable(l, b, [l - l1, l1], dec_sym)


def absorb(x: int, l: int, b: int, digits: Optional[Iterable[int]] = None) -> tuple[int, list[int], int]:
    """Normalize x into I: divide out digits while too big, pull digits while
    too small.  Returns (state, emitted digits, steps)."""
    if x < 1:
        raise ValueError("state must be positive")
    emitted = []
    steps = 0
    it = iter(digits) if digits is not None else iter(())
    while x > b * l - 1:
        emitted.append(x % b)
        x //= b
        steps += 1
    while x < l:
        try:
            d = next(it)
        except StopIteration:
            raise CorruptStream("digit stream exhausted during renormalization")
        x = x * b + d
        steps += 1
    return x, emitted, steps


def ans_stream_encode(symbols: Sequence[int], table: AnsTable, initial_x: Optional[int] = None) -> tuple[list[int], int]:
    """Encode symbols (walked back to front); digits come back in decoder order."""
    l, b = table.l, table.b
    x = l if initial_x is None else initial_x
    if not l <= x < b * l:
        raise ValueError("initial state outside the coding interval")
    enc = table.enc
    l_s = table.l_s
    hi = [b * ls - 1 for ls in l_s]
    emitted: list[int] = []
    append = emitted.append
    for s in reversed(symbols):
        top = hi[s]
        while x > top:
            append(x % b)
            x //= b
        x = enc[s][x - l_s[s]]
    emitted.reverse()
    return emitted, x


def ans_stream_decode(digits: Sequence[int], table: AnsTable, final_x: int,
                      count: Optional[int] = None) -> list[int]:
    """Decode a digit stream produced by ans_stream_encode.

    With count=None the stream must have started at x = l; decoding then
    drains the state back to l, which is unambiguous because every
    digit-free encode step strictly increases the state.
    """
    l, b = table.l, table.b
    if not l <= final_x < b * l:
        raise CorruptStream("final state outside the coding interval")
    dec_sym, dec_xs = table.dec_sym, table.dec_xs
    x = final_x
    pos = 0
    nd = len(digits)
    out: list[int] = []
    append = out.append
    while True:
        if count is None:
            if x == l and pos == nd:
                break
        elif len(out) >= count:
            break
        i = x - l
        append(dec_sym[i])
        x = dec_xs[i]
        while x < l:
            if pos >= nd:
                raise CorruptStream("digit stream exhausted during renormalization")
            x = x * b + digits[pos]
            pos += 1
    return out


def stream_bits(digits_count: int, table: AnsTable) -> int:
    """Total stored bits: digits plus the final-state field."""
    w = int(round(math.log2(table.b)))
    r = int(round(math.log2(table.l)))
    return digits_count * w + r + w


def waste_estimate(table: AnsTable, qs: Optional[Sequence[float]] = None) -> float:
    """Second-order redundancy estimate in bits per symbol.

    For each state x = C(s, x_s) of the table, the step cost above the
    ideal lg(1/q_s) is approximated by q_s (x_s/q_s - x)^2 / (x^2 ln 4);
    states are averaged with weight proportional to 1/x, the stationary
    visit law of the coder.
    """
    if qs is None:
        qs = [ls / table.l for ls in table.l_s]
    total = 0.0
    norm = 0.0
    l = table.l
    for i, s in enumerate(table.dec_sym):
        x = l + i
        xs = table.dec_xs[i]
        w = 1.0 / x
        q = float(qs[s])
        d = xs / q - x
        total += w * q * d * d / (x * x)
        norm += w
    return total / (norm * math.log(4.0))


def forbidden_symbol_wrap(qs: Sequence[float], eps: Fraction) -> list[Fraction]:
    """Scale probabilities by (1-eps) and append a never-encoded symbol."""
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must be in (0,1)")
    out = [Fraction(q) * (1 - eps) for q in qs]
    out.append(eps)
    return out


def ans_stream_decode_checked(digits: Sequence[int], table: AnsTable, final_x: int,
                              forbidden: int, count: Optional[int] = None,
                              consumed_at: Optional[list] = None
                              ) -> tuple[list[int], Optional[ErrorDetected]]:
    """Decode, flagging the first occurrence of the forbidden symbol.

    Digit exhaustion mid-stream is also treated as a detection at the
    current position rather than an exception.  When consumed_at is given
    it receives, per emitted symbol, the digit count consumed before it.
    """
    l, b = table.l, table.b
    if not l <= final_x < b * l:
        return [], ErrorDetected(0)
    dec_sym, dec_xs = table.dec_sym, table.dec_xs
    x = final_x
    pos = 0
    nd = len(digits)
    out: list[int] = []
    while True:
        if count is None:
            if x == l and pos == nd:
                break
        elif len(out) >= count:
            break
        i = x - l
        s = dec_sym[i]
        if s == forbidden:
            return out, ErrorDetected(len(out))
        if consumed_at is not None:
            consumed_at.append(pos)
        out.append(s)
        x = dec_xs[i]
        while x < l:
            if pos >= nd:
                return out, ErrorDetected(len(out))
            x = x * b + digits[pos]
            pos += 1
    return out, None


_MAGIC = b"ANS1"
_VERSION = 1


def pack_container(table: AnsTable, final_x: int, digits: Sequence[int]) -> bytes:
    """Frame a coded stream: magic, version, w, R, n, l_s[], key, final
    state, digit count, digits packed LSB-first."""
    w = int(round(math.log2(table.b)))
    r = int(round(math.log2(table.l)))
    head = bytearray()
    head += _MAGIC
    head += struct.pack("<BBBH", _VERSION, w, r, table.n)
    for ls in table.l_s:
        head += struct.pack("<I", ls)
    head += struct.pack("<QQQ", table.key, final_x, len(digits))
    acc = 0
    nbits = 0
    payload = bytearray()
    for d in digits:
        acc |= d << nbits
        nbits += w
        while nbits >= 8:
            payload.append(acc & 0xFF)
            acc >>= 8
            nbits -= 8
    if nbits:
        payload.append(acc & 0xFF)
    return bytes(head) + bytes(payload)


def unpack_container(blob: bytes) -> tuple[AnsTable, int, list[int]]:
    """Inverse of pack_container; rebuilds the table from l_s and key."""
    if blob[:4] != _MAGIC:
        raise CorruptStream("bad magic")
    version, w, r, n = struct.unpack_from("<BBBH", blob, 4)
    if version != _VERSION:
        raise CorruptStream("unsupported version %d" % version)
    off = 9
    l_s = []
    for _ in range(n):
        (ls,) = struct.unpack_from("<I", blob, off)
        l_s.append(ls)
        off += 4
    key, final_x, ndigits = struct.unpack_from("<QQQ", blob, off)
    off += 24
    l = 1 << r
    b = 1 << w
    if sum(l_s) != l:
        raise CorruptStream("slot counts do not sum to the interval size")
    qs = [Fraction(ls, l) for ls in l_s]
    table = ans_build_table(qs, l, b, key)
    if table.l_s != l_s:
        raise CorruptStream("slot counts do not rebuild")
    digits = []
    acc = 0
    nbits = 0
    pos = off
    mask = b - 1
    for _ in range(ndigits):
        while nbits < w:
            if pos >= len(blob):
                raise CorruptStream("truncated payload")
            acc |= blob[pos] << nbits
            pos += 1
            nbits += 8
        digits.append(acc & mask)
        acc >>= w
        nbits -= w
    return table, final_x, digits


class AbsStreamDecoder:
    """Bit-fed two-symbol splitter with a per-step dyadic probability.

    Used in the direction that turns payload bits into constrained symbols:
    each draw(m) performs a ceiling-variant decode split at q = m / 2^R and
    refills the state from the bit iterator.  Exhausted input is padded
    with zero bits (the pad count is tracked so callers can account for
    real payload separately).

    The state is seeded with the first R payload bits, so it starts
    uniform over [l, 2l) for random input and even the first draw is
    distributed per its probability (a fixed start would make the leading
    symbols deterministic)."""

    def __init__(self, bits: Iterable[int], precision: int):
        self.r = precision
        self.l = 1 << precision
        self._bits = iter(bits)
        self.consumed = 0
        self.padded = 0
        x = 1
        while x < self.l:
            x = 2 * x + self._pull()
        self.x = x

    def _pull(self) -> int:
        b = next(self._bits, None)
        if b is None:
            self.padded += 1
            return 0
        self.consumed += 1
        return b

    def draw(self, m: int) -> int:
        l = self.l
        if not 0 < m < l:
            raise ValueError("probability numerator out of range")
        x = self.x
        x1 = _ceil_div(x * m, l)
        s = _ceil_div((x + 1) * m, l) - x1
        x = x1 if s else x - x1
        while x < l:
            x = 2 * x + self._pull()
        self.x = x
        return s


class AbsStreamEncoder:
    """Inverse of AbsStreamDecoder: absorbs symbols walked in reverse order
    starting from the decoder's final state, emitting the bits it consumed."""

    def __init__(self, final_state: int, precision: int):
        self.r = precision
        self.l = 1 << precision
        self.x = final_state
        self._emitted: list[int] = []

    def absorb(self, s: int, m: int) -> None:
        l = self.l
        if not 0 < m < l:
            raise ValueError("probability numerator out of range")
        x = self.x
        ls = m if s else l - m
        top = 2 * ls - 1
        emit = self._emitted.append
        while x > top:
            emit(x & 1)
            x >>= 1
        if s:
            self.x = (x * l) // m
        else:
            self.x = _ceil_div((x + 1) * l, l - m) - 1

    def finish(self) -> list[int]:
        """Bits in original payload order, including the R state-seed bits."""
        x = self.x
        if not self.l <= x < 2 * self.l:
            raise CorruptStream("state did not drain into the seed interval")
        emit = self._emitted.append
        while x > 1:
            emit(x & 1)
            x >>= 1
        return list(reversed(self._emitted))

"""Finite binary streams with a clean or overflow terminal.

A stream is an ordered run of bits, least-significant first, closed by a
terminal symbol.  The ``OVERFLOW`` terminal marks a *dirty* stream: its bits
are kept (so wrapped values can be fed back, as hardware would), but it no
longer has a numeric interpretation.

Two families of arithmetic are provided.  The unbounded operations grow the
result as needed and can never overflow; the limited operations take a
maximum length, wrap the result modulo ``2**max_len`` and mark it dirty when
the exact result does not fit.  Taint is monotone: a dirty operand always
yields a dirty result.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable

__all__ = [
    "Terminal",
    "BitStream",
    "TaintError",
    "length",
    "is_clean",
    "to_natural",
    "from_natural",
    "add_unbounded",
    "add_limited",
    "mul_unbounded",
    "mul_limited",
    "slice_bits",
    "truncate",
    "concat",
    "difference",
]


class TaintError(ValueError):
    """Raised when a numeric value is requested from a dirty stream."""


class Terminal(enum.Enum):
    CLEAN = "o"
    OVERFLOW = "X"


class BitStream:
    """Immutable bit stream.

    The bits are packed into an int (``word``) of ``length`` bits; bit ``i``
    of the stream is bit ``i`` of the word.  Construct from an iterable of
    bits, LSB first::

        >>> BitStream([1, 0, 1])
        BitStream('101o')
        >>> BitStream([1], Terminal.OVERFLOW).is_clean
        False
    """

    __slots__ = ("word", "length", "is_clean")

    word: int
    length: int
    is_clean: bool

    def __init__(self, bits: Iterable[int] = (), terminal: Terminal = Terminal.CLEAN):
        word = 0
        n = 0
        for bit in bits:
            if bit not in (0, 1):
                raise ValueError(f"bit must be 0 or 1, got {bit!r}")
            word |= bit << n
            n += 1
        self.word = word
        self.length = n
        self.is_clean = terminal is Terminal.CLEAN

    @classmethod
    def _make(cls, word: int, length: int, clean: bool) -> BitStream:
        obj = object.__new__(cls)
        obj.word = word
        obj.length = length
        obj.is_clean = clean
        return obj

    @classmethod
    def from_word(cls, word: int, length: int, terminal: Terminal = Terminal.CLEAN) -> BitStream:
        if length < 0 or word < 0 or word >> length:
            raise ValueError(f"word {word} does not fit in {length} bits")
        return cls._make(word, length, terminal is Terminal.CLEAN)

    @property
    def terminal(self) -> Terminal:
        return Terminal.CLEAN if self.is_clean else Terminal.OVERFLOW

    @property
    def bits(self) -> tuple[int, ...]:
        w = self.word
        return tuple((w >> i) & 1 for i in range(self.length))

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitStream):
            return NotImplemented
        return (self.word, self.length, self.is_clean) == (other.word, other.length, other.is_clean)

    def __hash__(self) -> int:
        return hash((self.word, self.length, self.is_clean))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits) + self.terminal.value

    def __repr__(self) -> str:
        return f"BitStream({str(self)!r})"


def length(v: BitStream) -> int:
    """Number of bits, not counting the terminal."""
    return v.length


def is_clean(v: BitStream) -> bool:
    return v.is_clean


def to_natural(v: BitStream) -> int:
    if not v.is_clean:
        raise TaintError(f"overflow-tainted value has no numeric interpretation: {v}")
    return v.word


def from_natural(n: int) -> BitStream:
    """Shortest clean stream holding ``n``; ``from_natural(0)`` is empty."""
    if n < 0:
        raise ValueError(f"natural number expected, got {n}")
    return BitStream._make(n, n.bit_length(), True)


def add_unbounded(v1: BitStream, v2: BitStream) -> BitStream:
    """Ripple-carry sum; the result is one bit longer than the longer
    operand only when a carry leaves the top position."""
    total = v1.word + v2.word
    n = v1.length if v1.length >= v2.length else v2.length
    if total >> n:
        n += 1
    return BitStream._make(total, n, v1.is_clean and v2.is_clean)


def add_limited(v1: BitStream, v2: BitStream, max_len: int) -> BitStream:
    total = v1.word + v2.word
    clean = v1.is_clean and v2.is_clean
    if total >> max_len:
        return BitStream._make(total & ((1 << max_len) - 1), max_len, False)
    n = v1.length if v1.length >= v2.length else v2.length
    if total >> n:
        n += 1
    if n > max_len:
        n = max_len
    return BitStream._make(total, n, clean)


def mul_unbounded(v1: BitStream, v2: BitStream) -> BitStream:
    """Product as the shortest stream holding it (``v * []`` is ``[]``)."""
    prod = v1.word * v2.word
    return BitStream._make(prod, prod.bit_length(), v1.is_clean and v2.is_clean)


def mul_limited(v1: BitStream, v2: BitStream, max_len: int) -> BitStream:
    prod = v1.word * v2.word
    if prod >> max_len:
        return BitStream._make(prod & ((1 << max_len) - 1), max_len, False)
    return BitStream._make(prod, prod.bit_length(), v1.is_clean and v2.is_clean)


def slice_bits(v: BitStream, start: int, count: int) -> BitStream:
    """Bits ``start .. start+count-1`` of ``v``, zero-padded past the end.

    The terminal of ``v`` is kept.
    """
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    return BitStream._make((v.word >> start) & ((1 << count) - 1), count, v.is_clean)


def truncate(v: BitStream, n: int) -> BitStream:
    """The first ``n`` bits of ``v``."""
    return slice_bits(v, 0, n)


def concat(low: BitStream, high: BitStream) -> BitStream:
    """``low`` followed by ``high`` (``high`` supplies the upper bits)."""
    return BitStream._make(
        low.word | (high.word << low.length), low.length + high.length, low.is_clean and high.is_clean
    )


def difference(v1: BitStream, v2: BitStream) -> BitStream:
    """Absolute difference of the two stream values.

    Only used for sign-magnitude addition of opposite signs, so it never
    overflows; the length is that of the longer operand.
    """
    d = v1.word - v2.word
    if d < 0:
        d = -d
    n = v1.length if v1.length >= v2.length else v2.length
    return BitStream._make(d, n, v1.is_clean and v2.is_clean)

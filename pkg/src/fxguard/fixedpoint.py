"""Signed fixed-point numbers built from two bit streams.

A :class:`SignedFixedPoint` is a sign plus a fraction stream of ``p`` bits and
an integer stream of ``q`` bits (sign-magnitude, no two's complement).  Its
value is ``±(integer + fraction * 2**-p)``.  Exact reference arithmetic uses
:class:`fractions.Fraction`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from fxguard.bitstream import (
    BitStream,
    TaintError,
    add_limited,
    add_unbounded,
    concat,
    difference,
    mul_limited,
    mul_unbounded,
    slice_bits,
    truncate,
)

__all__ = [
    "Rational",
    "FixedPointSpec",
    "Sign",
    "SignedFixedPoint",
    "EncodingRangeError",
    "GuardError",
    "value_domain",
    "decode",
    "wrapped_value",
    "encode",
    "quantize",
    "is_representable",
    "sfp_add",
    "sfp_times",
    "sfp_neg",
    "sfp_sub",
    "sfp_leq",
    "enumerate_values",
    "from_code",
]

Rational = Fraction

ENUMERATION_MAX_BITS = 24


class EncodingRangeError(ValueError):
    """A rational lies outside what ``encode`` accepts (``|a| > 2**q``)."""


class GuardError(ValueError):
    """An exhaustive operation was asked to enumerate too many values."""


@dataclass(frozen=True)
class FixedPointSpec:
    """Word layout: ``p`` fraction bits, ``q`` integer bits, wrap on overflow."""

    p: int
    q: int
    overflow_mode: str = "wrap"

    def __post_init__(self):
        if not (isinstance(self.p, int) and isinstance(self.q, int)):
            raise TypeError("p and q must be integers")
        if self.p < 1 or self.q < 1:
            raise ValueError(f"need p >= 1 and q >= 1, got p={self.p}, q={self.q}")
        if self.overflow_mode != "wrap":
            raise ValueError(f"unsupported overflow mode {self.overflow_mode!r}")

    @property
    def width(self) -> int:
        return self.p + self.q

    @cached_property
    def step(self) -> Fraction:
        """Grid spacing ``2**-p``."""
        return Fraction(1, 1 << self.p)

    @cached_property
    def max_code(self) -> int:
        return (1 << (self.p + self.q)) - 1

    @cached_property
    def max_magnitude(self) -> Fraction:
        """Largest representable magnitude ``2**q - 2**-p``."""
        return Fraction(self.max_code, 1 << self.p)

    def __str__(self) -> str:
        return f"(p={self.p}, q={self.q})"


class Sign(enum.Enum):
    POSITIVE = "+"
    NEGATIVE = "~"


class SignedFixedPoint:
    """Sign with fraction and integer bit streams.

    Argument order follows the constructor ``+(fraction, integer)``.  Zero is
    always stored with a positive sign.
    """

    __slots__ = ("sign", "fraction", "integer")

    sign: Sign
    fraction: BitStream
    integer: BitStream

    def __init__(self, sign: Sign, fraction: BitStream, integer: BitStream):
        if fraction.word == 0 and integer.word == 0:
            sign = Sign.POSITIVE
        self.sign = sign
        self.fraction = fraction
        self.integer = integer

    @property
    def p(self) -> int:
        return self.fraction.length

    @property
    def q(self) -> int:
        return self.integer.length

    @property
    def is_clean(self) -> bool:
        return self.fraction.is_clean and self.integer.is_clean

    @property
    def is_negative(self) -> bool:
        return self.sign is Sign.NEGATIVE

    @property
    def magnitude(self) -> int:
        """Magnitude in units of ``2**-p``."""
        return (self.integer.word << self.fraction.length) | self.fraction.word

    @property
    def code(self) -> int:
        """Signed magnitude in units of ``2**-p``."""
        m = self.magnitude
        return -m if self.sign is Sign.NEGATIVE else m

    def conforms(self, spec: FixedPointSpec) -> bool:
        return self.fraction.length == spec.p and self.integer.length == spec.q

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignedFixedPoint):
            return NotImplemented
        return (self.sign, self.fraction, self.integer) == (other.sign, other.fraction, other.integer)

    def __hash__(self) -> int:
        return hash((self.sign, self.fraction, self.integer))

    def __str__(self) -> str:
        ib = "".join(str(b) for b in reversed(self.integer.bits))
        fb = "".join(str(b) for b in reversed(self.fraction.bits))
        text = f"{'-' if self.is_negative else '+'}{ib}.{fb}"
        return text if self.is_clean else text + " (overflow)"

    def __repr__(self) -> str:
        return f"SignedFixedPoint({str(self)!r})"


def from_code(code: int, spec: FixedPointSpec, clean: bool = True) -> SignedFixedPoint:
    """Build a value from its signed magnitude in units of ``2**-p``.

    Magnitudes beyond the word are wrapped (and the result is then dirty).
    """
    neg = code < 0
    mag = -code if neg else code
    if mag > spec.max_code:
        mag &= spec.max_code
        clean = False
    p = spec.p
    return SignedFixedPoint(
        Sign.NEGATIVE if neg else Sign.POSITIVE,
        BitStream._make(mag & ((1 << p) - 1), p, clean),
        BitStream._make(mag >> p, spec.q, clean),
    )


def value_domain(spec: FixedPointSpec) -> tuple[Fraction, Fraction]:
    m = spec.max_magnitude
    return -m, m


def wrapped_value(w: SignedFixedPoint) -> Fraction:
    """Value of the stored bits, ignoring taint (what hardware would read)."""
    return Fraction(w.code, 1 << w.fraction.length)


def decode(w: SignedFixedPoint) -> Fraction:
    if not w.is_clean:
        raise TaintError(f"cannot decode overflow-tainted value {w}")
    return wrapped_value(w)


def _nearest_code(a: Fraction, p: int) -> int:
    # round half away from zero on the 2**-p grid
    num = abs(a.numerator) << p
    den = a.denominator
    mag = (2 * num + den) // (2 * den)
    return -mag if a < 0 else mag


def encode(a, spec: FixedPointSpec) -> SignedFixedPoint:
    """Nearest representable value to ``a``.

    Ties round away from zero.  Magnitudes in ``(M, 2**q]`` clamp to ``M``;
    beyond ``2**q`` an :class:`EncodingRangeError` is raised.
    """
    a = Fraction(a)
    if abs(a) > (1 << spec.q):
        raise EncodingRangeError(f"{a} is outside encodable premise |a| <= 2^{spec.q}")
    code = _nearest_code(a, spec.p)
    if code > spec.max_code:
        code = spec.max_code
    elif code < -spec.max_code:
        code = -spec.max_code
    return from_code(code, spec)


def quantize(a, spec: FixedPointSpec) -> SignedFixedPoint:
    """Round ``a`` to the grid and wrap out-of-range magnitudes (dirty).

    This models a converter feeding a register; unlike :func:`encode` it
    accepts any rational.
    """
    return from_code(_nearest_code(Fraction(a), spec.p), spec)


def is_representable(a, spec: FixedPointSpec) -> bool:
    a = Fraction(a)
    return (a * (1 << spec.p)).denominator == 1 and abs(a) <= spec.max_magnitude


def _check(w: SignedFixedPoint, spec: FixedPointSpec) -> None:
    if w.fraction.length != spec.p or w.integer.length != spec.q:
        raise ValueError(f"operand {w} does not conform to {spec}")


def _split(mag: BitStream, spec: FixedPointSpec) -> tuple[BitStream, BitStream]:
    return truncate(mag, spec.p), slice_bits(mag, spec.p, spec.q)


def sfp_add(w1: SignedFixedPoint, w2: SignedFixedPoint, spec: FixedPointSpec) -> SignedFixedPoint:
    """Sign-magnitude addition on the joined ``integer.fraction`` word.

    Equal signs add with wrap at ``p + q`` bits; opposite signs subtract the
    smaller magnitude from the larger and can never overflow.
    """
    _check(w1, spec)
    _check(w2, spec)
    m1 = concat(w1.fraction, w1.integer)
    m2 = concat(w2.fraction, w2.integer)
    if w1.sign is w2.sign:
        mag = add_limited(m1, m2, spec.width)
        sign = w1.sign
    else:
        mag = difference(m1, m2)
        sign = w1.sign if m1.word >= m2.word else w2.sign
    frac, integer = _split(mag, spec)
    return SignedFixedPoint(sign, frac, integer)


def sfp_times(w1: SignedFixedPoint, w2: SignedFixedPoint, spec: FixedPointSpec) -> SignedFixedPoint:
    """Fixed-point product from partial products of the operand streams.

    With fraction/integer streams ``f1, i1`` and ``f2, i2``, the cross terms
    ``f1*i2 + i1*f2`` plus the upper half of ``f1*f2`` give the result
    fraction (low ``p`` bits) and a carry; the result integer is
    ``i1*i2 + carry`` limited to ``q`` bits.  Bits below ``2**-p`` are
    dropped, so the magnitude is truncated toward zero.
    """
    _check(w1, spec)
    _check(w2, spec)
    p, q = spec.p, spec.q
    f1, i1, f2, i2 = w1.fraction, w1.integer, w2.fraction, w2.integer
    cross = add_unbounded(mul_unbounded(f1, i2), mul_unbounded(i1, f2))
    cross = add_unbounded(cross, slice_bits(mul_unbounded(f1, f2), p, p))
    frac = truncate(cross, p)
    carry = slice_bits(cross, p, max(cross.length - p, 0))
    integer = add_limited(mul_limited(i1, i2, q), carry, q)
    integer = slice_bits(integer, 0, q)
    sign = Sign.POSITIVE if w1.sign is w2.sign else Sign.NEGATIVE
    return SignedFixedPoint(sign, frac, integer)


def sfp_neg(w: SignedFixedPoint) -> SignedFixedPoint:
    sign = Sign.POSITIVE if w.sign is Sign.NEGATIVE else Sign.NEGATIVE
    return SignedFixedPoint(sign, w.fraction, w.integer)


def sfp_sub(w1: SignedFixedPoint, w2: SignedFixedPoint, spec: FixedPointSpec) -> SignedFixedPoint:
    return sfp_add(w1, sfp_neg(w2), spec)


def sfp_leq(w1: SignedFixedPoint, w2: SignedFixedPoint) -> bool:
    if not (w1.is_clean and w2.is_clean):
        raise TaintError("cannot compare overflow-tainted values")
    return decode(w1) <= decode(w2)


def enumerate_values(spec: FixedPointSpec) -> list[SignedFixedPoint]:
    """Every clean value of ``spec`` in increasing order (``2**(p+q+1) - 1`` items)."""
    if spec.width > ENUMERATION_MAX_BITS:
        raise GuardError(f"refusing to enumerate {spec}: p + q > {ENUMERATION_MAX_BITS}")
    top = spec.max_code
    return [from_code(c, spec) for c in range(-top, top + 1)]

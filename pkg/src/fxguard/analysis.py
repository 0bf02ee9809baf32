"""Sequenced algorithms, reliable input domains and implementation certificates.

A sequenced algorithm applies a fixed list of binary operations to a scalar
input ``w``; every operation takes the running value as its first argument
and a representable constant as the second.  The reliable domain is the set
of inputs for which no intermediate value leaves the representable range, so
a fixed-point evaluation never wraps.
"""

from __future__ import annotations

import enum
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

from fxguard.fixedpoint import (
    FixedPointSpec,
    GuardError,
    SignedFixedPoint,
    decode,
    encode,
    from_code,
    is_representable,
    sfp_add,
    sfp_sub,
    sfp_times,
)

__all__ = [
    "Op",
    "Step",
    "SequencedAlgorithm",
    "ReliableDomain",
    "Implementation",
    "Verdict",
    "Method",
    "Certificate",
    "EmptyDomainError",
    "gamma_eval_exact",
    "gamma_eval_fixed",
    "reliable_domain",
    "certify",
    "polynomial_error_bound",
    "horner_algorithm",
    "max_exhaustive_bits",
]

DEFAULT_EXHAUSTIVE_BITS = 20


class EmptyDomainError(ValueError):
    """No input value keeps every intermediate representable."""


class Op(enum.Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"


@dataclass(frozen=True)
class Step:
    op: Op
    constant: Fraction

    def __post_init__(self):
        object.__setattr__(self, "op", Op(self.op))
        object.__setattr__(self, "constant", Fraction(self.constant))

    def apply_exact(self, value: Fraction) -> Fraction:
        if self.op is Op.ADD:
            return value + self.constant
        if self.op is Op.SUB:
            return value - self.constant
        return value * self.constant

    def __str__(self) -> str:
        symbol = {Op.ADD: "+", Op.SUB: "-", Op.MUL: "*"}[self.op]
        return f"{symbol}{self.constant}"


@dataclass(frozen=True)
class SequencedAlgorithm:
    """Steps in execution order (step ``i`` has index ``i + 1``)."""

    steps: tuple[Step, ...]
    spec: FixedPointSpec

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        for i, step in enumerate(steps, start=1):
            if not is_representable(step.constant, self.spec):
                raise ValueError(f"step {i}: constant {step.constant} is not representable under {self.spec}")
            if step.op is Op.MUL and step.constant == 0:
                raise ValueError(f"step {i}: multiplication constant must be nonzero")

    @classmethod
    def of(cls, spec: FixedPointSpec, *steps: tuple[str | Op, object]) -> SequencedAlgorithm:
        """``SequencedAlgorithm.of(spec, ("mul", 2), ("add", 1))``"""
        return cls(tuple(Step(Op(op), Fraction(c)) for op, c in steps), spec)

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return "w " + " ".join(f"[{s}]" for s in self.steps)


@dataclass(frozen=True)
class ReliableDomain:
    w_min: Fraction
    w_max: Fraction
    gamma_min: Fraction
    gamma_max: Fraction

    def __contains__(self, value) -> bool:
        return self.w_min <= Fraction(value) <= self.w_max


@dataclass(frozen=True)
class Implementation:
    lower: SignedFixedPoint
    upper: SignedFixedPoint
    algorithm: SequencedAlgorithm

    def __post_init__(self):
        if not (self.lower.is_clean and self.upper.is_clean):
            raise ValueError("implementation bounds must be clean values")
        if decode(self.lower) > decode(self.upper):
            raise ValueError("implementation lower bound exceeds upper bound")


class Verdict(enum.Enum):
    RELIABLE = "reliable"
    NOT_RELIABLE = "not_reliable"


class Method(enum.Enum):
    INTERVAL = "interval"
    EXHAUSTIVE = "exhaustive"


@dataclass
class Certificate:
    algorithm: SequencedAlgorithm
    lower: Fraction
    upper: Fraction
    verdict: Verdict
    method: Method
    domain: ReliableDomain | None = None
    witness: Fraction | None = None
    # whether the witness itself overflows at bit level; interval-mode
    # witnesses are only candidates
    witness_overflows: bool | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def reliable(self) -> bool:
        return self.verdict is Verdict.RELIABLE


def max_exhaustive_bits() -> int:
    raw = os.environ.get("FXGUARD_MAX_EXHAUSTIVE_BITS")
    if raw is None:
        return DEFAULT_EXHAUSTIVE_BITS
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"FXGUARD_MAX_EXHAUSTIVE_BITS must be an integer, got {raw!r}") from None


def gamma_eval_exact(alg: SequencedAlgorithm, a) -> Fraction:
    value = Fraction(a)
    for step in alg.steps:
        value = step.apply_exact(value)
    return value


def _encoded_constants(alg: SequencedAlgorithm) -> list[tuple[Op, SignedFixedPoint]]:
    return [(s.op, encode(s.constant, alg.spec)) for s in alg.steps]


def _eval_fixed(ops: Iterable[tuple[Op, SignedFixedPoint]], w: SignedFixedPoint, spec: FixedPointSpec):
    for op, c in ops:
        if op is Op.ADD:
            w = sfp_add(w, c, spec)
        elif op is Op.SUB:
            w = sfp_sub(w, c, spec)
        else:
            w = sfp_times(w, c, spec)
    return w


def gamma_eval_fixed(alg: SequencedAlgorithm, w: SignedFixedPoint) -> SignedFixedPoint:
    """Evaluate with fixed-point operations; any wrap leaves the result dirty."""
    if not w.conforms(alg.spec):
        raise ValueError(f"input {w} does not conform to {alg.spec}")
    return _eval_fixed(_encoded_constants(alg), w, alg.spec)


def _grid_ceil(x: Fraction, p: int) -> Fraction:
    scaled = x * (1 << p)
    return Fraction(-((-scaled.numerator) // scaled.denominator), 1 << p)


def _grid_floor(x: Fraction, p: int) -> Fraction:
    scaled = x * (1 << p)
    return Fraction(scaled.numerator // scaled.denominator, 1 << p)


def reliable_domain(alg: SequencedAlgorithm) -> ReliableDomain:
    """Input interval on which every intermediate stays within ``±M``.

    The output constraint ``[-M, M]`` is pulled back through the steps from
    last to first, intersecting with ``[-M, M]`` after every inversion since
    each intermediate must itself be representable.  Each stage is snapped
    inward to the ``2**-p`` grid: fixed-point intermediates live on the grid,
    and for a snapped target interval an exact product inside it implies the
    truncated product is inside too.  The result is therefore sound for the
    bit-level evaluation, not just for exact arithmetic.
    """
    if not alg.steps:
        raise ValueError("reliable domain needs at least one step")
    spec = alg.spec
    p = spec.p
    bound = spec.max_magnitude
    lo, hi = -bound, bound
    for step in reversed(alg.steps):
        lo, hi = _grid_ceil(lo, p), _grid_floor(hi, p)
        c = step.constant
        if step.op is Op.ADD:
            lo, hi = lo - c, hi - c
        elif step.op is Op.SUB:
            lo, hi = lo + c, hi + c
        elif c > 0:
            lo, hi = lo / c, hi / c
        else:
            lo, hi = hi / c, lo / c
        lo, hi = max(lo, -bound), min(hi, bound)
        if lo > hi:
            break
    lo, hi = _grid_ceil(lo, p), _grid_floor(hi, p)
    if lo > hi:
        raise EmptyDomainError(f"no reliable domain exists for this spec {spec} and algorithm {alg}")
    g_lo, g_hi = lo, hi
    for step in alg.steps:
        a, b = step.apply_exact(g_lo), step.apply_exact(g_hi)
        g_lo, g_hi = (a, b) if a <= b else (b, a)
    return ReliableDomain(lo, hi, g_lo, g_hi)


def _first_overflow(alg: SequencedAlgorithm, lo_code: int, hi_code: int) -> int | None:
    spec = alg.spec
    ops = _encoded_constants(alg)
    for code in range(lo_code, hi_code + 1):
        if not _eval_fixed(ops, from_code(code, spec), spec).is_clean:
            return code
    return None


def certify(impl: Implementation, mode: Method | str = Method.INTERVAL) -> Certificate:
    """Check that every input between the implementation bounds is overflow free.

    ``interval`` compares the bounds with :func:`reliable_domain`;
    ``exhaustive`` evaluates the algorithm bit-exactly on every representable
    input in range and reports the smallest failing one.
    """
    mode = Method(mode)
    alg = impl.algorithm
    spec = alg.spec
    lower, upper = decode(impl.lower), decode(impl.upper)
    scale = 1 << spec.p
    if mode is Method.EXHAUSTIVE:
        limit = max_exhaustive_bits()
        if spec.width > limit:
            raise GuardError(f"exhaustive certification needs p + q <= {limit}, got {spec.width}")
        try:
            domain = reliable_domain(alg)
        except EmptyDomainError:
            domain = None
        bad = _first_overflow(alg, impl.lower.code, impl.upper.code)
        if bad is None:
            return Certificate(alg, lower, upper, Verdict.RELIABLE, mode, domain)
        return Certificate(alg, lower, upper, Verdict.NOT_RELIABLE, mode, domain, Fraction(bad, scale), True)

    try:
        domain = reliable_domain(alg)
    except EmptyDomainError:
        domain = None
    if domain is not None and domain.w_min <= lower and upper <= domain.w_max:
        return Certificate(alg, lower, upper, Verdict.RELIABLE, mode, domain)
    # candidate witness: the smallest in-range input outside the domain
    if domain is None or lower < domain.w_min:
        witness = lower
    else:
        witness = domain.w_max + spec.step
    w = from_code(int(witness * scale), spec)
    overflows = not gamma_eval_fixed(alg, w).is_clean
    cert = Certificate(alg, lower, upper, Verdict.NOT_RELIABLE, mode, domain, witness, overflows)
    if not overflows:
        cert.notes.append("interval analysis is conservative; candidate witness evaluates cleanly")
    return cert


def horner_algorithm(coefficients: Sequence, a, spec: FixedPointSpec) -> tuple[SignedFixedPoint, SequencedAlgorithm]:
    """Horner evaluation of ``sum(c[i] * a**i)`` as a sequenced algorithm.

    The leading coefficient is the input and the encoded argument ``a`` is
    the multiplication constant: ``((c[n] * a + c[n-1]) * a + ...) + c[0]``.
    Returns the encoded input together with the algorithm.
    """
    coeffs = [Fraction(c) for c in coefficients]
    if not coeffs:
        raise ValueError("polynomial needs at least one coefficient")
    a_fixed = decode(encode(a, spec))
    steps: list[Step] = []
    for c in reversed(coeffs[:-1]):
        steps.append(Step(Op.MUL, a_fixed))
        steps.append(Step(Op.ADD, c))
    return encode(coeffs[-1], spec), SequencedAlgorithm(tuple(steps), spec)


def polynomial_error_bound(n: int, gamma_m, a, spec: FixedPointSpec) -> Fraction:
    """Error bound of a degree-``n`` fixed-point polynomial evaluation at ``a``.

    ``F * (dc*|a|**n + (gamma_m + dc) * sum_k C(n,k) |a|**(n-k) dc**k + dt)``
    with ``dc = 2**-(p+1)``, ``dt = 2 * 2**-p`` and ``F = (n**2 + n) / 2``.
    A constant polynomial (``n = 0``) involves no arithmetic, so its bound
    is the conversion error ``dc`` alone.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    dc = Fraction(1, 1 << (spec.p + 1))
    if n == 0:
        return dc
    dt = Fraction(2, 1 << spec.p)
    x = abs(Fraction(a))
    gm = abs(Fraction(gamma_m))
    spread = sum(comb(n, k) * x ** (n - k) * dc**k for k in range(1, n + 1))
    return Fraction(n * n + n, 2) * (dc * x**n + (gm + dc) * spread + dt)

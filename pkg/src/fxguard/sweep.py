"""Seeded random generators for property sweeps over small specs."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from fxguard.analysis import (
    EmptyDomainError,
    Implementation,
    Method,
    Op,
    SequencedAlgorithm,
    Step,
    certify,
    reliable_domain,
)
from fxguard.fixedpoint import FixedPointSpec, from_code


def random_spec(rng: random.Random, max_bits: int = 10) -> FixedPointSpec:
    p = rng.randint(1, max_bits - 1)
    q = rng.randint(1, max_bits - p)
    return FixedPointSpec(p, q)


def random_constant(rng: random.Random, spec: FixedPointSpec, nonzero: bool = False) -> Fraction:
    # half the draws come from |c| <= 4 so that chains of products keep a
    # non-empty domain reasonably often
    top = spec.max_code if rng.random() < 0.5 else min(spec.max_code, 4 << spec.p)
    while True:
        code = rng.randint(-top, top)
        if code or not nonzero:
            return Fraction(code, 1 << spec.p)


def random_algorithm(rng: random.Random, spec: FixedPointSpec, max_steps: int = 5) -> SequencedAlgorithm:
    steps = []
    for _ in range(rng.randint(1, max_steps)):
        op = rng.choice(list(Op))
        steps.append(Step(op, random_constant(rng, spec, nonzero=op is Op.MUL)))
    return SequencedAlgorithm(tuple(steps), spec)


def random_bounds(rng: random.Random, spec: FixedPointSpec) -> tuple[int, int]:
    a = rng.randint(-spec.max_code, spec.max_code)
    b = rng.randint(-spec.max_code, spec.max_code)
    return min(a, b), max(a, b)


@dataclass
class SweepCase:
    algorithm: SequencedAlgorithm
    lower_code: int
    upper_code: int

    def implementation(self) -> Implementation:
        spec = self.algorithm.spec
        return Implementation(from_code(self.lower_code, spec), from_code(self.upper_code, spec), self.algorithm)


def random_cases(seed: int, count: int, max_bits: int = 10, max_steps: int = 5) -> list[SweepCase]:
    """Random (algorithm, bounds) pairs.

    Half of the bound pairs are drawn inside the computed reliable domain
    (when it exists) so that both verdicts are well represented.
    """
    rng = random.Random(seed)
    cases = []
    for _ in range(count):
        spec = random_spec(rng, max_bits)
        alg = random_algorithm(rng, spec, max_steps)
        lo, hi = random_bounds(rng, spec)
        if rng.random() < 0.5:
            try:
                dom = reliable_domain(alg)
            except EmptyDomainError:
                dom = None
            if dom is not None:
                scale = 1 << spec.p
                a = rng.randint(int(dom.w_min * scale), int(dom.w_max * scale))
                b = rng.randint(int(dom.w_min * scale), int(dom.w_max * scale))
                lo, hi = min(a, b), max(a, b)
        cases.append(SweepCase(alg, lo, hi))
    return cases


def cross_mode(cases: list[SweepCase]) -> dict[str, int]:
    """Compare interval and exhaustive verdicts over ``cases``."""
    tally = {"cases": 0, "both_reliable": 0, "both_not_reliable": 0, "interval_only_not_reliable": 0, "violations": 0}
    for case in cases:
        impl = case.implementation()
        by_interval = certify(impl, Method.INTERVAL).reliable
        by_search = certify(impl, Method.EXHAUSTIVE).reliable
        tally["cases"] += 1
        if by_interval and by_search:
            tally["both_reliable"] += 1
        elif by_interval:
            tally["violations"] += 1
        elif by_search:
            tally["interval_only_not_reliable"] += 1
        else:
            tally["both_not_reliable"] += 1
    return tally

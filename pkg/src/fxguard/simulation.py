"""Closed-loop simulation of an exact plant with a fixed-point controller.

The plant is integrated with explicit Euler in exact rationals.  The
controller runs its discretised state equation

    z[k+1] = z[k] + (h A) z[k] + (h b) y[k]
    u[k+1] = c z[k]

with every product and sum done by :func:`sfp_times` / :func:`sfp_add`, so
intermediates can wrap.  ``h A``, ``h b`` and ``c`` are formed exactly and
quantized once, entry by entry.
"""

from __future__ import annotations

import decimal
import io
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import NamedTuple

from fxguard.fixedpoint import (
    FixedPointSpec,
    SignedFixedPoint,
    decode,
    encode,
    from_code,
    quantize,
    sfp_add,
    sfp_times,
    wrapped_value,
)

__all__ = [
    "StateSpaceModel",
    "ClosedLoopConfig",
    "QuantizedController",
    "SimulationTrace",
    "TraceRecord",
    "controller_step",
    "plant_step",
    "run_closed_loop",
    "detect_divergence",
    "controller_output_bound",
    "STATE_BITS",
]

# plant (and ideal-controller) state is rounded to this many fraction bits per step
STATE_BITS = 256
# resolution at which y and u are kept in traces
TRACE_BITS = 64


def _scaled(x: Fraction, bits: int) -> int:
    """``x * 2**bits`` rounded to the nearest integer (ties upward)."""
    scaled = x.numerator << bits
    den = x.denominator
    return (2 * scaled + den) // (2 * den)


def _round_to(x: Fraction, bits: int) -> Fraction:
    return Fraction(_scaled(x, bits), 1 << bits)


@dataclass(frozen=True)
class StateSpaceModel:
    A: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]
    d: Fraction = Fraction(0)

    def __post_init__(self):
        A = tuple(tuple(Fraction(v) for v in row) for row in self.A)
        b = tuple(Fraction(v) for v in self.b)
        c = tuple(Fraction(v) for v in self.c)
        n = len(A)
        if n == 0 or any(len(row) != n for row in A):
            raise ValueError("A must be a non-empty square matrix")
        if len(b) != n or len(c) != n:
            raise ValueError(f"b and c must have length {n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", Fraction(self.d))

    @property
    def n(self) -> int:
        return len(self.A)


@dataclass(frozen=True)
class ClosedLoopConfig:
    """Plant, controller and word layout for one run.

    ``spec=None`` runs the controller in exact arithmetic (rounded like the
    plant state), which separates design failures from quantization ones.
    ``feedback_sign`` multiplies the controller output before it reaches
    the plant input.
    """

    plant: StateSpaceModel
    controller: StateSpaceModel
    spec: FixedPointSpec | None
    h: Fraction
    t_end: Fraction
    x0: tuple[Fraction, ...]
    z0: tuple[Fraction, ...]
    feedback_sign: int = -1

    def __post_init__(self):
        object.__setattr__(self, "h", Fraction(self.h))
        object.__setattr__(self, "t_end", Fraction(self.t_end))
        object.__setattr__(self, "x0", tuple(Fraction(v) for v in self.x0))
        object.__setattr__(self, "z0", tuple(Fraction(v) for v in self.z0))
        if self.h <= 0:
            raise ValueError("step size h must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if len(self.x0) != self.plant.n or len(self.z0) != self.controller.n:
            raise ValueError("initial states do not match model dimensions")
        if self.feedback_sign not in (1, -1):
            raise ValueError("feedback_sign must be +1 or -1")

    @property
    def steps(self) -> int:
        return ceil(self.t_end / self.h)


@dataclass(frozen=True)
class QuantizedController:
    """Controller matrices after per-entry quantization to ``spec``."""

    spec: FixedPointSpec
    phi: tuple[tuple[SignedFixedPoint, ...], ...]
    gamma: tuple[SignedFixedPoint, ...]
    c: tuple[SignedFixedPoint, ...]
    errors: dict[str, Fraction]

    @classmethod
    def from_model(cls, controller: StateSpaceModel, h: Fraction, spec: FixedPointSpec) -> QuantizedController:
        errors: dict[str, Fraction] = {}

        def q(value: Fraction, name: str) -> SignedFixedPoint:
            w = encode(value, spec)
            errors[name] = decode(w) - value
            return w

        n = controller.n
        phi = tuple(tuple(q(h * controller.A[i][j], f"hA[{i}][{j}]") for j in range(n)) for i in range(n))
        gamma = tuple(q(h * controller.b[i], f"hb[{i}]") for i in range(n))
        c = tuple(q(controller.c[j], f"c[{j}]") for j in range(n))
        return cls(spec, phi, gamma, c, errors)


def controller_step(
    z: Sequence[SignedFixedPoint], y: SignedFixedPoint, qc: QuantizedController
) -> tuple[tuple[SignedFixedPoint, ...], SignedFixedPoint, int]:
    """One controller update; returns ``(z_next, u, overflow_events)``.

    ``u`` is computed from the incoming ``z``.  An overflow event is an
    operation whose operands were clean but whose result is dirty.
    """
    spec = qc.spec
    events = 0
    z_next = []
    for i, row in enumerate(qc.phi):
        acc = z[i]
        for coeff, zj in zip(row, z):
            if coeff.magnitude == 0 and zj.is_clean:
                continue  # clean +0 term; adding it leaves acc unchanged
            term = sfp_times(coeff, zj, spec)
            if not term.is_clean and coeff.is_clean and zj.is_clean:
                events += 1
            nxt = sfp_add(acc, term, spec)
            if not nxt.is_clean and acc.is_clean and term.is_clean:
                events += 1
            acc = nxt
        term = sfp_times(qc.gamma[i], y, spec)
        if not term.is_clean and y.is_clean:
            events += 1
        nxt = sfp_add(acc, term, spec)
        if not nxt.is_clean and acc.is_clean and term.is_clean:
            events += 1
        z_next.append(nxt)
    u = None
    for coeff, zj in zip(qc.c, z):
        term = sfp_times(coeff, zj, spec)
        if not term.is_clean and zj.is_clean:
            events += 1
        if u is None:
            u = term
            continue
        nxt = sfp_add(u, term, spec)
        if not nxt.is_clean and u.is_clean and term.is_clean:
            events += 1
        u = nxt
    return tuple(z_next), u, events


def plant_step(
    x: Sequence[Fraction], u: Fraction, plant: StateSpaceModel, h: Fraction
) -> tuple[tuple[Fraction, ...], Fraction]:
    """Explicit Euler step; ``y`` is the output at the current state."""
    y = sum((ci * xi for ci, xi in zip(plant.c, x)), plant.d * u)
    x_next = tuple(
        xi + h * (sum((aij * xj for aij, xj in zip(row, x)), Fraction(0)) + bi * u)
        for xi, row, bi in zip(x, plant.A, plant.b)
    )
    return x_next, y


class TraceRecord(NamedTuple):
    k: int
    t: Fraction
    y: Fraction
    u: Fraction
    overflows: int


@dataclass
class SimulationTrace:
    """Per-sample output, control and overflow counts.

    ``y`` and ``u`` are held as numerators over ``2**TRACE_BITS`` to keep long
    runs compact; use :meth:`records` for rational values.
    """

    h: Fraction
    spec: FixedPointSpec | None
    y_num: list[int] = field(default_factory=list)
    u_num: list[int] = field(default_factory=list)
    overflows: list[int] = field(default_factory=list)
    first_overflow_time: Fraction | None = None
    z_peak: tuple[Fraction, ...] = ()
    quantization_errors: dict[str, Fraction] = field(default_factory=dict)
    metadata: dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.y_num)

    @property
    def total_overflows(self) -> int:
        return sum(self.overflows)

    def time(self, k: int) -> Fraction:
        return k * self.h

    def y(self, k: int) -> Fraction:
        return Fraction(self.y_num[k], 1 << TRACE_BITS)

    def u(self, k: int) -> Fraction:
        return Fraction(self.u_num[k], 1 << TRACE_BITS)

    def records(self) -> Iterator[TraceRecord]:
        for k in range(len(self.y_num)):
            yield TraceRecord(k, self.time(k), self.y(k), self.u(k), self.overflows[k])

    def abs_y(self) -> list[float]:
        scale = float(1 << TRACE_BITS)
        return [abs(n) / scale for n in self.y_num]

    def summary(self, threshold: Fraction = Fraction(1), window: Fraction = Fraction(1, 10)) -> dict:
        div = detect_divergence(self, window, threshold)
        return {
            "samples": len(self),
            "total_overflows": self.total_overflows,
            "first_overflow_time": self.first_overflow_time,
            "divergence_time": div,
            "divergence_threshold": threshold,
            "divergence_window": window,
            "final_y": self.y(len(self) - 1) if len(self) else None,
            "z_peak": list(self.z_peak),
        }

    def to_csv(self) -> str:
        """``k,t,y,u,overflows`` with 12 significant digits."""
        out = io.StringIO()
        out.write("k,t,y,u,overflows\n")
        for k in range(len(self.y_num)):
            out.write(
                f"{k},{_decimal(self.time(k))},{_decimal(self.y(k))},{_decimal(self.u(k))},{self.overflows[k]}\n"
            )
        return out.getvalue()


_CTX = decimal.Context(prec=12)


def _decimal(x: Fraction) -> str:
    if x == 0:
        return "0"
    value = _CTX.divide(decimal.Decimal(x.numerator), decimal.Decimal(x.denominator))
    return format(value.normalize(_CTX), "g")


def _peak_update(peak: list[Fraction], values: Sequence[Fraction]) -> None:
    for i, v in enumerate(values):
        if abs(v) > abs(peak[i]):
            peak[i] = v


def run_closed_loop(cfg: ClosedLoopConfig) -> SimulationTrace:
    """Simulate ``k = 0 .. ceil(t_end / h)``.

    Each sample: read ``y`` from the plant, quantize it, run the controller,
    and feed the (possibly wrapped) control value of the previous update to
    the plant.  Controller registers keep their wrapped bits from one sample
    to the next; the taint of a wrapped value is recorded in the trace and
    not carried into the next sample, so every wrap is counted once.
    """
    if cfg.spec is None:
        return _run_exact(cfg)
    spec = cfg.spec
    qc = QuantizedController.from_model(cfg.controller, cfg.h, spec)
    trace = SimulationTrace(cfg.h, spec, quantization_errors=dict(qc.errors))
    trace.metadata.update(state_rounding_bits=STATE_BITS, trace_bits=TRACE_BITS, controller="fixed-point")
    plant, h, sign = cfg.plant, cfg.h, cfg.feedback_sign
    x = cfg.x0
    z = tuple(encode(v, spec) for v in cfg.z0)
    u = from_code(0, spec)
    peak = [Fraction(0)] * cfg.controller.n
    shift = TRACE_BITS - spec.p
    for k in range(cfg.steps + 1):
        u_val = wrapped_value(u)
        x_next, y = plant_step(x, sign * u_val, plant, h)
        y_fixed = quantize(y, spec)
        z_next, u_next, events = controller_step(z, y_fixed, qc)
        if not y_fixed.is_clean:
            events += 1
        trace.y_num.append(_scaled(y, TRACE_BITS))
        trace.u_num.append(u.code << shift)
        trace.overflows.append(events)
        if events and trace.first_overflow_time is None:
            trace.first_overflow_time = k * h
        _peak_update(peak, [wrapped_value(w) for w in z])
        # registers hold the wrapped bits; taint is already recorded above
        z = tuple(w if w.is_clean else from_code(w.code, spec) for w in z_next)
        u = u_next if u_next.is_clean else from_code(u_next.code, spec)
        x = tuple(_round_to(v, STATE_BITS) for v in x_next)
    trace.z_peak = tuple(peak)
    return trace


def _run_exact(cfg: ClosedLoopConfig) -> SimulationTrace:
    ctrl, h = cfg.controller, cfg.h
    phi = [[h * a for a in row] for row in ctrl.A]
    gamma = [h * b for b in ctrl.b]
    trace = SimulationTrace(h, None)
    trace.metadata.update(state_rounding_bits=STATE_BITS, trace_bits=TRACE_BITS, controller="exact")
    x, z, u = cfg.x0, cfg.z0, Fraction(0)
    peak = [Fraction(0)] * ctrl.n
    for _ in range(cfg.steps + 1):
        x_next, y = plant_step(x, cfg.feedback_sign * u, cfg.plant, h)
        z_next = tuple(
            zi + sum((pij * zj for pij, zj in zip(row, z)), Fraction(0)) + gi * y
            for zi, row, gi in zip(z, phi, gamma)
        )
        u_next = sum((cj * zj for cj, zj in zip(ctrl.c, z)), Fraction(0))
        trace.y_num.append(_scaled(y, TRACE_BITS))
        trace.u_num.append(_scaled(u, TRACE_BITS))
        trace.overflows.append(0)
        _peak_update(peak, z)
        z = tuple(_round_to(v, STATE_BITS) for v in z_next)
        u = _round_to(u_next, STATE_BITS)
        x = tuple(_round_to(v, STATE_BITS) for v in x_next)
    trace.z_peak = tuple(peak)
    return trace


def detect_divergence(trace: SimulationTrace, window: Fraction, threshold: Fraction) -> Fraction | None:
    """Start of the first window in which ``|y|`` exceeds ``threshold``
    after ``|y|`` has been below ``threshold / 10``; ``None`` if never."""
    window, threshold = Fraction(window), Fraction(threshold)
    if window <= 0 or threshold <= 0:
        raise ValueError("window and threshold must be positive")
    scale = 1 << TRACE_BITS
    high = threshold * scale
    low = high / 10
    calm = None
    for k, num in enumerate(trace.y_num):
        mag = abs(num)
        if calm is None:
            if mag < low:
                calm = k
        elif mag > high:
            span = int(window / trace.h)
            return max(calm, k - span) * trace.h
    return None


def controller_output_bound(controller: StateSpaceModel, z_max, y_range: tuple) -> tuple[Fraction, Fraction]:
    """Interval containing ``c (A z + b y)`` for ``|z_i| <= z_max`` and ``y`` in range.

    ``z_max`` is a scalar or per-state magnitude bound.
    """
    n = controller.n
    if isinstance(z_max, (list, tuple)):
        zm = [Fraction(v) for v in z_max]
    else:
        zm = [Fraction(z_max)] * n
    if len(zm) != n or any(v < 0 for v in zm):
        raise ValueError("z_max must be non-negative with one entry per state")
    cA = [sum((controller.c[i] * controller.A[i][j] for i in range(n)), Fraction(0)) for j in range(n)]
    radius = sum((abs(v) * m for v, m in zip(cA, zm)), Fraction(0))
    gain = sum((ci * bi for ci, bi in zip(controller.c, controller.b)), Fraction(0))
    lo, hi = (Fraction(v) for v in y_range)
    ends = (gain * lo, gain * hi)
    return min(ends) - radius, max(ends) + radius

"""Controller case study: config parsing, bound algorithm and domain table.

The bound algorithm estimates the controller output from a peak controller
state ``z_peak`` and the plant output ``y``:

    u ~ c A z_peak + (c b) y = (c b) * (y + kappa),  kappa = c A z_peak / (c b)

written as the two steps ``[+kappa, *(c b)]`` so both constants stay small
enough to be representable.  Its reliable domain bounds the admissible ``y``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from typing import Any

from fxguard import config as cfgmod
from fxguard.analysis import EmptyDomainError, Op, ReliableDomain, SequencedAlgorithm, Step, reliable_domain
from fxguard.fixedpoint import EncodingRangeError, FixedPointSpec, decode, encode
from fxguard.simulation import ClosedLoopConfig, StateSpaceModel

__all__ = [
    "load_case_study",
    "plant_model",
    "controller_model",
    "closed_loop_configs",
    "bound_algorithm",
    "domain_row",
]


def load_case_study() -> dict[str, Any]:
    """The bundled plant/controller configuration."""
    text = resources.files("fxguard").joinpath("data/case_study.json").read_text()
    return json.loads(text)


def plant_model(doc: dict) -> StateSpaceModel:
    plant = cfgmod.require(doc, "plant")
    return StateSpaceModel(
        cfgmod.matrix(cfgmod.require(plant, "A", "plant"), "plant.A"),
        cfgmod.vector(cfgmod.require(plant, "b", "plant"), "plant.b"),
        cfgmod.vector(cfgmod.require(plant, "c", "plant"), "plant.c"),
        cfgmod.rational(plant.get("d", 0), "plant.d"),
    )


def controller_model(doc: dict) -> tuple[StateSpaceModel, Fraction]:
    ctrl = cfgmod.require(doc, "controller")
    model = StateSpaceModel(
        cfgmod.matrix(cfgmod.require(ctrl, "A", "controller"), "controller.A"),
        cfgmod.vector(cfgmod.require(ctrl, "b", "controller"), "controller.b"),
        cfgmod.vector(cfgmod.require(ctrl, "c", "controller"), "controller.c"),
    )
    return model, cfgmod.rational(cfgmod.require(ctrl, "h", "controller"), "controller.h")


def closed_loop_configs(doc: dict) -> list[ClosedLoopConfig]:
    """One run configuration per spec row."""
    try:
        plant = plant_model(doc)
        controller, h = controller_model(doc)
    except ValueError as exc:
        if isinstance(exc, cfgmod.ConfigError):
            raise
        raise cfgmod.ConfigError(str(exc), "plant/controller") from None
    sim = cfgmod.require(doc, "sim")
    t_end = cfgmod.rational(cfgmod.require(sim, "t_end", "sim"), "sim.t_end")
    x0 = cfgmod.vector(cfgmod.require(sim, "x0", "sim"), "sim.x0")
    z0 = cfgmod.vector(sim.get("z0", ["0"] * controller.n), "sim.z0")
    sign = sim.get("feedback_sign", -1)
    configs = []
    for i, spec in enumerate(cfgmod.spec_list(doc)):
        try:
            configs.append(ClosedLoopConfig(plant, controller, spec, h, t_end, x0, z0, sign))
        except ValueError as exc:
            raise cfgmod.ConfigError(str(exc), f"specs[{i}]") from None
    return configs


def bound_algorithm(controller: StateSpaceModel, z_peak, spec: FixedPointSpec) -> SequencedAlgorithm:
    n = controller.n
    z = [Fraction(v) for v in z_peak]
    if len(z) != n:
        raise ValueError(f"z_peak needs {n} entries")
    gain = sum((controller.c[i] * controller.b[i] for i in range(n)), Fraction(0))
    if gain == 0:
        raise ValueError("controller has zero feedthrough gain c b")
    offset = sum(
        (controller.c[i] * controller.A[i][j] * z[j] for i in range(n) for j in range(n)),
        Fraction(0),
    )
    kappa = decode(encode(offset / gain, spec))
    return SequencedAlgorithm((Step(Op.ADD, kappa), Step(Op.MUL, decode(encode(gain, spec)))), spec)


def domain_row(
    controller: StateSpaceModel, z_peak, spec: FixedPointSpec, target: Fraction = Fraction(0)
) -> dict[str, Any]:
    """One row of the per-spec reliable-domain table."""
    row: dict[str, Any] = {"p": spec.p, "q": spec.q, "z_peak": [Fraction(v) for v in z_peak]}
    try:
        alg = bound_algorithm(controller, z_peak, spec)
        dom: ReliableDomain | None = reliable_domain(alg)
    except EncodingRangeError as exc:
        alg, dom = None, None
        row["error"] = f"bound constants not encodable: {exc}"
    except EmptyDomainError as exc:
        dom = None
        row["error"] = str(exc)
    row["algorithm"] = str(alg) if alg is not None else None
    row["domain"] = dom
    row["target"] = target
    row["target_inside"] = dom is not None and target in dom
    return row

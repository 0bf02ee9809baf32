"""Command-line front end: ``fxguard analyze | certify | simulate``.

Exit codes: 0 success (or reliable), 1 not reliable, 2 configuration or
usage error, 3 exhaustive-mode guard violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from fxguard import __version__
from fxguard import config as cfgmod
from fxguard.analysis import (
    EmptyDomainError,
    Implementation,
    Method,
    Op,
    SequencedAlgorithm,
    Step,
    certify,
    max_exhaustive_bits,
    reliable_domain,
)
from fxguard.casestudy import closed_loop_configs, controller_model, domain_row
from fxguard.config import ConfigError, render
from fxguard.fixedpoint import FixedPointSpec, GuardError, encode, is_representable
from fxguard.simulation import SimulationTrace, run_closed_loop
from fxguard.sweep import cross_mode, random_cases

EXIT_OK, EXIT_NOT_RELIABLE, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3


class OutputExists(Exception):
    pass


@dataclass
class RunManifest:
    config: Path
    command: str
    out: Path
    seed: int
    quiet: bool
    force: bool
    config_hash: str = ""

    def prepare(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        if path.exists() and not self.force:
            raise OutputExists(f"{path} exists; pass --force to overwrite")
        path.write_text(text)
        return path

    def provenance(self) -> dict[str, Any]:
        return {"tool_version": __version__, "config_hash": self.config_hash, "seed": self.seed}

    def say(self, text: str) -> None:
        if not self.quiet:
            print(text)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return render(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _dump(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def _fmt(x: Fraction | None, digits: int = 6) -> str:
    return "-" if x is None else f"{float(x):.{digits}g}"


def _algorithm(doc: dict, spec: FixedPointSpec, where: str = "algorithm") -> SequencedAlgorithm:
    raw = cfgmod.require(doc, "algorithm")
    if not isinstance(raw, list):
        raise ConfigError("expected a list of steps", where)
    steps = []
    for i, item in enumerate(raw):
        at = f"{where}[{i}]"
        op = cfgmod.require(item, "op", at)
        try:
            op = Op(str(op).lower())
        except ValueError:
            raise ConfigError(f"unknown op {op!r} (use add, sub or mul)", f"{at}.op") from None
        steps.append(Step(op, cfgmod.rational(cfgmod.require(item, "constant", at), f"{at}.constant")))
    try:
        return SequencedAlgorithm(tuple(steps), spec)
    except ValueError as exc:
        raise ConfigError(str(exc), f"{where} under {spec}") from None


def _domain_json(dom) -> dict[str, Any]:
    if dom is None:
        return {"d_r": None, "gamma_bounds": None}
    return {
        "d_r": {"w_min": dom.w_min, "w_max": dom.w_max},
        "gamma_bounds": {"min": dom.gamma_min, "max": dom.gamma_max},
    }


def _simulate_all(configs) -> list[SimulationTrace]:
    if len(configs) <= 1:
        return [run_closed_loop(c) for c in configs]
    with ProcessPoolExecutor(max_workers=len(configs)) as pool:
        return list(pool.map(run_closed_loop, configs))


def cmd_analyze(doc: dict, run: RunManifest) -> int:
    specs = cfgmod.spec_list(doc)
    target = cfgmod.rational(doc.get("target", 0), "target")
    rows: list[dict[str, Any]] = []
    if "algorithm" in doc:
        for spec in specs:
            alg = _algorithm(doc, spec)
            row: dict[str, Any] = {"p": spec.p, "q": spec.q, "algorithm": str(alg)}
            try:
                dom = reliable_domain(alg)
            except EmptyDomainError as exc:
                dom = None
                row["error"] = str(exc)
            row["domain"] = dom
            row["target_inside"] = dom is not None and target in dom
            rows.append(row)
    elif "controller" in doc:
        controller, _ = controller_model(doc)
        peaks = _peaks(doc, specs, controller.n)
        rows = [domain_row(controller, peak, spec, target) for spec, peak in zip(specs, peaks)]
    elif specs:
        raise ConfigError("need either 'algorithm' or 'controller'", "<root>")

    reference = {(r["p"], r["q"]): r for r in doc.get("reference_table", []) if isinstance(r, dict)}
    report_rows = []
    for row in rows:
        dom = row.pop("domain")
        entry = {k: v for k, v in row.items()}
        entry.update(_domain_json(dom))
        where = "inside" if row["target_inside"] else "outside"
        entry["flag"] = f"target {target} {where} D_R"
        ref = reference.get((row["p"], row["q"]))
        if ref is not None and dom is not None:
            ref_lo = cfgmod.rational(ref["d_r_min"], "reference_table.d_r_min")
            ref_hi = cfgmod.rational(ref["d_r_max"], "reference_table.d_r_max")
            entry["reference"] = {
                "d_r_min": ref_lo,
                "d_r_max": ref_hi,
                "rel_dev_min": float(abs(dom.w_min - ref_lo) / abs(ref_lo)) if ref_lo else None,
                "rel_dev_max": float(abs(dom.w_max - ref_hi) / abs(ref_hi)) if ref_hi else None,
            }
        report_rows.append(entry)
        run.say(
            f"p={row['p']:<3d} q={row['q']:<3d} D_R=[{_fmt(dom and dom.w_min)}, {_fmt(dom and dom.w_max)}] "
            f"Gamma=[{_fmt(dom and dom.gamma_min)}, {_fmt(dom and dom.gamma_max)}]  {entry['flag']}"
            + (f"  ({row['error']})" if "error" in row else "")
        )
    report = {**run.provenance(), "target": target, "rows": report_rows}
    run.write("analyze_report.json", _dump(report))
    return EXIT_OK


def _peaks(doc: dict, specs: list[FixedPointSpec], n: int) -> list[list[Fraction]]:
    """Peak controller state per spec row: given explicitly or simulated."""
    raw_rows = doc.get("specs", [doc.get("spec")])
    explicit: list[list[Fraction] | None] = []
    for i, r in enumerate(raw_rows):
        value = r.get("z_peak") if isinstance(r, dict) else None
        if value is None:
            value = doc.get("z_peak")
        explicit.append(None if value is None else list(cfgmod.vector(value, f"specs[{i}].z_peak")))
    missing = [i for i, v in enumerate(explicit) if v is None]
    if missing:
        if "sim" not in doc:
            raise ConfigError("no z_peak given and no 'sim' section to estimate it", f"specs[{missing[0]}]")
        configs = closed_loop_configs(doc)
        traces = _simulate_all([configs[i] for i in missing])
        for i, trace in zip(missing, traces):
            explicit[i] = list(trace.z_peak)
    for v in explicit:
        if v is not None and len(v) != n:
            raise ConfigError(f"z_peak needs {n} entries", "z_peak")
    return [v for v in explicit if v is not None]


def cmd_certify(doc: dict, run: RunManifest, mode: Method) -> int:
    if "sweep" in doc:
        sweep = doc["sweep"]
        count = int(cfgmod.require(sweep, "cases", "sweep"))
        max_bits = int(sweep.get("max_bits", 8))
        tally = cross_mode(random_cases(run.seed, count, max_bits=max_bits))
        run.write("sweep.json", _dump({**run.provenance(), **tally}))
        run.say(" ".join(f"{k}={v}" for k, v in tally.items()))
        return EXIT_OK if tally["violations"] == 0 else EXIT_NOT_RELIABLE

    specs = cfgmod.spec_list(doc)
    if len(specs) != 1:
        raise ConfigError("certify needs exactly one spec", "spec")
    spec = specs[0]
    alg = _algorithm(doc, spec)
    bounds = []
    for key in ("lower", "upper"):
        value = cfgmod.rational(cfgmod.require(doc, key), key)
        if not is_representable(value, spec):
            raise ConfigError(f"{value} is not representable under {spec}", key)
        bounds.append(encode(value, spec))
    try:
        impl = Implementation(bounds[0], bounds[1], alg)
    except ValueError as exc:
        raise ConfigError(str(exc), "lower/upper") from None
    cert = certify(impl, mode)
    body = {
        "spec": {"p": spec.p, "q": spec.q},
        "algorithm": [{"op": s.op.value, "constant": s.constant} for s in alg.steps],
        "bounds": {"lower": cert.lower, "upper": cert.upper},
        **_domain_json(cert.domain),
        "verdict": cert.verdict.value,
        "witness": cert.witness,
        "witness_overflows": cert.witness_overflows,
        "method": cert.method.value,
        "notes": cert.notes,
        **run.provenance(),
    }
    run.write("certificate.json", _dump(body))
    if cert.reliable:
        run.say(f"RELIABLE ({mode.value}): inputs [{cert.lower}, {cert.upper}] under {spec}")
        return EXIT_OK
    run.say(f"NOT RELIABLE ({mode.value}): witness w = {cert.witness}")
    if run.quiet:
        print(f"witness {cert.witness}", file=sys.stderr)
    return EXIT_NOT_RELIABLE


def cmd_simulate(doc: dict, run: RunManifest) -> int:
    configs = closed_loop_configs(doc)
    traces = _simulate_all(configs)
    summary_rows = []
    for cfg, trace in zip(configs, traces):
        name = f"trace_p{cfg.spec.p}_q{cfg.spec.q}.csv"
        run.write(name, trace.to_csv())
        s = trace.summary()
        summary_rows.append({"p": cfg.spec.p, "q": cfg.spec.q, "csv": name, **s})
        run.say(
            f"p={cfg.spec.p:<3d} q={cfg.spec.q:<3d} overflows={s['total_overflows']:<8d} "
            f"divergence_time={_fmt(s['divergence_time'])}  final_y={_fmt(s['final_y'])}  -> {name}"
        )
    run.write("summary.json", _dump({**run.provenance(), "rows": summary_rows}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON configuration file")
    common.add_argument("--out", type=Path, default=Path("fxguard-out"), help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized sweeps")
    common.add_argument("--force", action="store_true", help="overwrite existing output files")
    common.add_argument("--quiet", action="store_true", help="suppress the printed report")
    parser = argparse.ArgumentParser(prog="fxguard", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fxguard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="reliable domain per spec row")
    cert = sub.add_parser("certify", parents=[common], help="certify an implementation")
    cert.add_argument("--mode", choices=[m.value for m in Method], default=Method.INTERVAL.value)
    sub.add_parser("simulate", parents=[common], help="closed-loop simulation per spec row")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    run = RunManifest(args.config, args.command, args.out, args.seed, args.quiet, args.force)
    try:
        doc, run.config_hash = cfgmod.load(args.config)
        run.prepare()
        if args.command == "analyze":
            code = cmd_analyze(doc, run)
        elif args.command == "certify":
            max_exhaustive_bits()
            code = cmd_certify(doc, run, Method(args.mode))
        else:
            code = cmd_simulate(doc, run)
        manifest = {
            **run.provenance(),
            "command": args.command,
            "config": str(args.config),
            "exit_code": code,
        }
        run.write(f"manifest_{args.command}.json", _dump(manifest))
        return code
    except GuardError as exc:
        print(f"fxguard: guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except ConfigError as exc:
        print(f"fxguard: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OutputExists, OSError, ValueError) as exc:
        print(f"fxguard: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

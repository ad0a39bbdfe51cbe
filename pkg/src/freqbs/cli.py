"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources

import numpy as np

from . import __version__
from .circuit import (
    SweepSpec,
    document_unitary,
    dumps_result,
    jsonable,
    parse_circuit,
    rows_to_csv,
    run_document,
    run_sweep,
)
from .device import (
    AcousticDrive,
    AOMGeometry,
    conversion_efficiency,
    coupling_eta,
    interaction_R,
    material,
    required_intensity,
)
from .errors import FreqBSError, ValidationError
from .oracle import compare_with_simulator, random_trials
from .scenarios import (
    BiexcitonConfig,
    ErasureConfig,
    run_biexciton_fbs,
    run_biexciton_fbs_prime,
    run_erasure,
    run_hom,
)

SCENARIOS = ("erasure", "hom", "biexciton-fbs", "biexciton-fbs-prime")


def example_names() -> list[str]:
    root = resources.files("freqbs") / "documents"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def example_text(name: str) -> str:
    path = resources.files("freqbs") / "documents" / f"{name}.json"
    if not path.is_file():
        raise ValidationError(f"unknown example {name!r}; available: {', '.join(example_names())}")
    return path.read_text()


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None


def _source(args, required: bool = True) -> str | None:
    if args.file and args.example:
        raise ValidationError("give either a document file or --example, not both")
    if args.example:
        return example_text(args.example)
    if args.file:
        return _read(args.file)
    if required:
        raise ValidationError("a document file or --example is required")
    return None


def _flatten(data, prefix: str = "") -> dict:
    flat = {}
    if isinstance(data, dict):
        for k, v in data.items():
            flat.update(_flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(data, (int, float, str, bool)) or data is None:
        flat[prefix] = data
    return flat


def _emit(args, payload, rows=None) -> None:
    """Write ``payload`` as JSON, or ``rows`` (default: flattened scalars of payload) as CSV."""
    if args.output == "csv":
        if rows is None:
            rows = [_flatten(payload)]
        text = rows_to_csv(rows)
    elif isinstance(payload, str):
        text = payload
    else:
        text = json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> None:
    text = _source(args)
    result = run_document(parse_circuit(text))
    if args.output == "csv":
        _emit(args, result, rows=result["outcomes"] or [_flatten(result["metrics"])])
    else:
        _emit(args, dumps_result(result, include_timing=not args.no_timing))


def cmd_scenario(args) -> None:
    if args.name in ("erasure", "hom"):
        config = ErasureConfig.default(
            theta=args.theta if args.theta is not None else math.pi / 4,
            gap_hz=args.gap,
            frequency_blind=args.frequency_blind,
            splitter=args.splitter,
        )
        result = run_erasure(config) if args.name == "erasure" else run_hom(config)
    else:
        kwargs = dict(
            phase=args.phase,
            absorption=args.absorption,
            herald_efficiency=args.efficiency,
            herald_dark_count=args.dark_count,
        )
        if args.theta is not None:
            kwargs["theta"] = args.theta
        if args.alpha is not None:
            kwargs["shift_efficiency"] = args.alpha
        config = BiexcitonConfig.from_splittings(delta_hz=args.delta, xi_hz=args.xi, **kwargs)
        runner = run_biexciton_fbs if args.name == "biexciton-fbs" else run_biexciton_fbs_prime
        result = runner(config)
    data = result.to_dict()
    data["scenario"] = args.name
    _emit(args, data, rows=data["outcomes"] if args.output == "csv" else None)


def cmd_sweep(args) -> None:
    doc = parse_circuit(_source(args))
    spec = SweepSpec(args.param, args.start, args.stop, args.steps, tuple(args.metric or ()))
    rows = run_sweep(doc, spec)
    _emit(args, {"param": spec.param, "rows": rows}, rows=rows)


def cmd_device(args) -> None:
    crystal = material(args.material)
    geometry = AOMGeometry(args.length)
    drive = AcousticDrive(args.intensity, args.modulation)
    omega = 2 * math.pi * args.frequency
    eta = coupling_eta(crystal, drive, omega)
    theta = eta * geometry.interaction_length
    report = {
        "material": crystal.name,
        "figure_of_merit": crystal.figure_of_merit,
        "interaction_length_m": geometry.interaction_length,
        "intensity_w_per_m2": drive.intensity,
        "optical_frequency_hz": args.frequency,
        "eta_per_m": eta,
        "theta": theta,
        "conversion_efficiency": conversion_efficiency(theta),
        "R_s": interaction_R(crystal, drive, geometry),
    }
    if args.target_theta is not None:
        report["required_intensity_w_per_m2"] = required_intensity(args.target_theta, crystal, geometry, omega)
    _emit(args, report)


def cmd_oracle(args, rng: np.random.Generator) -> None:
    rows = []
    text = _source(args, required=False)
    if text is not None:
        doc = parse_circuit(text)
        u = document_unitary(doc)
        for k in range(1, args.photons + 1):
            rows.append({"source": "document", "modes": len(u.registry), "photons": k,
                         "max_abs_error": compare_with_simulator(u, k)})
    for row in random_trials(args.random_trials, args.modes, args.photons, rng):
        rows.append({"source": f"random{row['trial']}", **{k: v for k, v in row.items() if k != "trial"}})
    worst = max((r["max_abs_error"] for r in rows), default=0.0)
    _emit(args, {"worst_abs_error": worst, "tolerance": args.tol, "pass": worst <= args.tol, "rows": rows}, rows=rows)
    if worst > args.tol:
        raise RuntimeError(f"simulator and permanent oracle differ by {worst:.3g}")


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", choices=("json", "csv"), default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="write to this file instead of stdout")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for randomized checks")

    parser = argparse.ArgumentParser(
        prog="freqbs", description="Few-photon frequency-beam-splitter simulator", parents=[common]
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=help, parents=[common])

    def add_source(p: argparse.ArgumentParser) -> None:
        p.add_argument("file", nargs="?", help="document path, or - for stdin")
        p.add_argument("--example", help="use a shipped example document by name")

    p = add("run", "run a circuit document")
    add_source(p)
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock time for byte-stable output")

    p = add("scenario", "run a built-in scenario")
    p.add_argument("name", choices=SCENARIOS)
    p.add_argument("--theta", type=float)
    p.add_argument("--alpha", type=float, help="per-photon shift efficiency (heralded variant)")
    p.add_argument("--absorption", type=float, default=0.0005)
    p.add_argument("--delta", type=float, default=800e6, help="doublet splitting in Hz")
    p.add_argument("--xi", type=float, default=1e11, help="biexciton shift in Hz")
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--gap", type=float, default=1e9, help="emitter frequency difference in Hz")
    p.add_argument("--frequency-blind", action="store_true")
    p.add_argument("--splitter", choices=("fbs", "spatial"), default="fbs")
    p.add_argument("--efficiency", type=float, default=1.0, help="herald detector efficiency")
    p.add_argument("--dark-count", type=float, default=0.0, help="herald dark-count probability")

    p = add("sweep", "sweep one numeric document field")
    add_source(p)
    p.add_argument("--param", required=True, help="dotted path, e.g. components.1.theta")
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--metric", action="append", help="metric to record (repeatable; default all)")

    p = add("device", "AOM coupling for a crystal and drive")
    p.add_argument("material")
    p.add_argument("--length", type=float, default=1e-3, help="interaction length in m")
    p.add_argument("--intensity", type=float, default=1e6, help="acoustic intensity in W/m^2")
    p.add_argument("--modulation", type=float, default=1e9, help="acoustic frequency in Hz")
    p.add_argument("--frequency", type=float, default=3.26e14, help="optical frequency in Hz")
    p.add_argument("--target-theta", type=float)

    p = add("oracle", "compare simulator amplitudes with permanents")
    add_source(p)
    p.add_argument("--random-trials", type=int, default=0)
    p.add_argument("--modes", type=int, default=6)
    p.add_argument("--photons", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-10)

    add("examples", "list shipped example documents")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("output", "json"), ("out", None), ("seed", 0)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        if args.command == "run":
            cmd_run(args)
        elif args.command == "scenario":
            cmd_scenario(args)
        elif args.command == "sweep":
            cmd_sweep(args)
        elif args.command == "device":
            cmd_device(args)
        elif args.command == "oracle":
            cmd_oracle(args, np.random.default_rng(args.seed))
        elif args.command == "examples":
            sys.stdout.write("\n".join(example_names()) + "\n")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FreqBSError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0

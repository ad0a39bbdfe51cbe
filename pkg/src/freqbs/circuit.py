"""Circuit documents: JSON parsing and validation, execution, sweeps and result serialization.

A document looks like::

    {
      "name": "fbs",
      "bins": [{"name": "wi", "frequency_hz": 326001000000000.0}, ...],
      "modes": ["in:wi:none", "in:wd:none", ...],
      "initial_state": [{"amplitude": [1.0, 0.0], "occupation": {"in:wi:none": 1}}],
      "components": [{"type": "aom", "theta": 0.785..., "modulation_frequency": 1e9,
                      "pairs": [["in:wi:none", "in:wd:none"]]}],
      "detections": {"heralds": [], "measure": {"modes": [...], "frequency_blind": false}},
      "outputs": {"state": true, "concurrence": true, "subsystem": {...}}
    }

Modes are written ``path:bin:polarization``; a bare ``path`` is a source-marker
mode. Complex numbers are ``[re, im]`` pairs and frequencies are in Hz.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import time
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .components import (
    AOMCoupler,
    Component,
    FrequencyDemux,
    HeraldDetector,
    LossChannel,
    PolarizingBeamSplitter,
    SpatialBeamSplitter,
    circuit_unitary,
    compile_component,
    herald_outcomes,
)
from .detection import condition_on_detection
from .errors import FreqBSError, ValidationError
from .fock import DEFAULT_MAX_PHOTONS, FrequencyBin, Mode, ModeRegistry, ModeUnitary, PureState, apply_mode_unitary, postselect
from .measures import (
    DensityMatrix,
    classifiable,
    concurrence,
    fidelity,
    occupation_selector,
    partial_trace,
    polarization_selector,
    postselect_density,
)

TOP_LEVEL_KEYS = {"name", "max_photons", "bins", "modes", "initial_state", "components", "detections", "outputs"}
OUTPUT_FLAGS = ("state", "probabilities", "concurrence", "density_matrix", "transfer_matrix")


# ---------------------------------------------------------------------------
# validation helpers


def _fail(msg: str, path: str) -> ValidationError:
    return ValidationError(msg, field=path)


def _expect(value: Any, kind: type | tuple, path: str, what: str) -> Any:
    if isinstance(value, bool) and kind in (int, float, (int, float)):
        raise _fail(f"expected {what}, got a boolean", path)
    if not isinstance(value, kind):
        raise _fail(f"expected {what}, got {type(value).__name__}", path)
    return value


def _number(value: Any, path: str) -> float:
    v = float(_expect(value, (int, float), path, "a number"))
    if not math.isfinite(v):
        raise _fail("expected a finite number", path)
    return v


def _keys(obj: Mapping, allowed: Iterable[str], path: str, required: Iterable[str] = ()) -> None:
    extra = set(obj) - set(allowed)
    if extra:
        raise _fail(f"unknown key(s) {sorted(extra)}", path)
    for key in required:
        if key not in obj:
            raise _fail(f"missing required key {key!r}", path)


def _complex(value: Any, path: str) -> complex:
    _expect(value, list, path, "an [re, im] pair")
    if len(value) != 2:
        raise _fail("complex numbers are written as [re, im]", path)
    return complex(_number(value[0], f"{path}.0"), _number(value[1], f"{path}.1"))


def _join(path: str, key: Any) -> str:
    return f"{path}.{key}" if path else str(key)


class _ModeTable:
    def __init__(self, bins: dict[str, FrequencyBin]):
        self.bins = bins

    def parse(self, ref: Any, path: str) -> Mode:
        _expect(ref, str, path, "a mode reference string")
        parts = ref.split(":")
        if len(parts) == 1:
            return Mode(parts[0])
        if len(parts) != 3:
            raise _fail(f"mode reference {ref!r} must be 'path:bin:polarization' or a marker name", path)
        p, b, pol = parts
        if b not in self.bins:
            raise _fail(f"mode {ref!r} refers to undeclared bin {b!r}", path)
        try:
            return Mode(p, self.bins[b], pol)
        except ValidationError as exc:
            raise _fail(str(exc), path) from None


def _registered(registry: ModeRegistry, table: _ModeTable, ref: Any, path: str) -> Mode:
    mode = table.parse(ref, path)
    if mode not in registry:
        raise _fail(f"mode {ref!r} is not declared in the modes section", path)
    return mode


# ---------------------------------------------------------------------------
# document model


@dataclass(frozen=True)
class MeasureSpec:
    modes: tuple[Mode, ...]
    frequency_blind: bool = False


@dataclass(frozen=True)
class CircuitDocument:
    name: str
    registry: ModeRegistry
    initial_state: PureState
    components: tuple[Component, ...]
    heralds: tuple[HeraldDetector, ...]
    measure: MeasureSpec | None
    outputs: Mapping[str, Any]
    raw: Mapping[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return copy.deepcopy(dict(self.raw))


@dataclass(frozen=True)
class SweepSpec:
    param: str
    start: float
    stop: float
    steps: int
    metrics: tuple[str, ...] = ()

    def __post_init__(self):
        if self.steps < 2:
            raise ValidationError("a sweep needs at least 2 steps", field="steps")
        if self.start == self.stop:
            raise ValidationError("sweep start and stop must differ", field="from")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


def parse_circuit(text: str) -> CircuitDocument:
    """Parse and validate a JSON circuit document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"syntax error: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    return parse_document(data)


def parse_document(data: Any) -> CircuitDocument:
    _expect(data, dict, "", "a JSON object at the top level")
    _keys(data, TOP_LEVEL_KEYS, "", required=("bins", "modes", "initial_state"))
    name = _expect(data.get("name", "circuit"), str, "name", "a string")
    max_photons = data.get("max_photons", DEFAULT_MAX_PHOTONS)
    _expect(max_photons, int, "max_photons", "an integer")
    if max_photons < 1:
        raise _fail("max_photons must be at least 1", "max_photons")

    bins = _parse_bins(data["bins"])
    table = _ModeTable(bins)

    _expect(data["modes"], list, "modes", "a list of mode references")
    modes = []
    for i, ref in enumerate(data["modes"]):
        modes.append(table.parse(ref, f"modes.{i}"))
    try:
        registry = ModeRegistry(modes)
    except ValidationError as exc:
        raise _fail(str(exc), "modes") from None

    initial_state, initial_raw = _parse_initial_state(data["initial_state"], registry, table, max_photons)

    components, comp_raw = [], []
    _expect(data.get("components", []), list, "components", "a list")
    for i, spec in enumerate(data.get("components", [])):
        comp, raw = _parse_component(spec, registry, table, f"components.{i}", i)
        components.append(comp)
        comp_raw.append(raw)

    # compile once so structural problems are reported against the component;
    # loss channels add environment modes that detections may reference
    full_registry = registry
    for i, comp in enumerate(components):
        try:
            full_registry = compile_component(comp, full_registry).registry
        except FreqBSError as exc:
            raise _fail(str(exc), f"components.{i}") from None

    heralds, measure, det_raw = _parse_detections(data.get("detections", {}), full_registry, table)
    outputs = _parse_outputs(data.get("outputs", {}), full_registry, table)

    raw = {
        "name": name,
        "max_photons": max_photons,
        "bins": [{"name": b.label, "frequency_hz": b.center_frequency} for b in bins.values()],
        "modes": [str(m) for m in registry],
        "initial_state": initial_raw,
        "components": comp_raw,
        "detections": det_raw,
        "outputs": outputs["raw"],
    }
    return CircuitDocument(name, registry, initial_state, tuple(components), heralds, measure, outputs, raw)


def _parse_bins(value: Any) -> dict[str, FrequencyBin]:
    _expect(value, list, "bins", "a list of {name, frequency_hz} objects")
    bins: dict[str, FrequencyBin] = {}
    for i, entry in enumerate(value):
        path = f"bins.{i}"
        _expect(entry, dict, path, "an object")
        _keys(entry, ("name", "frequency_hz"), path, required=("name", "frequency_hz"))
        name = _expect(entry["name"], str, f"{path}.name", "a string")
        if not name or ":" in name:
            raise _fail("bin names must be non-empty and contain no ':'", f"{path}.name")
        if name in bins:
            raise _fail(f"duplicate bin name {name!r}", f"{path}.name")
        freq = _number(entry["frequency_hz"], f"{path}.frequency_hz")
        try:
            bins[name] = FrequencyBin(i + 1, freq, name)
        except ValidationError as exc:
            raise _fail(str(exc), f"{path}.frequency_hz") from None
    return bins


def _parse_initial_state(value: Any, registry: ModeRegistry, table: _ModeTable, max_photons: int):
    _expect(value, list, "initial_state", "a list of terms")
    if not value:
        raise _fail("initial state needs at least one term", "initial_state")
    terms, raw = [], []
    for i, term in enumerate(value):
        path = f"initial_state.{i}"
        _expect(term, dict, path, "an object")
        _keys(term, ("amplitude", "occupation"), path, required=("amplitude", "occupation"))
        amp = _complex(term["amplitude"], f"{path}.amplitude")
        occ = _expect(term["occupation"], dict, f"{path}.occupation", "an object")
        occ_modes = {}
        for ref, n in occ.items():
            mode = _registered(registry, table, ref, f"{path}.occupation.{ref}")
            _expect(n, int, f"{path}.occupation.{ref}", "a photon count")
            if n < 0:
                raise _fail("photon counts must be non-negative", f"{path}.occupation.{ref}")
            occ_modes[mode] = n
        terms.append((amp, occ_modes))
        raw.append({"amplitude": [amp.real, amp.imag], "occupation": {str(m): n for m, n in occ_modes.items()}})
    try:
        state = PureState.from_terms(registry, terms, max_photons=max_photons)
    except ValidationError as exc:
        raise _fail(f"initial state is not valid: {exc}", "initial_state") from None
    return state, raw


def _parse_component(spec: Any, registry: ModeRegistry, table: _ModeTable, path: str, index: int):
    _expect(spec, dict, path, "a component object")
    kind = spec.get("type")
    try:
        if kind == "aom":
            _keys(spec, ("type", "theta", "modulation_frequency", "pairs"), path, ("theta", "modulation_frequency", "pairs"))
            _expect(spec["pairs"], list, f"{path}.pairs", "a list of mode pairs")
            pairs = []
            for j, pair in enumerate(spec["pairs"]):
                ppath = f"{path}.pairs.{j}"
                _expect(pair, list, ppath, "a [mode, mode] pair")
                if len(pair) != 2:
                    raise _fail("each AOM pair has exactly two modes", ppath)
                pairs.append(tuple(_registered(registry, table, ref, f"{ppath}.{k}") for k, ref in enumerate(pair)))
            comp = AOMCoupler(
                tuple(pairs),
                _number(spec["theta"], f"{path}.theta"),
                _number(spec["modulation_frequency"], f"{path}.modulation_frequency"),
            )
        elif kind == "beam_splitter":
            _keys(spec, ("type", "path_a", "path_b", "mixing_angle", "convention"), path, ("path_a", "path_b"))
            comp = SpatialBeamSplitter(
                _expect(spec["path_a"], str, f"{path}.path_a", "a path name"),
                _expect(spec["path_b"], str, f"{path}.path_b", "a path name"),
                _number(spec.get("mixing_angle", math.pi / 4), f"{path}.mixing_angle"),
                _expect(spec.get("convention", "symmetric"), str, f"{path}.convention", "a string"),
            )
        elif kind == "pbs":
            _keys(spec, ("type", "input", "transmit", "reflect"), path, ("input", "transmit", "reflect"))
            comp = PolarizingBeamSplitter(
                _expect(spec["input"], str, f"{path}.input", "a path name"),
                _expect(spec["transmit"], str, f"{path}.transmit", "a path name"),
                _expect(spec["reflect"], str, f"{path}.reflect", "a path name"),
            )
        elif kind == "demux":
            _keys(spec, ("type", "routes"), path, ("routes",))
            _expect(spec["routes"], list, f"{path}.routes", "a list of routes")
            routes = []
            for j, route in enumerate(spec["routes"]):
                rpath = f"{path}.routes.{j}"
                _expect(route, dict, rpath, "an object")
                _keys(route, ("path", "bin", "to"), rpath, ("path", "bin", "to"))
                _expect(route["bin"], str, f"{rpath}.bin", "a bin name")
                if route["bin"] not in table.bins:
                    raise _fail(f"undeclared bin {route['bin']!r}", f"{rpath}.bin")
                routes.append(((_expect(route["path"], str, f"{rpath}.path", "a path"), route["bin"]),
                               _expect(route["to"], str, f"{rpath}.to", "a path")))
            comp = FrequencyDemux(tuple(routes))
        elif kind == "loss":
            _keys(spec, ("type", "modes", "transmission", "label"), path, ("modes", "transmission"))
            _expect(spec["modes"], list, f"{path}.modes", "a list of modes")
            modes = tuple(_registered(registry, table, ref, f"{path}.modes.{j}") for j, ref in enumerate(spec["modes"]))
            label = _expect(spec.get("label", f"loss{index}"), str, f"{path}.label", "a string")
            comp = LossChannel(modes, _number(spec["transmission"], f"{path}.transmission"), label)
        else:
            raise _fail(f"unknown component type {kind!r}", f"{path}.type")
    except ValidationError as exc:
        if exc.field is not None:
            raise
        raise _fail(f"{kind} component: {exc}", path) from None
    return comp, component_to_dict(comp)


def component_to_dict(comp: Component) -> dict[str, Any]:
    """Document form of a component (inverse of the component parser)."""
    if isinstance(comp, AOMCoupler):
        return {
            "type": "aom",
            "theta": comp.theta,
            "modulation_frequency": comp.modulation_frequency,
            "pairs": [[str(a), str(b)] for a, b in comp.pairs],
        }
    if isinstance(comp, SpatialBeamSplitter):
        return {
            "type": "beam_splitter",
            "path_a": comp.path_a,
            "path_b": comp.path_b,
            "mixing_angle": comp.mixing_angle,
            "convention": comp.convention,
        }
    if isinstance(comp, PolarizingBeamSplitter):
        return {"type": "pbs", "input": comp.input_path, "transmit": comp.transmit_path, "reflect": comp.reflect_path}
    if isinstance(comp, FrequencyDemux):
        return {"type": "demux", "routes": [{"path": p, "bin": b, "to": t} for (p, b), t in comp.routes]}
    if isinstance(comp, LossChannel):
        return {"type": "loss", "modes": [str(m) for m in comp.modes], "transmission": comp.transmission, "label": comp.label}
    raise ValidationError(f"{type(comp).__name__} has no document form")


def herald_to_dict(det: HeraldDetector) -> dict[str, Any]:
    return {
        "name": det.name,
        "modes": [str(m) for m in det.modes],
        "efficiency": det.efficiency,
        "dark_count_probability": det.dark_count_probability,
    }


def _parse_detections(value: Any, registry: ModeRegistry, table: _ModeTable):
    _expect(value, dict, "detections", "an object")
    _keys(value, ("heralds", "measure"), "detections")
    heralds, raw_heralds = [], []
    _expect(value.get("heralds", []), list, "detections.heralds", "a list")
    for i, h in enumerate(value.get("heralds", [])):
        path = f"detections.heralds.{i}"
        _expect(h, dict, path, "an object")
        _keys(h, ("name", "modes", "efficiency", "dark_count_probability"), path, ("modes",))
        _expect(h["modes"], list, f"{path}.modes", "a list of modes")
        modes = tuple(_registered(registry, table, ref, f"{path}.modes.{j}") for j, ref in enumerate(h["modes"]))
        try:
            det = HeraldDetector(
                modes,
                _number(h.get("efficiency", 1.0), f"{path}.efficiency"),
                _number(h.get("dark_count_probability", 0.0), f"{path}.dark_count_probability"),
                _expect(h.get("name", f"herald{i}"), str, f"{path}.name", "a string"),
            )
        except ValidationError as exc:
            raise _fail(str(exc), path) from None
        heralds.append(det)
        raw_heralds.append(herald_to_dict(det))
    measure, raw_measure = None, None
    if value.get("measure") is not None:
        path = "detections.measure"
        m = _expect(value["measure"], dict, path, "an object")
        _keys(m, ("modes", "frequency_blind"), path, ("modes",))
        _expect(m["modes"], list, f"{path}.modes", "a list of modes")
        if not m["modes"]:
            raise _fail("measurement needs at least one mode", f"{path}.modes")
        modes = tuple(_registered(registry, table, ref, f"{path}.modes.{j}") for j, ref in enumerate(m["modes"]))
        blind = _expect(m.get("frequency_blind", False), bool, f"{path}.frequency_blind", "a boolean")
        measure = MeasureSpec(modes, blind)
        raw_measure = {"modes": [str(x) for x in modes], "frequency_blind": blind}
    return tuple(heralds), measure, {"heralds": raw_heralds, "measure": raw_measure}


def _parse_outputs(value: Any, registry: ModeRegistry, table: _ModeTable) -> dict[str, Any]:
    _expect(value, dict, "outputs", "an object")
    _keys(value, OUTPUT_FLAGS + ("coincidence", "subsystem", "fidelity"), "outputs")
    out: dict[str, Any] = {}
    raw: dict[str, Any] = {}
    for flag in OUTPUT_FLAGS:
        default = flag == "probabilities"
        out[flag] = raw[flag] = _expect(value.get(flag, default), bool, f"outputs.{flag}", "a boolean")

    out["coincidence"] = raw["coincidence"] = None
    if value.get("coincidence") is not None:
        path = "outputs.coincidence"
        groups = _expect(value["coincidence"], dict, path, "an object of detector groups")
        if len(groups) < 2:
            raise _fail("coincidence needs at least two detector groups", path)
        out["coincidence"] = {
            name: tuple(_registered(registry, table, ref, f"{path}.{name}.{j}") for j, ref in enumerate(refs))
            for name, refs in groups.items()
        }
        raw["coincidence"] = {name: [str(m) for m in ms] for name, ms in out["coincidence"].items()}

    out["subsystem"] = raw["subsystem"] = None
    if value.get("subsystem") is not None:
        path = "outputs.subsystem"
        sub = _expect(value["subsystem"], dict, path, "an object")
        kind = sub.get("kind")
        if kind == "polarization":
            _keys(sub, ("kind", "arms", "postselect"), path, ("arms",))
            _expect(sub["arms"], list, f"{path}.arms", "a list of arms")
            arms = tuple(
                tuple(_registered(registry, table, ref, f"{path}.arms.{a}.{j}") for j, ref in enumerate(arm))
                for a, arm in enumerate(sub["arms"])
            )
            try:
                selector = polarization_selector(registry, arms)
            except ValidationError as exc:
                raise _fail(str(exc), f"{path}.arms") from None
            raw_sub = {"kind": kind, "arms": [[str(m) for m in arm] for arm in arms]}
        elif kind == "occupation":
            _keys(sub, ("kind", "modes", "postselect"), path, ("modes",))
            _expect(sub["modes"], list, f"{path}.modes", "a list of modes")
            modes = tuple(_registered(registry, table, ref, f"{path}.modes.{j}") for j, ref in enumerate(sub["modes"]))
            selector = occupation_selector(registry, modes)
            raw_sub = {"kind": kind, "modes": [str(m) for m in modes]}
        else:
            raise _fail(f"unknown subsystem kind {kind!r}", f"{path}.kind")
        raw_sub["postselect"] = _expect(sub.get("postselect", False), bool, f"{path}.postselect", "a boolean")
        out["subsystem"] = {"selector": selector, "postselect": raw_sub["postselect"]}
        raw["subsystem"] = raw_sub

    out["fidelity"] = raw["fidelity"] = None
    if value.get("fidelity") is not None:
        path = "outputs.fidelity"
        fid = _expect(value["fidelity"], dict, path, "an object")
        _keys(fid, ("target",), path, ("target",))
        if out["subsystem"] is None:
            raise _fail("fidelity needs a subsystem", path)
        _expect(fid["target"], list, f"{path}.target", "a list of [re, im] amplitudes")
        target = np.array([_complex(c, f"{path}.target.{j}") for j, c in enumerate(fid["target"])])
        labels = out["subsystem"]["selector"][1]
        if target.size != len(labels):
            raise _fail(f"target needs {len(labels)} amplitudes", f"{path}.target")
        if abs(np.linalg.norm(target) - 1) > 1e-9:
            raise _fail("fidelity target must be normalized", f"{path}.target")
        out["fidelity"] = target
        raw["fidelity"] = {"target": [[c.real, c.imag] for c in target]}

    out["raw"] = raw
    return out


def document_dict(
    name: str,
    registry: ModeRegistry,
    state: PureState,
    components: Sequence[Component] = (),
    heralds: Sequence[HeraldDetector] = (),
    measure: MeasureSpec | None = None,
    outputs: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    """Document form of an in-memory circuit; ``outputs`` is passed through as written."""
    bins = sorted(registry.bins, key=lambda b: b.id)
    return {
        "name": name,
        "max_photons": state.max_photons,
        "bins": [{"name": b.label, "frequency_hz": b.center_frequency} for b in bins],
        "modes": [str(m) for m in registry],
        "initial_state": [{"amplitude": [a.real, a.imag], "occupation": occ} for a, occ in state.terms()],
        "components": [component_to_dict(c) for c in components],
        "detections": {
            "heralds": [herald_to_dict(h) for h in heralds],
            "measure": None
            if measure is None
            else {"modes": [str(m) for m in measure.modes], "frequency_blind": measure.frequency_blind},
        },
        "outputs": dict(outputs or {}),
    }


def serialize(doc: CircuitDocument) -> str:
    """Canonical JSON text for a document (stable key order)."""
    return json.dumps(doc.to_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# encoding of states and results


def _encode_label(label: Any, registry: ModeRegistry | None) -> Any:
    if registry is not None and isinstance(label, tuple):
        return {str(registry[i]): n for i, n in enumerate(label) if n}
    return label


def encode_state(state: PureState | DensityMatrix | None) -> Any:
    if state is None:
        return None
    if isinstance(state, PureState):
        return {
            "kind": "pure",
            "terms": [{"amplitude": [a.real, a.imag], "occupation": occ} for a, occ in state.terms()],
        }
    return {
        "kind": "density",
        "basis": [_encode_label(b, state.registry) for b in state.basis],
        "matrix": [[[z.real, z.imag] for z in row] for row in state.matrix.tolist()],
    }


def jsonable(obj: Any) -> Any:
    if isinstance(obj, (PureState, DensityMatrix)):
        return encode_state(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps_result(result: Mapping[str, Any], include_timing: bool = True) -> str:
    data = dict(result)
    if not include_timing:
        data.pop("wall_clock_s", None)
    return json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# execution


def document_unitary(doc: CircuitDocument) -> ModeUnitary:
    """Single-particle transfer matrix of the document's components."""
    return circuit_unitary(doc.registry, doc.components)


def _evolve_document(doc: CircuitDocument) -> PureState:
    state = doc.initial_state
    for i, comp in enumerate(doc.components):
        try:
            compiled = compile_component(comp, state.registry)
            state = apply_mode_unitary(state.lift(compiled.registry), compiled)
        except FreqBSError as exc:
            raise type(exc)(f"component {i} ({type(comp).__name__}): {exc}") from None
    return state


def _subsystem_metrics(state, doc: CircuitDocument) -> dict[str, Any]:
    spec = doc.outputs["subsystem"]
    selector = spec["selector"]
    metrics: dict[str, Any] = {}
    if spec["postselect"]:
        keep = classifiable(selector[0])
        if isinstance(state, PureState):
            p, state = postselect(state, keep)
        else:
            p, state = postselect_density(state, keep)
        metrics["postselection_probability"] = p
        if state is None:
            return metrics
    rho = partial_trace(state, selector)
    if rho.dim == 4 and doc.outputs["concurrence"]:
        metrics["concurrence"] = concurrence(rho)
    if doc.outputs["fidelity"] is not None:
        metrics["fidelity"] = fidelity(rho, doc.outputs["fidelity"])
    if doc.outputs["density_matrix"]:
        metrics["density_matrix"] = {"basis": list(rho.basis), "matrix": rho.matrix}
    return metrics


def _coincidence(state, groups: Mapping[str, Sequence[Mode]]) -> float:
    registry = state.registry
    idx = [[registry.index(m) for m in ms] for ms in groups.values()]

    def hit(occ) -> bool:
        return all(sum(occ[i] for i in g) >= 1 for g in idx)

    if isinstance(state, PureState):
        return sum(abs(a) ** 2 for occ, a in state.amplitudes.items() if hit(occ)) / state.norm() ** 2
    return float(sum(state.matrix[i, i].real for i, occ in enumerate(state.basis) if hit(occ)))


def run_document(doc: CircuitDocument) -> dict[str, Any]:
    """Evolve, herald, measure and evaluate the requested outputs of a document."""
    t0 = time.perf_counter()
    state: PureState | DensityMatrix | None = _evolve_document(doc)
    metrics: dict[str, Any] = {}
    herald_rows = []
    p_heralds = 1.0
    for det in doc.heralds:
        try:
            no_click, click = herald_outcomes(state, det)
        except FreqBSError as exc:
            raise type(exc)(f"herald {det.name}: {exc}") from None
        herald_rows.append({"herald": det.name, "click": click.probability, "no_click": no_click.probability})
        p_heralds *= no_click.probability
        state = no_click.state
        if state is None:
            break
    if doc.heralds:
        metrics["herald_success_probability"] = p_heralds

    outcome_rows = []
    if state is not None:
        if doc.outputs["coincidence"] is not None:
            metrics["coincidence"] = _coincidence(state, doc.outputs["coincidence"])
        if doc.outputs["subsystem"] is not None and doc.measure is None:
            sub = _subsystem_metrics(state, doc)
            metrics.update(sub)
            metrics["success_probability"] = p_heralds * sub.get("postselection_probability", 1.0)
        if doc.measure is not None:
            outcomes = condition_on_detection(state, doc.measure.modes, doc.measure.frequency_blind)
            clicked_p = 0.0
            weighted: dict[str, float] = {}
            for o in outcomes:
                row: dict[str, Any] = {"outcome": o.describe(), "probability": o.probability}
                if o.clicked and o.state is not None and doc.outputs["subsystem"] is not None:
                    sub = _subsystem_metrics(o.state, doc)
                    row.update(sub)
                    clicked_p += o.probability
                    for key in ("concurrence", "fidelity"):
                        if key in sub:
                            weighted[key] = weighted.get(key, 0.0) + o.probability * sub[key]
                if doc.outputs["state"] and o.state is not None:
                    row["state"] = o.state
                outcome_rows.append(row)
            metrics["click_probability"] = sum(o.probability for o in outcomes if o.clicked)
            for key, total in weighted.items():
                metrics[f"mean_click_{key}"] = total / clicked_p
    elif doc.heralds:
        metrics["success_probability"] = 0.0

    result: dict[str, Any] = {
        "tool": "freqbs",
        "version": __version__,
        "document": doc.to_dict(),
        "metrics": metrics,
        "heralds": herald_rows,
        "outcomes": outcome_rows if doc.outputs["probabilities"] or doc.outputs["state"] else [],
    }
    if doc.outputs["state"]:
        result["state"] = state
    if doc.outputs["transfer_matrix"]:
        u = document_unitary(doc)
        result["transfer_matrix"] = {"modes": [str(m) for m in u.registry], "matrix": u.matrix}
    result["wall_clock_s"] = time.perf_counter() - t0
    return jsonable(result)


# ---------------------------------------------------------------------------
# sweeps


def _resolve(raw: dict, param: str) -> tuple[Any, Any]:
    parts = param.split(".")
    node: Any = raw
    for part in parts[:-1]:
        node = _step(node, part, param)
    last = parts[-1]
    if isinstance(node, list):
        try:
            key: Any = int(last)
            node[key]
        except (ValueError, IndexError):
            raise ValidationError(f"cannot resolve parameter path {param!r}", field=param) from None
    elif isinstance(node, dict) and last in node:
        key = last
    else:
        raise ValidationError(f"cannot resolve parameter path {param!r}", field=param)
    value = node[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"parameter {param!r} is not a real-valued field", field=param)
    return node, key


def _step(node: Any, part: str, param: str) -> Any:
    try:
        if isinstance(node, list):
            return node[int(part)]
        if isinstance(node, dict):
            return node[part]
    except (ValueError, IndexError, KeyError):
        pass
    raise ValidationError(f"cannot resolve parameter path {param!r}", field=param)


def run_sweep(doc: CircuitDocument, sweep: SweepSpec) -> list[dict[str, Any]]:
    """One row per sweep point with the parameter value and the requested metrics."""
    base = doc.to_dict()
    _resolve(base, sweep.param)
    rows = []
    for value in sweep.values():
        raw = copy.deepcopy(base)
        node, key = _resolve(raw, sweep.param)
        node[key] = float(value)
        result = run_document(parse_document(raw))
        metrics = result["metrics"]
        names = sweep.metrics or tuple(k for k, v in metrics.items() if isinstance(v, (int, float)))
        row: dict[str, Any] = {sweep.param: float(value)}
        for name in names:
            if name not in metrics:
                raise ValidationError(f"metric {name!r} is not produced by this document", field="metrics")
            row[name] = metrics[name]
        rows.append(row)
    return rows


def rows_to_csv(rows: Sequence[Mapping[str, Any]]) -> str:
    if not rows:
        return ""
    rows = jsonable(list(rows))
    fields = list(rows[0])
    for row in rows[1:]:
        fields += [k for k in row if k not in fields]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else json.dumps(v) if isinstance(v, (list, dict)) else v)
                         for k, v in row.items()})
    return buf.getvalue()

"""Optical elements compiled to mode unitaries or detection plans.

Polarization is never changed by any element; only paths and frequency bins
are transformed. Cross-coupling terms carry ``+i`` (the symmetric convention),
matching the AOM field-coupling relations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from .detection import split_by_pattern
from .errors import ValidationError
from .fock import Mode, ModeRegistry, ModeUnitary, PureState, apply_mode_unitary
from .measures import DensityMatrix, accumulate, as_operator

MAX_MODULATION_HZ = 3e9
FREQUENCY_GAP_RTOL = 1e-9
DEFAULT_ABSORPTION = 0.0005


class ModulationWarning(UserWarning):
    """AOM drive above the few-GHz range that current modulators reach."""


def coupler_block(theta: float, convention: str = "symmetric") -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    if convention == "symmetric":
        return np.array([[c, 1j * s], [1j * s, c]])
    if convention == "real":
        return np.array([[c, -s], [s, c]])
    raise ValidationError(f"unknown beam-splitter convention {convention!r}")


def _embed(registry: ModeRegistry, blocks: Iterable[tuple[int, int, np.ndarray]]) -> ModeUnitary:
    m = np.eye(len(registry), dtype=complex)
    for a, b, block in blocks:
        m[np.ix_([a, b], [a, b])] = block
    return ModeUnitary(registry, m)


@dataclass(frozen=True)
class AOMCoupler:
    """Acousto-optic coupling of mode pairs separated by the drive frequency.

    ``theta`` is the interaction angle (coupling constant times interaction
    length); the shifted fraction is ``sin(theta)**2``.
    """

    pairs: tuple[tuple[Mode, Mode], ...]
    theta: float
    modulation_frequency: float

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        if not (self.modulation_frequency > 0):
            raise ValidationError("modulation_frequency must be positive")
        if not math.isfinite(self.theta):
            raise ValidationError("theta must be finite")
        seen: set[Mode] = set()
        for a, b in self.pairs:
            if a.is_marker or b.is_marker:
                raise ValidationError(f"AOM pair ({a}, {b}) contains a source-marker mode")
            if a in seen or b in seen or a == b:
                raise ValidationError(f"AOM pairs overlap at ({a}, {b})")
            seen.update((a, b))
            if a.polarization != b.polarization:
                raise ValidationError(f"AOM pair ({a}, {b}) mixes polarizations")
            gap = abs(a.bin.center_frequency - b.bin.center_frequency)
            if abs(gap - self.modulation_frequency) > FREQUENCY_GAP_RTOL * self.modulation_frequency:
                raise ValidationError(
                    f"AOM pair ({a}, {b}) has frequency gap {gap:.9g} Hz but modulation is {self.modulation_frequency:.9g} Hz"
                )
        if self.modulation_frequency > MAX_MODULATION_HZ:
            warnings.warn(
                f"AOM modulation {self.modulation_frequency:.3g} Hz exceeds {MAX_MODULATION_HZ:.0e} Hz",
                ModulationWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class SpatialBeamSplitter:
    path_a: str
    path_b: str
    mixing_angle: float = math.pi / 4
    convention: str = "symmetric"

    def __post_init__(self):
        if self.path_a == self.path_b:
            raise ValidationError("beam splitter needs two distinct paths")
        coupler_block(0.0, self.convention)


@dataclass(frozen=True)
class PolarizingBeamSplitter:
    """Routes x-polarized light on ``input_path`` to ``transmit_path`` and y to ``reflect_path``.

    The routing is completed to an involution, so the same element also
    recombines the two paths back onto ``input_path``.
    """

    input_path: str
    transmit_path: str
    reflect_path: str

    def __post_init__(self):
        if self.transmit_path == self.reflect_path:
            raise ValidationError("PBS transmit and reflect paths must differ")
        if self.input_path in (self.transmit_path, self.reflect_path):
            raise ValidationError("PBS input path must differ from its output paths")


@dataclass(frozen=True)
class FrequencyDemux:
    """Prism: maps (input path, bin label) to an output path, for every polarization."""

    routes: tuple[tuple[tuple[str, str], str], ...]

    def __post_init__(self):
        routes = self.routes.items() if isinstance(self.routes, Mapping) else self.routes
        object.__setattr__(self, "routes", tuple(((p, b), out) for (p, b), out in routes))

    def inverse(self) -> FrequencyDemux:
        return FrequencyDemux(tuple(((out, b), p) for (p, b), out in self.routes))


@dataclass(frozen=True)
class LossChannel:
    """Absorption modelled as a beam splitter onto fresh environment modes."""

    modes: tuple[Mode, ...]
    transmission: float
    label: str = "loss"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not (0.0 <= self.transmission <= 1.0):
            raise ValidationError(f"transmission must lie in [0, 1], got {self.transmission}")
        if any(m.is_marker for m in self.modes):
            raise ValidationError("loss cannot act on source-marker modes")

    def environment_mode(self, mode: Mode) -> Mode:
        return mode.with_path(f"{self.label}>{mode.path}")


@dataclass(frozen=True)
class HeraldDetector:
    modes: tuple[Mode, ...]
    efficiency: float = 1.0
    dark_count_probability: float = 0.0
    name: str = "herald"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValidationError(f"herald {self.name} watches no modes")
        if not (0.0 <= self.efficiency <= 1.0):
            raise ValidationError(f"herald {self.name}: efficiency must lie in [0, 1]")
        if not (0.0 <= self.dark_count_probability < 1.0):
            raise ValidationError(f"herald {self.name}: dark_count_probability must lie in [0, 1)")

    @property
    def ideal(self) -> bool:
        return self.efficiency == 1.0 and self.dark_count_probability == 0.0


Component = Union[AOMCoupler, SpatialBeamSplitter, PolarizingBeamSplitter, FrequencyDemux, LossChannel, HeraldDetector]


@dataclass(frozen=True)
class DetectionPlan:
    detector: HeraldDetector
    registry: ModeRegistry


def fbs_unitary(coupler: AOMCoupler, registry: ModeRegistry) -> ModeUnitary:
    """Identity except for a ``[[cos, i sin], [i sin, cos]]`` block on each coupled pair."""
    block = coupler_block(coupler.theta)
    return _embed(registry, ((registry.index(a), registry.index(b), block) for a, b in coupler.pairs))


def routing_unitary(registry: ModeRegistry, routes: Mapping[Mode, Mode], what: str = "routing") -> ModeUnitary:
    """Permutation sending each source mode to its target, completed to a bijection.

    Targets that are not themselves sources are sent back, in order, to the
    sources nothing maps onto, so a pure split is its own inverse.
    """
    src_to_dst: dict[int, int] = {}
    claimed: dict[int, Mode] = {}
    for src, dst in routes.items():
        s, d = registry.index(src), registry.index(dst)
        if d in claimed:
            raise ValidationError(f"{what} collision: {claimed[d]} and {src} both map to {dst}")
        claimed[d] = src
        src_to_dst[s] = d
    needs_image = [d for d in src_to_dst.values() if d not in src_to_dst]
    needs_preimage = [s for s in src_to_dst if s not in claimed]
    perm = dict(src_to_dst)
    perm.update(zip(needs_image, needs_preimage))
    m = np.zeros((len(registry), len(registry)), dtype=complex)
    for k in range(len(registry)):
        m[perm.get(k, k), k] = 1.0
    return ModeUnitary(registry, m)


def _require(registry: ModeRegistry, mode: Mode, context: str) -> Mode:
    if mode not in registry:
        raise ValidationError(f"{context}: mode {mode} is not registered")
    return mode


def compile_component(spec: Component, registry: ModeRegistry) -> ModeUnitary | DetectionPlan:
    """Compile a component against ``registry``.

    Loss channels return a unitary on an enlarged registry that includes their
    environment modes; heralds return a :class:`DetectionPlan`.
    """
    if isinstance(spec, AOMCoupler):
        return fbs_unitary(spec, registry)

    if isinstance(spec, SpatialBeamSplitter):
        block = coupler_block(spec.mixing_angle, spec.convention)
        blocks = []
        for mode in registry:
            if mode.path != spec.path_a:
                continue
            partner = _require(registry, mode.with_path(spec.path_b), "beam splitter")
            blocks.append((registry.index(mode), registry.index(partner), block))
        for mode in registry:
            if mode.path == spec.path_b and mode.with_path(spec.path_a) not in registry:
                raise ValidationError(f"beam splitter: mode {mode} has no partner on path {spec.path_a}")
        return _embed(registry, blocks)

    if isinstance(spec, PolarizingBeamSplitter):
        routes = {}
        for mode in registry:
            if mode.path != spec.input_path:
                continue
            if mode.polarization == "none":
                raise ValidationError(f"PBS: mode {mode} has no polarization")
            out = spec.transmit_path if mode.polarization == "x" else spec.reflect_path
            routes[mode] = _require(registry, mode.with_path(out), "PBS")
        return routing_unitary(registry, routes, "PBS")

    if isinstance(spec, FrequencyDemux):
        routes = {}
        for (path, bin_label), out in spec.routes:
            matched = [m for m in registry if m.path == path and m.bin is not None and m.bin.label == bin_label]
            if not matched:
                raise ValidationError(f"demux: no registered mode on path {path} at bin {bin_label}")
            for mode in matched:
                routes[mode] = _require(registry, mode.with_path(out), "demux")
        return routing_unitary(registry, routes, "demux")

    if isinstance(spec, LossChannel):
        for mode in spec.modes:
            _require(registry, mode, "loss")
        extended = registry.extend(spec.environment_mode(m) for m in spec.modes)
        t = spec.transmission
        block = np.array([[math.sqrt(t), 1j * math.sqrt(1 - t)], [1j * math.sqrt(1 - t), math.sqrt(t)]])
        return _embed(
            extended,
            ((extended.index(m), extended.index(spec.environment_mode(m)), block) for m in spec.modes),
        )

    if isinstance(spec, HeraldDetector):
        for mode in spec.modes:
            _require(registry, mode, f"herald {spec.name}")
        return DetectionPlan(spec, registry)

    raise ValidationError(f"unknown component type {type(spec).__name__}")


@dataclass(frozen=True)
class HeraldOutcome:
    label: str
    probability: float
    state: PureState | DensityMatrix | None


def herald_outcomes(state: PureState | DensityMatrix, detector: HeraldDetector) -> list[HeraldOutcome]:
    """Click / no-click statistics of a non-resolving herald detector.

    ``P(click) = 1 - (1 - dark) * (1 - efficiency * P(photon present))``. The
    detector absorbs whatever reaches it, so both post-states have the watched
    modes emptied. With an ideal detector the no-click branch is a pure
    projection; otherwise the branches are incoherent mixtures.
    """
    registry = state.registry
    for mode in detector.modes:
        _require(registry, mode, f"herald {detector.name}")
    idx = sorted(registry.index(m) for m in detector.modes)
    keys, op = as_operator(state)
    total = float(np.trace(op).real)

    empty: list = []
    present: list = []
    for pattern, (rest, block) in split_by_pattern(state, idx).items():
        (present if any(pattern) else empty).append((rest, block))
    p_empty = sum(float(np.trace(b).real) for _, b in empty) / total
    p_present = 1.0 - p_empty

    eta, dark = detector.efficiency, detector.dark_count_probability
    p_no_click = (1 - dark) * (1 - eta * p_present)
    p_click = 1.0 - p_no_click

    w_empty_nc, w_present_nc = (1 - dark), (1 - dark) * (1 - eta)
    w_empty_c, w_present_c = dark, 1 - w_present_nc

    def branch(w_e: float, w_p: float):
        parts = [(w_e, r, b) for r, b in empty if w_e] + [(w_p, r, b) for r, b in present if w_p]
        if not parts:
            return None
        ks, m = accumulate(parts)
        if np.trace(m).real <= 0:
            return None
        return DensityMatrix.from_operator(ks, m, registry)

    if isinstance(state, PureState) and detector.ideal:
        amps = {k: a for k, a in state.amplitudes.items() if not any(k[i] for i in idx)}
        no_click_state = PureState(registry, amps, state.max_photons, state.mixed_sectors).normalized() if amps else None
    else:
        no_click_state = branch(w_empty_nc, w_present_nc) if p_no_click > 0 else None
    click_state = branch(w_empty_c, w_present_c) if p_click > 0 else None
    return [
        HeraldOutcome("no-click", p_no_click, no_click_state),
        HeraldOutcome("click", p_click, click_state),
    ]


def evolve(state: PureState, components: Iterable[Component]) -> PureState:
    """Apply unitary components in order, growing the registry for loss environments."""
    for i, spec in enumerate(components):
        compiled = compile_component(spec, state.registry)
        if isinstance(compiled, DetectionPlan):
            raise ValidationError(f"component {i} is a detector; use herald_outcomes for detection")
        state = apply_mode_unitary(state.lift(compiled.registry), compiled)
    return state


def circuit_unitary(registry: ModeRegistry, components: Iterable[Component]) -> ModeUnitary:
    """Single-particle transfer matrix of a component sequence (on the final registry)."""
    total = ModeUnitary.identity(registry)
    for spec in components:
        compiled = compile_component(spec, total.registry)
        if isinstance(compiled, DetectionPlan):
            continue
        total = compiled @ total.lift(compiled.registry)
    return total

"""End-to-end runs of the three frequency-beam-splitter applications.

* which-way erasure between two emitters of different colour (single photon)
* two-photon interference between frequency-mismatched sources (HOM dip)
* rectification of biexciton polarization entanglement, with an ideal FBS or
  with the heralded two-pass variant (FBS')
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .components import (
    DEFAULT_ABSORPTION,
    AOMCoupler,
    FrequencyDemux,
    HeraldDetector,
    LossChannel,
    PolarizingBeamSplitter,
    SpatialBeamSplitter,
    circuit_unitary,
    evolve,
    herald_outcomes,
)
from .detection import condition_on_detection
from .errors import ValidationError
from .fock import FrequencyBin, Mode, ModeRegistry, PureState, postselect
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
from .oracle import transition_amplitude_oracle

DEFAULT_DELTA_HZ = 800e6
DEFAULT_XI_HZ = 1e11
DEFAULT_OMEGA1_HZ = 3.26e14
DEFAULT_EMITTER_GAP_HZ = 1e9
FREQUENCY_RTOL = 1e-9
ABSORPTION_BOUND_FACTOR = 0.95**2

POL_BASIS = ("xx", "xy", "yx", "yy")


@dataclass(frozen=True)
class ErasureConfig:
    """Two emitters at ``omega_1`` and ``omega_2`` feeding one splitter and two detectors.

    ``splitter="fbs"`` couples the two colours in an AOM whose output directions
    are tied to frequency; ``splitter="spatial"`` is an ordinary path beam
    splitter (no frequency shift), which leaves the colour as which-way
    information. ``convention`` only affects the spatial splitter.
    """

    omega_1: FrequencyBin
    omega_2: FrequencyBin
    theta: float = math.pi / 4
    frequency_blind: bool = False
    splitter: str = "fbs"
    convention: str = "symmetric"

    def __post_init__(self):
        if self.omega_1.id == self.omega_2.id or self.omega_1.center_frequency == self.omega_2.center_frequency:
            raise ValidationError("erasure needs two distinct frequency bins")
        if self.splitter not in ("fbs", "spatial"):
            raise ValidationError(f"unknown splitter {self.splitter!r}")
        if self.convention not in ("symmetric", "real"):
            raise ValidationError(f"unknown convention {self.convention!r}")

    @classmethod
    def default(cls, theta: float = math.pi / 4, gap_hz: float = DEFAULT_EMITTER_GAP_HZ, **kwargs) -> ErasureConfig:
        w1 = FrequencyBin(1, DEFAULT_OMEGA1_HZ, "w1")
        w2 = FrequencyBin(2, DEFAULT_OMEGA1_HZ - gap_hz, "w2")
        return cls(w1, w2, theta, **kwargs)

    @property
    def modulation_frequency(self) -> float:
        return abs(self.omega_1.center_frequency - self.omega_2.center_frequency)

    def shifted(self, offset_hz: float) -> ErasureConfig:
        return replace(self, omega_1=self.omega_1.shifted(offset_hz), omega_2=self.omega_2.shifted(offset_hz))


@dataclass(frozen=True)
class BiexcitonConfig:
    """Cascade photons of an asymmetric dot: x pair at (w1, w2), y pair at (w3, w4).

    ``shift_efficiency`` (alpha) sets the per-photon AOM shift probability in
    the heralded variant. ``balance_loss`` inserts an attenuator in the x arm
    matching the per-photon survival of the y arm, so that post-selected
    pairs stay balanced between the two polarization branches.
    """

    omega_1: FrequencyBin
    omega_2: FrequencyBin
    omega_3: FrequencyBin
    omega_4: FrequencyBin
    theta: float = math.pi / 2
    phase: float = 0.0
    shift_efficiency: float = 1.0
    absorption: float = DEFAULT_ABSORPTION
    herald_efficiency: float = 1.0
    herald_dark_count: float = 0.0
    balance_loss: bool = True

    def __post_init__(self):
        f1, f2, f3, f4 = (b.center_frequency for b in (self.omega_1, self.omega_2, self.omega_3, self.omega_4))
        if not (f3 > f1 > f2 > f4):
            raise ValidationError("biexciton bins must satisfy w3 > w1 > w2 > w4")
        tol = FREQUENCY_RTOL * f3
        if abs((f3 - f1) - (f2 - f4)) > tol:
            raise ValidationError(f"doublet splitting mismatch: w3-w1 = {f3 - f1:.9g} Hz, w2-w4 = {f2 - f4:.9g} Hz")
        if not (0.0 <= self.shift_efficiency <= 1.0):
            raise ValidationError("shift_efficiency must lie in [0, 1]")
        if not (0.0 <= self.absorption < 1.0):
            raise ValidationError("absorption must lie in [0, 1)")
        if len({b.id for b in (self.omega_1, self.omega_2, self.omega_3, self.omega_4)}) != 4:
            raise ValidationError("biexciton bins need distinct ids")

    @classmethod
    def from_splittings(
        cls,
        omega_1_hz: float = DEFAULT_OMEGA1_HZ,
        delta_hz: float = DEFAULT_DELTA_HZ,
        xi_hz: float = DEFAULT_XI_HZ,
        **kwargs,
    ) -> BiexcitonConfig:
        w1 = FrequencyBin(1, omega_1_hz, "w1")
        w2 = FrequencyBin(2, omega_1_hz - xi_hz, "w2")
        w3 = FrequencyBin(3, omega_1_hz + delta_hz, "w3")
        w4 = FrequencyBin(4, omega_1_hz - xi_hz - delta_hz, "w4")
        return cls(w1, w2, w3, w4, **kwargs)

    @property
    def doublet_splitting(self) -> float:
        return self.omega_3.center_frequency - self.omega_1.center_frequency

    @property
    def biexciton_shift(self) -> float:
        return self.omega_1.center_frequency - self.omega_2.center_frequency

    def shifted(self, offset_hz: float) -> BiexcitonConfig:
        return replace(
            self,
            omega_1=self.omega_1.shifted(offset_hz),
            omega_2=self.omega_2.shifted(offset_hz),
            omega_3=self.omega_3.shifted(offset_hz),
            omega_4=self.omega_4.shifted(offset_hz),
        )


@dataclass(frozen=True)
class ScenarioResult:
    success_probability: float
    conditioned_state: PureState | DensityMatrix | None
    fidelity_to_target: float | None
    concurrence: float | None
    which_way_distinguishability: float | None
    outcomes: tuple[dict[str, Any], ...] = ()
    extras: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        from .circuit import jsonable

        return jsonable(
            {
                "success_probability": self.success_probability,
                "fidelity_to_target": self.fidelity_to_target,
                "concurrence": self.concurrence,
                "which_way_distinguishability": self.which_way_distinguishability,
                "conditioned_state": self.conditioned_state,
                "outcomes": [dict(o) for o in self.outcomes],
                "extras": dict(self.extras),
            }
        )


# ---------------------------------------------------------------------------
# single photon / two photon with two emitters


def _emitter_setup(config: ErasureConfig):
    """Modes, components and detector groups for the two-emitter layout."""
    w1, w2 = config.omega_1, config.omega_2
    if config.splitter == "fbs":
        # AOM output direction is tied to colour: direction 1 carries w1, direction 2 carries w2
        src1, src2 = Mode("d1", w1), Mode("d2", w2)
        modes = [src1, src2]
        components = [AOMCoupler(((src1, src2),), config.theta, config.modulation_frequency)]
        groups = {"D1": [src1], "D2": [src2]}
    else:
        src1, src2 = Mode("d1", w1), Mode("d2", w2)
        modes = [src1, Mode("d1", w2), Mode("d2", w1), src2]
        components = [SpatialBeamSplitter("d1", "d2", config.theta, config.convention)]
        groups = {"D1": modes[:2], "D2": modes[2:]}
    return modes, src1, src2, components, groups


def _marker_report(state: PureState | DensityMatrix, registry: ModeRegistry, markers: list[Mode]) -> dict[str, Any]:
    rho = partial_trace(state, occupation_selector(registry, markers))
    p1, p2 = rho.element("10", "10").real, rho.element("01", "01").real
    coherence = rho.element("10", "01")
    # best target (|s1> + e^{i phi}|s2>)/sqrt2 has phi = -arg(rho_{10,01})
    phase = -cmath.phase(coherence) if abs(coherence) > 1e-15 else 0.0
    return {
        "p_s1": p1,
        "p_s2": p2,
        "distinguishability": abs(p1 - p2),
        "bell_fidelity": min(1.0, 0.5 * (p1 + p2) + abs(coherence)),
        "bell_phase": phase,
        "concurrence": concurrence(rho),
        "rho": rho,
    }


def run_erasure(config: ErasureConfig) -> ScenarioResult:
    """One photon from emitter 1 (at w1) or emitter 2 (at w2), never both.

    Emitters are tracked with marker modes s1 and s2. Every click outcome is
    reported with the conditioned emitter state, its fidelity to the closest
    (|s1> + e^{i phi}|s2>)/sqrt2, and ``D = |P(s1|click) - P(s2|click)|``.
    """
    modes, src1, src2, components, groups = _emitter_setup(config)
    s1, s2 = Mode("s1"), Mode("s2")
    registry = ModeRegistry(modes + [s1, s2])
    psi = PureState.from_terms(registry, [(1.0, {s1: 1, src1: 1}), (1.0, {s2: 1, src2: 1})])
    out = evolve(psi, components)

    detector_modes = [m for group in groups.values() for m in group]
    outcomes = condition_on_detection(out, detector_modes, config.frequency_blind)
    names = {str(m): name for name, group in groups.items() for m in group}
    names.update({f"{m.path}:{m.polarization}": name for name, group in groups.items() for m in group})

    table = []
    reports = []
    for o in outcomes:
        row: dict[str, Any] = {"outcome": _rename(o.label, names), "probability": o.probability}
        if o.clicked and o.state is not None:
            rep = _marker_report(o.state, out.registry, [s1, s2])
            reports.append((o, rep))
            row.update({k: v for k, v in rep.items() if k != "rho"})
        table.append(row)

    p_click = sum(o.probability for o, _ in reports)
    first, first_rep = reports[0]

    def weighted(key: str) -> float:
        return sum(o.probability * rep[key] for o, rep in reports) / p_click

    return ScenarioResult(
        success_probability=p_click,
        conditioned_state=first.state,
        fidelity_to_target=weighted("bell_fidelity"),
        concurrence=weighted("concurrence"),
        which_way_distinguishability=weighted("distinguishability"),
        outcomes=tuple(table),
        extras={
            "theta": config.theta,
            "splitter": config.splitter,
            "frequency_blind": config.frequency_blind,
            "closed_form_distinguishability": abs(math.cos(2 * config.theta)) if config.splitter == "fbs" else None,
        },
    )


def _rename(label, names: dict[str, str]) -> str:
    if not label:
        return "no-click"
    merged: dict[str, int] = {}
    for key, n in label:
        name = names.get(key, key)
        merged[name] = merged.get(name, 0) + n
    return " ".join(f"{k}={v}" for k, v in sorted(merged.items()))


def run_hom(config: ErasureConfig) -> ScenarioResult:
    """Both emitters fire: one photon at w1 and one at w2 meet on the splitter.

    The coincidence probability (a click in each direction) is computed from
    the simulated state and, independently, from permanents of the transfer
    matrix.
    """
    modes, src1, src2, components, groups = _emitter_setup(config)
    registry = ModeRegistry(modes)
    psi = PureState.fock(registry, {src1: 1, src2: 1})
    out = evolve(psi, components)

    g1 = [registry.index(m) for m in groups["D1"]]
    g2 = [registry.index(m) for m in groups["D2"]]

    def is_coincidence(occ) -> bool:
        return sum(occ[i] for i in g1) >= 1 and sum(occ[i] for i in g2) >= 1

    coincidence = sum(abs(a) ** 2 for occ, a in out.amplitudes.items() if is_coincidence(occ))

    u = circuit_unitary(registry, components)
    inp = tuple(psi.amplitudes)[0]
    oracle = 0.0
    for occ in _two_photon_outputs(len(registry)):
        if is_coincidence(occ):
            oracle += abs(transition_amplitude_oracle(inp, occ, u)) ** 2

    detector_modes = [m for group in groups.values() for m in group]
    outcomes = condition_on_detection(out, detector_modes, config.frequency_blind)
    names = {str(m): name for name, group in groups.items() for m in group}
    names.update({f"{m.path}:{m.polarization}": name for name, group in groups.items() for m in group})
    table = tuple({"outcome": _rename(o.label, names), "probability": o.probability} for o in outcomes)

    return ScenarioResult(
        success_probability=coincidence,
        conditioned_state=out,
        fidelity_to_target=None,
        concurrence=None,
        which_way_distinguishability=None,
        outcomes=table,
        extras={
            "theta": config.theta,
            "splitter": config.splitter,
            "coincidence_probability": coincidence,
            "oracle_coincidence_probability": oracle,
            "bunched_probability": 1.0 - coincidence,
            "closed_form_coincidence": math.cos(2 * config.theta) ** 2 if config.splitter == "fbs" else None,
        },
    )


def _two_photon_outputs(n_modes: int):
    for i in range(n_modes):
        for j in range(i, n_modes):
            occ = [0] * n_modes
            occ[i] += 1
            occ[j] += 1
            yield tuple(occ)


# ---------------------------------------------------------------------------
# biexciton cascade


def _biexciton_input(config: BiexcitonConfig, extra_modes: list[Mode]) -> tuple[PureState, dict[str, Mode]]:
    w1, w2, w3, w4 = config.omega_1, config.omega_2, config.omega_3, config.omega_4
    m = {
        "in1x": Mode("in", w1, "x"),
        "in2x": Mode("in", w2, "x"),
        "in3y": Mode("in", w3, "y"),
        "in4y": Mode("in", w4, "y"),
    }
    registry = ModeRegistry(list(m.values()) + extra_modes)
    psi = PureState.from_terms(
        registry,
        [(1.0, {m["in1x"]: 1, m["in2x"]: 1}), (cmath.exp(1j * config.phase), {m["in3y"]: 1, m["in4y"]: 1})],
    )
    return psi, m


def _output_modes(config: BiexcitonConfig) -> tuple[list[Mode], list[Mode]]:
    """Arms A (first photon: w1/w3) and B (second photon: w2/w4) on the output path."""
    w1, w2, w3, w4 = config.omega_1, config.omega_2, config.omega_3, config.omega_4
    arm_a = [Mode("out", w1, "x"), Mode("out", w1, "y"), Mode("out", w3, "y")]
    arm_b = [Mode("out", w2, "x"), Mode("out", w2, "y"), Mode("out", w4, "y")]
    return arm_a, arm_b


def rectification_target(phase: float) -> np.ndarray:
    """(|xx> + e^{i(phase + pi)}|yy>)/sqrt2 in the xx, xy, yx, yy basis."""
    return np.array([1, 0, 0, cmath.exp(1j * (phase + math.pi))]) / math.sqrt(2)


def _polarization_report(state, arms) -> tuple[float, Any, DensityMatrix | None]:
    """Post-select one photon per arm; return (probability, conditioned state, traced rho)."""
    select = polarization_selector(state.registry, arms)
    keep = classifiable(select[0])
    if isinstance(state, PureState):
        p, post = postselect(state, keep)
    else:
        p, post = postselect_density(state, keep)
    if post is None:
        return 0.0, None, None
    return p, post, partial_trace(post, select)


def biexciton_fbs_components(config: BiexcitonConfig) -> tuple[list[Mode], list]:
    """Polarization Mach-Zehnder: PBS split, FBS on the y arm, PBS recombine."""
    w1, w2, w3, w4 = config.omega_1, config.omega_2, config.omega_3, config.omega_4
    arm_a, arm_b = _output_modes(config)
    y_modes = {w: Mode("Y", w, "y") for w in (w1, w2, w3, w4)}
    x_modes = [Mode("X", w1, "x"), Mode("X", w2, "x")]
    modes = x_modes + list(y_modes.values()) + arm_a + arm_b
    comps: list = [PolarizingBeamSplitter("in", "X", "Y")]
    if config.absorption > 0:
        comps.append(LossChannel((y_modes[w3], y_modes[w4]), 1 - config.absorption, "absorb"))
        if config.balance_loss:
            comps.append(LossChannel(tuple(x_modes), 1 - config.absorption, "balance"))
    comps.append(
        AOMCoupler(((y_modes[w3], y_modes[w1]), (y_modes[w4], y_modes[w2])), config.theta, config.doublet_splitting)
    )
    comps.append(PolarizingBeamSplitter("out", "X", "Y"))
    return modes, comps


def run_biexciton_fbs(config: BiexcitonConfig) -> ScenarioResult:
    """Frequency-beam-splitter rectification of the asymmetric-dot pair state.

    The output polarization state is obtained by tracing over frequency; its
    concurrence is ``sin(theta)**2``.
    """
    modes, comps = biexciton_fbs_components(config)
    psi, _ = _biexciton_input(config, modes)
    out = evolve(psi, comps)
    arms = _output_modes(config)
    p, post, rho = _polarization_report(out, arms)
    fid = fidelity(rho, rectification_target(config.phase)) if rho is not None else None
    conc = concurrence(rho) if rho is not None else None
    return ScenarioResult(
        success_probability=p,
        conditioned_state=post,
        fidelity_to_target=fid,
        concurrence=conc,
        which_way_distinguishability=None,
        outcomes=(
            {"outcome": "success", "probability": p},
            {"outcome": "unheralded loss", "probability": max(0.0, 1.0 - p)},
        ),
        extras={
            "theta": config.theta,
            "phase": config.phase,
            "density_matrix": rho,
            "closed_form_concurrence": math.sin(config.theta) ** 2,
        },
    )


def biexciton_fbs_prime_components(config: BiexcitonConfig) -> tuple[list[Mode], list, list[HeraldDetector]]:
    """FBS': each y photon gets its own AOM pass; unshifted light goes to heralds U and V."""
    w1, w2, w3, w4 = config.omega_1, config.omega_2, config.omega_3, config.omega_4
    arm_a, arm_b = _output_modes(config)
    x_modes = [Mode("X", w1, "x"), Mode("X", w2, "x")]
    y_in = [Mode("Y", w3, "y"), Mode("Y", w4, "y")]
    u_mode, v_mode = Mode("U", w3, "y"), Mode("V", w4, "y")
    shifted_a, shifted_b = Mode("SA", w1, "y"), Mode("SB", w2, "y")
    recombined = [Mode("Yr", w1, "y"), Mode("Yr", w2, "y")]
    # output path only needs the bins the shifted and x photons occupy
    out_modes = [m for m in arm_a + arm_b if m.bin in (w1, w2)]
    modes = x_modes + y_in + [u_mode, v_mode, shifted_a, shifted_b] + recombined + out_modes

    alpha = config.shift_efficiency
    theta = math.asin(math.sqrt(alpha))
    survival = 1 - config.absorption
    comps: list = [
        PolarizingBeamSplitter("in", "X", "Y"),
        FrequencyDemux(((("Y", w3.label), "U"), (("Y", w4.label), "V"))),
    ]
    if config.absorption > 0:
        comps.append(LossChannel((u_mode, v_mode), survival, "absorb"))
    if config.balance_loss and alpha * survival < 1:
        comps.append(LossChannel(tuple(x_modes), alpha * survival, "balance"))
    comps += [
        AOMCoupler(((u_mode, shifted_a), (v_mode, shifted_b)), theta, config.doublet_splitting),
        FrequencyDemux(((("SA", w1.label), "Yr"), (("SB", w2.label), "Yr"))),
        PolarizingBeamSplitter("out", "X", "Yr"),
    ]
    heralds = [
        HeraldDetector((u_mode,), config.herald_efficiency, config.herald_dark_count, "U"),
        HeraldDetector((v_mode,), config.herald_efficiency, config.herald_dark_count, "V"),
    ]
    return modes, comps, heralds


def run_biexciton_fbs_prime(config: BiexcitonConfig) -> ScenarioResult:
    """Heralded rectification: success means no herald click and both photons delivered.

    With ideal heralds the success probability is ``alpha**2 * (1 - a)**2``.
    """
    modes, comps, heralds = biexciton_fbs_prime_components(config)
    psi, _ = _biexciton_input(config, modes)
    state: PureState | DensityMatrix = evolve(psi, comps)

    table = []
    remaining = 1.0
    for det in heralds:
        no_click, click = herald_outcomes(state, det)
        table.append({"outcome": f"click {det.name}", "probability": remaining * click.probability})
        remaining *= no_click.probability
        if no_click.state is None:
            state = None
            break
        state = no_click.state

    if state is not None:
        arms = [[m for m in arm if m in state.registry] for arm in _output_modes(config)]
        p_pair, post, rho = _polarization_report(state, arms)
    else:
        p_pair, post, rho = 0.0, None, None
    success = remaining * p_pair
    table.append({"outcome": "unheralded loss", "probability": max(0.0, remaining * (1 - p_pair))})
    table.append({"outcome": "success", "probability": success})

    alpha = config.shift_efficiency
    bound = ABSORPTION_BOUND_FACTOR * alpha**2
    return ScenarioResult(
        success_probability=success,
        conditioned_state=post,
        fidelity_to_target=fidelity(rho, rectification_target(config.phase)) if rho is not None else None,
        concurrence=concurrence(rho) if rho is not None else None,
        which_way_distinguishability=None,
        outcomes=tuple(table),
        extras={
            "shift_efficiency": alpha,
            "absorption": config.absorption,
            "density_matrix": rho,
            "closed_form_success": alpha**2 * (1 - config.absorption) ** 2,
            "lower_bound": bound,
            "meets_lower_bound": success >= bound,
        },
    )

"""Photon-counting detection and conditioning of the undetected remainder.

Detected photons are absorbed: post-click states live on the same registry with
the watched modes emptied.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .fock import Mode, ModeRegistry, Occupation, PureState
from .measures import DensityMatrix, accumulate, as_operator

Label = tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class DetectionOutcome:
    """One detection record. ``label`` lists (detector, count) for every detector that fired."""

    label: Label
    probability: float
    state: PureState | DensityMatrix | None

    @property
    def clicked(self) -> bool:
        return bool(self.label)

    def counts(self) -> dict[str, int]:
        return dict(self.label)

    def describe(self) -> str:
        if not self.label:
            return "no-click"
        return " ".join(f"{name}={n}" for name, n in self.label)


def _detector_indices(registry: ModeRegistry, modes: Iterable[Mode]) -> list[int]:
    idx = sorted({registry.index(m) for m in modes})
    if not idx:
        raise ValidationError("at least one detector mode is required")
    return idx


def split_by_pattern(
    state: PureState | DensityMatrix, idx: list[int]
) -> dict[tuple[int, ...], tuple[list[Occupation], np.ndarray]]:
    """Project onto each occupation pattern of the modes ``idx``.

    Returns unnormalized blocks keyed by pattern; block keys have the watched
    modes emptied.
    """
    keys, op = as_operator(state)
    rows: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for r, occ in enumerate(keys):
        rows[tuple(occ[i] for i in idx)].append(r)
    idx_set = set(idx)
    out = {}
    for pattern, rs in rows.items():
        rest = [tuple(0 if i in idx_set else n for i, n in enumerate(keys[r])) for r in rs]
        out[pattern] = (rest, op[np.ix_(rs, rs)])
    return out


def _registry_of(state: PureState | DensityMatrix) -> ModeRegistry:
    registry = state.registry
    if registry is None:
        raise ValidationError("detection needs a state expressed in an occupation basis")
    return registry


def condition_on_detection(
    state: PureState | DensityMatrix,
    detector_modes: Iterable[Mode],
    frequency_blind: bool = False,
) -> list[DetectionOutcome]:
    """Born-rule conditioning on a photon-counting measurement of ``detector_modes``.

    Without ``frequency_blind`` each watched mode is its own number-resolving
    detector and outcomes are coherent projections. With it, watched modes that
    share a path and polarization form one detector that cannot tell bins apart,
    so outcomes differing only in the bin are merged incoherently into a
    :class:`DensityMatrix`. The no-click outcome is always listed first.
    """
    registry = _registry_of(state)
    idx = _detector_indices(registry, detector_modes)
    if isinstance(state, PureState):
        total = state.norm() ** 2
    else:
        total = float(np.trace(state.matrix).real)
    if total <= 0:
        raise ValidationError("cannot condition an empty state")

    if frequency_blind:
        names = [f"{registry[i].path}:{registry[i].polarization}" for i in idx]
    else:
        names = [str(registry[i]) for i in idx]

    def label_of(pattern: tuple[int, ...]) -> Label:
        counts: dict[str, int] = defaultdict(int)
        for name, n in zip(names, pattern):
            counts[name] += n
        return tuple(sorted((k, v) for k, v in counts.items() if v))

    outcomes = []
    if isinstance(state, PureState) and not frequency_blind:
        idx_set = set(idx)
        branches: dict[tuple[int, ...], dict[Occupation, complex]] = defaultdict(dict)
        for occ, amp in state.amplitudes.items():
            rest = tuple(0 if i in idx_set else n for i, n in enumerate(occ))
            branches[tuple(occ[i] for i in idx)][rest] = amp
        for pattern in sorted(branches, key=lambda pat: (any(pat), label_of(pat))):
            amps = branches[pattern]
            p = sum(abs(a) ** 2 for a in amps.values()) / total
            if p > 0:
                post = PureState(registry, amps, state.max_photons, state.mixed_sectors).normalized()
                outcomes.append(DetectionOutcome(label_of(pattern), p, post))
    else:
        grouped: dict[Label, list] = defaultdict(list)
        for pattern, (rest, block) in split_by_pattern(state, idx).items():
            grouped[label_of(pattern)].append((rest, block))
        for label in sorted(grouped, key=lambda lab: (len(lab) > 0, lab)):
            blocks = grouped[label]
            p = sum(float(np.trace(b).real) for _, b in blocks) / total
            if p > 0:
                ks, m = accumulate((1.0, rest, block) for rest, block in blocks)
                outcomes.append(DetectionOutcome(label, p, DensityMatrix.from_operator(ks, m, registry)))
    if not outcomes or outcomes[0].clicked:
        outcomes.insert(0, DetectionOutcome((), 0.0, None))
    return outcomes


def outcome_probability_sum(outcomes: list[DetectionOutcome]) -> float:
    return sum(o.probability for o in outcomes)

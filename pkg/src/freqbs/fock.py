"""Few-photon Fock-space machinery over a registry of (path, frequency bin, polarization) modes.

States are sparse maps from occupation vectors to complex amplitudes. Passive
components act on the single-particle mode space through a :class:`ModeUnitary`;
:func:`apply_mode_unitary` lifts that action to multi-photon states by substituting
each creation operator ``a_k^dag -> sum_j U[j, k] a_j^dag`` and re-expanding.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

POLARIZATIONS = ("x", "y", "none")
DEFAULT_MAX_PHOTONS = 4
UNITARITY_TOL = 1e-12
NORM_TOL = 1e-9
PRUNE_TOL = 1e-14

Occupation = tuple[int, ...]


@dataclass(frozen=True)
class FrequencyBin:
    """A monochromatic frequency label. ``center_frequency`` is in Hz."""

    id: int
    center_frequency: float
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.center_frequency) and self.center_frequency > 0):
            raise ValidationError(f"bin {self.label}: center_frequency must be positive, got {self.center_frequency}")

    @property
    def label(self) -> str:
        return self.name or f"f{self.id}"

    def shifted(self, offset: float) -> FrequencyBin:
        return FrequencyBin(self.id, self.center_frequency + offset, self.name)


@dataclass(frozen=True)
class Mode:
    """A single-particle mode.

    A mode without a frequency bin is a source-marker mode: it records which
    emitter is excited and is never touched by optical components.
    """

    path: str
    bin: FrequencyBin | None = None
    polarization: str = "none"

    def __post_init__(self):
        if self.polarization not in POLARIZATIONS:
            raise ValidationError(f"mode {self.path}: polarization must be one of {POLARIZATIONS}")
        if self.bin is None and self.polarization != "none":
            raise ValidationError(f"marker mode {self.path} cannot carry a polarization")

    @property
    def is_marker(self) -> bool:
        return self.bin is None

    @property
    def key(self) -> tuple:
        return (self.path, None if self.bin is None else self.bin.id, self.polarization)

    def with_path(self, path: str) -> Mode:
        return Mode(path, self.bin, self.polarization)

    def with_bin(self, bin: FrequencyBin) -> Mode:
        return Mode(self.path, bin, self.polarization)

    def __str__(self) -> str:
        if self.bin is None:
            return self.path
        return f"{self.path}:{self.bin.label}:{self.polarization}"


class ModeRegistry:
    """Ordered, duplicate-free list of modes with stable integer indices."""

    def __init__(self, modes: Iterable[Mode]):
        self._modes = tuple(modes)
        self._index: dict[Mode, int] = {}
        keys: set[tuple] = set()
        bins: dict[int, FrequencyBin] = {}
        for i, mode in enumerate(self._modes):
            if mode.key in keys:
                raise ValidationError(f"duplicate mode {mode}")
            keys.add(mode.key)
            if mode.bin is not None:
                seen = bins.setdefault(mode.bin.id, mode.bin)
                if seen != mode.bin:
                    raise ValidationError(f"bin id {mode.bin.id} declared twice with different frequencies")
            self._index[mode] = i
        self._bins = bins

    def __len__(self) -> int:
        return len(self._modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self._modes)

    def __getitem__(self, i: int) -> Mode:
        return self._modes[i]

    def __contains__(self, mode: object) -> bool:
        return mode in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ModeRegistry) and self._modes == other._modes

    def __hash__(self) -> int:
        return hash(self._modes)

    def __repr__(self) -> str:
        return f"ModeRegistry([{', '.join(map(str, self._modes))}])"

    @property
    def modes(self) -> tuple[Mode, ...]:
        return self._modes

    @property
    def bins(self) -> tuple[FrequencyBin, ...]:
        return tuple(self._bins[k] for k in sorted(self._bins))

    def index(self, mode: Mode) -> int:
        try:
            return self._index[mode]
        except KeyError:
            raise ValidationError(f"mode {mode} is not registered") from None

    def find(self, ref: str) -> Mode:
        """Look a mode up by its string form ``path:bin:pol`` (or ``path`` for markers)."""
        for mode in self._modes:
            if str(mode) == ref:
                return mode
        raise ValidationError(f"mode {ref!r} is not registered")

    def lookup(self, path: str, bin: FrequencyBin | None, polarization: str = "none") -> Mode | None:
        mode = Mode(path, bin, polarization)
        return mode if mode in self._index else None

    def extend(self, modes: Iterable[Mode]) -> ModeRegistry:
        extra = [m for m in modes if m not in self._index]
        if not extra:
            return self
        return ModeRegistry(self._modes + tuple(dict.fromkeys(extra)))


def _check_occupation(occ: Occupation, size: int) -> None:
    if len(occ) != size:
        raise DimensionError(f"occupation {occ} has length {len(occ)}, registry has {size} modes")
    if any((not isinstance(n, (int, np.integer))) or n < 0 for n in occ):
        raise ValidationError(f"occupation {occ} must hold non-negative integers")


@dataclass(frozen=True)
class PureState:
    """Sparse superposition of occupation vectors over ``registry``.

    Amplitudes are not forced to unit norm here; use :meth:`from_terms` (which
    normalizes by default) or :meth:`normalized`. All terms must share one total
    photon number unless ``mixed_sectors`` is set.
    """

    registry: ModeRegistry
    amplitudes: Mapping[Occupation, complex]
    max_photons: int = DEFAULT_MAX_PHOTONS
    mixed_sectors: bool = False

    def __post_init__(self):
        amps = {}
        sectors = set()
        for occ, amp in self.amplitudes.items():
            occ = tuple(int(n) for n in occ)
            _check_occupation(occ, len(self.registry))
            total = sum(occ)
            if total > self.max_photons:
                raise ValidationError(f"occupation {occ} exceeds the photon limit {self.max_photons}")
            sectors.add(total)
            amps[occ] = amps.get(occ, 0j) + complex(amp)
        if len(sectors) > 1 and not self.mixed_sectors:
            raise ValidationError(f"state mixes photon-number sectors {sorted(sectors)}; set mixed_sectors to allow this")
        object.__setattr__(self, "amplitudes", MappingProxyType(amps))

    @classmethod
    def from_terms(
        cls,
        registry: ModeRegistry,
        terms: Iterable[tuple[complex, Mapping[Mode | str, int]]],
        *,
        normalize: bool = True,
        max_photons: int = DEFAULT_MAX_PHOTONS,
        mixed_sectors: bool = False,
    ) -> PureState:
        """Build a state from ``(amplitude, {mode: count})`` pairs.

        Modes may be given as :class:`Mode` objects or their string form.
        """
        amps: dict[Occupation, complex] = defaultdict(complex)
        for amp, occupation in terms:
            occ = [0] * len(registry)
            for mode, n in occupation.items():
                m = registry.find(mode) if isinstance(mode, str) else mode
                occ[registry.index(m)] += int(n)
            amps[tuple(occ)] += complex(amp)
        state = cls(registry, dict(amps), max_photons, mixed_sectors)
        if normalize:
            if state.norm() == 0:
                raise ValidationError("state has zero norm and cannot be normalized")
            state = state.normalized()
        return state

    @classmethod
    def fock(cls, registry: ModeRegistry, occupation: Mapping[Mode | str, int], **kwargs) -> PureState:
        return cls.from_terms(registry, [(1.0, occupation)], **kwargs)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalized(self) -> PureState:
        n = self.norm()
        if n == 0:
            raise ValidationError("cannot normalize a zero state")
        return self._replace({k: v / n for k, v in self.amplitudes.items()})

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= tol

    def _replace(self, amplitudes: Mapping[Occupation, complex], registry: ModeRegistry | None = None) -> PureState:
        return PureState(registry or self.registry, amplitudes, self.max_photons, self.mixed_sectors)

    @property
    def photon_numbers(self) -> set[int]:
        return {sum(k) for k in self.amplitudes}

    def amplitude(self, occupation: Mapping[Mode | str, int] | Occupation) -> complex:
        if isinstance(occupation, Mapping):
            occ = [0] * len(self.registry)
            for mode, n in occupation.items():
                m = self.registry.find(mode) if isinstance(mode, str) else mode
                occ[self.registry.index(m)] = int(n)
            occupation = tuple(occ)
        return self.amplitudes.get(tuple(occupation), 0j)

    def pruned(self, tol: float = PRUNE_TOL) -> PureState:
        return self._replace({k: v for k, v in self.amplitudes.items() if abs(v) >= tol})

    def lift(self, registry: ModeRegistry) -> PureState:
        """Re-express the state on a registry that extends this one (new modes empty)."""
        if registry == self.registry:
            return self
        if registry.modes[: len(self.registry)] != self.registry.modes:
            raise DimensionError("target registry must extend the current one")
        pad = (0,) * (len(registry) - len(self.registry))
        return self._replace({k + pad: v for k, v in self.amplitudes.items()}, registry)

    def terms(self) -> list[tuple[complex, dict[str, int]]]:
        """Amplitudes with readable occupation maps, in sorted key order."""
        out = []
        for occ in sorted(self.amplitudes):
            occ_map = {str(self.registry[i]): n for i, n in enumerate(occ) if n}
            out.append((self.amplitudes[occ], occ_map))
        return out


@dataclass(frozen=True)
class ModeUnitary:
    """Unitary on the single-particle space. ``matrix[j, k]`` is the amplitude for mode k -> mode j."""

    registry: ModeRegistry
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = len(self.registry)
        if m.shape != (n, n):
            raise DimensionError(f"unitary has shape {m.shape}, registry has {n} modes")
        err = np.max(np.abs(m @ m.conj().T - np.eye(n))) if n else 0.0
        if err > UNITARITY_TOL:
            raise ValidationError(f"matrix is not unitary (max |UU^dag - I| = {err:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, registry: ModeRegistry) -> ModeUnitary:
        return cls(registry, np.eye(len(registry), dtype=complex))

    def __matmul__(self, other: ModeUnitary) -> ModeUnitary:
        """``V @ U`` is the circuit that applies U first, then V."""
        if other.registry != self.registry:
            raise DimensionError("cannot compose unitaries on different registries")
        return ModeUnitary(self.registry, self.matrix @ other.matrix)

    def lift(self, registry: ModeRegistry) -> ModeUnitary:
        if registry == self.registry:
            return self
        if registry.modes[: len(self.registry)] != self.registry.modes:
            raise DimensionError("target registry must extend the current one")
        m = np.eye(len(registry), dtype=complex)
        k = len(self.registry)
        m[:k, :k] = self.matrix
        return ModeUnitary(registry, m)

    def block(self, modes: Sequence[Mode]) -> np.ndarray:
        idx = [self.registry.index(m) for m in modes]
        return self.matrix[np.ix_(idx, idx)]


def _occupation_from_monomial(mono: tuple[int, ...], size: int) -> Occupation:
    occ = [0] * size
    for j in mono:
        occ[j] += 1
    return tuple(occ)


def apply_mode_unitary(state: PureState, u: ModeUnitary) -> PureState:
    """Apply a passive linear-optical unitary to a multi-photon state.

    Each term ``prod_k (a_k^dag)^n_k / sqrt(n_k!)`` is expanded as a polynomial in the
    output creation operators; monomials are kept as sorted index tuples.
    """
    if len(u.registry) != len(state.registry):
        raise DimensionError(f"unitary acts on {len(u.registry)} modes, state has {len(state.registry)}")
    if u.registry != state.registry:
        raise DimensionError("unitary and state are defined on different registries")
    if state.photon_numbers and max(state.photon_numbers) > state.max_photons:
        raise ValidationError("state exceeds its photon limit")

    size = len(state.registry)
    columns = []
    for k in range(size):
        col = u.matrix[:, k]
        nz = np.flatnonzero(col)
        columns.append([(int(j), complex(col[j])) for j in nz])

    out: dict[Occupation, complex] = defaultdict(complex)
    for occ, amp in state.amplitudes.items():
        norm = math.sqrt(math.prod(math.factorial(n) for n in occ))
        poly: dict[tuple[int, ...], complex] = {(): amp / norm}
        for k, n in enumerate(occ):
            for _ in range(n):
                nxt: dict[tuple[int, ...], complex] = defaultdict(complex)
                for mono, c in poly.items():
                    for j, ujk in columns[k]:
                        nxt[tuple(sorted(mono + (j,)))] += c * ujk
                poly = nxt
        for mono, c in poly.items():
            target = _occupation_from_monomial(mono, size)
            out[target] += c * math.sqrt(math.prod(math.factorial(m) for m in target))

    return state._replace({k: v for k, v in out.items() if abs(v) >= PRUNE_TOL})


def postselect(state: PureState, keep: Callable[[Occupation], bool]) -> tuple[float, PureState | None]:
    """Project onto the terms accepted by ``keep``; return (probability, renormalized state)."""
    total = state.norm() ** 2
    if total == 0:
        raise ValidationError("cannot postselect an empty state")
    kept = {k: v for k, v in state.amplitudes.items() if keep(k)}
    p = sum(abs(v) ** 2 for v in kept.values()) / total
    if p == 0:
        return 0.0, None
    return p, state._replace(kept).normalized()

"""Density matrices, subsystem reduction and two-qubit entanglement measures."""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import ClassificationError, DimensionError, ValidationError
from .fock import Mode, ModeRegistry, Occupation, PureState

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
EIGEN_TOL = 1e-9

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
SPIN_FLIP = np.kron(SIGMA_Y, SIGMA_Y)

# label, environment key
Selector = Callable[[Occupation], tuple[Hashable, Hashable]]


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive operator over the labels in ``basis``.

    When the basis labels are occupation vectors, ``registry`` names the modes
    they refer to; for qubit subsystems it is None.
    """

    matrix: np.ndarray = field(repr=False)
    basis: tuple
    registry: ModeRegistry | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        basis = tuple(self.basis)
        d = len(basis)
        if m.shape != (d, d):
            raise DimensionError(f"density matrix shape {m.shape} does not match basis size {d}")
        if len(set(basis)) != d:
            raise ValidationError("density matrix basis labels must be unique")
        if d and np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace is {np.trace(m).real}, expected 1")
        if d and np.min(np.linalg.eigvalsh(m)) < -EIGEN_TOL:
            raise ValidationError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def from_vector(cls, vector: Sequence[complex], basis: Sequence, registry: ModeRegistry | None = None) -> DensityMatrix:
        v = np.asarray(vector, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), tuple(basis), registry)

    @classmethod
    def from_pure(cls, state: PureState) -> DensityMatrix:
        keys = sorted(state.amplitudes)
        v = np.array([state.amplitudes[k] for k in keys])
        return cls.from_vector(v, keys, state.registry)

    @classmethod
    def from_operator(cls, keys: Sequence, matrix: np.ndarray, registry: ModeRegistry | None = None) -> DensityMatrix:
        """Normalize an unnormalized positive operator; Hermitian part is taken to clear round-off."""
        m = np.asarray(matrix, dtype=complex)
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if tr <= 0:
            raise ValidationError("operator has zero trace")
        return cls(m / tr, tuple(keys), registry)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def element(self, a, b) -> complex:
        return self.matrix[self.basis.index(a), self.basis.index(b)]

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


def as_operator(state: PureState | DensityMatrix) -> tuple[list, np.ndarray]:
    """Occupation keys and (possibly unnormalized) operator for either state kind."""
    if isinstance(state, PureState):
        keys = sorted(state.amplitudes)
        v = np.array([state.amplitudes[k] for k in keys], dtype=complex)
        return keys, np.outer(v, v.conj())
    return list(state.basis), np.array(state.matrix)


def accumulate(blocks: Iterable[tuple[float, Sequence, np.ndarray]]) -> tuple[list, np.ndarray]:
    """Sum weighted operators given on (possibly different) key sets."""
    blocks = list(blocks)
    keys = sorted({k for _, ks, _ in blocks for k in ks})
    pos = {k: i for i, k in enumerate(keys)}
    total = np.zeros((len(keys), len(keys)), dtype=complex)
    for w, ks, m in blocks:
        idx = [pos[k] for k in ks]
        total[np.ix_(idx, idx)] += w * m
    return keys, total


def qubit_labels(n_qubits: int, values: Sequence[str]) -> list[str]:
    return ["".join(p) for p in itertools.product(values, repeat=n_qubits)]


def polarization_selector(registry: ModeRegistry, arms: Sequence[Iterable[Mode]]) -> tuple[Selector, list[str]]:
    """Qubit per arm given by the polarization of the single photon found in that arm.

    Everything else about the photon (path, frequency bin) plus the occupation of
    modes outside all arms is traced out.
    """
    arm_of: dict[int, int] = {}
    for a, modes in enumerate(arms):
        for mode in modes:
            i = registry.index(mode)
            if mode.polarization not in ("x", "y"):
                raise ValidationError(f"arm mode {mode} has no polarization")
            if i in arm_of:
                raise ValidationError(f"mode {mode} belongs to two arms")
            arm_of[i] = a
    n_arms = len(arms)

    def select(occ: Occupation):
        pols: list[str | None] = [None] * n_arms
        residual: list = [None] * n_arms
        counts = [0] * n_arms
        rest = []
        for i, n in enumerate(occ):
            a = arm_of.get(i)
            if a is None:
                rest.append(n)
                continue
            if n:
                counts[a] += n
                mode = registry[i]
                pols[a] = mode.polarization
                residual[a] = (mode.path, mode.bin.id)
        for a, c in enumerate(counts):
            if c != 1:
                raise ClassificationError(f"occupation {occ} has {c} photons in arm {a}; expected exactly one")
        return "".join(pols), (tuple(residual), tuple(rest))

    return select, qubit_labels(n_arms, "xy")


def occupation_selector(registry: ModeRegistry, modes: Sequence[Mode]) -> tuple[Selector, list[str]]:
    """Qubit i is the occupation (0 or 1) of ``modes[i]``; used for source-marker modes."""
    idx = [registry.index(m) for m in modes]
    idx_set = set(idx)

    def select(occ: Occupation):
        bits = []
        for i in idx:
            if occ[i] > 1:
                raise ClassificationError(f"occupation {occ} puts {occ[i]} quanta in {registry[i]}")
            bits.append(str(occ[i]))
        rest = tuple(n for i, n in enumerate(occ) if i not in idx_set)
        return "".join(bits), rest

    return select, qubit_labels(len(modes), "01")


def classifiable(selector: Selector) -> Callable[[Occupation], bool]:
    def keep(occ: Occupation) -> bool:
        try:
            selector(occ)
        except ClassificationError:
            return False
        return True

    return keep


def partial_trace(state: PureState | DensityMatrix, keep: tuple[Selector, list[str]]) -> DensityMatrix:
    """Reduce a state to the qubit subsystem defined by a selector.

    ``keep`` is a ``(selector, labels)`` pair as returned by
    :func:`polarization_selector` or :func:`occupation_selector`.
    """
    selector, labels = keep
    pos = {label: i for i, label in enumerate(labels)}
    d = len(labels)
    rho = np.zeros((d, d), dtype=complex)
    if isinstance(state, PureState):
        groups: dict[Hashable, np.ndarray] = defaultdict(lambda: np.zeros(d, dtype=complex))
        for occ, amp in state.amplitudes.items():
            label, env = selector(occ)
            groups[env][pos[label]] += amp
        for v in groups.values():
            rho += np.outer(v, v.conj())
    else:
        classified = [selector(k) for k in state.basis]
        for i, (la, ea) in enumerate(classified):
            for j, (lb, eb) in enumerate(classified):
                if ea == eb:
                    rho[pos[la], pos[lb]] += state.matrix[i, j]
    return DensityMatrix.from_operator(labels, rho)


def concurrence(rho: DensityMatrix | np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    The square roots of the eigenvalues of ``rho (sy x sy) rho* (sy x sy)`` are
    obtained as singular values of ``sqrt(rho) sqrt(rho_tilde)``, which keeps
    pure-state results exact to machine precision.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise DimensionError(f"concurrence needs a 4x4 density matrix, got {m.shape}")
    rho_tilde = SPIN_FLIP @ m.conj() @ SPIN_FLIP
    lam = np.linalg.svd(_psd_sqrt(m) @ _psd_sqrt(rho_tilde), compute_uv=False)
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    return float(min(1.0, max(0.0, lam[0] - lam[1] - lam[2] - lam[3])))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(rho: DensityMatrix, target: Sequence[complex]) -> float:
    """Overlap ``<target| rho |target>`` with a normalized pure target."""
    t = np.asarray(target, dtype=complex)
    if t.shape != (rho.dim,):
        raise DimensionError(f"target has length {t.size}, density matrix has dimension {rho.dim}")
    if abs(np.vdot(t, t).real - 1.0) > TRACE_TOL:
        raise ValidationError("fidelity target must be normalized")
    return float(min(1.0, max(0.0, np.vdot(t, rho.matrix @ t).real)))


def postselect_density(rho: DensityMatrix, keep: Callable[[Occupation], bool]) -> tuple[float, DensityMatrix | None]:
    idx = [i for i, k in enumerate(rho.basis) if keep(k)]
    if not idx:
        return 0.0, None
    block = rho.matrix[np.ix_(idx, idx)]
    p = float(np.trace(block).real)
    if p <= 0:
        return 0.0, None
    return p, DensityMatrix.from_operator([rho.basis[i] for i in idx], block, rho.registry)

"""Permanent-based transition amplitudes, kept independent of :func:`apply_mode_unitary`.

For passive linear optics the amplitude ``<out| U |in>`` equals
``per(U[rows, cols]) / sqrt(prod n_i! prod m_j!)`` where the column list repeats
input mode k ``n_k`` times and the row list repeats output mode j ``m_j`` times.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .fock import Mode, ModeRegistry, ModeUnitary, PureState, apply_mode_unitary
from .errors import DimensionError, ValidationError

ORACLE_MAX_PHOTONS = 4


def permanent(matrix: np.ndarray) -> complex:
    """Permanent by direct expansion over permutations (fine for n <= ~8)."""
    m = np.asarray(matrix, dtype=complex)
    n = m.shape[0]
    if m.shape != (n, n):
        raise DimensionError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    total = 0j
    for perm in itertools.permutations(range(n)):
        prod = 1 + 0j
        for i, j in enumerate(perm):
            prod *= m[i, j]
        total += prod
    return total


def _repeat(occupation: Sequence[int]) -> list[int]:
    return [k for k, n in enumerate(occupation) for _ in range(n)]


def transition_amplitude_oracle(inp: Sequence[int], out: Sequence[int], u: ModeUnitary | np.ndarray) -> complex:
    matrix = u.matrix if isinstance(u, ModeUnitary) else np.asarray(u, dtype=complex)
    size = matrix.shape[0]
    if len(inp) != size or len(out) != size:
        raise DimensionError("occupation length does not match unitary dimension")
    n_in, n_out = sum(inp), sum(out)
    if n_in != n_out:
        return 0j
    if n_in > ORACLE_MAX_PHOTONS:
        raise ValidationError(f"oracle supports at most {ORACLE_MAX_PHOTONS} photons")
    sub = matrix[np.ix_(_repeat(out), _repeat(inp))]
    norm = math.prod(math.factorial(n) for n in inp) * math.prod(math.factorial(m) for m in out)
    return permanent(sub) / math.sqrt(norm)


def occupations(n_modes: int, n_photons: int) -> list[tuple[int, ...]]:
    """All occupation vectors of ``n_photons`` over ``n_modes`` in lexicographic order."""
    result = []
    for combo in itertools.combinations_with_replacement(range(n_modes), n_photons):
        occ = [0] * n_modes
        for k in combo:
            occ[k] += 1
        result.append(tuple(occ))
    return sorted(result)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def compare_with_simulator(u: ModeUnitary, n_photons: int) -> float:
    """Largest |simulator - permanent| amplitude over all ``n_photons`` input/output pairs."""
    registry = u.registry
    worst = 0.0
    outs = occupations(len(registry), n_photons)
    for inp in outs:
        state = PureState(registry, {inp: 1.0 + 0j}, max_photons=max(n_photons, 1))
        evolved = apply_mode_unitary(state, u)
        for out in outs:
            diff = abs(evolved.amplitudes.get(out, 0j) - transition_amplitude_oracle(inp, out, u))
            worst = max(worst, float(diff))
    return worst


def random_trials(trials: int, max_modes: int, max_photons: int, rng: np.random.Generator) -> list[dict]:
    """Draw random unitaries and photon numbers; report the worst amplitude mismatch of each."""
    rows = []
    for t in range(trials):
        n = int(rng.integers(1, max_modes + 1))
        k = int(rng.integers(1, max_photons + 1))
        registry = ModeRegistry([Mode(f"m{i}") for i in range(n)])
        u = ModeUnitary(registry, random_unitary(n, rng))
        rows.append({"trial": t, "modes": n, "photons": k, "max_abs_error": compare_with_simulator(u, k)})
    return rows

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqbs.errors import DimensionError, ValidationError
from freqbs.fock import (
    FrequencyBin,
    Mode,
    ModeRegistry,
    ModeUnitary,
    PureState,
    apply_mode_unitary,
    postselect,
)
from freqbs.oracle import occupations, random_unitary

from conftest import line_registry


def test_mode_string_forms(bins):
    w1, _ = bins
    assert str(Mode("in", w1, "x")) == "in:w1:x"
    assert str(Mode("s1")) == "s1"
    assert Mode("s1").is_marker


def test_marker_cannot_have_polarization():
    with pytest.raises(ValidationError):
        Mode("s1", None, "x")


def test_bad_polarization(bins):
    with pytest.raises(ValidationError):
        Mode("p", bins[0], "z")


def test_bin_frequency_positive():
    with pytest.raises(ValidationError):
        FrequencyBin(1, -5.0)


def test_registry_rejects_duplicates(bins):
    m = Mode("p", bins[0])
    with pytest.raises(ValidationError):
        ModeRegistry([m, m])


def test_registry_index_and_find(bins):
    reg = ModeRegistry([Mode("a", bins[0]), Mode("b", bins[1])])
    assert reg.index(Mode("b", bins[1])) == 1
    assert reg.find("a:w1:none") == Mode("a", bins[0])
    with pytest.raises(ValidationError):
        reg.index(Mode("c", bins[0]))


def test_registry_extend_keeps_order(bins):
    reg = ModeRegistry([Mode("a", bins[0])])
    ext = reg.extend([Mode("b", bins[0]), Mode("a", bins[0])])
    assert [str(m) for m in ext] == ["a:w1:none", "b:w1:none"]
    assert reg.extend([Mode("a", bins[0])]) is reg


def test_from_terms_normalizes(bins):
    reg = ModeRegistry([Mode("a", bins[0]), Mode("b", bins[0])])
    psi = PureState.from_terms(reg, [(1, {"a:w1:none": 1}), (1j, {"b:w1:none": 1})])
    assert psi.is_normalized()
    assert psi.amplitude({"b:w1:none": 1}) == pytest.approx(1j / math.sqrt(2))


def test_zero_state_rejected(bins):
    reg = ModeRegistry([Mode("a", bins[0])])
    with pytest.raises(ValidationError):
        PureState.from_terms(reg, [(0.0, {"a:w1:none": 1})])


def test_mixed_sectors_rejected_by_default(bins):
    reg = ModeRegistry([Mode("a", bins[0]), Mode("b", bins[0])])
    with pytest.raises(ValidationError):
        PureState(reg, {(1, 0): 1.0, (1, 1): 1.0})
    PureState(reg, {(1, 0): 1.0, (1, 1): 1.0}, mixed_sectors=True)


def test_photon_limit(bins):
    reg = ModeRegistry([Mode("a", bins[0])])
    with pytest.raises(ValidationError):
        PureState(reg, {(5,): 1.0})


def test_non_unitary_rejected():
    reg = line_registry(2)
    with pytest.raises(ValidationError):
        ModeUnitary(reg, np.array([[1, 0], [0, 2]]))


def test_unitary_shape_checked():
    with pytest.raises(DimensionError):
        ModeUnitary(line_registry(2), np.eye(3))


def test_identity_evolution_is_noop():
    reg = line_registry(3)
    psi = PureState(reg, {(1, 1, 0): 0.6, (0, 1, 1): 0.8j})
    out = apply_mode_unitary(psi, ModeUnitary.identity(reg))
    assert dict(out.amplitudes) == pytest.approx(dict(psi.amplitudes))


def test_two_photons_in_one_mode_through_balanced_splitter():
    # |2,0> -> (|2,0> - |0,2>)/2 + i|1,1>/sqrt2 for the [[c, is], [is, c]] block
    reg = line_registry(2)
    c = 1 / math.sqrt(2)
    u = ModeUnitary(reg, np.array([[c, 1j * c], [1j * c, c]]))
    out = apply_mode_unitary(PureState(reg, {(2, 0): 1.0}), u)
    assert out.amplitude((2, 0)) == pytest.approx(0.5)
    assert out.amplitude((0, 2)) == pytest.approx(-0.5)
    assert out.amplitude((1, 1)) == pytest.approx(1j * c)


def test_registry_mismatch_rejected():
    psi = PureState(line_registry(2), {(1, 0): 1.0})
    with pytest.raises(DimensionError):
        apply_mode_unitary(psi, ModeUnitary.identity(line_registry(3)))


def test_lift_pads_new_modes(bins):
    reg = ModeRegistry([Mode("a", bins[0])])
    big = reg.extend([Mode("b", bins[0])])
    psi = PureState(reg, {(1,): 1.0}).lift(big)
    assert psi.amplitude((1, 0)) == 1.0


def test_postselect_probability(bins):
    reg = line_registry(2)
    psi = PureState(reg, {(1, 0): 0.6, (0, 1): 0.8})
    p, post = postselect(psi, lambda occ: occ[1] == 1)
    assert p == pytest.approx(0.64)
    assert post.amplitude((0, 1)) == pytest.approx(1.0)
    p, post = postselect(psi, lambda occ: False)
    assert p == 0.0 and post is None


def _random_state(rng, reg, n_photons, n_terms):
    occs = occupations(len(reg), n_photons)
    picks = rng.choice(len(occs), size=min(n_terms, len(occs)), replace=False)
    amps = rng.standard_normal(len(picks)) + 1j * rng.standard_normal(len(picks))
    return PureState(reg, {occs[i]: a for i, a in zip(picks, amps)}).normalized()


def test_norm_preserved_for_1000_random_unitaries(rng):
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        reg = line_registry(n)
        u = ModeUnitary(reg, random_unitary(n, rng))
        psi = _random_state(rng, reg, int(rng.integers(1, 3)), 3)
        worst = max(worst, abs(apply_mode_unitary(psi, u).norm() - 1.0))
    assert worst < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4), k=st.integers(1, 3))
def test_composition_matches_sequential_application(seed, n, k):
    rng = np.random.default_rng(seed)
    reg = line_registry(n)
    u = ModeUnitary(reg, random_unitary(n, rng))
    v = ModeUnitary(reg, random_unitary(n, rng))
    psi = _random_state(rng, reg, k, 3)
    seq = apply_mode_unitary(apply_mode_unitary(psi, u), v)
    once = apply_mode_unitary(psi, v @ u)
    keys = set(seq.amplitudes) | set(once.amplitudes)
    for key in keys:
        assert abs(seq.amplitudes.get(key, 0) - once.amplitudes.get(key, 0)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5), k=st.integers(0, 3))
def test_photon_number_conserved(seed, n, k):
    rng = np.random.default_rng(seed)
    reg = line_registry(n)
    psi = _random_state(rng, reg, k, 4)
    out = apply_mode_unitary(psi, ModeUnitary(reg, random_unitary(n, rng)))
    assert out.photon_numbers <= {k}

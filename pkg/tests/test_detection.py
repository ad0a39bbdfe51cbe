import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqbs.detection import condition_on_detection, outcome_probability_sum
from freqbs.errors import ValidationError
from freqbs.fock import FrequencyBin, Mode, ModeRegistry, ModeUnitary, PureState, apply_mode_unitary
from freqbs.measures import DensityMatrix
from freqbs.oracle import occupations, random_unitary

from conftest import line_registry


def test_no_click_listed_first_and_absorbs_photons():
    reg = line_registry(2)
    psi = PureState(reg, {(1, 0): 0.6, (0, 1): 0.8})
    outcomes = condition_on_detection(psi, [reg[0]])
    assert outcomes[0].label == ()
    assert outcomes[0].probability == pytest.approx(0.64)
    assert outcomes[1].probability == pytest.approx(0.36)
    assert outcomes[1].state.amplitude((0, 0)) == pytest.approx(1.0)
    assert outcomes[1].counts() == {str(reg[0]): 1}


def test_no_click_placeholder_when_always_clicking():
    reg = line_registry(1)
    outcomes = condition_on_detection(PureState(reg, {(1,): 1.0}), [reg[0]])
    assert outcomes[0].label == () and outcomes[0].probability == 0.0 and outcomes[0].state is None
    assert outcomes[0].describe() == "no-click"


def test_number_resolving_counts_two():
    reg = line_registry(2)
    c = 1 / math.sqrt(2)
    u = ModeUnitary(reg, np.array([[c, 1j * c], [1j * c, c]]))
    out = apply_mode_unitary(PureState(reg, {(1, 1): 1.0}), u)
    probs = {o.describe(): o.probability for o in condition_on_detection(out, list(reg))}
    assert probs[f"{reg[0]}=2"] == pytest.approx(0.5)
    assert probs[f"{reg[1]}=2"] == pytest.approx(0.5)


def test_frequency_blind_merges_bins_into_mixture():
    a, b = FrequencyBin(1, 3e14, "a"), FrequencyBin(2, 2.9e14, "b")
    d_a, d_b, s1, s2 = Mode("d", a), Mode("d", b), Mode("s1"), Mode("s2")
    reg = ModeRegistry([d_a, d_b, s1, s2])
    psi = PureState.from_terms(reg, [(1, {s1: 1, d_a: 1}), (1, {s2: 1, d_b: 1})])
    resolved = condition_on_detection(psi, [d_a, d_b])
    blind = condition_on_detection(psi, [d_a, d_b], frequency_blind=True)
    assert len(resolved) == 3 and len(blind) == 2
    assert blind[1].describe() == "d:none=1"
    assert isinstance(blind[1].state, DensityMatrix)
    assert blind[1].probability == pytest.approx(1.0)


def test_detection_requires_modes():
    reg = line_registry(1)
    with pytest.raises(ValidationError):
        condition_on_detection(PureState(reg, {(1,): 1.0}), [])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4), k=st.integers(1, 2), blind=st.booleans())
def test_detection_probabilities_sum_to_one(seed, n, k, blind):
    rng = np.random.default_rng(seed)
    reg = line_registry(n)
    occs = occupations(n, k)
    psi = PureState(reg, {o: complex(rng.standard_normal(), rng.standard_normal()) for o in occs}).normalized()
    psi = apply_mode_unitary(psi, ModeUnitary(reg, random_unitary(n, rng)))
    watched = [reg[i] for i in sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))]
    outcomes = condition_on_detection(psi, watched, frequency_blind=blind)
    assert outcome_probability_sum(outcomes) == pytest.approx(1.0, abs=1e-9)

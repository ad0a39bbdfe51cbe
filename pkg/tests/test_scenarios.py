import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqbs.errors import ValidationError
from freqbs.fock import FrequencyBin
from freqbs.scenarios import (
    BiexcitonConfig,
    ErasureConfig,
    rectification_target,
    run_biexciton_fbs,
    run_biexciton_fbs_prime,
    run_erasure,
    run_hom,
)


def test_erasure_config_validation():
    w = FrequencyBin(1, 3e14, "w")
    with pytest.raises(ValidationError):
        ErasureConfig(w, w)
    with pytest.raises(ValidationError):
        ErasureConfig.default(splitter="mirror")


@pytest.mark.parametrize("theta", [0.0, math.pi / 8, math.pi / 4, 0.3, 1.2])
def test_erasure_distinguishability_closed_form(theta):
    res = run_erasure(ErasureConfig.default(theta))
    assert res.which_way_distinguishability == pytest.approx(abs(math.cos(2 * theta)), abs=1e-10)
    assert res.concurrence == pytest.approx(abs(math.sin(2 * theta)), abs=1e-9)


def test_erasure_outcomes_sum_to_one():
    res = run_erasure(ErasureConfig.default(0.4))
    assert sum(o["probability"] for o in res.outcomes) == pytest.approx(1.0, abs=1e-12)


def test_spatial_splitter_keeps_which_way_with_blind_detectors():
    res = run_erasure(ErasureConfig.default(splitter="spatial", frequency_blind=True))
    # colour still tags the source, so the emitter state is an even mixture
    assert res.concurrence == pytest.approx(0.0, abs=1e-12)
    assert res.fidelity_to_target == pytest.approx(0.5, abs=1e-12)


def test_spatial_hom_has_no_dip_for_distinct_colours():
    res = run_hom(ErasureConfig.default(splitter="spatial"))
    assert res.success_probability == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("theta", np.linspace(0, math.pi / 2, 7))
def test_hom_coincidence_matches_oracle(theta):
    res = run_hom(ErasureConfig.default(theta))
    assert res.success_probability == pytest.approx(math.cos(2 * theta) ** 2, abs=1e-10)
    assert res.extras["oracle_coincidence_probability"] == pytest.approx(res.success_probability, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(theta=st.floats(0, math.pi / 2), offset=st.floats(-1e13, 1e13))
def test_global_frequency_shift_invariance(theta, offset):
    base = ErasureConfig.default(theta)
    a, b = run_hom(base), run_hom(base.shifted(offset))
    assert a.success_probability == pytest.approx(b.success_probability, abs=1e-12)
    cfg = BiexcitonConfig.from_splittings(theta=theta)
    assert run_biexciton_fbs(cfg).concurrence == pytest.approx(run_biexciton_fbs(cfg.shifted(offset)).concurrence, abs=1e-12)


def test_biexciton_config_validation():
    with pytest.raises(ValidationError):
        BiexcitonConfig.from_splittings(delta_hz=-1e9)
    w = [FrequencyBin(i + 1, f) for i, f in enumerate((3.0e14, 2.9e14, 3.0e14 + 1e9, 2.9e14 - 2e9))]
    with pytest.raises(ValidationError, match="doublet"):
        BiexcitonConfig(*w)
    with pytest.raises(ValidationError):
        BiexcitonConfig.from_splittings(shift_efficiency=1.5)


@pytest.mark.parametrize("theta", [0.0, 0.4, math.pi / 4, 1.0, math.pi / 2])
def test_biexciton_concurrence_is_sin_squared(theta):
    res = run_biexciton_fbs(BiexcitonConfig.from_splittings(theta=theta))
    assert res.concurrence == pytest.approx(math.sin(theta) ** 2, abs=1e-9)


def test_biexciton_success_is_survival_squared():
    a = 0.01
    res = run_biexciton_fbs(BiexcitonConfig.from_splittings(absorption=a))
    assert res.success_probability == pytest.approx((1 - a) ** 2, abs=1e-12)
    assert res.concurrence == pytest.approx(1.0, abs=1e-9)


def test_rectification_target_normalized():
    for nu in (0.0, 1.0, math.pi):
        assert np.linalg.norm(rectification_target(nu)) == pytest.approx(1.0)


@pytest.mark.parametrize("alpha,a", [(1.0, 0.0), (0.8, 0.0), (0.5, 0.01), (0.8, 0.0005)])
def test_fbs_prime_success_closed_form(alpha, a):
    res = run_biexciton_fbs_prime(BiexcitonConfig.from_splittings(shift_efficiency=alpha, absorption=a))
    assert res.success_probability == pytest.approx(alpha**2 * (1 - a) ** 2, abs=1e-12)
    assert res.concurrence == pytest.approx(1.0, abs=1e-9)
    assert sum(o["probability"] for o in res.outcomes) == pytest.approx(1.0, abs=1e-12)


def test_fbs_prime_without_balancing_has_only_herald_losses():
    res = run_biexciton_fbs_prime(BiexcitonConfig.from_splittings(shift_efficiency=0.7, absorption=0.0, balance_loss=False))
    table = {o["outcome"]: o["probability"] for o in res.outcomes}
    assert table["unheralded loss"] == pytest.approx(0.0, abs=1e-12)
    assert table["click U"] + table["click V"] + table["success"] == pytest.approx(1.0, abs=1e-12)


def test_fbs_prime_success_monotone_in_alpha():
    alphas = np.linspace(0.1, 1.0, 6)
    p = [run_biexciton_fbs_prime(BiexcitonConfig.from_splittings(shift_efficiency=x)).success_probability for x in alphas]
    assert all(b > a for a, b in zip(p, p[1:]))


def test_fbs_prime_nonideal_heralds():
    # a missed herald photon is still absorbed, so it never reaches the output;
    # only dark counts cost success, and the delivered pairs stay maximally entangled
    ideal = run_biexciton_fbs_prime(BiexcitonConfig.from_splittings(shift_efficiency=0.8))
    d = 0.01
    noisy = run_biexciton_fbs_prime(
        BiexcitonConfig.from_splittings(shift_efficiency=0.8, herald_efficiency=0.5, herald_dark_count=d)
    )
    assert noisy.success_probability == pytest.approx(ideal.success_probability * (1 - d) ** 2, abs=1e-12)
    assert noisy.fidelity_to_target == pytest.approx(1.0, abs=1e-9)
    assert sum(o["probability"] for o in noisy.outcomes) == pytest.approx(1.0, abs=1e-9)


def test_result_to_dict_is_json_ready():
    import json

    data = run_biexciton_fbs_prime(BiexcitonConfig.from_splittings(shift_efficiency=0.8)).to_dict()
    json.dumps(data)
    assert data["conditioned_state"]["kind"] in ("pure", "density")

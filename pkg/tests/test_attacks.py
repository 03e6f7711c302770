import numpy as np
import pytest

from resilient_gp.attacks import (AttackKind, AttackSpec, RoundContext, apply_attack,
                                  apply_attack_batch, choose_byzantine_ids)
from resilient_gp.errors import ConfigError
from resilient_gp.local_gpr import Prediction, Provenance

BENIGN = {i: Prediction(1.0 + i, 0.1 * (i + 1)) for i in range(1, 6)}
CTX = RoundContext(3, BENIGN)


def spec(kind, **params):
    return AttackSpec(kind, {0}, params, seed=7)


def test_same_value():
    out = apply_attack(spec("same-value", c=100.0), 0, Prediction(0.3, 0.2), CTX)
    assert out.mean == 100.0 and out.variance == 0.2
    assert out.provenance is Provenance.LOCAL_CORRUPTED


def test_same_value_with_variance():
    s = AttackSpec("same-value", {0}, {"c": 100.0, "c_var": 1e-6}, attack_variance=True)
    out = apply_attack(s, 0, Prediction(0.3, 0.2), CTX)
    assert (out.mean, out.variance) == (100.0, 1e-6)


def test_none_and_benign_untouched():
    honest = Prediction(0.3, 0.2)
    assert apply_attack(spec("none"), 0, honest, CTX) is honest
    assert apply_attack(spec("same-value"), 4, honest, CTX) is honest


def test_alte_with_zero_multiplier_is_benign_average():
    out = apply_attack(spec("alte", z_a=0.0), 0, Prediction(0.3, 0.2), CTX)
    # benign means are 2, 3, 4, 5, 6
    assert out.mean == pytest.approx(4.0, rel=1e-15)


def test_alte_shifts_by_std():
    out = apply_attack(spec("alte", z_a=1.5), 0, Prediction(0.3, 0.2), CTX)
    assert out.mean == pytest.approx(4.0 - 1.5 * np.sqrt(2.0), rel=1e-14)


def test_mimic_copies_target():
    s = AttackSpec("mimic", {0}, {"target": 3})
    out = apply_attack(s, 0, Prediction(0.3, 0.2), CTX)
    assert (out.mean, out.variance) == (BENIGN[3].mean, BENIGN[3].variance)


def test_mimic_target_must_be_benign():
    with pytest.raises(ConfigError):
        AttackSpec("mimic", {0, 3}, {"target": 3})
    with pytest.raises(ConfigError):
        AttackSpec("mimic", {0})


def test_bit_flip():
    out = apply_attack(spec("bit-flip", scale=2.0), 0, Prediction(0.3, 0.2), CTX)
    assert out.mean == -0.6


def test_gaussian_is_reproducible_and_order_free():
    s = spec("gaussian", v=4.0)
    a = apply_attack(s, 0, Prediction(0.3, 0.2), CTX)
    b = apply_attack(s, 0, Prediction(0.3, 0.2), CTX)
    assert a == b
    # one column of a wide batch equals the single-point call
    means = np.full((1, 5), 0.3)
    bm, _ = apply_attack_batch(s, means, np.full((1, 5), 0.2), [0], 3,
                               np.zeros((2, 5)), np.ones((2, 5)))
    single = apply_attack(s, 0, Prediction(0.3, 0.2), RoundContext(3, BENIGN, 2, 5))
    assert single.mean == bm[0, 2]
    c = apply_attack(s, 0, Prediction(0.3, 0.2), RoundContext(4, BENIGN))
    assert c.mean != a.mean


def test_gaussian_noise_scale():
    s = AttackSpec("gaussian", {0}, {"v": 9.0}, seed=1)
    draws = [apply_attack(s, 0, Prediction(0.0, 1.0), RoundContext(r, BENIGN)).mean
             for r in range(4000)]
    assert np.var(draws) == pytest.approx(9.0, rel=0.1)


def test_unknown_parameter_rejected():
    with pytest.raises(ConfigError):
        AttackSpec("same-value", {0}, {"v": 1.0})


def test_byzantine_count_enforced():
    with pytest.raises(ConfigError):
        spec("same-value").validate(40, 0.05)
    AttackSpec("same-value", {0, 1}).validate(40, 0.05)


def test_choose_ids_deterministic():
    a = choose_byzantine_ids(40, 0.15, 3)
    assert a == choose_byzantine_ids(40, 0.15, 3) and len(a) == 6
    assert all(0 <= i < 40 for i in a)
    with pytest.raises(ConfigError):
        choose_byzantine_ids(40, 0.01, 0)


def test_honest_input_required():
    with pytest.raises(ValueError):
        apply_attack(spec("same-value"), 0, Prediction(0.0, 1.0, Provenance.CLOUD), CTX)


def test_kinds_enumerated():
    assert {k.value for k in AttackKind} == {"none", "same-value", "gaussian", "alte",
                                             "mimic", "bit-flip"}

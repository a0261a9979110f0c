import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierprox.exceptions import InputError, ScheduleError
from hierprox.schedules import (classify_regime, constant_beta, from_dict, make_multilevel_weights,
                                multilevel_weight_table, power, rate, ratio_counterexample, table,
                                table2_case)


def test_schedule_at_examples():
    a, b = power(1, 2).at(2)
    assert a == pytest.approx(1 / 3) and b == pytest.approx(1 / 9)
    assert rate(0.5).at(2) == (1.0, 1.0)
    assert rate(0.5).at(8) == (0.5, 0.5)
    a, b = ratio_counterexample().at(2)
    assert a == pytest.approx(1 / 9) and b == pytest.approx(1 / 12)
    assert b / a == pytest.approx(0.75)


def test_index_zero_rejected():
    with pytest.raises(InputError):
        power(1, 1).at(0)


def test_offset_zero_gives_reciprocal_k():
    a, b = power(1.0, 2.0, offset=0.0).at(4)
    assert (a, b) == (0.25, 1 / 16)


def test_rate_burn_in_and_decrease():
    s = rate(0.6)
    assert s.J == 5
    a, b = s.arrays(1000)
    np.testing.assert_array_equal(a, b)
    assert np.all(a[: s.J] == 1.0)
    assert np.all(np.diff(a[s.J - 1:]) < 0)


def test_arrays_match_at():
    for s in (power(0.7, 0.3, oscillate=True), rate(0.3), ratio_counterexample(), constant_beta(0.4, 0.8)):
        a, b = s.arrays(50)
        for k in (1, 2, 17, 50):
            assert s.at(k) == (a[k - 1], b[k - 1])


@pytest.mark.parametrize("s", [power(0.3, 2.5), power(1.0, 0.5, True), rate(0.9), ratio_counterexample(),
                               constant_beta(0.5), power(1.0, 0.5, offset=0.0)])
def test_steps_in_unit_interval(s):
    a, b = s.arrays(100_000)
    assert np.all((a > 0) & (a <= 1) & (b > 0) & (b <= 1))


def test_table_kind():
    s = table([0.5, 0.25], [0.1, 0.2])
    assert s.at(2) == (0.25, 0.2)
    with pytest.raises(InputError):
        s.at(3)
    with pytest.raises(InputError):
        table([0.5], [1.5])


def test_from_dict_round_trip_and_errors():
    for s in (power(0.5, 0.8, True, 2.0), rate(0.25), ratio_counterexample(), constant_beta(0.3, 0.9),
              table([0.5], [0.5])):
        t = from_dict(s.to_dict())
        np.testing.assert_array_equal(np.array(s.arrays(1)), np.array(t.arrays(1)))
    with pytest.raises(InputError, match="schedule.gamma"):
        from_dict({"kind": "power", "lam": 1})
    with pytest.raises(InputError, match="unknown kind"):
        from_dict({"kind": "cosine"})


# --- regime classification -----------------------------------------------

CASES = {"a": (0.3, 0.5), "c": (0.3, 0.3), "f": (0.5, 0.5), "d": (0.6, 0.35), "e": (0.7, 0.3), "b": (0.8, 0.6)}


@pytest.mark.parametrize("case", sorted(CASES))
def test_case_representatives(case):
    assert classify_regime(power(*CASES[case])).table2_case == case


def test_classify_examples():
    r = classify_regime(power(0.3, 0.5))
    assert (r.delta, r.table2_case) == ("zero", "a")
    r = classify_regime(power(0.6, 0.35))
    assert (r.delta, r.table2_case) == ("infinite", "d")
    r = classify_regime(power(0.5, 0.5))
    assert (r.delta, r.delta_value, r.table2_case) == ("finite", 1.0, "f")
    assert not r.estimated


def test_power_flags_follow_exponents():
    r = classify_regime(power(0.4, 0.5))
    f = r.assumption_flags
    assert f["assumption3"] and f["assumption4"] and f["assumption5"] and f["A2_zero"]
    f = classify_regime(power(1.5, 0.5)).assumption_flags
    assert not f["assumption3"] and not f["assumption4"] and not f["A2_finite"]
    f = classify_regime(power(1.0, 0.5)).assumption_flags
    assert f["A2_finite"] and not f["A2_zero"]


def test_oscillating_power():
    r = classify_regime(power(0.5, 0.5, oscillate=True))
    assert r.delta_value == 0.75 and not r.delta_tilde_exists
    assert not r.assumption_flags["assumption4"]


@given(st.floats(0.05, 1.5), st.floats(0.05, 1.5))
@settings(max_examples=300, deadline=None)
def test_case_label_consistent_with_predicates(lam, gamma):
    c = table2_case(lam, gamma)
    if c == "a":
        assert lam < gamma
    elif c in ("d", "e"):
        assert 0 < gamma < lam <= 1 and lam + gamma <= 1
    elif c == "f":
        assert lam == gamma < 1
    elif c == "b":
        assert (lam <= gamma < 1) or (gamma < lam < 1)
    assert (c == "a") == (lam < gamma)


def test_ratio_counterexample_estimate():
    r = classify_regime(ratio_counterexample(), horizon=100_000)
    assert r.estimated
    assert 0.7499 <= r.delta_value <= 0.7501
    assert not r.delta_tilde_exists
    a, b = ratio_counterexample().arrays(100_000)
    ratio = (b / a)[999:]
    assert ratio.max() == pytest.approx(0.75, abs=1e-12)
    assert ratio.min() == pytest.approx(0.5, abs=1e-3)


def test_rate_classification():
    r = classify_regime(rate(0.5))
    assert r.delta == "finite" and r.delta_value == 1.0 and r.delta_tilde_exists


def test_table_estimate_flags_estimate():
    k = np.arange(1, 2001)
    r = classify_regime(table(1 / k**0.5, 1 / k**0.8))
    assert r.estimated and r.delta == "zero"


def test_horizon_floor():
    with pytest.raises(InputError):
        classify_regime(table([0.5] * 10, [0.5] * 10))


# --- multilevel weights ----------------------------------------------------


def test_weight_examples():
    s = table([0.2], [0.2])
    np.testing.assert_allclose(make_multilevel_weights(1, 3, s), [0.2, 0.6, 0.1, 0.1])
    w = make_multilevel_weights(1, 1, table([0.3], [0.9]))
    np.testing.assert_allclose(w, [0.3, 0.7])
    with pytest.raises(ScheduleError, match="later"):
        make_multilevel_weights(1, 2, table([0.7], [0.5]))


def test_nested_family_reduces_to_trilevel_split():
    a, b = 0.3, 0.4
    w = make_multilevel_weights(1, 2, table([a], [b]), family="nested")
    assert w[0] == a and w[2] == (1 - a) * b and w[1] == (1 - a) * (1 - b)


@given(st.integers(1, 6), st.floats(0.5, 2.0), st.floats(0.5, 2.0), st.sampled_from(["uniform", "nested"]))
@settings(max_examples=100, deadline=None)
def test_weights_nonnegative_and_sum_to_one(N, lam, gamma, family):
    s = power(lam, gamma, offset=1.0)
    try:
        W = multilevel_weight_table(s, 500, N, family)
    except ScheduleError:
        assert family == "uniform"
        return
    assert np.all(W >= 0)
    assert np.max(np.abs(W.sum(axis=1) - 1.0)) <= 1e-14


def test_uniform_family_rejects_rate_burn_in():
    with pytest.raises(ScheduleError, match="k = 1"):
        multilevel_weight_table(rate(0.5), 10, 3, "uniform")
    assert math.isclose(multilevel_weight_table(rate(0.5), 10, 3, "nested")[0, 0], 1.0)

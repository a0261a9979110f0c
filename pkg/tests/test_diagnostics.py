import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierprox.diagnostics import (FejerRateParams, bound_constants, boundedness_check, check_rate_bound,
                                  default_delta0, distance_series, fejer_check, halfspace_condition_check,
                                  rate_fit, regularity_check, step_bound_check, vanishing_check)
from hierprox.exceptions import FitError, InputError
from hierprox.operators import ProxableSpec, SmoothSpec, custom_scalar, proxgrad
from hierprox.problems import AffineSet, BoxSet, gallery
from hierprox.schedules import power, rate
from hierprox.solver import SolverConfig, TrilevelProblem, solve


def scalar_problem():
    # S(x) = x/2 (r = 1/2), T(x) = x + 1, W = identity
    return TrilevelProblem(custom_scalar("scale", factor=0.5), custom_scalar("shift", offset=1.0),
                           custom_scalar("identity"))


def rate_trace(name, iters=10_000, trace_every=1):
    e = gallery(name)
    p = e.problem
    cfg = SolverConfig(rate(p.r), iters, e.run_defaults["x0"], trace_every=trace_every, record_iterates=True,
                       weight_family=e.run_defaults.get("weight_family", "uniform"))
    return e, solve(p, cfg)


# --- constants ----------------------------------------------------------------


def test_bound_constants_examples():
    p = scalar_problem()
    c = bound_constants(p, [-2.0], [-1.0], delta0=1.0)
    assert (c.C_S, c.C_T, c.r) == (1.0, 1.0, 0.5)
    assert c.C_x == pytest.approx(4.0)
    assert c.J == 4


def test_bound_constants_common_fixed_point():
    e = gallery("fejer_common")
    c = bound_constants(e.problem, e.oracle_solution, e.oracle_solution, delta0=1.5)
    assert c.C_x == 0.0 and c.C_S == 0.0 and c.C_T == 0.0


def test_bound_constants_errors():
    e = gallery("nested3")
    with pytest.raises(InputError, match="fixed point"):
        bound_constants(e.problem, [0.0, 0.0, 0.0], np.zeros(3))
    with pytest.raises(InputError):
        bound_constants(e.problem, e.oracle_solution, np.zeros(3), delta0=0.0)


def test_default_delta0():
    assert default_delta0(rate(0.5)) == 1.5
    assert default_delta0(power(0.3, 0.5)) == 1.5
    assert default_delta0(None) == 1.5


@given(st.floats(0, 100), st.floats(0, 100))
@settings(max_examples=100, deadline=None)
def test_bound_constants_monotone_in_start(a, b):
    p = gallery("nested3").problem
    x_ref = np.array([1.0, 2.0, 2.0])
    lo, hi = sorted((a, b))
    c_lo = bound_constants(p, x_ref, x_ref + lo, delta0=1.5).C_x
    c_hi = bound_constants(p, x_ref, x_ref + hi, delta0=1.5).C_x
    assert c_hi >= c_lo


# --- rate_fit ---------------------------------------------------------------


def test_rate_fit_examples():
    k = np.arange(10, 10_001)
    assert rate_fit(k, 10 / k).slope == pytest.approx(-1.0, abs=1e-9)
    assert rate_fit(k, np.full(k.shape, 7.0)).slope == pytest.approx(0.0, abs=1e-9)
    k = np.arange(10, 1001)
    assert rate_fit(k, 3 / k**2).slope == pytest.approx(-2.0, abs=1e-9)


@given(st.floats(-3, 3), st.floats(0.01, 100))
@settings(max_examples=100, deadline=None)
def test_rate_fit_recovers_exponent(e, c):
    k = np.arange(1, 5001, dtype=float)
    assert rate_fit(k, c * k**e, (10, 5000)).slope == pytest.approx(e, abs=1e-9)


def test_rate_fit_excludes_nonpositive():
    k = np.arange(1, 101, dtype=float)
    v = 1 / k
    v[::2] = 0.0
    f = rate_fit(k, v)
    assert f.excluded == 50 and f.used == 50 and f.slope == pytest.approx(-1.0)
    with pytest.raises(FitError):
        rate_fit(k, np.zeros_like(k))


# --- rate bound, step bound, boundedness --------------------------------------


@pytest.fixture(scope="module")
def nested3_rate():
    return rate_trace("nested3")


def nested3_constants(e, tr):
    return bound_constants(e.problem, e.oracle_solution, tr.x0, schedule=rate(e.problem.r))


def test_check_rate_bound_passes_on_nested3(nested3_rate):
    e, tr = nested3_rate
    p = e.problem
    c = nested3_constants(e, tr)
    x = e.oracle_solution
    rep = check_rate_bound(tr, c, p.bottom.step, p.bottom.objective(x), t=p.middle.step,
                           phi1_star=p.middle.objective(x), x_star=x, p=p)
    assert rep.passed and rep.phi2.ok.all()
    assert rep.phi1.conditional and rep.phi1.k[0] == 2
    d = rep.to_dict()
    assert d["phi2"]["passed"] is True


def test_check_rate_bound_fails_on_tampered_trace(nested3_rate):
    e, tr = nested3_rate
    p = e.problem
    c = nested3_constants(e, tr)
    phi2_star = p.bottom.objective(e.oracle_solution)
    bound = check_rate_bound(tr, c, p.bottom.step, phi2_star).phi2.bound
    bad = dataclasses.replace(tr, phi2_z=phi2_star + 2 * bound)
    rep = check_rate_bound(bad, c, p.bottom.step, phi2_star)
    assert not rep.passed and not rep.phi2.ok.any()


def test_check_rate_bound_requires_phi2(nested3_rate):
    e, tr = nested3_rate
    bad = dataclasses.replace(tr, phi2_z=np.full(tr.k.shape, np.nan))
    with pytest.raises(InputError):
        check_rate_bound(bad, nested3_constants(e, tr), 0.5, 0.0)


def test_step_and_boundedness_on_nested3(nested3_rate):
    e, tr = nested3_rate
    c = nested3_constants(e, tr)
    assert step_bound_check(tr, c).passed
    assert boundedness_check(tr, e.oracle_solution, c).passed
    assert vanishing_check(tr.step_norm)["passed"]


def test_boundedness_at_other_fixed_points():
    e = gallery("nested3")
    tr = solve(e.problem, SolverConfig(power(0.5, 0.5), 5000, np.array([3.0, -1.0, 0.0]), record_iterates=True))
    for x_ref in ([1.0, 0.0, 0.0], [1.0, 5.0, -3.0], [1.0, 2.0, 2.0]):
        c = bound_constants(e.problem, x_ref, tr.x0, schedule=power(0.5, 0.5))
        assert boundedness_check(tr, x_ref, c).passed


# --- Fejer ------------------------------------------------------------------------


def test_fejer_constant_trace():
    X = np.tile([1.0, 2.0], (20, 1))
    rep = fejer_check(X, AffineSet.point([1.0, 2.0]))
    assert rep.passed and np.all(rep.distances == 0)


def test_fejer_common_fixed_point_problem():
    e = gallery("fejer_common")
    d = e.run_defaults
    tr = solve(e.problem, SolverConfig(d["schedule"], 2000, d["x0"], record_iterates=True))
    rep = fejer_check(tr, e.oracle_sets[-1])
    assert rep.passed and rep.first_violation_k is None


def test_fejer_unbounded_fails():
    e = gallery("unbounded")
    tr = solve(e.problem, SolverConfig(e.run_defaults["schedule"], 200, e.run_defaults["x0"],
                                       record_iterates=True))
    rep = fejer_check(tr, AffineSet.point([0.0]))
    assert not rep.passed and rep.first_violation_k == 2


def test_fejer_rate_envelope():
    # d_{k+1} = d_k - d_k^2 / 2 satisfies the decrease condition with beta = 1, gamma = 2, lam = 1/2
    d = [1.0]
    for _ in range(200):
        d.append(d[-1] - d[-1] ** 2 / 2)
    X = np.array(d)[:, None]
    params = FejerRateParams(beta=1.0, gamma=2.0, q=1, lam=0.5)
    rep = fejer_check(X, BoxSet([-1.0], [0.0]), params=params)
    assert rep.decrease_ok and rep.envelope_ok and rep.passed
    assert rep.M == pytest.approx(max(2 * (2 / 0.5), 2 * 2 * 1.0))


def test_fejer_params_validation():
    with pytest.raises(InputError):
        FejerRateParams(beta=2.0, gamma=1.0, q=1, lam=1.0)
    with pytest.raises(InputError):
        FejerRateParams(beta=1.0, gamma=2.0, q=0, lam=1.0)


def test_fejer_projector_dimension_mismatch():
    with pytest.raises(InputError):
        fejer_check(np.zeros((5, 2)), lambda x: np.zeros(3))


# --- distance series ----------------------------------------------------------------


def test_distance_series_inside_set():
    X = np.column_stack([np.ones(10), np.linspace(0, 5, 10)])
    ds = distance_series(X, AffineSet.from_span([1.0, 0.0], [0.0, 1.0]))
    assert np.all(ds.h == 0) and ds.fact_ok


def test_distance_series_nested3(nested3_rate):
    e, tr = nested3_rate
    ds = distance_series(tr, e.oracle_sets[0])
    assert ds.fact_ok
    assert ds.nonincreasing_after(0.1)
    assert ds.last_decade_median() < 1e-3


@given(st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_distance_inequality_on_random_walks(seed):
    rng = np.random.default_rng(seed)
    X = np.cumsum(rng.normal(size=(50, 3)), axis=0)
    S = AffineSet.from_span(rng.normal(size=3), rng.normal(size=(3, int(rng.integers(0, 3)))))
    assert distance_series(X, S).fact_ok


# --- half-space and regularity --------------------------------------------------------


def test_halfspace_constant_trace_is_boundary():
    e = gallery("fejer_common")
    x = e.oracle_solution
    rep = halfspace_condition_check(np.tile(x, (10, 1)), x, e.problem)
    assert rep.boundary_S and rep.boundary_T and not rep.satisfied and rep.fraction_both == 0.0


def test_halfspace_nested3_flags_vacuous_T(nested3_rate):
    e, tr = nested3_rate
    rep = halfspace_condition_check(tr, e.oracle_solution, e.problem)
    assert rep.boundary_T and not rep.boundary_S
    assert not rep.satisfied
    assert 0.0 <= rep.fraction_S <= 1.0 and rep.burn_in == int(np.ceil(0.1 * (len(tr) + 1)))


def test_regularity_projection_gives_one():
    W = proxgrad(SmoothSpec.zero(3), ProxableSpec.affine_eq([[1.0, 1.0, 0.0]], [1.0]), t=1.0)
    fix = AffineSet.from_span([1.0, 0.0, 0.0], [[-1, 0], [1, 0], [0, 1]])
    rep = regularity_check(W, fix, 10.0, 2000, seed=3)
    assert rep.theta == pytest.approx(1.0, abs=1e-9)


def test_regularity_clamp_gives_one():
    rep = regularity_check(gallery("clamp").problem, BoxSet([0.0], [2.0]), 10.0, 2000)
    assert rep.theta == pytest.approx(1.0, abs=1e-9) and rep.excluded >= 0


def test_regularity_nested3_finite():
    e = gallery("nested3")
    rep = regularity_check(e.problem, e.oracle_sets[0], 10.0, 10_000, seed=0)
    # W moves x1 halfway to 1, so the ratio is exactly 2
    assert rep.theta == pytest.approx(2.0, abs=1e-9)


def test_regularity_all_fixed_errors():
    with pytest.raises(FitError):
        regularity_check(custom_scalar("identity"), BoxSet([-np.inf], [np.inf]), 1.0, 10)

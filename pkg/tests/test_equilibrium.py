import numpy as np
import pytest

from dynpersuasion import (
    ModelSpec,
    NotApplicable,
    NotSingleCrossing,
    Polynomial,
    best_reply_policy,
    compute_equilibrium,
    full_info_check,
    long_run_beliefs,
    solve_closed_form,
    solve_fd,
    sweep,
    welfare_prior_monotonicity,
)
from dynpersuasion.equilibrium import check_single_crossing, is_full_info, Policy

ETA = 2 / 9  # kink condition xi = 4/3 at the 2/3 breakpoint
QUARTIC_P_MINUS = 0.12203552699077277
HALVINGS = [4.0 / 2**k for k in range(9)]  # 4 .. 1/64


def test_policies(payoffs):
    u = payoffs["two_action"]
    assert best_reply_policy(solve_closed_form(u, 1 / 16), u).intervals == [(0.0, 1.0)]
    pol = best_reply_policy(solve_closed_form(u, 4.0), u)
    assert pol.intervals == [(0.0, pytest.approx(2 / 3))]
    assert pol(0.5) == 1.0 and pol(0.8) == 0.0
    np.testing.assert_array_equal(pol.fund_mask(np.array([0.1, 2 / 3, 0.9])), [True, False, False])
    assert Policy.never().intervals == []


def test_policy_for_identity_value(payoffs):
    u = payoffs["concave"]
    gv = solve_fd(u, 1.0, 1001)
    assert best_reply_policy(gv, u).intervals == []


def test_long_run_examples(payoffs):
    u = payoffs["three_action"]
    pair, gamma = long_run_beliefs(solve_closed_form(u, 4.0), u, 5 / 8)
    assert pair.as_tuple() == pytest.approx((0.5, 0.75), abs=1e-12)
    assert gamma == pytest.approx(0.5)
    pair, gamma = long_run_beliefs(solve_closed_form(u, 4.0), u, 0.9)
    assert pair.as_tuple() == (0.9, 0.9)
    assert gamma == 1.0
    u = payoffs["two_action"]
    pair, _ = long_run_beliefs(solve_closed_form(u, 1 / 16), u, 0.5)
    assert pair.as_tuple() == (0.0, 1.0)


def test_report_fields(fixtures):
    rep = compute_equilibrium(fixtures["three_action"], 4.0)
    assert rep.method == "closed"
    assert rep.long_run.as_tuple() == pytest.approx((0.5, 0.75))
    assert rep.persuasion.as_tuple() == pytest.approx((0.0, 0.75))
    assert rep.sandwich_ok()
    d = rep.to_dict()
    for key in ("funding_region", "long_run", "persuasion", "gamma", "sup_gap", "knife_edge"):
        assert key in d
    assert compute_equilibrium(fixtures["quartic"], 1.0).method == "fd"


@pytest.mark.parametrize("name", ["two_action", "three_action", "common_payoff"])
@pytest.mark.parametrize("rs", [4.0, 1.0, 1 / 4, 1 / 16])
def test_solvers_agree_on_beliefs(fixtures, name, rs):
    a = compute_equilibrium(fixtures[name], rs, method="closed")
    b = compute_equilibrium(fixtures[name], rs, method="fd", n_points=4001)
    h = 1 / 4000
    assert np.abs(np.subtract(a.long_run.as_tuple(), b.long_run.as_tuple())).max() <= 2 * h
    for rep in (a, b):
        assert rep.sandwich_ok()
        lo, hi = rep.long_run.as_tuple()
        if hi > lo:
            assert abs(rep.gamma * lo + (1 - rep.gamma) * hi - rep.p0) <= 1e-9


def test_two_action_sweep(fixtures):
    t = sweep(fixtures["two_action"], [4.0, 1.0, 1 / 4, 1 / 16])
    np.testing.assert_allclose(t.column("p_minus"), 0.0)
    np.testing.assert_allclose(t.column("p_plus"), [2 / 3, 2 / 3, 2 / 3, 1.0])
    assert t.monotone_beliefs() and t.monotone_values() and t.gap_strictly_decreasing()


def test_switch_lies_at_eta(fixtures):
    m = fixtures["two_action"]
    above = compute_equilibrium(m, ETA * 1.001, method="closed")
    below = compute_equilibrium(m, ETA * 0.999, method="closed")
    assert above.long_run.upper == pytest.approx(2 / 3)
    assert below.long_run.upper == 1.0


def test_quartic_sweep_strict(fixtures):
    t = sweep(fixtures["quartic"], [1.0, 1 / 4, 1 / 16, 1 / 64], method="fd")
    lo, hi = t.column("p_minus"), t.column("p_plus")
    assert np.all(QUARTIC_P_MINUS + 1e-4 < lo) and np.all(hi + 1e-4 < 1 - QUARTIC_P_MINUS)
    assert np.all(np.diff(lo) <= 1e-12) and np.all(np.diff(hi) >= -1e-12)
    assert t.gap_strictly_decreasing()


def test_sweep_input_checks(fixtures):
    with pytest.raises(ValueError):
        sweep(fixtures["two_action"], [1.0])
    with pytest.raises(ValueError):
        sweep(fixtures["two_action"], [1.0, 2.0])


def test_contact_prior_rows(fixtures):
    t = sweep(fixtures["three_action"], [4.0, 1.0, 1 / 16], p0=0.9)
    np.testing.assert_allclose(t.column("p_minus"), 0.9)
    np.testing.assert_allclose(t.column("p_plus"), 0.9)


def test_full_info(fixtures):
    m = fixtures["common_payoff"]
    rep = full_info_check(m, [1.0, 0.5, 0.25, 0.2, 0.125, 1 / 16])
    assert rep.applicable
    assert rep.eta_estimate == pytest.approx(ETA, rel=1e-6)
    assert rep.monotone()
    for rs, full in rep.checked_grid:
        assert full == (rs < ETA)
    assert is_full_info(m, 1 / 16)
    assert not is_full_info(m, 1.0)


def test_full_info_not_applicable(fixtures):
    with pytest.raises(NotApplicable) as exc:
        full_info_check(fixtures["concave"], [1.0, 0.5])
    assert exc.value.condition == "convexity"
    with pytest.raises(NotApplicable) as exc:
        full_info_check(fixtures["three_action"], [1.0, 0.5])
    assert exc.value.condition == "payoff mismatch"


def test_full_info_non_degeneracy():
    f = {"a": Polynomial([0, 1]), "b": Polynomial([0, 1])}  # identical actions never cross
    m = ModelSpec(["a", "b"], f, f, 1.0, 1.0, 0.5, 0.3)
    with pytest.raises(NotApplicable) as exc:
        full_info_check(m, [1.0, 0.5])
    assert exc.value.condition == "non-degeneracy"


def test_welfare_monotone_in_agent_prior(fixtures):
    m = fixtures["common_payoff"]
    vals = welfare_prior_monotonicity(m, [0.1, 0.2, 0.3, 0.4], r_sigma2=1.0)
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    common = compute_equilibrium(m.with_params(p_a0=0.5), 1.0).value_at_prior
    last = welfare_prior_monotonicity(m, [0.4, 0.5], r_sigma2=1.0)[-1]
    assert last == pytest.approx(common, abs=1e-12)
    assert vals[-1] <= common + 1e-9


def test_single_crossing(fixtures):
    check_single_crossing(fixtures["common_payoff"])
    f = {"a": Polynomial([0.0]), "b": Polynomial([2 / 9, -1.0, 1.0])}  # crosses twice
    m = ModelSpec(["a", "b"], f, f, 1.0, 1.0, 0.5, 0.3)
    with pytest.raises(NotSingleCrossing):
        check_single_crossing(m)

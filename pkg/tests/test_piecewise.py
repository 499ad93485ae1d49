import numpy as np
import pytest

from dynpersuasion import PiecewiseFn, Polynomial
from dynpersuasion.piecewise import containing_interval


def two_step():
    return PiecewiseFn([0.0, 2 / 3, 1.0], [Polynomial([0.0]), Polynomial([-0.5, 1.5])], [0.0, 0.5, 1.0])


def test_usc_point_value_and_limits():
    f = two_step()
    assert f(2 / 3) == 0.5
    assert f.eval_limits(2 / 3) == pytest.approx((0.0, 0.5))
    assert f.eval_limits(0.3) == (0.0, 0.0)
    np.testing.assert_allclose(f(np.array([0.0, 2 / 3, 0.9])), [0.0, 0.5, 0.85])


def test_deriv_limits():
    assert two_step().deriv_limits(2 / 3) == pytest.approx((0.0, 1.5))


def test_rejects_non_usc():
    with pytest.raises(ValueError, match="upper semi-continuous"):
        PiecewiseFn([0.0, 0.5, 1.0], [Polynomial([0.0]), Polynomial([1.0])], [0.0, 0.0, 1.0])


def test_rejects_bad_breakpoints():
    with pytest.raises(ValueError):
        PiecewiseFn([0.0, 0.7, 0.5, 1.0], [Polynomial([0.0])] * 3, [0.0] * 4)
    with pytest.raises(ValueError):
        PiecewiseFn([0.1, 1.0], [Polynomial([0.0])], [0.0, 0.0])


def test_zero_set_and_positive_intervals():
    cav = PiecewiseFn.from_polynomial(Polynomial([0.0, 1.0]))
    gap = cav - two_step()
    assert gap.zero_set() == [(0.0, 0.0), (1.0, 1.0)]
    assert gap.positive_intervals() == [(0.0, 1.0)]
    flat = PiecewiseFn.from_polynomial(Polynomial([0.0]))
    assert flat.zero_set() == [(0.0, 1.0)]
    assert flat.positive_intervals() == []


def test_containing_interval():
    iv = [(0.0, 0.5), (0.6, 1.0)]
    assert containing_interval(iv, 0.25) == (0.0, 0.5)
    assert containing_interval(iv, 0.5) is None
    assert containing_interval(iv, 0.55) is None

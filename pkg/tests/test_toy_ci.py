from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cilab.toy_ci import (
    AlignmentError, DomainError, PiecewiseConstantFn, averaged_defect_recursion_check,
    dyadic_schedule, increment_norms, toy_run, toy_step,
)


def _square(y):
    # 1-periodic square wave, +1 on (0, 1/2], -1 on (1/2, 1]
    f = y - (y.numerator // y.denominator)
    return 1 if 0 < f <= Fraction(1, 2) else -1


def _pointwise(x, u0, lambdas):
    # oracle: iterate the scalar recursion at a single point
    u = Fraction(u0)
    for lam in lambdas:
        u = u + (1 - u * u) / 2 * _square(lam * x)
    return u


def test_first_states_by_hand():
    traj = toy_run(PiecewiseConstantFn.constant(0), steps=2)
    assert traj.states[1].values == (Fraction(1, 2), Fraction(-1, 2))
    assert traj.states[2].values == tuple(Fraction(v, 8) for v in (7, 1, -1, -7))
    assert traj.defects[:3] == [1, Fraction(3, 4), Fraction(39, 64)]


def test_increment_norms_by_hand():
    rows = increment_norms(toy_run(PiecewiseConstantFn.constant(0), steps=2))
    assert rows[0][1] == Fraction(1, 2) and rows[1][1] == Fraction(3, 8)
    # u1 - u0 jumps once by 1; u2 - u1 is ±3/8 alternating on quarters
    assert rows[0][2] == 1 and rows[1][2] == Fraction(9, 4)


def test_lemma_twelve_steps():
    traj = toy_run(PiecewiseConstantFn.constant(0), steps=12)
    assert all(d <= Fraction(7, 8) ** k for k, d in enumerate(traj.defects))


def test_matches_pointwise_oracle():
    lams = dyadic_schedule(7)
    traj = toy_run(PiecewiseConstantFn.constant(0), schedule=lams)
    u = traj.states[-1]
    for j in range(0, 2 ** 8, 3):
        x = Fraction(2 * j + 1, 2 ** 9)
        assert u(x) == _pointwise(x, 0, lams)


@settings(max_examples=30, deadline=None)
@given(st.fractions(min_value=Fraction(-9, 10), max_value=Fraction(9, 10), max_denominator=50),
       st.integers(0, 3), st.integers(1, 4))
def test_recursion_and_oracle(u0, offset, steps):
    lams = dyadic_schedule(steps, offset)
    traj = toy_run(PiecewiseConstantFn.constant(u0), schedule=lams)
    assert averaged_defect_recursion_check(traj)
    assert traj.states[-1].sup_abs() < 1
    x = Fraction(1, 3)
    assert traj.states[-1](x) == _pointwise(x, u0, lams)
    # defect as the exact mean of the oracle over the finest cells
    n = 2 * lams[-1]
    mids = [Fraction(2 * j + 1, 2 * n) for j in range(n)]
    assert traj.defects[-1] == sum(1 - _pointwise(x, u0, lams) ** 2 for x in mids) / n


def test_alignment_error():
    u = toy_step(PiecewiseConstantFn.constant(0), 4)
    with pytest.raises(AlignmentError):
        toy_step(u, 3)
    with pytest.raises(AlignmentError):
        toy_step(u, 0)


def test_domain_error():
    with pytest.raises(DomainError):
        toy_step(PiecewiseConstantFn.constant(1), 1)


def test_constructor_validation():
    with pytest.raises(ValueError):
        PiecewiseConstantFn((0, 2, 1), 2, (0, 0), 1)
    with pytest.raises(ValueError):
        PiecewiseConstantFn((0, 1), 1, (0, 0), 1)


def test_increment_needs_two_states():
    with pytest.raises(ValueError):
        increment_norms(toy_run(PiecewiseConstantFn.constant(0), steps=0))

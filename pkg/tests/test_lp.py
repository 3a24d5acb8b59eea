from fractions import Fraction as F

from coalgame import lp


def test_simple_feasible_max():
    # max x+y s.t. x+y <= 4, x <= 3 -> 4
    status, x, val = lp.solve_lp_max(
        [F(1), F(1)], [[F(1), F(1)], [F(1), F(0)]], [F(4), F(3)]
    )
    assert status == lp.OPTIMAL
    assert val == F(4)


def test_equality_constraint():
    # max x s.t. x + y = 5, x <= 2 -> x=2, y=3
    status, x, val = lp.solve_lp_max(
        [F(1), F(0)], [[F(1), F(0)]], [F(2)], [[F(1), F(1)]], [F(5)]
    )
    assert status == lp.OPTIMAL
    assert val == F(2)
    assert x[0] == F(2) and x[1] == F(3)


def test_infeasible():
    # x >= 3 (i.e. -x <= -3) and x <= 1
    status, _, _ = lp.solve_lp_max(
        [F(1)], [[F(-1)], [F(1)]], [F(-3), F(1)]
    )
    assert status == lp.INFEASIBLE


def test_unbounded():
    status, _, _ = lp.solve_lp_max([F(1)], [[F(-1)]], [F(0)])
    assert status == lp.UNBOUNDED


def test_exact_fractions():
    # max y s.t. 3y <= 1 -> exactly 1/3, no float fuzz
    status, x, val = lp.solve_lp_max([F(1)], [[F(3)]], [F(1)])
    assert status == lp.OPTIMAL
    assert val == F(1, 3)

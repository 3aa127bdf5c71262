from fractions import Fraction

import pytest

from torcanard.ddarith import DD, two_prod, two_sum


def exact(d: DD) -> Fraction:
    return Fraction(d.hi) + Fraction(d.lo)


def test_two_sum_is_exact():
    for a, b in [(1.0, 1e-20), (0.1, 0.2), (1e16, -1.0 + 1e-9), (3.0, -3.0)]:
        s, e = two_sum(a, b)
        assert Fraction(s) + Fraction(e) == Fraction(a) + Fraction(b)


def test_two_prod_is_exact():
    for a, b in [(0.1, 0.3), (1.0 / 3.0, 3.0), (123456.789, 1e-7)]:
        p, e = two_prod(a, b)
        assert Fraction(p) + Fraction(e) == Fraction(a) * Fraction(b)


def test_dd_keeps_small_parts():
    x = DD(1.0) + 1e-20
    assert x.hi == 1.0 and x.lo == 1e-20
    assert float((x - 1.0) * 1e20) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("op", ["add", "mul", "div"])
def test_dd_ops_close_to_exact(op):
    a = DD(0.1) + 1e-18
    b = DD(0.7) - 3e-19
    ea, eb = exact(a), exact(b)
    if op == "add":
        r, e = a + b, ea + eb
    elif op == "mul":
        r, e = a * b, ea * eb
    else:
        r, e = a / b, ea / eb
    assert abs(exact(r) - e) <= abs(e) * Fraction(1, 10**30)


def test_dd_sqrt():
    r = DD(2.0).sqrt()
    assert abs(exact(r) ** 2 - 2) <= Fraction(1, 10**30)

import math

import numpy as np
import pytest

from magzoll import fields
from magzoll.errors import ConfigError


def test_parse_and_eval():
    f = fields.FieldExpr.parse("1 + 0.5*cos(2*pi*x)")
    assert f.scalar(0.0, 0.0) == pytest.approx(1.5)
    assert f.scalar(0.25, 3.0) == pytest.approx(1.0)
    xs = np.linspace(0, 1, 7)
    vals = f(xs, np.zeros_like(xs))
    assert vals.shape == xs.shape


def test_aliases_theta_phi():
    f = fields.FieldExpr.parse("sin(theta)*cos(phi)")
    g = fields.FieldExpr.parse("sin(x)*cos(y)")
    assert f.scalar(0.7, 0.3) == pytest.approx(g.scalar(0.7, 0.3))


def test_constant_field():
    f = fields.FieldExpr.parse(2.5)
    assert f.is_constant
    assert f.constant_value() == 2.5
    assert not f.depends_on(0)


def test_exact_derivatives():
    f = fields.FieldExpr.parse("exp(-(x-0.5)**2/0.09)*sin(2*pi*y)")
    fx = f.diff(0)
    h = 1e-6
    for (u, v) in [(0.3, 0.1), (0.6, 0.9)]:
        fd = (f.scalar(u + h, v) - f.scalar(u - h, v)) / (2 * h)
        assert fx.scalar(u, v) == pytest.approx(fd, rel=1e-8)


@pytest.mark.parametrize("text", [
    "1 + 0.5*cos(2*pi*x)*sin(2*pi*y)",
    "exp(-(theta-pi/2)**2/0.09)",
    "2.0",
    "x**3 - y/4 + pi",
])
def test_program_matches_lambdified(text):
    f = fields.FieldExpr.parse(text)
    ops, args = f.program
    rng = np.random.default_rng(0)
    for _ in range(20):
        u, v = rng.uniform(-2, 2, 2)
        assert fields.eval_program(ops, args, u, v) == pytest.approx(
            f.scalar(u, v), rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("bad", [
    "__import__('os')",
    "tan(x)",
    "x + z",
    "lambda: 1",
    "f(x)",
    "'a'",
])
def test_rejects_bad_expressions(bad):
    with pytest.raises(ConfigError):
        fields.FieldExpr.parse(bad)

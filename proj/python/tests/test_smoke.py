"""Smoke tests for the python surface of the solver."""

import math

import numpy as np
import pytest

import xpde


def quadratic_expression(d=2):
    tmpl = xpde.TreeTemplate.depth(3, d)
    params = np.zeros(tmpl.param_count)
    params[0] = 1.0  # root alpha
    params[2 : 2 + d] = 0.5  # first leaf alphas
    return xpde.Expression(tmpl, ["id", "add", "square", "const0"], params)


def test_template_and_params():
    tmpl = xpde.TreeTemplate.depth(3, 4)
    assert tmpl.size == 4
    assert tmpl.param_count == 2 * (4 + 1) + 2
    params = xpde.random_params(tmpl, seed=1)
    assert len(params) == tmpl.param_count
    assert all(-1.0 <= p <= 1.0 for p in params)


def test_evaluate_matches_closed_form():
    expr = quadratic_expression()
    pts = np.array([[1.0, 1.0], [0.5, -2.0], [0.0, 0.0]])
    vals = expr(pts)
    want = 0.5 * (pts**2).sum(axis=1)
    assert np.allclose(vals, want, atol=1e-14)


def test_laplacian_of_quadratic_is_dimension():
    d = 10
    expr = quadratic_expression(d)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(50, d))
    lap = expr.laplacian(pts)
    assert np.allclose(lap, d, atol=1e-11)


def test_to_string_parse_round_trip():
    expr = quadratic_expression()
    text = expr.to_string()
    assert text == "1.0*((0.5*x1^2+0.5*x2^2+0.0)+(0.0))+0.0"
    evaluator = xpde.parse(text, 2)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, size=(20, 2))
    assert np.allclose(evaluator(pts), expr(pts), atol=1e-13)
    assert xpde.count_operators("sin((x1)*(x2))+1.0", 2) == 3


def test_functional_vanishes_on_true_solution():
    expr = quadratic_expression(4)
    value = xpde.functional_value("poisson", 4, expr, seed=3)
    assert value < 1e-18


def test_score_expression_strings():
    out = xpde.score_expression("poisson", 2, "0.5*x1^2+0.5*x2^2", seed=5)
    assert out["functional"] < 1e-18
    assert out["score"] == pytest.approx(1.0)
    assert out["relative_l2_error"] < 1e-15

    worse = xpde.score_expression("poisson", 2, "x1+x2", seed=5)
    assert worse["functional"] > out["functional"]
    assert worse["score"] < 1.0


def test_tiny_search_is_deterministic():
    options = {
        "T": 3,
        "N": 4,
        "K": 3,
        "T1": 3,
        "T2": 3,
        "T3": 10,
        "seed": 11,
        "batch_interior": 128,
        "batch_boundary": 64,
        "metric_batch": 1000,
    }
    a = xpde.search("poisson", 1, options)
    b = xpde.search("poisson", 1, options)
    assert a["found"] and b["found"]
    assert a["expression"] == b["expression"]
    assert len(a["iteration_scores"]) == 3
    assert all(0.0 <= s <= 1.0 for it in a["iteration_scores"] for s in it)


def test_errors_are_typed():
    with pytest.raises(xpde.ConfigurationError):
        xpde.TreeTemplate("q", 2)
    with pytest.raises(xpde.ConfigurationError):
        xpde.score_expression("heat", 2, "x1")

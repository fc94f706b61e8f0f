import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynbc_wave.assembly import ShapeError, assemble, weighted_lp_norm
from dynbc_wave.mesh import InvalidParameterError, generate_interval
from dynbc_wave.nonlin import (
    KINK_EPS,
    CoefficientField,
    PowerSum,
    ProblemSpec,
    damping_force,
    evaluate,
    evaluate_deriv,
    nemitskii_force,
    parse_terms,
    primitive,
)
from dynbc_wave.regime import BlowupCertificate, check_blowup_hypotheses

damping_terms = st.lists(st.tuples(st.floats(0, 5), st.floats(1.1, 6)), min_size=1, max_size=3)


def test_cubic_values():
    P = PowerSum.damping((1.0, 3.0))
    assert evaluate(P, 2.0) == 4.0
    assert evaluate(P, -2.0) == -4.0
    assert evaluate(P, 0.0) == 0.0
    h = 1e-6
    fd = (evaluate(P, 2 + h) - evaluate(P, 2 - h)) / (2 * h)
    assert evaluate_deriv(P, 2.0) == 4.0
    assert abs(fd - 4.0) < 1e-6


def test_derivative_at_zero():
    assert evaluate_deriv(PowerSum.damping((2.0, 2.0), (1.0, 4.0)), 0.0) == 2.0
    assert evaluate_deriv(PowerSum.damping((1.0, 3.0)), 0.0) == 0.0
    capped = evaluate_deriv(PowerSum.damping((1.0, 1.5)), 0.0)
    assert capped == pytest.approx(0.5 * KINK_EPS ** (-0.5))
    assert np.isfinite(capped)


def test_primitive_values():
    f = PowerSum.source((1.0, 4.0))
    assert primitive(f, 2.0) == 4.0
    assert primitive(f, 0.0) == 0.0
    s = np.linspace(-5, 5, 101)
    # Pure power p: f(s) s = p * primitive(s).
    np.testing.assert_allclose(evaluate(f, s) * s, 4.0 * primitive(f, s), rtol=1e-14, atol=1e-14)


def test_invariants_enforced():
    with pytest.raises(InvalidParameterError):
        PowerSum.damping((-1.0, 3.0))
    with pytest.raises(InvalidParameterError):
        PowerSum.damping((1.0, 1.0))
    with pytest.raises(InvalidParameterError):
        PowerSum((), 1.0, "damping")
    with pytest.raises(InvalidParameterError):
        PowerSum.source((1.0, 1.5))
    with pytest.raises(InvalidParameterError):
        PowerSum((), 0.0, "bogus")
    with pytest.raises(InvalidParameterError):
        CoefficientField(-1.0)
    with pytest.raises(InvalidParameterError):
        ProblemSpec(P=PowerSum.source((1.0, 3.0)))


def test_metadata():
    spec = ProblemSpec(P=PowerSum.damping((1.0, 3.0), (0.0, 7.0)), f=PowerSum.source((1.0, 4.0), (-1.0, 4.0)))
    assert spec.m == 3.0  # zero-coefficient term ignored
    assert spec.mu == 2.0
    assert spec.p == 2.0  # terms cancel
    assert spec.f.is_zero and spec.sources_off


def test_parse_terms():
    assert parse_terms([[1, 3], [0.5, 2]]) == ((1.0, 3.0), (0.5, 2.0))
    with pytest.raises(InvalidParameterError):
        parse_terms([[1, 2, 3]])


@given(damping_terms, st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2))
@settings(max_examples=200, deadline=None)
def test_damping_monotone(terms, pair):
    P = PowerSum.damping(*terms)
    s, t = sorted(pair)
    assert evaluate(P, t) - evaluate(P, s) >= 0


def test_damping_monotone_bulk():
    rng = np.random.default_rng(1)
    P = PowerSum.damping((1.0, 3.0), (0.3, 1.5), (2.0, 2.0))
    a, b = np.sort(rng.uniform(-50, 50, size=(2, 10_000)), axis=0)
    assert np.all(evaluate(P, b) - evaluate(P, a) >= 0)


@given(damping_terms, st.floats(-1e6, 1e6))
@settings(max_examples=200, deadline=None)
def test_growth_envelope(terms, s):
    P = PowerSum.damping(*terms)
    m = P.max_exponent or 2.0
    c = sum(abs(c) for c, _ in terms)
    assert abs(evaluate(P, s)) <= c * (1 + abs(s) ** (m - 1)) * (1 + 1e-12)


@given(
    st.lists(st.tuples(st.floats(-3, 3), st.floats(2, 5)), min_size=1, max_size=3),
    st.floats(-3, 3),
    st.floats(-2, 2),
)
@settings(max_examples=100, deadline=None)
def test_primitive_consistency(terms, c0, s):
    f = PowerSum.source(*terms, constant=c0)
    for h in (1e-3, 5e-4):
        err = abs(primitive(f, s + h) - primitive(f, s) - h * evaluate(f, s))
        bound = 0.5 * h * h * max(abs(evaluate_deriv(f, x)) for x in (s, s + h)) + 1e-12
        # Second-order remainder, with slack for the derivative's variation on [s, s+h].
        assert err <= 2 * bound + 1e-10


def test_blowup_certificate_inequalities():
    rng = np.random.default_rng(7)
    u = np.linspace(-100, 100, 10_000)
    for _ in range(30):
        k = rng.integers(1, 4)
        terms = [(float(rng.uniform(0.1, 3)), float(rng.uniform(2.1, 6))) for _ in range(k)]
        lin = PowerSum.damping((1.0, 2.0))
        spec = ProblemSpec(P=lin, Q=lin, f=PowerSum.source(*terms), g=PowerSum.source((1.0, 4.0)))
        cert = check_blowup_hypotheses(spec)
        assert isinstance(cert, BlowupCertificate)
        for src, bar in ((spec.f, cert.p_bar), (spec.g, cert.q_bar)):
            F = primitive(src, u)
            lhs = evaluate(src, u) * u
            assert np.all(lhs >= bar * F * (1 - 1e-12))
            assert np.all(F >= 0)


def test_nemitskii_actions(rng):
    ops = assemble(generate_interval(1.0, 10))
    P = PowerSum.damping((1.0, 3.0))
    spec = ProblemSpec(P=P, Q=PowerSum.damping())
    assert np.all(nemitskii_force(ops, P, 1.0, np.zeros(ops.n)) == 0)
    v = rng.normal(size=ops.n)
    w = rng.normal(size=ops.n)
    assert (damping_force(ops, spec, v) - damping_force(ops, spec, w)) @ (v - w) >= 0
    # Coercivity with unit constant: <P(v), v> = weighted L^3 norm cubed.
    lhs = nemitskii_force(ops, P, 1.0, v) @ v
    assert lhs == pytest.approx(weighted_lp_norm(ops, v, 3) ** 3, rel=1e-13)
    with pytest.raises(ShapeError):
        nemitskii_force(ops, P, 1.0, np.zeros(3))


def test_coefficient_field_on_nodes():
    mesh = generate_interval(1.0, 4)
    f = CoefficientField.on_nodes(mesh, lambda x: 1.0 + x[0])
    assert f.ess_inf == 1.0
    fb = CoefficientField.on_nodes(mesh, lambda x: 1.0 + x[0], region="boundary")
    assert fb.ess_inf == 2.0
    np.testing.assert_allclose(f.at(np.array([1, 2])), [1.25, 1.5])

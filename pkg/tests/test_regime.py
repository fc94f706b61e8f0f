import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynbc_wave.assembly import assemble
from dynbc_wave.mesh import InvalidParameterError, generate_interval
from dynbc_wave.nonlin import CoefficientField, PowerSum, ProblemSpec
from dynbc_wave.regime import (
    INF,
    BlowupCertificate,
    GlobalCertificate,
    Rejection,
    check_blowup_hypotheses,
    check_global_hypotheses,
    check_regularity,
    check_subcritical,
    classify,
    critical_exponents,
    energy_sign,
    exponents_l_lambda,
)

LIN = PowerSum.damping((1.0, 2.0))


def test_critical_exponents():
    assert critical_exponents(2) == (INF, INF)
    assert critical_exponents(3) == (6.0, INF)
    assert critical_exponents(4) == (4.0, 6.0)
    with pytest.raises(InvalidParameterError):
        critical_exponents(1)


def test_critical_exponents_decrease():
    vals = [critical_exponents(N) for N in range(2, 12)]
    ro = [v[0] for v in vals if math.isfinite(v[0])]
    rg = [v[1] for v in vals if math.isfinite(v[1])]
    assert all(a > b for a, b in zip(ro, ro[1:]))
    assert all(a > b for a, b in zip(rg, rg[1:]))


def test_l_lambda():
    assert exponents_l_lambda(2, 2, 3) == (2.0, INF)
    l, lam = exponents_l_lambda(8, 2, 3)
    assert lam == pytest.approx(8 / 7)
    assert l == pytest.approx(min(2.0, 8 / 7))
    assert exponents_l_lambda(5, 3, 2)[1] == INF
    with pytest.raises(InvalidParameterError):
        exponents_l_lambda(1.0, 2, 3)


def test_subcritical():
    assert check_subcritical(100, 100, 2)
    assert check_subcritical(4, 10, 3)
    assert not check_subcritical(4.01, 2, 3)
    assert not check_subcritical(3.5, 2, 4)
    with pytest.raises(InvalidParameterError):
        check_subcritical(1.5, 2, 3)


@given(st.floats(2, 8), st.floats(2, 8), st.integers(2, 8), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=200, deadline=None)
def test_subcritical_region_monotone(p, q, N, a, b):
    p2, q2 = 2 + a * (p - 2), 2 + b * (q - 2)
    if check_subcritical(p, q, N):
        assert check_subcritical(p2, q2, N)


def test_regularity():
    assert check_regularity(2, 2, 3) == (True, True)
    assert check_regularity(5, 2, 4) == (False, False)
    assert check_regularity(50, 50, 2) == (True, True)


def test_blowup_examples():
    ok = check_blowup_hypotheses(ProblemSpec(P=LIN, Q=LIN, g=PowerSum.source((1.0, 4.0))))
    assert ok == BlowupCertificate(None, 4.0)
    none = check_blowup_hypotheses(ProblemSpec(P=LIN, Q=LIN))
    assert isinstance(none, Rejection) and "vanish" in none.reason
    c2 = check_blowup_hypotheses(ProblemSpec(P=LIN, Q=LIN, g=PowerSum.source((1.0, 4.0), constant=1.0)))
    assert isinstance(c2, Rejection) and "constant" in c2.reason
    cub = check_blowup_hypotheses(ProblemSpec(P=PowerSum.damping((1.0, 3.0)), Q=LIN, g=PowerSum.source((1.0, 4.0))))
    assert isinstance(cub, Rejection) and "linear" in cub.reason
    mixed = check_blowup_hypotheses(
        ProblemSpec(P=LIN, Q=LIN, f=PowerSum.source((1.0, 4.0), (-1.0, 3.0), (1.0, 5.0)))
    )
    assert isinstance(mixed, Rejection) and "mixed-sign" in mixed.reason
    quad = check_blowup_hypotheses(ProblemSpec(P=LIN, Q=LIN, f=PowerSum.source((1.0, 2.0))))
    assert isinstance(quad, Rejection)
    assert not quad  # rejections are falsy


def test_global_examples():
    c = check_global_hypotheses(ProblemSpec(P=PowerSum.damping((1.0, 5.0)), f=PowerSum.source((1.0, 4.0))))
    assert isinstance(c, GlobalCertificate) and c.p1 == 4.0 and c.q1 == 2.0
    assert c.C_p1 == pytest.approx(0.25)
    r = check_global_hypotheses(ProblemSpec(P=LIN, f=PowerSum.source((1.0, 4.0))))
    assert isinstance(r, Rejection)
    sink = check_global_hypotheses(ProblemSpec(f=PowerSum.source((-1.0, 6.0), (0.0, 2.0))))
    assert isinstance(sink, GlobalCertificate) and sink.p1 == 2.0
    # Leading coefficient nonpositive: the next positive term is tested instead.
    nxt = check_global_hypotheses(
        ProblemSpec(P=PowerSum.damping((1.0, 3.0)), f=PowerSum.source((-1.0, 6.0), (2.0, 3.0)))
    )
    assert isinstance(nxt, GlobalCertificate) and nxt.p1 == 3.0
    zero_weight = check_global_hypotheses(
        ProblemSpec(P=PowerSum.damping((1.0, 5.0)), f=PowerSum.source((1.0, 4.0)), alpha=CoefficientField(0.0))
    )
    assert isinstance(zero_weight, Rejection) and "infimum" in zero_weight.reason


def test_report_text_and_machine():
    spec = ProblemSpec(P=LIN, Q=LIN, g=PowerSum.source((1.0, 4.0)))
    rep = classify(spec)
    text = rep.to_text()
    assert "blowup: accepted (p_bar=absent, q_bar=4.0)" in text
    assert rep.label == "blowup-certified"
    kv = dict(line.split("=", 1) for line in rep.to_machine().splitlines())
    assert kv["r_omega"] == "inf" and kv["lambda"] == "inf"
    assert kv["blowup.q_bar"] == "4.0"
    assert "inf" not in kv["q"]


def test_classify_flags_supercritical_damping():
    rep = classify(ProblemSpec(P=PowerSum.damping((1.0, 8.0)), N=3))
    assert any("supercritical" in n for n in rep.notes)
    assert rep.regularity_basic is False


def test_energy_sign(rod_small):
    spec = ProblemSpec(P=LIN, Q=LIN, g=PowerSum.source((1.0, 4.0)))
    z = np.zeros(rod_small.n)
    assert energy_sign(rod_small, spec, z, z) == 0.0
    u = np.linspace(0, 1, rod_small.n)
    assert energy_sign(rod_small, ProblemSpec(), u, z) > 0
    rep = classify(spec, rod_small, 50 * u, z)
    assert rep.energy_sign == -1


def test_dimension_validation():
    with pytest.raises(InvalidParameterError):
        classify(ProblemSpec(N=1))


def test_rod_classified_in_two_dimensions():
    ops = assemble(generate_interval(1.0, 4))
    rep = classify(ProblemSpec(N=2), ops, np.zeros(ops.n), np.zeros(ops.n))
    assert rep.r_omega == INF and rep.subcritical

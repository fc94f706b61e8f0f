import math

import numpy as np
import pytest
from scipy.integrate import quad

from dynbc_wave.assembly import assemble, h0_norm, h1_norm
from dynbc_wave.energy import (
    EnergySample,
    NonFiniteStateError,
    PreconditionError,
    dissipation_increment,
    energy,
    energy_identity_residual,
    functional_I,
    potential_J,
    upsilon,
)
from dynbc_wave.harness import rod_eigenvalue
from dynbc_wave.mesh import generate_interval
from dynbc_wave.nonlin import PowerSum, ProblemSpec, source_force
from dynbc_wave.regime import GlobalCertificate, check_global_hypotheses


def test_potential_tip_source():
    ops = assemble(generate_interval(1.0, 2))
    spec = ProblemSpec(g=PowerSum.source((1.0, 4.0)))
    assert potential_J(ops, spec, np.array([0.0, 2.0])) == 4.0
    assert potential_J(ops, spec, np.zeros(2)) == 0.0
    assert potential_J(ops, ProblemSpec(), np.array([3.0, 2.0])) == 0.0


def test_energy_zero_and_quadratic(rod_small, rng):
    z = np.zeros(rod_small.n)
    s = energy(rod_small, ProblemSpec(), z, z)
    assert s.E == 0.0
    u, v = rng.normal(size=(2, rod_small.n))
    s = energy(rod_small, ProblemSpec(), u, v)
    assert s.E == pytest.approx(0.5 * v @ (rod_small.M @ v) + 0.5 * u @ (rod_small.K @ u))
    assert s.kinetic >= 0 and s.potential_quadratic >= 0
    assert math.isnan(s.upsilon)


def test_energy_nonfinite(rod_small):
    u = np.zeros(rod_small.n)
    u[3] = np.nan
    with pytest.raises(NonFiniteStateError):
        energy(rod_small, ProblemSpec(), u, np.zeros(rod_small.n))


def test_eigenmode_energy_converges():
    k = rod_eigenvalue()
    exact = 0.5 * quad(lambda x: (k * math.cos(k * x)) ** 2, 0, 1)[0]
    errs = []
    for n in (50, 100, 200):
        mesh = generate_interval(1.0, n)
        ops = assemble(mesh)
        u = np.sin(k * mesh.nodes[ops.free_nodes, 0])
        errs.append(abs(energy(ops, ProblemSpec(), u, 0 * u).E - exact))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)
    assert errs[2] / exact < 1e-5


def test_dissipation_increment(rod_small, rng):
    lin = ProblemSpec(P=PowerSum.damping((1.0, 2.0)), Q=PowerSum.damping())
    assert dissipation_increment(rod_small, lin, np.zeros(rod_small.n), 0.1) == 0.0
    v = rng.normal(size=rod_small.n)
    assert dissipation_increment(rod_small, lin, v, 0.1) == pytest.approx(0.1 * np.sum(rod_small.lumped_bulk * v**2))
    cub = ProblemSpec(P=PowerSum.damping((1.0, 3.0), (0.5, 1.5)), Q=PowerSum.damping((2.0, 4.0)))
    vs = rng.normal(scale=5, size=(10_000, rod_small.n))
    assert all(dissipation_increment(rod_small, cub, w, 1e-3) >= 0 for w in vs)
    with pytest.raises(PreconditionError):
        dissipation_increment(rod_small, cub, v, 0.0)


def test_upsilon(rod_small, rng):
    spec = ProblemSpec(P=PowerSum.damping((1.0, 5.0)), f=PowerSum.source((1.0, 4.0)))
    cert = check_global_hypotheses(spec)
    z = np.zeros(rod_small.n)
    assert upsilon(rod_small, spec, z, z, cert) == 0.0
    u, v = rng.normal(size=(2, rod_small.n))
    ups = upsilon(rod_small, spec, u, v, cert)
    base = 0.5 * h0_norm(rod_small, v) ** 2 + 0.5 * h1_norm(rod_small, u) ** 2
    assert ups >= base and functional_I(rod_small, spec, u, cert) >= 0
    plain = GlobalCertificate(2.0, 2.0, 0.0, 0.0)
    assert upsilon(rod_small, spec, u, v, plain) == pytest.approx(base)
    with pytest.raises(PreconditionError):
        upsilon(rod_small, spec, u, v, None)


def test_identity_residual_definition():
    def sample(E, D):
        return EnergySample(0, E, 0, 0, 0, D, 0, 0, 0, 0, 0, 0, 0)

    tr = [sample(3.0, 0.0), sample(2.5, 0.4), sample(2.0, 1.0)]
    assert energy_identity_residual(tr) == pytest.approx(0.1 / 3.0)
    tiny = [sample(0.1, 0.0), sample(0.0, 0.05)]
    assert energy_identity_residual(tiny) == pytest.approx(0.05)
    with pytest.raises(PreconditionError):
        energy_identity_residual([])


def test_columns_order():
    assert EnergySample.columns() == [
        "t", "E", "kinetic", "potential_quadratic", "J", "dissipation_cum", "identity_residual",
        "norm_H1", "norm_v_H0", "norm_Lp", "norm_Lq_gamma1", "upsilon", "dt",
    ]


def test_gradient_of_potential(annulus_small, rng):
    spec = ProblemSpec(f=PowerSum.source((1.0, 4.0), (-0.3, 3.0), constant=0.5), g=PowerSum.source((2.0, 3.0)))
    u = rng.normal(size=annulus_small.n)
    grad = source_force(annulus_small, spec, u)
    h = 1e-5
    for i in rng.choice(annulus_small.n, 20, replace=False):
        e = np.zeros(annulus_small.n)
        e[i] = h
        fd = (potential_J(annulus_small, spec, u + e) - potential_J(annulus_small, spec, u - e)) / (2 * h)
        assert abs(fd - grad[i]) <= 1e-8 + 1e-6 * abs(grad[i])

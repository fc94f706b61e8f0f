"""Energy functionals, dissipation bookkeeping and the energy-identity residual."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .assembly import h0_norm, h1_norm, weighted_lp_norm
from .nonlin import ProblemSpec, damping_force, primitive
from .regime import GlobalCertificate


class NonFiniteStateError(FloatingPointError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass
class EnergySample:
    t: float
    E: float
    kinetic: float
    potential_quadratic: float
    J: float
    dissipation_cum: float
    identity_residual: float
    norm_H1: float
    norm_v_H0: float
    norm_Lp: float
    norm_Lq_gamma1: float
    upsilon: float
    dt: float

    @classmethod
    def columns(cls) -> list:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return list(asdict(self).values())


def potential_J(ops, spec: ProblemSpec, u) -> float:
    """Lumped ``sum_i w_i F(u_i) + sum_i w^Gamma_i G(u_i)``."""
    u = ops.check(u, "u")
    with np.errstate(over="ignore", invalid="ignore"):
        return float(ops.lumped_bulk @ primitive(spec.f, u) + ops.lumped_boundary @ primitive(spec.g, u))


def functional_I(ops, spec: ProblemSpec, u, cert: GlobalCertificate) -> float:
    """``C_p1 sum w alpha |u|^p1 + C_q1 sum w^Gamma beta |u|^q1`` (nonnegative)."""
    u = ops.check(u, "u")
    a = spec.alpha.at(ops.free_nodes)
    b = spec.beta.at(ops.free_nodes)
    with np.errstate(over="ignore"):
        return float(
            cert.C_p1 * np.sum(ops.lumped_bulk * a * np.abs(u) ** cert.p1)
            + cert.C_q1 * np.sum(ops.lumped_boundary * b * np.abs(u) ** cert.q1)
        )


def upsilon(ops, spec: ProblemSpec, u, v, cert) -> float:
    """Half squared H^0 norm of v plus half squared H^1 norm of u plus I(u)."""
    if not isinstance(cert, GlobalCertificate):
        raise PreconditionError("upsilon needs a global-existence certificate")
    return 0.5 * h0_norm(ops, v) ** 2 + 0.5 * h1_norm(ops, u) ** 2 + functional_I(ops, spec, u, cert)


def energy(ops, spec: ProblemSpec, u, v, t: float = 0.0, cert=None) -> EnergySample:
    """Instantaneous energy sample; cumulative fields are left at zero."""
    u = ops.check(u, "u")
    v = ops.check(v, "v")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise NonFiniteStateError(f"non-finite state at t={t}")
    kin = 0.5 * float(v @ (ops.M @ v))
    pot = 0.5 * float(u @ (ops.K @ u))
    J = potential_J(ops, spec, u)
    return EnergySample(
        t=float(t),
        E=kin + pot - J,
        kinetic=kin,
        potential_quadratic=pot,
        J=J,
        dissipation_cum=0.0,
        identity_residual=0.0,
        norm_H1=h1_norm(ops, u),
        norm_v_H0=h0_norm(ops, v),
        norm_Lp=weighted_lp_norm(ops, u, spec.p, region="bulk"),
        norm_Lq_gamma1=weighted_lp_norm(ops, u, spec.q, region="boundary"),
        upsilon=upsilon(ops, spec, u, v, cert) if cert is not None else float("nan"),
        dt=float("nan"),
    )


def dissipation_rate(ops, spec: ProblemSpec, v) -> float:
    """``<B_h(v), v>``: nonnegative for admissible damping."""
    v = ops.check(v, "v")
    return float(damping_force(ops, spec, v) @ v)


def dissipation_increment(ops, spec: ProblemSpec, v_mid, dt: float) -> float:
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    return dt * dissipation_rate(ops, spec, v_mid)


def energy_identity_residual(trajectory) -> float:
    """max_t |E(t) - E(0) + D(t)| / max(1, |E(0)|) over the samples."""
    samples = getattr(trajectory, "samples", trajectory)
    if len(samples) < 2:
        raise PreconditionError("energy identity needs at least two samples")
    E = np.array([s.E for s in samples])
    D = np.array([s.dissipation_cum for s in samples])
    return float(np.max(np.abs(E - E[0] + D)) / max(1.0, abs(E[0])))

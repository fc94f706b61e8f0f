"""Exponent arithmetic and hypothesis checks deciding which results apply.

Infinite exponents are represented by ``math.inf``; report serialization
prints them as the string ``inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .mesh import InvalidParameterError
from .nonlin import ProblemSpec, PowerSum

INF = math.inf


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def critical_exponents(N: int) -> tuple[float, float]:
    """Sobolev critical exponents (r_Omega, r_Gamma) in dimension N."""
    if int(N) != N or N < 2:
        raise InvalidParameterError(f"dimension must be an integer >= 2, got {N}")
    r_omega = 2 * N / (N - 2) if N >= 3 else INF
    r_gamma = 2 * (N - 1) / (N - 3) if N >= 4 else INF
    return r_omega, r_gamma


def _conj(x: float) -> float:
    return x / (x - 1)


def exponents_l_lambda(m: float, mu: float, N: int) -> tuple[float, float]:
    if m <= 1 or mu <= 1:
        raise InvalidParameterError(f"damping exponents must be > 1, got m={m}, mu={mu}")
    r_o, r_g = critical_exponents(N)
    l = min(2.0, max(m, r_o) / (m - 1), max(mu, r_g) / (mu - 1))
    lam = INF if (m <= r_o and mu <= r_g) else min(_conj(m), _conj(mu))
    return l, lam


def check_subcritical(p: float, q: float, N: int) -> bool:
    if p < 2 or q < 2:
        raise InvalidParameterError(f"source exponents must be >= 2, got p={p}, q={q}")
    r_o, r_g = critical_exponents(N)
    return p <= 1 + r_o / 2 and q <= 1 + r_g / 2


def check_regularity(m: float, mu: float, N: int) -> tuple[bool, bool]:
    """(basic, optimal) regularity flags for damping exponents m, mu."""
    if m <= 1 or mu <= 1:
        raise InvalidParameterError(f"damping exponents must be > 1, got m={m}, mu={mu}")
    r_o, r_g = critical_exponents(N)
    basic = m <= r_o and mu <= r_g
    optimal = m <= 1 + r_o / 2 and mu <= 1 + r_g / 2
    return basic, optimal


@dataclass(frozen=True)
class BlowupCertificate:
    """Exponents p_bar, q_bar with f(u)u >= p_bar F(u) >= 0 (same for g).

    ``None`` marks a vanishing source, for which any exponent works.
    """

    p_bar: float | None
    q_bar: float | None


@dataclass(frozen=True)
class GlobalCertificate:
    """Admissible (p1, q1) and constants bounding the source primitives by
    ``C (1 + u^2 + weight |u|^exponent)``."""

    p1: float
    q1: float
    C_p1: float
    C_q1: float


@dataclass(frozen=True)
class Rejection:
    reason: str

    def __bool__(self):
        return False


def _is_linear(P: PowerSum) -> bool:
    act = P.active_terms
    return len(act) == 1 and act[0][1] == 2.0 and act[0][0] > 0


def check_blowup_hypotheses(spec: ProblemSpec):
    """Linear damping plus nonnegative superquadratic pure-power sources."""
    if not (_is_linear(spec.P) and _is_linear(spec.Q)):
        return Rejection("damping is not linear (need P(v) = a v, Q(v) = b v with a, b > 0)")
    if spec.f.constant != 0 or spec.g.constant != 0:
        return Rejection("constant source terms present (need c1 = c2 = 0)")
    bars = []
    for name, src in (("f", spec.f), ("g", spec.g)):
        act = src.active_terms
        neg = [c for c, _ in act if c < 0]
        if neg and len(act) > 2:
            return Rejection(f"{name}: mixed-sign multi-term source is not covered by the blow-up test")
        if neg:
            return Rejection(f"{name}: negative source coefficient (need all coefficients >= 0)")
        if any(e <= 2 for _, e in act):
            return Rejection(f"{name}: source exponent <= 2 (need exponents > 2)")
        bars.append(min(e for _, e in act) if act else None)
    if bars == [None, None]:
        return Rejection("(f, g) vanish identically: the negative-energy set is empty")
    return BlowupCertificate(*bars)


def _global_part(src: PowerSum, damp_exp: float, ess_inf: float, label: str):
    pos = [(c, e) for c, e in src.active_terms if c > 0]
    if not pos:
        return 2.0, abs(src.constant), None
    e_star = max(e for _, e in pos)
    if e_star > max(2.0, damp_exp):
        return None, None, (
            f"{label}: positive source exponent {fmt(e_star)} exceeds max(2, damping exponent {fmt(damp_exp)})"
        )
    p1 = max(2.0, e_star)
    if p1 > 2 and not ess_inf > 0:
        return None, None, f"{label}: exponent {fmt(p1)} > 2 needs a damping weight with positive essential infimum"
    scale = 1.0 / ess_inf if p1 > 2 else 1.0
    C = sum(c / e for c, e in pos) * scale + abs(src.constant)
    return p1, C, None


def check_global_hypotheses(spec: ProblemSpec):
    """Sources that are sinks, at most linear, or dominated by the damping."""
    p1, Cp, why = _global_part(spec.f, spec.m, spec.alpha.ess_inf, "f")
    if why:
        return Rejection(why)
    q1, Cq, why = _global_part(spec.g, spec.mu, spec.beta.ess_inf, "g")
    if why:
        return Rejection(why)
    return GlobalCertificate(p1, q1, Cp, Cq)


def energy_sign(ops, spec: ProblemSpec, u0, v0) -> float:
    """Signed initial energy; negative values place the data in the blow-up set."""
    from .energy import energy

    return energy(ops, spec, u0, v0).E


@dataclass
class RegimeReport:
    N: int
    r_omega: float
    r_gamma: float
    l: float
    lam: float
    m: float
    mu: float
    p: float
    q: float
    subcritical: bool
    regularity_basic: bool
    regularity_optimal: bool
    blowup: object
    global_: object
    energy0: float | None = None
    notes: list = field(default_factory=list)

    @property
    def energy_sign(self) -> int | None:
        if self.energy0 is None:
            return None
        return int(math.copysign(1, self.energy0)) if self.energy0 != 0 else 0

    @property
    def label(self) -> str:
        b = isinstance(self.blowup, BlowupCertificate)
        g = isinstance(self.global_, GlobalCertificate)
        if b and g:
            return "contradictory"
        if b:
            return "blowup-certified"
        if g:
            return "global-certified"
        return "unclassified"

    def key_values(self) -> dict:
        kv = {
            "N": self.N,
            "r_omega": self.r_omega,
            "r_gamma": self.r_gamma,
            "l": self.l,
            "lambda": self.lam,
            "m": self.m,
            "mu": self.mu,
            "p": self.p,
            "q": self.q,
            "subcritical": self.subcritical,
            "regularity_basic": self.regularity_basic,
            "regularity_optimal": self.regularity_optimal,
        }
        if isinstance(self.blowup, BlowupCertificate):
            kv["blowup"] = "accepted"
            kv["blowup.p_bar"] = self.blowup.p_bar
            kv["blowup.q_bar"] = self.blowup.q_bar
        else:
            kv["blowup"] = "rejected"
            kv["blowup.reason"] = self.blowup.reason
        if isinstance(self.global_, GlobalCertificate):
            kv["global"] = "accepted"
            kv["global.p1"] = self.global_.p1
            kv["global.q1"] = self.global_.q1
        else:
            kv["global"] = "rejected"
            kv["global.reason"] = self.global_.reason
        kv["label"] = self.label
        if self.energy0 is not None:
            kv["energy0"] = self.energy0
            kv["energy_sign"] = self.energy_sign
        return {k: fmt(v) for k, v in kv.items()}

    def to_text(self) -> str:
        lines = [
            f"dimension N = {self.N}",
            f"critical exponents: r_Omega = {fmt(self.r_omega)}, r_Gamma = {fmt(self.r_gamma)}",
            f"exponents: m = {fmt(self.m)}, mu = {fmt(self.mu)}, p = {fmt(self.p)}, q = {fmt(self.q)}",
            f"l = {fmt(self.l)}, lambda = {fmt(self.lam)}",
            f"subcritical sources: {fmt(self.subcritical)}",
            f"regularity: basic = {fmt(self.regularity_basic)}, optimal = {fmt(self.regularity_optimal)}",
        ]
        if isinstance(self.blowup, BlowupCertificate):
            pb = "absent" if self.blowup.p_bar is None else fmt(self.blowup.p_bar)
            qb = "absent" if self.blowup.q_bar is None else fmt(self.blowup.q_bar)
            lines.append(f"blowup: accepted (p_bar={pb}, q_bar={qb})")
        else:
            lines.append(f"blowup: rejected ({self.blowup.reason})")
        if isinstance(self.global_, GlobalCertificate):
            lines.append(f"global: accepted (p1={fmt(self.global_.p1)}, q1={fmt(self.global_.q1)})")
        else:
            lines.append(f"global: rejected ({self.global_.reason})")
        if self.energy0 is not None:
            lines.append(f"initial energy: {fmt(self.energy0)} (sign {self.energy_sign})")
        lines.append(f"regime: {self.label}")
        lines.extend(self.notes)
        return "\n".join(lines)

    def to_machine(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.key_values().items())


def classify(spec: ProblemSpec, ops=None, u0=None, v0=None) -> RegimeReport:
    r_o, r_g = critical_exponents(spec.N)
    m, mu, p, q = spec.m, spec.mu, spec.p, spec.q
    l, lam = exponents_l_lambda(m, mu, spec.N)
    basic, optimal = check_regularity(m, mu, spec.N)
    report = RegimeReport(
        N=spec.N,
        r_omega=r_o,
        r_gamma=r_g,
        l=l,
        lam=lam,
        m=m,
        mu=mu,
        p=p,
        q=q,
        subcritical=check_subcritical(p, q, spec.N),
        regularity_basic=basic,
        regularity_optimal=optimal,
        blowup=check_blowup_hypotheses(spec),
        global_=check_global_hypotheses(spec),
    )
    if m > r_o or mu > r_g:
        report.notes.append("note: supercritical damping exponent present")
    if ops is not None and u0 is not None:
        v0 = v0 if v0 is not None else 0.0 * u0
        report.energy0 = energy_sign(ops, spec, u0, v0)
    return report

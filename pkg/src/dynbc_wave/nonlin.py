"""Power-sum damping and source families and their nodal (Nemitskii) actions.

A power sum encodes ``s -> sum_k c_k |s|^(e_k - 2) s + c0``.  Damping terms
(monotone, vanishing at zero) and sources share the representation; the
``kind`` field decides which invariants apply.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mesh import InvalidParameterError

KINK_EPS = 1e-12


@dataclass(frozen=True)
class PowerSum:
    terms: tuple = ()
    constant: float = 0.0
    kind: str = "source"

    def __post_init__(self):
        terms = tuple((float(c), float(e)) for c, e in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "constant", float(self.constant))
        if self.kind not in ("damping", "source"):
            raise InvalidParameterError(f"kind must be 'damping' or 'source', got {self.kind!r}")
        if self.kind == "damping":
            if self.constant != 0.0:
                raise InvalidParameterError("damping must vanish at zero (constant = 0)")
            for c, e in terms:
                if c < 0:
                    raise InvalidParameterError(f"damping coefficient must be >= 0, got {c}")
                if not e > 1:
                    raise InvalidParameterError(f"exponent must be > 1, got {e}")
        else:
            for _, e in terms:
                if e < 2:
                    raise InvalidParameterError(f"source exponent must be >= 2, got {e}")

    @classmethod
    def damping(cls, *terms) -> "PowerSum":
        return cls(tuple(terms), 0.0, "damping")

    @classmethod
    def source(cls, *terms, constant: float = 0.0) -> "PowerSum":
        return cls(tuple(terms), constant, "source")

    @property
    def active_terms(self) -> list:
        """Nonzero terms with equal exponents merged, sorted by exponent."""
        merged: dict = {}
        for c, e in self.terms:
            merged[e] = merged.get(e, 0.0) + c
        return sorted((c, e) for e, c in merged.items() if c != 0.0)

    @property
    def is_zero(self) -> bool:
        return not self.active_terms and self.constant == 0.0

    @property
    def max_exponent(self) -> float | None:
        act = self.active_terms
        return max(e for _, e in act) if act else None

    def __call__(self, s):
        return evaluate(self, s)


def evaluate(spec: PowerSum, s):
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, spec.constant)
    a = np.abs(s)
    sg = np.sign(s)
    with np.errstate(over="ignore", invalid="ignore"):
        for c, e in spec.terms:
            out = out + c * sg * a ** (e - 1.0)
    return out if out.ndim else float(out)


def evaluate_deriv(spec: PowerSum, s):
    """A.e. derivative; for 1 < e < 2 the kink at 0 is capped at |s| = KINK_EPS."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    a = np.abs(s)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for c, e in spec.terms:
            if e == 2.0:
                out = out + c
            elif e > 2.0:
                out = out + c * (e - 1.0) * a ** (e - 2.0)
            else:
                out = out + c * (e - 1.0) * np.maximum(a, KINK_EPS) ** (e - 2.0)
    return out if out.ndim else float(out)


def primitive(spec: PowerSum, s):
    """Antiderivative vanishing at 0: ``sum c |s|^e / e + c0 s``."""
    s = np.asarray(s, dtype=float)
    out = spec.constant * s
    a = np.abs(s)
    with np.errstate(over="ignore"):
        for c, e in spec.terms:
            out = out + c * a**e / e
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CoefficientField:
    """Nonnegative nodal coefficient (alpha on the bulk, beta on Gamma1).

    ``values`` is a scalar or an array over all mesh nodes; ``ess_inf`` is the
    minimum over the support region (the whole domain for alpha, Gamma1 for
    beta).
    """

    values: float | np.ndarray = 1.0
    ess_inf: float = field(default=None)

    def __post_init__(self):
        v = self.values
        if np.ndim(v) == 0:
            v = float(v)
            if not np.isfinite(v) or v < 0:
                raise InvalidParameterError(f"coefficient field must be finite and >= 0, got {v}")
            object.__setattr__(self, "values", v)
            if self.ess_inf is None:
                object.__setattr__(self, "ess_inf", v)
        else:
            v = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise InvalidParameterError("coefficient field must be finite and >= 0")
            v.setflags(write=False)
            object.__setattr__(self, "values", v)
            if self.ess_inf is None:
                object.__setattr__(self, "ess_inf", float(v.min()) if v.size else 0.0)

    @classmethod
    def on_nodes(cls, mesh, func, region: str = "bulk") -> "CoefficientField":
        """Sample ``func(x)`` at mesh nodes; ess_inf is taken over ``region``."""
        vals = np.asarray([func(x) for x in mesh.nodes], dtype=float)
        sel = np.arange(mesh.n_nodes) if region == "bulk" else mesh.gamma1_nodes
        inf = float(vals[sel].min()) if len(sel) else 0.0
        return cls(vals, inf)

    def at(self, nodes: np.ndarray) -> np.ndarray:
        if np.ndim(self.values) == 0:
            return np.full(len(nodes), self.values)
        return self.values[nodes]


def _as_field(x) -> CoefficientField:
    return x if isinstance(x, CoefficientField) else CoefficientField(x)


@dataclass(frozen=True)
class ProblemSpec:
    """Damping P (bulk, weighted by alpha), Q (Gamma1, weighted by beta) and
    sources f (bulk), g (Gamma1).  ``N`` is the space dimension used by the
    regime classifier.
    """

    P: PowerSum = PowerSum(kind="damping")
    Q: PowerSum = PowerSum(kind="damping")
    f: PowerSum = PowerSum(kind="source")
    g: PowerSum = PowerSum(kind="source")
    alpha: CoefficientField = CoefficientField(1.0)
    beta: CoefficientField = CoefficientField(1.0)
    N: int = 2

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_field(self.alpha))
        object.__setattr__(self, "beta", _as_field(self.beta))
        if self.P.kind != "damping" or self.Q.kind != "damping":
            raise InvalidParameterError("P and Q must be damping power sums")
        if self.f.kind != "source" or self.g.kind != "source":
            raise InvalidParameterError("f and g must be source power sums")

    # Exponent metadata; an absent term family counts as exponent 2 (linear
    # or vanishing), which is the weakest growth the hypotheses allow.
    @property
    def m(self) -> float:
        return self.P.max_exponent or 2.0

    @property
    def mu(self) -> float:
        return self.Q.max_exponent or 2.0

    @property
    def p(self) -> float:
        return self.f.max_exponent or 2.0

    @property
    def q(self) -> float:
        return self.g.max_exponent or 2.0

    @property
    def sources_off(self) -> bool:
        return self.f.is_zero and self.g.is_zero


def nemitskii_force(ops, spec: PowerSum, field, vec, region: str = "bulk") -> np.ndarray:
    """Lumped nodal load ``w_i * field_i * spec(vec_i)``."""
    vec = ops.check(vec, "vec")
    if spec.is_zero:
        return np.zeros(ops.n)
    w = ops.lumped_bulk if region == "bulk" else ops.lumped_boundary
    fv = _as_field(field).at(ops.free_nodes) if field is not None else 1.0
    return w * fv * evaluate(spec, vec)


def nemitskii_deriv(ops, spec: PowerSum, field, vec, region: str = "bulk") -> np.ndarray:
    """Diagonal of the Jacobian of :func:`nemitskii_force`."""
    vec = ops.check(vec, "vec")
    if spec.is_zero:
        return np.zeros(ops.n)
    w = ops.lumped_bulk if region == "bulk" else ops.lumped_boundary
    fv = _as_field(field).at(ops.free_nodes) if field is not None else 1.0
    return w * fv * evaluate_deriv(spec, vec)


def damping_force(ops, problem: ProblemSpec, v) -> np.ndarray:
    """B_h(v): interior plus boundary damping loads."""
    return nemitskii_force(ops, problem.P, problem.alpha, v, "bulk") + nemitskii_force(
        ops, problem.Q, problem.beta, v, "boundary"
    )


def damping_jacobian_diag(ops, problem: ProblemSpec, v) -> np.ndarray:
    return nemitskii_deriv(ops, problem.P, problem.alpha, v, "bulk") + nemitskii_deriv(
        ops, problem.Q, problem.beta, v, "boundary"
    )


def source_force(ops, problem: ProblemSpec, u) -> np.ndarray:
    """F_h(u): interior plus boundary source loads, the gradient of the lumped J."""
    return nemitskii_force(ops, problem.f, None, u, "bulk") + nemitskii_force(
        ops, problem.g, None, u, "boundary"
    )


def source_jacobian_diag(ops, problem: ProblemSpec, u) -> np.ndarray:
    return nemitskii_deriv(ops, problem.f, None, u, "bulk") + nemitskii_deriv(
        ops, problem.g, None, u, "boundary"
    )


def parse_terms(terms: Sequence) -> tuple:
    """``[[coef, exponent], ...]`` -> tuple of float pairs, validating shape."""
    out = []
    for t in terms:
        if not isinstance(t, (list, tuple)) or len(t) != 2:
            raise InvalidParameterError(f"term must be [coef, exponent], got {t!r}")
        out.append((float(t[0]), float(t[1])))
    return tuple(out)

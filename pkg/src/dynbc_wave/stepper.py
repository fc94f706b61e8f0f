"""Implicit time integration through Newton solves of the resolvent system.

One implicit step with parameter ``sigma`` (2/dt for the midpoint rule,
1/dt for backward Euler) amounts to

    sigma u - v = rhs1,
    sigma M v + K u + B(v) - F(u) = rhs0,

which after substituting ``u = (v + rhs1) / sigma`` becomes a single equation
in ``v``.  Without sources its Jacobian ``sigma M + K / sigma + B'(v)`` is SPD.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import h0_norm, h1_norm
from .energy import EnergySample, NonFiniteStateError, energy
from .mesh import InvalidParameterError
from .nonlin import (
    ProblemSpec,
    damping_force,
    damping_jacobian_diag,
    source_force,
    source_jacobian_diag,
)

DIRECT_SOLVE_LIMIT = 20_000

REACHED_T_END = "ReachedTEnd"
BLOWUP_SUSPECTED = "BlowUpSuspected"
RESOLVENT_BREAKDOWN = "ResolventBreakdown"


class ResolventFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class StepperConfig:
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float | None = None
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    growth_cap: float = 10.0
    truncation_radius: float = math.inf
    scheme: str = "midpoint"
    # Step rejected when ||U_new - U_old|| > max_rel_change * max(||U_old||, 1).
    max_rel_change: float = 0.1
    dissipation_rule: str = "scheme"
    blowup_norm: float = 1e100

    def __post_init__(self):
        if self.dt_max is None:
            object.__setattr__(self, "dt_max", self.dt_init)
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise InvalidParameterError(
                f"need 0 < dt_min <= dt_init <= dt_max, got {self.dt_min}, {self.dt_init}, {self.dt_max}"
            )
        if not self.newton_tol > 0:
            raise InvalidParameterError("newton_tol must be positive")
        if self.newton_max_iters < 1:
            raise InvalidParameterError("newton_max_iters must be >= 1")
        if not self.truncation_radius > 0:
            raise InvalidParameterError("truncation_radius must be positive (inf disables)")
        if self.scheme not in ("midpoint", "backward_euler"):
            raise InvalidParameterError(f"unknown scheme {self.scheme!r}")
        if self.dissipation_rule not in ("scheme", "trapezoid"):
            raise InvalidParameterError(f"unknown dissipation rule {self.dissipation_rule!r}")
        if not self.growth_cap > 1:
            raise InvalidParameterError("growth_cap must be > 1")


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray
    dt: float
    newton_iters: int = 0


class ResolventSolution(NamedTuple):
    u: np.ndarray
    v: np.ndarray
    iterations: int
    residual: float


@dataclass
class TerminationStatus:
    kind: str
    t_final: float
    t_estimate: float | None = None
    norm_final: float | None = None
    message: str = ""


@dataclass
class Trajectory:
    samples: list = field(default_factory=list)
    status: TerminationStatus | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    step_t: list = field(default_factory=list)
    step_norm: list = field(default_factory=list)
    step_dt: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    newton_iters: list = field(default_factory=list)
    n_rejected: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])


def _is_constant_jacobian(problem: ProblemSpec) -> bool:
    def lin(ps):
        return all(e == 2.0 for _, e in ps.terms)

    return lin(problem.P) and lin(problem.Q) and lin(problem.f) and lin(problem.g)


class Stepper:
    """Holds operators, problem and config plus factorization caches."""

    def __init__(self, ops, problem: ProblemSpec, cfg: StepperConfig | None = None):
        self.ops = ops
        self.problem = problem
        self.cfg = cfg or StepperConfig()
        self.M = ops.M.tocsr()
        self.K = ops.K.tocsr()
        self._base: dict = {}
        self._lu: dict = {}
        self._const_jac = _is_constant_jacobian(problem) and math.isinf(self.cfg.truncation_radius)

    # -- resolvent -------------------------------------------------------
    def _base_matrix(self, sigma):
        A = self._base.get(sigma)
        if A is None:
            A = (sigma * self.M + self.K * (1.0 / sigma)).tocsc()
            if len(self._base) > 8:
                self._base.clear()
            self._base[sigma] = A
        return A

    def _linear_solve(self, sigma, diag, rhs, tol, key=None):
        n = len(rhs)
        if self._const_jac and n <= DIRECT_SOLVE_LIMIT:
            lu = self._lu.get((sigma, key))
            if lu is None:
                lu = spla.splu((self._base_matrix(sigma) + sp.diags(diag)).tocsc())
                if len(self._lu) > 8:
                    self._lu.clear()
                self._lu[(sigma, key)] = lu
            return lu.solve(rhs)
        A = (self._base_matrix(sigma) + sp.diags(diag)).tocsc()
        if n <= DIRECT_SOLVE_LIMIT:
            return spla.splu(A).solve(rhs)
        d = A.diagonal()
        pre = spla.LinearOperator(A.shape, matvec=lambda x: x / d)
        x, info = spla.cg(A, rhs, rtol=tol / 10, atol=0.0, M=pre, maxiter=10 * n)
        if info != 0:
            raise ResolventFailure(f"conjugate gradient did not converge (info={info})")
        return x

    def _truncation_scale(self, u, v) -> float:
        R = self.cfg.truncation_radius
        if math.isinf(R):
            return 1.0
        nrm = math.hypot(h1_norm(self.ops, u), h0_norm(self.ops, v))
        return 1.0 if nrm <= R else R / nrm

    def solve_resolvent(self, rhs0, rhs1, sigma, *, with_source=False, v_init=None) -> ResolventSolution:
        """Solve the implicit-step system for (u, v) by damped Newton."""
        if not sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {sigma}")
        ops, pb, cfg = self.ops, self.problem, self.cfg
        rhs0 = ops.check(rhs0, "rhs0")
        rhs1 = ops.check(rhs1, "rhs1")
        r = rhs0 - (self.K @ rhs1) / sigma
        inv = 1.0 / sigma
        use_source = with_source and not pb.sources_off

        def residual(v):
            u = (v + rhs1) * inv
            G = sigma * (self.M @ v) + inv * (self.K @ v) + damping_force(ops, pb, v) - r
            scale = 1.0 + np.linalg.norm(r)
            s = 1.0
            if use_source:
                s = self._truncation_scale(u, v)
                S = source_force(ops, pb, s * u)
                G = G - S
                scale += np.linalg.norm(S)
            return G, scale, s

        v = np.zeros(ops.n) if v_init is None else np.array(v_init, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            G, scale, s = residual(v)
        gn = np.linalg.norm(G)
        it = 0
        while not gn <= cfg.newton_tol * scale:
            if it >= cfg.newton_max_iters or not np.isfinite(gn):
                raise ResolventFailure(
                    f"Newton failed after {it} iterations (residual {gn:.3e}, scale {scale:.3e})"
                )
            with np.errstate(over="ignore", invalid="ignore"):
                diag = damping_jacobian_diag(ops, pb, v)
                if use_source:
                    u = (v + rhs1) * inv
                    diag = diag - source_jacobian_diag(ops, pb, s * u) * (s * inv)
            if not np.all(np.isfinite(diag)):
                raise ResolventFailure("non-finite Jacobian")
            try:
                d = self._linear_solve(sigma, diag, -G, cfg.newton_tol, key=use_source)
            except RuntimeError as exc:
                raise ResolventFailure(f"linear solve failed: {exc}") from exc
            it += 1
            # Backtracking on ||G||; the full step is taken whenever it reduces the residual.
            lam = 1.0
            for _ in range(30):
                vt = v + lam * d
                with np.errstate(over="ignore", invalid="ignore"):
                    Gt, scale_t, s_t = residual(vt)
                gt = np.linalg.norm(Gt)
                if np.isfinite(gt) and (gt <= (1 - 1e-4 * lam) * gn or gt <= cfg.newton_tol * scale_t):
                    break
                lam *= 0.5
            else:
                raise ResolventFailure(f"line search failed at iteration {it} (residual {gn:.3e})")
            v, G, gn, scale, s = vt, Gt, gt, scale_t, s_t
        u = (v + rhs1) * inv
        return ResolventSolution(u, v, it, float(gn))

    # -- steps -----------------------------------------------------------
    def step(self, state: State, dt: float | None = None):
        """One implicit step of size ``dt``; returns (new_state, dissipation increment)."""
        dt = state.dt if dt is None else dt
        ops, pb = self.ops, self.problem
        u0, v0 = state.u, state.v
        if self.cfg.scheme == "midpoint":
            sigma = 2.0 / dt
            sol = self.solve_resolvent(sigma * (self.M @ v0), sigma * u0, sigma, with_source=True, v_init=v0)
            w = sol.v
            u1 = 2.0 * sol.u - u0
            v1 = 2.0 * w - v0
        else:
            sigma = 1.0 / dt
            sol = self.solve_resolvent(sigma * (self.M @ v0), sigma * u0, sigma, with_source=True, v_init=v0)
            w = sol.v
            u1, v1 = sol.u, sol.v
        if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(v1))):
            raise ResolventFailure("non-finite state after step")
        if self.cfg.dissipation_rule == "trapezoid":
            d_inc = 0.5 * dt * (damping_force(ops, pb, v0) @ v0 + damping_force(ops, pb, v1) @ v1)
        else:
            d_inc = dt * float(damping_force(ops, pb, w) @ w)
        return State(state.t + dt, u1, v1, state.dt, sol.iterations), float(d_inc)

    def state_norm(self, u, v) -> float:
        return math.hypot(h1_norm(self.ops, u), h0_norm(self.ops, v))

    def integrate(
        self,
        u0,
        v0,
        t_end: float,
        sample_every: int = 1,
        snapshot_every: int = 0,
        cert=None,
        t0: float = 0.0,
    ) -> Trajectory:
        """Integrate from ``t0`` to ``t_end`` with step rejection and dt halving."""
        if not t_end > t0:
            raise InvalidParameterError("t_end must exceed the start time")
        ops, pb, cfg = self.ops, self.problem, self.cfg
        u = ops.check(u0, "u0").copy()
        v = ops.check(v0, "v0").copy()
        traj = Trajectory()
        try:
            s0 = energy(ops, pb, u, v, t0, cert)
        except NonFiniteStateError as exc:
            traj.status = TerminationStatus(RESOLVENT_BREAKDOWN, t0, message=str(exc))
            traj.u, traj.v = u, v
            return traj
        s0.dt = cfg.dt_init
        E0 = s0.E
        traj.samples.append(s0)
        nrm = self.state_norm(u, v)
        traj.step_t.append(t0)
        traj.step_norm.append(nrm)
        traj.step_dt.append(cfg.dt_init)
        if snapshot_every:
            traj.snapshots.append((t0, u.copy(), v.copy()))

        state = State(t0, u, v, cfg.dt_init)
        D = 0.0
        nstep = 0
        status = None
        last_sampled = 0
        while True:
            remaining = t_end - state.t
            if remaining <= 1e-9 * state.dt:
                status = TerminationStatus(REACHED_T_END, state.t, norm_final=nrm)
                break
            dt = min(state.dt, remaining)
            try:
                new, d_inc = self.step(state, dt)
                new_nrm = self.state_norm(new.u, new.v)
                change = self.state_norm(new.u - state.u, new.v - state.v)
                ok = (
                    math.isfinite(new_nrm)
                    and new_nrm <= cfg.growth_cap * max(nrm, 1.0)
                    and change <= cfg.max_rel_change * max(nrm, 1.0)
                )
            except ResolventFailure:
                ok = False
            if not ok:
                traj.n_rejected += 1
                state.dt = dt / 2
                if state.dt < cfg.dt_min:
                    status = TerminationStatus(
                        BLOWUP_SUSPECTED, state.t, t_estimate=state.t, norm_final=nrm,
                        message=f"step size fell below dt_min={cfg.dt_min}",
                    )
                    break
                continue
            nstep += 1
            D += d_inc
            if abs(t_end - new.t) <= 1e-9 * dt:
                new.t = t_end  # absorb summation round-off in the clock

            if change < 0.25 * cfg.max_rel_change * max(nrm, 1.0) and dt == state.dt:
                new.dt = min(2 * state.dt, cfg.dt_max)
            else:
                new.dt = state.dt
            state, nrm = new, new_nrm
            traj.step_t.append(state.t)
            traj.step_norm.append(nrm)
            traj.step_dt.append(dt)
            traj.newton_iters.append(state.newton_iters)
            if snapshot_every and nstep % snapshot_every == 0:
                traj.snapshots.append((state.t, state.u.copy(), state.v.copy()))
            if nstep % sample_every == 0:
                traj.samples.append(self._sample(state, D, E0, dt, cert))
                last_sampled = nstep
            if nrm > cfg.blowup_norm:
                status = TerminationStatus(
                    BLOWUP_SUSPECTED, state.t, t_estimate=state.t, norm_final=nrm,
                    message=f"state norm exceeded {cfg.blowup_norm:.3g}",
                )
                break
        if last_sampled != nstep:
            traj.samples.append(self._sample(state, D, E0, traj.step_dt[-1], cert))
        traj.status = status
        traj.u, traj.v = state.u, state.v
        return traj

    def _sample(self, state, D, E0, dt, cert) -> EnergySample:
        s = energy(self.ops, self.problem, state.u, state.v, state.t, cert)
        s.dissipation_cum = D
        s.identity_residual = abs(s.E - E0 + D)
        s.dt = dt
        return s


def solve_resolvent(ops, spec, rhs0, rhs1, sigma, cfg: StepperConfig | None = None, v_init=None) -> ResolventSolution:
    """Source-free resolvent solve (the monotone part of one implicit step)."""
    return Stepper(ops, spec, cfg).solve_resolvent(rhs0, rhs1, sigma, with_source=False, v_init=v_init)


def step_implicit_midpoint(state: State, ops, spec, cfg: StepperConfig | None = None) -> State:
    cfg = replace(cfg or StepperConfig(), scheme="midpoint")
    return Stepper(ops, spec, cfg).step(state)[0]


def integrate(u0, v0, t_end, ops, spec, cfg: StepperConfig | None = None, sample_every: int = 1, **kw) -> Trajectory:
    return Stepper(ops, spec, cfg).integrate(u0, v0, t_end, sample_every=sample_every, **kw)

"""Canned experiments: blow-up, global monitoring, continuous dependence,
convergence ladders and parameter sweeps.

Every experiment returns plain data (a :class:`Verdict` or a small result
record) so that tests and the command line can assert on it directly.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq
from scipy.special import j0, j1, y0, y1

from .assembly import DiscreteOperators, assemble, h0_norm, h1_norm, weighted_lp_norm
from .energy import PreconditionError, energy
from .mesh import InvalidParameterError, generate_annulus, generate_interval
from .nonlin import PowerSum, ProblemSpec
from .regime import (
    BlowupCertificate,
    GlobalCertificate,
    check_blowup_hypotheses,
    check_global_hypotheses,
    classify,
    fmt,
)
from .stepper import BLOWUP_SUSPECTED, REACHED_T_END, State, Stepper, StepperConfig

GLOBAL = "Global"
BLOWUP = "BlowUp"
INCONCLUSIVE = "Inconclusive"

# Joint-divergence thresholds for a blow-up verdict.
ENERGY_NORM_THRESHOLD = 1e6
SOURCE_NORM_THRESHOLD = 1e4


class NegativeEnergyFailure(RuntimeError):
    """No negative-energy datum was found; ``energy`` holds the last value tried."""

    def __init__(self, message: str, energy: float | None = None):
        super().__init__(message)
        self.energy = energy


@dataclass
class Verdict:
    kind: str
    window_end: float | None = None
    t_estimate: float | None = None
    norm_at_abort: float | None = None
    reason: str = ""
    gamma: float | None = None
    max_upsilon: float | None = None
    upsilon_rate: float | None = None
    upsilon_fit_residual: float | None = None
    final: object = None
    dt_summary: dict = field(default_factory=dict)
    trajectory: object = None


def _dt_summary(traj) -> dict:
    dts = np.asarray(traj.step_dt[1:]) if len(traj.step_dt) > 1 else np.asarray(traj.step_dt)
    if dts.size == 0:
        return {}
    return {
        "steps": int(dts.size),
        "rejected": int(traj.n_rejected),
        "dt_min": float(dts.min()),
        "dt_max": float(dts.max()),
    }


# -- initial data ---------------------------------------------------------
def smooth_cutoff(s):
    """C-infinity cutoff: 1 for s <= 1/4, 0 for s >= 3/4, monotone between."""
    s = np.asarray(s, dtype=float)

    def psi(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a = psi(0.75 - s)
    b = psi(s - 0.25)
    return a / (a + b)


def rod_eigenvalue() -> float:
    """Smallest positive root of k tan k = 1 (the fixed-free rod with tip mass)."""
    return brentq(lambda k: k * math.tan(k) - 1.0, 0.1, 1.5, xtol=1e-15, rtol=1e-15)


def annulus_axisymmetric_frequency(r0: float, r1: float) -> float:
    """Lowest radial frequency w with R(r0) = 0 and R'(r1) = w^2 R(r1)."""

    def R(w, r):
        return j0(w * r) * y0(w * r0) - y0(w * r) * j0(w * r0)

    def dR(w, r):
        return -w * j1(w * r) * y0(w * r0) + w * y1(w * r) * j0(w * r0)

    def h(w):
        return dR(w, r1) - w * w * R(w, r1)

    grid = np.linspace(1e-3, 20.0, 4001)
    vals = [h(w) for w in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            return float(a)
        if fa * fb < 0:
            return brentq(h, a, b, xtol=1e-15, rtol=1e-15)
    raise RuntimeError("no axisymmetric frequency found")


def annulus_axisymmetric_profile(r0: float, r1: float, w: float):
    def R(r):
        return j0(w * r) * y0(w * r0) - y0(w * r) * j0(w * r0)

    scale = R(r1)
    return lambda r: R(r) / scale


def eigenmode_profile(ops: DiscreteOperators, amplitude: float = 1.0) -> np.ndarray:
    """Lowest analytic mode sampled at the free dofs (rod or annulus)."""
    mesh = ops.mesh
    X = mesh.nodes[ops.free_nodes]
    if mesh.dim == 1:
        L = float(mesh.nodes[:, 0].max())
        if L != 1.0:
            raise InvalidParameterError("the analytic rod mode is tabulated for L = 1")
        return amplitude * np.sin(rod_eigenvalue() * X[:, 0])
    r = np.hypot(X[:, 0], X[:, 1])
    rad = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
    r0, r1 = float(rad.min()), float(rad.max())
    w = annulus_axisymmetric_frequency(r0, r1)
    return amplitude * annulus_axisymmetric_profile(r0, r1, w)(r)


def bump_profile(ops: DiscreteOperators, center, radius: float, scale: float = 1.0) -> np.ndarray:
    """``scale * cutoff(|x - center| / radius)`` at the free dofs."""
    if not radius > 0:
        raise InvalidParameterError("bump radius must be positive")
    X = ops.mesh.nodes[ops.free_nodes]
    d = np.linalg.norm(X - np.asarray(center, dtype=float).reshape(1, -1), axis=1)
    return scale * smooth_cutoff(d / radius)


def _bump_site(ops: DiscreteOperators, on_boundary: bool):
    mesh = ops.mesh
    cand = ops.free_nodes[ops.boundary_dofs] if on_boundary else ops.free_nodes
    D = mesh.nodes[mesh.dirichlet_nodes]
    P = mesh.nodes[cand]
    dist = np.min(np.linalg.norm(P[:, None, :] - D[None, :, :], axis=2), axis=1)
    i = int(np.argmax(dist))
    return P[i], float(dist[i])


def build_negative_energy_data(
    ops: DiscreteOperators,
    spec: ProblemSpec,
    v0=None,
    s_max: float = 1e8,
    center=None,
    radius: float | None = None,
):
    """Scaled bump ``s * w0`` with negative initial energy.

    The bump is centred on the Gamma1 node farthest from the pinched set when
    the boundary source is active, otherwise on the farthest free node.  The
    scale doubles from 1 until the energy is negative.

    Returns
    -------
    (u0, v0, s)
    """
    if spec.sources_off:
        raise NegativeEnergyFailure("N empty: the sources vanish identically")
    v0 = np.zeros(ops.n) if v0 is None else ops.check(v0, "v0")
    use_boundary = not spec.g.is_zero and len(ops.boundary_dofs) > 0
    if center is None or radius is None:
        c, dist = _bump_site(ops, use_boundary)
        center = c if center is None else center
        radius = 0.5 * dist if radius is None else radius
    w0 = bump_profile(ops, center, radius)
    s = 1.0
    E = math.nan
    while s <= s_max:
        E = energy(ops, spec, s * w0, v0).E
        if E < 0:
            return s * w0, v0, s
        s *= 2.0
    raise NegativeEnergyFailure(f"scale cap {s_max:g} exceeded; last energy {E!r}", E)


# -- blow-up ----------------------------------------------------------------
def estimate_blowup_time(t, norms):
    """Fit ``N ~ C (T - t)^(-gamma)`` to the last decade of norm growth.

    ``1 / (d log N / dt)`` is affine in t with slope ``-1/gamma`` and intercept
    ``T/gamma``.  Falls back to the last time when the fit is degenerate.

    Returns
    -------
    (T_est, gamma or None)
    """
    t = np.asarray(t, dtype=float)
    N = np.asarray(norms, dtype=float)
    ok = np.isfinite(N) & (N > 0)
    t, N = t[ok], N[ok]
    if t.size < 2:
        return (float(t[-1]) if t.size else math.nan), None
    sel = N >= N[-1] / 10.0
    first = int(np.argmax(sel))
    t, N = t[first:], N[first:]
    if t.size < 5:
        return float(t[-1]), None
    rate = np.diff(np.log(N)) / np.diff(t)
    tm = 0.5 * (t[1:] + t[:-1])
    good = rate > 0
    if good.sum() < 4:
        return float(t[-1]), None
    a, b = np.polyfit(tm[good], 1.0 / rate[good], 1)
    if not a < 0:
        return float(t[-1]), None
    T = -b / a
    if not math.isfinite(T) or T < t[-1]:
        return float(t[-1]), float(-1.0 / a)
    return float(T), float(-1.0 / a)


def divergence_norms(ops, spec: ProblemSpec, u, v) -> tuple[float, float]:
    """(H^1 x H^0 norm sum, max of the bulk L^p and Gamma1 L^q norms)."""
    with np.errstate(over="ignore", invalid="ignore"):
        e = h1_norm(ops, u) + h0_norm(ops, v)
        src = max(
            weighted_lp_norm(ops, u, spec.p, region="bulk"),
            weighted_lp_norm(ops, u, spec.q, region="boundary"),
        )
    return e, src


def run_blowup_experiment(
    ops,
    spec: ProblemSpec,
    u0,
    v0,
    t_end: float = 20.0,
    cfg: StepperConfig | None = None,
    sample_every: int = 100,
    energy_threshold: float = ENERGY_NORM_THRESHOLD,
    source_threshold: float = SOURCE_NORM_THRESHOLD,
    require_certificate: bool = True,
) -> Verdict:
    """Integrate certified negative-energy data and report the blow-up verdict."""
    if require_certificate:
        cert = check_blowup_hypotheses(spec)
        if not isinstance(cert, BlowupCertificate):
            raise PreconditionError(f"blow-up hypotheses rejected: {cert.reason}")
        if energy(ops, spec, u0, v0).E >= 0:
            raise PreconditionError("initial energy is not negative")
    cfg = cfg or StepperConfig(dt_init=1e-3)
    if cfg.blowup_norm > 1e90:
        cfg = replace(cfg, blowup_norm=100.0 * max(energy_threshold, source_threshold))
    traj = Stepper(ops, spec, cfg).integrate(u0, v0, t_end, sample_every=sample_every)
    return _blowup_verdict(ops, spec, traj, energy_threshold, source_threshold)


def _blowup_verdict(ops, spec, traj, energy_threshold, source_threshold) -> Verdict:
    st = traj.status
    final = traj.samples[-1]
    summary = _dt_summary(traj)
    if st.kind == REACHED_T_END:
        return Verdict(INCONCLUSIVE, window_end=st.t_final, reason="window too short or thresholds unmet",
                       final=final, dt_summary=summary, trajectory=traj)
    if st.kind != BLOWUP_SUSPECTED:
        return Verdict(INCONCLUSIVE, window_end=st.t_final, reason=f"integration broke down: {st.message}",
                       final=final, dt_summary=summary, trajectory=traj)
    e, src = divergence_norms(ops, spec, traj.u, traj.v)
    if not (e > energy_threshold and src > source_threshold):
        return Verdict(
            INCONCLUSIVE, window_end=st.t_final, norm_at_abort=e,
            reason=f"thresholds unmet at abort (energy norm {e:.3g}, source norm {src:.3g})",
            final=final, dt_summary=summary, trajectory=traj,
        )
    T, gamma = estimate_blowup_time(traj.step_t, traj.step_norm)
    return Verdict(BLOWUP, window_end=st.t_final, t_estimate=T, norm_at_abort=e, gamma=gamma,
                   final=final, dt_summary=summary, trajectory=traj)


# -- global existence ---------------------------------------------------------
def _upsilon_fit(t, ups):
    """Least-squares affine fit of log(upsilon) plus the Gronwall envelope rate."""
    t = np.asarray(t, dtype=float)
    y = np.log(np.asarray(ups, dtype=float))
    a, b = np.polyfit(t, y, 1)
    resid = float(np.sqrt(np.mean((y - (a * t + b)) ** 2)))
    pos = t > t[0]
    envelope = float(np.max((y[pos] - y[0]) / (t[pos] - t[0]))) if pos.any() else 0.0
    return float(a), resid, max(envelope, 0.0)


def run_global_experiment(
    ops,
    spec: ProblemSpec,
    u0,
    v0,
    t_end: float = 50.0,
    cfg: StepperConfig | None = None,
    sample_every: int = 10,
    require_certificate: bool = True,
) -> Verdict:
    """Integrate over a fixed window and monitor the auxiliary functional upsilon."""
    cert = check_global_hypotheses(spec)
    if not isinstance(cert, GlobalCertificate):
        if require_certificate:
            raise PreconditionError(f"global hypotheses rejected: {cert.reason}")
        cert = None
    cfg = cfg or StepperConfig(dt_init=1e-2)
    traj = Stepper(ops, spec, cfg).integrate(u0, v0, t_end, sample_every=sample_every, cert=cert)
    st = traj.status
    final = traj.samples[-1]
    summary = _dt_summary(traj)
    if st.kind != REACHED_T_END:
        v = _blowup_verdict(ops, spec, traj, ENERGY_NORM_THRESHOLD, SOURCE_NORM_THRESHOLD)
        if v.kind == INCONCLUSIVE:
            v.reason = f"window not reached: {st.message or v.reason}"
        return v
    out = Verdict(GLOBAL, window_end=st.t_final, final=final, dt_summary=summary, trajectory=traj)
    if cert is not None:
        ups = traj.column("upsilon")
        out.max_upsilon = float(np.max(ups))
        if np.all(np.isfinite(ups)) and np.all(ups > 0):
            rate, resid, _ = _upsilon_fit(traj.column("t"), ups)
            out.upsilon_rate, out.upsilon_fit_residual = rate, resid
    return out


def upsilon_envelope_rate(verdict: Verdict) -> float:
    """Smallest k with upsilon(t) <= upsilon(0) exp(k t) on the samples."""
    traj = verdict.trajectory
    return _upsilon_fit(traj.column("t"), traj.column("upsilon"))[2]


# -- continuous dependence ----------------------------------------------------
@dataclass
class DependenceResult:
    deltas: list
    errors: list
    z_errors: list
    slope: float | None
    verdict: str = GLOBAL
    reason: str = ""


def _loglog_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def run_continuous_dependence(
    ops,
    spec: ProblemSpec,
    u0,
    v0,
    deltas=(1e-1, 1e-2, 1e-3),
    t_end: float = 2.0,
    cfg: StepperConfig | None = None,
    direction=None,
    sample_every: int = 1,
    truncation_radius: float | None = None,
) -> DependenceResult:
    """Sup-in-time trajectory error against perturbation size ``delta``.

    Data are perturbed as ``u0 + delta * direction`` with a unit-H^1 direction
    (a fixed smooth profile by default).  The source is truncated at
    ``truncation_radius`` (10 times the initial state norm by default).
    """
    u0 = ops.check(u0, "u0")
    v0 = ops.check(v0, "v0")
    base_norm = math.hypot(h1_norm(ops, u0), h0_norm(ops, v0))
    R = truncation_radius if truncation_radius is not None else 10.0 * max(1.0, base_norm)
    cfg = replace(cfg or StepperConfig(dt_init=1e-2), truncation_radius=R)
    # Freeze the time grid so every run is sampled at identical instants.
    cfg = replace(cfg, max_rel_change=math.inf, growth_cap=math.inf, dt_max=cfg.dt_init)
    if direction is None:
        X = ops.mesh.nodes[ops.free_nodes]
        direction = np.prod(np.sin(0.5 * np.pi * X), axis=1) + 0.5 * np.cos(3.0 * X[:, 0])
        direction = direction - 0.5
    direction = ops.check(direction, "direction")
    direction = direction / h1_norm(ops, direction)
    stepper = Stepper(ops, spec, cfg)

    def run(u):
        tr = stepper.integrate(u, v0, t_end, sample_every=sample_every, snapshot_every=sample_every)
        return tr

    base = run(u0)
    if base.status.kind != REACHED_T_END:
        return DependenceResult(list(deltas), [], [], None, INCONCLUSIVE, "baseline run aborted")
    m, mu = spec.m, spec.mu
    a = spec.alpha.at(ops.free_nodes)
    b = spec.beta.at(ops.free_nodes)
    errors, z_errors = [], []
    for d in deltas:
        tr = run(u0 + d * direction)
        if tr.status.kind != REACHED_T_END or len(tr.snapshots) != len(base.snapshots):
            return DependenceResult(list(deltas), errors, z_errors, None, INCONCLUSIVE,
                                    f"perturbed run with delta={d!r} aborted")
        err = 0.0
        zt, zb, times = [], [], []
        for (t1, u1, v1), (t2, u2, v2) in zip(tr.snapshots, base.snapshots):
            if t1 != t2:
                return DependenceResult(list(deltas), errors, z_errors, None, INCONCLUSIVE,
                                        "time grids differ between runs")
            du, dv = u1 - u2, v1 - v2
            err = max(err, h1_norm(ops, du) + h0_norm(ops, dv))
            times.append(t1)
            zt.append(weighted_lp_norm(ops, dv, m, a, "bulk") ** m)
            zb.append(weighted_lp_norm(ops, dv, mu, b, "boundary") ** mu)
        errors.append(err)
        z_errors.append(float(trapezoid(zt, times) ** (1 / m) + trapezoid(zb, times) ** (1 / mu)))
    return DependenceResult(list(deltas), errors, z_errors, _loglog_slope(deltas, errors))


# -- convergence ----------------------------------------------------------
@dataclass
class ConvergenceResult:
    levels: list
    periods: list
    errors: list
    ratios: list
    order: float | None
    exact_period: float


def measure_period(ops, spec: ProblemSpec, u0, dt: float, t_end: float) -> float:
    """Period of ``c(t) = u0' M u(t)`` from its zero crossings (fixed-step midpoint).

    Each crossing is located by a cubic through the four surrounding samples;
    the half period is the slope of crossing time against crossing index.
    """
    cfg = StepperConfig(dt_init=dt, newton_tol=1e-13)
    st = Stepper(ops, spec, cfg)
    Mu0 = ops.M @ u0
    state = State(0.0, u0.copy(), np.zeros(ops.n), dt)
    nsteps = int(round(t_end / dt))
    c = np.empty(nsteps + 1)
    c[0] = Mu0 @ u0
    for i in range(nsteps):
        state, _ = st.step(state, dt)
        c[i + 1] = Mu0 @ state.u
    t = dt * np.arange(nsteps + 1)
    crossings = []
    for i in np.flatnonzero(np.sign(c[:-1]) * np.sign(c[1:]) < 0):
        lo = max(0, min(i - 1, nsteps - 3))
        tt, cc = t[lo:lo + 4], c[lo:lo + 4]
        coef = np.polyfit(tt - t[i], cc, 3)
        roots = np.roots(coef)
        roots = roots[np.isreal(roots)].real
        roots = roots[(roots >= -1e-12) & (roots <= dt + 1e-12)]
        crossings.append(t[i] + (roots[0] if roots.size else -c[i] * dt / (c[i + 1] - c[i])))
    if len(crossings) < 2:
        raise RuntimeError("fewer than two zero crossings; lengthen the window")
    half = np.polyfit(np.arange(len(crossings)), crossings, 1)[0]
    return float(2.0 * half)


def run_convergence_study(
    geometry: str = "rod",
    levels=((200, 1e-3), (400, 5e-4)),
    periods: float = 3.0,
    amplitude: float = 1.0,
    annulus=(0.3, 1.0),
) -> ConvergenceResult:
    """Period error of the lowest mode over a ladder of (resolution, dt) pairs.

    For the rod a level is ``(n, dt)``; for the annulus ``(nr, nt, dt)``.
    """
    if geometry == "rod":
        k = rod_eigenvalue()
        exact = 2 * math.pi / k
    elif geometry == "annulus":
        exact = 2 * math.pi / annulus_axisymmetric_frequency(*annulus)
    else:
        raise InvalidParameterError(f"unknown geometry {geometry!r}")
    spec = ProblemSpec()
    periods_out, errors = [], []
    for lev in levels:
        if geometry == "rod":
            n, dt = lev
            ops = assemble(generate_interval(1.0, int(n)))
        else:
            nr, nt, dt = lev
            ops = assemble(generate_annulus(annulus[0], annulus[1], int(nr), int(nt)))
        u0 = eigenmode_profile(ops, amplitude)
        if amplitude == 0:
            # Zero data stay at rest; the error is the deviation from zero.
            st = Stepper(ops, spec, StepperConfig(dt_init=dt))
            state = State(0.0, u0, np.zeros(ops.n), dt)
            for _ in range(int(round(periods * exact / dt))):
                state, _ = st.step(state, dt)
            periods_out.append(math.nan)
            errors.append(float(np.max(np.abs(state.u)) + np.max(np.abs(state.v))))
            continue
        T = measure_period(ops, spec, u0, dt, periods * exact + 0.3 * exact)
        periods_out.append(T)
        errors.append(abs(T - exact) / exact)
    ratios = [a / b if b > 0 else math.nan for a, b in zip(errors[:-1], errors[1:])]
    order = None
    if len(errors) >= 2 and all(e > 0 for e in errors):
        order = float(np.mean(np.log2(ratios)))
    return ConvergenceResult(list(levels), periods_out, errors, ratios, order, exact)


# -- sweeps -------------------------------------------------------------------
SWEEP_DEFAULTS = {
    "n": 100,
    "damping_exponent": 2.0,
    "damping_coef": 1.0,
    "source_exponent": 4.0,
    "source_coef": 1.0,
    "source_region": "boundary",
    "t_end": 20.0,
    "dt": 1e-2,
    "amplitude": 1.0,
}


def rod_scenario(params: dict):
    """Rod with power damping on both parts and a single-term source.

    Returns
    -------
    (ops, spec)
    """
    p = {**SWEEP_DEFAULTS, **params}
    unknown = set(p) - set(SWEEP_DEFAULTS)
    if unknown:
        raise InvalidParameterError(f"unknown sweep parameters: {sorted(unknown)}")
    ops = assemble(generate_interval(1.0, int(p["n"])))
    damp = PowerSum.damping((p["damping_coef"], p["damping_exponent"]))
    src = PowerSum.source((p["source_coef"], p["source_exponent"]))
    zero = PowerSum.source()
    if p["source_region"] == "boundary":
        spec = ProblemSpec(P=damp, Q=damp, f=zero, g=src, N=2)
    elif p["source_region"] == "bulk":
        spec = ProblemSpec(P=damp, Q=damp, f=src, g=zero, N=2)
    else:
        raise InvalidParameterError("source_region must be 'bulk' or 'boundary'")
    return ops, spec


def run_scenario(ops, spec: ProblemSpec, t_end: float, dt: float, amplitude: float = 1.0):
    """Classify, pick data to match the certificate and run the matching experiment.

    Returns
    -------
    (RegimeReport, Verdict)
    """
    cfg = StepperConfig(dt_init=dt)
    report = classify(spec)
    if report.label == "blowup-certified":
        u0, v0, _ = build_negative_energy_data(ops, spec)
        report = classify(spec, ops, u0, v0)
        verdict = run_blowup_experiment(ops, spec, u0, v0, t_end, cfg)
    else:
        u0 = eigenmode_profile(ops, amplitude)
        v0 = np.zeros(ops.n)
        report = classify(spec, ops, u0, v0)
        verdict = run_global_experiment(ops, spec, u0, v0, t_end, cfg, require_certificate=False)
    verdict.trajectory = None
    return report, verdict


def _sweep_row(args):
    idx, params, builder = args
    p = {**SWEEP_DEFAULTS, **params}
    try:
        ops, spec = builder(params)
        report, verdict = run_scenario(ops, spec, float(p["t_end"]), float(p["dt"]), float(p["amplitude"]))
        return idx, params, report, verdict
    except Exception as exc:  # a failing row is recorded, never fatal
        return idx, params, None, Verdict(INCONCLUSIVE, reason=f"{type(exc).__name__}: {exc}")


def expand_grid(grid: dict) -> list:
    """Cartesian product in key order, last key varying fastest."""
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class SweepRow:
    params: dict
    report: object
    verdict: Verdict


def sweep(grid: dict, builder=rod_scenario, jobs: int = 1) -> list:
    """Run every grid point; rows come back in grid order regardless of ``jobs``."""
    points = expand_grid(grid)
    tasks = [(i, p, builder) for i, p in enumerate(points)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_row, tasks))
    else:
        results = [_sweep_row(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    return [SweepRow(p, rep, ver) for _, p, rep, ver in results]


def sweep_table(rows: list) -> tuple[list, list]:
    """Header and string rows for the sweep CSV."""
    pkeys = sorted({k for r in rows for k in r.params})
    rkeys = ["label", "subcritical", "blowup", "global", "energy_sign"]
    header = [f"param.{k}" for k in pkeys] + [f"regime.{k}" for k in rkeys]
    header += ["verdict.kind", "verdict.t_estimate", "max_upsilon"]
    body = []
    for r in rows:
        kv = r.report.key_values() if r.report is not None else {}
        line = [fmt(r.params.get(k)) if k in r.params else "" for k in pkeys]
        line += [kv.get(k, "none") for k in rkeys]
        line += [r.verdict.kind, fmt(r.verdict.t_estimate), fmt(r.verdict.max_upsilon)]
        body.append(line)
    return header, body

"""Connections between connections: 2D fields from paths of 1D profiles.

A pair of minimal 1D connections z-, z+ are the wells of the effective
potential on profile space; a minimal path between them, reparametrized to
the equipartition of the effective weight, assembles into a 2D field
u(x1, x2) = path(x2)(x1) that solves the Euler-Lagrange system of the summed
energy.  The symmetric solver enforces an odd first component in x1 by
projection; the asymmetric solver works in the translation quotient instead,
gauge-fixing translation drift along the path and tracking the per-column
optimal shift.

The module also carries the two stock fixtures: the planar two-well family
(whole line, tails, twin channel connections) and the scalar sine problem on
a strip (pinned boundary, explicit position-dependent density).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import math

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .function_space import (
    EffectivePotentialSpace,
    funnel_profile,
    funnel_project,
    gauge_fix_translations,
    optimal_translation,
)
from .geodesic import SolverOptions, minimize_k_length
from .heteroclinic import ConnectionResult, reparam_equipartition
from .metric import SampledCurve, k_length
from .potentials import check_a4, make_weight, planar_two_well


class ScanWindowError(RuntimeError):
    """No grid abscissa admits the funnel mouth at the requested tolerance."""


@dataclass
class DoubleOptions:
    path_nodes: int = 65
    outer_iters: int = 3
    inner_iters: int = 200
    inner_tol: float = 1e-6
    eps0: float = 0.1
    c_frac: float = 0.5
    use_funnels: bool = True
    n_out: int = 257
    t_max: float = 6.0
    resample_eps: float = 1e-4
    polish: bool = True
    polish_gtol: float = 1e-7
    polish_maxiter: int = 4000
    seed: int = 0


@dataclass
class DoubleConnectionResult:
    space: EffectivePotentialSpace
    mode: str
    u: np.ndarray            # (M, P, n)
    x1: np.ndarray           # (M,)
    x2: np.ndarray           # (P,)
    path: ConnectionResult
    energy: float
    c_minus: float
    c_plus: float
    m_track: np.ndarray | None
    funnels: tuple
    diagnostics: dict


def _scan_side(worst: np.ndarray, grid: np.ndarray, side: int, eps0: float,
               s_start: float | None) -> float:
    span = float(abs(grid[-1] if side > 0 else grid[0]))
    S = s_start if s_start is not None else span / 4.0
    while S <= span + 1e-12:
        if side > 0:
            order = np.flatnonzero((grid >= S) & (grid <= 2.0 * S))
        else:
            order = np.flatnonzero((grid <= -S) & (grid >= -2.0 * S))[::-1]
        for j in order:
            if worst[j] < eps0:
                return float(grid[j])
        S *= 2.0
    raise ScanWindowError(
        f"no funnel mouth on side {side:+d}: some path node stays at least "
        f"{np.min(worst):.3g} away from the well on every admissible column"
    )


def s0_scan(
    node_values: np.ndarray,
    space: EffectivePotentialSpace,
    eps0: float,
    s_start: float | None = None,
) -> tuple[float, float]:
    """Funnel mouths (s-, s+) such that every path node hugs the wells there.

    node_values has shape (P, M, n).  Each side scans the window
    side * [S, 2S] for the abscissa of smallest modulus at which all nodes
    are within eps0 of that side's well, doubling S while the window fits
    in the grid.
    """
    a_minus = np.asarray(space.tail_left, dtype=float).reshape(1, 1, -1)
    a_plus = np.asarray(space.tail_right, dtype=float).reshape(1, 1, -1)
    worst_minus = np.max(np.linalg.norm(node_values - a_minus, axis=2), axis=0)
    worst_plus = np.max(np.linalg.norm(node_values - a_plus, axis=2), axis=0)
    s_minus = _scan_side(worst_minus, space.grid, -1, eps0, s_start)
    s_plus = _scan_side(worst_plus, space.grid, +1, eps0, s_start)
    return s_minus, s_plus


def _fit_funnels(space: EffectivePotentialSpace, node_values: np.ndarray, opts: DoubleOptions):
    """A4 fit at each ambient well plus mouth scan on the current path."""
    p = space.potential
    fits = []
    for well in (space.tail_left, space.tail_right):
        fit = check_a4(p, np.asarray(well, dtype=float))
        if not fit.ok:
            raise ValueError(f"radial growth fit failed at well {well}")
        fits.append(fit)
    s_minus, s_plus = s0_scan(node_values, space, opts.eps0)
    fm = funnel_profile(-1, fits[0].p0, opts.c_frac * fits[0].c0, opts.eps0, s_minus)
    fp = funnel_profile(+1, fits[1].p0, opts.c_frac * fits[1].c0, opts.eps0, s_plus)
    return fm, fp


def _symmetrize_path(space: EffectivePotentialSpace):
    """Node-wise reflection projection for the descent solver."""
    m, n = space.m, space.n_components

    def proj(nodes: np.ndarray) -> np.ndarray:
        out = nodes.copy()
        for k in range(out.shape[0]):
            out[k] = space.symmetrize(out[k].reshape(m, n)).ravel()
        return out

    return proj


def _clamp_path(space: EffectivePotentialSpace, nodes: np.ndarray, funnels) -> np.ndarray:
    """Funnel-project every path node on both sides (entry holds by scan)."""
    a_minus = np.asarray(space.tail_left, dtype=float)
    a_plus = np.asarray(space.tail_right, dtype=float)
    out = nodes.copy()
    for k in range(out.shape[0]):
        gf = space.grid_function(out[k])
        gf = funnel_project(gf, funnels[0], a_minus)
        gf = funnel_project(gf, funnels[1], a_plus)
        out[k] = gf.flatten()
    return out


def _blend_seed(space: EffectivePotentialSpace, p_nodes: int) -> np.ndarray:
    za = space.z_minus.flatten()
    zb = space.z_plus.flatten()
    tau = np.linspace(0.0, 1.0, p_nodes)
    return (1.0 - tau)[:, None] * za[None, :] + tau[:, None] * zb[None, :]


def _polish_field(space, u0, dt, symmetrize, gtol, maxiter):
    """L-BFGS on the discrete 2D energy; end columns and x1 edges stay pinned."""
    m, p, n = u0.shape
    h = space.h
    w1 = np.full(m, h)
    w1[0] *= 0.5
    w1[-1] *= 0.5
    wt = np.full(p, dt)
    wt[0] *= 0.5
    wt[-1] *= 0.5
    col0, col1 = u0[:, 0, :].copy(), u0[:, -1, :].copy()
    row0, row1 = u0[0, :, :].copy(), u0[-1, :, :].copy()

    def pack(x):
        u = x.reshape(m, p, n).copy()
        u[:, 0, :], u[:, -1, :] = col0, col1
        u[0, :, :], u[-1, :, :] = row0, row1
        if symmetrize:
            for k in range(p):
                u[:, k, :] = space.symmetrize(u[:, k, :])
        return u

    def fun(x):
        u = pack(x)
        d2 = np.diff(u, axis=1) / dt
        kin = 0.5 * dt * np.sum(w1[:, None, None] * d2 * d2)
        pot = 0.0
        gpot = np.empty_like(u)
        for k in range(p):
            pot += wt[k] * (space.energy_1d(u[:, k, :]) - space.ref_value)
            gpot[:, k, :] = wt[k] * space.energy_1d_grad(u[:, k, :])
        e = float(kin + pot)
        g = gpot
        flux = w1[:, None, None] * d2
        g[:, :-1, :] -= flux
        g[:, 1:, :] += flux
        if symmetrize:
            for k in range(p):
                g[:, k, :] = space.symmetrize(g[:, k, :])
        g[:, 0, :] = 0.0
        g[:, -1, :] = 0.0
        g[0, :, :] = 0.0
        g[-1, :, :] = 0.0
        return e, g.ravel()

    res = _scipy_minimize(
        fun, u0.ravel(), jac=True, method="L-BFGS-B",
        options={"maxiter": maxiter, "gtol": gtol, "ftol": 1e-18, "maxcor": 20},
    )
    return pack(res.x), int(res.nit)


def _path_energy(space, u, dt):
    """Sum of x2-kinetic and effective-potential terms (trapezoid in x2)."""
    m, p, n = u.shape
    h = space.h
    w1 = np.full(m, h)
    w1[0] *= 0.5
    w1[-1] *= 0.5
    wt = np.full(p, dt)
    wt[0] *= 0.5
    wt[-1] *= 0.5
    d2 = np.diff(u, axis=1) / dt
    kin = 0.5 * dt * np.sum(w1[:, None, None] * d2 * d2)
    pot = sum(wt[k] * (space.energy_1d(u[:, k, :]) - space.ref_value) for k in range(p))
    return float(kin + pot)


def _solve_common(space: EffectivePotentialSpace, opts: DoubleOptions, mode: str):
    if space.z_minus is None or space.z_plus is None:
        raise ValueError("the effective space carries no well profiles")
    gap = space.z_minus.distance_l2(space.z_plus)
    if gap < 1e-8:
        raise ValueError("well profiles coincide; nothing to connect")
    symmetrize = mode == "sym" and space.symmetry == "odd_first"
    wspace = space.weighted_space()
    nodes = _blend_seed(space, opts.path_nodes)
    proj = _symmetrize_path(space) if symmetrize else None
    if proj is not None:
        nodes = proj(nodes)
    funnels = None
    m_track = None
    use_funnels = opts.use_funnels and space.bc == "tails"

    def keff(gf):
        return math.sqrt(2.0 * max(space.effective_potential(gf.values), 0.0))

    zm_flat = space.z_minus.flatten()
    zp_flat = space.z_plus.flatten()
    outer_lk = []
    for _outer in range(opts.outer_iters):
        inner = SolverOptions(
            n_nodes=opts.path_nodes,
            max_iters=opts.inner_iters,
            grad_tol=opts.inner_tol,
            init_nodes=nodes,
            project=proj,
            reparam=None,
        )
        curve, value, trace = minimize_k_length(wspace, zm_flat, zp_flat, inner)
        nodes = curve.nodes
        if mode == "asym":
            gfs = [space.grid_function(v) for v in nodes]
            gfs, _ = gauge_fix_translations(gfs, keff)
            nodes = np.stack([g.flatten() for g in gfs])
            nodes[0], nodes[-1] = zm_flat, zp_flat
        if use_funnels:
            shaped = nodes.reshape(opts.path_nodes, space.m, space.n_components)
            funnels = _fit_funnels(space, shaped, opts)
            nodes = _clamp_path(space, nodes, funnels)
            nodes[0], nodes[-1] = zm_flat, zp_flat
        round_curve = SampledCurve(
            times=np.linspace(0.0, 1.0, nodes.shape[0]), nodes=nodes
        )
        outer_lk.append(k_length(round_curve, wspace, rule="midpoint"))
    path_curve = SampledCurve(times=np.linspace(0.0, 1.0, nodes.shape[0]), nodes=nodes)
    conn = reparam_equipartition(
        path_curve,
        wspace,
        n_samples=opts.n_out,
        t_max=opts.t_max,
        resample=4 * opts.path_nodes,
        resample_eps=opts.resample_eps,
    )
    p_out = conn.curve.n_nodes
    u = np.empty((space.m, p_out, space.n_components))
    for k in range(p_out):
        u[:, k, :] = conn.curve.nodes[k].reshape(space.m, space.n_components)
    u[:, 0, :] = space.z_minus.values
    u[:, -1, :] = space.z_plus.values
    if symmetrize:
        # interpolation weights in the reparametrization are accumulated left
        # to right, which can break antisymmetry in the last bit; project back
        for k in range(p_out):
            u[:, k, :] = space.symmetrize(u[:, k, :])
    dt = float(np.diff(conn.curve.times)[0])
    polish_iters = 0
    if opts.polish:
        u, polish_iters = _polish_field(
            space, u, dt, symmetrize, opts.polish_gtol, opts.polish_maxiter
        )
    energy = _path_energy(space, u, dt)
    diagnostics = {
        "k_length_value": value,
        "solver_status": trace.status,
        "outer_lk": outer_lk,
        "equipartition_defect_reparam": conn.equipartition_defect,
        "window": conn.window,
        "polish_iters": polish_iters,
    }
    c_minus = c_plus = 0.0
    if mode == "asym":
        span = float(space.grid[-1] - space.grid[0])
        gfs = [space.grid_function(u[:, k, :]) for k in range(p_out)]
        fits = [
            optimal_translation(g, space.z_minus, space.z_plus, m_max=0.25 * span, n_scan=129)
            for g in gfs
        ]
        m_track = np.array([f.shift for f in fits])
        tail = max(1, p_out // 10)
        c_minus = float(np.mean(m_track[:tail]))
        c_plus = float(np.mean(m_track[-tail:]))
        diagnostics["m_total_variation"] = float(np.sum(np.abs(np.diff(m_track))))
        diagnostics["m_which"] = np.array([f.which for f in fits])
    return DoubleConnectionResult(
        space=space,
        mode=mode,
        u=u,
        x1=space.grid.copy(),
        x2=conn.curve.times.copy(),
        path=conn,
        energy=energy,
        c_minus=c_minus,
        c_plus=c_plus,
        m_track=m_track,
        funnels=funnels if funnels is not None else (),
        diagnostics=diagnostics,
    )


def solve_symmetric(space: EffectivePotentialSpace, opts: DoubleOptions | None = None):
    """Minimal profile path between the twin connections, symmetry enforced.

    Pipeline: blend seed, descent on the discrete weighted path length with
    node-wise symmetry projection and funnel clamping per outer iteration,
    equipartition reparametrization of the optimal path, assembly into a 2D
    field, and a final local minimization of the discrete 2D energy with the
    end columns pinned.
    """
    return _solve_common(space, opts or DoubleOptions(), "sym")


def solve_asymmetric(space: EffectivePotentialSpace, opts: DoubleOptions | None = None):
    """Profile path solver in the translation quotient (no symmetry).

    Requires quotient mode "translations".  Translation drift is gauge-fixed
    after every outer iteration; the per-column optimal shift m(x2) is
    tracked on the final field, and its end averages estimate the limit
    shifts c-, c+.
    """
    opts = opts or DoubleOptions()
    if space.quotient != "translations":
        raise ValueError("asymmetric solve needs quotient mode 'translations'")
    return _solve_common(space, opts, "asym")


class TranslationSpeedAudit(NamedTuple):
    c_fit: float
    max_ratio: float
    n_used: int


def audit_translation_speed(
    result: DoubleConnectionResult, floor_frac: float = 1e-6
) -> TranslationSpeedAudit:
    """Fit |dm per step| <= C * kappa(column) * L2 step on the tracked shifts.

    C comes from a least-squares fit through the origin over steps whose
    budget kappa * step clears a floor (a fraction of the largest budget);
    the max ratio over those steps is reported alongside.
    """
    if result.m_track is None:
        raise ValueError("no shift track; run the asymmetric solver")
    space = result.space
    u = result.u
    p = u.shape[1]
    dm = np.abs(np.diff(result.m_track))
    budget = np.empty(p - 1)
    for k in range(p - 1):
        mid = 0.5 * (u[:, k, :] + u[:, k + 1, :])
        kap = space.kappa(mid)
        d = space.grid_function(u[:, k + 1, :]).distance_l2(u[:, k, :])
        budget[k] = kap * d
    floor = floor_frac * max(float(np.max(budget)), 1e-300)
    used = budget > floor
    if not np.any(used):
        return TranslationSpeedAudit(0.0, 0.0, 0)
    c_fit = float(np.sum(dm[used] * budget[used]) / np.sum(budget[used] ** 2))
    max_ratio = float(np.max(dm[used] / budget[used]))
    return TranslationSpeedAudit(c_fit, max_ratio, int(np.sum(used)))


class DoubleReport(NamedTuple):
    residual_max: float
    residual_l2: float
    equip_defect: float
    energy_direct: float
    energy_path: float
    x2_gap_minus_l2: float
    x2_gap_plus_l2: float
    x2_gap_minus_linf: float
    x2_gap_plus_linf: float
    x1_funnel_violation: float
    interior_margin: int


def assemble_and_verify(result: DoubleConnectionResult, margin: int = 5) -> DoubleReport:
    """Residual and limit checks on the assembled field.

    The interior residual is the 5-point Laplacian minus the density
    gradient, evaluated away from a boundary margin.  The energy is computed
    once by direct 2D quadrature and once as the profile-path action; the
    two must agree to rounding.  Limit gaps compare the end columns against
    the stored well profiles (shifted by the tracked limits in quotient
    mode) and, in tails mode, the off-window excess against the funnel
    envelopes.
    """
    space = result.space
    u = result.u
    m, p, n = u.shape
    h = space.h
    dt = float(np.diff(result.x2)[0])
    lap = np.zeros_like(u)
    lap[1:-1, :, :] += (u[2:, :, :] - 2 * u[1:-1, :, :] + u[:-2, :, :]) / h**2
    lap[:, 1:-1, :] += (u[:, 2:, :] - 2 * u[:, 1:-1, :] + u[:, :-2, :]) / dt**2
    gw = np.empty_like(u)
    for k in range(p):
        gw[:, k, :] = space._density_grads(u[:, k, :])
    res = lap - gw
    inner = res[margin:-margin, margin:-margin, :]
    residual_max = float(np.max(np.linalg.norm(inner, axis=2)))
    residual_l2 = float(
        np.sqrt(np.sum(inner**2) * h * dt)
    )
    # energy two ways
    energy_path = _path_energy(space, u, dt)
    w1 = np.full(m, h)
    w1[0] *= 0.5
    w1[-1] *= 0.5
    wt = np.full(p, dt)
    wt[0] *= 0.5
    wt[-1] *= 0.5
    d1 = np.diff(u, axis=0) / h
    d2 = np.diff(u, axis=1) / dt
    kin1 = 0.5 * h * np.sum(wt[None, :, None] * d1 * d1)
    kin2 = 0.5 * dt * np.sum(w1[:, None, None] * d2 * d2)
    dens = np.empty((m, p))
    for k in range(p):
        dens[:, k] = space._density_values(u[:, k, :])
    pot = np.sum(w1[:, None] * wt[None, :] * dens) - space.ref_value * np.sum(wt)
    energy_direct = float(kin1 + kin2 + pot)
    # x2 equipartition defect at segment midpoints
    defect = 0.0
    for k in range(p - 1):
        mid = 0.5 * (u[:, k, :] + u[:, k + 1, :])
        kinetic = 0.5 * np.sum(w1[:, None] * ((u[:, k + 1, :] - u[:, k, :]) / dt) ** 2)
        weff = space.effective_potential(mid)
        defect = max(defect, abs(kinetic - weff))
    zm, zp = space.z_minus, space.z_plus
    if result.mode == "asym":
        zm = zm.translate(result.c_minus)
        zp = zp.translate(result.c_plus)
    gm = space.grid_function(u[:, 0, :])
    gp = space.grid_function(u[:, -1, :])
    gap_m_l2 = gm.distance_l2(zm)
    gap_p_l2 = gp.distance_l2(zp)
    gap_m_inf = float(np.max(np.abs(gm.values - zm.values)))
    gap_p_inf = float(np.max(np.abs(gp.values - zp.values)))
    violation = 0.0
    if result.funnels:
        fm, fp = result.funnels
        a_minus = np.asarray(space.tail_left, dtype=float)
        a_plus = np.asarray(space.tail_right, dtype=float)
        for k in range(p):
            vals = u[:, k, :]
            rm = np.linalg.norm(vals - a_minus[None, :], axis=1)
            rp = np.linalg.norm(vals - a_plus[None, :], axis=1)
            left = space.grid <= fm.s0
            right = space.grid >= fp.s0
            if np.any(left):
                violation = max(violation, float(np.max(rm[left] - fm.envelope(space.grid[left]))))
            if np.any(right):
                violation = max(violation, float(np.max(rp[right] - fp.envelope(space.grid[right]))))
    return DoubleReport(
        residual_max=residual_max,
        residual_l2=residual_l2,
        equip_defect=float(defect),
        energy_direct=energy_direct,
        energy_path=energy_path,
        x2_gap_minus_l2=float(gap_m_l2),
        x2_gap_plus_l2=float(gap_p_l2),
        x2_gap_minus_linf=gap_m_inf,
        x2_gap_plus_linf=gap_p_inf,
        x1_funnel_violation=violation,
        interior_margin=margin,
    )


# ---------------------------------------------------------------------------
# Fixtures


def planar_effective_space(
    beta: float = 1.0,
    kappa: float = 1.0,
    s_max: float = 8.0,
    m: int = 401,
    n_geodesic: int = 201,
    symmetry: str = "odd_first",
    quotient: str = "none",
) -> EffectivePotentialSpace:
    """Effective space for the planar two-well family.

    The twin 1D connections are computed by the geodesic pipeline seeded
    through the upper channel, equipartition-reparametrized onto the profile
    window, mirrored in the second component, and relaxed to discrete
    minimizers.  The reference value is their common discrete action.
    """
    p = planar_two_well(beta=beta, kappa=kappa)
    wsp = make_weight(p)
    via = (np.array([0.0, math.sqrt(kappa)]),)
    curve, _, _ = minimize_k_length(
        wsp, p.wells[0], p.wells[1],
        SolverOptions(n_nodes=n_geodesic, via_points=via, max_iters=2000, grad_tol=1e-10),
    )
    conn = reparam_equipartition(
        curve, wsp, n_samples=m, t_max=s_max, resample=4 * n_geodesic, resample_eps=1e-9
    )
    grid = conn.curve.times.copy()
    space = EffectivePotentialSpace(
        grid=grid,
        n_components=2,
        bc="tails",
        potential=p,
        tail_left=p.wells[0],
        tail_right=p.wells[1],
        symmetry=symmetry,
        quotient=quotient,
        lam=p.hessian_lower_bound,
    )
    vals = conn.curve.nodes.reshape(grid.size, 2)
    vals = space.symmetrize(vals)
    vals[0], vals[-1] = p.wells[0], p.wells[1]
    saved_sym = space.symmetry
    space.symmetry = "odd_first"
    z_plus_vals, e_plus = space.relax_profile(vals)
    space.symmetry = saved_sym
    z_minus_vals = z_plus_vals.copy()
    z_minus_vals[:, 1] *= -1.0
    space.ref_value = e_plus
    space.z_plus = space.grid_function(z_plus_vals)
    space.z_minus = space.grid_function(z_minus_vals)
    return space


def sin_example_space(m: int = 257, relax: bool = True) -> EffectivePotentialSpace:
    """Scalar strip fixture: density -u^2/2 + (u^2 - sin^2 y)^2 on [0, pi].

    The profile wells are +-sin with pinned zero boundary values; the
    density minimum over profiles is zero, attained there, so the reference
    is just the discrete well energy.
    """
    grid = np.linspace(0.0, math.pi, m)

    def density(s, vals):
        u = vals[:, 0]
        sin2 = np.sin(s) ** 2
        return -0.5 * u * u + (u * u - sin2) ** 2

    def density_grad(s, vals):
        u = vals[:, 0]
        sin2 = np.sin(s) ** 2
        return (-u + 4.0 * u * (u * u - sin2))[:, None]

    space = EffectivePotentialSpace(
        grid=grid,
        n_components=1,
        bc="fixed",
        density=density,
        density_grad=density_grad,
        symmetry="none",
        quotient="none",
        lam=-5.0,
    )
    vals = np.sin(grid)[:, None]
    if relax:
        z_plus_vals, e_plus = space.relax_profile(vals)
    else:
        z_plus_vals, e_plus = vals, space.energy_1d(vals)
    space.ref_value = e_plus
    space.z_plus = space.grid_function(z_plus_vals)
    space.z_minus = space.grid_function(-z_plus_vals)
    return space

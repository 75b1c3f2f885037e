"""Potentials with zero-level wells, derived weights, and hypothesis checks.

A potential is a nonnegative C^2 function vanishing exactly on a finite well
set.  The induced weight is K = sqrt(2 W); geodesics of K realize
minimal-action connections between wells.  Three built-in families cover the
test surface: a scalar double well, a scalar triple well whose middle well
breaks the strict triangle inequality, and a planar two-well family whose
minimizing connections come in symmetric pairs.

The check_* helpers audit, on sampled grids, the structural hypotheses the
method relies on: a radial lower envelope with divergent integral, the
radial growth exponent at a well, and the strict triangle inequality between
well distances.  They report margins; they are estimates, not proofs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .metric import EuclideanSpace, WeightedSpace


class WellRefinementError(RuntimeError):
    pass


@dataclass(frozen=True)
class Potential:
    """Pointwise potential data: evaluation, gradient, wells, convexity bound.

    ``hessian_lower_bound`` is a number lam with Hess W >= lam * Id on the
    region of interest (user-declared; the built-ins compute or state it).
    Batch callables are optional vectorized forms, shape (k, dim).
    """

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    wells: tuple
    hessian_lower_bound: float
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    value_many: Callable[[np.ndarray], np.ndarray] | None = None
    gradient_many: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "potential"

    def values_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.value_many is not None:
            return np.asarray(self.value_many(pts), dtype=float)
        return np.array([self.value(p) for p in pts], dtype=float)

    def gradients_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.gradient_many is not None:
            return np.asarray(self.gradient_many(pts), dtype=float)
        return np.array([self.gradient(p) for p in pts], dtype=float)

    def hessian_at(self, x: np.ndarray, fd_step: float = 1e-6) -> np.ndarray:
        if self.hessian is not None:
            return np.asarray(self.hessian(x), dtype=float)
        x = np.asarray(x, dtype=float)
        h = np.empty((self.dim, self.dim))
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = fd_step
            h[:, j] = (self.gradient(x + e) - self.gradient(x - e)) / (2 * fd_step)
        return 0.5 * (h + h.T)


def double_well() -> Potential:
    """W(u) = (1 - u^2)^2 / 2 with wells at -1 and 1."""

    def value(u):
        q = 1.0 - u[0] * u[0]
        return 0.5 * q * q

    def grad(u):
        return np.array([2.0 * u[0] * (u[0] * u[0] - 1.0)])

    def hess(u):
        return np.array([[6.0 * u[0] * u[0] - 2.0]])

    def value_many(pts):
        q = 1.0 - pts[:, 0] ** 2
        return 0.5 * q * q

    def grad_many(pts):
        u = pts[:, 0]
        return (2.0 * u * (u * u - 1.0))[:, None]

    return Potential(
        dim=1,
        value=value,
        gradient=grad,
        hessian=hess,
        value_many=value_many,
        gradient_many=grad_many,
        wells=(np.array([-1.0]), np.array([1.0])),
        hessian_lower_bound=-2.0,
        name="double_well",
    )


def triple_well() -> Potential:
    """W(u) = u^2 (1 - u^2)^2 / 2; the middle well sits on every geodesic.

    The two outer distances add up exactly to the end-to-end distance, so
    this family is the stock fixture for a failing strict triangle
    inequality.
    """

    def value(u):
        q = 1.0 - u[0] * u[0]
        return 0.5 * u[0] * u[0] * q * q

    def grad(u):
        x = u[0]
        return np.array([x * (1.0 - x * x) * (1.0 - 3.0 * x * x)])

    def hess(u):
        x2 = u[0] * u[0]
        return np.array([[1.0 - 12.0 * x2 + 15.0 * x2 * x2]])

    def value_many(pts):
        x = pts[:, 0]
        q = 1.0 - x * x
        return 0.5 * x * x * q * q

    def grad_many(pts):
        x = pts[:, 0]
        return (x * (1.0 - x * x) * (1.0 - 3.0 * x * x))[:, None]

    return Potential(
        dim=1,
        value=value,
        gradient=grad,
        hessian=hess,
        value_many=value_many,
        gradient_many=grad_many,
        wells=(np.array([-1.0]), np.array([0.0]), np.array([1.0])),
        hessian_lower_bound=-1.4,
        name="triple_well",
    )


def planar_two_well(beta: float = 1.0, kappa: float = 1.0) -> Potential:
    """W(u1,u2) = (u1^2-1)^2 + beta (u2^2 - kappa (1-u1^2))^2.

    Wells at (-1, 0) and (1, 0); W is even in u1 and in u2.  For beta and
    kappa of order one the minimizing connections leave the u1-axis and come
    as a reflected pair through positive and negative u2 (the straight axis
    path costs sqrt(2 (1+beta kappa^2)) * 4/3, the curved channel less).
    The wells are quartically flat in the u2 direction.
    """

    def aux(u):
        return u[1] * u[1] - kappa * (1.0 - u[0] * u[0])

    def value(u):
        q = u[0] * u[0] - 1.0
        return q * q + beta * aux(u) ** 2

    def grad(u):
        a = aux(u)
        return np.array(
            [
                4.0 * u[0] * (u[0] * u[0] - 1.0) + 4.0 * beta * kappa * u[0] * a,
                4.0 * beta * u[1] * a,
            ]
        )

    def hess(u):
        a = aux(u)
        h11 = 12.0 * u[0] * u[0] - 4.0 + 4.0 * beta * kappa * a + 8.0 * beta * kappa**2 * u[0] * u[0]
        h12 = 8.0 * beta * kappa * u[0] * u[1]
        h22 = 4.0 * beta * a + 8.0 * beta * u[1] * u[1]
        return np.array([[h11, h12], [h12, h22]])

    def value_many(pts):
        q = pts[:, 0] ** 2 - 1.0
        a = pts[:, 1] ** 2 - kappa * (1.0 - pts[:, 0] ** 2)
        return q * q + beta * a * a

    def grad_many(pts):
        u1, u2 = pts[:, 0], pts[:, 1]
        a = u2 * u2 - kappa * (1.0 - u1 * u1)
        g = np.empty_like(pts)
        g[:, 0] = 4.0 * u1 * (u1 * u1 - 1.0) + 4.0 * beta * kappa * u1 * a
        g[:, 1] = 4.0 * beta * u2 * a
        return g

    # Sampled convexity bound over the working box; the Hessian is polynomial
    # so a moderate grid is adequate for a declared bound.
    xs = np.linspace(-1.6, 1.6, 33)
    lam = np.inf
    for u1 in xs:
        for u2 in xs:
            ev = np.linalg.eigvalsh(hess(np.array([u1, u2])))
            lam = min(lam, ev[0])

    return Potential(
        dim=2,
        value=value,
        gradient=grad,
        hessian=hess,
        value_many=value_many,
        gradient_many=grad_many,
        wells=(np.array([-1.0, 0.0]), np.array([1.0, 0.0])),
        hessian_lower_bound=float(lam),
        name="planar_two_well",
    )


def make_weight(p: Potential, grad_floor: float = 1e-12) -> WeightedSpace:
    """Weighted space with weight sqrt(2 W) over flat R^dim.

    Raises if the potential evaluates negative (beyond roundoff) anywhere it
    is sampled.  The weight gradient is grad W / sqrt(2 W), zeroed where W
    is below the floor; the descent solver skips such segments anyway.
    """

    def _vals(pts):
        v = p.values_at(pts)
        bad = v < -1e-12
        if np.any(bad):
            i = int(np.argmin(v))
            raise ValueError(
                f"potential {p.name} is negative ({v[i]:.3e}) at {pts[i]}"
            )
        return np.maximum(v, 0.0)

    def weight(x):
        return float(np.sqrt(2.0 * _vals(np.atleast_2d(x))[0]))

    def weight_batch(pts):
        return np.sqrt(2.0 * _vals(pts))

    def weight_grad(x):
        x = np.asarray(x, dtype=float)
        k = weight(x)
        if k < grad_floor:
            return np.zeros(p.dim)
        return p.gradient(x) / k

    def weight_grad_batch(pts):
        k = weight_batch(pts)
        g = p.gradients_at(pts)
        safe = np.maximum(k, grad_floor)
        out = g / safe[:, None]
        out[k < grad_floor] = 0.0
        return out

    return WeightedSpace(
        space=EuclideanSpace(p.dim),
        weight=weight,
        zero_set=tuple(np.asarray(w, dtype=float) for w in p.wells),
        weight_grad=weight_grad,
        weight_batch=weight_batch,
        weight_grad_batch=weight_grad_batch,
    )


def refine_wells(
    p: Potential,
    guesses: Sequence[np.ndarray],
    tol: float = 1e-10,
    max_iters: int = 100,
    dedup_tol: float = 1e-6,
) -> list[np.ndarray]:
    """Polish well guesses by damped Newton on the gradient, then dedupe.

    Convergence means |grad W| < tol and W < tol^2 at the iterate; failing
    that after ``max_iters`` steps raises WellRefinementError.
    """
    out: list[np.ndarray] = []
    for guess in guesses:
        x = np.asarray(guess, dtype=float).copy()
        ok = False
        for _ in range(max_iters):
            g = p.gradient(x)
            if np.linalg.norm(g) < tol and p.value(x) < tol * tol:
                ok = True
                break
            h = p.hessian_at(x)
            try:
                step = np.linalg.solve(h, -g)
            except np.linalg.LinAlgError:
                step = -g
            t = 1.0
            gn = np.linalg.norm(g)
            for _ in range(30):
                if np.linalg.norm(p.gradient(x + t * step)) < gn:
                    break
                t *= 0.5
            x = x + t * step
        else:
            g = p.gradient(x)
            if np.linalg.norm(g) < tol and p.value(x) < tol * tol:
                ok = True
        if not ok:
            raise WellRefinementError(
                f"well guess {np.asarray(guess)} did not converge in {max_iters} iterations"
            )
        if not any(np.linalg.norm(x - w) < dedup_tol for w in out):
            out.append(x)
    return out


@dataclass(frozen=True)
class LowerEnvelope:
    """Radial envelope k(t) with W(x) >= k(dist(x, wells))^2 expected.

    ``radius_schedule`` drives the divergence heuristic on the partial
    integrals of k; ``increment_floor`` is the smallest acceptable growth of
    the partial integral over the last schedule step.
    """

    k: Callable[[np.ndarray], np.ndarray]
    radius_schedule: tuple = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    increment_floor: float = 1e-3


class H3aReport(NamedTuple):
    ok: bool
    worst_margin: float
    worst_point: np.ndarray
    partial_integrals: np.ndarray
    divergent: bool


def _unit_directions(dim: int, count: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rng = np.random.default_rng(0)
    v = rng.normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_h3a(
    p: Potential,
    env: LowerEnvelope,
    radii: np.ndarray | None = None,
    n_directions: int = 16,
) -> H3aReport:
    """Sampled audit of the radial envelope bound and its divergent integral.

    Margins W(x) - k(d(x, wells))^2 are evaluated on rays from each well;
    the worst one is reported.  Partial integrals of k over the radius
    schedule must keep growing by at least the declared floor for the
    divergence flag to pass.
    """
    if radii is None:
        radii = np.concatenate([np.linspace(0.02, 1.0, 50), np.linspace(1.1, 3.0, 20)])
    dirs = _unit_directions(p.dim, n_directions)
    wells = np.stack(p.wells)
    worst = np.inf
    worst_pt = wells[0]
    for w in p.wells:
        for d in dirs:
            pts = w[None, :] + radii[:, None] * d[None, :]
            dist = np.min(
                np.linalg.norm(pts[:, None, :] - wells[None, :, :], axis=2), axis=1
            )
            margins = p.values_at(pts) - np.asarray(env.k(dist)) ** 2
            i = int(np.argmin(margins))
            if margins[i] < worst:
                worst = float(margins[i])
                worst_pt = pts[i]
    partials = []
    for rmax in env.radius_schedule:
        grid = np.linspace(0.0, rmax, 2001)
        partials.append(float(np.trapezoid(np.asarray(env.k(grid)), grid)))
    partials = np.asarray(partials)
    increments = np.diff(partials)
    divergent = bool(increments.size > 0 and increments[-1] >= env.increment_floor)
    return H3aReport(
        ok=bool(worst >= 0.0),
        worst_margin=worst,
        worst_point=worst_pt,
        partial_integrals=partials,
        divergent=divergent,
    )


class A4Fit(NamedTuple):
    ok: bool
    p0: float
    c0: float
    slope: float
    worst_violation: float


def check_a4(
    p: Potential,
    well: np.ndarray,
    radii: np.ndarray | None = None,
    n_directions: int = 64,
) -> A4Fit:
    """Fit grad W . (x - a) >= c0 |x - a|^p0 on a sampled ball around a well.

    The exponent comes from a log-log regression of the directional minimum
    of the radial derivative term against the radius, snapped to a nearby
    integer when within 0.1, then clipped to [2, 6).  c0 is the largest
    constant compatible with every sample at that exponent.  A nonpositive
    sample anywhere reports ok=False with the worst value.
    """
    well = np.asarray(well, dtype=float)
    if radii is None:
        radii = np.geomspace(1e-3, 0.1, 25)
    dirs = _unit_directions(p.dim, n_directions)
    gmin = np.empty(radii.size)
    worst = np.inf
    for i, r in enumerate(radii):
        pts = well[None, :] + r * dirs
        g = np.einsum("ij,ij->i", p.gradients_at(pts), pts - well[None, :])
        worst = min(worst, float(np.min(g)))
        gmin[i] = np.min(g)
    if worst <= 0.0:
        return A4Fit(ok=False, p0=np.nan, c0=0.0, slope=np.nan, worst_violation=worst)
    slope, _ = np.polyfit(np.log(radii), np.log(gmin), 1)
    p0 = float(slope)
    nearest = round(p0)
    if abs(p0 - nearest) < 0.1:
        p0 = float(nearest)
    p0 = min(max(p0, 2.0), 6.0 - 1e-9)
    if slope >= 6.0:
        return A4Fit(ok=False, p0=p0, c0=0.0, slope=float(slope), worst_violation=worst)
    c0 = float(np.min(gmin / radii**p0))
    return A4Fit(ok=True, p0=p0, c0=c0, slope=float(slope), worst_violation=worst)


class StiReport(NamedTuple):
    ok: bool
    margins: tuple
    min_margin: float
    direct: float


def check_sti(
    p: Potential,
    minus: np.ndarray,
    plus: np.ndarray,
    tol: float = 1e-3,
    n_nodes: int = 201,
) -> StiReport:
    """Strict-triangle-inequality margins through each intermediate well.

    For every well a besides the endpoints, compares the geodesic upper
    bounds d(minus, a) + d(a, plus) against d(minus, plus).  Margins within
    ``tol`` of zero (or negative) mark the well as breaking strictness.
    All three distances are solver upper bounds, so the margins are
    estimates.
    """
    from .geodesic import SolverOptions, minimize_k_length

    wspace = make_weight(p)
    opts = SolverOptions(n_nodes=n_nodes)
    minus = np.asarray(minus, dtype=float)
    plus = np.asarray(plus, dtype=float)

    def dist(a, b):
        _, val, _ = minimize_k_length(wspace, a, b, opts)
        return val

    direct = dist(minus, plus)
    margins = []
    for w in p.wells:
        w = np.asarray(w, dtype=float)
        if np.linalg.norm(w - minus) < 1e-9 or np.linalg.norm(w - plus) < 1e-9:
            continue
        via = dist(minus, w) + dist(w, plus)
        margins.append((w, via - direct))
    if not margins:
        return StiReport(ok=True, margins=(), min_margin=np.inf, direct=direct)
    min_margin = min(m for _, m in margins)
    return StiReport(
        ok=bool(min_margin > tol),
        margins=tuple(margins),
        min_margin=float(min_margin),
        direct=direct,
    )

"""A planar weight whose minimal connection escapes to infinity.

The weight is K = |grad f| for f(x, y) = h(y)(2G(inf) - G(|x|))
+ (1 - h(y)) G(|x|), where G is the cumulative integral of a positive g
with a convergent tail and h is a raised-cosine bump on [-1, 1].  K
vanishes exactly at (0, -1), (0, 0), (0, 1); the endpoints of interest are
P-+ = (0, -+1).  Any admissible curve crosses {y = 0} somewhere, and
splitting it there gives the length bound 2(2G(inf) - G(|x0|)), which is
strictly above the infimum 2G(inf) for every finite crossing abscissa.
Three-leg candidates that detour to x = x_n before crossing approach the
infimum as x_n grows, so no minimizer exists.

The default g(s) = s^(-2) beyond 1 (extended linearly below) keeps every
reference value in closed form: G(t) = t^2/2 then 3/2 - 1/t, G(inf) = 3/2,
infimum 3.  Custom g are integrated numerically with a quadrature tail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .geodesic import SolverOptions, minimize_k_length
from .metric import EuclideanSpace, WeightedSpace

P_MINUS = np.array([0.0, -1.0])
P_PLUS = np.array([0.0, 1.0])


class DivergentTailError(ValueError):
    """The supplied g has a divergent tail integral; G(inf) does not exist."""


class CounterexampleWeight:
    """Weight K = |grad f| on the plane, zero exactly at three axis points.

    power selects the closed-form family g(s) = s^(-power) on [1, inf),
    g(s) = s below 1 (power must exceed 1 for a convergent tail).  A custom
    callable g overrides the family; its cumulative integral is tabulated
    on an adaptive grid with a quadrature tail, and divergence is detected
    by stalling partial sums.
    """

    def __init__(self, power: float = 2.0, g: Callable | None = None,
                 table_cut: float = 1e4):
        self.power = float(power)
        self.g_custom = g
        if g is None:
            if self.power <= 1.0:
                raise DivergentTailError(
                    f"g(s) = s^(-{self.power:g}) has a divergent tail integral"
                )
            self._table = None
            self._g_inf = 0.5 + 1.0 / (self.power - 1.0)
        else:
            s_pts = np.unique(np.concatenate([
                np.linspace(0.0, 1.0, 257),
                np.geomspace(1.0, table_cut, 1024),
            ]))
            vals = np.asarray([float(g(s)) for s in s_pts])
            if np.any(vals < 0.0):
                raise ValueError("g must be nonnegative")
            cumulative = np.concatenate([
                [0.0], np.cumsum(0.5 * (vals[:-1] + vals[1:]) * np.diff(s_pts))
            ])
            tail, increments = 0.0, []
            lo = table_cut
            for _ in range(24):
                inc = integrate.quad(g, lo, 2.0 * lo, limit=200)[0]
                tail += inc
                increments.append(inc)
                lo *= 2.0
            if increments[-1] > 1e-10 * max(tail, 1.0) + 1e-14:
                raise DivergentTailError(
                    "partial integrals of g keep growing; tail does not converge"
                )
            self._table = (s_pts, cumulative)
            self._g_inf = float(cumulative[-1] + tail)

    # -- scalar building blocks -------------------------------------------

    def g(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        if self.g_custom is not None:
            flat = np.atleast_1d(s)
            out = np.asarray([float(self.g_custom(v)) for v in flat])
            return out.reshape(s.shape) if s.shape else float(out[0])
        out = np.atleast_1d(s).copy()
        far = out > 1.0
        out[far] = out[far] ** (-self.power)
        return out.reshape(s.shape) if s.shape else float(out[0])

    def big_g(self, t):
        """Cumulative integral G(t) = int_0^t g."""
        t = np.abs(np.asarray(t, dtype=float))
        if self._table is not None:
            s_pts, cumulative = self._table
            inside = np.interp(t, s_pts, cumulative)
            # beyond the table: fall back on quadrature (rare, small tail)
            out = np.atleast_1d(inside).copy()
            far = np.atleast_1d(t) > s_pts[-1]
            for i in np.flatnonzero(far):
                out[i] = cumulative[-1] + integrate.quad(
                    self.g_custom, s_pts[-1], float(np.atleast_1d(t)[i]), limit=200
                )[0]
            return out.reshape(t.shape) if t.shape else float(out[0])
        p = self.power
        out = np.atleast_1d(t).astype(float)
        far = out > 1.0
        out[far] = 0.5 + (1.0 - out[far] ** (1.0 - p)) / (p - 1.0)
        out[~far] = 0.5 * out[~far] ** 2
        return out.reshape(t.shape) if t.shape else float(out[0])

    @property
    def g_infinity(self) -> float:
        return self._g_inf

    @property
    def infimum(self) -> float:
        """The unattained connection cost 2 G(inf)."""
        return 2.0 * self._g_inf

    @staticmethod
    def bump(y):
        y = np.asarray(y, dtype=float)
        out = np.where(np.abs(y) <= 1.0, 0.5 * (1.0 + np.cos(np.pi * y)), 0.0)
        return out if y.shape else float(out)

    @staticmethod
    def bump_deriv(y):
        # strict mask: sin(pi) is not exactly zero in floats, and the weight
        # must vanish exactly at (0, +-1)
        y = np.asarray(y, dtype=float)
        out = np.where(np.abs(y) < 1.0, -0.5 * np.pi * np.sin(np.pi * y), 0.0)
        return out if y.shape else float(out)

    @staticmethod
    def bump_second(y):
        y = np.asarray(y, dtype=float)
        out = np.where(np.abs(y) <= 1.0, -0.5 * np.pi**2 * np.cos(np.pi * y), 0.0)
        return out if y.shape else float(out)

    def _g_deriv(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        if self.g_custom is not None:
            e = 1e-6
            return (self.g(s + e) - self.g(np.maximum(s - e, 0.0))) / (2 * e)
        out = np.ones_like(np.atleast_1d(s))
        far = np.atleast_1d(s) >= 1.0
        out[far] = -self.power * np.atleast_1d(s)[far] ** (-self.power - 1.0)
        return out.reshape(s.shape) if s.shape else float(out[0])

    # -- the construction --------------------------------------------------

    def f(self, x, y):
        x = np.asarray(x, dtype=float)
        h = self.bump(y)
        gg = self.big_g(x)
        out = h * (2.0 * self._g_inf - gg) + (1.0 - h) * gg
        return out if getattr(out, "shape", ()) else float(out)

    def grad_f(self, x, y):
        """Closed-form (df/dx, df/dy)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        h = self.bump(y)
        fx = self.g(x) * np.sign(x) * (1.0 - 2.0 * h)
        fy = 2.0 * self.bump_deriv(y) * (self._g_inf - self.big_g(x))
        return fx, fy

    def k(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        fx, fy = self.grad_f(pts[:, 0], pts[:, 1])
        out = np.hypot(fx, fy)
        return float(out[0]) if single else out

    def k_grad(self, pts):
        """Gradient of K where K > 0 (zero vector on the zero set)."""
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        h = self.bump(y)
        hp = self.bump_deriv(y)
        hpp = self.bump_second(y)
        g = self.g(x)
        gp = self._g_deriv(x)
        gap = self._g_inf - self.big_g(x)
        sx = np.sign(x)
        fx = g * sx * (1.0 - 2.0 * h)
        fy = 2.0 * hp * gap
        k = np.hypot(fx, fy)
        dfx_dx = gp * (1.0 - 2.0 * h)
        dfx_dy = -2.0 * hp * g * sx
        dfy_dx = -2.0 * hp * g * sx
        dfy_dy = 2.0 * hpp * gap
        with np.errstate(invalid="ignore", divide="ignore"):
            kx = np.where(k > 0.0, (fx * dfx_dx + fy * dfy_dx) / k, 0.0)
            ky = np.where(k > 0.0, (fx * dfx_dy + fy * dfy_dy) / k, 0.0)
        out = np.stack([kx, ky], axis=1)
        return out[0] if single else out

    def weighted_space(self) -> WeightedSpace:
        return WeightedSpace(
            space=EuclideanSpace(2),
            weight=lambda p: self.k(p),
            zero_set=(np.array([0.0, -1.0]), np.array([0.0, 0.0]),
                      np.array([0.0, 1.0])),
            weight_grad=lambda p: self.k_grad(p),
            weight_batch=lambda p: self.k(p),
            weight_grad_batch=lambda p: self.k_grad(p),
        )


def crossing_lower_bound(x0: float, w: CounterexampleWeight) -> float:
    """Length bound 2(2G(inf) - G(|x0|)) for curves crossing {y=0} at x0.

    Strictly above the infimum 2G(inf) for every finite x0: splitting a
    P- to P+ curve at the crossing and using length >= |f variation| on
    each piece gives 2 f(x0, 0) - f(P+) - f(P-).
    """
    return 2.0 * (2.0 * w.g_infinity - w.big_g(abs(x0)))


def _leg_quad(w: CounterexampleWeight, a: np.ndarray, b: np.ndarray) -> float:
    """Adaptive quadrature of K along the straight segment from a to b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    span = float(np.linalg.norm(b - a))

    def integrand(t):
        return w.k(a + t * (b - a)) * span

    val, _ = integrate.quad(integrand, 0.0, 1.0, limit=400,
                            points=_quad_breaks(a, b))
    return val


def _quad_breaks(a, b):
    """Interior break locations where K has kinks (|x| = 1, y in {-1, 0, 1}).

    The half-levels are included as well: the gradient component parallel
    to the axis changes sign there, which slows the adaptive rule down even
    though K itself stays smooth.
    """
    breaks = []
    for coord, targets in ((0, (-1.0, 1.0)), (1, (-1.0, -0.5, 0.0, 0.5, 1.0))):
        d = b[coord] - a[coord]
        if d == 0.0:
            continue
        for target in targets:
            t = (target - a[coord]) / d
            if 1e-12 < t < 1.0 - 1e-12:
                breaks.append(t)
    return sorted(breaks) or None


def candidate_length(n_index: int, w: CounterexampleWeight,
                     x_n: float | None = None, legs: bool = False):
    """Weighted length of the three-leg candidate through x = 2**n_index.

    Top horizontal P+ to (x_n, 1), vertical drop to (x_n, -1), bottom
    horizontal back to P-; each leg integrated adaptively.  With legs=True
    the per-leg breakdown is returned alongside the total.
    """
    if x_n is None:
        x_n = 2.0 ** n_index
    top = _leg_quad(w, P_PLUS, np.array([x_n, 1.0]))
    vertical = _leg_quad(w, np.array([x_n, 1.0]), np.array([x_n, -1.0]))
    bottom = _leg_quad(w, np.array([x_n, -1.0]), P_MINUS)
    total = top + vertical + bottom
    if legs:
        return total, {"top": top, "vertical": vertical, "bottom": bottom,
                       "x_n": x_n}
    return total


def dense_polyline_length(nodes: np.ndarray, w: CounterexampleWeight) -> float:
    """Adaptive-quadrature weighted length of a polyline.

    Each straight segment is integrated with the kink-aware rule, so the
    value is the continuous K-length of the polyline itself (no node-rule
    bias); lower bounds derived from the variation of f apply to it.
    """
    nodes = np.asarray(nodes, dtype=float)
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        if float(np.linalg.norm(b - a)) == 0.0:
            continue
        total += _leg_quad(w, a, b)
    return total


def crossing_abscissas(nodes: np.ndarray, tol: float = 1e-12) -> list[float]:
    """x-locations where the polyline crosses {y = 0}."""
    nodes = np.asarray(nodes, dtype=float)
    xs = []
    y = nodes[:, 1]
    for i in range(len(y) - 1):
        if abs(y[i]) <= tol:
            xs.append(float(nodes[i, 0]))
        elif y[i] * y[i + 1] < 0.0:
            t = y[i] / (y[i] - y[i + 1])
            xs.append(float(nodes[i, 0] + t * (nodes[i + 1, 0] - nodes[i, 0])))
    if abs(y[-1]) <= tol:
        xs.append(float(nodes[-1, 0]))
    return xs


def _boxed_seed(radius: float, n_leg: int) -> np.ndarray:
    """Three-leg polyline seed reaching 0.99 R, densest on the vertical."""
    xr = 0.99 * radius
    bottom = np.stack([np.linspace(0.0, xr, n_leg + 1),
                       np.full(n_leg + 1, -1.0)], axis=1)
    vertical = np.stack([np.full(2 * n_leg, xr),
                         np.linspace(-1.0, 1.0, 2 * n_leg + 1)[1:]], axis=1)
    top = np.stack([np.linspace(xr, 0.0, n_leg + 1)[1:],
                    np.full(n_leg, 1.0)], axis=1)
    return np.concatenate([bottom, vertical, top])


@dataclass
class NonexistenceReport:
    radii: np.ndarray
    best_lengths: np.ndarray
    bounds: np.ndarray
    crossings: list
    candidate_ns: np.ndarray
    candidate_lengths: np.ndarray
    infimum: float
    statuses: list
    conclusion: str

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.best_lengths) < 0.0))


def nonexistence_report(
    w: CounterexampleWeight | None = None,
    radii: tuple = (4.0, 8.0, 16.0, 32.0, 64.0),
    n_leg: int = 48,
    max_iters: int = 300,
    n_candidates: int = 12,
) -> NonexistenceReport:
    """Boxed descent runs versus the analytic crossing bound.

    For each box half-width R the solver is seeded with a three-leg
    candidate and confined to |x| <= R by projection; the reported length
    is the adaptive-quadrature length of the better of seed and final
    polyline, so it is the honest continuous length of an admissible
    curve.  Every confined curve
    crosses {y = 0} inside the box, hence exceeds crossing_lower_bound(R)
    > 2G(inf): the monotone decrease across doublings with a strictly
    positive gap is the numerical nonexistence signature; the conclusion
    line says demonstrated, not proven.
    """
    w = w or CounterexampleWeight()
    wsp = w.weighted_space()
    best, statuses, crossings = [], [], []
    for radius in radii:
        def clamp(nodes, r=radius):
            out = nodes.copy()
            out[:, 0] = np.clip(out[:, 0], -r, r)
            out[:, 1] = np.clip(out[:, 1], -2.0, 2.0)
            return out

        seed = _boxed_seed(radius, n_leg)
        opts = SolverOptions(
            init_nodes=seed,
            project=clamp,
            max_iters=max_iters,
            grad_tol=1e-10,
            reparam=None,
        )
        curve, _, trace = minimize_k_length(wsp, P_MINUS, P_PLUS, opts)
        # judge seed and final by the same dense measure; the descent
        # optimizes its own node rule and can lose ground against it
        seed_len = dense_polyline_length(seed, w)
        final_len = dense_polyline_length(curve.nodes, w)
        if final_len <= seed_len:
            best.append(final_len)
            statuses.append(trace.status)
            crossings.append(crossing_abscissas(curve.nodes))
        else:
            best.append(seed_len)
            statuses.append(trace.status + "+seed_kept")
            crossings.append(crossing_abscissas(seed))
    ns = np.arange(1, n_candidates + 1)
    cand = np.array([candidate_length(int(n), w) for n in ns])
    return NonexistenceReport(
        radii=np.asarray(radii, dtype=float),
        best_lengths=np.asarray(best),
        bounds=np.array([crossing_lower_bound(r, w) for r in radii]),
        crossings=crossings,
        candidate_ns=ns,
        candidate_lengths=cand,
        infimum=w.infimum,
        statuses=statuses,
        conclusion=(
            "boxed minimizers stay strictly above 2G(inf) with a gap "
            "matching the crossing bound; nonexistence of a minimizing "
            "geodesic is demonstrated numerically, not proven (h is only "
            "C^1 at |y| = 1, which the construction tolerates)"
        ),
    )



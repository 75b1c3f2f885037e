"""Profiles on a 1D grid and the effective potential they induce.

A grid function samples a vector-valued profile on a uniform window; beyond
the window it is extended by declared tail constants (whole-line problems)
or pinned boundary data (bounded windows).  The effective potential of a
profile is its 1D action minus the well-to-well distance of the underlying
potential: it vanishes exactly on minimal connections, and its square root
weights the geodesic problem one level up, where curves of profiles encode
2D fields.

Funnel envelopes certify decay toward a well: explicit solutions of
E'' = c E^(p0-1) with E(s0) = eps0, exponential for p0 = 2 and algebraic
otherwise.  Projecting a profile radially onto the funnel tube never raises
its action (within quadrature slack), which is what makes window clamping
and tail certification legitimate.  Mollification and optimal-translation
fitting round out the toolbox for the translation-quotient pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import math

import numpy as np

from .metric import GridL2Space, WeightedSpace
from .potentials import Potential


class FunnelEntryError(ValueError):
    """The profile misses the funnel mouth, so projection is not defined."""


@dataclass(frozen=True)
class GridFunction:
    """Vector profile on a uniform grid with declared behavior off-window.

    bc "tails": constant extension by ``tail_left``/``tail_right`` (the
    ambient wells for connection profiles).  bc "fixed": the window is the
    whole domain and the edge values are boundary data.
    """

    s: np.ndarray
    values: np.ndarray
    bc: str = "tails"
    tail_left: np.ndarray | None = None
    tail_right: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if s.ndim != 1 or s.size < 3:
            raise ValueError("grid needs at least three points")
        steps = np.diff(s)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform and increasing")
        if values.shape[0] != s.size:
            raise ValueError("values do not match the grid")
        if self.bc not in ("tails", "fixed"):
            raise ValueError(f"unknown boundary mode {self.bc!r}")
        tl, tr = self.tail_left, self.tail_right
        if self.bc == "tails":
            if tl is None or tr is None:
                raise ValueError("tails mode needs tail_left and tail_right")
            tl = np.asarray(tl, dtype=float).reshape(-1)
            tr = np.asarray(tr, dtype=float).reshape(-1)
        else:
            tl = values[0].copy()
            tr = values[-1].copy()
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tail_left", tl)
        object.__setattr__(self, "tail_right", tr)

    @property
    def h(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def m(self) -> int:
        return self.s.size

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    def space(self) -> GridL2Space:
        return GridL2Space(self.m, self.n_components, self.h)

    def flatten(self) -> np.ndarray:
        return self.values.ravel().copy()

    def with_values(self, values: np.ndarray) -> "GridFunction":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(self.m, self.n_components)
        return replace(self, values=values)

    def quad_weights(self) -> np.ndarray:
        w = np.full(self.m, self.h)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def norm_l2(self) -> float:
        w = self.quad_weights()
        return float(np.sqrt(np.sum(w * np.sum(self.values**2, axis=1))))

    def inner(self, other: "GridFunction | np.ndarray") -> float:
        ov = other.values if isinstance(other, GridFunction) else np.asarray(other)
        if ov.ndim == 1:
            ov = ov.reshape(self.m, self.n_components)
        w = self.quad_weights()
        return float(np.sum(w * np.sum(self.values * ov, axis=1)))

    def distance_l2(self, other: "GridFunction | np.ndarray") -> float:
        ov = other.values if isinstance(other, GridFunction) else np.asarray(other)
        if ov.ndim == 1:
            ov = ov.reshape(self.m, self.n_components)
        w = self.quad_weights()
        d = self.values - ov
        return float(np.sqrt(np.sum(w * np.sum(d * d, axis=1))))

    def derivative(self) -> np.ndarray:
        """Centered differences with ghost values from the extension."""
        v = np.vstack([self.tail_left, self.values, self.tail_right])
        return (v[2:] - v[:-2]) / (2.0 * self.h)

    def second_difference(self) -> np.ndarray:
        v = np.vstack([self.tail_left, self.values, self.tail_right])
        return (v[2:] - 2.0 * v[1:-1] + v[:-2]) / self.h**2

    def translate(self, shift: float) -> "GridFunction":
        """Values of v(. - shift) on the same grid, tail-extended."""
        q = self.s - shift
        out = np.empty_like(self.values)
        for c in range(self.n_components):
            out[:, c] = np.interp(
                q, self.s, self.values[:, c],
                left=float(self.tail_left[c]), right=float(self.tail_right[c]),
            )
        return replace(self, values=out)

    def to_csv(self, path) -> None:
        header = "s," + ",".join(f"v{c+1}" for c in range(self.n_components))
        data = np.column_stack([self.s, self.values])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, bc="tails", tail_left=None, tail_right=None):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        s, values = data[:, 0], data[:, 1:]
        if bc == "tails":
            if tail_left is None:
                tail_left = values[0]
            if tail_right is None:
                tail_right = values[-1]
        return cls(s=s, values=values, bc=bc, tail_left=tail_left, tail_right=tail_right)


# ---------------------------------------------------------------------------
# Funnel envelopes


@dataclass(frozen=True)
class FunnelProfile:
    """Explicit decay envelope from the mouth (s0, eps0) outward.

    side +1 constrains s >= s0, side -1 constrains s <= s0.  The envelope
    solves E'' = c E^(p0-1) exactly with E(s0) = eps0: exponential decay for
    p0 = 2, otherwise E = B (xi + offset)^(-alpha) with alpha = 2/(p0-2),
    B = (alpha (alpha+1) / c)^(alpha/2) and the offset fixed by the mouth
    condition.  |E'(s0)| = sqrt(2 c / p0) * eps0^(p0/2) in both branches,
    and E is square integrable for p0 < 6.
    """

    side: int
    p0: float
    c: float
    eps0: float
    s0: float

    def __post_init__(self):
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")
        if not (2.0 <= self.p0 < 6.0):
            raise ValueError("exponent must lie in [2, 6)")
        if self.c <= 0 or self.eps0 <= 0:
            raise ValueError("need positive c and eps0")

    @property
    def alpha(self) -> float:
        return math.inf if self.p0 == 2.0 else 2.0 / (self.p0 - 2.0)

    @property
    def amplitude(self) -> float:
        if self.p0 == 2.0:
            return self.eps0
        a = self.alpha
        return (a * (a + 1.0) / self.c) ** (a / 2.0)

    @property
    def offset(self) -> float:
        if self.p0 == 2.0:
            return 0.0
        return (self.amplitude / self.eps0) ** (1.0 / self.alpha)

    def _xi(self, s):
        return self.side * (np.asarray(s, dtype=float) - self.s0)

    def envelope(self, s) -> np.ndarray:
        """E(s) on the constrained side; eps0 before the mouth."""
        xi = self._xi(s)
        xi_c = np.maximum(xi, 0.0)
        if self.p0 == 2.0:
            out = self.eps0 * np.exp(-math.sqrt(self.c) * xi_c)
        else:
            out = self.amplitude * (xi_c + self.offset) ** (-self.alpha)
        return np.where(xi < 0.0, self.eps0, out)

    def envelope_deriv(self, s) -> np.ndarray:
        """dE/ds on the constrained side (0 before the mouth)."""
        xi = self._xi(s)
        xi_c = np.maximum(xi, 0.0)
        if self.p0 == 2.0:
            mag = math.sqrt(self.c) * self.eps0 * np.exp(-math.sqrt(self.c) * xi_c)
        else:
            mag = (
                self.alpha
                * self.amplitude
                * (xi_c + self.offset) ** (-self.alpha - 1.0)
            )
        return np.where(xi < 0.0, 0.0, -self.side * mag)

    def mouth_slope(self) -> float:
        """|E'(s0)| = sqrt(2 c / p0) * eps0^(p0/2)."""
        return math.sqrt(2.0 * self.c / self.p0) * self.eps0 ** (self.p0 / 2.0)

    def tail_l2(self) -> float:
        """Integral of E^2 over the constrained side."""
        if self.p0 == 2.0:
            return self.eps0**2 / (2.0 * math.sqrt(self.c))
        a = self.alpha
        if 2.0 * a <= 1.0:
            return math.inf
        return self.amplitude**2 * self.offset ** (1.0 - 2.0 * a) / (2.0 * a - 1.0)


def funnel_profile(side: int, p0: float, c: float, eps0: float, s0: float) -> FunnelProfile:
    """Build the explicit envelope; see FunnelProfile for the formulas."""
    return FunnelProfile(side=side, p0=float(p0), c=float(c), eps0=float(eps0), s0=float(s0))


def funnel_project(v: GridFunction, profile: FunnelProfile, well: np.ndarray) -> GridFunction:
    """Clamp a profile radially into the funnel tube around a well.

    Precondition: |v(s0) - well| < eps0 at the grid point nearest the mouth.
    Beyond the mouth (on the profile side) any excess radius is scaled back
    onto the envelope; the direction of v - well is preserved.
    """
    well = np.asarray(well, dtype=float).reshape(-1)
    j0 = int(np.argmin(np.abs(v.s - profile.s0)))
    r0 = float(np.linalg.norm(v.values[j0] - well))
    if r0 >= profile.eps0:
        raise FunnelEntryError(
            f"profile is {r0:.4g} away from the well at the funnel mouth "
            f"(s={v.s[j0]:.4g}), entry needs < {profile.eps0:.4g}"
        )
    xi = profile.side * (v.s - profile.s0)
    mask = xi >= 0.0
    env = profile.envelope(v.s)
    dev = v.values - well[None, :]
    r = np.linalg.norm(dev, axis=1)
    scale = np.ones_like(r)
    exceed = mask & (r > env)
    scale[exceed] = env[exceed] / r[exceed]
    new_values = well[None, :] + dev * scale[:, None]
    return v.with_values(new_values)


# ---------------------------------------------------------------------------
# Mollification


def mollify(v: GridFunction, delta: float) -> GridFunction:
    """Convolve with a raised-cosine kernel of support [-delta, delta].

    The discrete kernel weights are normalized to unit mass, so constants
    are exact fixed points.  The profile is extended by its tails (or edge
    values) before convolving; delta below one grid step is an error.
    """
    h = v.h
    if delta < h:
        raise ValueError(f"kernel width {delta:.4g} is below the grid step {h:.4g}")
    k = int(math.floor(delta / h + 1e-12))
    offsets = np.arange(-k, k + 1) * h
    weights = 1.0 + np.cos(np.pi * offsets / delta)
    weights /= np.sum(weights)
    left = np.tile(v.tail_left, (k, 1))
    right = np.tile(v.tail_right, (k, 1))
    padded = np.vstack([left, v.values, right])
    out = np.empty_like(v.values)
    for c in range(v.n_components):
        out[:, c] = np.convolve(padded[:, c], weights[::-1], mode="valid")
    return v.with_values(out)


# ---------------------------------------------------------------------------
# Translation fitting


def translation_objective(v: GridFunction, z: GridFunction, shift: float):
    """Squared L2 misfit against a translate and its two m-derivatives.

    F(m) = |v - z(. - m)|^2, F'(m) = 2 (z'(. - m), v - z(. - m)),
    F''(m) = 2 |z'(. - m)|^2 - 2 (z''(. - m), v - z(. - m)).
    """
    w = v.quad_weights()
    zm = z.translate(shift)
    diff = v.values - zm.values
    F = float(np.sum(w * np.sum(diff * diff, axis=1)))
    dz = z.derivative()
    ddz = z.second_difference()

    def translated(arr):
        out = np.empty_like(arr)
        for c in range(arr.shape[1]):
            out[:, c] = np.interp(v.s - shift, z.s, arr[:, c], left=0.0, right=0.0)
        return out

    dzm = translated(dz)
    ddzm = translated(ddz)
    dF = 2.0 * float(np.sum(w * np.sum(dzm * diff, axis=1)))
    d2F = 2.0 * float(np.sum(w * np.sum(dzm * dzm, axis=1))) - 2.0 * float(
        np.sum(w * np.sum(ddzm * diff, axis=1))
    )
    return F, dF, d2F


class TranslationFit(NamedTuple):
    shift: float
    which: int            # -1 for the first template, +1 for the second
    misfit: float         # squared L2 distance at the optimum
    unique: bool


def _misfit_only(v: GridFunction, z: GridFunction, shift: float) -> float:
    w = v.quad_weights()
    diff = v.values - z.translate(shift).values
    return float(np.sum(w * np.sum(diff * diff, axis=1)))


def _scan_and_polish(v: GridFunction, z: GridFunction, m_grid: np.ndarray,
                     newton_iters: int = 12):
    vals = np.array([_misfit_only(v, z, m) for m in m_grid])
    i = int(np.argmin(vals))
    m = float(m_grid[i])
    halfstep = float(m_grid[1] - m_grid[0])
    for _ in range(newton_iters):
        F, dF, d2F = translation_objective(v, z, m)
        if d2F <= 0.0:
            break
        step = -dF / d2F
        step = float(np.clip(step, -2.0 * halfstep, 2.0 * halfstep))
        if abs(step) < 1e-14:
            break
        m += step
    F, _, _ = translation_objective(v, z, m)
    # interior local minima of the scan, for the uniqueness verdict
    loc = [j for j in range(1, vals.size - 1) if vals[j] <= vals[j - 1] and vals[j] <= vals[j + 1]]
    second = min((vals[j] for j in loc if abs(m_grid[j] - m_grid[i]) > 2 * halfstep), default=np.inf)
    return m, F, float(second)


def optimal_translation(
    v: GridFunction,
    z_minus: GridFunction,
    z_plus: GridFunction,
    m_max: float | None = None,
    n_scan: int = 0,
    unique_margin: float = 1e-6,
) -> TranslationFit:
    """Best translate of either template in L2: coarse scan plus Newton.

    The scan bracket defaults to the grid span (the misfit is coercive in
    the shift, growing like the well gap times sqrt |m|, so optima beyond
    the span are not competitive for profiles supported in the window).
    ``unique`` is False when a second scan minimum comes within
    ``unique_margin`` of the best, or when the two templates tie.
    """
    span = float(v.s[-1] - v.s[0])
    if m_max is None:
        m_max = span
    if n_scan <= 0:
        n_scan = max(2 * v.m + 1, 129)
    m_grid = np.linspace(-m_max, m_max, n_scan)
    m_m, f_m, second_m = _scan_and_polish(v, z_minus, m_grid)
    m_p, f_p, second_p = _scan_and_polish(v, z_plus, m_grid)
    if f_m <= f_p:
        which, m, f, second = -1, m_m, f_m, min(second_m, f_p)
    else:
        which, m, f, second = 1, m_p, f_p, min(second_p, f_m)
    unique = bool(second - f > unique_margin * max(1.0, f))
    return TranslationFit(shift=m, which=which, misfit=f, unique=unique)


def gauge_fix_translations(nodes: list[GridFunction], keff: Callable[[GridFunction], float] | None = None):
    """Remove translation drift along a path of profiles, pair by pair.

    Each node is shifted to minimize the L2 gap to its already-fixed
    predecessor (scan around the previous shift plus Newton).  A shift is
    kept only if it does not increase the local weighted-length
    contribution, so the path's weighted length never increases.  Returns
    (new nodes, cumulative shifts).
    """
    fixed = [nodes[0]]
    shifts = [0.0]
    h = nodes[0].h
    for i in range(1, len(nodes)):
        z = nodes[i]
        prev = fixed[-1]
        local = np.linspace(-10 * h, 10 * h, 41) + shifts[-1]
        m, _, _ = _scan_and_polish(prev, z, local)
        candidate = z.translate(m)
        if keff is not None:
            def contrib(a, b):
                mid = a.with_values(0.5 * (a.values + b.values))
                return keff(mid) * a.distance_l2(b)
            old = contrib(prev, z)
            if i + 1 < len(nodes):
                old += contrib(z, nodes[i + 1])
            new = contrib(prev, candidate)
            if i + 1 < len(nodes):
                new += contrib(candidate, nodes[i + 1])
            if new > old + 1e-12:
                candidate, m = z, 0.0
        else:
            if prev.distance_l2(candidate) > prev.distance_l2(z) + 1e-12:
                candidate, m = z, 0.0
        fixed.append(candidate)
        shifts.append(m)
    return fixed, np.asarray(shifts)


# ---------------------------------------------------------------------------
# Effective potential spaces


@dataclass
class EffectivePotentialSpace:
    """1D action as a potential on profile space.

    Wells mode: the density is a pointwise potential W and the reference is
    the well-to-well weighted distance, so minimal connections sit at
    effective potential zero.  Density mode: an explicit position-dependent
    density (already normalized to minimum zero) with reference adjustments
    from the discrete well solves.  The induced geodesic weight is
    sqrt(2 max(effective potential, 0)); reparametrizing optimal profile
    paths to its equipartition makes the assembled 2D field satisfy the
    Euler-Lagrange system of the summed energy.
    """

    grid: np.ndarray
    n_components: int
    bc: str
    potential: Potential | None = None
    density: Callable | None = None
    density_grad: Callable | None = None
    tail_left: np.ndarray | None = None
    tail_right: np.ndarray | None = None
    ref_value: float = 0.0
    symmetry: str = "none"
    quotient: str = "none"
    z_minus: GridFunction | None = None
    z_plus: GridFunction | None = None
    funnel_minus: FunnelProfile | None = None
    funnel_plus: FunnelProfile | None = None
    lam: float = 0.0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.potential is None and self.density is None:
            raise ValueError("need a pointwise potential or an explicit density")
        if self.symmetry not in ("none", "odd_first"):
            raise ValueError(f"unknown symmetry mode {self.symmetry!r}")
        if self.quotient not in ("none", "translations"):
            raise ValueError(f"unknown quotient mode {self.quotient!r}")
        if self.symmetry == "odd_first" and not np.allclose(
            self.grid, -self.grid[::-1], atol=1e-9 * max(1.0, abs(self.grid[-1]))
        ):
            raise ValueError("odd symmetry needs a grid symmetric about zero")

    @property
    def m(self) -> int:
        return self.grid.size

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def grid_function(self, values: np.ndarray) -> GridFunction:
        return GridFunction(
            s=self.grid,
            values=np.asarray(values, dtype=float).reshape(self.m, self.n_components),
            bc=self.bc,
            tail_left=self.tail_left,
            tail_right=self.tail_right,
        )

    def ambient(self) -> GridL2Space:
        return GridL2Space(self.m, self.n_components, self.h)

    def _density_values(self, values: np.ndarray) -> np.ndarray:
        if self.potential is not None:
            return self.potential.values_at(values)
        return np.asarray(self.density(self.grid, values), dtype=float)

    def _density_grads(self, values: np.ndarray) -> np.ndarray:
        if self.potential is not None:
            return self.potential.gradients_at(values)
        return np.asarray(self.density_grad(self.grid, values), dtype=float)

    def energy_1d(self, values: np.ndarray) -> float:
        """Discrete 1D action: exact polyline kinetic term plus trapezoid density."""
        values = np.asarray(values, dtype=float).reshape(self.m, self.n_components)
        h = self.h
        dv = np.diff(values, axis=0)
        kinetic = 0.5 * np.sum(dv * dv) / h
        w = np.full(self.m, h)
        w[0] *= 0.5
        w[-1] *= 0.5
        potential = float(np.sum(w * self._density_values(values)))
        return float(kinetic) + potential

    def energy_1d_grad(self, values: np.ndarray) -> np.ndarray:
        """Coordinate gradient of energy_1d; edge rows are pinned to zero."""
        values = np.asarray(values, dtype=float).reshape(self.m, self.n_components)
        h = self.h
        grad = np.zeros_like(values)
        dv = np.diff(values, axis=0) / h
        grad[:-1] -= dv
        grad[1:] += dv
        w = np.full(self.m, h)
        w[0] *= 0.5
        w[-1] *= 0.5
        grad += w[:, None] * self._density_grads(values)
        grad[0] = 0.0
        grad[-1] = 0.0
        return grad

    def effective_potential(self, values: np.ndarray) -> float:
        """1D action minus the reference distance (zero on minimal connections)."""
        return self.energy_1d(values) - self.ref_value

    def kappa(self, values: np.ndarray) -> float:
        """sqrt of the nonnegative part of the effective potential."""
        return math.sqrt(max(self.effective_potential(values), 0.0))

    def symmetrize(self, values: np.ndarray) -> np.ndarray:
        """Project onto the odd-first-component subspace (exact reflection)."""
        values = np.asarray(values, dtype=float).reshape(self.m, self.n_components)
        flipped = values[::-1].copy()
        out = np.empty_like(values)
        out[:, 0] = 0.5 * (values[:, 0] - flipped[:, 0])
        if self.n_components > 1:
            out[:, 1:] = 0.5 * (values[:, 1:] + flipped[:, 1:])
        return out

    def weighted_space(self) -> WeightedSpace:
        """The geodesic problem on profiles: weight sqrt(2 max(E - ref, 0)).

        Zero weight is reached exactly on the stored minimal connections, so
        the zero set lists their flattened coordinates.
        """
        floor = 0.0

        def weight(flat):
            return math.sqrt(2.0 * max(self.effective_potential(flat) - floor, 0.0))

        def weight_batch(pts):
            return np.array([weight(p) for p in np.atleast_2d(pts)])

        def weight_grad(flat):
            w = self.effective_potential(flat)
            if w <= 1e-16:
                return np.zeros(self.m * self.n_components)
            g = self.energy_1d_grad(flat).ravel()
            return g / math.sqrt(2.0 * w)

        def weight_grad_batch(pts):
            return np.array([weight_grad(p) for p in np.atleast_2d(pts)])

        zero = []
        if self.z_minus is not None:
            zero.append(self.z_minus.flatten())
        if self.z_plus is not None:
            zero.append(self.z_plus.flatten())
        return WeightedSpace(
            space=self.ambient(),
            weight=weight,
            zero_set=tuple(zero),
            weight_grad=weight_grad,
            weight_batch=weight_batch,
            weight_grad_batch=weight_grad_batch,
        )

    def relax_profile(self, values: np.ndarray, max_iters: int = 2000, gtol: float = 1e-10):
        """Descend the 1D action from a seed profile (edges stay pinned).

        Used to turn sampled connection guesses into discrete minimizers;
        returns (values, energy).  Plain L-BFGS on the flattened interior.
        """
        from scipy.optimize import minimize as _minimize

        values = np.asarray(values, dtype=float).reshape(self.m, self.n_components)
        shape = values.shape
        v0, v_end = values[0].copy(), values[-1].copy()

        def pack(x):
            full = x.reshape(shape).copy()
            full[0], full[-1] = v0, v_end
            if self.symmetry == "odd_first":
                full = self.symmetrize(full)
            return full

        def fun(x):
            full = pack(x)
            e = self.energy_1d(full)
            g = self.energy_1d_grad(full)
            if self.symmetry == "odd_first":
                g = self.symmetrize(g)
            return e, g.ravel()

        res = _minimize(
            fun, values.ravel(), jac=True, method="L-BFGS-B",
            options={"maxiter": max_iters, "gtol": gtol, "ftol": 1e-18},
        )
        out = pack(res.x)
        return out, float(self.energy_1d(out))

"""Sampled curves, weighted length functionals and elementary distance bounds.

Curves are polylines: a strictly increasing time grid together with one
ambient point per time.  The ambient space is either Euclidean or a uniform
grid of vector values compared in a trapezoid-rule L2 norm; both expose the
same interface (a flat coordinate vector per point plus per-coordinate
quadrature weights), so every functional below is written once.

The weighted length of a polyline against a weight K >= 0 is evaluated
either by the midpoint rule, sum K(midpoint) * d(endpoints) per segment, or
by the min-endpoint rule, sum min(K at endpoints) * d(endpoints).  The
subdivision functional evaluates inf-K-times-gap sums over coarser index
subdivisions; at the finest subdivision it coincides with the min-endpoint
rule exactly.  A weight value of +inf anywhere on a curve poisons the whole
sum (even across zero-length segments).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import math

import numpy as np
from scipy.stats import qmc


class ZeroLengthCurveError(ValueError):
    """Raised when an operation needs a curve of positive length."""


@dataclass(frozen=True)
class EuclideanSpace:
    """Flat R^n with the standard norm."""

    dim: int

    @property
    def coord_weights(self) -> np.ndarray:
        return np.ones(self.dim)

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        # same reduction as segment_lengths so chordal gaps agree bitwise
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return float(np.sqrt(np.sum(self.coord_weights * d * d)))

    def norm(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(np.sum(self.coord_weights * v * v)))


@dataclass(frozen=True)
class GridL2Space:
    """Vector-valued functions on a uniform grid, compared in trapezoid L2.

    Points are flat vectors of length ``n_points * n_components`` (grid-major
    layout: all components at grid node 0, then node 1, ...).  The squared
    norm is the trapezoid rule applied to the pointwise squared Euclidean
    norm, so the first and last grid nodes carry half weight.
    """

    n_points: int
    n_components: int
    spacing: float

    @property
    def dim(self) -> int:
        return self.n_points * self.n_components

    @property
    def coord_weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return np.repeat(w, self.n_components)

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        d = np.asarray(x) - np.asarray(y)
        return float(np.sqrt(np.sum(self.coord_weights * d * d)))

    def norm(self, v: np.ndarray) -> float:
        v = np.asarray(v)
        return float(np.sqrt(np.sum(self.coord_weights * v * v)))


AmbientSpace = EuclideanSpace | GridL2Space


@dataclass(frozen=True)
class SampledCurve:
    """Polyline through ambient points at strictly increasing times."""

    times: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        if times.ndim != 1 or times.size < 2:
            raise ValueError("need at least two sample times")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if nodes.shape[0] != times.size:
            raise ValueError(
                f"node count {nodes.shape[0]} does not match time count {times.size}"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_nodes(self) -> int:
        return self.times.size

    def __len__(self) -> int:
        return self.times.size

    def eval(self, t: float | np.ndarray) -> np.ndarray:
        """Piecewise-affine evaluation; clamps outside the time window."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, self.nodes.shape[1]))
        for j in range(self.nodes.shape[1]):
            out[:, j] = np.interp(t, self.times, self.nodes[:, j])
        return out if out.shape[0] > 1 else out[0]


def _weight_on(wspace: "WeightedSpace", pts: np.ndarray) -> np.ndarray:
    """Evaluate the weight at a batch of points, shape (k, dim) -> (k,)."""
    if wspace.weight_batch is not None:
        return np.asarray(wspace.weight_batch(pts), dtype=float)
    return np.array([wspace.weight(p) for p in pts], dtype=float)


@dataclass(frozen=True)
class WeightedSpace:
    """An ambient space with a nonnegative weight and its zero set.

    The zero set is the finite list of points where the weight vanishes;
    operations that excise loops or check strict triangle inequalities
    iterate over it.  ``weight_batch``/``weight_grad_batch`` are optional
    vectorized forms used on hot paths.
    """

    space: AmbientSpace
    weight: Callable[[np.ndarray], float]
    zero_set: tuple = ()
    weight_grad: Callable[[np.ndarray], np.ndarray] | None = None
    weight_batch: Callable[[np.ndarray], np.ndarray] | None = None
    weight_grad_batch: Callable[[np.ndarray], np.ndarray] | None = None

    def weight_at(self, pts: np.ndarray) -> np.ndarray:
        return _weight_on(self, np.atleast_2d(pts))


def metric_derivative(curve: SampledCurve, space: AmbientSpace) -> np.ndarray:
    """Per-segment metric speed d(x_{i+1}, x_i) / dt_i, length N-1."""
    diffs = np.diff(curve.nodes, axis=0)
    w = space.coord_weights
    seg = np.sqrt(np.sum(w * diffs * diffs, axis=1))
    return seg / np.diff(curve.times)


def segment_lengths(curve: SampledCurve, space: AmbientSpace) -> np.ndarray:
    diffs = np.diff(curve.nodes, axis=0)
    w = space.coord_weights
    return np.sqrt(np.sum(w * diffs * diffs, axis=1))


def length_d(curve: SampledCurve, space: AmbientSpace) -> float:
    """Unweighted polyline length in the ambient metric."""
    return float(np.sum(segment_lengths(curve, space)))


def k_length(curve: SampledCurve, wspace: WeightedSpace, rule: str = "midpoint") -> float:
    """Weighted polyline length sum K * segment gap.

    rule = "midpoint" evaluates K at segment midpoints; "min-endpoint" takes
    the smaller node value per segment.  If the weight is +inf at any
    evaluation point the result is +inf regardless of segment lengths
    (the convention inf * 0 = inf applies).
    """
    lens = segment_lengths(curve, wspace.space)
    if rule == "midpoint":
        mids = 0.5 * (curve.nodes[:-1] + curve.nodes[1:])
        kvals = _weight_on(wspace, mids)
    elif rule == "min-endpoint":
        knode = _weight_on(wspace, curve.nodes)
        kvals = np.minimum(knode[:-1], knode[1:])
    else:
        raise ValueError(f"unknown rule {rule!r}")
    if np.any(np.isinf(kvals)):
        return math.inf
    return float(np.sum(kvals * lens))


def a_k_functional(
    curve: SampledCurve, wspace: WeightedSpace, subdivision: Sequence[int]
) -> float:
    """Subdivision sum: (inf of K over sampled nodes per block) * block gap.

    ``subdivision`` is an increasing list of node indices, at least two of
    them.  The infimum per block runs over the curve nodes it contains, so at
    the finest subdivision the value equals the min-endpoint weighted length
    exactly.  Refining a subdivision never decreases the value.
    """
    idx = list(subdivision)
    if len(idx) < 2:
        raise ValueError("subdivision needs at least two indices")
    arr = np.asarray(idx, dtype=int)
    if np.any(np.diff(arr) <= 0):
        raise ValueError("subdivision indices must be strictly increasing")
    if arr[0] < 0 or arr[-1] >= curve.n_nodes:
        raise ValueError("subdivision indices out of range")
    knode = _weight_on(wspace, curve.nodes)
    if np.any(np.isinf(knode[arr[0] : arr[-1] + 1])):
        return math.inf
    terms = np.empty(arr.size - 1)
    for b in range(arr.size - 1):
        i, j = arr[b], arr[b + 1]
        kmin = np.min(knode[i : j + 1])
        gap = wspace.space.distance(curve.nodes[i], curve.nodes[j])
        terms[b] = kmin * gap
    return float(np.sum(terms))


def reparametrize_constant_speed(
    curve: SampledCurve,
    space: AmbientSpace,
    metric_choice: str = "d",
    wspace: WeightedSpace | None = None,
) -> SampledCurve:
    """Rescale times to [0, 1] so the chosen per-segment speed is constant.

    metric_choice "d" uses ambient segment lengths; "k_wedge_1" uses
    min(K(midpoint), 1) * ambient length, which reduces to "d" when K >= 1
    along the curve.  Consecutive duplicate nodes (zero length in the chosen
    metric) are dropped; a curve of zero total length is an error.
    """
    lens = segment_lengths(curve, space)
    if metric_choice == "d":
        pass
    elif metric_choice == "k_wedge_1":
        if wspace is None:
            raise ValueError("k_wedge_1 reparametrization needs a weighted space")
        mids = 0.5 * (curve.nodes[:-1] + curve.nodes[1:])
        kvals = np.minimum(_weight_on(wspace, mids), 1.0)
        lens = kvals * lens
    else:
        raise ValueError(f"unknown metric choice {metric_choice!r}")
    total = float(np.sum(lens))
    if total <= 0.0:
        raise ZeroLengthCurveError("curve has zero length in the chosen metric")
    keep = [0]
    for i, seg in enumerate(lens):
        if seg > 0.0:
            keep.append(i + 1)
    nodes = curve.nodes[keep]
    cum = np.concatenate([[0.0], np.cumsum(lens[lens > 0.0])])
    times = cum / cum[-1]
    times[-1] = 1.0
    return SampledCurve(times=times, nodes=nodes)


class DkLowerBound(NamedTuple):
    value: float
    slack: float
    radius: float


def dk_lower_bound(
    x: np.ndarray, y: np.ndarray, wspace: WeightedSpace, r_samples: int = 256
) -> DkLowerBound:
    """Ball-infimum lower bound r * inf{K on the closed ball B(x, r)}, r = d(x,y).

    The infimum is estimated by deterministic low-discrepancy sampling of the
    ball (Halton points mapped by radial scaling, plus the center and the
    axis-aligned boundary points).  ``slack`` is a refinement estimate: the
    drop in the sampled minimum between the first half of the sample set and
    the full set.  The returned value is a lower bound for the weighted
    length of any curve joining x and y, up to that sampling slack.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = wspace.space.distance(x, y)
    if r == 0.0:
        return DkLowerBound(0.0, 0.0, 0.0)
    dim = x.size
    sampler = qmc.Halton(d=dim, scramble=False)
    u = sampler.random(r_samples)
    # Map the unit cube onto the ball: direction from the centered cube point,
    # radius from its sup-norm (keeps the map deterministic and surjective).
    c = 2.0 * u - 1.0
    sup = np.max(np.abs(c), axis=1)
    norm = np.linalg.norm(c, axis=1)
    good = norm > 0
    pts = np.zeros_like(c)
    pts[good] = c[good] / norm[good, None] * (sup[good, None] * r)
    # Metric balls in the grid-L2 space are ellipsoids in flat coordinates;
    # rescale so every sample stays inside the closed metric ball.
    w = wspace.space.coord_weights
    scale = np.sqrt(np.sum(w * pts * pts, axis=1))
    over = scale > r
    if np.any(over):
        pts[over] *= (r / scale[over])[:, None]
    pts = x[None, :] + pts
    fixed = [x[None, :]]
    if isinstance(wspace.space, EuclideanSpace):
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = r
            fixed.append((x + e)[None, :])
            fixed.append((x - e)[None, :])
    allpts = np.concatenate(fixed + [pts], axis=0)
    kvals = _weight_on(wspace, allpts)
    n_fixed = sum(f.shape[0] for f in fixed)
    k_half = float(np.min(kvals[: n_fixed + r_samples // 2]))
    k_full = float(np.min(kvals))
    return DkLowerBound(k_full * r, k_half - k_full, r)

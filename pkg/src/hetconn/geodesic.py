"""Weighted-length minimization over polylines with pinned endpoints.

The discrete objective is the midpoint-rule weighted length
sum K((x_i + x_{i+1})/2) * d(x_i, x_{i+1}); its exact coordinate gradient
drives a backtracking descent.  Segments whose midpoint weight sits below a
floor are treated as already on the zero set and contribute no gradient.
Loop removal excises everything between the first and last pass near a
zero-set point, and node refinement splits the segments that carry the most
weighted length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import math

import numpy as np

from .metric import (
    SampledCurve,
    WeightedSpace,
    ZeroLengthCurveError,
    k_length,
    reparametrize_constant_speed,
    segment_lengths,
)


@dataclass
class SolverOptions:
    n_nodes: int = 101
    max_iters: int = 500
    grad_tol: float = 1e-8
    step0: float = 1.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    weight_floor: float = 1e-8
    via_points: tuple = ()
    init_nodes: np.ndarray | None = None
    project: Callable[[np.ndarray], np.ndarray] | None = None
    reparam: str | None = "k_wedge_1"


@dataclass
class SolveTrace:
    energies: list
    status: str
    n_iters: int
    grad_norm: float

    @property
    def monotone(self) -> bool:
        e = np.asarray(self.energies)
        return bool(np.all(np.diff(e) <= 1e-12 * np.maximum(1.0, np.abs(e[:-1]))))


def _grad_on(wspace: WeightedSpace, pts: np.ndarray) -> np.ndarray:
    if wspace.weight_grad_batch is not None:
        return np.asarray(wspace.weight_grad_batch(pts), dtype=float)
    if wspace.weight_grad is not None:
        return np.array([wspace.weight_grad(p) for p in pts], dtype=float)
    # Central finite differences, adequate for low ambient dimension.
    dim = pts.shape[1]
    out = np.empty_like(pts)
    h = 1e-6
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = h
        fp = wspace.weight_at(pts + e)
        fm = wspace.weight_at(pts - e)
        out[:, j] = (fp - fm) / (2 * h)
    return out


def _energy_grad(nodes: np.ndarray, wspace: WeightedSpace, floor: float, want_grad: bool):
    w = wspace.space.coord_weights
    diffs = nodes[1:] - nodes[:-1]
    lens = np.sqrt(np.sum(w * diffs * diffs, axis=1))
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    kvals = wspace.weight_at(mids)
    if np.any(np.isinf(kvals)):
        return math.inf, None
    energy = float(np.sum(kvals * lens))
    if not want_grad:
        return energy, None
    grad = np.zeros_like(nodes)
    active = (kvals >= floor) & (lens > 0.0)
    if np.any(active):
        gk = np.zeros_like(diffs)
        gk[active] = _grad_on(wspace, mids[active])
        half = 0.5 * gk * lens[:, None]
        pull = np.zeros_like(diffs)
        pull[active] = (kvals[active] / lens[active])[:, None] * (w * diffs[active])
        half[~active] = 0.0
        grad[:-1] += half - pull
        grad[1:] += half + pull
    grad[0] = 0.0
    grad[-1] = 0.0
    return energy, grad


def _seed_nodes(x_minus, x_plus, opts: SolverOptions) -> np.ndarray:
    if opts.init_nodes is not None:
        nodes = np.atleast_2d(np.asarray(opts.init_nodes, dtype=float)).copy()
        nodes[0] = x_minus
        nodes[-1] = x_plus
        return nodes
    way = [np.asarray(x_minus, dtype=float)]
    way += [np.asarray(v, dtype=float) for v in opts.via_points]
    way.append(np.asarray(x_plus, dtype=float))
    way = np.stack(way)
    chord = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(way, axis=0), axis=1))]
    )
    if chord[-1] == 0.0:
        chord = np.arange(way.shape[0], dtype=float)
    tau = np.linspace(0.0, chord[-1], opts.n_nodes)
    nodes = np.empty((opts.n_nodes, way.shape[1]))
    for j in range(way.shape[1]):
        nodes[:, j] = np.interp(tau, chord, way[:, j])
    return nodes


def minimize_k_length(
    wspace: WeightedSpace,
    x_minus: np.ndarray,
    x_plus: np.ndarray,
    opts: SolverOptions | None = None,
):
    """Descend the midpoint-rule weighted length from a seeded polyline.

    Returns (curve, value, trace).  Endpoints stay pinned; accepted steps are
    monotone in energy.  The descent direction is the coordinate gradient
    preconditioned by the ambient quadrature weights, so grid-L2 spaces move
    at the same rate as Euclidean ones.  The returned curve is
    reparametrized to constant speed in the metric named by ``opts.reparam``
    (d wedged with 1 by default); identical endpoints yield a two-node
    constant curve of value zero.
    """
    opts = opts or SolverOptions()
    x_minus = np.asarray(x_minus, dtype=float)
    x_plus = np.asarray(x_plus, dtype=float)
    if np.array_equal(x_minus, x_plus):
        curve = SampledCurve(times=np.array([0.0, 1.0]), nodes=np.stack([x_minus, x_plus]))
        return curve, 0.0, SolveTrace([0.0], "degenerate", 0, 0.0)
    nodes = _seed_nodes(x_minus, x_plus, opts)
    if opts.project is not None:
        nodes = opts.project(nodes)
        nodes[0], nodes[-1] = x_minus, x_plus
    energy, grad = _energy_grad(nodes, wspace, opts.weight_floor, True)
    if not np.isfinite(energy):
        raise ValueError("weighted length is not finite at the initial polyline")
    energies = [energy]
    inv_w = 1.0 / wspace.space.coord_weights
    status = "max_iters"
    step = opts.step0
    gnorm = math.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        direction = grad * inv_w
        slope = float(np.sum(grad * direction))
        gnorm = math.sqrt(max(slope, 0.0))
        if gnorm < opts.grad_tol:
            status = "converged"
            break
        accepted = False
        t = step
        for _ in range(opts.max_backtracks):
            trial = nodes - t * direction
            if opts.project is not None:
                trial = opts.project(trial)
                trial[0], trial[-1] = x_minus, x_plus
            e_new, _ = _energy_grad(trial, wspace, opts.weight_floor, False)
            if e_new <= energy - opts.armijo * t * slope:
                accepted = True
                break
            t *= opts.backtrack
        if not accepted:
            status = "stall"
            break
        nodes = trial
        energy = e_new
        energies.append(energy)
        step = min(t * 2.0, opts.step0 * 1e3)
        _, grad = _energy_grad(nodes, wspace, opts.weight_floor, True)
    trace = SolveTrace(energies=energies, status=status, n_iters=it, grad_norm=gnorm)
    curve = SampledCurve(times=np.linspace(0.0, 1.0, nodes.shape[0]), nodes=nodes)
    if opts.reparam is not None:
        try:
            curve = reparametrize_constant_speed(
                curve, wspace.space, metric_choice=opts.reparam, wspace=wspace
            )
        except ZeroLengthCurveError:
            pass
    value = k_length(curve, wspace, rule="midpoint")
    return curve, value, trace


def remove_sigma_loops(
    curve: SampledCurve, wspace: WeightedSpace, hit_tol: float = 1e-2
) -> SampledCurve:
    """Excise the arc between the first and last pass near each zero-set point.

    Zero-set points are processed in their declared order.  A candidate
    excision is kept only if it does not increase the midpoint-rule weighted
    length, so the reported length is monotone by construction.  A curve
    that never leaves one zero-set point collapses to its two end nodes.
    """
    out = curve
    for sigma in wspace.zero_set:
        sigma = np.asarray(sigma, dtype=float)
        d = np.array([wspace.space.distance(p, sigma) for p in out.nodes])
        hits = np.flatnonzero(d <= hit_tol)
        if hits.size < 2:
            continue
        i1, i2 = int(hits[0]), int(hits[-1])
        if i2 <= i1 + 1:
            continue
        keep = np.concatenate([np.arange(i1 + 1), np.arange(i2, out.n_nodes)])
        nodes = out.nodes[keep]
        t0, t_end = out.times[0], out.times[-1]
        span = out.times[i2] - out.times[i1]
        times = np.concatenate([out.times[: i1 + 1], out.times[i2:] - span])
        if t_end - span > t0:
            times = t0 + (times - t0) * (t_end - t0) / (t_end - t0 - span)
        else:
            times = np.linspace(t0, t_end, nodes.shape[0])
        if np.any(np.diff(times) <= 0):
            times = np.linspace(t0, t_end, nodes.shape[0])
        candidate = SampledCurve(times=times, nodes=nodes)
        if k_length(candidate, wspace) <= k_length(out, wspace):
            out = candidate
    return out


def refine_nodes(
    curve: SampledCurve,
    wspace: WeightedSpace,
    target_n: int,
    opts: SolverOptions | None = None,
) -> SampledCurve:
    """Split the heaviest segments until the curve has ``target_n`` nodes.

    Each split inserts the geometric midpoint of the segment with the
    largest midpoint-rule contribution.  When ``opts`` is given, one descent
    run re-optimizes the refined polyline (seeded with it) so the weighted
    length does not exceed the unrefined value.
    """
    if target_n <= curve.n_nodes:
        return curve
    times = list(curve.times)
    nodes = [np.asarray(p, dtype=float) for p in curve.nodes]

    def contribution(i):
        mid = 0.5 * (nodes[i] + nodes[i + 1])
        return float(wspace.weight_at(mid)[0]) * wspace.space.distance(
            nodes[i], nodes[i + 1]
        )

    contrib = [contribution(i) for i in range(len(nodes) - 1)]
    while len(nodes) < target_n:
        i = int(np.argmax(contrib))
        mid = 0.5 * (nodes[i] + nodes[i + 1])
        tmid = 0.5 * (times[i] + times[i + 1])
        nodes.insert(i + 1, mid)
        times.insert(i + 1, tmid)
        contrib[i] = contribution(i)
        contrib.insert(i + 1, contribution(i + 1))
    refined = SampledCurve(times=np.asarray(times), nodes=np.stack(nodes))
    if opts is None:
        return refined
    reopts = SolverOptions(**{**opts.__dict__, "init_nodes": refined.nodes})
    out, _, _ = minimize_k_length(wspace, refined.nodes[0], refined.nodes[-1], reopts)
    return out

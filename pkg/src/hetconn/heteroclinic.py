"""From weighted geodesics to heteroclinic connections.

A geodesic for the weight K = sqrt(2 W) becomes a minimal-action connection
once its time parametrization equidistributes kinetic and potential energy:
along the arc-length form of the geodesic one integrates 1/K to build the
inverse time map, and the curve read through that map satisfies
|dgamma/dt| = K(gamma), i.e. the action integrand splits evenly.  The weight
vanishes at the two wells, so the time map diverges at the ends; the
implementation clamps at the last interior node and reports the resulting
finite window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .metric import (
    AmbientSpace,
    EuclideanSpace,
    SampledCurve,
    WeightedSpace,
    k_length,
    segment_lengths,
)


class InteriorZeroError(RuntimeError):
    """The weight vanishes strictly between the endpoints of a geodesic."""


def _values_at(potential_like, pts: np.ndarray) -> np.ndarray:
    if hasattr(potential_like, "values_at"):
        return np.asarray(potential_like.values_at(pts), dtype=float)
    return np.array([float(potential_like(p)) for p in pts])


def action_ew(curve: SampledCurve, potential_like, space: AmbientSpace | None = None) -> float:
    """Midpoint-rule action: sum (|segment speed|^2 / 2 + W(midpoint)) * dt."""
    space = space or EuclideanSpace(curve.nodes.shape[1])
    dts = np.diff(curve.times)
    lens = segment_lengths(curve, space)
    mids = 0.5 * (curve.nodes[:-1] + curve.nodes[1:])
    wvals = _values_at(potential_like, mids)
    return float(np.sum((0.5 * (lens / dts) ** 2 + wvals) * dts))


@dataclass(frozen=True)
class ConnectionResult:
    """A connection sampled on a symmetric window [-T, T]."""

    curve: SampledCurve
    x_minus: np.ndarray
    x_plus: np.ndarray
    action: float
    dk_value: float
    equipartition_defect: float
    window: float
    diagnostics: dict


def _arc_length_form(geodesic: SampledCurve, space: AmbientSpace):
    lens = segment_lengths(geodesic, space)
    keep = [0] + [i + 1 for i, L in enumerate(lens) if L > 0.0]
    nodes = geodesic.nodes[keep]
    s = np.concatenate([[0.0], np.cumsum(lens[lens > 0.0])])
    return s, nodes


def _graded_resample(s: np.ndarray, nodes: np.ndarray, n_base: int, eps_rel: float):
    """Arc-length grid: uniform base plus geometric tails toward both ends.

    The time map integrates 1/K, which blows up logarithmically (or worse)
    at the wells, so uniform grids cap the reachable window; geometric
    clustering pushes the clamp exponentially closer to the ends.
    """
    total = s[-1]
    base = np.linspace(0.0, total, n_base)
    levels = int(np.ceil(np.log2(1.0 / eps_rel))) if eps_rel < 1.0 else 0
    tail = total * 0.25 * 0.5 ** np.arange(1, levels + 1)
    s_new = np.unique(np.concatenate([base, tail, total - tail, [0.0, total]]))
    out = np.empty((s_new.size, nodes.shape[1]))
    for j in range(nodes.shape[1]):
        out[:, j] = np.interp(s_new, s, nodes[:, j])
    return s_new, out


def reparam_equipartition(
    geodesic: SampledCurve,
    wspace: WeightedSpace,
    n_samples: int = 2001,
    t_max: float = 10.0,
    resample: int | None = None,
    resample_eps: float = 1e-9,
    require_t: float | None = None,
) -> ConnectionResult:
    """Reparametrize a geodesic so kinetic and potential energy balance.

    The geodesic is put in arc-length form; F = K(nodes) must be positive at
    every interior node (run loop removal first if the curve grazes the zero
    set).  G = cumulative trapezoid of 1/F, centered where the accumulated
    weighted length reaches half its total, is inverted monotonically to get
    the time map.  The output is sampled on a uniform grid over [-T, T] with
    T = min(clamped G-range half-width, t_max).  ``resample`` inserts a
    graded arc grid (geometric toward the ends, relative depth
    ``resample_eps``) before integration, extending the reachable window.
    """
    s, nodes = _arc_length_form(geodesic, wspace.space)
    if s.size < 3:
        raise ValueError("geodesic needs at least one interior node")
    if resample is not None:
        s, nodes = _graded_resample(s, nodes, resample, resample_eps)
    F = wspace.weight_at(nodes)
    if np.any(~np.isfinite(F)):
        raise ValueError("weight is not finite along the geodesic")
    interior = F[1:-1]
    if np.any(interior <= 0.0):
        i = 1 + int(np.argmin(interior))
        raise InteriorZeroError(
            f"weight vanishes at interior arc position s={s[i]:.6g}; "
            "the endpoints are not adjacent wells for this curve"
        )
    # Center where the accumulated weighted length reaches half its total.
    cum_k = np.concatenate([[0.0], np.cumsum(0.5 * (F[:-1] + F[1:]) * np.diff(s))])
    j_mid = int(np.argmin(np.abs(cum_k - 0.5 * cum_k[-1])))
    j_mid = min(max(j_mid, 1), s.size - 2)
    inv = 1.0 / F[1:-1]
    G = np.concatenate([[0.0], np.cumsum(0.5 * (inv[:-1] + inv[1:]) * np.diff(s[1:-1]))])
    G -= G[j_mid - 1]
    t_lo, t_hi = float(G[0]), float(G[-1])
    T = min(-t_lo, t_hi, t_max)
    if require_t is not None and T < require_t:
        raise ValueError(
            f"clamped time window {T:.4g} is below the required {require_t:.4g}; "
            "refine the geodesic near its endpoints"
        )
    if T <= 0.0:
        raise ValueError("clamped time window is empty")
    times = np.linspace(-T, T, n_samples)
    phi = np.interp(times, G, s[1:-1])
    out_nodes = np.empty((n_samples, nodes.shape[1]))
    for j in range(nodes.shape[1]):
        out_nodes[:, j] = np.interp(phi, s, nodes[:, j])
    curve = SampledCurve(times=times, nodes=out_nodes)

    dts = np.diff(times)
    lens = segment_lengths(curve, wspace.space)
    mids = 0.5 * (out_nodes[:-1] + out_nodes[1:])
    k_mid = wspace.weight_at(mids)
    w_mid = 0.5 * k_mid * k_mid
    kinetic = 0.5 * (lens / dts) ** 2
    defect = float(np.max(np.abs(kinetic - w_mid)))
    action = float(np.sum((kinetic + w_mid) * dts))
    dk = float(np.sum(0.5 * (F[:-1] + F[1:]) * np.diff(s)))
    h_t = float(dts[0])
    diagnostics = {
        "clamp_f_lo": float(F[1]),
        "clamp_f_hi": float(F[-2]),
        "g_range": (t_lo, t_hi),
        "action_minus_dk_per_h": (action - dk) / h_t,
        "arc_nodes": int(s.size),
    }
    return ConnectionResult(
        curve=curve,
        x_minus=nodes[0].copy(),
        x_plus=nodes[-1].copy(),
        action=action,
        dk_value=dk,
        equipartition_defect=defect,
        window=T,
        diagnostics=diagnostics,
    )


class ConnectionReport(NamedTuple):
    action_gap: float
    equipartition_defect: float
    endpoint_gap_minus: float
    endpoint_gap_plus: float
    el_residual: float | None


def verify_connection(
    result: ConnectionResult,
    potential_like=None,
    wspace: WeightedSpace | None = None,
) -> ConnectionReport:
    """Independent checks on a connection: action gap, defect, ends, residual.

    The Euler-Lagrange residual max |gamma'' - grad W(gamma)| is evaluated by
    second differences on the uniform time grid when the potential exposes a
    gradient; otherwise it is None.
    """
    curve = result.curve
    space = wspace.space if wspace is not None else EuclideanSpace(curve.nodes.shape[1])
    dts = np.diff(curve.times)
    lens = segment_lengths(curve, space)
    mids = 0.5 * (curve.nodes[:-1] + curve.nodes[1:])
    if potential_like is not None:
        wv = _values_at(potential_like, mids)
    elif wspace is not None:
        kv = wspace.weight_at(mids)
        wv = 0.5 * kv * kv
    else:
        raise ValueError("need a potential or a weighted space")
    kinetic = 0.5 * (lens / dts) ** 2
    action = float(np.sum((kinetic + wv) * dts))
    defect = float(np.max(np.abs(kinetic - wv)))
    gap_minus = space.distance(curve.nodes[0], result.x_minus)
    gap_plus = space.distance(curve.nodes[-1], result.x_plus)
    residual = None
    if potential_like is not None and hasattr(potential_like, "gradients_at"):
        h = float(dts[0])
        if np.allclose(dts, h, rtol=1e-9) and curve.n_nodes >= 3:
            second = (
                curve.nodes[2:] - 2.0 * curve.nodes[1:-1] + curve.nodes[:-2]
            ) / h**2
            gradw = potential_like.gradients_at(curve.nodes[1:-1])
            residual = float(np.max(np.linalg.norm(second - gradw, axis=1)))
    return ConnectionReport(
        action_gap=action - result.dk_value,
        equipartition_defect=defect,
        endpoint_gap_minus=float(gap_minus),
        endpoint_gap_plus=float(gap_plus),
        el_residual=residual,
    )

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetconn import (
    EffectivePotentialSpace,
    FunnelEntryError,
    GridFunction,
    double_well,
    funnel_profile,
    funnel_project,
    gauge_fix_translations,
    mollify,
    optimal_translation,
    translation_objective,
)

S = np.linspace(-8.0, 8.0, 161)
TAILS = dict(tail_left=np.array([-1.0]), tail_right=np.array([1.0]))


def tanh_gf(shift=0.0):
    return GridFunction(s=S, values=np.tanh(S - shift), **TAILS)


def test_grid_function_validation():
    with pytest.raises(ValueError):
        GridFunction(s=np.array([0.0, 1.0]), values=np.zeros(2), **TAILS)
    with pytest.raises(ValueError):
        GridFunction(s=np.array([0.0, 1.0, 3.0]), values=np.zeros(3), **TAILS)
    with pytest.raises(ValueError):
        GridFunction(s=S, values=np.zeros(7), **TAILS)
    with pytest.raises(ValueError):
        GridFunction(s=S, values=np.zeros(S.size), bc="tails")
    with pytest.raises(ValueError):
        GridFunction(s=S, values=np.zeros(S.size), bc="periodic")


def test_fixed_bc_takes_edge_values_as_tails():
    v = GridFunction(s=S, values=np.sin(S), bc="fixed")
    assert v.tail_left[0] == v.values[0, 0]
    assert v.tail_right[0] == v.values[-1, 0]


def test_norm_of_constant():
    v = GridFunction(s=np.linspace(0.0, 1.0, 11), values=np.ones(11), bc="fixed")
    assert v.norm_l2() == pytest.approx(1.0, abs=1e-14)
    assert np.sum(v.quad_weights()) == pytest.approx(1.0, abs=1e-14)


def test_norm_matches_quadrature_oracle():
    v = tanh_gf()
    # integral of tanh^2 over [-L, L] is 2 (L - tanh L)
    exact = 2.0 * (8.0 - math.tanh(8.0))
    assert v.norm_l2() ** 2 == pytest.approx(exact, rel=1e-4)


def test_derivative_and_second_difference():
    v = GridFunction(s=S, values=np.sin(S), bc="fixed")
    interior = slice(2, -2)
    assert np.max(np.abs(v.derivative()[interior, 0] - np.cos(S[interior]))) < 2e-3
    assert np.max(np.abs(v.second_difference()[interior, 0] + np.sin(S[interior]))) < 2e-3


def test_translate_matches_shifted_samples():
    v = tanh_gf()
    w = v.translate(0.5)
    assert np.max(np.abs(w.values[:, 0] - np.tanh(S - 0.5))) < 5e-3
    assert np.array_equal(v.translate(0.0).values, v.values)


def test_translate_fills_with_tails():
    v = tanh_gf()
    w = v.translate(30.0)
    assert np.all(w.values == -1.0)


def test_csv_roundtrip(tmp_path):
    v = tanh_gf()
    path = tmp_path / "profile.csv"
    v.to_csv(path)
    back = GridFunction.from_csv(path, tail_left=v.tail_left, tail_right=v.tail_right)
    assert np.array_equal(back.s, v.s)
    assert np.array_equal(back.values, v.values)


def test_distance_to_self_is_zero():
    v = tanh_gf()
    assert v.distance_l2(v) == 0.0
    assert v.inner(v) == pytest.approx(v.norm_l2() ** 2, rel=1e-14)


# ---------------------------------------------------------------------------
# funnel envelopes


@pytest.mark.parametrize("p0", [2.0, 3.0, 5.0])
def test_envelope_solves_its_ode(p0):
    prof = funnel_profile(side=1, p0=p0, c=1.7, eps0=0.3, s0=2.0)
    s = np.linspace(2.5, 9.0, 400)
    e = prof.envelope(s)
    hh = 1e-4
    second = (prof.envelope(s + hh) - 2 * e + prof.envelope(s - hh)) / hh**2
    assert np.max(np.abs(second - 1.7 * e ** (p0 - 1.0))) < 1e-5


def test_envelope_mouth_value_and_slope():
    for p0 in (2.0, 2.5, 4.0):
        prof = funnel_profile(side=1, p0=p0, c=0.9, eps0=0.25, s0=-1.0)
        assert prof.envelope(-1.0) == pytest.approx(0.25, rel=1e-12)
        want = math.sqrt(2.0 * 0.9 / p0) * 0.25 ** (p0 / 2.0)
        assert prof.mouth_slope() == pytest.approx(want, rel=1e-12)
        hh = 1e-7
        fd = (prof.envelope(-1.0 + hh) - prof.envelope(-1.0)) / hh
        assert fd == pytest.approx(-want, rel=1e-5)


def test_mouth_slope_scaling_in_eps0():
    # halving the entry radius scales the entry slope by 2^(-p0/2) exactly
    for p0 in (2.0, 3.0, 4.0, 5.0):
        a = funnel_profile(side=1, p0=p0, c=2.0, eps0=0.2, s0=0.0)
        b = funnel_profile(side=1, p0=p0, c=2.0, eps0=0.1, s0=0.0)
        assert b.mouth_slope() / a.mouth_slope() == pytest.approx(
            2.0 ** (-p0 / 2.0), rel=1e-13
        )


def test_tail_l2_matches_quadrature():
    for p0 in (2.0, 3.0):
        prof = funnel_profile(side=1, p0=p0, c=1.2, eps0=0.4, s0=0.0)
        s = np.linspace(0.0, 400.0, 2_000_001)
        num = np.trapezoid(prof.envelope(s) ** 2, s)
        assert prof.tail_l2() == pytest.approx(num, rel=1e-3)


def test_envelope_constant_before_mouth():
    prof = funnel_profile(side=1, p0=2.0, c=1.0, eps0=0.5, s0=3.0)
    assert np.all(prof.envelope(np.array([-2.0, 0.0, 2.9])) == 0.5)
    assert np.all(prof.envelope_deriv(np.array([-2.0, 2.9])) == 0.0)


def test_envelope_mirror_sides():
    plus = funnel_profile(side=1, p0=3.0, c=1.0, eps0=0.3, s0=2.0)
    minus = funnel_profile(side=-1, p0=3.0, c=1.0, eps0=0.3, s0=-2.0)
    s = np.linspace(-9.0, 9.0, 301)
    assert np.allclose(plus.envelope(s), minus.envelope(-s), atol=0.0)


def test_funnel_profile_rejects_bad_exponents():
    for p0 in (1.5, 6.0, 7.0):
        with pytest.raises(ValueError):
            funnel_profile(side=1, p0=p0, c=1.0, eps0=0.1, s0=0.0)
    with pytest.raises(ValueError):
        funnel_profile(side=0, p0=2.0, c=1.0, eps0=0.1, s0=0.0)
    with pytest.raises(ValueError):
        funnel_profile(side=1, p0=2.0, c=-1.0, eps0=0.1, s0=0.0)


def test_funnel_project_clamps_excess_radius():
    v = tanh_gf()
    prof = funnel_profile(side=1, p0=2.0, c=2.0, eps0=0.2, s0=4.0)
    out = funnel_project(v, prof, well=np.array([1.0]))
    r = np.abs(out.values[:, 0] - 1.0)
    env = prof.envelope(S)
    assert np.all(r[S >= 4.0] <= env[S >= 4.0] + 1e-15)
    # unchanged before the mouth (up to the well-recentering roundoff)
    inside = S < 4.0
    assert np.max(np.abs(out.values[inside] - v.values[inside])) < 1e-15
    assert np.all(np.sign(out.values[:, 0] - 1.0) * np.sign(v.values[:, 0] - 1.0) >= 0.0)


def test_funnel_project_requires_entry():
    v = tanh_gf()
    tight = funnel_profile(side=1, p0=2.0, c=2.0, eps0=1e-6, s0=4.0)
    with pytest.raises(FunnelEntryError):
        funnel_project(v, tight, well=np.array([1.0]))


# ---------------------------------------------------------------------------
# mollification


def test_mollify_fixes_constants():
    v = GridFunction(s=S, values=np.full(S.size, 0.7),
                     tail_left=np.array([0.7]), tail_right=np.array([0.7]))
    out = mollify(v, delta=4 * v.h)
    assert np.max(np.abs(out.values - 0.7)) < 1e-14


def test_mollify_rejects_subgrid_width():
    v = tanh_gf()
    with pytest.raises(ValueError):
        mollify(v, delta=0.5 * v.h)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    k=st.integers(1, 12),
)
def test_mollify_respects_range(seed, k):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-2.0, 2.0, size=S.size)
    v = GridFunction(s=S, values=vals, **TAILS)
    out = mollify(v, delta=k * v.h)
    lo = min(vals.min(), -1.0)
    hi = max(vals.max(), 1.0)
    assert out.values.min() >= lo - 1e-12
    assert out.values.max() <= hi + 1e-12


def test_mollify_smooths():
    rng = np.random.default_rng(3)
    v = GridFunction(s=S, values=np.tanh(S) + 0.1 * rng.standard_normal(S.size),
                     **TAILS)
    rough = np.max(np.abs(v.second_difference()))
    out = mollify(v, delta=8 * v.h)
    assert np.max(np.abs(out.second_difference())) < 0.2 * rough


# ---------------------------------------------------------------------------
# translation fitting


def test_optimal_translation_recovers_shift():
    z_minus = tanh_gf()
    z_plus = z_minus.with_values(-z_minus.values)
    v = z_minus.translate(0.7374)
    fit = optimal_translation(v, z_minus, z_plus)
    assert fit.which == -1
    assert fit.shift == pytest.approx(0.7374, abs=1e-3)
    assert fit.misfit < 1e-4
    assert fit.unique


def test_optimal_translation_flags_tie():
    z_minus = tanh_gf()
    z_plus = z_minus.with_values(-z_minus.values)
    flat = z_minus.with_values(np.zeros_like(z_minus.values))
    fit = optimal_translation(flat, z_minus, z_plus)
    assert not fit.unique


def test_translation_objective_derivatives():
    z = tanh_gf()
    v = z.translate(0.3).with_values(z.translate(0.3).values + 0.05 * np.sin(S)[:, None])
    # probe away from multiples of the grid step, where the interpolated
    # misfit has slope kinks in the shift
    hh = 1e-6
    for m in (-0.373, 0.131, 0.519):
        f0, df, d2f = translation_objective(v, z, m)
        fp, _, _ = translation_objective(v, z, m + hh)
        fm, _, _ = translation_objective(v, z, m - hh)
        # dF and d2F smooth the interpolation kinks, so agreement with the
        # exact piecewise derivative is only O(h^2); plenty for a clipped
        # Newton polish
        assert df == pytest.approx((fp - fm) / (2 * hh), rel=2e-2, abs=1e-6)
        assert d2f > 0.0
        assert d2f == pytest.approx((fp - 2 * f0 + fm) / hh**2, rel=3e-1, abs=1e-3)


def test_gauge_fix_removes_drift():
    z = tanh_gf()
    drift = [z.translate(0.12 * k) for k in range(6)]
    fixed, shifts = gauge_fix_translations(drift)
    assert shifts[0] == 0.0
    gaps = [fixed[i].distance_l2(fixed[i + 1]) for i in range(5)]
    raw = [drift[i].distance_l2(drift[i + 1]) for i in range(5)]
    assert max(gaps) < 0.2 * max(raw)


def test_gauge_fix_never_lengthens_weighted_path():
    z = tanh_gf()
    rng = np.random.default_rng(11)
    nodes = [
        z.translate(0.1 * k).with_values(
            z.translate(0.1 * k).values + 0.02 * rng.standard_normal((S.size, 1))
        )
        for k in range(5)
    ]

    def keff(v):
        return 1.0 + v.norm_l2()

    def length(path):
        out = 0.0
        for a, b in zip(path, path[1:]):
            mid = a.with_values(0.5 * (a.values + b.values))
            out += keff(mid) * a.distance_l2(b)
        return out

    fixed, _ = gauge_fix_translations(nodes, keff=keff)
    assert length(fixed) <= length(nodes) + 1e-10


# ---------------------------------------------------------------------------
# the effective potential on profiles

DW = double_well()


def dw_space():
    return EffectivePotentialSpace(
        grid=S,
        n_components=1,
        bc="tails",
        potential=DW,
        tail_left=np.array([-1.0]),
        tail_right=np.array([1.0]),
        ref_value=4.0 / 3.0,
        symmetry="odd_first",
    )


def test_energy_of_tanh_profile():
    eps = dw_space()
    vals = np.tanh(S)[:, None]
    # the 1D action of the exact connection is 4/3; discretization adds O(h^2)
    assert eps.energy_1d(vals) == pytest.approx(4.0 / 3.0, abs=1e-3)
    assert eps.effective_potential(vals) == pytest.approx(0.0, abs=1e-3)


def test_energy_grad_matches_finite_differences():
    eps = dw_space()
    rng = np.random.default_rng(5)
    vals = np.tanh(S)[:, None] + 0.05 * rng.standard_normal((S.size, 1))
    g = eps.energy_1d_grad(vals)
    assert np.all(g[0] == 0.0) and np.all(g[-1] == 0.0)
    hh = 1e-6
    for j in (1, 40, 80, 159):
        bump = np.zeros_like(vals)
        bump[j, 0] = hh
        fd = (eps.energy_1d(vals + bump) - eps.energy_1d(vals - bump)) / (2 * hh)
        assert g[j, 0] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_relax_profile_reaches_the_connection():
    eps = dw_space()
    seed = np.clip(S / 4.0, -1.0, 1.0)[:, None]
    out, energy = eps.relax_profile(seed)
    assert energy == pytest.approx(4.0 / 3.0, abs=1e-3)
    assert np.max(np.abs(out[:, 0] - np.tanh(S))) < 5e-3
    # odd symmetry is projected, not just approximated
    assert np.array_equal(out[:, 0], -out[::-1, 0])


def test_symmetrize_is_a_projection():
    eps = dw_space()
    rng = np.random.default_rng(7)
    vals = rng.standard_normal((S.size, 1))
    once = eps.symmetrize(vals)
    assert np.array_equal(eps.symmetrize(once), once)
    assert np.array_equal(once[:, 0], -once[::-1, 0])


def test_symmetrize_needs_symmetric_grid():
    with pytest.raises(ValueError):
        EffectivePotentialSpace(
            grid=np.linspace(0.0, 1.0, 11),
            n_components=1,
            bc="fixed",
            potential=DW,
            symmetry="odd_first",
        )


def test_weighted_space_vanishes_on_stored_connections():
    eps = dw_space()
    z, _ = eps.relax_profile(np.tanh(S)[:, None], gtol=1e-12)
    gf = eps.grid_function(z)
    eps.z_minus = gf
    eps.z_plus = gf.with_values(-gf.values)
    eps.ref_value = eps.energy_1d(z)
    ws = eps.weighted_space()
    assert len(ws.zero_set) == 2
    assert ws.weight(ws.zero_set[0]) == 0.0
    assert np.all(ws.weight_grad(ws.zero_set[0]) == 0.0)
    shoved = z.ravel() + 0.3 * np.abs(np.sin(S))
    assert ws.weight(shoved) > 0.1
    assert ws.weight(shoved) == pytest.approx(
        math.sqrt(2.0) * eps.kappa(shoved), rel=1e-14
    )


def test_weight_grad_matches_finite_differences():
    eps = dw_space()
    eps.ref_value = 4.0 / 3.0
    ws = eps.weighted_space()
    flat = (np.tanh(S) + 0.2 * np.exp(-(S**2)))[:, None].ravel()
    g = ws.weight_grad(flat)
    # directional derivatives; per-coordinate probes drown in the roundoff
    # of the energy sums
    rng = np.random.default_rng(2)
    hh = 1e-6
    for _ in range(3):
        d = rng.standard_normal(flat.size)
        d[0] = d[-1] = 0.0
        fd = (ws.weight(flat + hh * d) - ws.weight(flat - hh * d)) / (2 * hh)
        assert float(g @ d) == pytest.approx(fd, rel=1e-6)

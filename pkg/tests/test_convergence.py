import math

import numpy as np
import pytest

from kramerslab import gibbs
from kramerslab.convergence import (StudyConfig, cutoff_average, cutoff_bump,
                                    cutoff_mass, fiber_bound_margin,
                                    gamma_limsup_check, gradient_bound_margin,
                                    nonlinear_observable,
                                    nonlinear_observable_limit, regime_study,
                                    run_ladder_study, theorem1_study,
                                    theorem2_study, traces, xi_flatness)
from kramerslab.grid_forms import Field, LimitField, assemble, b_form, build_grid
from kramerslab.transition import k_eps, lift

import oracles

# coarse, fast settings: the full-scale certification lives in the
# acceptance module
MINI = dict(ladder=(0.2, 0.1), nx=33, nxi=41, dt=5e-3, t_final=0.5,
            times=(0.1, 0.5))


@pytest.fixture(scope="module")
def mini_report(quartic):
    return run_ladder_study(StudyConfig(profile=quartic, **MINI))


def test_traces_of_lift_are_inputs(quartic):
    grid = build_grid(17, 21)
    rng = np.random.default_rng(2)
    um, up = rng.normal(size=17), rng.normal(size=17)
    tr = traces(lift(um, up, quartic, 0.1, grid))
    assert np.array_equal(tr.u_minus, um)
    assert np.array_equal(tr.u_plus, up)


def test_traces_of_constant(quartic):
    grid = build_grid(9, 11)
    tr = traces(Field(np.full((9, 11), 2.5), grid, 0.1))
    assert np.all(tr.u_minus == 2.5) and np.all(tr.u_plus == 2.5)


def test_cutoff_bump_shape():
    assert cutoff_bump(-1.0) == 1.0
    assert cutoff_bump(-0.5) == 0.0
    assert cutoff_bump(0.3) == 0.0
    assert cutoff_bump(1.0, side="+") == 1.0
    xs = np.linspace(-1.0, 1.0, 101)
    assert np.all((cutoff_bump(xs) >= 0.0) & (cutoff_bump(xs) <= 1.0))
    assert np.array_equal(cutoff_bump(xs, "+"), cutoff_bump(-xs, "-"))


def test_cutoff_average_of_constant(quartic):
    grid = build_grid(9, 41)
    field = Field(np.full((9, 41), 1.7), grid, 0.1)
    avg = cutoff_average(field, quartic)
    assert np.max(np.abs(avg - 1.7)) <= 1e-12


def test_cutoff_mass_tends_to_half(quartic):
    grid = build_grid(9, 81)
    devs = [abs(cutoff_mass(quartic, eps, grid) - 0.5)
            for eps in (0.2, 0.1, 0.05)]
    assert devs[0] > devs[1] > devs[2]
    assert devs[-1] < 0.05


def test_cutoff_average_recovers_well_density(quartic):
    grid = build_grid(17, 81)
    x = grid.x_nodes
    um, up = np.cos(np.pi * x), 1.0 + np.cos(np.pi * x)
    errs = []
    for eps in (0.2, 0.1, 0.05):
        field = lift(um, up, quartic, eps, grid)
        avg = cutoff_average(field, quartic, side="-")
        errs.append(float(np.max(np.abs(avg - um))))
    assert errs[0] > errs[1] > errs[2]


def test_gamma_limsup_tables(quartic):
    grid = build_grid(65, 81)
    ladder = (0.2, 0.1, 0.05)
    flat = gamma_limsup_check(lambda x: np.full_like(x, 0.3),
                              lambda x: np.full_like(x, 0.3),
                              ladder, grid, quartic, degenerate_floor=1e-10)
    assert max(flat.a_errors) <= 1e-12
    assert max(flat.b_errors) <= 1e-10  # grid-quadrature floor at this size
    assert flat.a_monotone and flat.b_monotone

    jump = gamma_limsup_check(lambda x: np.zeros_like(x),
                              lambda x: np.ones_like(x),
                              ladder, grid, quartic)
    assert jump.a_monotone and jump.b_monotone
    # unit jump: the energy form value is the rate coefficient itself, up to
    # the interpolation bias of this grid (4x the default-grid bias)
    for eps, a_val in zip(ladder, jump.a_eps):
        assert a_val == pytest.approx(k_eps(quartic, eps), rel=2e-2)
        assert a_val >= k_eps(quartic, eps) - 1e-10
    assert jump.a_limit == pytest.approx(0.5 * 1.8006326323142123, rel=1e-12)

    cos = gamma_limsup_check(lambda x: np.cos(np.pi * x),
                             lambda x: 1.0 + np.cos(np.pi * x),
                             ladder, grid, quartic)
    assert cos.a_monotone and cos.b_monotone


def test_mini_study_passes(mini_report):
    # coarse-grid ladder: drop the one check that needs default-grid
    # quadrature accuracy on the eps = 0.05 well widths (absent here)
    failures = [f for f in mini_report.failures()
                if not f.startswith("mass_pairing_small")]
    assert failures == []
    assert mini_report.regime == "critical"
    assert mini_report.limit_rate == pytest.approx(1.8006326323142123,
                                                   rel=1e-12)


def test_mini_study_rows_complete(mini_report):
    assert [r.eps for r in mini_report.rows] == [0.2, 0.1]
    for row in mini_report.rows:
        for t in MINI["times"]:
            assert np.isfinite(row.trace_err[t])
            assert np.isfinite(row.b_vals[t][2])
            assert row.fiber_margin[t] >= -1e-8
            assert row.jensen_margin[t] >= -1e-8
        assert row.fiber_margin[0.0] >= -1e-8


def test_report_serializes(mini_report):
    d = mini_report.to_dict()
    assert d["regime"] == "critical"
    assert len(d["rows"]) == 2
    assert isinstance(d["checks"], dict)
    import json
    json.dumps(d)


def test_theorem_wrappers_force_critical(quartic):
    cfg = StudyConfig(profile=quartic, regime="super", **MINI)
    rep = theorem1_study(cfg)
    assert rep.regime == "critical"
    rep2 = theorem2_study(cfg)
    assert rep2.regime == "critical"


def test_constant_data_is_exact(quartic):
    cfg = StudyConfig(profile=quartic,
                      u0_minus=lambda x: np.full_like(x, 0.8),
                      u0_plus=lambda x: np.full_like(x, 0.8), **MINI)
    rep = run_ladder_study(cfg)
    for row in rep.rows:
        for t in MINI["times"]:
            assert row.b_vals[t][2] <= 1e-9
            assert row.a_vals[t][2] <= 1e-9
            assert row.trace_err[t] <= 1e-9


def test_nonlinear_observable_consistency(quartic):
    grid = build_grid(17, 41)
    eps = 0.1
    forms = assemble(grid, quartic, eps)
    rng = np.random.default_rng(4)
    field = Field(rng.normal(size=(17, 41)), grid, eps)
    squared = nonlinear_observable(forms, field,
                                   lambda x, xi, r: r * r)
    assert squared == pytest.approx(b_form(forms.M, field, field), rel=1e-12)
    unit = nonlinear_observable(forms, field,
                                lambda x, xi, r: 1.0 + 0.0 * r)
    assert unit == pytest.approx(1.0, abs=1e-9)


def test_nonlinear_observable_limit_value():
    x = np.linspace(0.0, 1.0, 33)
    lf = LimitField(np.full(33, 4.0), np.full(33, 1.0), x)
    val = nonlinear_observable_limit(lf, lambda x_, xi, r: np.abs(r) ** 1.5)
    assert val == pytest.approx(0.5 * (8.0 + 1.0), rel=1e-12)


def test_power_observable_converges(mini_report):
    for t in MINI["times"]:
        errs = [r.observables["|u|^1.5"][t][2] for r in mini_report.rows]
        assert errs[1] < errs[0] or errs[1] <= 1e-8


def test_fiber_bound_is_sharp_on_lift(quartic):
    grid = build_grid(17, 81)
    eps = 0.1
    forms = assemble(grid, quartic, eps)
    field = lift(np.zeros(17), np.ones(17), quartic, eps, grid)
    margin = fiber_bound_margin(forms, field, k_eps(quartic, eps))
    assert -1e-8 <= margin <= 0.05


def test_jensen_bound_on_x_only_field(quartic):
    # purely spatial field: the normalized-average version of the bound
    # would fail here by a factor of four; the unnormalized one must hold
    grid = build_grid(33, 41)
    eps = 0.1
    forms = assemble(grid, quartic, eps)
    vals = np.broadcast_to(np.cos(np.pi * grid.x_nodes)[:, None],
                           (33, 41)).copy()
    margin = gradient_bound_margin(forms, Field(vals, grid, eps))
    assert margin >= -1e-8


def test_flatness_of_lift_decreases(quartic):
    grid = build_grid(17, 81)
    vals = []
    for eps in (0.2, 0.1, 0.05):
        field = lift(np.zeros(17), np.ones(17), quartic, eps, grid)
        vals.append(xi_flatness(field))
    assert vals[0] > vals[1] > vals[2]


def test_sub_regime_scaling(quartic):
    rep = regime_study("sub", StudyConfig(profile=quartic, **MINI))
    assert rep.regime == "sub"
    for row in rep.rows:
        assert row.rate_effective == pytest.approx(row.eps * row.rate,
                                                   rel=1e-12)
    assert rep.checks["effective_rate_decreasing"]
    failures = [f for f in rep.failures()
                if not f.startswith("mass_pairing_small")]
    assert failures == []


def test_super_regime_gap_shrinks(quartic):
    rep = regime_study("super", StudyConfig(profile=quartic, **MINI))
    assert rep.regime == "super"
    for t in MINI["times"]:
        gaps = [r.gap_norm[t] for r in rep.rows]
        assert gaps[1] < gaps[0]
    failures = [f for f in rep.failures()
                if not f.startswith("mass_pairing_small")]
    assert failures == []


def test_regime_validation(quartic):
    with pytest.raises(ValueError):
        regime_study("weird", StudyConfig(profile=quartic, **MINI))
    with pytest.raises(ValueError):
        StudyConfig(profile=quartic, ladder=(0.1, 0.2), nx=17, nxi=21,
                    dt=5e-3, t_final=0.1, times=(0.1,))
    with pytest.raises(ValueError):
        StudyConfig(profile=quartic, ladder=(0.2, 0.001), nx=17, nxi=21,
                    dt=5e-3, t_final=0.1, times=(0.1,))


def test_parallel_matches_serial(quartic):
    cfg = StudyConfig(profile=quartic, ladder=(0.2, 0.1), nx=17, nxi=21,
                      dt=1e-2, t_final=0.1, times=(0.1,))
    serial = run_ladder_study(cfg, max_workers=1)
    threaded = run_ladder_study(cfg, max_workers=2)
    for r1, r2 in zip(serial.rows, threaded.rows):
        assert r1.b_vals[0.1] == r2.b_vals[0.1]
        assert r1.pairing["xi^2"][0.1] == r2.pairing["xi^2"][0.1]


def test_initial_pairing_matches_recovery_objects(quartic):
    # at t = 0 the trajectory state is exactly the embedded pair, so study
    # pairings and recovery-family pairings are the same numbers
    from kramerslab.convergence import default_test_functions
    from kramerslab.grid_forms import assemble as _assemble, pair_measure, pair_limit
    grid = build_grid(17, 41)
    x = grid.x_nodes
    um, up = np.cos(np.pi * x), 1.0 + np.cos(np.pi * x)
    eps = 0.1
    forms = _assemble(grid, quartic, eps)
    state0 = lift(um, up, quartic, eps, grid)
    lf0 = LimitField(um, up, x)
    for name, fn in default_test_functions().items():
        ve = pair_measure(forms, state0, fn)
        vl = pair_limit(lf0, fn, grid.quad_order)
        assert np.isfinite(ve) and np.isfinite(vl)
        # the recovery-family error at t = 0 is exactly this difference
        assert abs(ve - vl) == abs(pair_measure(forms, state0, fn) - vl)


def test_failed_rung_is_recorded(quartic, monkeypatch):
    import kramerslab.convergence as conv
    from kramerslab.evolve_kramers import SolverError
    real_solve = conv.solve

    def flaky(forms, *args, **kw):
        if forms.eps == 0.1:
            raise SolverError("synthetic stagnation", residual=1.0)
        return real_solve(forms, *args, **kw)

    monkeypatch.setattr(conv, "solve", flaky)
    cfg = StudyConfig(profile=quartic, ladder=(0.2, 0.1), nx=17, nxi=21,
                      dt=1e-2, t_final=0.1, times=(0.1,))
    rep = run_ladder_study(cfg)
    assert [r.eps for r in rep.rows] == [0.2]
    assert set(rep.row_errors) == {0.1}
    assert "SolverError" in rep.row_errors[0.1]
    assert rep.checks == {"ladder_complete": False}
    assert not rep.all_ok
    assert "row_errors" in rep.to_dict()

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_scenario
from smheat import catalog
from smheat.errors import AssumptionError, ConfigError, ConvergenceError
from smheat.sm import SmSpec, measure, sample_path
from smheat.solver import (MildSolver, Scenario, drift_term, initial_term, phi, picard_solve,
                           residual_ratios, stochastic_term)


def wiener_path(sc, seed=0, levels=None):
    return sample_path(SmSpec.create("wiener"), sc.horizon, levels or sc.path_levels, seed)


class TestScenario:
    def test_rejects_sigma_violating_a6(self):
        with pytest.raises(AssumptionError, match="A6"):
            make_scenario(sigma=("holder_rough", (0.45, 1.0, 1.0)))

    def test_rejects_unbounded_drift(self):
        with pytest.raises(AssumptionError, match="A3"):
            make_scenario(f=("linear", (1.0,)))

    def test_rejects_wrong_role(self):
        sc = make_scenario()
        with pytest.raises(ConfigError):
            replace(sc, f=catalog.make("sigma", "constant"))

    def test_path_levels_must_cover_grid(self):
        with pytest.raises(ConfigError):
            make_scenario(n_t=8, sm_levels=6)

    @pytest.mark.parametrize("kw", [dict(a=0.0), dict(x_min=1.0, x_max=1.0), dict(quad_nodes=8),
                                    dict(picard_tol=0.0), dict(horizon=-1.0)])
    def test_invalid_numbers(self, kw):
        with pytest.raises(ConfigError):
            make_scenario(**kw)

    def test_path_mismatch(self):
        sc = make_scenario(n_t=6)
        with pytest.raises(ValueError):
            MildSolver(sc).stochastic(wiener_path(sc, levels=4))
        with pytest.raises(ValueError):
            stochastic_term(sc, sample_path(sc.sm, 2.0, 6, 0), 3, 3)


class TestInitialTerm:
    def test_constant(self):
        sc = make_scenario(u0=("constant", (2.5,)))
        assert initial_term(sc, 0.7, 1.3) == pytest.approx(2.5, abs=1e-14)

    def test_gaussian(self):
        sc = make_scenario()
        assert initial_term(sc, 1.0, 0.0) == pytest.approx(1 / math.sqrt(5), abs=1e-11)

    def test_time_zero_is_exact(self):
        sc = make_scenario(u0=("scaled_sine", (1.3, 2.0)))
        assert initial_term(sc, 0.0, 0.37) == 1.3 * np.sin(2.0 * 0.37)

    def test_outside_horizon(self):
        with pytest.raises(ValueError):
            initial_term(make_scenario(), 1.5, 0.0)


class TestDriftTerm:
    def test_zero_drift(self, full_scenario):
        sc = replace(full_scenario, f=catalog.make("f", "zero"))
        u = np.ones((len(sc.t_grid), sc.n_x))
        assert drift_term(sc, u, 10, 5) == 0.0

    def test_constant_drift_integrates_to_ct(self):
        sc = make_scenario(f=("constant", (0.7,)))
        u = np.zeros((len(sc.t_grid), sc.n_x))
        for i in (1, 17, 64):
            assert drift_term(sc, u, i, 3) == pytest.approx(0.7 * sc.t_grid[i], abs=1e-10)
        np.testing.assert_allclose(MildSolver(sc).drift(u), 0.7 * sc.t_grid[:, None] * np.ones(sc.n_x),
                                   atol=1e-10)

    def test_missing_rows(self, full_scenario):
        with pytest.raises(ValueError):
            drift_term(full_scenario, np.zeros((3, full_scenario.n_x)), 5, 0)

    def test_vectorized_matches_pointwise(self, full_scenario):
        sc = full_scenario
        rng = np.random.default_rng(1)
        u = rng.normal(size=(len(sc.t_grid), sc.n_x))
        grid = MildSolver(sc).drift(u)
        for i, j in [(1, 0), (7, 40), (33, 20), (64, 13)]:
            assert grid[i, j] == pytest.approx(drift_term(sc, u, i, j), abs=1e-13)

    def test_refinement_bracket(self, full_scenario, seed=0):
        base = replace(full_scenario, sm_levels=10)
        path = wiener_path(base, seed, 10)
        vals = []
        for nt in (4, 6, 8):
            sc = replace(base, n_t=nt)
            u = picard_solve(sc, path).field.values
            vals.append(drift_term(sc, u, len(sc.t_grid) - 1, sc.n_x // 2))
        coarse, refined, reference = vals
        assert abs(reference - refined) <= 2 * abs(coarse - refined)


class TestStochasticTerm:
    @pytest.mark.parametrize("kind,kw", [("wiener", {}), ("alpha_stable", {"alpha": 1.5}),
                                         ("compensated_poisson", {"intensity": 4.0, "jump_mean": 0.3}),
                                         ("deterministic_linear", {}), ("zero", {})])
    def test_unit_sigma_telescopes(self, kind, kw):
        sc = make_scenario(sm=kind, sm_kw=kw, n_t=7, sm_levels=9)
        path = sample_path(sc.sm, 1.0, 9, 5)
        S = MildSolver(sc).stochastic(path)
        expected = np.array([measure(path, 0.0, t) for t in sc.t_grid])
        np.testing.assert_allclose(S, np.broadcast_to(expected[:, None], S.shape), rtol=0, atol=1e-12)
        for i, j in [(0, 0), (1, 3), (77, 20), (128, 40)]:
            assert stochastic_term(sc, path, i, j) == pytest.approx(expected[i], abs=1e-12)

    def test_zero_measure(self, full_scenario):
        sc = replace(full_scenario, sm=SmSpec.create("zero"))
        path = sample_path(sc.sm, 1.0, sc.n_t, 0)
        assert stochastic_term(sc, path, 40, 7) == 0.0
        assert not MildSolver(sc).stochastic(path).any()

    @pytest.mark.parametrize("sigma", [("time_space_sine", (1.0, 2.0, 1.0)), ("holder_rough", (0.7, 3.0, 2.0))])
    def test_vectorized_matches_pointwise(self, sigma):
        sc = make_scenario(sigma=sigma)
        path = wiener_path(sc, 3)
        S = MildSolver(sc).stochastic(path)
        for i, j in [(1, 0), (9, 11), (50, 30), (64, 40)]:
            assert S[i, j] == pytest.approx(stochastic_term(sc, path, i, j), abs=1e-13)

    @pytest.mark.parametrize("seed", [0, 4, 8])
    def test_refinement_bracket_same_path(self, seed):
        base = make_scenario(sigma=("time_space_sine", (1.0, 2.0, 1.0)), sm_levels=10)
        path = wiener_path(base, seed, 10)
        vals = [stochastic_term(replace(base, n_t=nt), path, 1 << nt, 20) for nt in (6, 8, 10)]
        coarse, refined, reference = vals
        assert abs(reference - refined) <= 2 * abs(coarse - refined)

    def test_phi_delta_limit(self, full_scenario):
        sc = full_scenario
        assert phi(sc, 0.5, 0.3, 0.5) == sc.sigma(0.5, 0.3)
        with pytest.raises(ValueError):
            phi(sc, 0.5, 0.3, 0.6)

    def test_doubling_sigma_doubles_exactly(self):
        sc1 = make_scenario(sigma=("constant", (1.5,)))
        sc2 = make_scenario(sigma=("constant", (3.0,)))
        path = wiener_path(sc1, 2)
        np.testing.assert_array_equal(MildSolver(sc2).stochastic(path), 2 * MildSolver(sc1).stochastic(path))
        for i, j in [(5, 3), (64, 40)]:
            assert stochastic_term(sc2, path, i, j) == 2 * stochastic_term(sc1, path, i, j)

    def test_doubling_sine_sigma_doubles_exactly(self):
        sc1 = make_scenario(sigma=("time_space_sine", (1.0, 2.0, 1.0)))
        sc2 = make_scenario(sigma=("time_space_sine", (2.0, 2.0, 1.0)))
        path = wiener_path(sc1, 2)
        np.testing.assert_array_equal(MildSolver(sc2).stochastic(path), 2 * MildSolver(sc1).stochastic(path))


class TestPicard:
    def test_no_coupling_converges_immediately(self):
        sc = make_scenario(sm="zero")
        path = sample_path(sc.sm, 1.0, sc.n_t, 0)
        sol = picard_solve(sc, path)
        assert sol.iterations == 1
        np.testing.assert_array_equal(sol.field.values, MildSolver(sc).initial)

    @pytest.mark.parametrize("kind,kw", [("wiener", {}), ("alpha_stable", {"alpha": 1.2})])
    def test_superposition(self, kind, kw):
        sc = make_scenario(sm=kind, sm_kw=kw)
        path = sample_path(sc.sm, 1.0, sc.n_t, 9)
        u = picard_solve(sc, path).field.values
        heat = np.array([[initial_term(sc, t, x) for x in sc.x_grid] for t in sc.t_grid])
        mu = np.array([measure(path, 0.0, t) for t in sc.t_grid])
        np.testing.assert_allclose(u, heat + mu[:, None], rtol=0, atol=1e-12)

    def test_uniqueness_from_two_starts(self, full_scenario):
        sc = full_scenario
        path = wiener_path(sc, 11)
        a = picard_solve(sc, path, 0.0)
        b = picard_solve(sc, path, 1.0)
        assert np.max(np.abs(a.field.values - b.field.values)) < 10 * sc.picard_tol
        for sol in (a, b):
            assert np.all(residual_ratios(sol.residuals)[-3:] < 1)

    def test_row_zero_is_initial_condition(self, full_scenario):
        sol = picard_solve(full_scenario, wiener_path(full_scenario, 1))
        np.testing.assert_array_equal(sol.field.values[0], full_scenario.u0(full_scenario.x_grid))

    def test_deterministic(self, full_scenario):
        path = wiener_path(full_scenario, 6)
        a = picard_solve(full_scenario, path).field.values
        b = picard_solve(full_scenario, wiener_path(full_scenario, 6)).field.values
        assert a.tobytes() == b.tobytes()

    def test_bounded(self, full_scenario):
        sc = full_scenario
        sol = picard_solve(sc, wiener_path(sc, 3))
        u = sol.field.values
        assert np.all(np.isfinite(u))
        bracket = sc.u0.bound + sc.horizon * sc.f.bound + np.max(np.abs(sol.stochastic))
        assert np.max(np.abs(u)) <= bracket
        assert np.max(np.abs(u)) < 10 * bracket

    def test_non_convergence_is_reported(self, full_scenario):
        sc = replace(full_scenario, picard_max_iter=3)
        with pytest.raises(ConvergenceError) as info:
            picard_solve(sc, wiener_path(sc, 0))
        assert len(info.value.residuals) == 3

    def test_field_is_immutable(self, full_scenario):
        fld = picard_solve(full_scenario, wiener_path(full_scenario)).field
        with pytest.raises(ValueError):
            fld.values[0, 0] = 1.0

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=10, deadline=None)
    def test_solution_is_fixed_point(self, seed):
        sc = make_scenario(f=("damped_sine", (0.8,)), sigma=("holder_rough", (0.75, 2.0, 1.0)), n_t=4, n_x=21)
        path = wiener_path(sc, seed)
        solver = MildSolver(sc)
        sol = solver.solve(path)
        u = sol.field.values
        again = solver.initial + solver.drift(u) + solver.stochastic(path)
        assert np.max(np.abs(again - u)) < 1e-9

import math

import numpy as np
import pytest

from ticketdp.demand import (DeadlineRegime, DemandProfile, Environment, PriceGrid,
                             deadline_factor, flat_regime, intensity, intensity_table,
                             moderate_regime, price_response, strong_regime,
                             validate_environment)


def default_env(**kw):
    args = dict(eta=0.01, deadline=flat_regime(), inventory_q=700, horizon_t=60,
                grid=PriceGrid(tuple(float(p) for p in range(40, 161, 10))))
    args.update(kw)
    return Environment(**args)


class TestPriceResponse:
    def test_zero_price_is_one(self):
        assert price_response(0.0, 0.01) == 1.0
        assert price_response(0.0, 1.234) == 1.0

    def test_exponential_values(self):
        assert price_response(100.0, 0.01) == pytest.approx(math.exp(-1.0), rel=1e-12)
        assert price_response(200.0, 0.0075) == pytest.approx(math.exp(-1.5), rel=1e-12)

    def test_strictly_decreasing_on_grid(self):
        grid = [40.0, 70.0, 100.0, 160.0]
        vals = [price_response(p, 0.013) for p in grid]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            price_response(-1.0, 0.01)
        with pytest.raises(ValueError):
            price_response(10.0, 0.0)
        with pytest.raises(ValueError):
            price_response(10.0, -0.5)


class TestDeadlineFactor:
    def test_flat_is_one_everywhere(self):
        for t in (0, 13, 60):
            assert deadline_factor(t, flat_regime(), 60) == 1.0

    def test_ramp_start_is_one(self):
        reg = moderate_regime(ramp_window=10, coeff=0.5)
        assert deadline_factor(50, reg, 60) == 1.0
        assert deadline_factor(20, reg, 60) == 1.0

    def test_final_period_value(self):
        reg = moderate_regime(ramp_window=10, coeff=0.5)
        assert deadline_factor(60, reg, 60) == pytest.approx(1.5, abs=1e-15)

    def test_quadratic_midpoint(self):
        reg = strong_regime(ramp_window=10, coeff=1.5)
        # halfway up the ramp: r = 0.25
        assert deadline_factor(55, reg, 60) == pytest.approx(1 + 1.5 * 0.25, abs=1e-12)

    def test_non_decreasing(self):
        for reg in (flat_regime(), moderate_regime(), strong_regime()):
            vals = [deadline_factor(t, reg, 60) for t in range(61)]
            assert all(b >= a for a, b in zip(vals, vals[1:]))
            assert all(v >= 1.0 for v in vals)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            deadline_factor(-1, flat_regime(), 60)
        with pytest.raises(ValueError):
            deadline_factor(61, flat_regime(), 60)


class TestIntensity:
    def test_zero_demand(self):
        env = default_env()
        prof = DemandProfile(np.r_[np.zeros(60), 1.0], "z")
        assert intensity(0, 100.0, prof, env) == 0.0

    def test_flat_phi_value(self):
        env = default_env()
        prof = DemandProfile(np.full(61, 100.0), "c")
        assert intensity(5, 100.0, prof, env) == pytest.approx(100 * math.exp(-1.0),
                                                               rel=1e-12)

    def test_phi_two_halves_exponent(self):
        # coeff 1.0 makes phi(T) = 2 exactly
        env = default_env(deadline=DeadlineRegime("strong", 10, 1.0))
        prof = DemandProfile(np.full(61, 100.0), "c")
        assert intensity(60, 100.0, prof, env) == pytest.approx(100 * math.exp(-0.5),
                                                                rel=1e-12)

    def test_off_grid_price_rejected(self):
        env = default_env()
        prof = DemandProfile(np.full(61, 100.0), "c")
        with pytest.raises(ValueError):
            intensity(0, 101.0, prof, env)

    def test_table_matches_pointwise(self):
        env = default_env(deadline=strong_regime(), horizon_t=12)
        prof = DemandProfile(np.linspace(5, 50, 13), "ramp")
        table = intensity_table(prof, env)
        for t in (0, 7, 12):
            for k, p in enumerate(env.grid.levels):
                assert table[t, k] == intensity(t, p, prof, env)


class TestValidateEnvironment:
    def test_valid_passes_through(self):
        env = default_env()
        assert validate_environment(env) is env

    def test_eta_violation_names_field(self):
        with pytest.raises(ValueError, match="eta"):
            validate_environment(default_env(eta=0.0))

    def test_duplicate_grid_level(self):
        with pytest.raises(ValueError, match="grid"):
            validate_environment(default_env(grid=PriceGrid((50.0, 50.0, 60.0))))

    def test_all_violations_reported(self):
        env = default_env(eta=-1.0, inventory_q=0)
        with pytest.raises(ValueError) as exc:
            validate_environment(env)
        assert "eta" in str(exc.value) and "inventory_q" in str(exc.value)


class TestDemandProfile:
    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            DemandProfile(np.array([1.0, -0.1]), "bad")

    def test_rejects_all_zero(self):
        with pytest.raises(ValueError):
            DemandProfile(np.zeros(5), "zero")

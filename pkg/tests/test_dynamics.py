import numpy as np
import pytest
from scipy import stats

from qpscope.dynamics import (
    RateModel,
    build_generator,
    exchange_rate,
    gamma_p_closed_form,
    gamma_p_steady,
    mean_parity,
    parity_exit_rates,
    sample_parity_trajectory,
    sample_trajectory,
    steady_state,
)
from qpscope.errors import DegenerateModelError, ValidationError

TWO_PI = 2 * np.pi
GAMMA = TWO_PI * 13e6
DELTA = TWO_PI * 20e6
G0, G1 = 0.85, 13.0


def paper_model(x, mode="single"):
    return RateModel(gamma0=G0, gamma1=G1, gamma=GAMMA, omega=x * GAMMA, delta=DELTA, drive_mode=mode)


class TestGenerator:
    def test_matrix_structure(self):
        m = paper_model(1.0)
        a = build_generator(m).matrix
        # decay-assisted parity switch feeds (1,-) -> (0,+) and there is no
        # channel (0,-) -> (1,+)
        assert a[0, 3] == G1
        assert a[1, 2] == 0.0
        assert a[2, 1] == G1
        # qubit-preserving switches at gamma0 everywhere
        for i, j in ((2, 0), (0, 2), (3, 1), (1, 3)):
            assert a[i, j] == G0

    def test_column_sums_vanish(self):
        a = build_generator(paper_model(1.0)).matrix
        assert np.max(np.abs(a.sum(axis=0))) < 1e-12 * np.max(np.abs(a))

    def test_exchange_rates(self):
        m = paper_model(1.0)
        resonant, cross = m.exchange_rates()
        assert resonant == pytest.approx(GAMMA, rel=1e-12)  # Omega^2/Gamma at x=1
        assert cross == pytest.approx(GAMMA**3 / (GAMMA**2 + 4 * DELTA**2), rel=1e-12)
        dual = paper_model(1.0, mode="dual")
        ep, em = dual.exchange_rates()
        assert ep == em == pytest.approx(resonant + cross, rel=1e-12)

    def test_detuned_exchange_identity(self):
        assert exchange_rate(100.0, 30.0, 0.0) == pytest.approx(9.0, rel=1e-12)
        assert exchange_rate(100.0, 30.0, 50.0) == pytest.approx(
            100 * 900 / (100**2 + 4 * 50**2), rel=1e-12
        )

    def test_thermal_occupation_adds_upward_rates(self):
        m = RateModel(gamma0=1.0, gamma1=0.0, gamma=100.0, omega=0.0, delta=0.0, n_th=0.01)
        a = build_generator(m).matrix
        assert a[1, 0] == pytest.approx(1.0)  # gamma * n_th
        assert a[3, 2] == pytest.approx(1.0)

    def test_no_drive_no_assist_structure(self):
        m = RateModel(gamma0=0.0, gamma1=5.0, gamma=100.0, omega=0.0, delta=50.0)
        a = build_generator(m).matrix
        # only decay and decay-assisted switches remain
        assert a[1, 0] == 0 and a[3, 2] == 0
        assert a[0, 1] == 100.0 and a[2, 1] == 5.0

    def test_validation(self):
        with pytest.raises(ValidationError):
            RateModel(gamma0=-1, gamma1=0, gamma=1, omega=0, delta=0)
        with pytest.raises(ValidationError):
            RateModel(gamma0=0, gamma1=0, gamma=0, omega=0, delta=0)
        with pytest.raises(ValidationError):
            RateModel(gamma0=0, gamma1=0, gamma=1, omega=0, delta=0, drive_mode="triple")


class TestSteadyState:
    def test_no_mixing_degenerate(self):
        # without any parity-switch channel the two parity sectors never
        # communicate and the stationary state is not unique
        m = RateModel(gamma0=0.0, gamma1=0.0, gamma=100.0, omega=0.0, delta=0.0)
        with pytest.raises(DegenerateModelError):
            steady_state(build_generator(m))

    def test_ground_state_exchange_limit(self):
        m = RateModel(gamma0=2.0, gamma1=0.0, gamma=100.0, omega=0.0, delta=50.0)
        p = steady_state(build_generator(m))
        assert p == pytest.approx([0.5, 0.0, 0.5, 0.0], abs=1e-15)

    def test_saturation_limit(self):
        p = steady_state(build_generator(paper_model(1e3)))
        assert p == pytest.approx([0.25] * 4, abs=1e-3)

    def test_residual_small(self):
        for x in (0.1, 1.0, 4.0):
            g = build_generator(paper_model(x))
            p = steady_state(g)
            assert np.max(np.abs(g.matrix @ p)) < 1e-10 * np.max(np.abs(g.matrix))
            assert p.sum() == pytest.approx(1.0, abs=1e-14)
            assert np.all(p > 0)

    def test_closed_form_is_leading_order(self):
        # at laboratory scale the closed form deviates from the exact
        # stationary rate by O((gamma0+gamma1)/gamma) ~ 1e-7, not by zero
        m = paper_model(2**-0.5)
        exact = gamma_p_steady(m)
        cf = gamma_p_closed_form(G0, G1, GAMMA, DELTA, 2**-0.5)
        rel = abs(exact - cf) / cf
        assert 1e-9 < rel < 2e-7

    def test_closed_form_equivalence_in_slow_rate_regime(self):
        # the identity gamma_p = gamma0 + (p1+ + p1-) gamma1 becomes exact as
        # the parity rates become slow against the drive; brute-force grid
        gamma = TWO_PI * 13e12
        delta = gamma * 20 / 13
        rng = np.random.default_rng(42)
        for _ in range(100):
            g0 = 10 ** rng.uniform(-1, 1)
            g1 = 10 ** rng.uniform(0, 2)
            x = rng.uniform(0, 10)
            m = RateModel(gamma0=g0, gamma1=g1, gamma=gamma, omega=x * gamma, delta=delta)
            cf = gamma_p_closed_form(g0, g1, gamma, delta, x)
            assert abs(gamma_p_steady(m) - cf) / cf < 1e-10


class TestClosedForm:
    @pytest.mark.parametrize("g0", [0.1, 0.85, 3.7, 9.99])
    def test_undriven_limit_exact(self, g0):
        assert gamma_p_closed_form(g0, 13.0, GAMMA, DELTA, 0.0) == g0

    def test_strong_drive_limit(self):
        gp = gamma_p_closed_form(G0, G1, GAMMA, DELTA, 1e3)
        assert gp == pytest.approx(G0 + G1 / 2, rel=1e-3)
        # model range [0.85, 7.35] 1/s is consistent with observed 0.8-7
        assert gp == pytest.approx(7.35, rel=1e-3)
        assert 7.0 < gp and G0 < 1.0

    def test_magic_power_value(self):
        gp = gamma_p_closed_form(G0, G1, GAMMA, DELTA, 2**-0.5)
        assert gp == pytest.approx(2.1059, rel=1e-3)

    def test_monotone_in_drive(self):
        xs = np.linspace(0, 10, 400)
        gps = gamma_p_closed_form(G0, G1, GAMMA, DELTA, xs)
        assert np.all(np.diff(gps) >= -1e-12)


class TestMeanParity:
    def test_balanced(self):
        assert mean_parity(np.array([0.5, 0.0, 0.5, 0.0])) == 0.0

    def test_saturation_symmetry(self):
        p = steady_state(build_generator(paper_model(1e3)))
        assert abs(mean_parity(p)) < 1e-3

    def test_single_tone_pumps_into_undriven_parity(self):
        for x in (0.3, 0.7, 1.5, 3.0):
            p = steady_state(build_generator(paper_model(x)))
            assert mean_parity(p) < 0.0

    def test_minimum_depth(self):
        xs = np.linspace(0.05, 4, 300)
        values = [mean_parity(steady_state(build_generator(paper_model(x)))) for x in xs]
        assert min(values) == pytest.approx(-0.487, abs=0.05)

    def test_validation(self):
        with pytest.raises(ValidationError):
            mean_parity(np.array([0.5, 0.5, 0.5, 0.5]))
        with pytest.raises(ValidationError):
            mean_parity(np.array([1.0, 0.0, 0.0]))


class TestEffectiveParityRates:
    def test_against_exact_rate(self):
        for x, mode in ((0.5, "single"), (1.0, "single"), (2**-0.5, "dual")):
            m = paper_model(x, mode)
            rp, rm = parity_exit_rates(m)
            event_rate = 2 * rp * rm / (rp + rm)
            assert event_rate == pytest.approx(gamma_p_steady(m), rel=1e-5)

    def test_dual_tone_symmetric(self):
        rp, rm = parity_exit_rates(paper_model(2**-0.5, "dual"))
        assert rp == rm


BENIGN = RateModel(gamma0=1.0, gamma1=10.0, gamma=2000.0, omega=2000.0, delta=3000.0)


class TestTrajectorySampling:
    def test_deterministic(self):
        g = build_generator(BENIGN)
        a = sample_trajectory(g, 1.0, 12345)
        b = sample_trajectory(g, 1.0, 12345)
        assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)

    def test_trajectory_invariants(self):
        traj = sample_trajectory(build_generator(BENIGN), 0.5, 5)
        assert traj.times[0] == 0.0
        assert np.all(np.diff(traj.times) > 0)
        assert np.all(traj.states[1:] != traj.states[:-1])

    def test_occupations_match_steady_state(self):
        # occupancy statistics are limited by the slowest relaxation mode,
        # so the tolerance comes from the generator's spectral gap
        g = build_generator(BENIGN)
        total = 1e5 / np.max(g.exit_rates)
        traj = sample_trajectory(g, total, 99, max_jumps=20_000_000)
        occ = traj.occupancy() / traj.total_time
        p = steady_state(g)
        gap = np.sort(np.abs(np.linalg.eigvals(g.matrix).real))[1]
        sigma = np.sqrt(2.0 * p * (1 - p) / (gap * total))
        assert np.all(np.abs(occ - p) < 4.0 * sigma + 1e-6)

    def test_switch_count_matches_closed_form(self):
        rp, rm = parity_exit_rates(BENIGN)
        total = 2000 * (1 / rp + 1 / rm)
        traj = sample_trajectory(build_generator(BENIGN), total, 123, max_jumps=20_000_000)
        n = traj.parity_switch_times().size
        expected = gamma_p_closed_form(1.0, 10.0, 2000.0, 3000.0, 1.0) * total
        assert abs(n - expected) < 3.0 * np.sqrt(expected)

    def test_parity_dwells_exponential(self):
        # aggregated dwell in the + parity manifold is exponential at the
        # effective exit rate (Kolmogorov-Smirnov at the 1% level)
        rp, rm = parity_exit_rates(BENIGN)
        total = 2000 * (1 / rp + 1 / rm)
        traj = sample_trajectory(build_generator(BENIGN), total, 123, max_jumps=20_000_000)
        par = traj.state_parities()
        t = np.concatenate([traj.times, [traj.total_time]])
        switch = np.nonzero(par[1:] != par[:-1])[0] + 1
        bounds = np.concatenate([[0], switch, [par.size]])
        seg_par = par[bounds[:-1]]
        dwells = t[bounds[1:]] - t[bounds[:-1]]
        plus = dwells[seg_par > 0][1:-1]  # interior segments only
        assert plus.size > 1500
        ks = stats.kstest(plus, "expon", args=(0, 1 / rp))
        assert ks.pvalue > 0.01

    def test_absorbing_state_flag(self):
        # no exits from the ground states once parity mixing and drive stop;
        # starting excited, the walk decays and then stops early
        m = RateModel(gamma0=0.0, gamma1=5.0, gamma=100.0, omega=0.0, delta=0.0)
        traj = sample_trajectory(build_generator(m), 10.0, 3, initial_state=1)
        assert traj.ended_early
        assert traj.states[-1] in (0, 2)


class TestParityTelegraphSampling:
    def test_deterministic_and_structure(self):
        m = paper_model(2**-0.5, "dual")
        a = sample_parity_trajectory(m, 100.0, 7)
        b = sample_parity_trajectory(m, 100.0, 7)
        assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
        assert a.parities == (+1, -1)
        assert np.all(a.states[1:] != a.states[:-1])

    def test_dwell_means(self):
        m = paper_model(1.0)
        rp, rm = parity_exit_rates(m)
        traj = sample_parity_trajectory(m, 3000.0, 21)
        par = traj.state_parities()
        t = np.concatenate([traj.times, [traj.total_time]])
        dwells = np.diff(t)
        mean_p = dwells[par > 0][1:-1].mean() if (par > 0).sum() > 2 else np.nan
        mean_m = dwells[par < 0][1:-1].mean()
        n_p = max((par > 0).sum() - 2, 1)
        assert abs(mean_p - 1 / rp) < 4 / rp / np.sqrt(n_p)
        assert abs(mean_m - 1 / rm) < 4 / rm / np.sqrt((par < 0).sum())

    def test_seed_split_rule_gives_independent_records(self):
        m = paper_model(1.0)
        a = sample_parity_trajectory(m, 50.0, 100)
        b = sample_parity_trajectory(m, 50.0, 101)
        assert a.times.size != b.times.size or not np.array_equal(a.times, b.times)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tripletsim.coincidence import (REFERENCE_CAR_3FOLD, car_secondary,
                                    car_secondary_closed_form, car_threefold, compute_figures,
                                    generated_rate, higher_order_ratio,
                                    leakage_accidental_coincidence, leakage_click_probability,
                                    leakage_first_order_tolerance, pattern_probabilities,
                                    snr_secondary, threefold_noise, threefold_probability,
                                    triplet_probability, triplet_rate, twofold_correlated,
                                    twofold_noise)
from tripletsim.photon_stats import PhotonNumberDistribution, poisson_distribution

P_CONV = 2.498445e-7
ES, EI, E1 = 0.103, 0.190, 0.117
NS, NI, N1 = 7.5e-6, 1.8e-5, 7e-6

# frozen from the 40-digit references in oracles.py
FROZEN = {
    "p_i1": 0.028833157510761816,
    "p_s2": 7.506433447603086e-06,
    "p_i2": 1.8011867400062534e-05,
    "p_corr_2fold": 1.22236421625e-09,
    "p_noise_2fold": 1.35204810028875e-10,
    "snr_2fold": 9.040833798656616,
    "p_3fold_triplet": 1.113814504312338e-10,
    "p_3fold_total": 1.741302565715315e-10,
    "p_noise_3fold": 3.906938133288932e-12,
    "p_noise_3fold_approx": 3.898381583775182e-12,
    "snr_3fold": 44.5694942256343,
    "rate_triplet_detected": 4.009732215524417,
    "rate_triplet_generated": 1751.2118302147526,
    "r_printed": 1.0659141397315064,
    "r_consistent": 1.5633687156539002,
}


def test_frozen_values_match_live_oracle():
    live = oracles.table_values()
    for k, v in FROZEN.items():
        assert live[k] == pytest.approx(v, rel=1e-14), k


@pytest.mark.parametrize("name", sorted(FROZEN))
def test_table_figures(table1, name):
    fig = compute_figures(table1)
    assert getattr(fig, name) == pytest.approx(FROZEN[name], rel=1e-9)


class TestTwofold:
    def test_correlated(self):
        assert twofold_correlated(ES, EI, P_CONV, 0.0) == 0.0
        assert twofold_correlated(ES, EI, P_CONV, 0.25) == pytest.approx(1.22236421625e-9,
                                                                         rel=1e-14)
        a = twofold_correlated(ES, EI, P_CONV, 0.3)
        assert twofold_correlated(ES, EI, P_CONV, 0.6) == 2 * a

    def test_noise(self):
        assert twofold_noise(ES, EI, P_CONV, 0.25, 0.0, 0.0) == 0.0
        assert twofold_noise(ES, EI, P_CONV, 0.25, NS, NI) == pytest.approx(1.35204810e-10,
                                                                            rel=1e-8)
        assert twofold_noise(ES, EI, 0.0, 0.25, NS, NI) == pytest.approx(1.35e-10, rel=1e-12)

    def test_snr(self):
        c = twofold_correlated(ES, EI, P_CONV, 0.25)
        assert snr_secondary(c, twofold_noise(ES, EI, P_CONV, 0.25, NS, NI)) == pytest.approx(
            9.0408338, rel=1e-7)
        assert snr_secondary(c, 0.0) == math.inf

    def test_snr_rises_with_mean_when_dark_noise_dominates(self):
        mus = np.linspace(0.01, 1.0, 25)
        snr = [snr_secondary(twofold_correlated(ES, EI, P_CONV, m),
                             twofold_noise(ES, EI, P_CONV, m, NS, NI)) for m in mus]
        assert np.all(np.diff(snr) > 0)


class TestLeakage:
    def test_no_leak_photons(self):
        assert leakage_click_probability(ES, 0.1, 0.92, 0.995, poisson_distribution(0.0)) == 0

    def test_certain_leakage_single_photon(self):
        single = PhotonNumberDistribution(np.array([0.0, 1.0]))
        assert leakage_click_probability(ES, 1.0, 0.92, 0.995, single) == pytest.approx(
            ES * 0.92 * 0.995, rel=1e-15)

    @pytest.mark.parametrize("acc,mu", [(0.01, 1.0), (0.04, 0.25), (1e-3, 0.5)])
    def test_linear_regime(self, acc, mu):
        got = leakage_click_probability(ES, acc, 0.92, 0.995, poisson_distribution(mu))
        assert got == pytest.approx(ES * 0.92 * 0.995 * acc * mu, rel=0.01)

    def test_accidental_forms(self):
        assert leakage_accidental_coincidence(0.0, 0.0, 0.0, 0.0).full == 0.0
        p = 1e-4
        lc = leakage_accidental_coincidence(p, p, 1e-12, 1e-12)
        assert lc.approx == p * p
        assert lc.full == pytest.approx(p * p, rel=1e-7)
        a, b, s, i = 2e-4, 3e-4, 7.5e-6, 1.8e-5
        lc = leakage_accidental_coincidence(a, b, s, i)
        assert lc.full - lc.approx == pytest.approx(a * i + b * s, rel=1e-12)

    def test_car_infinite_without_leakage(self, table1):
        assert car_secondary(1e-9, 0.0) == math.inf
        assert compute_figures(table1).car_2fold == math.inf

    def test_closed_form_scaling(self):
        base = car_secondary_closed_form(P_CONV, 0.25, 0.92, 0.995, 0.01, 0.25)
        four = car_secondary_closed_form(P_CONV, 1.0, 0.92, 0.995, 0.01, 1.0)
        assert four == pytest.approx(base / 4, rel=1e-14)

    @pytest.mark.parametrize("acc", [0.02, 0.04])
    def test_exact_vs_closed_form(self, table1, acc):
        # eta_acc <m'> = 0.005 and 0.01
        fig = compute_figures(table1.with_path("leakage.coupler_leak", acc))
        assert fig.car_2fold == pytest.approx(fig.car_2fold_closed_form, rel=0.05)

    def test_closed_form_drifts_at_weak_leakage(self, table1):
        # eta_acc <m'> = 1e-3: the cross terms add p_i2/p_leak_i2 + p_s2/p_leak_s2 ~ 18%
        fig = compute_figures(table1.with_path("leakage.coupler_leak", 4e-3))
        assert fig.car_2fold < 0.9 * fig.car_2fold_closed_form

    @pytest.mark.parametrize("acc", [0.01, 0.05, 0.2])
    def test_formulas_vs_routed_model(self, table1, acc):
        p = table1.with_path("leakage.coupler_leak", acc)
        fig = compute_figures(p)
        tol = leakage_first_order_tolerance(p)
        with_leak, without = pattern_probabilities(p), pattern_probabilities(table1)
        extra = (with_leak["s2"] - without["s2"]) / (1 - without["s2"])
        assert extra == pytest.approx(fig.p_acc_leak_s2, rel=tol)
        pair = with_leak["s2&i2"] - without["s2&i2"]
        assert pair == pytest.approx(fig.p_acc_coinc, rel=tol)


class TestThreefold:
    def test_vacuum(self):
        tp = threefold_probability(ES, EI, P_CONV, E1, poisson_distribution(0.0))
        assert tp.exact == 0.0 and tp.approx == 0.0

    def test_table_point(self):
        d = poisson_distribution(0.25, 1e-14)
        tp = threefold_probability(ES, EI, P_CONV, E1, d)
        assert tp.approx == pytest.approx(
            oracles.threefold("0.25", ES, EI, P_CONV, E1, exact=False), rel=1e-12)
        assert tp.approx == pytest.approx(1.7413026e-10, rel=1e-7)
        assert abs(tp.exact / tp.approx - 1) < 1e-6

    def test_triplet(self):
        assert triplet_probability(ES, EI, P_CONV, E1, 0.0) == 0.0
        rho1 = poisson_distribution(0.25)[1]
        assert triplet_probability(ES, EI, P_CONV, E1, rho1) == pytest.approx(
            1.113814504312338e-10, rel=1e-13)

    def test_triplet_is_single_pair_term(self):
        d = poisson_distribution(0.25)
        only_one = PhotonNumberDistribution(np.array([1 - d[1], d[1]]))
        assert threefold_probability(ES, EI, P_CONV, E1, only_one).exact == pytest.approx(
            triplet_probability(ES, EI, P_CONV, E1, d[1]), rel=1e-14)

    def test_ratio_table_point(self):
        r = higher_order_ratio(E1, poisson_distribution(0.25))
        assert r.printed == pytest.approx(1.0659, abs=5e-5)
        assert r.consistent == pytest.approx(1.5634, abs=5e-5)
        assert r.printed == pytest.approx(oracles.r_printed("0.25", "0.117"), rel=1e-10)
        assert r.consistent == pytest.approx(oracles.r_consistent("0.25", "0.117"), rel=1e-10)

    def test_ratio_low_mean_limit(self):
        r = higher_order_ratio(E1, poisson_distribution(1e-6))
        assert r.printed == pytest.approx(1.0, abs=1e-6)
        assert r.consistent == pytest.approx(1.0, abs=1e-5)

    def test_ratio_undefined_without_single_pairs(self):
        with pytest.raises(ValueError):
            higher_order_ratio(E1, poisson_distribution(0.0))

    def test_ratio_zero_efficiency_limit(self):
        d = poisson_distribution(0.5)
        assert higher_order_ratio(0.0, d).consistent == pytest.approx(
            higher_order_ratio(1e-9, d).consistent, rel=1e-7)

    @given(st.floats(0.01, 2.0), st.floats(0.01, 0.9))
    @settings(max_examples=80, deadline=None)
    def test_consistent_dominates_printed(self, mu, eta):
        r = higher_order_ratio(eta, poisson_distribution(mu))
        assert r.consistent >= r.printed >= 1.0

    @given(st.floats(0.01, 2.0), st.floats(0.01, 0.9))
    @settings(max_examples=60, deadline=None)
    def test_inverse_ratio_is_single_pair_share(self, mu, eta):
        d = poisson_distribution(mu)
        r = higher_order_ratio(eta, d)
        share = (triplet_probability(ES, EI, P_CONV, eta, d[1])
                 / threefold_probability(ES, EI, P_CONV, eta, d).approx)
        assert abs(1.0 / r.consistent - share) <= 1e-12

    def test_printed_monotone_in_both(self):
        mus, etas = np.linspace(0.01, 1, 15), np.linspace(0.01, 0.3, 15)
        grid = np.array([[higher_order_ratio(e, poisson_distribution(m)).printed
                          for e in etas] for m in mus])
        assert np.all(np.diff(grid, axis=0) > 0) and np.all(np.diff(grid, axis=1) > 0)

    def test_consistent_falls_with_idler_efficiency(self):
        # the m = 2 weight (2 - eta) rho_2 / rho_1 decreases in eta
        vals = [higher_order_ratio(e, poisson_distribution(0.25)).consistent
                for e in (0.01, 0.05, 0.117, 0.2, 0.3)]
        assert np.all(np.diff(vals) < 0)


class TestCarAndRates:
    def test_car(self):
        assert car_threefold(2.0) == 1.0
        assert car_threefold(1.0) == math.inf

    def test_car_table_point(self):
        r = higher_order_ratio(E1, poisson_distribution(0.25))
        assert car_threefold(r.printed) == pytest.approx(15.17, abs=0.01)
        assert car_threefold(r.consistent) == pytest.approx(1.775, abs=0.001)
        for v in (car_threefold(r.printed), car_threefold(r.consistent)):
            assert abs(v / REFERENCE_CAR_3FOLD - 1) > 0.4

    def test_rates(self):
        assert triplet_rate(1e-10, 0.0) == 0.0
        assert triplet_rate(1.113814504312338e-10, 1e7) == pytest.approx(4.00973, rel=1e-5)
        assert generated_rate(P_CONV, poisson_distribution(0.25)[1], 1e7) == pytest.approx(
            1751.21, rel=1e-5)


class TestThreefoldNoise:
    def test_noise_free(self, table1):
        quiet = (table1.with_path("i1_arm.noise_rate", 0.0).with_path("s2_arm.noise_rate", 0.0)
                 .with_path("i2_arm.noise_rate", 0.0))
        fig = compute_figures(quiet)
        assert fig.p_noise_3fold == 0.0 and fig.snr_3fold == math.inf

    def test_full_minus_approx(self):
        n = threefold_noise(1.22236421625e-9, 1.35204810e-10, N1, 0.0288331575)
        assert n.full - n.approx == pytest.approx(1.22236421625e-9 * N1, rel=1e-9)
        assert (n.full - n.approx) / n.full < 3e-3


class TestFigures:
    def test_probabilities_in_range(self, table1):
        fig = compute_figures(table1.with_path("leakage.coupler_leak", 0.05))
        for name, v in fig.to_dict().items():
            if name.startswith("p_"):
                assert 0.0 <= v <= 1.0, name

    def test_vacuum_reduces_to_noise(self, table1):
        fig = compute_figures(table1.replace(mean_photon_primary=0.0))
        assert fig.p_i1 == pytest.approx(N1)
        assert fig.p_corr_2fold == 0.0
        assert fig.p_noise_2fold == pytest.approx(NS * NI, rel=1e-12)
        assert fig.p_3fold_total == 0.0
        assert math.isnan(fig.r_printed) and math.isnan(fig.r_consistent)

    @given(st.floats(0.0, 0.5))
    @settings(max_examples=20, deadline=None)
    def test_monotone_in_arm_efficiency(self, bump):
        from tripletsim.params import SourceParameters
        base = SourceParameters()
        up = base.with_path("s2_arm.overall", min(1.0, 0.103 + bump))
        a, b = compute_figures(base), compute_figures(up)
        for name in ("p_s2", "p_corr_2fold", "p_noise_2fold", "p_3fold_total",
                     "p_3fold_triplet"):
            assert getattr(b, name) >= getattr(a, name)


class TestPatterns:
    def test_singles_match_closed_forms(self, table1):
        pat = pattern_probabilities(table1)
        assert pat["i1"] == pytest.approx(FROZEN["p_i1"], rel=1e-12)
        assert pat["s2"] == pytest.approx(FROZEN["p_s2"], rel=1e-9)
        assert pat["i2"] == pytest.approx(FROZEN["p_i2"], rel=1e-9)

    def test_triple_close_to_formula_sum(self, table1):
        fig = compute_figures(table1)
        pat = pattern_probabilities(table1)
        assert pat["i1&s2&i2"] == pytest.approx(fig.p_3fold_total + fig.p_noise_3fold,
                                                rel=0.01)

    def test_all_noise_off_and_dark(self, table1):
        dark = (table1.replace(mean_photon_primary=0.0).with_path("i1_arm.noise_rate", 0.0)
                .with_path("s2_arm.noise_rate", 0.0).with_path("i2_arm.noise_rate", 0.0))
        assert all(v == 0.0 for v in pattern_probabilities(dark).values())

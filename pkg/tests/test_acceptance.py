"""Acceptance criteria, one marker per criterion.

``pytest`` prints a PASS/FAIL line per criterion in its terminal summary;
``python3 tests/test_acceptance.py`` runs just this module.
"""
import math
import sys
import time
import warnings

import numpy as np
import pytest

import oracles
from tripletsim.coincidence import (REFERENCE_CAR_3FOLD, compute_figures,
                                    leakage_first_order_tolerance, pattern_probabilities)
from tripletsim.counter import count
from tripletsim.detector import (BinaryDetectorModel, click_probability_ensemble,
                                 infer_mean_photon_number, poisson_click_probability,
                                 predicted_click_rate)
from tripletsim.mc import SimulationConfig, simulate, simulate_batch_parallel
from tripletsim.params import SourceParameters, derive_arm_efficiency, derive_eta_i1
from tripletsim.photon_stats import apply_channel, loss_channel, poisson_distribution
from tripletsim.report import Axis, SweepSpec, build_report, sweep

acceptance = pytest.mark.acceptance

TABLE_PULSES = 10_000_000
SINGLES = ("i1", "s2", "i2")
SAME_PULSE = ("i1", "s2", "i2", "i1&s2", "i1&i2", "s2&i2", "i1&s2&i2")


def noise_free(p: SourceParameters) -> SourceParameters:
    for arm in ("i1_arm", "s2_arm", "i2_arm"):
        p = p.with_path(f"{arm}.noise_rate", 0.0)
    return p


def components_only(p: SourceParameters) -> SourceParameters:
    for arm in ("i1_arm", "s2_arm", "i2_arm"):
        p = p.with_path(f"{arm}.overall", None)
    return p


def z_score(k: int, n: int, prob: float) -> float:
    return (k / n - prob) / math.sqrt(prob * (1.0 - prob) / n)


# 1 -------------------------------------------------------------------------

@acceptance(1, "detected triplet rate 4.04 /h within 1.5%, report < 1 s")
def test_detected_triplet_rate(table1):
    t0 = time.perf_counter()
    doc = build_report(table1)
    elapsed = time.perf_counter() - t0
    rate = doc["figures"]["rate_triplet_detected"]
    assert rate == pytest.approx(4.04, rel=0.015)
    assert rate == pytest.approx(oracles.table_values()["rate_triplet_detected"], rel=1e-9)
    assert elapsed < 1.0


# 2 -------------------------------------------------------------------------

@acceptance(2, "generated triplet rate 1765 /h within 1.5%")
def test_generated_triplet_rate(table1):
    rate = build_report(table1)["figures"]["rate_triplet_generated"]
    assert rate == pytest.approx(1765, rel=0.015)
    assert rate == pytest.approx(oracles.table_values()["rate_triplet_generated"], rel=1e-9)


# 3 -------------------------------------------------------------------------

@acceptance(3, "arm efficiencies 0.117 / 0.103 / 0.190 within 1% from components")
def test_derived_efficiencies():
    p = components_only(SourceParameters())
    assert derive_eta_i1(p) == pytest.approx(0.117, rel=0.01)
    assert derive_arm_efficiency(p, "s2") == pytest.approx(0.103, rel=0.01)
    assert derive_arm_efficiency(p, "i2") == pytest.approx(0.190, rel=0.01)
    assert (p.eta_i1, p.eta_s2, p.eta_i2) == (derive_eta_i1(p), derive_arm_efficiency(p, "s2"),
                                              derive_arm_efficiency(p, "i2"))


# 4 -------------------------------------------------------------------------

@acceptance(4, "Poisson ensemble click probability matches closed form within 1e-10")
def test_ensemble_closed_form():
    t0 = time.perf_counter()
    worst = 0.0
    for mu in np.linspace(0.0, 20.0, 41):
        dist = poisson_distribution(float(mu))
        for eta in np.linspace(0.0, 1.0, 21):
            for pn in (0.0, 7e-6, 1e-3, 0.1):
                det = BinaryDetectorModel(float(eta), pn)
                closed = 1.0 - (1.0 - pn) * math.exp(-eta * mu)
                worst = max(worst, abs(click_probability_ensemble(det, dist) - closed))
    assert worst <= 1e-10
    assert time.perf_counter() - t0 < 1.0


# 5 -------------------------------------------------------------------------

@acceptance(5, "loss channel: stochastic columns, identity at p = 1, Poisson thinning")
def test_channel_algebra():
    for dim in (1, 2, 10, 60, 200):
        for p in (0.0, 1e-7, 0.117, 0.5, 0.93, 1.0):
            L = loss_channel(p, dim).transfer
            assert np.max(np.abs(L.sum(axis=0) - 1.0)) <= 1e-12
        assert np.array_equal(loss_channel(1.0, dim).transfer, np.eye(dim))
    for mu in (0.0, 0.01, 0.25, 1.0, 5.0, 20.0):
        d = poisson_distribution(mu)
        for p in (0.0, 2.5e-7, 0.1, 0.5, 0.9, 1.0):
            out = apply_channel(loss_channel(p, d.truncation_bound + 1), d).probabilities
            direct = poisson_distribution(mu * p).probabilities
            n = max(out.size, direct.size)
            diff = np.pad(out, (0, n - out.size)) - np.pad(direct, (0, n - direct.size))
            assert np.max(np.abs(diff)) <= 1e-10


# 6 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def table_run():
    p = SourceParameters()
    cfg = SimulationConfig(pulses=TABLE_PULSES, seed=20240601, physics=p)
    t0 = time.perf_counter()
    stream = simulate(cfg)
    rep = count(stream)
    return p, cfg, stream, rep, time.perf_counter() - t0


@acceptance(6, "MC agrees with analytics at 1e7 pulses; deterministic; < 60 s")
def test_mc_table_agreement(table_run):
    p, _, _, rep, elapsed = table_run
    pat = pattern_probabilities(p)
    fig = compute_figures(p)
    formula = {"i1": fig.p_i1, "s2": fig.p_s2, "i2": fig.p_i2,
               "s2&i2": fig.p_corr_2fold + fig.p_noise_2fold,
               "i1&s2&i2": fig.p_3fold_total + fig.p_noise_3fold}
    for key in SAME_PULSE:
        assert abs(z_score(rep.count(key), rep.pulses, pat[key])) < 4, key
        if key in formula:
            assert abs(z_score(rep.count(key), rep.pulses, formula[key])) < 4, key
    assert elapsed < 60.0


@acceptance(6, "MC agrees with analytics at 1e7 pulses; deterministic; < 60 s")
def test_mc_boosted_coincidences():
    # the physical conversion leaves too few secondary events at 1e7 pulses to test
    # coincidences; a stronger second stage exercises the same code paths
    p = SourceParameters().with_path("s1_path.conversion_override", 0.05)
    rep = count(simulate(SimulationConfig(pulses=TABLE_PULSES, seed=6, physics=p)))
    pat = pattern_probabilities(p)
    for key in SAME_PULSE:
        assert rep.count(key) > 100
        assert abs(z_score(rep.count(key), rep.pulses, pat[key])) < 4, key


@acceptance(6, "MC agrees with analytics at 1e7 pulses; deterministic; < 60 s")
def test_mc_leakage_within_first_order_tolerance():
    p = SourceParameters().with_path("leakage.coupler_leak", 0.05)
    n = TABLE_PULSES
    rep = count(simulate(SimulationConfig(pulses=n, seed=8, physics=p)))
    fig = compute_figures(p)
    tol = leakage_first_order_tolerance(p)
    for key, pred in (("s2", fig.p_s2 + fig.p_acc_leak_s2), ("i2", fig.p_i2 + fig.p_acc_leak_i2),
                      ("s2&i2", fig.p_corr_2fold + fig.p_noise_2fold + fig.p_acc_coinc)):
        sigma = math.sqrt(pred * (1 - pred) / n)
        assert abs(rep.fraction(key) - pred) < 4 * sigma + tol * pred, key
    assert fig.p_acc_leak_s2 > 10 * fig.p_s2


@acceptance(6, "MC agrees with analytics at 1e7 pulses; deterministic; < 60 s")
def test_mc_deterministic_across_partitions(table_run):
    _, cfg, stream, _, _ = table_run
    assert simulate(cfg).equals(stream)
    for parts in (3, 8):
        assert simulate_batch_parallel(cfg, parts).equals(stream)


# 7 -------------------------------------------------------------------------

@acceptance(7, "Klyshko: noise-free P(s2|i2) reproduces eta_s2 within 3 SE")
def test_klyshko():
    # conversion raised so that 1e7 pulses carry ~1e4 heralds; mu * P stays at 0.005
    # so multi-pair heralds bias the ratio by well under one standard error
    p = noise_free(SourceParameters().with_path("s1_path.conversion_override", 0.02))
    rep = count(simulate(SimulationConfig(pulses=TABLE_PULSES, seed=77, physics=p)))
    heralds = rep.count("i2")
    ratio = rep.count("s2&i2") / heralds
    se = math.sqrt(ratio * (1 - ratio) / heralds)
    assert heralds > 5000
    assert abs(ratio - p.eta_s2) < 3 * se
    back = rep.count("s2&i2") / rep.count("s2")
    assert abs(back - p.eta_i2) < 3 * math.sqrt(back * (1 - back) / rep.count("s2"))


# 8 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig3_grid():
    spec = SweepSpec(Axis("mean_photon_primary", 0.01, 1.0, 12),
                     Axis("i1_arm.overall", 0.01, 0.3, 12))
    t0 = time.perf_counter()
    rows = np.array(sweep(SourceParameters(), spec))
    elapsed = time.perf_counter() - t0
    grid = {"r_printed": rows[:, 2].reshape(12, 12), "r_consistent": rows[:, 3].reshape(12, 12)}
    return grid, elapsed


def quadratic_share(eta, r):
    """Quadratic over linear contribution of a centred quadratic fit across the range."""
    h = (eta[-1] - eta[0]) / 2
    c, b, _ = np.polyfit(eta - (eta[0] + h), r, 2)
    return abs(c) * h * h / (abs(b) * h)


@acceptance(8, "r sweep monotone in both axes, quasi-linear in eta at <m> = 0.25, < 5 s")
def test_r_monotone_in_mean(fig3_grid):
    grid, elapsed = fig3_grid
    for name, g in grid.items():
        assert np.all(np.diff(g, axis=0) > 0), name
    assert elapsed < 5.0


@acceptance(8, "r sweep monotone in both axes, quasi-linear in eta at <m> = 0.25, < 5 s")
def test_r_printed_monotone_in_efficiency(fig3_grid):
    assert np.all(np.diff(fig3_grid[0]["r_printed"], axis=1) > 0)


@pytest.mark.xfail(strict=True, reason="r_consistent falls with eta_i1: the m >= 2 click "
                   "probability saturates faster than the single-photon term")
@acceptance(8, "r sweep monotone in both axes, quasi-linear in eta at <m> = 0.25, < 5 s")
def test_r_consistent_monotone_in_efficiency(fig3_grid):
    assert np.all(np.diff(fig3_grid[0]["r_consistent"], axis=1) > 0)


@acceptance(8, "r sweep monotone in both axes, quasi-linear in eta at <m> = 0.25, < 5 s")
def test_r_quasi_linear_in_efficiency():
    eta = np.linspace(0.01, 0.3, 30)
    base = SourceParameters(mean_photon_primary=0.25)
    figs = [compute_figures(base.with_path("i1_arm.overall", float(e))) for e in eta]
    for name in ("r_printed", "r_consistent"):
        assert quadratic_share(eta, np.array([getattr(f, name) for f in figs])) < 0.10, name


# 9 -------------------------------------------------------------------------

@acceptance(9, "r variants match the summation oracle; CAR 3.3 disclosed as unreproduced")
def test_r_variants_against_oracle(table1):
    fig = compute_figures(table1)
    assert fig.r_printed == pytest.approx(oracles.r_printed("0.25", "0.117"), rel=1e-10)
    assert fig.r_consistent == pytest.approx(oracles.r_consistent("0.25", "0.117"), rel=1e-10)
    assert fig.r_printed == pytest.approx(1.066, abs=5e-4)
    assert fig.r_consistent == pytest.approx(1.563, abs=5e-4)


@acceptance(9, "r variants match the summation oracle; CAR 3.3 disclosed as unreproduced")
def test_car_reference_is_disclosed(table1):
    doc = build_report(table1)
    fig = doc["figures"]
    for name in ("car_3fold_printed", "car_3fold_consistent"):
        assert abs(fig[name] / REFERENCE_CAR_3FOLD - 1) > 0.25, name
    note = next(f for f in doc["footnotes"] if f["id"] == "car_3fold_reference")
    assert note["reference_value"] == REFERENCE_CAR_3FOLD == 3.3
    assert note["computed"] == {k: fig[k] for k in ("car_3fold_printed", "car_3fold_consistent")}
    assert note["text"]
    assert doc["reference"]["car_3fold"] == 3.3


# 10 ------------------------------------------------------------------------

@acceptance(10, "mean-photon inversion: exact within 1e-9, linearised within 2% (eta<m> <= 0.03)")
def test_exact_inversion_round_trip(table1):
    det = BinaryDetectorModel(table1.eta_i1, table1.p_noise_i1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # noise-dominated corner of the grid
        for mu in np.concatenate([np.geomspace(1e-4, 5.0, 30), [0.25, 5.0]]):
            # the forward sum is short by up to its tail mass, so the truncation
            # tolerance must sit well below 1e-9 of the signal eta * <m>
            dist = poisson_distribution(float(mu), tail_tolerance=1e-16)
            rate = predicted_click_rate(det, dist, table1.rep_rate)
            est = infer_mean_photon_number(rate, det, table1.rep_rate)
            assert est.exact == pytest.approx(mu, rel=1e-9)
            closed = table1.p_noise_i1 / 1e-9 + table1.rep_rate * poisson_click_probability(
                det, float(mu))
            assert infer_mean_photon_number(closed, det, table1.rep_rate).exact == \
                pytest.approx(mu, rel=1e-9)


@acceptance(10, "mean-photon inversion: exact within 1e-9, linearised within 2% (eta<m> <= 0.03)")
def test_linearized_inversion_band(table1):
    rep = table1.rep_rate
    for eta in (0.05, 0.117, 0.5):
        det = BinaryDetectorModel(eta, 0.0)
        for x in np.geomspace(1e-4, 0.03, 12):
            rate = predicted_click_rate(det, poisson_distribution(float(x / eta)), rep)
            est = infer_mean_photon_number(rate, det, rep)
            assert abs(est.linearized / (x / eta) - 1) <= 0.02
    # at the reference point the noise terms push the estimate up and the
    # exponential curvature pulls it down; the net stays inside 2%
    det = BinaryDetectorModel(table1.eta_i1, table1.p_noise_i1)
    rate = predicted_click_rate(det, poisson_distribution(0.25), rep)
    assert abs(infer_mean_photon_number(rate, det, rep).linearized / 0.25 - 1) <= 0.02


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))

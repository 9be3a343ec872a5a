import math

import numpy as np
import pytest

from cpgdist import estimators, kernels, studies
from cpgdist.estimators import (
    InvalidLetter,
    ObsOutOfRange,
    estimate_from_stats,
    estimate_time,
    invert_curve,
    kappa_nu,
    kappa_rn,
    normal_quantile,
    observe,
    time_from_frequency,
)
from cpgdist.kernels import ANCESTOR, DIVERGENCE, cc_closed_form, spectral_constants
from cpgdist.model import jc_cpg_params
from cpgdist.simulator import AlignedPair, ExperimentSpec, run_experiment


def test_observe_trivial():
    stats = observe(AlignedPair.from_strings("CCC", "CCC"))
    assert stats.xx("C") == 1 and stats.pair("CC", "CC") == 1 and stats.letter("C") == 1
    with pytest.raises(ValueError):
        observe(AlignedPair.from_strings("CA", "CG"))


def test_observe_counts_are_multiples_of_one_over_n():
    pair = run_experiment(ExperimentSpec(jc_cpg_params(10), 997, 0.4, seed=1))
    stats = observe(pair)
    for value in list(stats.pairs.values()) + list(stats.letters.values()):
        assert 0 <= value <= 1
        assert abs(value * 997 - round(value * 997)) < 1e-9
    assert stats.xx("C") <= stats.letter("C")


def test_observe_is_circular():
    stats = observe(AlignedPair.from_strings("GAAC", "GAAC"))
    assert stats.pair("C", "CG") == 0.25
    assert stats.pair("*A", "CG") == 0.0
    assert stats.pair("C*C", "C*C") == 0.0


def test_conserved_all_c_kappa():
    stats = observe(AlignedPair.from_strings("CCCCCC", "CCCCCC"))
    # no CG in an all-C sequence
    assert kappa_nu(stats, jc_cpg_params(10), "C")[0] == pytest.approx(3.0)
    stats = observe(AlignedPair.from_strings("CGCGCG", "CGCGCG"))
    kappa, _ = kappa_nu(stats, jc_cpg_params(10), "C")
    assert kappa == pytest.approx(4 * 0.5 + 10 * 0.5 - 0.5)


def test_divergence_doubles_kappa_only():
    pair = run_experiment(ExperimentSpec(jc_cpg_params(10), 2000, 0.3, seed=3))
    stats = observe(pair)
    for x in "CA":
        k1, n1 = kappa_nu(stats, jc_cpg_params(10), x, ANCESTOR)
        k2, n2 = kappa_nu(stats, jc_cpg_params(10), x, DIVERGENCE)
        assert k2 == 2 * k1 and n2 == n1


def test_kappa_rn_specializes_to_kappa_c():
    for seed in range(3):
        stats = observe(run_experiment(ExperimentSpec(jc_cpg_params(7), 500, 0.5, seed=seed)))
        assert kappa_rn(stats, jc_cpg_params(7)) == pytest.approx(kappa_nu(stats, jc_cpg_params(7), "C")[0], abs=1e-14)


def test_kappa_nu_needs_jc():
    stats = observe(AlignedPair.from_strings("ACGT", "ACGT"))
    with pytest.raises(ValueError):
        kappa_nu(stats, studies.explored_column(2), "C")
    with pytest.raises(InvalidLetter):
        kappa_nu(stats, jc_cpg_params(1), "G")


def test_invert_curve_boundaries():
    k = spectral_constants(10.0)
    curve = lambda t: cc_closed_form(10.0, t)
    assert invert_curve(curve, k.C_star, k.C_star) == 0.0
    assert invert_curve(curve, cc_closed_form(10, 0.5), k.C_star) == pytest.approx(0.5, abs=1e-10)
    for bad in (k.C_star**2, k.C_star + 1e-9, 0.0):
        with pytest.raises(ObsOutOfRange):
            invert_curve(curve, bad, k.C_star)


def test_saturated_observation():
    # a curve that never drops below the observation within the bracket cap
    with pytest.raises(ObsOutOfRange, match="saturated"):
        invert_curve(lambda t: 0.26, 0.255, 0.5)


@pytest.mark.parametrize("r", [0.5, 1.0, 10.0])
@pytest.mark.parametrize("x", ["C", "A"])
@pytest.mark.parametrize("mode", [ANCESTOR, DIVERGENCE])
def test_round_trip(r, x, mode):
    params = jc_cpg_params(r)
    curve, _ = estimators.time_curve(params, x, mode)
    for t in (0.01, 0.3, 1.0, 2.0):
        assert time_from_frequency(params, x, mode, curve(t)) == pytest.approx(t, abs=1e-9)


@pytest.mark.parametrize("x", ["C", "A"])
def test_round_trip_resolution_limit(x):
    # near saturation one ulp of the frequency spans many nanoseconds of t
    params = jc_cpg_params(1.0)
    for mode in (ANCESTOR, DIVERGENCE):
        curve, _ = estimators.time_curve(params, x, mode)
        t = 3.0
        slope = abs(curve.derivative(t)) if hasattr(curve, "derivative") else abs((curve(t + 1e-6) - curve(t - 1e-6)) / 2e-6)
        limit = max(1e-9, 20 * np.spacing(curve(t)) / slope)
        assert abs(time_from_frequency(params, x, mode, curve(t)) - t) <= limit


def test_rn_estimator_letters():
    params = studies.explored_column(2)
    curve, star = estimators.time_curve(params, "C", ANCESTOR)
    assert star == pytest.approx(kernels.letter_freq(params, "C"))
    assert time_from_frequency(params, "C", ANCESTOR, curve(0.4)) == pytest.approx(0.4, abs=1e-9)
    with pytest.raises(InvalidLetter):
        estimators.time_curve(params, "A", ANCESTOR)
    pair = run_experiment(ExperimentSpec(params, 1000, 0.2, seed=0))
    with pytest.raises(InvalidLetter):
        estimate_time(pair, params, "A")


def test_normal_quantile():
    assert normal_quantile(0.05) == pytest.approx(1.959963984540054, abs=1e-8)
    assert normal_quantile(0.3173105078629141) == pytest.approx(1.0, abs=1e-8)
    assert normal_quantile(1 - 1e-12) < 1e-8
    eps = np.linspace(0.01, 0.99, 50)
    assert np.all(np.diff([normal_quantile(e) for e in eps]) < 0)
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ValueError):
            normal_quantile(bad)


def test_normal_quantile_against_bisection_on_erf():
    for eps in (0.01, 0.05, 0.2, 0.5):
        lo, hi = 0.0, 10.0
        while hi - lo > 1e-13:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if math.erfc(mid / math.sqrt(2)) > eps else (lo, mid)
        assert normal_quantile(eps) == pytest.approx(lo, abs=1e-8)


def test_identical_sequences_give_zero_time():
    # (C,C)_obs equals (C)_obs, which sits near (C)_* but not exactly on it
    star = spectral_constants(10.0).C_star
    seen = set()
    for seed in range(10):
        pair = run_experiment(ExperimentSpec(jc_cpg_params(10), 2000, 0.0, seed=seed))
        obs = observe(pair).xx("C")
        if obs <= star:
            assert estimate_time(pair, jc_cpg_params(10), "C").T < 0.05
            seen.add("estimated")
        else:
            with pytest.raises(ObsOutOfRange):
                estimate_time(pair, jc_cpg_params(10), "C")
            seen.add("rejected")
    assert seen == {"estimated", "rejected"}


def test_estimate_fields_and_csv():
    pair = run_experiment(ExperimentSpec(jc_cpg_params(10), 10_000, 0.3, seed=8))
    est = estimate_time(pair, jc_cpg_params(10), "C", epsilon=0.1)
    assert est.ci_low <= est.T <= est.ci_high
    assert est.half_width == pytest.approx(normal_quantile(0.1) * math.sqrt(est.nu_obs / est.n) / est.kappa_obs)
    fields = est.csv().split(",")
    assert fields[:3] == ["C", "ancestor", "10000"]
    assert len(fields) == len(estimators.CSV_HEADER.split(","))
    with pytest.raises(ValueError):
        estimate_time(pair, jc_cpg_params(10), "C", mode=DIVERGENCE)


def test_ci_omitted_for_nonpositive_kappa():
    stats = estimators.ObservedStats(
        50, ANCESTOR, {key: 0.0 for key in estimators.OBSERVED_PAIRS}, {x: 0.25 for x in "ATCG"}
    )
    stats.pairs["C", "C"] = 0.1
    stats.pairs["A", "A"] = 0.1
    stats.pairs["*A", "CG"] = 0.5
    est = estimate_from_stats(stats, jc_cpg_params(10), "A")
    assert est.kappa_obs < 0
    assert not est.ci_available and est.half_width is None and not est.covers(est.T)
    assert est.csv().split(",")[4:6] == ["nan", "nan"]


def test_divergence_c_is_halved_ancestor_inversion():
    params = jc_cpg_params(10)
    pair = run_experiment(ExperimentSpec(params, 20_000, 0.2, DIVERGENCE, seed=4))
    est = estimate_time(pair, params, "C")
    anc = time_from_frequency(params, "C", ANCESTOR, observe(pair).xx("C"))
    assert est.T == pytest.approx(anc / 2, abs=1e-10)


def test_kappa_nu_converge():
    params = jc_cpg_params(10)
    t = 0.3
    stats = observe(run_experiment(ExperimentSpec(params, 100_000, t, seed=21)))
    kappa, nu = kappa_nu(stats, params, "C")
    target_k = -kernels.cc_closed_form_derivative(10, t)
    target_nu = kernels.sigma2_asymptotic(params, "C", t)
    # loose plug-in tolerances: a few percent at N = 1e5
    assert kappa == pytest.approx(target_k, rel=0.05)
    assert nu == pytest.approx(target_nu, rel=0.1)


def test_consistency_error_shrinks():
    params = jc_cpg_params(10)
    for n in (1000, 10_000, 100_000):
        pair = run_experiment(ExperimentSpec(params, n, 0.3, seed=100 + n))
        est = estimate_time(pair, params, "C")
        assert abs(est.T - 0.3) < 3 * studies.clt_sd(params, "C", ANCESTOR, 0.3, n)


def test_ci_width_grows_like_exp_4t():
    params = jc_cpg_params(10)
    z = normal_quantile(0.05)
    ratios = []
    for t in np.linspace(2, 4, 9):
        half = z * math.sqrt(kernels.sigma2_asymptotic(params, "C", t)) / abs(kernels.cc_closed_form_derivative(10, t))
        ratios.append(half / math.exp(4 * t))
    assert max(ratios) / min(ratios) < 1.2

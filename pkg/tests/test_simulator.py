import numpy as np
import pytest

from cpgdist import kernels, simulator, studies
from cpgdist.estimators import pair_indicator, pattern_indicator
from cpgdist.kernels import ANCESTOR, DIVERGENCE, aa_closed_form, cc_closed_form
from cpgdist.model import CODE, jc_cpg_params
from cpgdist.simulator import AlignedPair, ExperimentSpec, run_experiment

from conftest import dependent_se


def test_encode_decode_round_trip():
    seq = simulator.encode("acgtTGCA")
    assert simulator.decode(seq) == "ACGTTGCA"
    with pytest.raises(ValueError, match="non-ACGT"):
        simulator.encode("ACNT")


def test_cumulative_rates_bound():
    cum, bound = simulator.cumulative_rates(jc_cpg_params(10))
    assert cum.shape == (64, 4)
    assert bound == 13
    assert np.all(np.diff(cum, axis=1) >= 0)


def test_t_zero_is_identity():
    rng = np.random.default_rng(0)
    seq = rng.integers(0, 4, 100, dtype=np.uint8)
    assert np.array_equal(simulator.evolve(seq, jc_cpg_params(10), 0.0, rng), seq)
    pair = run_experiment(ExperimentSpec(jc_cpg_params(10), 500, 0.0, ANCESTOR, seed=3))
    assert np.array_equal(pair.left, pair.right)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        ExperimentSpec(jc_cpg_params(1), 2, 0.1)
    with pytest.raises(ValueError):
        ExperimentSpec(jc_cpg_params(1), 10, -0.1)
    with pytest.raises(ValueError):
        ExperimentSpec(jc_cpg_params(1), 10, 0.1, "both")
    with pytest.raises(ValueError):
        simulator.evolve(np.zeros(10, np.uint8), jc_cpg_params(1), -1.0, np.random.default_rng())
    with pytest.raises(ValueError):
        AlignedPair(np.zeros(4, np.uint8), np.zeros(5, np.uint8))
    with pytest.raises(ValueError):
        simulator.get_sweep("fortran")


@pytest.mark.parametrize("mode", [ANCESTOR, DIVERGENCE])
def test_determinism(mode):
    spec = ExperimentSpec(jc_cpg_params(10), 2000, 0.3, mode, seed=42)
    a, b = run_experiment(spec), run_experiment(spec)
    assert a.strings() == b.strings()
    c = run_experiment(ExperimentSpec(jc_cpg_params(10), 2000, 0.3, mode, seed=43))
    assert c.strings() != a.strings()


@pytest.mark.skipif(len(simulator.BACKENDS) < 2, reason="compiled core not built")
@pytest.mark.parametrize("column", [None, 7])
def test_backends_identical(column):
    params = jc_cpg_params(10) if column is None else studies.explored_column(column)
    spec = ExperimentSpec(params, 3000, 0.5, DIVERGENCE, burn_in=1.0, seed=7)
    compiled = run_experiment(spec, backend="cython")
    python = run_experiment(spec, backend="python")
    assert compiled.strings() == python.strings()


def test_sweep_applies_exact_targets():
    params = jc_cpg_params(10)
    cum, bound = simulator.cumulative_rates(params)
    seq = simulator.encode("ACGT")
    # site 2 is G with left neighbour C; its targets are A (rate 11), T (1), C (1)
    ctx = 16 * CODE["C"] + 4 * CODE["G"] + CODE["T"]
    assert list(cum[ctx]) == [11, 12, 13, 13]
    for backend in simulator.BACKENDS:
        for level, want in ((0.5, "A"), (11.5, "T"), (12.5, "C")):
            s = seq.copy()
            assert simulator.get_sweep(backend)(s, cum, np.array([2], np.int64), np.array([level])) == 1
            assert simulator.decode(s)[2] == want


def test_sweep_wraps_around():
    cum, _ = simulator.cumulative_rates(jc_cpg_params(10))
    for backend in simulator.BACKENDS:
        # G at site 0 sees the C at the last site as its left neighbour
        s = simulator.encode("GTTC")
        simulator.get_sweep(backend)(s, cum, np.array([0], np.int64), np.array([5.0]))
        assert simulator.decode(s) == "ATTC"
        s = simulator.encode("GTTA")
        simulator.get_sweep(backend)(s, cum, np.array([0], np.int64), np.array([5.0]))
        assert simulator.decode(s) == "GTTA"


def test_default_burn_in():
    assert simulator.default_burn_in(jc_cpg_params(3)) == 5.0
    assert simulator.default_burn_in(studies.explored_column(2)) == pytest.approx(2.5)


@pytest.fixture(scope="module")
def stationary_r10():
    return simulator.sample_stationary(jc_cpg_params(10), 100_000, 5.0, np.random.default_rng(11))


def test_stationary_cg_frequency(stationary_r10):
    ind = pattern_indicator(stationary_r10, "CG")
    assert abs(ind.mean() - 1 / 66) < 3 * dependent_se(ind)


def test_stationary_c_frequency_r3():
    seq = simulator.sample_stationary(jc_cpg_params(3), 100_000, 5.0, np.random.default_rng(5))
    ind = seq == CODE["C"]
    assert abs(ind.mean() - 7 / 31) < 3 * dependent_se(ind)


def test_stationary_uniform_at_r0():
    seq = simulator.sample_stationary(jc_cpg_params(0), 100_000, 5.0, np.random.default_rng(2))
    for x in "ATCG":
        ind = seq == CODE[x]
        assert abs(ind.mean() - 0.25) < 3 * dependent_se(ind, 0)


def test_two_dependence(stationary_r10):
    c = (stationary_r10 == CODE["C"]).astype(float)
    c -= c.mean()
    for lag in (3, 4, 7):
        prod = c * np.roll(c, -lag)
        assert abs(prod.mean()) < 3 * dependent_se(prod, lag + 2)


def test_jukes_cantor_kernel_r0():
    rng = np.random.default_rng(9)
    seq = rng.integers(0, 4, 100_000, dtype=np.uint8)
    out = simulator.evolve(seq, jc_cpg_params(0), 0.5, rng)
    same = seq == out
    p = 0.25 + 0.75 * np.exp(-2.0)
    assert abs(same.mean() - p) < 3 * np.sqrt(p * (1 - p) / same.size)


def test_ancestor_pair_statistics_r10():
    pair = run_experiment(ExperimentSpec(jc_cpg_params(10), 100_000, 0.3, ANCESTOR, seed=1))
    for x, ref in (("C", cc_closed_form(10, 0.3)), ("A", aa_closed_form(10, 0.3))):
        ind = pair_indicator(pair, x, x)
        assert abs(ind.mean() - ref) < 3 * dependent_se(ind)


def test_divergence_cc_is_ancestor_at_twice_time():
    pair = run_experiment(ExperimentSpec(jc_cpg_params(10), 100_000, 0.2, DIVERGENCE, seed=2))
    ind = pair_indicator(pair, "C", "C")
    assert abs(ind.mean() - cc_closed_form(10, 0.4)) < 3 * dependent_se(ind)


def test_rotation_invariance():
    pair = run_experiment(ExperimentSpec(jc_cpg_params(10), 5000, 0.3, ANCESTOR, seed=4))
    rotated = AlignedPair(np.roll(pair.left, 123), np.roll(pair.right, 123))
    for w0, w1 in (("C", "CG"), ("C*C", "C*C"), ("*A", "CG")):
        assert pair_indicator(pair, w0, w1).sum() == pair_indicator(rotated, w0, w1).sum()


@pytest.mark.parametrize("column", [6, 7])
def test_rn_pair_statistics(column):
    params = studies.explored_column(column)
    pair = run_experiment(ExperimentSpec(params, 100_000, 0.3, ANCESTOR, seed=column))
    for w0, w1 in (("C", "C"), ("C", "CG"), ("A", "A")):
        ind = pair_indicator(pair, w0, w1)
        assert abs(ind.mean() - kernels.word_pair_freq(params, w0, w1, 0.3)) < 3 * dependent_se(ind)


def test_convergence_of_observed_frequency():
    ref = cc_closed_form(10, 0.3)
    for n in (1000, 10_000, 100_000):
        pair = run_experiment(ExperimentSpec(jc_cpg_params(10), n, 0.3, ANCESTOR, seed=n))
        sd = np.sqrt(kernels.sigma2_finite(jc_cpg_params(10), "C", 0.3, n))
        assert abs(pair_indicator(pair, "C", "C").mean() - ref) < 3.5 * sd


def test_replicate_streams_independent():
    a, b = simulator.replicate_rngs(0, 2)
    assert a.random() != b.random()
    assert simulator.replicate_rngs(0, 2)[1].random() == simulator.replicate_rngs(0, 2)[1].random()

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import gaussian_quantile, quantile_w1
from rfic.disorder import (
    KINDS,
    DisorderLaw,
    EmpiricalSample,
    block_convolve,
    rng_for,
    sample,
    w1_clt_curve,
    w1_distance,
    w1_to_gaussian,
)

LAWS = [
    DisorderLaw.gaussian(1.0),
    DisorderLaw.gaussian(4.0),
    DisorderLaw.rademacher(1.0),
    DisorderLaw.uniform(1.0),
    DisorderLaw.expdiff(2.0),
    DisorderLaw.pareto(2.5),
    DisorderLaw.pareto(4.0, variance=0.5),
]


# -- law construction ---------------------------------------------------------

@pytest.mark.parametrize("kind", ["bogus", "cauchy", ""])
def test_unknown_kind_names_the_field(kind):
    with pytest.raises(ValueError, match="^kind:"):
        DisorderLaw(kind)


@pytest.mark.parametrize("p", [1.0, 1.99, -3])
def test_pareto_needs_p_at_least_two(p):
    with pytest.raises(ValueError, match="^p:"):
        DisorderLaw.pareto(p)


def test_pareto_needs_finite_p():
    with pytest.raises(ValueError, match="^p:"):
        DisorderLaw("pareto", 1.0)


@pytest.mark.parametrize("v", [-1.0, math.inf, math.nan])
def test_bad_variance(v):
    with pytest.raises(ValueError, match="^variance:"):
        DisorderLaw.gaussian(v)


def test_aliases_and_roundtrip():
    law = DisorderLaw("Laplace", 2.0)
    assert law.kind == "expdiff"
    assert DisorderLaw.from_dict(law.to_dict()) == law
    par = DisorderLaw.pareto(2.5, 3.0)
    assert par.to_dict() == {"kind": "pareto", "variance": 3.0, "p": 2.5}
    assert DisorderLaw.from_dict(par.to_dict()) == par
    assert DisorderLaw.gaussian().to_dict()["p"] is None


def test_non_pareto_laws_have_all_moments():
    for kind in KINDS[:-1]:
        assert DisorderLaw(kind).moment_order == math.inf


def test_rademacher_theta():
    law = DisorderLaw.rademacher(2.0)
    assert law.variance == 4.0 and law.theta == 2.0


# -- analytic moments against sampling and quadrature ---------------------------

@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.label())
def test_second_moment_is_variance(law):
    assert law.abs_moment(2) == pytest.approx(law.variance, rel=1e-12)


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.label())
def test_quantile_integrates_to_moments(law):
    from scipy import integrate
    m1, _ = integrate.quad(lambda u: float(law.quantile(u)), 0, 1, limit=400, points=[0.5])
    m2, _ = integrate.quad(lambda u: float(law.quantile(u)) ** 2, 0, 1, limit=400, points=[0.5])
    assert abs(m1) < 1e-7
    assert m2 == pytest.approx(law.variance, rel=1e-4)


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.label())
def test_sample_mean_and_variance(law):
    n = 400_000
    s = sample(law, n, seed=11)
    assert abs(s.mean) <= 4 * law.theta / math.sqrt(n)
    if law.kind != "pareto" or law.p >= 4:
        assert s.variance == pytest.approx(law.variance, rel=0.02)


def test_third_moment_finite_iff_p_at_least_three():
    for law in LAWS:
        finite = math.isfinite(law.abs_moment(3))
        assert finite == (law.moment_order >= 3), law.label()
    # the p-th moment itself is always finite
    assert math.isfinite(DisorderLaw.pareto(2.5).abs_moment(2.5))
    assert math.isinf(DisorderLaw.pareto(2.5).abs_moment(2.5 + 0.25))


@pytest.mark.parametrize("p", [2.0, 2.5, 2.9, 3.0, 5.0])
def test_pareto_tail_index_margin(p):
    a = DisorderLaw.pareto(p).tail_index
    assert a > p
    if p < 3:
        assert a < 3


def test_exp_moment_radius():
    assert DisorderLaw.gaussian(2.0).exp_moment_radius() > 0
    assert DisorderLaw.rademacher(1.0).exp_moment_radius() > 0
    assert DisorderLaw.uniform(1.0).exp_moment_radius() > 0
    # Laplace with unit variance: log mgf = -log(1 - t^2/2) > t^2 near t = 1.26
    r = DisorderLaw.expdiff(1.0).exp_moment_radius()
    assert 1.2 < r < 1.3
    assert DisorderLaw.pareto(3.0).exp_moment_radius() == 0.0


def test_log_mgf_large_argument_is_finite():
    assert math.isfinite(DisorderLaw.gaussian(1).log_mgf(1e3))
    assert DisorderLaw.rademacher(1).log_mgf(1e3) == pytest.approx(1e3 - math.log(2))
    assert DisorderLaw.expdiff(1).log_mgf(10.0) == math.inf


# -- sampling -------------------------------------------------------------------

def test_rademacher_support():
    s = sample(DisorderLaw.rademacher(1.0), 4, seed=3)
    assert set(s.values) <= {-1.0, 1.0}


def test_gaussian_variance_four():
    s = sample(DisorderLaw.gaussian(4.0), 10**6, seed=5)
    assert abs(s.variance - 4.0) < 0.04


def test_uniform_range():
    s = sample(DisorderLaw.uniform(1.0), 10**6, seed=5)
    assert s.values[0] >= -math.sqrt(3) and s.values[-1] <= math.sqrt(3)


def test_sample_is_sorted_and_deterministic():
    a = sample(DisorderLaw.expdiff(), 1000, seed=9)
    b = sample(DisorderLaw.expdiff(), 1000, seed=9)
    c = sample(DisorderLaw.expdiff(), 1000, seed=9, stream=1)
    assert np.all(np.diff(a.values) >= 0)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_streams_are_independent_of_each_other():
    x = rng_for(1, 0).standard_normal(10**5)
    y = rng_for(1, 1).standard_normal(10**5)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.02


def test_empty_sample_rejected():
    with pytest.raises(ValueError):
        EmpiricalSample(np.array([]))
    with pytest.raises(ValueError):
        sample(DisorderLaw.gaussian(), 0, seed=1)


def test_degenerate_law_samples_zero():
    law = DisorderLaw.gaussian(0.0)
    assert law.degenerate
    assert np.all(sample(law, 10, seed=1).values == 0)


# -- block convolution ----------------------------------------------------------

@pytest.mark.parametrize("law", LAWS[:5], ids=lambda l: l.label())
def test_block_convolve_L1_is_sample(law):
    assert np.array_equal(block_convolve(law, 1, 500, seed=4).values, sample(law, 500, seed=4).values)


def test_rademacher_pairs_are_binomial():
    n = 200_000
    v = block_convolve(DisorderLaw.rademacher(1.0), 2, n, seed=8).values
    assert set(np.unique(v)) == {-2.0, 0.0, 2.0}
    counts = np.array([(v == k).sum() for k in (-2.0, 0.0, 2.0)])
    res = stats.chisquare(counts, n * np.array([0.25, 0.5, 0.25]))
    assert res.pvalue > 1e-4


@pytest.mark.parametrize("law,L", [(DisorderLaw.gaussian(1.0), 4), (DisorderLaw.uniform(2.0), 8),
                                   (DisorderLaw.rademacher(1.0), 16)])
def test_block_variance_additivity(law, L):
    n = 200_000
    v = block_convolve(law, L, n, seed=2).variance
    # standard error of the sample variance is about var * sqrt(2/n) for near-Gaussian sums
    assert abs(v - L * law.variance) < 6 * L * law.variance * math.sqrt(2 / n) + 1e-12


def test_block_convolve_rejects_zero_L():
    with pytest.raises(ValueError):
        block_convolve(DisorderLaw.gaussian(), 0, 10, seed=1)


# -- W1 -------------------------------------------------------------------------

def test_w1_self_is_zero():
    a = sample(DisorderLaw.expdiff(), 1000, seed=1)
    assert w1_distance(a, a) == 0.0


def test_w1_point_masses():
    assert w1_distance(np.full(5, 2.0), np.full(5, -1.5)) == pytest.approx(3.5)


def test_w1_length_mismatch():
    a, b = np.zeros(3), np.zeros(4)
    with pytest.raises(ValueError):
        w1_distance(a, b)
    assert w1_distance(a, b, resample=True) == 0.0


def test_w1_same_law_shrinks():
    law = DisorderLaw.uniform(1.0)
    d = w1_distance(sample(law, 10**5, seed=1), sample(law, 10**5, seed=2))
    assert d < 0.02


def test_w1_gaussian_scales_against_quadrature():
    ref = quantile_w1(gaussian_quantile(1.0), gaussian_quantile(4.0))
    assert ref == pytest.approx(math.sqrt(2 / math.pi), rel=1e-8)
    n = 10**6
    d = w1_distance(sample(DisorderLaw.gaussian(1), n, seed=1), sample(DisorderLaw.gaussian(4), n, seed=2))
    assert abs(d - ref) < 0.01


def test_w1_to_gaussian_matches_quadrature_for_rademacher():
    # W1(Rademacher, N(0,1)) by quadrature of the quantile difference
    ref = quantile_w1(lambda u: -1.0 if u < 0.5 else 1.0, gaussian_quantile(1.0))
    assert w1_to_gaussian([-1.0, 1.0], 1.0) == pytest.approx(ref, rel=1e-7)


def test_w1_to_gaussian_weighted_equals_repeated():
    vals = np.array([-2.0, 0.0, 2.0])
    rep = np.repeat(vals, [1, 2, 1])
    assert w1_to_gaussian(vals, 2.0, [0.25, 0.5, 0.25]) == pytest.approx(w1_to_gaussian(rep, 2.0), rel=1e-12)


def test_w1_to_gaussian_zero_variance():
    assert w1_to_gaussian([1.0, -3.0], 0.0) == pytest.approx(2.0)


def test_w1_to_gaussian_of_gaussian_quantiles_is_small():
    n = 20_000
    u = (np.arange(n) + 0.5) / n
    assert w1_to_gaussian(gaussian_quantile(1.0)(u), 1.0) < 1e-3


_arrays = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=30)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30).flatmap(lambda n: st.tuples(*[st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n)] * 3)))
def test_w1_metric_axioms(triple):
    a, b, c = (np.array(x) for x in triple)
    ab, ba = w1_distance(a, b), w1_distance(b, a)
    assert ab == ba
    assert ab >= 0
    assert w1_distance(a, c) <= ab + w1_distance(b, c) + 1e-9 * (1 + ab)


@settings(max_examples=100, deadline=None)
@given(_arrays, st.floats(-50, 50))
def test_w1_translation(a, shift):
    a = np.array(a)
    assert w1_distance(a, a + shift) == pytest.approx(abs(shift), abs=1e-9 * (1 + np.abs(a).max()))


# -- CLT curve ------------------------------------------------------------------

def test_clt_curve_gaussian_is_noise_level():
    pts = w1_clt_curve(DisorderLaw.gaussian(2.0), [1, 4, 16], 50_000, seed=1)
    for p in pts:
        # empirical-to-true W1 for n Gaussian draws is O(sqrt(L var / n))
        assert p.w1 < 5 * math.sqrt(p.L * 2.0 / 50_000)


def test_clt_curve_rademacher_bounded():
    pts = w1_clt_curve(DisorderLaw.rademacher(1.0), [4, 16, 64], 100_000, seed=3, replicates=2)
    w = [p.w1 for p in pts]
    # the lattice spacing of the L-fold sum is 2, so W1 tends to 1/2
    assert all(0.45 < x < 0.6 for x in w)
    assert np.isfinite([p.stderr for p in pts]).all()

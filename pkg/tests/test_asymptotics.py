"""Influence variance, CLT experiments, and remainder-order probes."""

import numpy as np
import pytest

from affcalc import asymptotics as A
from affcalc import functionals as F
from affcalc import measures as M
from affcalc.errors import BadParameter, DegenerateVariance, InputError

from conftest import random_measure, uniform_density

U01 = M.uniform_on([0.0, 1.0])
QUAD = F.Quadratic(F.product_kernel())
MEAN = F.Moment(F.SCALAR_MAPS["identity"])


# --- influence variance --------------------------------------------------------


def test_variance_quadratic_example():
    assert A.influence_variance(QUAD, U01) == pytest.approx(0.25, abs=1e-12)


def test_variance_moment_example():
    assert A.influence_variance(MEAN, U01) == pytest.approx(0.25, abs=1e-12)


def test_variance_vanishes_at_cvm_reference():
    f0 = M.uniform_on([0.0, 0.5, 1.0])
    spec = F.CramerVonMises(f0)
    assert A.influence_variance(spec, f0) <= 1e-14


# --- CLT experiments -------------------------------------------------------------


def test_clt_reports_are_bit_identical_for_equal_seeds():
    a = A.clt_experiment(QUAD, U01, n=400, reps=150, seed=11)
    b = A.clt_experiment(QUAD, U01, n=400, reps=150, seed=11)
    assert a == b
    c = A.clt_experiment(QUAD, U01, n=400, reps=150, seed=12)
    assert c.ks_distance != a.ks_distance


def test_clt_moment_statistics_are_normalized():
    rep = A.clt_experiment(MEAN, U01, n=600, reps=400, seed=5)
    assert abs(rep.stat_mean) <= 0.1
    assert 0.9 <= rep.stat_variance <= 1.1
    assert rep.ks_distance <= 0.08


def test_clt_degenerate_variance():
    spec = F.CdfAt(-5.0)  # constant functional on this support
    with pytest.raises(DegenerateVariance):
        A.clt_experiment(spec, U01, n=200, reps=100, seed=0)


def test_clt_validates_sizes():
    with pytest.raises(BadParameter):
        A.clt_experiment(QUAD, U01, n=10, reps=200, seed=0)
    with pytest.raises(BadParameter):
        A.clt_experiment(QUAD, U01, n=200, reps=10, seed=0)


# --- remainder probes --------------------------------------------------------------


def test_cvm_exact_remainder_identity():
    # R equals the squared-CDF-gap integral, checked against a direct sum
    f0 = M.uniform_on([0.1, 0.4, 0.7, 1.0])
    spec = F.CramerVonMises(f0)
    rng = np.random.default_rng(50)
    pts = f0.locations
    for _ in range(50):
        base = random_measure(rng)
        g = random_measure(rng)
        r = spec.value(g) - spec.value(base) - spec.directional(base, g)
        gap = g.step_cdf.value(pts) - base.step_cdf.value(pts)
        direct = float(np.dot(gap * gap, f0.weights))
        assert abs(r - direct) <= 1e-12
        assert abs(r) <= M.kolmogorov_distance(g, base) ** 2 + 1e-12


def test_cvm_remainder_report_bound_and_slope():
    spec = F.CramerVonMises(uniform_density(0.0, 1.0))
    base = M.uniform_on([0.2, 0.8])
    other = M.uniform_on([0.1, 0.5, 0.9])
    path = [M.mix(base, other, 2.0**-k) for k in range(1, 9)]
    rep = A.remainder_probe(spec, base, "kolmogorov", path)
    assert rep.fitted_slope == pytest.approx(2.0, abs=0.05)
    for dist, rem in rep.samples:
        assert abs(rem) <= dist**2 + 1e-12
    # slope classification is stable on the tail of the path
    tail = A.remainder_probe(spec, base, "kolmogorov", path[4:])
    assert abs(tail.fitted_slope - rep.fitted_slope) <= 0.2


def test_strict_remainder_vanishes_on_two_sided_paths():
    spec = F.CramerVonMises(uniform_density(0.0, 1.0))
    center = M.uniform_on([0.25, 0.75])
    toward_a = M.uniform_on([0.1, 0.6])
    toward_b = M.uniform_on([0.3, 0.9])
    bases, probes = [], []
    for k in range(1, 11):
        t = 2.0**-k
        bases.append(M.mix(center, toward_a, t))
        probes.append(M.mix(center, toward_b, t))
    rep = A.remainder_probe(spec, center, "kolmogorov", probes, base_path=bases)
    ratios = [abs(r) / d for d, r in rep.samples]
    assert ratios[-1] <= 0.01 * ratios[0]


def test_prokhorov_first_order_obstruction():
    # max-profile kernel at a point mass: the remainder-to-distance ratio
    # converges to the negated slope of the profile
    spec = F.Quadratic(F.max_of_kernel(F.SCALAR_MAPS["identity"], name="max_of_identity"))
    base = M.dirac(0.5)
    path = [M.dirac(0.5 + 10.0**-k) for k in range(1, 7)]
    rep = A.remainder_probe(spec, base, "levy_prokhorov", path)
    assert rep.limit_ratio == pytest.approx(-1.0, abs=1e-3)
    assert rep.fitted_slope == pytest.approx(1.0, abs=0.05)


def test_affine_spec_has_zero_remainder():
    base = M.uniform_on([0.0, 1.0])
    path = [M.mix(base, M.dirac(0.25), 2.0**-k) for k in range(1, 6)]
    rep = A.remainder_probe(MEAN, base, "total_variation", path)
    assert all(rem == 0.0 for _, rem in rep.samples)
    assert np.isnan(rep.fitted_slope)


def test_remainder_requires_strictly_shrinking_path():
    base = M.dirac(0.0)
    with pytest.raises(InputError):
        A.remainder_probe(QUAD, base, "kolmogorov", [M.dirac(1.0), M.dirac(1.0)])


def test_remainder_needs_matching_base_path():
    with pytest.raises(InputError):
        A.remainder_probe(QUAD, M.dirac(0.0), "kolmogorov", [M.dirac(1.0)], base_path=[])

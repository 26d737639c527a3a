"""Numeric engine: ladders, affinity, mean values, integrals, shape probes."""

import numpy as np
import pytest

from affcalc import derivcheck as D
from affcalc import functionals as F
from affcalc import measures as M
from affcalc.errors import BadParameter, EvaluationFailure, NoBracket, NonFiniteDerivative

from conftest import builtin_specs, lebesgue_density, random_measure, random_point

D0, D1 = M.dirac(0.0), M.dirac(1.0)
U01 = M.uniform_on([0.0, 1.0])
QUAD = F.Quadratic(F.product_kernel())
ORIGIN = np.zeros(2)
ONES = np.ones(2)


# --- numeric_directional -----------------------------------------------------


def test_numeric_matches_analytic_quadratic():
    rep = D.numeric_directional(QUAD, D1, D0)
    assert rep.verdict == "converged"
    assert rep.estimate == pytest.approx(-2.0, abs=1e-8)


def test_ladder_is_strictly_decreasing():
    rep = D.numeric_directional(QUAD, D1, D0)
    ts = [t for t, _ in rep.step_ladder]
    assert all(a > b for a, b in zip(ts, ts[1:]))
    assert len(ts) == 12 and ts[0] == pytest.approx(2.0**-4)


def test_ladder_parameter_validation():
    with pytest.raises(BadParameter):
        D.numeric_directional(QUAD, D1, D0, ladder=3)
    with pytest.raises(BadParameter):
        D.numeric_directional(QUAD, D1, D0, t_min=0.0)


def test_cobb_douglas_homogeneous_case():
    # exponents summing to one: derivative at the origin equals the function
    f = D.cobb_douglas(0.5, 0.5)
    rep = D.numeric_directional(f, ORIGIN, ONES)
    assert rep.verdict == "converged"
    assert rep.estimate == pytest.approx(1.0, abs=1e-8)
    rep = D.numeric_directional(f, ORIGIN, np.array([1.0, 4.0]))
    assert rep.estimate == pytest.approx(2.0, abs=1e-8)


def test_cobb_douglas_subhomogeneous_diverges():
    f = D.cobb_douglas(0.3, 0.3)
    rep = D.numeric_directional(f, ORIGIN, ONES)
    assert rep.verdict == "diverging"


def test_cobb_douglas_superhomogeneous_vanishes():
    f = D.cobb_douglas(0.75, 0.75)
    rep = D.numeric_directional(f, ORIGIN, ONES, t_min=2.0**-60)
    assert rep.verdict == "converged"
    assert abs(rep.estimate) <= 1e-8


def test_evaluation_failure_propagates():
    with pytest.raises(EvaluationFailure):
        D.numeric_directional(lambda p: float("nan"), 0.0, 1.0)
    with pytest.raises(EvaluationFailure):
        D.numeric_directional(D.cobb_douglas(0.5, 0.5), np.array([-1.0, 0.0]), ONES)


def test_oracle_agreement_sample():
    rng = np.random.default_rng(20)
    for name, spec, lo, hi in builtin_specs():
        for _ in range(30):
            m = random_point(rng, name, lo, hi)
            d = random_point(rng, name, lo, hi)
            analytic = spec.directional(m, d)
            rep = D.numeric_directional(spec, m, d)
            assert abs(rep.estimate - analytic) <= 1e-6 * (1.0 + abs(analytic)), name


def test_hemidifferentiability_identities():
    # the path derivative of f(x_t) matches both one-sided closed forms
    rng = np.random.default_rng(21)
    h = 1e-6
    for name, spec, lo, hi in builtin_specs():
        for _ in range(10):
            x = random_point(rng, name, lo, hi)
            y = random_point(rng, name, lo, hi)
            t = float(rng.uniform(0.1, 0.9))
            phi = lambda s: spec.value(M.mix_point(x, y, s))
            central = (phi(t + h) - phi(t - h)) / (2.0 * h)
            xt = M.mix_point(x, y, t)
            forward = spec.directional(xt, y) / (1.0 - t)
            backward = -spec.directional(xt, x) / t
            assert central == pytest.approx(forward, abs=1e-6 * (1 + abs(forward)))
            assert central == pytest.approx(backward, abs=1e-6 * (1 + abs(backward)))


# --- affinity ------------------------------------------------------------------


def test_affinity_cobb_douglas_homogeneous_is_not_affine():
    f = D.cobb_douglas(0.5, 0.5)
    probes = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), ONES, np.array([0.5, 1.5])]
    affine, defect = D.affinity_test(f, ORIGIN, probes, trials=20)
    assert not affine
    assert defect > 1e-2


def test_affinity_cobb_douglas_superhomogeneous_is_zero():
    f = D.cobb_douglas(0.75, 0.75)
    probes = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), ONES, np.array([0.5, 1.5])]
    affine, defect = D.affinity_test(f, ORIGIN, probes, trials=20, t_min=2.0**-60, tol=1e-8)
    assert affine
    assert defect <= 1e-8
    for p in probes:
        assert abs(D.numeric_directional(f, ORIGIN, p, t_min=2.0**-60).estimate) <= 1e-8


def test_affinity_quadratic_spec():
    rng = np.random.default_rng(22)
    probes = [random_measure(rng) for _ in range(6)]
    affine, defect = D.affinity_test(QUAD, U01, probes, trials=20)
    assert affine
    assert defect <= 1e-8


def test_affinity_raises_on_divergence():
    f = D.cobb_douglas(0.3, 0.3)
    probes = [np.array([1.0, 0.0]), ONES]
    with pytest.raises(NonFiniteDerivative):
        D.affinity_test(f, ORIGIN, probes, trials=5)


# --- mean value point -----------------------------------------------------------


def test_mean_value_quadratic_at_midpoint():
    t_star, residual = D.mean_value_point(QUAD, D0, D1)
    assert t_star == pytest.approx(0.5, abs=1e-12)
    assert residual <= 1e-10


def test_mean_value_same_point():
    t_star, residual = D.mean_value_point(QUAD, U01, U01)
    assert residual == 0.0


def test_mean_value_affine_spec_accepts_any_node():
    spec = F.Moment(F.SCALAR_MAPS["identity"])
    t_star, residual = D.mean_value_point(spec, D0, D1)
    assert 0.0 < t_star < 1.0
    assert residual <= 1e-10


def test_mean_value_random_segments():
    rng = np.random.default_rng(23)
    for name, spec, lo, hi in builtin_specs():
        for _ in range(10):
            x = random_point(rng, name, lo, hi)
            y = random_point(rng, name, lo, hi)
            t_star, residual = D.mean_value_point(spec, x, y)
            assert residual <= 1e-8
            # verify the identity by direct substitution
            xt = M.mix_point(x, y, t_star)
            lhs = spec.directional(xt, y) / (1.0 - t_star)
            assert lhs == pytest.approx(spec.value(y) - spec.value(x), abs=2e-8)


class _WigglyScalar:
    """Smooth scalar functional on [0, 1] whose mean-value residual
    dips negative only between t = 1/5 and t = 7/9; with two scan nodes
    both land in the dip and no bracket is visible."""

    @staticmethod
    def _q(p):
        return (p - 0.2) * (p - 7.0 / 9.0)

    def value(self, p):
        p = float(p)
        return p**3 / 3.0 - (44.0 / 90.0) * p**2 + (7.0 / 45.0) * p

    def directional(self, x, y):
        return self._q(float(x)) * (float(y) - float(x))


def test_mean_value_no_bracket_at_coarse_resolution():
    spec = _WigglyScalar()
    with pytest.raises(NoBracket):
        D.mean_value_point(spec, 0.0, 1.0, scan_nodes=2)
    t_star, residual = D.mean_value_point(spec, 0.0, 1.0, scan_nodes=64)
    assert residual <= 1e-10
    assert t_star == pytest.approx(0.2, abs=1e-9)  # first bracket, left to right


# --- segment integral identity -----------------------------------------------------


def test_integral_identity_quadratic():
    assert D.segment_integral_identity(QUAD, D0, D1, 32) <= 1e-12


def test_integral_identity_same_point():
    assert D.segment_integral_identity(QUAD, U01, U01, 8) == 0.0


def test_integral_identity_affine_prospect():
    spec = F.Prospect(F.identity_weight(), F.identity_weight(), lebesgue_density(-1.0, 1.0))
    x, y = M.dirac(-0.5), M.uniform_on([-0.25, 0.75])
    assert D.segment_integral_identity(spec, x, y, 32) <= 1e-10


def test_integral_identity_random_segments():
    rng = np.random.default_rng(24)
    for name, spec, lo, hi in builtin_specs():
        for _ in range(10):
            x = random_point(rng, name, lo, hi)
            y = random_point(rng, name, lo, hi)
            assert D.segment_integral_identity(spec, x, y, 32) <= 1e-9, name


# --- shape probes --------------------------------------------------------------------


def _random_pairs(rng, count, lo=0.0, hi=1.0):
    return [(random_measure(rng, lo=lo, hi=hi), random_measure(rng, lo=lo, hi=hi)) for _ in range(count)]


def test_cvm_passes_all_convexity_probes():
    spec = F.CramerVonMises(M.uniform_on([0.0, 0.5, 1.0]))
    pairs = _random_pairs(np.random.default_rng(25), 100)
    for prop in D.SHAPE_PROPERTIES:
        rep = D.shape_probe(spec, prop, pairs)
        assert rep.holds, prop
        assert rep.witness is None


def test_jump_passes_all_convexity_probes():
    spec = F.Jump(2.0)
    pairs = _random_pairs(np.random.default_rng(26), 100)
    for prop in D.SHAPE_PROPERTIES:
        assert D.shape_probe(spec, prop, pairs).holds, prop


def test_quadratic_subgradient_inequality():
    pairs = _random_pairs(np.random.default_rng(27), 100)
    rep = D.shape_probe(QUAD, "convex", pairs)
    assert rep.holds


def test_negated_quadratic_fails_monotonicity_with_witness():
    neg = F.Scaled(QUAD, -1.0)
    pairs = [(D0, D1)] + _random_pairs(np.random.default_rng(28), 10)
    rep = D.shape_probe(neg, "monotone_derivative", pairs)
    assert not rep.holds
    wx, wy, values = rep.witness
    assert wx.approx_equal(D0) and wy.approx_equal(D1)
    assert values[2] == pytest.approx(2.0, abs=1e-12)


def test_negated_quadratic_fails_pseudoconvexity():
    neg = F.Scaled(QUAD, -1.0)
    rep = D.shape_probe(neg, "pseudoconvex", [(D0, D1)])
    assert not rep.holds


def test_shape_probe_rejects_unknown_property():
    with pytest.raises(BadParameter):
        D.shape_probe(QUAD, "concave", [(D0, D1)])

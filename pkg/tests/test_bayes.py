"""Bayesian updating, robustness ranges, and posterior loss."""

import numpy as np
import pytest

from affcalc import bayes as B
from affcalc import derivcheck as D
from affcalc import envelope as E
from affcalc import functionals as F
from affcalc import measures as M
from affcalc.errors import DomainMismatch, InputError, ZeroMarginal

from conftest import random_measure

D0, D1 = M.dirac(0.0), M.dirac(1.0)
U01 = M.uniform_on([0.0, 1.0])
MEAN = F.Moment(F.SCALAR_MAPS["identity"])

LIK2 = B.LikelihoodTable(np.array([0.0, 1.0]), ("x", "y"), np.array([[0.8, 0.2], [0.2, 0.8]]))
FLAT2 = B.LikelihoodTable(np.array([0.0, 1.0]), ("x", "y"), np.array([[0.5, 0.5], [0.5, 0.5]]))


# --- update -----------------------------------------------------------------


def test_posterior_two_point_example():
    post = B.posterior(U01, LIK2, "x")
    np.testing.assert_allclose(post.weights, [0.8, 0.2])


def test_posterior_point_mass_is_fixed():
    assert B.posterior(D1, LIK2, "x").approx_equal(D1)


def test_posterior_zero_marginal():
    lik = B.LikelihoodTable(np.array([0.0, 1.0]), ("x", "y"), np.array([[0.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ZeroMarginal):
        B.posterior(U01, lik, "x")


def test_posterior_rejects_unknown_parameter():
    with pytest.raises(DomainMismatch):
        B.posterior(M.dirac(0.5), LIK2, "x")


def test_posterior_drops_zero_likelihood_atoms():
    lik = B.LikelihoodTable(np.array([0.0, 1.0]), ("x", "y"), np.array([[1.0, 0.0], [0.0, 1.0]]))
    post = B.posterior(U01, lik, "x")
    assert post.approx_equal(D0)


def test_likelihood_table_validation():
    with pytest.raises(InputError):
        B.LikelihoodTable(np.array([0.0, 1.0]), ("x",), np.array([[0.5], [0.6]]))
    with pytest.raises(InputError):
        B.LikelihoodTable(np.array([0.0]), ("x", "x"), np.array([[0.5, 0.5]]))
    with pytest.raises(InputError):
        LIK2.column("zzz")


def test_likelihood_csv_round_trip(tmp_path):
    path = tmp_path / "lik.csv"
    path.write_text("theta,x,y\n0.0,0.8,0.2\n1.0,0.2,0.8\n")
    table = B.LikelihoodTable.from_csv(path)
    assert table.observations == ("x", "y")
    np.testing.assert_allclose(table.probabilities, LIK2.probabilities)
    with pytest.raises(InputError):
        B.LikelihoodTable.parse_csv("a,b\n1,2\n")


# --- mixture identities ------------------------------------------------------


def test_posterior_mean_ratio_identity():
    # value at a mixed prior equals the marginal-weighted ratio form
    rng = np.random.default_rng(40)
    grid = LIK2.parameters
    for _ in range(50):
        mu = random_measure(rng, grid=grid, max_support=2)
        nu = random_measure(rng, grid=grid, max_support=2)
        t = float(rng.uniform(0, 1))
        m_mu, m_nu = B.marginal(mu, LIK2, "x"), B.marginal(nu, LIK2, "x")
        lhs = B.composed_value(MEAN, M.mix(mu, nu, t), LIK2, "x")
        num = (1 - t) * m_mu * B.composed_value(MEAN, mu, LIK2, "x") + t * m_nu * B.composed_value(
            MEAN, nu, LIK2, "x"
        )
        assert lhs == pytest.approx(num / ((1 - t) * m_mu + t * m_nu), abs=1e-12)


def test_composed_directional_matches_numeric_engine():
    # exact chain rule vs the finite-difference ladder, mean and quadratic
    rng = np.random.default_rng(41)
    quad = F.Quadratic(F.product_kernel())
    for spec in (MEAN, quad):
        for _ in range(20):
            mu = random_measure(rng, grid=LIK2.parameters, max_support=2)
            nu = random_measure(rng, grid=LIK2.parameters, max_support=2)
            exact = B.composed_directional(spec, mu, nu, LIK2, "x")
            rep = D.numeric_directional(lambda p: B.composed_value(spec, p, LIK2, "x"), mu, nu)
            assert exact == pytest.approx(rep.estimate, abs=1e-6 * (1 + abs(exact)))


def test_composed_directional_zero_marginal_direction():
    lik = B.LikelihoodTable(np.array([0.0, 1.0]), ("x", "y"), np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert B.composed_directional(MEAN, D0, D1, lik, "x") == 0.0


# --- robustness ranges ----------------------------------------------------------


def brute_force_range(h, generators, points=1000):
    """Grid scan over the hull (2 or 3 generators)."""
    vals = []
    if len(generators) == 2:
        for lam in np.linspace(0.0, 1.0, points + 1):
            vals.append(h(M.mix(generators[0], generators[1], float(lam))))
    elif len(generators) == 3:
        steps = int(np.sqrt(points)) + 1
        for t1 in np.linspace(0.0, 1.0, steps + 1):
            for t2 in np.linspace(0.0, 1.0, steps + 1):
                vals.append(h(M.mix(M.mix(generators[0], generators[1], float(t1)), generators[2], float(t2))))
    else:
        raise ValueError("unsupported generator count")
    return min(vals), max(vals)


def test_range_uninformative_diracs():
    cls = B.PriorClass((D0, D1))
    rep = B.posterior_functional_range(cls, MEAN, FLAT2, "x")
    assert rep.lo == pytest.approx(0.0, abs=1e-12)
    assert rep.hi == pytest.approx(1.0, abs=1e-12)
    assert rep.lo_cert >= -1e-6 and rep.hi_cert >= -1e-6
    assert rep.converged


def test_range_informative_matches_brute_force():
    g1 = M.make_discrete([(0.0, 0.7), (1.0, 0.3)])
    g2 = M.make_discrete([(0.0, 0.2), (1.0, 0.8)])
    cls = B.PriorClass((g1, g2))
    rep = B.posterior_functional_range(cls, MEAN, LIK2, "x")
    lo, hi = brute_force_range(lambda m: B.composed_value(MEAN, m, LIK2, "x"), [g1, g2])
    assert rep.lo == pytest.approx(lo, abs=1e-4)
    assert rep.hi == pytest.approx(hi, abs=1e-4)
    assert rep.lo_cert >= -1e-6 and rep.hi_cert >= -1e-6


def test_range_interior_minimum_quadratic():
    # posterior mean crosses zero inside the hull: lo = 0 at an interior prior
    lik = B.LikelihoodTable(np.array([-1.0, 2.0]), ("x", "y"), np.array([[0.6, 0.4], [0.3, 0.7]]))
    quad = F.Quadratic(F.product_kernel())
    g1, g2 = M.dirac(-1.0), M.dirac(2.0)
    cls = B.PriorClass((g1, g2))
    rep = B.posterior_functional_range(cls, quad, lik, "x")
    lo, hi = brute_force_range(lambda m: B.composed_value(quad, m, lik, "x"), [g1, g2])
    assert rep.lo == pytest.approx(lo, abs=1e-4)
    assert rep.lo == pytest.approx(0.0, abs=1e-8)
    assert rep.hi == pytest.approx(hi, abs=1e-4)
    assert rep.lo_cert >= -1e-6 and rep.hi_cert >= -1e-6


def test_range_sandwiches_generators():
    rng = np.random.default_rng(42)
    grid = LIK2.parameters
    for _ in range(10):
        gens = tuple(random_measure(rng, grid=grid, max_support=2) for _ in range(3))
        cls = B.PriorClass(gens)
        rep = B.posterior_functional_range(cls, MEAN, LIK2, "x")
        for g in gens:
            v = B.composed_value(MEAN, g, LIK2, "x")
            assert rep.lo - 1e-10 <= v <= rep.hi + 1e-10


# --- posterior loss ---------------------------------------------------------------


def test_posterior_loss_examples():
    assert B.posterior_loss(U01) == pytest.approx(0.5)
    assert B.posterior_loss(M.dirac(3.0)) == 0.0
    assert B.posterior_loss(M.uniform_on([-1.0, 0.0, 1.0])) == pytest.approx(2.0 / 3.0)


def test_posterior_loss_rejects_unknown_loss():
    with pytest.raises(Exception):
        B.posterior_loss(U01, loss="squared")


def test_posterior_loss_concave_along_mixtures():
    # infimum of affine maps: superadditive along segments
    rng = np.random.default_rng(43)
    for _ in range(100):
        mu = random_measure(rng, lo=-2.0, hi=2.0)
        nu = random_measure(rng, lo=-2.0, hi=2.0)
        t = float(rng.uniform(0, 1))
        lhs = B.posterior_loss(M.mix(mu, nu, t))
        assert lhs >= (1 - t) * B.posterior_loss(mu) + t * B.posterior_loss(nu) - 1e-10


def test_posterior_loss_derivative_examples():
    mu = M.uniform_on([-1.0, 0.0, 1.0])
    assert B.posterior_loss_derivative(mu, M.dirac(2.0)) == pytest.approx(4.0 / 3.0, abs=1e-10)
    assert B.posterior_loss_derivative(mu, mu) == 0.0


def test_posterior_loss_derivative_fd_oracle():
    rng = np.random.default_rng(44)
    for _ in range(30):
        mu = random_measure(rng, lo=-2.0, hi=2.0)
        nu = random_measure(rng, lo=-2.0, hi=2.0)
        d = B.posterior_loss_derivative(mu, nu)
        t = 1e-7
        fd = (B.posterior_loss(M.mix(mu, nu, t)) - B.posterior_loss(mu)) / t
        assert d == pytest.approx(fd, abs=1e-4)


def test_loss_derivative_consistent_with_envelope_module():
    rng = np.random.default_rng(45)
    for _ in range(20):
        mu = random_measure(rng, lo=-1.0, hi=1.0)
        nu = random_measure(rng, lo=-1.0, hi=1.0)
        assert B.posterior_loss_derivative(mu, nu) == -E.median_envelope_derivative(mu, nu)

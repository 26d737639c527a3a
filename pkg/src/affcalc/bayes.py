"""Bayesian updating, prior-robustness ranges, and posterior loss.

Priors are finite-support measures over a parameter grid; likelihoods
are row-stochastic tables over opaque observation labels.  The
robustness range of a posterior functional over the convex hull of
finitely many generator priors is computed by a conditional-gradient
loop whose linear oracle is exact: the mixture-path derivative of the
composed map prior -> functional(posterior) factors through the Bayes
update as (marginal ratio) * (derivative at the posteriors), which is
affine in the direction, so its extremes over the hull sit at
generators.  Necessary first-order certificates are reported at both
endpoints.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import envelope as _envelope
from .errors import BadParameter, DomainMismatch, InputError, ZeroMarginal
from .functionals import Functional
from .measures import DiscreteMeasure, make_discrete, mix

ROW_SUM_TOL = 1e-12
PARAM_MATCH_TOL = 1e-9
CERT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LikelihoodTable:
    """P(observation | parameter), rows indexed by parameter."""

    parameters: np.ndarray
    observations: tuple[str, ...]
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        params = np.asarray(self.parameters, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        obs = tuple(str(o) for o in self.observations)
        if params.ndim != 1 or probs.shape != (params.size, len(obs)):
            raise InputError("likelihood table must be parameters x observations")
        if len(set(obs)) != len(obs):
            raise InputError("observation labels must be distinct")
        if params.size > 1 and not np.all(np.diff(params) > 0):
            raise InputError("parameters must be strictly increasing")
        if np.any(probs < 0):
            raise InputError("likelihood probabilities must be nonnegative")
        rows = probs.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > ROW_SUM_TOL):
            raise InputError("likelihood rows must sum to one")
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "observations", obs)

    def column(self, obs: str) -> np.ndarray:
        try:
            j = self.observations.index(str(obs))
        except ValueError:
            raise InputError(f"unknown observation label {obs!r}") from None
        return self.probabilities[:, j]

    @classmethod
    def from_csv(cls, path: Union[str, os.PathLike]) -> "LikelihoodTable":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return cls.parse_csv(fh.read())

    @classmethod
    def parse_csv(cls, text: str) -> "LikelihoodTable":
        """Header ``theta,<label>,...``; one row per parameter value."""
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
        if not rows or rows[0][0].strip() != "theta" or len(rows[0]) < 2:
            raise InputError("likelihood CSV must start with a 'theta,<labels...>' header")
        labels = tuple(c.strip() for c in rows[0][1:])
        params, probs = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(labels) + 1:
                raise InputError(f"row {lineno}: expected {len(labels) + 1} columns")
            try:
                params.append(float(row[0]))
                probs.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise InputError(f"row {lineno}: not numeric") from exc
        return cls(np.asarray(params), labels, np.asarray(probs))


@dataclass(frozen=True, eq=False)
class PriorClass:
    """Convex hull of finitely many generator priors."""

    generators: tuple[DiscreteMeasure, ...]

    def __post_init__(self) -> None:
        gens = tuple(self.generators)
        if not gens:
            raise InputError("a prior class needs at least one generator")
        for g in gens:
            if not g.is_probability():
                raise InputError("prior-class generators must be probability measures")
        object.__setattr__(self, "generators", gens)

    @property
    def ambient_support(self) -> np.ndarray:
        out = self.generators[0].locations
        for g in self.generators[1:]:
            out = np.union1d(out, g.locations)
        return out


def _likelihood_at(prior: DiscreteMeasure, lik: LikelihoodTable, obs: str) -> np.ndarray:
    col = lik.column(obs)
    idx = np.searchsorted(lik.parameters, prior.locations)
    idx = np.clip(idx, 0, lik.parameters.size - 1)
    near = np.abs(lik.parameters[idx] - prior.locations) <= PARAM_MATCH_TOL
    left = np.abs(lik.parameters[np.maximum(idx - 1, 0)] - prior.locations) <= PARAM_MATCH_TOL
    if not np.all(near | left):
        missing = prior.locations[~(near | left)]
        raise DomainMismatch(f"prior atoms {missing.tolist()} are not rows of the likelihood table")
    use = np.where(near, idx, np.maximum(idx - 1, 0))
    return col[use]


def marginal(prior: DiscreteMeasure, lik: LikelihoodTable, obs: str) -> float:
    """Marginal likelihood of ``obs`` under ``prior``."""
    return float(np.dot(_likelihood_at(prior, lik, obs), prior.weights))


def posterior(prior: DiscreteMeasure, lik: LikelihoodTable, obs: str) -> DiscreteMeasure:
    """Bayes update: weights proportional to P(obs | theta) * prior(theta)."""
    if not prior.is_probability():
        raise InputError("posterior needs a probability prior")
    raw = _likelihood_at(prior, lik, obs) * prior.weights
    total = float(np.sum(raw))
    if total <= 0.0:
        raise ZeroMarginal(f"observation {obs!r} has zero marginal likelihood under this prior")
    return make_discrete(zip(prior.locations, raw / total))


def composed_value(spec: Functional, prior: DiscreteMeasure, lik: LikelihoodTable, obs: str) -> float:
    """Posterior functional: evaluate ``spec`` at the Bayes update."""
    return spec.value(posterior(prior, lik, obs))


def composed_directional(
    spec: Functional,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    lik: LikelihoodTable,
    obs: str,
) -> float:
    """Mixture-path derivative of the posterior functional, exactly.

    The Bayes update maps the segment from mu to nu onto the segment
    from mu's posterior to nu's posterior with a reparametrized speed
    m_nu / m_mu at t = 0, so the chain rule needs only the marginals
    and the closed-form derivative at the posteriors.  A direction with
    zero marginal leaves the posterior unchanged and contributes zero.
    """
    m_mu = marginal(mu, lik, obs)
    if m_mu <= 0.0:
        raise ZeroMarginal(f"observation {obs!r} has zero marginal likelihood under the base prior")
    m_nu = marginal(nu, lik, obs)
    if m_nu == 0.0:
        return 0.0
    return (m_nu / m_mu) * spec.directional(posterior(mu, lik, obs), posterior(nu, lik, obs))


@dataclass(frozen=True)
class RangeReport:
    """Extremes of a posterior functional over a prior class.

    ``lo_cert``/``hi_cert`` are the first-order certificates at the two
    endpoints, oriented so that a valid necessary condition is a value
    >= -tolerance in both cases.  ``converged`` flags whether both
    conditional-gradient loops met the certificate tolerance within the
    iteration budget (otherwise the best iterates are still reported).
    """

    lo: float
    hi: float
    lo_cert: float
    hi_cert: float
    lo_prior: DiscreteMeasure
    hi_prior: DiscreteMeasure
    iterations: int
    converged: bool


def _conditional_gradient(
    h,
    dh,
    generators: Sequence[DiscreteMeasure],
    max_iters: int,
    cert_tol: float,
) -> tuple[DiscreteMeasure, float, int, bool]:
    """Minimize h over the hull; dh(mu, g) is the exact derivative toward g.

    The linear oracle picks the generator with the most negative
    derivative; the step is chosen by bounded line search (the 2/(k+2)
    schedule is the fallback when the search fails to improve).  Each
    generator seeds one run and the best final iterate wins.
    """
    best: tuple[float, DiscreteMeasure, int, bool] | None = None
    total_iters = 0
    for start in generators:
        mu = start
        val = h(mu)
        converged = False
        k = 0
        for k in range(1, max_iters + 1):
            total_iters += 1
            derivs = [dh(mu, g) for g in generators]
            cert = min(derivs)
            if cert >= -cert_tol:
                converged = True
                break
            target = generators[int(np.argmin(derivs))]

            def along(t: float) -> float:
                return h(mix(mu, target, float(t)))

            res = minimize_scalar(along, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
            searched = float(res.x)
            if searched > 1.0 - 1e-9:
                searched = 1.0
            steps = [searched, 2.0 / (k + 2.0)]
            cand = [(h(mix(mu, target, s)), s) for s in steps]
            nval, step = min(cand)
            if nval >= val:
                break
            mu, val = mix(mu, target, step), nval
        if best is None or val < best[0]:
            best = (val, mu, k, converged)
    assert best is not None
    val, mu, iters, converged = best
    return mu, val, total_iters, converged


def posterior_functional_range(
    cls: PriorClass,
    spec: Functional,
    lik: LikelihoodTable,
    obs: str,
    max_iters: int = 500,
    cert_tol: float = CERT_TOL,
) -> RangeReport:
    """Range of prior -> spec(posterior) over the hull of the class."""

    def h(mu: DiscreteMeasure) -> float:
        return composed_value(spec, mu, lik, obs)

    def dh(mu: DiscreteMeasure, g: DiscreteMeasure) -> float:
        return composed_directional(spec, mu, g, lik, obs)

    lo_mu, lo_val, lo_iters, lo_ok = _conditional_gradient(h, dh, cls.generators, max_iters, cert_tol)

    def neg_h(mu):
        return -h(mu)

    def neg_dh(mu, g):
        return -dh(mu, g)

    hi_mu, hi_neg, hi_iters, hi_ok = _conditional_gradient(neg_h, neg_dh, cls.generators, max_iters, cert_tol)

    lo_cert = min(dh(lo_mu, g) for g in cls.generators)
    hi_cert = min(-dh(hi_mu, g) for g in cls.generators)
    return RangeReport(
        lo=float(lo_val),
        hi=float(-hi_neg),
        lo_cert=float(lo_cert),
        hi_cert=float(hi_cert),
        lo_prior=lo_mu,
        hi_prior=hi_mu,
        iterations=lo_iters + hi_iters,
        converged=lo_ok and hi_ok,
    )


def posterior_loss(prior: DiscreteMeasure, loss: str = "absolute") -> float:
    """Expected loss of the Bayes estimator under ``prior``.

    For absolute loss the estimator is any median and the value is
    independent of which median is chosen.
    """
    if loss != "absolute":
        raise BadParameter(f"unsupported loss {loss!r}; only 'absolute' is built in")
    itv = _envelope.median_interval(prior)
    return _envelope.abs_loss_integral(itv.lo, prior)


def posterior_loss_derivative(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Mixture-path derivative of the expected absolute loss.

    Equals the infimum over medians of
    integral |s-theta| d(nu) - integral |s-theta| d(mu), i.e. the
    negated envelope derivative of the negated-loss value function.
    """
    return -_envelope.median_envelope_derivative(mu, nu)

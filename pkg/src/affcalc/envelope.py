"""Value functions, solution sets, and envelope derivatives.

A parametric problem holds an objective f(s, x) over a convex set of
points x, a per-section mixture-path derivative, and a solver for the
argmax set sigma(x).  The envelope derivative compares the closed-form
candidate sup_{s in sigma(x)} Df_s(x; y) against a finite-difference
derivative of the value function; a disagreement flags failure of the
upper-semicontinuity hypothesis the equality needs (or, possibly, fd
noise - the report does not decide which).

The one interval-domain family shipped here is the negated absolute
loss, whose solution set is the median interval; its envelope
derivative is evaluated by exact piecewise-linear enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .derivcheck import numeric_directional
from .errors import InputError, NonFiniteDerivative, NotViable
from .measures import DiscreteMeasure

SOLUTION_TIE_TOL = 1e-12
MEDIAN_TOL = 1e-12


@dataclass(frozen=True)
class MedianInterval:
    """Closed interval of medians: F(s) >= 1/2 and F(s-) <= 1/2 on it."""

    lo: float
    hi: float

    def __iter__(self):
        yield self.lo
        yield self.hi

    def contains(self, s: float) -> bool:
        return self.lo <= s <= self.hi


Solutions = Union[list, MedianInterval]


@dataclass(frozen=True, eq=False)
class EnvelopeProblem:
    """Parametric objective with a solution-set oracle.

    ``solver`` returns sigma(x) as a list of parameters (finite case)
    or a MedianInterval; interval problems must also provide
    ``interval_sup`` computing sup of the section derivative over the
    interval exactly.
    """

    objective: Callable[[float, object], float]
    section_derivative: Callable[[float, object, object], float]
    solver: Callable[[object], Solutions]
    interval_sup: Optional[Callable[[MedianInterval, object, object], float]] = None
    name: str = ""


def finite_problem(
    parameters: Sequence[float],
    objective: Callable[[float, object], float],
    section_derivative: Callable[[float, object, object], float],
    name: str = "",
) -> EnvelopeProblem:
    """Problem over a finite parameter list; the solver enumerates."""
    params = [float(s) for s in parameters]
    if not params:
        raise InputError("finite parameter domain must be nonempty")

    def solver(x):
        vals = [objective(s, x) for s in params]
        top = max(vals)
        return [s for s, v in zip(params, vals) if v >= top - SOLUTION_TIE_TOL]

    return EnvelopeProblem(objective, section_derivative, solver, name=name)


def value_and_solutions(problem: EnvelopeProblem, x) -> tuple[float, Solutions]:
    """Value v(x) = sup_s f(s, x) and the solution set sigma(x)."""
    sols = problem.solver(x)
    if isinstance(sols, MedianInterval):
        return problem.objective(sols.lo, x), sols
    if not sols:
        raise NotViable("solver returned an empty solution set")
    return problem.objective(sols[0], x), sols


@dataclass(frozen=True)
class DanskinReport:
    formula_value: float
    fd_value: float
    agree: bool
    fd_verdict: str


def danskin_derivative(
    problem: EnvelopeProblem,
    x,
    y,
    agree_tol: float = 1e-4,
    t_min: float = 2.0**-15,
    ladder: int = 12,
) -> DanskinReport:
    """Envelope derivative: closed-form sup versus finite differences.

    ``agree=False`` means the sup over the solution set does not match
    the one-sided derivative of the value function at tolerance
    ``agree_tol``, the signature of a failing envelope-equality
    hypothesis.
    """
    _, sols = value_and_solutions(problem, x)
    if isinstance(sols, MedianInterval):
        if problem.interval_sup is None:
            raise InputError("interval-domain problem without an interval_sup oracle")
        formula = problem.interval_sup(sols, x, y)
    else:
        formula = max(problem.section_derivative(s, x, y) for s in sols)

    report = numeric_directional(lambda p: value_and_solutions(problem, p)[0], x, y, t_min=t_min, ladder=ladder)
    if report.verdict == "diverging":
        raise NonFiniteDerivative("value function has no finite derivative along this direction")
    fd = report.estimate
    return DanskinReport(
        formula_value=float(formula),
        fd_value=float(fd),
        agree=abs(formula - fd) <= agree_tol,
        fd_verdict=report.verdict,
    )


# ---------------------------------------------------------------------------
# The negated-absolute-loss family and its median solution set


def median_interval(mu: DiscreteMeasure) -> MedianInterval:
    """All s with F(s) >= 1/2 and F(s-) <= 1/2, with tight endpoints."""
    if not mu.is_probability():
        raise InputError("median interval needs a probability measure")
    cum = np.cumsum(mu.weights)
    i_lo = int(np.searchsorted(cum, 0.5 - MEDIAN_TOL, side="left"))
    lo = float(mu.locations[i_lo])
    if cum[i_lo] > 0.5 + MEDIAN_TOL:
        return MedianInterval(lo, lo)
    return MedianInterval(lo, float(mu.locations[i_lo + 1]))


def abs_loss_integral(s: float, m: DiscreteMeasure) -> float:
    return float(np.dot(np.abs(s - m.locations), m.weights))


def absolute_loss_value(mu: DiscreteMeasure) -> float:
    """sup_s of -integral |s - theta| dmu, attained on the median interval."""
    return -abs_loss_integral(median_interval(mu).lo, mu)


def median_envelope_derivative(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Envelope derivative of the negated absolute loss at mu toward nu.

    Maximizes s |-> integral |s-theta| dmu - integral |s-theta| dnu
    over the median interval of mu.  The map is piecewise linear, so
    the exact maximum sits at an interval endpoint or an interior atom
    of either measure; no numeric optimizer is involved.
    """
    itv = median_interval(mu)
    cands = {itv.lo, itv.hi}
    for loc in np.concatenate([mu.locations, nu.locations]):
        if itv.lo < loc < itv.hi:
            cands.add(float(loc))
    return max(abs_loss_integral(s, mu) - abs_loss_integral(s, nu) for s in sorted(cands))


def absolute_loss_problem() -> EnvelopeProblem:
    """Envelope problem for v(mu) = sup_s of -integral |s - theta| dmu."""

    def objective(s, mu):
        return -abs_loss_integral(s, mu)

    def section_derivative(s, mu, nu):
        return abs_loss_integral(s, mu) - abs_loss_integral(s, nu)

    def interval_sup(itv: MedianInterval, mu, nu):
        cands = {itv.lo, itv.hi}
        for loc in np.concatenate([mu.locations, nu.locations]):
            if itv.lo < loc < itv.hi:
                cands.add(float(loc))
        return max(section_derivative(s, mu, nu) for s in sorted(cands))

    return EnvelopeProblem(objective, section_derivative, median_interval, interval_sup, name="absolute_loss")


def counterexample_danskin() -> EnvelopeProblem:
    """Fixture where the envelope equality fails at x = 1/2 toward y = 1.

    Points are scalars in [0, 1].  The parameter set mixes an isolated
    linear section (s = 0) with a family of concave parabolas indexed
    by s in (1/2, 1]; the solution set jumps as x crosses 1/2, the
    upper-semicontinuity hypothesis fails there, and the value function
    is flat to the right of 1/2 while the best section still slopes
    down: Dv(1/2; 1) = 0 against a section sup of -1/2.
    """

    def objective(s, x):
        x = float(x)
        if s == 0.0:
            return 0.5 - x
        return -((x - s) ** 2)

    def section_derivative(s, x, y):
        x, y = float(x), float(y)
        if s == 0.0:
            return -(y - x)
        return -2.0 * (x - s) * (y - x)

    def solver(x):
        x = float(x)
        if not 0.0 <= x <= 1.0:
            raise InputError("the fixture's domain is [0, 1]")
        return [0.0] if x <= 0.5 else [x]

    return EnvelopeProblem(objective, section_derivative, solver, name="counterexample_danskin")


FIXTURES: dict[str, Callable[[], EnvelopeProblem]] = {
    "counterexample_danskin": counterexample_danskin,
    "absolute_loss": absolute_loss_problem,
}


def stationarity_certificate(spec, x_hat, generators: Sequence) -> tuple[float, int]:
    """First-order certificate over the convex hull of ``generators``.

    Because the differential is affine in the direction, its minimum
    over the hull is attained at a generator; a minimizer of the
    functional must certify min >= 0.  Returns the minimum and the
    index of the attaining generator (lowest index on ties).
    """
    if not generators:
        raise InputError("need at least one generator")
    vals = [spec.directional(x_hat, g) for g in generators]
    idx = int(np.argmin(vals))
    return float(vals[idx]), idx


def envelope_gap_check(problem: EnvelopeProblem, x, y, fd_value: float, slack: float = 1e-4) -> bool:
    """Envelope inequality: the value derivative dominates every section's."""
    _, sols = value_and_solutions(problem, x)
    if isinstance(sols, MedianInterval):
        sols = [sols.lo, sols.hi]
    return all(fd_value >= problem.section_derivative(s, x, y) - slack for s in sols)

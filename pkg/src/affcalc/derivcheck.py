"""Numeric engine for mixture-path calculus.

Finite-difference directional derivatives with Richardson
extrapolation, affinity probes for the differential, mean-value points,
the segment integral identity, and convexity-shape probes.  Everything
here works over an abstract convex-point interface: a point is anything
:func:`affcalc.measures.mix_point` can mix (measures, measure pairs,
arrays, scalars) and a functional is either a callable or an object
exposing ``value``/``directional``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BadParameter, EvaluationFailure, NoBracket, NonFiniteDerivative
from .measures import mix_point

DEFAULT_T_MIN = 2.0**-15
DEFAULT_LADDER = 12
DEFAULT_FD_TOL = 1e-7


def _as_callable(f) -> Callable:
    if callable(f) and not hasattr(f, "value"):
        return f
    return f.value


def _safe_eval(f: Callable, point) -> float:
    try:
        v = float(f(point))
    except Exception as exc:  # noqa: BLE001 - contract: propagate as EvaluationFailure
        raise EvaluationFailure(f"point evaluation failed: {exc}") from exc
    if not math.isfinite(v):
        raise EvaluationFailure(f"point evaluation returned {v!r}")
    return v


@dataclass(frozen=True)
class DerivativeReport:
    """Result of one finite-difference ladder.

    ``step_ladder`` pairs each step t (strictly decreasing) with its
    raw difference quotient; ``estimate`` is the Richardson-extrapolated
    limit and ``extrapolated_error`` its residual.  ``verdict`` is
    ``converged`` when that residual is within the caller's tolerance,
    ``diverging`` when the quotients grow without bound, and
    ``oscillating`` otherwise.
    """

    estimate: float
    step_ladder: tuple[tuple[float, float], ...]
    extrapolated_error: float
    verdict: str

    @property
    def quotients(self) -> np.ndarray:
        return np.asarray([q for _, q in self.step_ladder])


def numeric_directional(
    f,
    x,
    y,
    t_min: float = DEFAULT_T_MIN,
    ladder: int = DEFAULT_LADDER,
    tol: float = DEFAULT_FD_TOL,
) -> DerivativeReport:
    """Estimate the mixture-path derivative of ``f`` at ``x`` toward ``y``.

    Difference quotients are taken at steps t = t_min * 2**k for
    k = ladder-1, ..., 0 (largest first) and extrapolated with a
    three-term Richardson scheme.  Divergence is declared when the last
    four quotients increase monotonically in magnitude and at least
    double over those three halvings; that cumulative criterion also
    catches slow power-law blowups that grow by well under 2x per rung.
    """
    if ladder < 4:
        raise BadParameter(f"ladder must be >= 4, got {ladder}")
    if not (0.0 < t_min < 1.0):
        raise BadParameter(f"t_min must be in (0, 1), got {t_min!r}")
    fn = _as_callable(f)
    f0 = _safe_eval(fn, x)
    ts = [t_min * 2.0 ** (ladder - 1 - k) for k in range(ladder)]
    if ts[0] >= 1.0:
        raise BadParameter("t_min * 2**(ladder-1) must stay below 1")
    qs = [( _safe_eval(fn, mix_point(x, y, t)) - f0) / t for t in ts]

    mags = np.abs(qs)
    tail = mags[-4:]
    diverging = bool(np.all(np.diff(tail) > 0) and tail[-1] >= 2.0 * tail[0]) or bool(
        np.all(np.diff(mags) > 0) and mags[-1] >= 4.0 * mags[0]
    )

    r1 = [2.0 * qs[i + 1] - qs[i] for i in range(len(qs) - 1)]
    r2 = [(4.0 * r1[i + 1] - r1[i]) / 3.0 for i in range(len(r1) - 1)]
    estimate = r2[-1]
    err = max(abs(r2[-1] - r2[-2]), abs(r2[-1] - r1[-1]))

    if diverging:
        verdict = "diverging"
    elif err <= tol:
        verdict = "converged"
    else:
        verdict = "oscillating"
    return DerivativeReport(
        estimate=float(estimate),
        step_ladder=tuple(zip(ts, qs)),
        extrapolated_error=float(err),
        verdict=verdict,
    )


def affinity_test(
    f,
    x,
    probes: Sequence,
    trials: int = 40,
    seed: int = 0,
    t_grid: Sequence[float] = (0.25, 0.5, 0.75),
    tol: float = 1e-6,
    t_min: float = DEFAULT_T_MIN,
    ladder: int = DEFAULT_LADDER,
) -> tuple[bool, float]:
    """Probe whether the directional derivative of ``f`` at ``x`` is affine.

    Compares D(x; mix(p, q, t)) against (1-t) D(x; p) + t D(x; q) over
    seeded random probe pairs and a t-grid, all derivatives estimated
    with :func:`numeric_directional`.  Raises NonFiniteDerivative if
    any probe ladder diverges.
    """
    if len(probes) < 2:
        raise BadParameter("affinity_test needs at least two probes")
    rng = np.random.default_rng(seed)

    cache: dict[int, float] = {}

    def deriv_to(point, key: Optional[int] = None) -> float:
        if key is not None and key in cache:
            return cache[key]
        rep = numeric_directional(f, x, point, t_min=t_min, ladder=ladder)
        if rep.verdict == "diverging":
            raise NonFiniteDerivative("a probe direction has no finite derivative")
        if key is not None:
            cache[key] = rep.estimate
        return rep.estimate

    max_defect = 0.0
    for _ in range(trials):
        i, j = rng.integers(0, len(probes), size=2)
        di = deriv_to(probes[i], int(i))
        dj = deriv_to(probes[j], int(j))
        for t in t_grid:
            mixed = deriv_to(mix_point(probes[i], probes[j], float(t)))
            defect = abs(mixed - ((1.0 - t) * di + t * dj))
            max_defect = max(max_defect, defect)
    return max_defect <= tol, max_defect


def mean_value_point(
    spec,
    x,
    y,
    scan_nodes: int = 64,
    tol: float = 1e-8,
) -> tuple[float, float]:
    """Find t* in (0,1) where the mean-value identity holds.

    The scan looks for a sign change of
    g(t) = D(x_t; y)/(1-t) - (f(y) - f(x)) at ``scan_nodes`` points and
    bisects the first bracket; for affine functionals every t works and
    the first scan node with |g| <= tol is returned.  Raises NoBracket
    when the scan resolution is too coarse (retry with more nodes).
    """
    gap = spec.value(y) - spec.value(x)

    def g(t: float) -> float:
        return spec.directional(mix_point(x, y, t), y) / (1.0 - t) - gap

    ts = [(k + 1.0) / (scan_nodes + 1.0) for k in range(scan_nodes)]
    vals = [g(t) for t in ts]
    for t, v in zip(ts, vals):
        if v == 0.0:
            return t, 0.0
    bracket = None
    for k in range(scan_nodes - 1):
        if vals[k] * vals[k + 1] < 0.0:
            bracket = (ts[k], ts[k + 1], vals[k])
            break
    if bracket is None:
        best = int(np.argmin(np.abs(vals)))
        if abs(vals[best]) <= tol:
            return ts[best], abs(vals[best])
        raise NoBracket(
            f"no sign change among {scan_nodes} scan nodes (min |g| = {min(map(abs, vals)):.3g}); "
            "raise the resolution"
        )
    lo, hi, glo = bracket
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= 1e-13 or hi - lo < 1e-15:
            return mid, abs(gm)
        if glo * gm < 0.0:
            hi = mid
        else:
            lo, glo = mid, gm
    mid = 0.5 * (lo + hi)
    return mid, abs(g(mid))


def segment_integral_identity(spec, x, y, nodes: int = 32) -> float:
    """Residual of f(y) - f(x) = int_0^1 D(x_t; y)/(1-t) dt by Gauss-Legendre."""
    if nodes < 1:
        raise BadParameter("need at least one quadrature node")
    z, w = np.polynomial.legendre.leggauss(nodes)
    ts = 0.5 * (z + 1.0)
    total = 0.0
    for t, wt in zip(ts, w):
        total += 0.5 * wt * spec.directional(mix_point(x, y, float(t)), y) / (1.0 - t)
    return abs(spec.value(y) - spec.value(x) - total)


SHAPE_PROPERTIES = ("convex", "quasiconvex", "pseudoconvex", "monotone_derivative")


@dataclass(frozen=True)
class ShapeReport:
    """Outcome of a shape probe; a failing report carries a witness.

    The witness is (x, y, values) where values are the quantities whose
    sign violated the property, re-checkable by a single evaluation.
    """

    property: str
    holds: bool
    witness: Optional[tuple] = None


def shape_probe(
    spec,
    property: str,
    pairs: Sequence[tuple],
    tol: float = 1e-10,
    tol_strict: float = 1e-12,
) -> ShapeReport:
    """Check a convexity-type property of ``spec`` on candidate pairs.

    monotone_derivative: D(x;y) + D(y;x) <= tol;
    convex:              f(y) >= f(x) + D(x;y) - tol;
    quasiconvex:         f(y) <= f(x) implies D(x;y) <= tol;
    pseudoconvex:        f(y) < f(x) - tol implies D(x;y) < -tol_strict.

    Ordered implications are checked in both orientations of each pair;
    the first violation becomes the witness.
    """
    if property not in SHAPE_PROPERTIES:
        raise BadParameter(f"unknown shape property {property!r}; expected one of {SHAPE_PROPERTIES}")
    for x, y in pairs:
        if property == "monotone_derivative":
            dxy = spec.directional(x, y)
            dyx = spec.directional(y, x)
            if dxy + dyx > tol:
                return ShapeReport(property, False, (x, y, (dxy, dyx, dxy + dyx)))
            continue
        for a, b in ((x, y), (y, x)):
            fa, fb = spec.value(a), spec.value(b)
            dab = spec.directional(a, b)
            if property == "convex":
                if fb < fa + dab - tol:
                    return ShapeReport(property, False, (a, b, (fa, fb, dab)))
            elif property == "quasiconvex":
                if fb <= fa and dab > tol:
                    return ShapeReport(property, False, (a, b, (fa, fb, dab)))
            elif property == "pseudoconvex":
                if fb < fa - tol and not dab < -tol_strict:
                    return ShapeReport(property, False, (a, b, (fa, fb, dab)))
    return ShapeReport(property, True, None)


def cobb_douglas(alpha: float, beta: float) -> Callable[[np.ndarray], float]:
    """f(p) = p[0]**alpha * p[1]**beta on the nonnegative quadrant.

    The standard two-exponent fixture whose mixture-path derivative at
    the origin divides into three regimes by alpha + beta: below one it
    blows up, at one it equals f itself (and is not affine), above one
    it vanishes identically.
    """
    if alpha <= 0 or beta <= 0:
        raise BadParameter("both exponents must be positive")

    def f(p) -> float:
        p = np.asarray(p, dtype=float)
        if np.any(p < 0):
            raise EvaluationFailure("point outside the nonnegative quadrant")
        return float(p[0] ** alpha * p[1] ** beta)

    return f

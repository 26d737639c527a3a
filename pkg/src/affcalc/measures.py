"""Finite-support measures on the real line.

Carriers for everything downstream: discrete (probability or signed)
measures with sorted atom lists, their right-continuous CDFs with left
limits, piecewise-constant density measures for the nonatomic reference
weights, mixture paths, empirical distributions, probability metrics,
and the CSV formats the CLI ingests and emits.

All values are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import BadParameter, EmptySample, InputError, NotAProbability

PROB_MASS_TOL = 1e-12

_METRIC_KINDS = ("kolmogorov", "total_variation", "levy_prokhorov")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite measure ``sum_i weights[i] * delta(locations[i])``.

    Locations are strictly increasing (duplicates are merged at
    construction) and exact zero weights are dropped.  ``kind`` is
    ``"probability"`` (nonnegative weights summing to one within
    ``PROB_MASS_TOL``) or ``"signed"``.
    """

    locations: np.ndarray
    weights: np.ndarray
    kind: str = "probability"

    def __post_init__(self) -> None:
        locs = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if locs.ndim != 1 or w.shape != locs.shape:
            raise InputError("locations and weights must be 1-d and congruent")
        if not (np.all(np.isfinite(locs)) and np.all(np.isfinite(w))):
            raise InputError("locations and weights must be finite")
        if locs.size > 1 and not np.all(np.diff(locs) > 0):
            raise InputError("locations must be strictly increasing")
        if self.kind not in ("probability", "signed"):
            raise InputError(f"unknown measure kind {self.kind!r}")
        if self.kind == "probability":
            if w.size == 0:
                raise NotAProbability("a probability measure needs at least one atom")
            if np.any(w < 0):
                raise NotAProbability("probability weights must be nonnegative")
            mass = float(np.sum(w))
            if abs(mass - 1.0) > PROB_MASS_TOL:
                raise NotAProbability(f"total mass {mass!r} is not 1 within {PROB_MASS_TOL}")
        object.__setattr__(self, "locations", _frozen(locs))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def support_size(self) -> int:
        return int(self.locations.size)

    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def mean(self) -> float:
        return float(np.dot(self.locations, self.weights))

    @cached_property
    def step_cdf(self) -> "StepCdf":
        return StepCdf.from_measure(self)

    def cdf(self, x: float) -> float:
        """Mass at locations <= x (right-continuous value)."""
        return self.step_cdf.value(x)

    def cdf_left(self, x: float) -> float:
        """Mass at locations < x (left limit)."""
        return self.step_cdf.left(x)

    def is_probability(self) -> bool:
        return self.kind == "probability"

    def approx_equal(self, other: "DiscreteMeasure", tol: float = 1e-12) -> bool:
        if self.support_size != other.support_size:
            return False
        return bool(
            np.all(self.locations == other.locations)
            and np.all(np.abs(self.weights - other.weights) <= tol)
        )

    def __repr__(self) -> str:
        atoms = ", ".join(f"{x:g}:{w:g}" for x, w in zip(self.locations, self.weights))
        return f"DiscreteMeasure({{{atoms}}}, kind={self.kind})"


@dataclass(frozen=True, eq=False)
class StepCdf:
    """Right-continuous distribution function of a discrete measure.

    ``value(x)`` returns the mass at locations <= x, ``left(x)`` the
    mass at locations < x, and ``inverse(u)`` the generalized inverse
    used for inverse-CDF sampling.
    """

    points: np.ndarray
    cumulative: np.ndarray

    @classmethod
    def from_measure(cls, m: DiscreteMeasure) -> "StepCdf":
        return cls(points=_frozen(m.locations), cumulative=_frozen(np.cumsum(m.weights)))

    @cached_property
    def _padded(self) -> np.ndarray:
        return _frozen(np.concatenate(([0.0], self.cumulative)))

    def value(self, x) -> Union[float, np.ndarray]:
        out = self._padded[np.searchsorted(self.points, x, side="right")]
        return float(out) if np.isscalar(x) else out

    def left(self, x) -> Union[float, np.ndarray]:
        out = self._padded[np.searchsorted(self.points, x, side="left")]
        return float(out) if np.isscalar(x) else out

    def inverse(self, u: np.ndarray) -> np.ndarray:
        """Smallest location with cdf >= u, for u in [0, 1)."""
        idx = np.searchsorted(self.cumulative, u, side="left")
        idx = np.minimum(idx, self.points.size - 1)
        return self.points[idx]


@dataclass(frozen=True, eq=False)
class DensityMeasure:
    """Nonatomic measure with a piecewise-constant density.

    ``breakpoints`` has one more entry than ``densities``; the measure
    of ``[breakpoints[i], breakpoints[i+1]]`` is
    ``densities[i] * (breakpoints[i+1] - breakpoints[i])``.  The
    carrier is the bounded interval ``[breakpoints[0], breakpoints[-1]]``.
    """

    breakpoints: np.ndarray
    densities: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.breakpoints, dtype=float)
        d = np.asarray(self.densities, dtype=float)
        if b.ndim != 1 or b.size < 2 or d.shape != (b.size - 1,):
            raise InputError("need k+1 breakpoints for k densities")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(d))):
            raise InputError("breakpoints and densities must be finite")
        if not np.all(np.diff(b) > 0):
            raise InputError("breakpoints must be strictly increasing")
        if np.any(d < 0):
            raise InputError("densities must be nonnegative")
        object.__setattr__(self, "breakpoints", _frozen(b))
        object.__setattr__(self, "densities", _frozen(d))

    @property
    def carrier(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def total_mass(self) -> float:
        return float(np.dot(self.densities, np.diff(self.breakpoints)))

    def cdf(self, x) -> Union[float, np.ndarray]:
        """Measure of (-inf, x]; continuous and piecewise linear."""
        b, d = self.breakpoints, self.densities
        cum = np.concatenate(([0.0], np.cumsum(d * np.diff(b))))
        xc = np.clip(x, b[0], b[-1])
        idx = np.clip(np.searchsorted(b, xc, side="right") - 1, 0, d.size - 1)
        out = cum[idx] + d[idx] * (xc - b[idx])
        return float(out) if np.isscalar(x) else out

    def refined(self, cuts: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
        """Carrier edges refined by ``cuts``, with per-segment densities."""
        b, d = self.breakpoints, self.densities
        extra = np.asarray([c for c in cuts if b[0] < c < b[-1]], dtype=float)
        edges = np.union1d(b, extra)
        mids = 0.5 * (edges[:-1] + edges[1:])
        idx = np.clip(np.searchsorted(b, mids, side="right") - 1, 0, d.size - 1)
        return edges, d[idx]


def make_discrete(
    pairs: Iterable[tuple[float, float]], kind: str = "probability", renormalize: bool = False
) -> DiscreteMeasure:
    """Build a measure from (location, weight) pairs.

    Pairs are sorted, duplicate locations merged by weight addition,
    and exact zero weights dropped.  Off-by-more-than-1e-12 probability
    masses are an error unless ``renormalize`` is set, in which case the
    weights are scaled to total one.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptySample("no atoms given")
    locs = np.asarray([p[0] for p in pairs], dtype=float)
    w = np.asarray([p[1] for p in pairs], dtype=float)
    if not (np.all(np.isfinite(locs)) and np.all(np.isfinite(w))):
        raise InputError("locations and weights must be finite")
    order = np.argsort(locs, kind="stable")
    locs, w = locs[order], w[order]
    uniq, inverse = np.unique(locs, return_inverse=True)
    merged = np.zeros_like(uniq)
    np.add.at(merged, inverse, w)
    keep = merged != 0.0
    if kind == "probability" and not np.any(keep):
        raise NotAProbability("all weights vanish")
    if np.any(keep):
        uniq, merged = uniq[keep], merged[keep]
    else:  # the zero signed measure keeps a single zero atom
        uniq, merged = uniq[:1], np.zeros(1)
    if renormalize and kind == "probability":
        total = float(np.sum(merged))
        if total <= 0.0 or np.any(merged < 0):
            raise NotAProbability("cannot renormalize nonpositive weights")
        merged = merged / total
    return DiscreteMeasure(uniq, merged, kind=kind)


def dirac(x: float) -> DiscreteMeasure:
    return DiscreteMeasure(np.asarray([float(x)]), np.asarray([1.0]))


def uniform_on(locations: Sequence[float]) -> DiscreteMeasure:
    locs = list(locations)
    if not locs:
        raise EmptySample("no locations given")
    return make_discrete([(x, 1.0 / len(locs)) for x in locs])


def cdf(m: DiscreteMeasure, x: float) -> tuple[float, float]:
    """Right-continuous CDF value and left limit at x."""
    if not m.is_probability():
        raise InputError("cdf expects a probability measure")
    return m.cdf(x), m.cdf_left(x)


def _aligned_weights(locs: np.ndarray, m: DiscreteMeasure) -> np.ndarray:
    w = np.zeros(locs.size)
    w[np.searchsorted(locs, m.locations)] = m.weights
    return w


def mix(x: DiscreteMeasure, y: DiscreteMeasure, t: float) -> DiscreteMeasure:
    """Mixture (1-t)*x + t*y on the union support."""
    if not (0.0 <= t <= 1.0):
        raise BadParameter(f"mixture weight t={t!r} outside [0, 1]")
    if x.kind != y.kind:
        raise InputError("cannot mix measures of different kinds")
    if t == 0.0:
        return x
    if t == 1.0:
        return y
    locs = np.union1d(x.locations, y.locations)
    w = (1.0 - t) * _aligned_weights(locs, x) + t * _aligned_weights(locs, y)
    keep = w != 0.0
    return DiscreteMeasure(locs[keep], w[keep], kind=x.kind)


def empirical(samples: Sequence[float]) -> DiscreteMeasure:
    """Empirical distribution: weight count/n at each distinct sample."""
    if len(samples) == 0:
        raise EmptySample("empirical distribution of an empty sample")
    xs = np.asarray(samples, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise InputError("samples must be finite")
    uniq, counts = np.unique(xs, return_counts=True)
    return DiscreteMeasure(uniq, counts / xs.size)


def kolmogorov_distance(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Sup-norm distance between the two CDFs."""
    pts = np.union1d(a.locations, b.locations)
    return float(np.max(np.abs(a.step_cdf.value(pts) - b.step_cdf.value(pts))))


def total_variation(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    locs = np.union1d(a.locations, b.locations)
    return 0.5 * float(np.sum(np.abs(_aligned_weights(locs, a) - _aligned_weights(locs, b))))


def _sandwich_holds(a: DiscreteMeasure, b: DiscreteMeasure, eps: float) -> bool:
    """F_a(x-eps)-eps <= F_b(x) <= F_a(x+eps)+eps for all real x.

    Both sides are right-continuous step functions of x, so it is
    enough to check the jump points of either side; the atom-anchored
    checks below avoid reconstructing a_i from a_i +/- eps in floating
    point.
    """
    fa, fb = a.step_cdf, b.step_cdf
    bl, al = b.locations, a.locations
    lower = np.all(fb.value(bl) >= fa.value(bl - eps) - eps) and np.all(
        fb.value(al + eps) >= fa.cumulative - eps
    )
    if not lower:
        return False
    return bool(
        np.all(fb.value(bl) <= fa.value(bl + eps) + eps)
        and np.all(fb.value(al - eps) <= fa.cumulative + eps)
    )


def levy_prokhorov(a: DiscreteMeasure, b: DiscreteMeasure, tol: float = 1e-10) -> float:
    """CDF-sandwich distance, computed by bisection on epsilon.

    The sandwich always holds at eps=1, so the distance lies in [0, 1];
    bisection stops when the bracket is narrower than ``tol``.
    """
    lo, hi = 0.0, 1.0
    if _sandwich_holds(a, b, lo):
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _sandwich_holds(a, b, mid):
            hi = mid
        else:
            lo = mid
    return hi


def metric(kind: str, a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Distance between two probability measures.

    ``kind`` is one of ``kolmogorov``, ``total_variation``,
    ``levy_prokhorov``.
    """
    if not (a.is_probability() and b.is_probability()):
        raise InputError("metrics are defined between probability measures")
    if kind == "kolmogorov":
        return kolmogorov_distance(a, b)
    if kind == "total_variation":
        return total_variation(a, b)
    if kind == "levy_prokhorov":
        return levy_prokhorov(a, b)
    raise BadParameter(f"unknown metric kind {kind!r}; expected one of {_METRIC_KINDS}")


def mix_point(x, y, t: float):
    """Mixture (1-t)*x + t*y on any supported convex domain.

    Measures mix on the union support, pairs componentwise, and
    scalars/arrays linearly.  This is the one abstraction the numeric
    derivative engine needs besides point evaluation.
    """
    if isinstance(x, DiscreteMeasure):
        return mix(x, y, t)
    if isinstance(x, tuple):
        if not (isinstance(y, tuple) and len(x) == len(y)):
            raise InputError("cannot mix points of different shapes")
        return tuple(mix_point(xi, yi, t) for xi, yi in zip(x, y))
    if not (0.0 <= t <= 1.0):
        raise BadParameter(f"mixture weight t={t!r} outside [0, 1]")
    return (1.0 - t) * np.asarray(x, dtype=float) + t * np.asarray(y, dtype=float)


# ---------------------------------------------------------------------------
# CSV interchange


def read_samples(path_or_text: Union[str, os.PathLike]) -> list[float]:
    """Read one real per line; '#'-prefixed comment lines are ignored."""
    with open(path_or_text, "r", encoding="utf-8") as fh:
        return parse_samples(fh.read())


def parse_samples(text: str) -> list[float]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(float(line))
        except ValueError as exc:
            raise InputError(f"line {lineno}: not a real number: {line!r}") from exc
    return out


def read_measure_csv(path: Union[str, os.PathLike], kind: str = "probability") -> DiscreteMeasure:
    """Read a two-column CSV with header line ``location,weight``."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_measure_csv(fh.read(), kind=kind)


def parse_measure_csv(text: str, kind: str = "probability") -> DiscreteMeasure:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows or [c.strip() for c in rows[0][:2]] != ["location", "weight"]:
        raise InputError("measure CSV must start with a 'location,weight' header")
    pairs = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise InputError(f"row {lineno}: expected two columns")
        try:
            pairs.append((float(row[0]), float(row[1])))
        except ValueError as exc:
            raise InputError(f"row {lineno}: not numeric: {row!r}") from exc
    return make_discrete(pairs, kind=kind)


def measure_csv(m: DiscreteMeasure) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["location", "weight"])
    for x, w in zip(m.locations, m.weights):
        writer.writerow([repr(float(x)), repr(float(w))])
    return buf.getvalue()


def write_measure_csv(m: DiscreteMeasure, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(measure_csv(m))

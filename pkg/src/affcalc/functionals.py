"""Built-in statistical functionals and their closed-form calculus.

Each functional knows how to evaluate itself at a finite-support
measure and how to differentiate itself along a mixture path toward
another measure.  Influence tables sample that differential against
point masses and normalize it to integrate to zero against the base
measure; the dominance test compares two measures both directly (along
mixtures toward probe measures) and through the sampled gradients.

Evaluation is pure and all spec objects are immutable, so concurrent
use of the same functional from multiple threads is safe.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import BadParameter, DomainMismatch, InputError
from .measures import DensityMeasure, DiscreteMeasure, dirac, mix

MeasurePair = tuple[DiscreteMeasure, DiscreteMeasure]
Point = Union[DiscreteMeasure, MeasurePair]

INFLUENCE_NORM_TOL = 1e-10

#: Named scalar maps usable as moment integrands and max-kernel profiles.
SCALAR_MAPS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda x: x,
    "square": lambda x: x * x,
    "cube": lambda x: x**3,
    "abs": np.abs,
}


def _require_probability(m: DiscreteMeasure, what: str = "measure") -> None:
    if not isinstance(m, DiscreteMeasure) or not m.is_probability():
        raise DomainMismatch(f"{what} must be a probability DiscreteMeasure")


def _require_pair(p: Point, what: str = "point") -> MeasurePair:
    if not (isinstance(p, tuple) and len(p) == 2):
        raise DomainMismatch(f"{what} must be a (measure, measure) pair for this functional")
    _require_probability(p[0], f"{what}[0]")
    _require_probability(p[1], f"{what}[1]")
    return p


# ---------------------------------------------------------------------------
# Kernels for quadratic functionals


@dataclass(frozen=True, eq=False)
class Kernel:
    """Symmetric bounded kernel psi(x, y) on the real line.

    ``psi`` must accept broadcastable arrays.  Symmetry is checked at
    construction on a seeded random grid (tolerance 1e-12) together
    with the bound ``|psi| <= bound``.
    """

    name: str
    psi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bound: float
    validation_lo: float = -10.0
    validation_hi: float = 10.0

    def __post_init__(self) -> None:
        rng = np.random.default_rng(1234)
        xs = rng.uniform(self.validation_lo, self.validation_hi, size=24)
        a = self.psi(xs[:, None], xs[None, :])
        if not np.all(np.isfinite(a)):
            raise InputError(f"kernel {self.name!r} is not finite on the validation grid")
        if float(np.max(np.abs(a - a.T))) > 1e-12:
            raise InputError(f"kernel {self.name!r} is not symmetric")
        if float(np.max(np.abs(a))) > self.bound + 1e-12:
            raise InputError(f"kernel {self.name!r} exceeds its bound {self.bound} on the validation grid")

    def matrix(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return np.asarray(self.psi(np.asarray(xs)[:, None], np.asarray(ys)[None, :]), dtype=float)


def product_kernel(bound: float = 100.0) -> Kernel:
    return Kernel("product", lambda x, y: x * y, bound)


def min_kernel(bound: float = 10.0) -> Kernel:
    return Kernel("min", np.minimum, bound)


def max_of_kernel(f: Callable[[np.ndarray], np.ndarray], name: str = "max_of", bound: float = 10.0) -> Kernel:
    return Kernel(name, lambda x, y: np.maximum(f(np.asarray(x, dtype=float)), f(np.asarray(y, dtype=float))), bound)


def table_kernel(grid: Sequence[float], values: np.ndarray, bound: float | None = None) -> Kernel:
    """Kernel interpolated bilinearly from values on grid x grid.

    Both axes share ``grid``; evaluation outside the grid's bounding
    box raises DomainMismatch.
    """
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if g.ndim != 1 or g.size < 2 or not np.all(np.diff(g) > 0):
        raise InputError("kernel table grid must be strictly increasing with >= 2 points")
    if v.shape != (g.size, g.size):
        raise InputError("kernel table must be square on grid x grid")
    if float(np.max(np.abs(v - v.T))) > 1e-12:
        raise InputError("kernel table is not symmetric")

    def interp(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any(x < g[0]) or np.any(x > g[-1]) or np.any(y < g[0]) or np.any(y > g[-1]):
            raise DomainMismatch("kernel table evaluated outside its grid")
        ix = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
        iy = np.clip(np.searchsorted(g, y, side="right") - 1, 0, g.size - 2)
        tx = (x - g[ix]) / (g[ix + 1] - g[ix])
        ty = (y - g[iy]) / (g[iy + 1] - g[iy])
        return (
            v[ix, iy] * (1 - tx) * (1 - ty)
            + v[ix + 1, iy] * tx * (1 - ty)
            + v[ix, iy + 1] * (1 - tx) * ty
            + v[ix + 1, iy + 1] * tx * ty
        )

    b = float(np.max(np.abs(v))) if bound is None else float(bound)
    return Kernel("table", interp, b, validation_lo=float(g[0]), validation_hi=float(g[-1]))


# ---------------------------------------------------------------------------
# Weight functions for the rank-dependent functional


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Strictly increasing C^1 map [0,1] -> [0,1] with w(0)=0, w(1)=1."""

    name: str
    w: Callable[[np.ndarray], np.ndarray]
    dw: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        grid = np.linspace(0.0, 1.0, 33)
        vals = np.asarray(self.w(grid), dtype=float)
        if abs(vals[0]) > 1e-12 or abs(vals[-1] - 1.0) > 1e-12:
            raise InputError(f"weight {self.name!r} must map 0 to 0 and 1 to 1")
        if not np.all(np.diff(vals) > 0):
            raise InputError(f"weight {self.name!r} is not strictly increasing on the validation grid")
        if not np.all(np.isfinite(self.dw(grid))):
            raise InputError(f"weight {self.name!r} has a non-finite derivative on [0, 1]")


def identity_weight() -> WeightFunction:
    return WeightFunction("identity", lambda p: p, lambda p: np.ones_like(np.asarray(p, dtype=float)))


def power_weight(gamma: float) -> WeightFunction:
    """w(p) = p**gamma; gamma >= 1 keeps the derivative bounded on [0, 1]."""
    if gamma < 1.0:
        raise BadParameter(f"power weight needs gamma >= 1, got {gamma!r}")
    g = float(gamma)
    return WeightFunction(
        f"power{g:g}",
        lambda p: np.asarray(p, dtype=float) ** g,
        lambda p: g * np.asarray(p, dtype=float) ** (g - 1.0),
    )


# ---------------------------------------------------------------------------
# Functional variants


class Functional(ABC):
    """A point-evaluable functional on a convex set of measures."""

    name: str = "functional"

    @abstractmethod
    def value(self, point: Point) -> float:
        """Evaluate the functional."""

    @abstractmethod
    def directional(self, point: Point, direction: Point) -> float:
        """Closed-form derivative along the mixture path toward ``direction``."""

    def __call__(self, point: Point) -> float:
        return self.value(point)


@dataclass(frozen=True, eq=False)
class CdfAt(Functional):
    """T(F) = F(x0)."""

    x0: float
    name: str = field(default="cdf_at", init=False)

    def value(self, m):
        _require_probability(m)
        return m.cdf(self.x0)

    def directional(self, m, d):
        _require_probability(m)
        _require_probability(d, "direction")
        return d.cdf(self.x0) - m.cdf(self.x0)


@dataclass(frozen=True, eq=False)
class Moment(Functional):
    """Linear functional T(mu) = integral of g against mu."""

    g: Callable[[np.ndarray], np.ndarray]
    label: str = "identity"
    name: str = field(default="moment", init=False)

    def value(self, m):
        _require_probability(m)
        return float(np.dot(np.asarray(self.g(m.locations), dtype=float), m.weights))

    def directional(self, m, d):
        _require_probability(d, "direction")
        return self.value(d) - self.value(m)


@dataclass(frozen=True, eq=False)
class Quadratic(Functional):
    """Q(mu) = double integral of psi against mu x mu."""

    kernel: Kernel
    name: str = field(default="quadratic", init=False)

    def bilinear(self, a: DiscreteMeasure, b: DiscreteMeasure) -> float:
        return float(a.weights @ self.kernel.matrix(a.locations, b.locations) @ b.weights)

    def value(self, m):
        _require_probability(m)
        return self.bilinear(m, m)

    def directional(self, m, d):
        _require_probability(m)
        _require_probability(d, "direction")
        return 2.0 * self.bilinear(m, d) - 2.0 * self.bilinear(m, m)

    def gradient_values(self, m: DiscreteMeasure, xs: np.ndarray) -> np.ndarray:
        """2 * integral of psi(x, .) dm, the kernel-smoothed gradient."""
        return 2.0 * (self.kernel.matrix(np.asarray(xs, dtype=float), m.locations) @ m.weights)


@dataclass(frozen=True, eq=False)
class MannWhitney(Functional):
    """Biaffine form B(mu, lam) = integral of F_mu d(lam), on measure pairs.

    Points are (mu, lam) pairs mixed componentwise; the CDF is taken
    right-continuous at atoms of lam (Lebesgue-Stieltjes convention),
    which is a documented limitation at shared discontinuities rather
    than an error.
    """

    name: str = field(default="mann_whitney", init=False)

    @staticmethod
    def bilinear(mu: DiscreteMeasure, lam: DiscreteMeasure) -> float:
        return float(np.dot(mu.step_cdf.value(lam.locations), lam.weights))

    def value(self, point):
        mu, lam = _require_pair(point)
        return self.bilinear(mu, lam)

    def directional(self, point, direction):
        x1, x2 = _require_pair(point)
        y1, y2 = _require_pair(direction, "direction")
        return self.bilinear(x1, y2) + self.bilinear(y1, x2) - 2.0 * self.bilinear(x1, x2)


@dataclass(frozen=True, eq=False)
class Jump(Functional):
    """T(F) = sum over x of (F(x) - F(x-))**alpha, alpha > 1."""

    alpha: float
    name: str = field(default="jump", init=False)

    def __post_init__(self) -> None:
        if not self.alpha > 1.0:
            raise BadParameter(f"jump functional requires alpha > 1, got {self.alpha!r}")

    def value(self, m):
        _require_probability(m)
        return float(np.sum(m.weights**self.alpha))

    def directional(self, m, d):
        _require_probability(m)
        _require_probability(d, "direction")
        # d/dt sum ((1-t) j_m + t j_d)**alpha at t=0+; atoms new in d
        # contribute t**alpha terms whose derivative vanishes for alpha > 1
        idx = np.searchsorted(d.locations, m.locations)
        jd = np.zeros_like(m.weights)
        inside = (idx < d.locations.size) & (np.take(d.locations, idx, mode="clip") == m.locations)
        jd[inside] = d.weights[idx[inside]]
        a = self.alpha
        return float(a * np.sum(m.weights ** (a - 1.0) * jd) - a * self.value(m))


@dataclass(frozen=True, eq=False)
class Prospect(Functional):
    """Rank-dependent utility with separate gain and loss weighting.

    U(mu) = int_{x>=0} w_plus(1 - F_mu(x)) drho(x)
          - int_{x<=0} w_minus(F_mu(x)) drho(x)

    rho is a nonatomic piecewise-constant density on a bounded carrier
    and both integrals are evaluated segment-exactly, so values and
    derivatives carry no quadrature error.
    """

    w_plus: WeightFunction
    w_minus: WeightFunction
    rho: DensityMeasure
    name: str = field(default="prospect", init=False)

    def _check_support(self, m: DiscreteMeasure, what: str) -> None:
        lo, hi = self.rho.carrier
        if m.locations[0] < lo or m.locations[-1] > hi:
            raise DomainMismatch(f"{what} has support outside the carrier [{lo:g}, {hi:g}]")

    def _segments(self, cuts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        edges, dens = self.rho.refined(np.append(cuts, 0.0))
        mids = 0.5 * (edges[:-1] + edges[1:])
        return edges, dens, mids

    def value(self, m):
        _require_probability(m)
        self._check_support(m, "measure")
        edges, dens, mids = self._segments(m.locations)
        lengths = np.diff(edges)
        f = m.step_cdf.value(mids)
        gains = mids >= 0.0
        out = np.sum(self.w_plus.w(1.0 - f[gains]) * dens[gains] * lengths[gains])
        out -= np.sum(self.w_minus.w(f[~gains]) * dens[~gains] * lengths[~gains])
        return float(out)

    def directional(self, m, d):
        _require_probability(m)
        _require_probability(d, "direction")
        self._check_support(m, "measure")
        self._check_support(d, "direction")
        edges, dens, mids = self._segments(np.union1d(m.locations, d.locations))
        lengths = np.diff(edges)
        fm = m.step_cdf.value(mids)
        fd = d.step_cdf.value(mids)
        phi = np.where(mids >= 0.0, self.w_plus.dw(1.0 - fm), self.w_minus.dw(fm))
        return float(np.sum(phi * (fm - fd) * dens * lengths))

    def gradient_values(self, m: DiscreteMeasure, xs: np.ndarray) -> np.ndarray:
        """Cumulative integral of the local weight density up to each x."""
        edges, dens, mids = self._segments(m.locations)
        fm = m.step_cdf.value(mids)
        phi = np.where(mids >= 0.0, self.w_plus.dw(1.0 - fm), self.w_minus.dw(fm))
        cum = np.concatenate(([0.0], np.cumsum(phi * dens * np.diff(edges))))
        xs = np.asarray(xs, dtype=float)
        xc = np.clip(xs, edges[0], edges[-1])
        idx = np.clip(np.searchsorted(edges, xc, side="right") - 1, 0, dens.size - 1)
        return cum[idx] + phi[idx] * dens[idx] * (xc - edges[idx])


def _poly_product_integral(c1: np.ndarray, c2: np.ndarray, ua: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """integral over u in [ua, ub] of (c1 - u) * (c2 - u) du, vectorized."""

    def anti(u):
        return u**3 / 3.0 - 0.5 * (c1 + c2) * u**2 + c1 * c2 * u

    return anti(ub) - anti(ua)


@dataclass(frozen=True, eq=False)
class CramerVonMises(Functional):
    """T(F) = integral of (F - F0)**2 dF0 against a reference distribution.

    F0 may be discrete (the integral is a finite sum at its atoms,
    right-continuous convention) or a piecewise-constant density with
    total mass one (the integral is segment-exact in closed form).
    """

    f0: Union[DiscreteMeasure, DensityMeasure]
    name: str = field(default="cramer_von_mises", init=False)

    def __post_init__(self) -> None:
        if isinstance(self.f0, DensityMeasure):
            if abs(self.f0.total_mass() - 1.0) > 1e-9:
                raise InputError("cramer_von_mises reference density must have total mass 1")
        elif isinstance(self.f0, DiscreteMeasure):
            if not self.f0.is_probability():
                raise InputError("cramer_von_mises reference measure must be a probability")
        else:
            raise InputError("f0 must be a DiscreteMeasure or DensityMeasure")

    def bilinear(self, a: DiscreteMeasure, b: DiscreteMeasure) -> float:
        """integral of (F_a - F0)(F_b - F0) dF0, exactly."""
        if isinstance(self.f0, DiscreteMeasure):
            pts = self.f0.locations
            f0 = self.f0.step_cdf.value(pts)
            return float(
                np.sum((a.step_cdf.value(pts) - f0) * (b.step_cdf.value(pts) - f0) * self.f0.weights)
            )
        cuts = np.union1d(a.locations, b.locations)
        edges, _ = self.f0.refined(cuts)
        mids = 0.5 * (edges[:-1] + edges[1:])
        ua = self.f0.cdf(edges[:-1])
        ub = self.f0.cdf(edges[1:])
        c1 = a.step_cdf.value(mids)
        c2 = b.step_cdf.value(mids)
        return float(np.sum(_poly_product_integral(c1, c2, ua, ub)))

    def value(self, m):
        _require_probability(m)
        return self.bilinear(m, m)

    def directional(self, m, d):
        _require_probability(m)
        _require_probability(d, "direction")
        return 2.0 * self.bilinear(m, d) - 2.0 * self.bilinear(m, m)


@dataclass(frozen=True, eq=False)
class NegAbsLoss(Functional):
    """Section U(s, mu) = -integral of |s - theta| dmu, affine in mu."""

    s: float
    name: str = field(default="neg_abs_loss", init=False)

    def value(self, m):
        _require_probability(m)
        return -float(np.dot(np.abs(self.s - m.locations), m.weights))

    def directional(self, m, d):
        _require_probability(d, "direction")
        return self.value(d) - self.value(m)


@dataclass(frozen=True, eq=False)
class Scaled(Functional):
    """Scalar multiple of another functional (negations, rescalings)."""

    inner: Functional
    factor: float

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"scaled({self.factor:g}*{self.inner.name})"

    def value(self, point):
        return self.factor * self.inner.value(point)

    def directional(self, point, direction):
        return self.factor * self.inner.directional(point, direction)


# ---------------------------------------------------------------------------
# Generic operations


def evaluate(spec: Functional, point: Point) -> float:
    return spec.value(point)


def analytic_directional(spec: Functional, point: Point, direction: Point) -> float:
    """Closed-form mixture-path derivative of ``spec`` at ``point``."""
    return spec.directional(point, direction)


@dataclass(frozen=True, eq=False)
class InfluenceTable:
    """Normalized gradient of a functional sampled on a grid.

    values[i] is the derivative toward a point mass at grid[i], shifted
    by a constant so that it integrates to zero against ``base``.
    """

    grid: np.ndarray
    values: np.ndarray
    base: DiscreteMeasure

    def __post_init__(self) -> None:
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape or g.ndim != 1:
            raise InputError("influence grid and values must be congruent 1-d arrays")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if abs(self.integral_against(self.base)) > INFLUENCE_NORM_TOL:
            raise InputError("influence table failed its zero-mean normalization")

    def at(self, xs) -> np.ndarray:
        idx = np.searchsorted(self.grid, xs)
        found = np.take(self.grid, np.clip(idx, 0, self.grid.size - 1)) == xs
        if not np.all(found):
            raise InputError("point not on the influence grid")
        return self.values[idx]

    def integral_against(self, m: DiscreteMeasure) -> float:
        return float(np.dot(self.at(m.locations), m.weights))


def influence(
    spec: Functional, base: Point, grid: Sequence[float] = ()
) -> Union[InfluenceTable, tuple[InfluenceTable, InfluenceTable]]:
    """Influence function of ``spec`` at ``base`` on a grid.

    The grid is augmented with the support of the base measure so the
    zero-mean shift is an exact sum.  For the biaffine rank form the
    result is a pair of tables, one per slot: the first slot's gradient
    is -F_lam, the second's is F_mu (each normalized against its own
    base); this is the representation valid in the continuous case.
    """
    if isinstance(spec, MannWhitney):
        mu, lam = _require_pair(base)
        g1 = np.union1d(np.asarray(grid, dtype=float), mu.locations)
        g2 = np.union1d(np.asarray(grid, dtype=float), lam.locations)
        first = -lam.step_cdf.value(g1)
        second = mu.step_cdf.value(g2)
        first -= np.dot(first[np.searchsorted(g1, mu.locations)], mu.weights)
        second -= np.dot(second[np.searchsorted(g2, lam.locations)], lam.weights)
        return (InfluenceTable(g1, first, mu), InfluenceTable(g2, second, lam))
    _require_probability(base, "base")
    full = np.union1d(np.asarray(grid, dtype=float), base.locations)
    raw = np.asarray([spec.directional(base, dirac(x)) for x in full])
    shift = float(np.dot(raw[np.searchsorted(full, base.locations)], base.weights))
    return InfluenceTable(full, raw - shift, base)


def dominance_test(
    spec: Functional,
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    probe_measures: Sequence[DiscreteMeasure],
    alpha_grid: Sequence[float],
    tol: float = 1e-10,
) -> tuple[bool, bool]:
    """Sure-comparison test between ``a`` and ``b``.

    ``direct`` checks value dominance along every mixture
    (1-alpha)*probe + alpha*measure; ``local_utility`` checks that
    every probe's normalized gradient ranks ``a`` above ``b``.  The two
    verdicts agree, at grid resolution, exactly when the functional's
    gradients characterize the sure-comparison relation.
    """
    if not probe_measures:
        raise InputError("dominance_test needs at least one probe measure")
    _require_probability(a, "a")
    _require_probability(b, "b")
    direct = True
    for nu in probe_measures:
        for alpha in alpha_grid:
            if spec.value(mix(nu, a, alpha)) < spec.value(mix(nu, b, alpha)) - tol:
                direct = False
                break
        if not direct:
            break
    support = np.union1d(a.locations, b.locations)
    local = True
    for nu in probe_measures:
        table = influence(spec, nu, support)
        if table.integral_against(a) < table.integral_against(b) - tol:
            local = False
            break
    return direct, local


# ---------------------------------------------------------------------------
# Construction from configuration (shared by the API and CLI)


def scalar_map(name: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        return SCALAR_MAPS[name]
    except KeyError:
        raise BadParameter(f"unknown scalar map {name!r}; expected one of {sorted(SCALAR_MAPS)}") from None


def weight_function(name: str, gamma: float = 1.0) -> WeightFunction:
    if name == "identity":
        return identity_weight()
    if name == "power":
        return power_weight(gamma)
    raise BadParameter(f"unknown weight function {name!r}; expected 'identity' or 'power'")


def build_kernel(variant: str, **params) -> Kernel:
    if variant == "product":
        return product_kernel()
    if variant == "min":
        return min_kernel()
    if variant == "max_of":
        fname = params.get("f", "identity")
        return max_of_kernel(scalar_map(fname), name=f"max_of_{fname}")
    if variant == "table":
        return table_kernel(params["grid"], np.asarray(params["values"], dtype=float), params.get("bound"))
    raise BadParameter(f"unknown kernel variant {variant!r}")


def build_functional(variant: str, params: dict) -> Functional:
    """Construct a built-in functional from a flat parameter map."""
    if variant == "cdf_at":
        spec: Functional = CdfAt(float(params["x0"]))
    elif variant == "moment":
        label = params.get("g", "identity")
        spec = Moment(scalar_map(label), label=label)
    elif variant == "quadratic":
        k = params.get("kernel", {"variant": "product"})
        if isinstance(k, Kernel):
            spec = Quadratic(k)
        else:
            spec = Quadratic(build_kernel(k.get("variant", "product"), **{i: k[i] for i in k if i != "variant"}))
    elif variant == "mann_whitney":
        spec = MannWhitney()
    elif variant == "jump":
        spec = Jump(float(params["alpha"]))
    elif variant == "prospect":
        wp = params.get("w_plus", {"name": "identity"})
        wm = params.get("w_minus", {"name": "identity"})
        if not isinstance(wp, WeightFunction):
            wp = weight_function(wp.get("name", "identity"), float(wp.get("gamma", 1.0)))
        if not isinstance(wm, WeightFunction):
            wm = weight_function(wm.get("name", "identity"), float(wm.get("gamma", 1.0)))
        rho = params["rho"]
        if not isinstance(rho, DensityMeasure):
            rho = DensityMeasure(np.asarray(rho["breakpoints"], dtype=float), np.asarray(rho["densities"], dtype=float))
        spec = Prospect(wp, wm, rho)
    elif variant == "cramer_von_mises":
        spec = CramerVonMises(params["f0"])
    elif variant == "neg_abs_loss":
        spec = NegAbsLoss(float(params["s"]))
    else:
        raise BadParameter(f"unknown functional variant {variant!r}")
    scale = float(params.get("scale", 1.0))
    return spec if scale == 1.0 else Scaled(spec, scale)

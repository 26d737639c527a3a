"""Shared helpers: seeded random measures and the built-in spec zoo."""

from __future__ import annotations

import numpy as np
import pytest

from affcalc import functionals as F
from affcalc import measures as M


def random_measure(rng, max_support=8, lo=0.0, hi=1.0, grid=None):
    """Random probability measure with support size <= max_support."""
    k = int(rng.integers(1, max_support + 1))
    if grid is not None:
        locs = rng.choice(np.asarray(grid, dtype=float), size=min(k, len(grid)), replace=False)
    else:
        locs = rng.uniform(lo, hi, size=k)
    w = rng.dirichlet(np.ones(locs.size))
    return M.make_discrete(zip(locs.tolist(), (w / w.sum()).tolist()))


def random_pair(rng, **kw):
    return random_measure(rng, **kw), random_measure(rng, **kw)


def lebesgue_density(lo=-1.0, hi=1.0):
    return M.DensityMeasure(np.array([lo, hi]), np.array([1.0]))


def uniform_density(lo=0.0, hi=1.0):
    """Probability density: constant 1/(hi-lo) on [lo, hi]."""
    return M.DensityMeasure(np.array([lo, hi]), np.array([1.0 / (hi - lo)]))


def builtin_specs():
    """One representative instance per built-in variant.

    Returns (name, spec, lo, hi) with the support window random test
    measures must stay inside.
    """
    return [
        ("cdf_at", F.CdfAt(0.4), 0.0, 1.0),
        ("moment", F.Moment(F.SCALAR_MAPS["identity"]), 0.0, 1.0),
        ("quadratic", F.Quadratic(F.product_kernel()), 0.0, 1.0),
        ("mann_whitney", F.MannWhitney(), 0.0, 1.0),
        ("jump", F.Jump(2.0), 0.0, 1.0),
        (
            "prospect",
            F.Prospect(F.power_weight(2.0), F.power_weight(3.0), lebesgue_density(-1.0, 1.0)),
            -1.0,
            1.0,
        ),
        ("cramer_von_mises", F.CramerVonMises(uniform_density(0.0, 1.0)), 0.0, 1.0),
        ("neg_abs_loss", F.NegAbsLoss(0.25), 0.0, 1.0),
    ]


def random_point(rng, name, lo, hi, max_support=8):
    if name == "mann_whitney":
        return random_pair(rng, max_support=max_support, lo=lo, hi=hi)
    return random_measure(rng, max_support=max_support, lo=lo, hi=hi)


@pytest.fixture(scope="session")
def spec_zoo():
    return builtin_specs()

"""Directional calculus for functionals of probability distributions.

Core objects: finite-support measures and mixture paths (``measures``),
built-in statistical functionals with closed-form derivatives and
influence tables (``functionals``), a finite-difference engine with
shape probes (``derivcheck``), envelope derivatives and the median-loss
machinery (``envelope``), Bayesian robustness ranges (``bayes``), and
influence-based asymptotics (``asymptotics``).  The FastAPI service in
``affcalc.api`` exposes every operation over HTTP; ``affcalc.cli`` is a
thin client for it.
"""

from . import asymptotics, bayes, derivcheck, envelope, functionals, measures
from .errors import (
    AffcalcError,
    BadParameter,
    DegenerateVariance,
    DomainMismatch,
    EmptySample,
    EvaluationFailure,
    InputError,
    NoBracket,
    NoConvergence,
    NonFiniteDerivative,
    NotAProbability,
    NotViable,
    NumericError,
    ZeroMarginal,
)
from .measures import DensityMeasure, DiscreteMeasure, StepCdf, dirac, empirical, make_discrete, mix, uniform_on

__all__ = [
    "AffcalcError",
    "BadParameter",
    "DegenerateVariance",
    "DensityMeasure",
    "DiscreteMeasure",
    "DomainMismatch",
    "EmptySample",
    "EvaluationFailure",
    "InputError",
    "NoBracket",
    "NoConvergence",
    "NonFiniteDerivative",
    "NotAProbability",
    "NotViable",
    "NumericError",
    "StepCdf",
    "ZeroMarginal",
    "asymptotics",
    "bayes",
    "derivcheck",
    "dirac",
    "empirical",
    "envelope",
    "functionals",
    "make_discrete",
    "measures",
    "mix",
    "uniform_on",
]

__version__ = "0.1.0"

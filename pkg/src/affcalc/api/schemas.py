"""Pydantic wire models for the affcalc service.

Request models know how to build the core objects they describe;
response models are flat records assembled from core results.  The CLI
reuses these shapes verbatim, so the JSON bodies double as the file
formats of its reports.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from .. import functionals as F
from ..measures import DensityMeasure, DiscreteMeasure, make_discrete


class MeasureModel(BaseModel):
    atoms: list[tuple[float, float]] = Field(min_length=1)
    kind: Literal["probability", "signed"] = "probability"

    def build(self) -> DiscreteMeasure:
        return make_discrete(self.atoms, kind=self.kind)

    @classmethod
    def from_measure(cls, m: DiscreteMeasure) -> "MeasureModel":
        return cls(atoms=[(float(x), float(w)) for x, w in zip(m.locations, m.weights)], kind=m.kind)


class DensityModel(BaseModel):
    breakpoints: list[float] = Field(min_length=2)
    densities: list[float] = Field(min_length=1)

    def build(self) -> DensityMeasure:
        return DensityMeasure(np.asarray(self.breakpoints), np.asarray(self.densities))


class WeightModel(BaseModel):
    name: Literal["identity", "power"] = "identity"
    gamma: float = 1.0

    def build(self) -> F.WeightFunction:
        return F.weight_function(self.name, self.gamma)


class KernelModel(BaseModel):
    variant: Literal["product", "min", "max_of", "table"] = "product"
    f: str = "identity"
    grid: Optional[list[float]] = None
    values: Optional[list[list[float]]] = None
    bound: Optional[float] = None

    def build(self) -> F.Kernel:
        if self.variant == "table":
            if self.grid is None or self.values is None:
                raise F.InputError("table kernel needs grid and values")
            return F.table_kernel(self.grid, np.asarray(self.values), self.bound)
        return F.build_kernel(self.variant, f=self.f)


class FunctionalModel(BaseModel):
    variant: Literal[
        "cdf_at",
        "moment",
        "quadratic",
        "mann_whitney",
        "jump",
        "prospect",
        "cramer_von_mises",
        "neg_abs_loss",
    ]
    x0: Optional[float] = None
    g: str = "identity"
    kernel: Optional[KernelModel] = None
    alpha: Optional[float] = None
    w_plus: Optional[WeightModel] = None
    w_minus: Optional[WeightModel] = None
    rho: Optional[DensityModel] = None
    f0: Optional[MeasureModel] = None
    f0_density: Optional[DensityModel] = None
    s: Optional[float] = None
    scale: float = 1.0

    def build(self) -> F.Functional:
        params: dict = {"scale": self.scale, "g": self.g}
        if self.x0 is not None:
            params["x0"] = self.x0
        if self.alpha is not None:
            params["alpha"] = self.alpha
        if self.s is not None:
            params["s"] = self.s
        if self.kernel is not None:
            params["kernel"] = self.kernel.build()
        if self.w_plus is not None:
            params["w_plus"] = self.w_plus.build()
        if self.w_minus is not None:
            params["w_minus"] = self.w_minus.build()
        if self.rho is not None:
            params["rho"] = self.rho.build()
        if self.f0 is not None:
            params["f0"] = self.f0.build()
        elif self.f0_density is not None:
            params["f0"] = self.f0_density.build()
        try:
            return F.build_functional(self.variant, params)
        except KeyError as exc:
            raise F.InputError(f"functional {self.variant!r} is missing parameter {exc}") from exc


class LikelihoodModel(BaseModel):
    parameters: list[float]
    observations: list[str]
    probabilities: list[list[float]]

    def build(self):
        from ..bayes import LikelihoodTable

        return LikelihoodTable(
            np.asarray(self.parameters), tuple(self.observations), np.asarray(self.probabilities)
        )


# --- requests ---------------------------------------------------------------


class EvalRequest(BaseModel):
    functional: FunctionalModel
    measure: MeasureModel
    second_measure: Optional[MeasureModel] = None


class DerivRequest(BaseModel):
    functional: FunctionalModel
    at: MeasureModel
    direction: MeasureModel
    at_second: Optional[MeasureModel] = None
    direction_second: Optional[MeasureModel] = None
    t_min: float = 2.0**-15
    ladder: int = 12
    tol: float = 1e-7


class InfluenceRequest(BaseModel):
    functional: FunctionalModel
    measure: MeasureModel
    second_measure: Optional[MeasureModel] = None
    grid: list[float] = Field(default_factory=list)


class ProbeRequest(BaseModel):
    functional: FunctionalModel
    property: Literal["convex", "quasiconvex", "pseudoconvex", "monotone_derivative"]
    pairs: list[tuple[MeasureModel, MeasureModel]] = Field(min_length=1)
    tol: float = 1e-10
    tol_strict: float = 1e-12


class EnvelopeRequest(BaseModel):
    fixture: Literal["counterexample_danskin", "absolute_loss"]
    x: Optional[float] = None
    y: Optional[float] = None
    mu: Optional[MeasureModel] = None
    nu: Optional[MeasureModel] = None
    agree_tol: float = 1e-4


class RangeRequest(BaseModel):
    functional: FunctionalModel
    generators: list[MeasureModel] = Field(min_length=1)
    likelihood: LikelihoodModel
    observation: str
    max_iters: int = 500
    cert_tol: float = 1e-8


class PosteriorLossRequest(BaseModel):
    prior: MeasureModel
    direction: Optional[MeasureModel] = None
    loss: Literal["absolute"] = "absolute"


class CltRequest(BaseModel):
    functional: FunctionalModel
    measure: MeasureModel
    n: int
    replications: int
    seed: int = 0


class RemainderRequest(BaseModel):
    functional: FunctionalModel
    base: MeasureModel
    metric: Literal["kolmogorov", "total_variation", "levy_prokhorov"]
    path: list[MeasureModel] = Field(min_length=1)
    base_path: Optional[list[MeasureModel]] = None


# --- responses --------------------------------------------------------------


class EvalResponse(BaseModel):
    value: float


class DerivResponse(BaseModel):
    analytic: float
    estimate: float
    verdict: str
    extrapolated_error: float
    step_ladder: list[tuple[float, float]]
    abs_error: float
    agree: bool


class InfluenceTableModel(BaseModel):
    slot: str
    grid: list[float]
    values: list[float]


class InfluenceResponse(BaseModel):
    tables: list[InfluenceTableModel]


class WitnessModel(BaseModel):
    x: MeasureModel
    y: MeasureModel
    values: list[float]


class ProbeResponse(BaseModel):
    property: str
    holds: bool
    witness: Optional[WitnessModel] = None


class EnvelopeResponse(BaseModel):
    value: float
    solutions: list[float]
    solution_interval: Optional[tuple[float, float]] = None
    formula: float
    fd: float
    agree: bool
    fd_verdict: str
    note: str


class RangeResponse(BaseModel):
    lo: float
    hi: float
    lo_cert: float
    hi_cert: float
    lo_prior: MeasureModel
    hi_prior: MeasureModel
    iterations: int
    converged: bool


class PosteriorLossResponse(BaseModel):
    loss: float
    derivative: Optional[float] = None


class CltResponse(BaseModel):
    n: int
    replications: int
    seed: int
    sigma2_analytic: float
    stat_mean: float
    stat_variance: float
    ks_distance: float


class RemainderResponse(BaseModel):
    metric: str
    samples: list[tuple[float, float]]
    fitted_slope: Optional[float]
    limit_ratio: Optional[float]


class ErrorBody(BaseModel):
    error: str
    detail: str

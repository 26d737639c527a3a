"""FastAPI service exposing the affcalc operations.

One POST endpoint per operation, mirroring the CLI subcommands.  Input
problems surface as HTTP 422 and numeric failures as HTTP 409, both
with an ``{"error": <name>, "detail": <message>}`` body, so thin
clients can map them to exit codes without parsing prose.

Run it with ``uvicorn affcalc.api.app:app``; the CLI embeds the same
app in process by default.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import asymptotics, bayes, derivcheck, envelope, functionals
from ..errors import InputError, NumericError
from . import schemas as S

API_VERSION = "0.1.0"


def _point(measure: S.MeasureModel, second: S.MeasureModel | None, spec: functionals.Functional):
    m = measure.build()
    if isinstance(spec, functionals.MannWhitney):
        if second is None:
            raise InputError("this functional works on measure pairs; provide the second measure")
        return (m, second.build())
    if second is not None:
        raise InputError("second measure given for a single-measure functional")
    return m


def create_app() -> FastAPI:
    app = FastAPI(title="affcalc", version=API_VERSION)

    @app.exception_handler(InputError)
    async def _input_error(_: Request, exc: InputError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"error": type(exc).__name__, "detail": str(exc)})

    @app.exception_handler(NumericError)
    async def _numeric_error(_: Request, exc: NumericError) -> JSONResponse:
        return JSONResponse(status_code=409, content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": API_VERSION}

    @app.post("/eval", response_model=S.EvalResponse)
    def eval_endpoint(req: S.EvalRequest) -> S.EvalResponse:
        spec = req.functional.build()
        point = _point(req.measure, req.second_measure, spec)
        return S.EvalResponse(value=spec.value(point))

    @app.post("/deriv", response_model=S.DerivResponse)
    def deriv_endpoint(req: S.DerivRequest) -> S.DerivResponse:
        spec = req.functional.build()
        x = _point(req.at, req.at_second, spec)
        y = _point(req.direction, req.direction_second, spec)
        analytic = spec.directional(x, y)
        rep = derivcheck.numeric_directional(spec, x, y, t_min=req.t_min, ladder=req.ladder, tol=req.tol)
        abs_err = abs(rep.estimate - analytic)
        return S.DerivResponse(
            analytic=analytic,
            estimate=rep.estimate,
            verdict=rep.verdict,
            extrapolated_error=rep.extrapolated_error,
            step_ladder=list(rep.step_ladder),
            abs_error=abs_err,
            agree=abs_err <= 1e-6 * (1.0 + abs(analytic)),
        )

    @app.post("/influence", response_model=S.InfluenceResponse)
    def influence_endpoint(req: S.InfluenceRequest) -> S.InfluenceResponse:
        spec = req.functional.build()
        point = _point(req.measure, req.second_measure, spec)
        result = functionals.influence(spec, point, req.grid)
        if isinstance(result, tuple):
            tables = [
                S.InfluenceTableModel(slot="first", grid=result[0].grid.tolist(), values=result[0].values.tolist()),
                S.InfluenceTableModel(slot="second", grid=result[1].grid.tolist(), values=result[1].values.tolist()),
            ]
        else:
            tables = [S.InfluenceTableModel(slot="base", grid=result.grid.tolist(), values=result.values.tolist())]
        return S.InfluenceResponse(tables=tables)

    @app.post("/probe", response_model=S.ProbeResponse)
    def probe_endpoint(req: S.ProbeRequest) -> S.ProbeResponse:
        spec = req.functional.build()
        if isinstance(spec, functionals.MannWhitney):
            raise InputError("shape probes apply to single-measure functionals")
        pairs = [(a.build(), b.build()) for a, b in req.pairs]
        rep = derivcheck.shape_probe(spec, req.property, pairs, tol=req.tol, tol_strict=req.tol_strict)
        witness = None
        if rep.witness is not None:
            wx, wy, vals = rep.witness
            witness = S.WitnessModel(
                x=S.MeasureModel.from_measure(wx),
                y=S.MeasureModel.from_measure(wy),
                values=[float(v) for v in vals],
            )
        return S.ProbeResponse(property=rep.property, holds=rep.holds, witness=witness)

    @app.post("/envelope", response_model=S.EnvelopeResponse)
    def envelope_endpoint(req: S.EnvelopeRequest) -> S.EnvelopeResponse:
        problem = envelope.FIXTURES[req.fixture]()
        if req.fixture == "counterexample_danskin":
            if req.x is None or req.y is None:
                raise InputError("the counterexample fixture needs scalar --x and --y")
            x, y = float(req.x), float(req.y)
        else:
            if req.mu is None or req.nu is None:
                raise InputError("the absolute_loss fixture needs measures mu and nu")
            x, y = req.mu.build(), req.nu.build()
        value, sols = envelope.value_and_solutions(problem, x)
        rep = envelope.danskin_derivative(problem, x, y, agree_tol=req.agree_tol)
        interval = None
        if isinstance(sols, envelope.MedianInterval):
            interval = (sols.lo, sols.hi)
            sol_list = [sols.lo, sols.hi]
        else:
            sol_list = [float(s) for s in sols]
        note = (
            "formula and finite differences agree"
            if rep.agree
            else "mismatch: envelope-equality hypothesis fails here, or the fd estimate is noisy"
        )
        return S.EnvelopeResponse(
            value=value,
            solutions=sol_list,
            solution_interval=interval,
            formula=rep.formula_value,
            fd=rep.fd_value,
            agree=rep.agree,
            fd_verdict=rep.fd_verdict,
            note=note,
        )

    @app.post("/robust-range", response_model=S.RangeResponse)
    def range_endpoint(req: S.RangeRequest) -> S.RangeResponse:
        spec = req.functional.build()
        cls = bayes.PriorClass(tuple(g.build() for g in req.generators))
        rep = bayes.posterior_functional_range(
            cls, spec, req.likelihood.build(), req.observation, max_iters=req.max_iters, cert_tol=req.cert_tol
        )
        return S.RangeResponse(
            lo=rep.lo,
            hi=rep.hi,
            lo_cert=rep.lo_cert,
            hi_cert=rep.hi_cert,
            lo_prior=S.MeasureModel.from_measure(rep.lo_prior),
            hi_prior=S.MeasureModel.from_measure(rep.hi_prior),
            iterations=rep.iterations,
            converged=rep.converged,
        )

    @app.post("/posterior-loss", response_model=S.PosteriorLossResponse)
    def posterior_loss_endpoint(req: S.PosteriorLossRequest) -> S.PosteriorLossResponse:
        prior = req.prior.build()
        loss = bayes.posterior_loss(prior, loss=req.loss)
        deriv = None
        if req.direction is not None:
            deriv = bayes.posterior_loss_derivative(prior, req.direction.build())
        return S.PosteriorLossResponse(loss=loss, derivative=deriv)

    @app.post("/clt", response_model=S.CltResponse)
    def clt_endpoint(req: S.CltRequest) -> S.CltResponse:
        spec = req.functional.build()
        rep = asymptotics.clt_experiment(spec, req.measure.build(), req.n, req.replications, req.seed)
        return S.CltResponse(
            n=rep.n,
            replications=rep.replications,
            seed=rep.seed,
            sigma2_analytic=rep.sigma2_analytic,
            stat_mean=rep.stat_mean,
            stat_variance=rep.stat_variance,
            ks_distance=rep.ks_distance,
        )

    @app.post("/remainder", response_model=S.RemainderResponse)
    def remainder_endpoint(req: S.RemainderRequest) -> S.RemainderResponse:
        spec = req.functional.build()
        base = req.base.build()
        path = [m.build() for m in req.path]
        base_path = [m.build() for m in req.base_path] if req.base_path is not None else None
        rep = asymptotics.remainder_probe(spec, base, req.metric, path, base_path=base_path)
        slope = None if math.isnan(rep.fitted_slope) else rep.fitted_slope
        return S.RemainderResponse(
            metric=rep.metric_kind,
            samples=list(rep.samples),
            fitted_slope=slope,
            limit_ratio=rep.limit_ratio,
        )

    return app


app = create_app()

"""HTTP service wrapping the simulator: classification, decoding, complexity
and BER experiments as request/response endpoints.

The CLI is a thin client of this app (in process by default); run it
standalone with `stcsim serve` or any ASGI server.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import experiments as ex
from ..codes import CodeError, alamouti, blast, dsttd, golden, jabba_seed, \
    library_names, ostbc_half_rate_5tx, resolve_code
from ..constructions import ConstructionError, search_coefficients
from ..structure import StructureError
from . import schemas as S

app = FastAPI(
    title="stcsim",
    description="Space-time code structure classification and QRDM "
                "decoding-complexity simulation service.",
    version="0.1.0",
)


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


def _resolve_or_404(ref: str):
    try:
        return resolve_code(ref)
    except CodeError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc


def _config(req: S.ExperimentRequest) -> ex.ExperimentConfig:
    try:
        return ex.ExperimentConfig(
            code=req.code, nr=req.nr, m=req.mod, decoder=req.decoder,
            mc=tuple(req.mc), snr_db=tuple(req.snr_db), trials=req.trials,
            seed=req.seed, max_errors=req.max_errors, noiseless=req.noiseless,
        )
    except ex.ExperimentError as exc:
        raise _bad_request(exc) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/codes", response_model=S.CodesResponse)
def codes() -> S.CodesResponse:
    details = []
    for factory in (alamouti, lambda: blast(2), lambda: blast(4), dsttd,
                    golden, jabba_seed, ostbc_half_rate_5tx):
        c = factory()
        details.append(S.CodeInfo(name=c.name, T=c.t, Nt=c.nt, L=c.l, rate=c.rate))
    return S.CodesResponse(names=library_names(), details=details)


@app.post("/classify", response_model=S.ClassifyResponse)
def classify(req: S.ClassifyRequest) -> S.ClassifyResponse:
    for ref in req.codes:
        _resolve_or_404(ref)
    try:
        results = ex.run_classification(req.codes, nr=req.nr, n_draws=req.draws,
                                        tol=req.tol, seed=req.seed)
    except (StructureError, CodeError, ConstructionError) as exc:
        raise _bad_request(exc) from exc
    return S.ClassifyResponse(results=results)


@app.post("/decode", response_model=S.DecodeResponse)
def decode(req: S.DecodeRequest) -> S.DecodeResponse:
    _resolve_or_404(req.code)
    try:
        return S.DecodeResponse(**ex.run_decode_demo(_config(req)))
    except ex.ExperimentError as exc:
        raise _bad_request(exc) from exc


@app.post("/ber-sweep", response_model=S.BerSweepResponse)
def ber_sweep(req: S.BerSweepRequest) -> S.BerSweepResponse:
    _resolve_or_404(req.code)
    try:
        records = ex.run_ber_sweep(_config(req), points=req.points)
    except ex.ExperimentError as exc:
        raise _bad_request(exc) from exc
    return S.BerSweepResponse(records=[r.as_dict() for r in records])


@app.post("/mceq-stats", response_model=S.McEqStatsResponse)
def mceq_stats(req: S.ExperimentRequest) -> S.McEqStatsResponse:
    _resolve_or_404(req.code)
    try:
        return S.McEqStatsResponse(**ex.run_mceq_stats(_config(req)))
    except ex.ExperimentError as exc:
        raise _bad_request(exc) from exc


@app.post("/complexity", response_model=S.ComplexityResponse)
def complexity(req: S.ExperimentRequest) -> S.ComplexityResponse:
    _resolve_or_404(req.code)
    try:
        rows = ex.run_complexity_comparison(_config(req))
    except ex.ExperimentError as exc:
        raise _bad_request(exc) from exc
    return S.ComplexityResponse(code=req.code, rows=rows)


@app.post("/ber-vs-complexity", response_model=S.BerVsComplexityResponse)
def ber_vs_complexity(req: S.BerVsComplexityRequest) -> S.BerVsComplexityResponse:
    _resolve_or_404(req.code)
    try:
        out = ex.run_ber_vs_complexity(_config(req),
                                       saturation_factor=req.saturation_factor)
    except ex.ExperimentError as exc:
        raise _bad_request(exc) from exc
    series = {repr(float(k)): v for k, v in out["series"].items()}
    return S.BerVsComplexityResponse(code=out["code"], decoder=out["decoder"],
                                     series=series)


@app.post("/search-coeffs", response_model=S.SearchCoeffsResponse)
def search_coeffs(req: S.SearchCoeffsRequest) -> S.SearchCoeffsResponse:
    thetas = req.thetas
    if thetas is None:
        thetas = list(np.arange(req.start, req.stop, req.step))
    from ..codes import Constellation

    try:
        report = search_coefficients(thetas, Constellation.pam(req.mod),
                                     max_vectors=req.max_vectors,
                                     classify=req.classify, seed=req.seed)
    except ConstructionError as exc:
        raise _bad_request(exc) from exc
    return S.SearchCoeffsResponse(
        points=[S.SearchPointModel(theta=p.theta, min_det=p.min_det,
                                   profile=p.profile) for p in report.points],
        best_theta=report.best_theta,
        best_min_det=report.best_min_det,
    )

"""FastAPI app wiring: routes, error mapping, and the app factory."""

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import (
    DatasetFormatError,
    InvalidArgumentError,
    NumericalFailureError,
)
from . import handlers
from . import schemas as S


def create_app() -> FastAPI:
    app = FastAPI(
        title="wsrbeam",
        version=__version__,
        description="Weighted sum-rate beamforming: dataset generation, classic "
                    "solvers, an unfolded learned solver, and benchmark sweeps.",
    )

    @app.exception_handler(InvalidArgumentError)
    async def _invalid(request, exc):
        return JSONResponse(status_code=422, content={"error": "invalid-argument",
                                                      "detail": str(exc)})

    @app.exception_handler(DatasetFormatError)
    async def _format(request, exc):
        return JSONResponse(status_code=422, content={"error": "format",
                                                      "detail": str(exc),
                                                      "record_index": exc.record_index})

    @app.exception_handler(NumericalFailureError)
    async def _numerical(request, exc):
        return JSONResponse(status_code=500, content={"error": "numerical-failure",
                                                      "detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def _missing(request, exc):
        return JSONResponse(status_code=404, content={"error": "io", "detail": str(exc)})

    @app.get("/health", response_model=S.HealthResponse)
    def health():
        return handlers.health()

    @app.post("/datasets/generate", response_model=S.GenResponse)
    def gen(req: S.GenRequest):
        return handlers.gen(req)

    @app.post("/solve", response_model=S.SolveResponse)
    def solve(req: S.SolveRequest):
        return handlers.solve(req)

    @app.post("/train", response_model=S.TrainResponse)
    def train(req: S.TrainRequest):
        return handlers.train(req)

    @app.post("/eval", response_model=S.EvalResponse)
    def evaluate(req: S.EvalRequest):
        return handlers.evaluate(req)

    @app.post("/sweep", response_model=S.SweepResponse)
    def sweep(req: S.SweepRequest):
        return handlers.sweep(req)

    @app.post("/beamform", response_model=S.BeamformResponse)
    def beamform(req: S.BeamformRequest):
        return handlers.beamform(req)

    return app


app = create_app()

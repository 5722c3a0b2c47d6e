"""HTTP front end over :mod:`votemander.service.handlers`."""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from . import handlers, schemas
from .handlers import ServiceError

app = FastAPI(title="votemander", version=__version__)


@app.exception_handler(ServiceError)
async def _bad_input(request: Request, exc: ServiceError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/generate")
def generate(req: schemas.GenerateRequest):
    return handlers.generate(req)


@app.post("/sample")
def sample(req: schemas.SampleRequest):
    return handlers.sample(req)


@app.post("/score")
def score(req: schemas.ScoreRequest):
    return handlers.score(req)


@app.post("/fairness-step")
def fairness_step(req: schemas.FairnessStepRequest):
    return handlers.fairness_step(req)


@app.post("/votemander")
def votemander(req: schemas.VotemanderRequest):
    return handlers.run_votemander(req)


@app.post("/local")
def local(req: schemas.LocalRequest):
    return handlers.local(req)


@app.post("/sweep")
def sweep(req: schemas.SweepRequest):
    return handlers.sweep(req)


@app.post("/ingest")
def ingest(req: schemas.IngestRequest):
    return handlers.ingest(req)

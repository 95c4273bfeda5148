import os
from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

# Load environment variables from .env file
load_dotenv()

from models import (
    ALL_METRICS,
    CONTROL_METRICS,
    CheckCaseRequest,
    CheckCaseResponse,
    CorpusReport,
    EvaluateRequest,
    MetricInfo,
    MetricListResponse,
    ValidateRequest,
    ValidationSummary,
)
from cases import check_case
from errors import CaseError, ConfigError, PrebenchError
from graph import evaluate_corpus
from perceptual import BACKENDS, EXTERNAL_EXE_ENV
from validation import validation_table


# Create FastAPI app
app = FastAPI(
    title="PREBench API",
    description="Region-aware evaluation of 4D video edits",
    version="1.0.0"
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=False,
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)


def _http_error(e: PrebenchError) -> HTTPException:
    """Configuration problems are the caller's fault (400), bad cases are unprocessable (422)."""
    if isinstance(e, ConfigError):
        return HTTPException(status_code=400, detail=str(e))
    if isinstance(e, CaseError):
        return HTTPException(status_code=422, detail=str(e))
    return HTTPException(status_code=500, detail=str(e))


# ========== Evaluation Endpoints ==========

@app.post("/evaluate", response_model=CorpusReport, tags=["Evaluation"])
def evaluate(request: EvaluateRequest):
    """
    Evaluate case directories on the server's filesystem.
    Failing cases are reported per case; the corpus still completes.
    """
    try:
        return evaluate_corpus(request.case_paths, request.config)
    except PrebenchError as e:
        raise _http_error(e)


@app.post("/check-case", response_model=CheckCaseResponse, tags=["Evaluation"])
def check(request: CheckCaseRequest):
    """Structural validation of one case directory."""
    try:
        return check_case(request.path)
    except PrebenchError as e:
        raise _http_error(e)


# ========== Validation Endpoints ==========

@app.post("/validate", response_model=ValidationSummary, tags=["Validation"])
async def validate(request: ValidateRequest):
    """Agreement and Spearman correlation of metrics against human votes."""
    try:
        return validation_table(request.pairs, request.top_gap_fraction)
    except PrebenchError as e:
        raise HTTPException(status_code=400, detail=str(e))


# ========== Catalog Endpoints ==========

@app.get("/metrics", response_model=MetricListResponse, tags=["Catalog"])
async def list_metrics():
    """List every reported metric. Lower is better for all of them."""
    metrics = [
        MetricInfo(name=m.value, family="control" if m in CONTROL_METRICS else "region")
        for m in ALL_METRICS
    ]
    return MetricListResponse(metrics=metrics, count=len(metrics))


@app.get("/backends", tags=["Catalog"])
async def list_backends():
    """Available perceptual backends."""
    return {"backends": sorted(BACKENDS), "external_configured": bool(os.getenv(EXTERNAL_EXE_ENV))}


# ========== Health Check ==========

@app.get("/health", tags=["System"])
async def health_check():
    """Check if the API is running."""
    return {"status": "healthy"}


# Run with: uvicorn main:app --reload
if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)

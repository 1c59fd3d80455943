import os
import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from api.routes import router
from app import __version__
from app.config import configure_logging, get_reports_dir

configure_logging()

# Create FastAPI app
app = FastAPI(
    title="Ensemble Convergence API",
    description="Bootstrap estimates of the algorithmic variance of randomized ensembles",
    version=__version__,
    docs_url="/docs",
    redoc_url="/redoc"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(router, prefix="/api")


@app.get("/")
async def root():
    """API root endpoint with available endpoints"""
    return {
        "message": "Ensemble Convergence API",
        "version": __version__,
        "endpoints": {
            "estimate": {
                "url": "/api/estimate",
                "method": "POST",
                "description": "Bootstrap estimate of sigma_t from uploaded prediction files"
            },
            "extrapolate": {
                "url": "/api/extrapolate",
                "method": "POST",
                "description": "Extrapolate sigma to a larger ensemble or find the minimum size"
            },
            "validate_predictions": {
                "url": "/api/validate-predictions",
                "method": "POST",
                "description": "Validate prediction-array, truth and mask files"
            },
            "reports": {
                "url": "/api/reports",
                "method": "GET",
                "description": "List stored reports"
            },
            "report": {
                "url": "/api/reports/{filename}",
                "method": "GET",
                "description": "Get a stored report"
            }
        },
        "documentation": {
            "swagger": "/docs",
            "redoc": "/redoc"
        }
    }


@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {"status": "healthy", "service": "Ensemble Convergence API", "version": __version__}


if __name__ == "__main__":
    os.makedirs("storage/uploads", exist_ok=True)
    os.makedirs(get_reports_dir(), exist_ok=True)

    uvicorn.run(
        "main:app",
        host="0.0.0.0",
        port=int(os.getenv("PORT", "8000")),
        reload=True,
        log_level="info"
    )

import json
import logging
import os
from typing import Optional

from fastapi import APIRouter, File, Form, HTTPException, UploadFile

from app.analyzer import ConvergenceAnalyzer
from app.config import DEFAULT_B, DEFAULT_T0, get_reports_dir, get_threads
from app.ensemble import HOLDOUT
from app.errors import DimensionError, EnsconvError, ParseError
from app.parser import PredictionFileParser
from app.report_store import ReportStore
from app.utils import dumps_json, save_uploaded_file, validate_file_upload

logger = logging.getLogger(__name__)

router = APIRouter()

UPLOAD_DIR = os.getenv("ENSCONV_UPLOAD_DIR", "storage/uploads")
ALLOWED_EXTENSIONS = ['.txt', '.dat', '.pred', '.mask', '.truth']

prediction_parser = PredictionFileParser()

# Created on first use
analyzer = None
report_store = None


def get_analyzer() -> ConvergenceAnalyzer:
    """Get or create the analyzer instance"""
    global analyzer
    if analyzer is None:
        analyzer = ConvergenceAnalyzer(threads=get_threads())
    return analyzer


def get_report_store() -> ReportStore:
    """Get or create the report store; follows ENSCONV_REPORTS_DIR"""
    global report_store
    if report_store is None or report_store.reports_dir != get_reports_dir():
        report_store = ReportStore(get_reports_dir())
    return report_store


def _status_for(error: EnsconvError) -> int:
    return 422 if isinstance(error, (ParseError, DimensionError)) else 400


def _plain(report):
    """Same numbers as the CLI report: numpy values become JSON-native, non-finite reals null"""
    return json.loads(dumps_json(report))


def _discard(paths) -> None:
    for path in paths:
        if path and os.path.exists(path):
            os.remove(path)


def _save(upload: Optional[UploadFile]) -> Optional[str]:
    if upload is None:
        return None
    path = save_uploaded_file(upload, UPLOAD_DIR)
    check = validate_file_upload(path, ALLOWED_EXTENSIONS)
    if not check['valid']:
        os.remove(path)
        raise HTTPException(status_code=400, detail=f"{upload.filename}: {check['error']}")
    return path


@router.post("/estimate")
async def estimate(
    predictions_file: UploadFile = File(...),
    truth_file: UploadFile = File(...),
    mask_file: Optional[UploadFile] = File(None),
    mode: str = Form(HOLDOUT),
    B: int = Form(DEFAULT_B),
    seed: int = Form(0),
    target_class: Optional[int] = Form(None),
    t0: Optional[int] = Form(None),
    eps: Optional[float] = Form(None),
    eta: Optional[float] = Form(None),
    store: bool = Form(True)
):
    """Bootstrap estimate of sigma_t from uploaded prediction-array files"""
    paths = []
    try:
        for upload in (predictions_file, truth_file, mask_file):
            paths.append(_save(upload))

        runner = get_analyzer()
        array, truth, mask = runner.load_inputs(*paths)
        report = runner.estimate(array, truth, mask, mode=mode, B=B, seed=seed, target_class=target_class,
                                 t0=t0, eps=eps, eta=eta)
        if store:
            report['report_file'] = os.path.basename(get_report_store().save_report(report, "estimate"))
        return _plain(report)

    except HTTPException:
        raise
    except EnsconvError as e:
        raise HTTPException(status_code=_status_for(e), detail=str(e))
    except Exception as e:
        logger.exception("Estimate failed")
        raise HTTPException(status_code=500, detail=str(e))
    finally:
        _discard(paths)


@router.post("/extrapolate")
async def extrapolate(
    sigma0: float = Form(...),
    t0: int = Form(DEFAULT_T0),
    t: Optional[int] = Form(None),
    eps: Optional[float] = Form(None)
):
    """Extrapolated sigma at t, or the minimum ensemble size for a tolerance eps"""
    try:
        if t is None and eps is None:
            raise HTTPException(status_code=400, detail="Provide t or eps")
        return _plain(get_analyzer().extrapolate(sigma0, t0, t=t, eps=eps))
    except HTTPException:
        raise
    except EnsconvError as e:
        raise HTTPException(status_code=_status_for(e), detail=str(e))


@router.post("/validate-predictions")
async def validate_predictions(
    predictions_file: UploadFile = File(...),
    truth_file: Optional[UploadFile] = File(None),
    mask_file: Optional[UploadFile] = File(None)
):
    """Validate file formats without estimating"""
    paths = []
    try:
        for upload in (predictions_file, truth_file, mask_file):
            paths.append(_save(upload))
        return prediction_parser.validate(*paths)
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
    finally:
        _discard(paths)


@router.get("/reports")
async def get_reports():
    """List stored reports and manifests"""
    store = get_report_store()
    return {"reports": store.list_reports(), "statistics": store.get_statistics()}


@router.get("/reports/{filename}")
async def get_report_content(filename: str):
    """Get a stored report"""
    report = get_report_store().get_report(filename)
    if report is None:
        raise HTTPException(status_code=404, detail="Report not found")
    return report


@router.delete("/reports/{filename}")
async def delete_report(filename: str):
    """Delete a stored report"""
    if not get_report_store().delete_report(filename):
        raise HTTPException(status_code=404, detail="Report not found")
    return {"success": True, "message": f"Report {filename} deleted"}

"""
Classification API routes
"""

from fastapi import APIRouter, Depends, HTTPException

from app.core.errors import SurfaceError
from app.models.schemas import ClassifyRequest, ClassifyResponse
from app.services.pipeline_service import JobRunner, job_runner

router = APIRouter()


def get_job_runner() -> JobRunner:
    """Get job runner instance"""
    return job_runner


@router.post("", response_model=ClassifyResponse)
async def classify(request: ClassifyRequest, runner: JobRunner = Depends(get_job_runner)):
    """Finite total curvature verdict, completeness screen and parallel mean curvature check"""
    try:
        return runner.classify_request(request)

    except SurfaceError as e:
        raise HTTPException(status_code=422, detail=e.to_dict())
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")

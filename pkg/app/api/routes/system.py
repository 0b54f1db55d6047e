"""
System information API routes
"""

from fastapi import APIRouter, HTTPException

from app.core.config import get_settings
from app.models.schemas import SystemInfo

router = APIRouter()


@router.get("/info", response_model=SystemInfo)
async def system_info():
    """Version and the effective numerical settings"""
    try:
        settings = get_settings()

        return SystemInfo(
            app_name=settings.app_name,
            version=settings.version,
            fd_order=settings.fd_order,
            workers=settings.workers,
            tolerances=settings.tolerances.model_dump(),
        )

    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")

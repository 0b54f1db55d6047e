"""
Job API routes
"""

import logging
from typing import List
from uuid import UUID

from fastapi import APIRouter, Depends, HTTPException
from fastapi.concurrency import run_in_threadpool

from app.database.tinydb_manager import DatabaseManager
from app.dependencies import get_store
from app.models.database import JobRecord
from app.models.schemas import JobConfig, JobDetailResponse, JobResponse, MessageResponse
from app.services.pipeline_service import JobRunner, job_runner

logger = logging.getLogger(__name__)

router = APIRouter()


def get_job_runner() -> JobRunner:
    """Get job runner instance"""
    return job_runner


def _detail(job: JobRecord) -> JobDetailResponse:
    return JobDetailResponse(
        id=job.id,
        pipeline=job.pipeline,
        exit_code=job.exit_code,
        passed=job.passed,
        created_at=job.created_at,
        config=job.config,
        entries=job.entries,
        info=job.info,
        error=job.error,
        artifacts=job.artifacts,
    )


@router.post("", response_model=JobDetailResponse)
async def create_job(
    config: JobConfig,
    db: DatabaseManager = Depends(get_store),
    runner: JobRunner = Depends(get_job_runner),
):
    """Run a job to completion and store its report"""
    try:
        outcome = await run_in_threadpool(runner.run, config)
        job = JobRecord(
            pipeline=config.pipeline,
            config=config.model_dump(mode="json"),
            exit_code=outcome.exit_code,
            entries=outcome.report.entries,
            info=outcome.report.info,
            error=outcome.report.error,
            artifacts=outcome.artifacts,
        )
        db.create_job(job)
        logger.info(f"Job {job.id} finished with exit code {job.exit_code}")
        return _detail(job)

    except Exception as e:
        logger.error(f"Job failed unexpectedly: {e}")
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")


@router.get("", response_model=List[JobResponse])
async def list_jobs(db: DatabaseManager = Depends(get_store)):
    """List all stored jobs"""
    try:
        return [
            JobResponse(
                id=job.id,
                pipeline=job.pipeline,
                exit_code=job.exit_code,
                passed=job.passed,
                created_at=job.created_at,
            )
            for job in db.get_all_jobs()
        ]

    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")


@router.get("/{job_id}", response_model=JobDetailResponse)
async def get_job(job_id: UUID, db: DatabaseManager = Depends(get_store)):
    """Get a stored job with its report"""
    try:
        job = db.get_job(job_id)

        if not job:
            raise HTTPException(status_code=404, detail="Job not found")

        return _detail(job)

    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")


@router.delete("/{job_id}", response_model=MessageResponse)
async def delete_job(job_id: UUID, db: DatabaseManager = Depends(get_store)):
    """Delete a stored job"""
    try:
        if not db.get_job(job_id):
            raise HTTPException(status_code=404, detail="Job not found")

        if not db.delete_job(job_id):
            raise HTTPException(status_code=500, detail="Failed to delete job")

        return MessageResponse(message=f"Job {job_id} deleted successfully")

    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")

"""
TinyDB database manager for persistent job storage
"""

import os
import threading
from contextlib import contextmanager
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional
from uuid import UUID

from tinydb import Query, TinyDB

from app.models.database import JobRecord


class DatabaseManager:
    """Manages TinyDB operations for job records"""

    def __init__(self, db_path: str = "data/jobs.json"):
        """Initialize the database manager"""
        self.db_path = db_path
        self._lock = threading.RLock()  # Reentrant lock for thread safety

        # Ensure database directory exists
        os.makedirs(os.path.dirname(os.path.abspath(db_path)), exist_ok=True)

        self.db = TinyDB(db_path, indent=2)
        self.jobs_table = self.db.table("jobs")

    @contextmanager
    def _db_operation(self):
        """Context manager for thread-safe database operations"""
        self._lock.acquire()
        try:
            yield
        finally:
            self._lock.release()

    def _serialize_for_db(self, data: Any) -> Any:
        """Convert UUIDs, datetimes, paths, enums and complex numbers into JSON values"""
        if isinstance(data, dict):
            return {key: self._serialize_for_db(value) for key, value in data.items()}
        if isinstance(data, (list, tuple)):
            return [self._serialize_for_db(item) for item in data]
        if isinstance(data, UUID):
            return str(data)
        if isinstance(data, datetime):
            return data.isoformat()
        if isinstance(data, Path):
            return str(data).replace("\\", "/")
        if isinstance(data, Enum):
            return data.value
        if isinstance(data, complex):
            return f"{data.real!r}{data.imag:+}*i"
        return data

    def _deserialize_from_db(self, data: Dict[str, Any]) -> Dict[str, Any]:
        result = dict(data)
        if isinstance(result.get("id"), str):
            result["id"] = UUID(result["id"])
        if isinstance(result.get("created_at"), str):
            try:
                result["created_at"] = datetime.fromisoformat(result["created_at"])
            except ValueError:
                result.pop("created_at")
        return result

    # Job operations
    def create_job(self, job: JobRecord) -> JobRecord:
        """Store a finished job"""
        with self._db_operation():
            self.jobs_table.insert(self._serialize_for_db(job.model_dump()))
            return job

    def get_job(self, job_id: UUID) -> Optional[JobRecord]:
        """Get a job by ID"""
        with self._db_operation():
            query = Query()
            result = self.jobs_table.search(query.id == str(job_id))
            if result:
                return JobRecord(**self._deserialize_from_db(result[0]))
            return None

    def get_all_jobs(self) -> List[JobRecord]:
        """Get all jobs, oldest first"""
        with self._db_operation():
            jobs = [JobRecord(**self._deserialize_from_db(r)) for r in self.jobs_table.all()]
            return sorted(jobs, key=lambda job: job.created_at)

    def delete_job(self, job_id: UUID) -> bool:
        """Delete a job"""
        with self._db_operation():
            query = Query()
            result = self.jobs_table.remove(query.id == str(job_id))
            return len(result) > 0

    def close(self):
        """Close the database connection"""
        self.db.close()

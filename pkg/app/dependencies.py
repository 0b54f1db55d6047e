"""
Shared FastAPI dependencies
"""

from app.core.config import get_settings
from app.database.tinydb_manager import DatabaseManager

# Global job store instance
_global_store = None


def get_global_store() -> DatabaseManager:
    """Get the global job store instance (singleton)"""
    global _global_store
    if _global_store is None:
        settings = get_settings()
        _global_store = DatabaseManager(settings.database_path)
    return _global_store


def get_store():
    """Get job store instance - FastAPI dependency"""
    return get_global_store()


def close_global_store():
    """Close the global job store (called on app shutdown)"""
    global _global_store
    if _global_store is not None:
        _global_store.close()
        _global_store = None
